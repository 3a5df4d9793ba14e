#include "cfl/dataset_io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "cfl/error.hpp"

namespace cfl {

std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string dataset_csv(const OmegaDataset& ds) {
  std::ostringstream os;
  for (int a = 0; a < ds.grid.d; ++a) os << 'j' << a << ',';
  os << "omega_hat,stderr,T,t,mode\n";
  for (const auto& e : ds.entries) {
    for (int a = 0; a < ds.grid.d; ++a) os << e.j[a] << ',';
    os << format_double(e.omega_hat) << ',' << format_double(e.std_error) << ',' << e.T << ','
       << format_double(e.t) << ',' << to_string(e.mode) << '\n';
  }
  return os.str();
}

OmegaDataset parse_dataset_csv(const std::string& text, const BoxGrid& grid) {
  OmegaDataset ds;
  ds.grid = grid;
  ds.entries.resize(grid.box_count());
  std::vector<bool> seen(grid.box_count(), false);
  std::istringstream is(text);
  std::string line;
  if (!std::getline(is, line)) throw Error(ErrorKind::Io, "empty dataset");
  long row = 1;
  while (std::getline(is, line)) {
    ++row;
    if (line.empty()) continue;
    std::vector<std::string> cols;
    std::stringstream ls(line);
    std::string c;
    while (std::getline(ls, c, ',')) cols.push_back(c);
    if (static_cast<int>(cols.size()) != grid.d + 5)
      throw Error(ErrorKind::Io, "dataset row " + std::to_string(row) + " has the wrong column count");
    OmegaEntry e;
    try {
      for (int a = 0; a < grid.d; ++a) e.j[a] = std::stoi(cols[a]);
      e.omega_hat = std::stod(cols[grid.d]);
      e.std_error = std::stod(cols[grid.d + 1]);
      e.T = std::stol(cols[grid.d + 2]);
      e.t = std::stod(cols[grid.d + 3]);
      e.mode = parse_mode(cols[grid.d + 4]);
    } catch (const std::logic_error&) {
      throw Error(ErrorKind::Io, "dataset row " + std::to_string(row) + " is malformed");
    }
    if (!contains(grid, e.j)) throw Error(ErrorKind::GridMismatch, "dataset row outside the configured grid");
    const long f = flat_index(grid, e.j);
    ds.entries[f] = e;
    seen[f] = true;
  }
  for (long f = 0; f < grid.box_count(); ++f)
    if (!seen[f]) throw Error(ErrorKind::InconsistentData, "dataset is missing box " + std::to_string(f));
  return ds;
}

nlohmann::ordered_json dataset_sidecar(const OmegaDataset& ds) {
  nlohmann::ordered_json j;
  j["grid"] = {{"L", ds.grid.L}, {"m", ds.grid.m}, {"d", ds.grid.d}};
  j["seed"] = ds.seed;
  j["backend"] = ds.backend;
  j["kappa"] = ds.kappa;
  return j;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(ErrorKind::Io, "cannot write " + path.string());
  os << text;
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(ErrorKind::Io, "cannot read " + path.string());
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

std::filesystem::path sidecar_path(const std::filesystem::path& csv_path) {
  auto p = csv_path;
  p.replace_extension(".json");
  return p;
}

void write_dataset(const OmegaDataset& ds, const std::filesystem::path& csv_path,
                   const nlohmann::ordered_json& extra) {
  write_text(csv_path, dataset_csv(ds));
  auto side = dataset_sidecar(ds);
  for (auto it = extra.begin(); it != extra.end(); ++it) side[it.key()] = it.value();
  write_text(sidecar_path(csv_path), side.dump(2) + "\n");
}

OmegaDataset read_dataset(const std::filesystem::path& csv_path) {
  nlohmann::json side;
  try {
    side = nlohmann::json::parse(read_text(sidecar_path(csv_path)));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Io, std::string("bad dataset sidecar: ") + e.what());
  }
  const auto& g = side.at("grid");
  const BoxGrid grid = build_grid(g.at("L").get<double>(), g.at("m").get<int>(), g.at("d").get<int>());
  OmegaDataset ds = parse_dataset_csv(read_text(csv_path), grid);
  ds.seed = side.value("seed", std::uint64_t{0});
  ds.backend = side.value("backend", std::string{});
  ds.kappa = side.value("kappa", 0.5);
  return ds;
}

}  // namespace cfl
