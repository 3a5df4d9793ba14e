#include "cfl/experiments.hpp"

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <iostream>
#include <numbers>
#include <random>
#include <set>
#include <sstream>

#include "cfl/averages.hpp"
#include "cfl/dataset_io.hpp"
#include "cfl/kernels.hpp"

namespace cfl {

using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

const char* software_version() { return "0.1.0"; }

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e)) return 2;
  if (dynamic_cast<const ValidationFailure*>(&e)) return 4;
  if (const auto* err = dynamic_cast<const Error*>(&e)) {
    if (err->kind() == ErrorKind::Io) return 2;
    return 3;
  }
  return 3;
}

std::string fnv1a_hex(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

namespace {

void check_keys(const json& j, const std::string& path, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw ConfigError(path, "expected an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || it.key() == a;
    if (!ok) throw ConfigError(path + "/" + it.key(), "unknown key");
  }
}

template <class T>
T field(const json& j, const char* key, const std::string& path, T def) {
  if (!j.contains(key)) return def;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(path + "/" + key, "wrong type");
  }
}

template <class T>
T required(const json& j, const char* key, const std::string& path) {
  if (!j.contains(key)) throw ConfigError(path + "/" + key, "missing");
  return field<T>(j, key, path, T{});
}

Point point_field(const json& j, const std::string& path, int d) {
  if (!j.is_array() || static_cast<int>(j.size()) != d)
    throw ConfigError(path, "expected an array of " + std::to_string(d) + " numbers");
  Point p{};
  for (int a = 0; a < d; ++a) {
    if (!j[a].is_number()) throw ConfigError(path + "/" + std::to_string(a), "expected a number");
    p[a] = j[a].get<double>();
  }
  return p;
}

std::vector<CoulombCenter> centers_field(const json& j, const std::string& path, int d) {
  if (!j.is_array() || j.empty()) throw ConfigError(path, "expected a non-empty array of centers");
  std::vector<CoulombCenter> out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const std::string p = path + "/" + std::to_string(i);
    check_keys(j[i], p, {"charge", "position"});
    CoulombCenter c;
    c.charge = required<double>(j[i], "charge", p);
    if (!(c.charge > 0.0)) throw ConfigError(p + "/charge", "must be positive");
    if (!j[i].contains("position")) throw ConfigError(p + "/position", "missing");
    c.position = point_field(j[i]["position"], p + "/position", d);
    out.push_back(c);
  }
  return out;
}

ojson point_json(const Point& p, int d) {
  ojson a = ojson::array();
  for (int i = 0; i < d; ++i) a.push_back(p[i]);
  return a;
}

ojson grid_json(const BoxGrid& g) { return {{"L", g.L}, {"m", g.m}, {"d", g.d}}; }

ojson index_json(const BoxIndex& j, int d) {
  ojson a = ojson::array();
  for (int i = 0; i < d; ++i) a.push_back(j[i]);
  return a;
}

double env_double(const char* name, std::vector<std::string>* log) {
  const char* v = std::getenv(name);
  if (!v) return NAN;
  char* end = nullptr;
  const double x = std::strtod(v, &end);
  if (end == v || *end != '\0') throw ConfigError(std::string("env:") + name, "not a number");
  if (log) log->push_back(std::string(name) + "=" + v);
  return x;
}

ojson base_report(const ExperimentConfig& cfg, double kappa) {
  ojson r;
  r["software_version"] = software_version();
  r["config_hash"] = cfg.hash;
  r["kappa"] = kappa;
  if (!cfg.overrides.empty()) r["overrides"] = cfg.overrides;
  return r;
}

}  // namespace

ojson potential_to_json(const PotentialModel& V) {
  auto centers = [](const std::vector<CoulombCenter>& cs) {
    ojson a = ojson::array();
    for (const auto& c : cs) a.push_back({{"charge", c.charge}, {"position", point_json(c.position, 3)}});
    return a;
  };
  if (const auto* m = std::get_if<MultiCoulomb>(&V)) {
    if (m->centers.empty()) return {{"kind", "zero"}};
    return {{"kind", "coulomb"}, {"centers", centers(m->centers)}};
  }
  if (const auto* s = std::get_if<SoftenedCoulomb>(&V))
    return {{"kind", "softened_coulomb"}, {"a", s->a}, {"centers", centers(s->centers)}};
  if (const auto* s = std::get_if<StepFunction>(&V)) return {{"kind", "step"}, {"values", s->values}};
  if (const auto* t = std::get_if<TrigSum>(&V)) {
    ojson f = ojson::array(), c = ojson::array();
    for (const auto& k : t->frequencies) f.push_back(point_json(k, 3));
    for (const auto& z : t->coefficients) c.push_back({z.real(), z.imag()});
    return {{"kind", "trig"}, {"frequencies", f}, {"coefficients", c}};
  }
  return {{"kind", "callable"}, {"label", std::get<Callable>(V).label}};
}

PotentialModel potential_from_json(const json& j, const BoxGrid& grid, const std::string& path, double* lipschitz) {
  if (!j.is_object()) throw ConfigError(path, "expected an object");
  const std::string kind = required<std::string>(j, "kind", path);
  const int d = grid.d;
  double lip = field<double>(j, "lipschitz", path, NAN);
  PotentialModel V;
  if (kind == "zero") {
    check_keys(j, path, {"kind", "lipschitz"});
    V = MultiCoulomb{};
    if (std::isnan(lip)) lip = 0.0;
  } else if (kind == "coulomb") {
    check_keys(j, path, {"kind", "centers", "lipschitz"});
    if (d != 3) throw ConfigError(path + "/kind", "Coulomb potentials need d = 3");
    V = MultiCoulomb{centers_field(j.value("centers", json()), path + "/centers", d)};
  } else if (kind == "softened_coulomb") {
    check_keys(j, path, {"kind", "centers", "a", "lipschitz"});
    const double a = required<double>(j, "a", path);
    if (!(a > 0.0)) throw ConfigError(path + "/a", "must be positive");
    V = SoftenedCoulomb{centers_field(j.value("centers", json()), path + "/centers", d), a};
  } else if (kind == "step") {
    check_keys(j, path, {"kind", "values", "lipschitz"});
    auto values = required<std::vector<double>>(j, "values", path);
    if (static_cast<long>(values.size()) != grid.box_count())
      throw ConfigError(path + "/values", "expected one value per box");
    V = StepFunction{grid, values};
  } else if (kind == "trig") {
    check_keys(j, path, {"kind", "frequencies", "coefficients", "lipschitz"});
    const json& f = j.value("frequencies", json());
    const json& c = j.value("coefficients", json());
    if (!f.is_array() || f.empty()) throw ConfigError(path + "/frequencies", "expected a non-empty array");
    if (!c.is_array() || c.size() != f.size())
      throw ConfigError(path + "/coefficients", "expected one coefficient per frequency");
    TrigSum t;
    double l = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) {
      t.frequencies.push_back(point_field(f[i], path + "/frequencies/" + std::to_string(i), d));
      const std::string cp = path + "/coefficients/" + std::to_string(i);
      if (c[i].is_number()) {
        t.coefficients.emplace_back(c[i].get<double>(), 0.0);
      } else if (c[i].is_array() && c[i].size() == 2 && c[i][0].is_number() && c[i][1].is_number()) {
        t.coefficients.emplace_back(c[i][0].get<double>(), c[i][1].get<double>());
      } else {
        throw ConfigError(cp, "expected a number or [re, im]");
      }
      l += 2.0 * std::numbers::pi * std::abs(t.coefficients.back()) * norm(t.frequencies.back());
    }
    V = t;
    if (std::isnan(lip)) lip = l;
  } else if (kind == "harmonic") {
    check_keys(j, path, {"kind", "strength", "center", "lipschitz"});
    const double s = required<double>(j, "strength", path);
    if (!j.contains("center")) throw ConfigError(path + "/center", "missing");
    const Point c = point_field(j["center"], path + "/center", d);
    V = Callable{[s, c](const Point& x) { return s * dot(x - c, x - c); }, 0.0, "harmonic"};
    if (std::isnan(lip)) lip = 2.0 * std::abs(s) * grid.L * std::sqrt(static_cast<double>(d));
    std::get<Callable>(V).lipschitz = lip;
  } else {
    throw ConfigError(path + "/kind", "unknown potential kind '" + kind + "'");
  }
  if (lipschitz) *lipschitz = std::isnan(lip) ? 0.0 : lip;
  return V;
}

ExperimentConfig parse_config(const json& j) {
  check_keys(j, "", {"domain", "profile", "potential", "protocol", "simulator", "solver", "output"});
  ExperimentConfig cfg;
  cfg.hash = fnv1a_hex(j.dump());

  if (!j.contains("domain")) throw ConfigError("/domain", "missing");
  const json& dom = j["domain"];
  check_keys(dom, "/domain", {"L", "m", "d"});
  const double L = required<double>(dom, "L", "/domain");
  const int m = required<int>(dom, "m", "/domain");
  const int d = required<int>(dom, "d", "/domain");
  if (!(L > 0.0)) throw ConfigError("/domain/L", "must be positive");
  if (m < 1) throw ConfigError("/domain/m", "must be at least 1");
  if (d < 1 || d > 3) throw ConfigError("/domain/d", "must be 1, 2 or 3");
  cfg.grid = build_grid(L, m, d);
  if (cfg.grid.box_count() < 3) throw ConfigError("/domain/m", "at least three boxes are required");

  if (j.contains("profile")) {
    check_keys(j["profile"], "/profile", {"kind"});
    if (field<std::string>(j["profile"], "kind", "/profile", "bump") != "bump")
      throw ConfigError("/profile/kind", "only the bump profile is available");
  }
  cfg.profile = Profile::bump(d);

  cfg.potential_json = j.value("potential", json{{"kind", "zero"}});
  cfg.potential = potential_from_json(cfg.potential_json, cfg.grid, "/potential", &cfg.lipschitz);
  const bool coulomb = cfg.potential_json.value("kind", "") == "coulomb";

  const json pr = j.value("protocol", json::object());
  check_keys(pr, "/protocol",
             {"epsilon", "delta", "mode", "backend", "seed", "kappa_source", "kappa", "calibration", "c_t",
              "noiseless", "source", "shot_limit"});
  auto& p = cfg.protocol;
  p.epsilon = field<double>(pr, "epsilon", "/protocol", p.epsilon);
  p.delta = field<double>(pr, "delta", "/protocol", p.delta);
  p.seed = field<std::uint64_t>(pr, "seed", "/protocol", p.seed);
  p.c_t = field<double>(pr, "c_t", "/protocol", p.c_t);
  p.noiseless = field<bool>(pr, "noiseless", "/protocol", p.noiseless);
  p.kappa = field<double>(pr, "kappa", "/protocol", p.kappa);
  p.kappa_source = field<std::string>(pr, "kappa_source", "/protocol", p.kappa_source);
  p.calibration = field<std::string>(pr, "calibration", "/protocol", p.calibration);
  p.shot_limit = static_cast<long>(field<double>(pr, "shot_limit", "/protocol", static_cast<double>(p.shot_limit)));
  try {
    p.mode = parse_mode(field<std::string>(pr, "mode", "/protocol", "sequential"));
  } catch (const Error& e) {
    throw ConfigError("/protocol/mode", e.what());
  }
  try {
    p.backend = parse_backend(field<std::string>(pr, "backend", "/protocol", "dense"));
  } catch (const Error& e) {
    throw ConfigError("/protocol/backend", e.what());
  }
  const std::string source = field<std::string>(pr, "source", "/protocol", "simulator");
  if (source == "simulator") p.source = DataSource::Simulator;
  else if (source == "linear_response") p.source = DataSource::LinearResponse;
  else throw ConfigError("/protocol/source", "expected simulator or linear_response");
  if (!(p.epsilon > 0.0)) throw ConfigError("/protocol/epsilon", "must be positive");
  if (!(p.delta > 0.0 && p.delta < 1.0)) throw ConfigError("/protocol/delta", "must lie in (0, 1)");
  if (!(p.c_t > 0.0)) throw ConfigError("/protocol/c_t", "must be positive");
  if (p.shot_limit < 1) throw ConfigError("/protocol/shot_limit", "must be at least 1");
  if (p.kappa_source == "value") {
    if (!(p.kappa > 0.0)) throw ConfigError("/protocol/kappa", "must be positive");
  } else if (p.kappa_source == "calibration") {
    if (p.calibration.empty() || !std::filesystem::exists(p.calibration))
      throw ConfigError("/protocol/calibration", "calibration file not found");
  } else if (p.kappa_source != "derived") {
    throw ConfigError("/protocol/kappa_source", "expected derived, value or calibration");
  }
  if (p.mode == Mode::Parallel && coulomb)
    throw ConfigError("/protocol/mode", "Coulomb targets are measured sequentially");
  if (p.mode == Mode::Parallel && p.backend == Backend::Analytic)
    throw ConfigError("/protocol/backend", "parallel mode needs the dense or gaussian backend");
  if (p.source == DataSource::Simulator && coulomb && p.backend != Backend::Analytic && d == 3)
    std::cerr << "warning: simulating a bare Coulomb potential uses the softened form\n";

  const json sim = j.value("simulator", json::object());
  check_keys(sim, "/simulator", {"points_per_box", "padding_boxes", "max_dt", "truncation_limit", "dense_mode_budget"});
  auto& so = cfg.simulator;
  so.points_per_box = field<int>(sim, "points_per_box", "/simulator", so.points_per_box);
  so.padding_boxes = field<double>(sim, "padding_boxes", "/simulator", so.padding_boxes);
  so.max_dt = field<double>(sim, "max_dt", "/simulator", so.max_dt);
  so.truncation_limit = field<double>(sim, "truncation_limit", "/simulator", so.truncation_limit);
  so.dense_mode_budget = field<int>(sim, "dense_mode_budget", "/simulator", so.dense_mode_budget);
  if (so.points_per_box < 4) throw ConfigError("/simulator/points_per_box", "must be at least 4");
  if (!(so.padding_boxes >= 0.0)) throw ConfigError("/simulator/padding_boxes", "must be non-negative");
  if (!(so.max_dt > 0.0)) throw ConfigError("/simulator/max_dt", "must be positive");

  const json sv = j.value("solver", json::object());
  check_keys(sv, "/solver",
             {"kind", "force", "K", "lambda_lo", "lambda_hi", "y_star", "c_threshold", "noise_sigmas", "epsilon",
              "frequencies", "epsilon_v", "real_target"});
  auto& s = cfg.solver;
  s.kind = field<std::string>(sv, "kind", "/solver", s.kind);
  s.force = field<bool>(sv, "force", "/solver", s.force);
  s.multi.K = field<int>(sv, "K", "/solver", s.multi.K);
  s.multi.lambda_lo = field<double>(sv, "lambda_lo", "/solver", s.multi.lambda_lo);
  s.multi.lambda_hi = field<double>(sv, "lambda_hi", "/solver", s.multi.lambda_hi);
  s.multi.y_star = field<double>(sv, "y_star", "/solver", s.multi.y_star);
  s.multi.c_threshold = field<double>(sv, "c_threshold", "/solver", s.multi.c_threshold);
  s.multi.noise_sigmas = field<double>(sv, "noise_sigmas", "/solver", s.multi.noise_sigmas);
  s.epsilon = field<double>(sv, "epsilon", "/solver", s.epsilon);
  s.epsilon_v = field<double>(sv, "epsilon_v", "/solver", s.epsilon_v);
  s.real_target = field<bool>(sv, "real_target", "/solver", s.real_target);
  if (sv.contains("frequencies")) {
    const json& f = sv["frequencies"];
    if (!f.is_array() || f.empty()) throw ConfigError("/solver/frequencies", "expected a non-empty array");
    for (std::size_t i = 0; i < f.size(); ++i)
      s.frequencies.push_back(point_field(f[i], "/solver/frequencies/" + std::to_string(i), d));
  }
  if (s.kind == "single_coulomb" || s.kind == "multi_coulomb") {
    if (d != 3) throw ConfigError("/solver/kind", "Coulomb reconstruction needs d = 3");
    if (!(s.multi.lambda_lo > 0.0 && s.multi.lambda_hi >= s.multi.lambda_lo))
      throw ConfigError("/solver/lambda_lo", "charge bounds must satisfy 0 < lambda_lo <= lambda_hi");
    if (m < 8) throw ConfigError("/domain/m", "Coulomb reconstruction needs m >= 8");
    if (s.kind == "single_coulomb" && m != 8 && !s.force)
      throw ConfigError("/solver/force", "single-center reconstruction on m != 8 needs force");
    if (s.kind == "multi_coulomb") {
      if (s.multi.K < 1) throw ConfigError("/solver/K", "must be positive");
      if (!(s.multi.y_star > 0.0)) throw ConfigError("/solver/y_star", "must be positive");
      if (!(s.epsilon > 0.0)) throw ConfigError("/solver/epsilon", "must be positive");
    }
  } else if (s.kind == "trig") {
    if (s.frequencies.empty()) throw ConfigError("/solver/frequencies", "trig reconstruction needs frequencies");
  } else if (s.kind != "step" && s.kind != "none") {
    throw ConfigError("/solver/kind", "expected none, single_coulomb, multi_coulomb, step or trig");
  }
  if (!(s.epsilon_v >= 0.0)) throw ConfigError("/solver/epsilon_v", "must be non-negative");

  const json out = j.value("output", json::object());
  check_keys(out, "/output", {"dataset", "report", "plot", "calibration"});
  cfg.output.dataset = field<std::string>(out, "dataset", "/output", cfg.output.dataset);
  cfg.output.report = field<std::string>(out, "report", "/output", cfg.output.report);
  cfg.output.plot = field<std::string>(out, "plot", "/output", cfg.output.plot);
  cfg.output.calibration = field<std::string>(out, "calibration", "/output", cfg.output.calibration);

  const double sl = env_double("CFL_SHOT_LIMIT", &cfg.overrides);
  if (!std::isnan(sl)) {
    if (!(sl >= 1.0)) throw ConfigError("env:CFL_SHOT_LIMIT", "must be at least 1");
    p.shot_limit = static_cast<long>(sl);
  }
  const double k = env_double("CFL_KAPPA", &cfg.overrides);
  if (!std::isnan(k) && !(k > 0.0)) throw ConfigError("env:CFL_KAPPA", "must be positive");
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  json j;
  try {
    j = json::parse(read_text(path));
  } catch (const json::exception& e) {
    throw ConfigError("", std::string("cannot parse ") + path.string() + ": " + e.what());
  }
  return parse_config(j);
}

double resolve_kappa(const ExperimentConfig& cfg) {
  const double env = env_double("CFL_KAPPA", nullptr);
  if (!std::isnan(env)) return env;
  const auto& p = cfg.protocol;
  if (p.kappa_source == "value") return p.kappa;
  if (p.kappa_source == "calibration") {
    try {
      const json c = json::parse(read_text(p.calibration));
      const double k = c.at("kappa").get<double>();
      if (!(k > 0.0)) throw ConfigError("/protocol/calibration", "calibrated kappa must be positive");
      return k;
    } catch (const json::exception& e) {
      throw ConfigError("/protocol/calibration", e.what());
    }
  }
  return 0.5;
}

std::vector<double> exact_local_averages(const BoxGrid& grid, const Profile& profile, const PotentialModel& V) {
  if (const auto* mc = std::get_if<MultiCoulomb>(&V)) return kernels::coulomb_field_parallel(grid, profile, *mc);
  const long n = grid.box_count();
  std::vector<double> out(n);
  std::exception_ptr err;
#pragma omp parallel for schedule(dynamic)
  for (long f = 0; f < n; ++f) {
    try {
      out[f] = local_average(V, make_orbital(grid, box_at(grid, f), profile));
    } catch (...) {
#pragma omp critical
      if (!err) err = std::current_exception();
    }
  }
  if (err) std::rethrow_exception(err);
  return out;
}

SamplingPlan plan_for(const ExperimentConfig& cfg, double kappa) {
  int rem = 0;
  const int n = static_cast<int>(measurement_triples(cfg.grid, rem).size());
  const auto& p = cfg.protocol;
  return make_plan(p.epsilon, p.delta, cfg.grid, p.mode, n, kappa, p.c_t, p.noiseless);
}

OmegaDataset simulate(const ExperimentConfig& cfg) {
  const double kappa = resolve_kappa(cfg);
  const SamplingPlan plan = plan_for(cfg, kappa);
  const auto& p = cfg.protocol;
  TripleProbabilities probs;
  std::string backend;
  if (p.source == DataSource::LinearResponse) {
    probs = linear_response_probabilities(cfg.grid, cfg.profile,
                                          exact_local_averages(cfg.grid, cfg.profile, cfg.potential), kappa);
    backend = "linear_response";
  } else if (p.mode == Mode::Parallel) {
    probs = parallel_probabilities(cfg.grid, cfg.profile, cfg.potential, p.backend, cfg.simulator);
    backend = to_string(p.backend);
  } else {
    probs = simulator_probabilities(cfg.grid, cfg.profile, cfg.potential, p.backend, cfg.simulator);
    backend = to_string(p.backend);
  }
  return run_protocol(cfg.grid, cfg.profile, plan, probs, {p.seed, backend, p.shot_limit});
}

namespace {

ojson plan_json(const SamplingPlan& plan) {
  return {{"epsilon", plan.epsilon}, {"delta", plan.delta},     {"t", plan.t},
          {"epsilon_p", plan.epsilon_p}, {"T", plan.T},         {"triples", plan.n_triples},
          {"gamma_exponent", plan.gamma_exponent}, {"mode", to_string(plan.mode)}};
}

}  // namespace

ojson cmd_simulate(const ExperimentConfig& cfg) {
  const auto start = std::chrono::steady_clock::now();
  const double kappa = resolve_kappa(cfg);
  const OmegaDataset ds = simulate(cfg);
  ojson extra;
  extra["config_hash"] = cfg.hash;
  extra["software_version"] = software_version();
  extra["plan"] = plan_json(plan_for(cfg, kappa));
  write_dataset(ds, cfg.output.dataset, extra);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  std::cerr << "simulate: " << ds.entries.size() << " boxes in " << secs << " s\n";
  ojson r = base_report(cfg, kappa);
  r["dataset"] = cfg.output.dataset;
  r["boxes"] = ds.entries.size();
  return r;
}

std::string plot_csv(const std::vector<PlotRow>& rows) {
  std::ostringstream os;
  os << "quantity,estimate,bound\n";
  for (const auto& r : rows)
    os << r.quantity << ',' << format_double(r.estimate) << ',' << (r.bound ? format_double(*r.bound) : "") << '\n';
  return os.str();
}

namespace {

const std::vector<CoulombCenter>* true_centers(const ExperimentConfig& cfg) {
  if (const auto* mc = std::get_if<MultiCoulomb>(&cfg.potential))
    if (!mc->centers.empty()) return &mc->centers;
  return nullptr;
}

void reconstruct_single_coulomb(const ExperimentConfig& cfg, const OmegaDataset& data, Reconstruction& out) {
  const auto r = reconstruct_single(data, cfg.solver.multi.lambda_lo, cfg.solver.multi.lambda_hi, cfg.solver.force);
  auto& rep = out.report;
  rep["charge"] = r.charge;
  rep["position"] = point_json(r.position, 3);
  rep["peak"] = index_json(r.peak, 3);
  ojson probes = ojson::array();
  for (const auto& b : r.probes.boxes) probes.push_back(index_json(b, 3));
  rep["probes"] = probes;
  rep["condition"] = r.condition;
  rep["eta_gap"] = r.eta_gap;
  rep["clamped"] = r.clamped;
  out.rows.push_back({"charge", r.charge, std::nullopt});
  for (int a = 0; a < 3; ++a) out.rows.push_back({"y" + std::to_string(a), r.position[a], std::nullopt});
  if (const auto* tc = true_centers(cfg); tc && tc->size() == 1) {
    rep["charge_error"] = std::abs(r.charge - (*tc)[0].charge);
    rep["position_error"] = distance(r.position, (*tc)[0].position);
  }
}

void reconstruct_multi_coulomb(const ExperimentConfig& cfg, const OmegaDataset& data, Reconstruction& out) {
  const auto r = reconstruct_multi(data, cfg.profile, cfg.solver.multi, cfg.solver.epsilon);
  auto& rep = out.report;
  rep["grid_check"] = {{"satisfied", r.grid_check.satisfied},
                       {"required_m", r.grid_check.required_m},
                       {"required_m_strict", r.grid_check.required_m_strict}};
  ojson det = ojson::array();
  for (const auto& c : r.detection.candidates)
    det.push_back({{"box", index_json(c.box, 3)}, {"omega", c.omega}, {"margin", c.margin}});
  rep["detection"] = {{"threshold", r.detection.threshold}, {"s1", r.detection.s1}, {"candidates", det}};
  ojson M = ojson::array();
  for (long i = 0; i < r.system.M.rows(); ++i) {
    ojson row = ojson::array();
    for (long k = 0; k < r.system.M.cols(); ++k) row.push_back(r.system.M(i, k));
    M.push_back(row);
  }
  rep["charge_system"] = {{"M", M},
                          {"inv_norm_inf", r.system.inv_norm_inf},
                          {"inv_norm_2", r.system.inv_norm_2},
                          {"bound", r.system.bound},
                          {"min_dominance_margin", r.system.min_dominance_margin}};
  ojson trace = ojson::array();
  for (const auto& t : r.trace) {
    ojson pos = ojson::array();
    for (const auto& y : t.positions) pos.push_back(point_json(y, 3));
    trace.push_back({{"charges", t.charges}, {"positions", pos}, {"max_update", t.max_update}});
  }
  rep["rounds"] = r.rounds;
  rep["trace"] = trace;
  ojson centers = ojson::array();
  const auto* tc = true_centers(cfg);
  for (std::size_t k = 0; k < r.charges.size(); ++k) {
    ojson c{{"charge", r.charges[k]}, {"position", point_json(r.positions[k], 3)}};
    if (tc) {
      std::size_t best = 0;
      for (std::size_t i = 1; i < tc->size(); ++i)
        if (distance(r.positions[k], (*tc)[i].position) < distance(r.positions[k], (*tc)[best].position)) best = i;
      c["position_error"] = distance(r.positions[k], (*tc)[best].position);
      c["charge_error"] = std::abs(r.charges[k] - (*tc)[best].charge);
    }
    centers.push_back(c);
    out.rows.push_back({"charge_" + std::to_string(k), r.charges[k], std::nullopt});
    for (int a = 0; a < 3; ++a)
      out.rows.push_back({"y_" + std::to_string(k) + "_" + std::to_string(a), r.positions[k][a], cfg.solver.epsilon});
  }
  rep["centers"] = centers;
}

void reconstruct_step(const ExperimentConfig& cfg, const OmegaDataset& data, Reconstruction& out) {
  const auto r = step_reconstruct(data, cfg.lipschitz, cfg.protocol.epsilon);
  out.report["sup_bound"] = r.sup_bound;
  out.report["coefficients"] = r.potential.values;
  for (long f = 0; f < data.grid.box_count(); ++f)
    out.rows.push_back({"step_" + std::to_string(f), r.potential.values[f], r.sup_bound});
}

void reconstruct_trig(const ExperimentConfig& cfg, const OmegaDataset& data, Reconstruction& out) {
  const TrigBasis basis{cfg.solver.frequencies};
  const OverlapMatrix M = assemble_overlap(basis, data.grid, cfg.profile);
  auto r = pseudo_solve(M, data.values(), cfg.protocol.epsilon, cfg.solver.epsilon_v);
  bool paired = false;
  if (cfg.solver.real_target) {
    paired = symmetrize_conjugate_pairs(basis, r.coefficients);
    if (!paired) std::cerr << "warning: frequencies are not closed under negation; coefficients left complex\n";
  }
  const auto va = vandermonde_analysis(basis, data.grid, cfg.profile);
  auto& rep = out.report;
  ojson coeffs = ojson::array();
  for (long i = 0; i < r.coefficients.size(); ++i) {
    coeffs.push_back({r.coefficients(i).real(), r.coefficients(i).imag()});
    out.rows.push_back({"re_" + std::to_string(i), r.coefficients(i).real(), r.bound});
    out.rows.push_back({"im_" + std::to_string(i), r.coefficients(i).imag(), r.bound});
  }
  rep["coefficients"] = coeffs;
  rep["conjugate_paired"] = paired;
  rep["rank"] = r.rank;
  rep["rank_deficient"] = r.rank_deficient;
  rep["pinv_norm_2"] = r.pinv_norm_2;
  rep["pinv_norm_inf"] = r.pinv_norm_inf;
  rep["condition"] = r.condition;
  rep["residual"] = r.residual;
  rep["bound"] = r.bound;
  rep["vandermonde"] = {{"q", std::isinf(va.q) ? ojson("inf") : ojson(va.q)},
                        {"applicable", va.applicable},
                        {"sigma_min", va.sigma_min},
                        {"sigma_max", va.sigma_max},
                        {"d_inv_norm", va.d_inv_norm},
                        {"neumann_bound", std::isinf(va.neumann_bound) ? ojson("inf") : ojson(va.neumann_bound)},
                        {"neumann_holds", va.neumann_holds}};
}

}  // namespace

Reconstruction reconstruct(const ExperimentConfig& cfg, const OmegaDataset& data) {
  if (data.grid.L != cfg.grid.L || data.grid.m != cfg.grid.m || data.grid.d != cfg.grid.d)
    throw Error(ErrorKind::GridMismatch, "dataset grid differs from the configured grid");
  Reconstruction out;
  out.report = base_report(cfg, data.kappa);
  out.report["solver"] = cfg.solver.kind;
  out.report["dataset"] = {{"grid", grid_json(data.grid)}, {"seed", data.seed}, {"backend", data.backend}};
  const auto& k = cfg.solver.kind;
  if (k == "single_coulomb") reconstruct_single_coulomb(cfg, data, out);
  else if (k == "multi_coulomb") reconstruct_multi_coulomb(cfg, data, out);
  else if (k == "step") reconstruct_step(cfg, data, out);
  else if (k == "trig") reconstruct_trig(cfg, data, out);
  else throw ConfigError("/solver/kind", "no solver selected");
  return out;
}

ojson cmd_reconstruct(const ExperimentConfig& cfg, const std::string& dataset_path) {
  const std::string path = dataset_path.empty() ? cfg.output.dataset : dataset_path;
  const OmegaDataset data = read_dataset(path);
  const Reconstruction r = reconstruct(cfg, data);
  write_text(cfg.output.report, r.report.dump(2) + "\n");
  write_text(cfg.output.plot, plot_csv(r.rows));
  return r.report;
}

ojson cmd_plan(const PlanRequest& req) {
  SamplingPlan plan = make_plan(req.epsilon, req.delta, req.grid, req.mode, req.n_triples, req.kappa, req.c_t);
  if (req.epsilon_p) {
    plan.epsilon_p = *req.epsilon_p;
    plan.T = plan_samples(plan.epsilon_p, req.delta, req.n_triples);
  }
  const double n = req.n_triples;
  const double rounds = req.mode == Mode::Sequential ? n : 1.0;
  ojson r = plan_json(plan);
  r["ell"] = req.grid.ell();
  r["kappa"] = req.kappa;
  r["total_shots"] = static_cast<double>(plan.T) * 3.0 * rounds;
  r["total_evolution_time"] = static_cast<double>(plan.T) * plan.t * 3.0 * rounds;
  r["log_factor"] = std::log(6.0 * n / req.delta);
  r["log_factor_union"] = std::log(3.0 * n / req.delta);
  r["scaling_reference"] =
      std::pow(req.grid.ell(), -2.0 * plan.gamma_exponent) * std::pow(req.epsilon, -3.0) * std::log(3.0 * n / req.delta);
  return r;
}

std::vector<ValidationCheck> run_validation(const ValidationOptions& opt) {
  double scale = env_double("CFL_TOLERANCE_SCALE", nullptr);
  if (std::isnan(scale)) scale = 1.0;
  double kappa_used = env_double("CFL_KAPPA", nullptr);
  if (std::isnan(kappa_used)) kappa_used = 0.5;
  std::mt19937_64 rng(opt.seed);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  std::vector<ValidationCheck> checks;

  {
    ValidationCheck c{"sigma_involution", false, 0.0, 1e-12 * scale, "1000 random triples"};
    for (int i = 0; i < 1000; ++i) {
      const std::array<double, 3> w{20 * U(rng) - 10, 20 * U(rng) - 10, 20 * U(rng) - 10};
      const double tkin = 50 * U(rng);
      const auto back = recover_omegas(forward_differences(w, kappa_used, tkin), kappa_used, tkin);
      for (int a = 0; a < 3; ++a)
        c.deviation = std::max(c.deviation, std::abs(back[a] - w[a]) / (1.0 + std::abs(w[a]) + tkin));
    }
    c.passed = c.deviation <= c.tolerance;
    checks.push_back(c);
  }
  {
    ValidationCheck c{"shell_theorem", false, 0.0, 1e-8 * scale, ""};
    const BoxGrid g = build_grid(8.0, 8, 3);
    const Profile prof = Profile::bump(3);
    for (int i = 0; i < opt.shell_configs; ++i) {
      const BoxIndex j{int(U(rng) * 8), int(U(rng) * 8), int(U(rng) * 8)};
      const Point p = box_midpoint(g, j);
      Point y;
      do {
        y = {p[0] + 4 * U(rng) - 2, p[1] + 4 * U(rng) - 2, p[2] + 4 * U(rng) - 2};
      } while (distance(y, p) < 0.6);
      const double lam = 0.5 + 4.5 * U(rng);
      const double q = local_average(MultiCoulomb{{{lam, y}}}, make_orbital(g, j, prof), {1e-11, 1e-14, 4000});
      c.deviation = std::max(c.deviation, std::abs(q - lam / distance(y, p)) / (lam / distance(y, p)));
    }
    c.detail = std::to_string(opt.shell_configs) + " random centers outside the support";
    c.passed = c.deviation <= c.tolerance;
    checks.push_back(c);
  }
  {
    ValidationCheck an{"backend_analytic_vs_dense", false, 0.0, 1e-8 * scale, ""};
    ValidationCheck ga{"backend_gaussian_vs_dense", false, 0.0, 1e-8 * scale, ""};
    const BoxGrid g = build_grid(3.0, 3, 1);
    const Profile prof = Profile::bump(1);
    SimulatorOptions so;
    const std::array<std::pair<int, int>, 3> pairs{{{0, 1}, {0, 2}, {1, 2}}};
    std::ostringstream table;
    for (int i = 0; i < opt.backend_settings; ++i) {
      const double s = 0.1 + 0.9 * U(rng);
      const double c0 = 3.0 * U(rng);
      const PotentialModel V = Callable{[s, c0](const Point& x) { return s * (x[0] - c0) * (x[0] - c0); }, 0.0, "h"};
      Simulator sim(g, prof, V, {partition_triples(g).triples.front()}, so);
      const auto [a, b] = pairs[i % 3];
      const MeasurementSetting ms{0, a, b, 1e-3 + 2e-2 * U(rng)};
      const double pa = sim.p_analytic(ms);
      const double pd = sim.probability(Backend::Dense, ms, false);
      const double pdr = sim.probability(Backend::Dense, ms, true);
      const double pg = sim.probability(Backend::Gaussian, ms, true);
      an.deviation = std::max(an.deviation, std::abs(pa - pd));
      ga.deviation = std::max(ga.deviation, std::abs(pg - pdr));
      table << "setting " << i << ": analytic " << format_double(pa) << " dense " << format_double(pd)
            << " dense-regional " << format_double(pdr) << " gaussian " << format_double(pg) << "\n";
    }
    an.detail = ga.detail = table.str();
    an.passed = an.deviation <= an.tolerance;
    ga.passed = ga.deviation <= ga.tolerance;
    checks.push_back(an);
    checks.push_back(ga);
  }
  {
    ValidationCheck c{"kappa_consistency", false, 0.0, 1e-3 * scale, ""};
    SimulatorOptions so;
    so.points_per_box = opt.calibration_points_per_box;
    const auto rep = calibrate_derivative_constant(Profile::bump(1), build_grid(3.0, 3, 1), so);
    c.deviation = std::abs(rep.kappa - kappa_used);
    std::ostringstream os;
    os << "calibrated " << format_double(rep.kappa) << " vs used " << format_double(kappa_used) << ", pair spread "
       << format_double(rep.pair_spread);
    c.detail = os.str();
    c.passed = c.deviation <= c.tolerance;
    checks.push_back(c);
  }
  return checks;
}

ojson validation_report(const std::vector<ValidationCheck>& checks) {
  ojson r;
  r["software_version"] = software_version();
  bool all = true;
  ojson arr = ojson::array();
  for (const auto& c : checks) {
    all = all && c.passed;
    arr.push_back({{"name", c.name},
                   {"passed", c.passed},
                   {"deviation", c.deviation},
                   {"tolerance", c.tolerance},
                   {"detail", c.detail}});
  }
  r["passed"] = all;
  r["checks"] = arr;
  return r;
}

ojson calibration_json(const CalibrationReport& rep, const BoxGrid& grid, const SimulatorOptions& opt) {
  return {{"software_version", software_version()},
          {"kappa", rep.kappa},
          {"pair_spread", rep.pair_spread},
          {"fit_residual", rep.fit_residual},
          {"kappas", rep.kappas},
          {"times", rep.times},
          {"grid", grid_json(grid)},
          {"points_per_box", opt.points_per_box}};
}

ojson cmd_calibrate(const BoxGrid& grid, const SimulatorOptions& opt, const std::filesystem::path& out) {
  const auto rep = calibrate_derivative_constant(Profile::bump(grid.d), grid, opt);
  ojson j = calibration_json(rep, grid, opt);
  write_text(out, j.dump(2) + "\n");
  return j;
}

}  // namespace cfl
