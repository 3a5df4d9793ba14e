#include "cfl/measurement.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <random>

#include "cfl/error.hpp"
#include "cfl/kernels.hpp"
#include "cfl/rng.hpp"

namespace cfl {

Mode parse_mode(const std::string& s) {
  if (s == "sequential") return Mode::Sequential;
  if (s == "parallel") return Mode::Parallel;
  throw Error(ErrorKind::InvalidArgument, "unknown mode '" + s + "'");
}

const char* to_string(Mode m) { return m == Mode::Sequential ? "sequential" : "parallel"; }

long plan_samples(double epsilon_p, double delta, int n_triples) {
  if (!(epsilon_p > 0.0 && epsilon_p < 1.0)) throw Error(ErrorKind::InvalidArgument, "epsilon_p must lie in (0, 1)");
  if (!(delta > 0.0 && delta < 1.0)) throw Error(ErrorKind::InvalidArgument, "delta must lie in (0, 1)");
  if (n_triples < 1) throw Error(ErrorKind::InvalidArgument, "at least one triple is required");
  const double T = std::ceil(std::log(6.0 * n_triples / delta) / (2.0 * epsilon_p * epsilon_p));
  if (!(T < 0x1.0p62)) throw Error(ErrorKind::InvalidArgument, "shot count per setting does not fit in 62 bits");
  return static_cast<long>(T);
}

int time_exponent(int d, Mode mode) { return mode == Mode::Sequential ? 4 : 3 * d + 10; }

double choose_time(double epsilon, const BoxGrid& grid, Mode mode, double c_t) {
  if (!(epsilon > 0.0)) throw Error(ErrorKind::InvalidArgument, "epsilon must be positive");
  return c_t * std::pow(grid.ell(), time_exponent(grid.d, mode)) * epsilon;
}

SamplingPlan make_plan(double epsilon, double delta, const BoxGrid& grid, Mode mode, int n_triples,
                       double kappa, double c_t, bool noiseless) {
  if (!(kappa > 0.0)) throw Error(ErrorKind::MissingCalibration, "derivative constant must be positive");
  SamplingPlan p;
  p.epsilon = epsilon;
  p.delta = delta;
  p.mode = mode;
  p.kappa = kappa;
  p.n_triples = n_triples;
  p.gamma_exponent = time_exponent(grid.d, mode);
  p.t = choose_time(epsilon, grid, mode, c_t);
  p.epsilon_p = kappa * p.t * epsilon / 3.0;
  p.T = noiseless ? 0 : plan_samples(p.epsilon_p, delta, n_triples);
  return p;
}

ProbabilityEstimate estimate_probability(std::span<const std::uint8_t> shots) {
  if (shots.empty()) throw Error(ErrorKind::InvalidArgument, "no shots to estimate from");
  long hits = 0;
  for (auto s : shots) hits += s != 0;
  const double n = static_cast<double>(shots.size());
  const double p = hits / n;
  return {p, std::sqrt(p * (1.0 - p) / n)};
}

long draw_successes(double p, long T, std::uint64_t seed, std::uint64_t stream, long shot_limit) {
  if (T <= shot_limit) return kernels::count_shots_parallel(p, T, seed, stream);
  CounterEngine eng(seed, stream);
  std::binomial_distribution<long> dist(T, std::clamp(p, 0.0, 1.0));
  return dist(eng);
}

std::array<double, 3> recover_omegas(const std::array<double, 3>& D, double kappa, double tkin) {
  const double s = 1.0 / (2.0 * kappa);
  return {s * (D[0] + D[1] - D[2]) - tkin, s * (D[0] - D[1] + D[2]) - tkin,
          s * (-D[0] + D[1] + D[2]) - tkin};
}

std::array<double, 3> forward_differences(const std::array<double, 3>& w, double kappa, double tkin) {
  return {kappa * (w[0] + w[1] + 2.0 * tkin), kappa * (w[0] + w[2] + 2.0 * tkin),
          kappa * (w[1] + w[2] + 2.0 * tkin)};
}

const OmegaEntry& OmegaDataset::at(const BoxIndex& j) const {
  check_index(grid, j);
  return entries.at(flat_index(grid, j));
}

std::vector<double> OmegaDataset::values() const {
  std::vector<double> v;
  v.reserve(entries.size());
  for (const auto& e : entries) v.push_back(e.omega_hat);
  return v;
}

std::vector<std::array<BoxIndex, 3>> measurement_triples(const BoxGrid& grid, int& remainder_count) {
  const TripleSet ts = partition_triples(grid);
  if (ts.triples.empty()) throw Error(ErrorKind::InvalidArgument, "grid has fewer than three boxes");
  auto out = ts.triples;
  remainder_count = static_cast<int>(ts.remainder.size());
  if (remainder_count > 0) {
    const auto& last = ts.triples.back();
    std::array<BoxIndex, 3> aux{};
    int k = 0;
    for (const auto& j : ts.remainder) aux[k++] = j;
    for (int i = 0; k < 3; ++i) aux[k++] = last[i];
    out.push_back(aux);
  }
  return out;
}

OmegaDataset run_protocol(const BoxGrid& grid, const Profile& profile, const SamplingPlan& plan,
                          const TripleProbabilities& probs, const ProtocolOptions& opt) {
  if (!(plan.kappa > 0.0)) throw Error(ErrorKind::MissingCalibration, "derivative constant missing");
  if (!(plan.t > 0.0)) throw Error(ErrorKind::InvalidArgument, "evolution time must be positive");
  int rem = 0;
  const auto triples = measurement_triples(grid, rem);
  const double tkin = profile.kinetic_constant() / (grid.ell() * grid.ell());

  OmegaDataset ds;
  ds.grid = grid;
  ds.seed = opt.seed;
  ds.backend = opt.backend;
  ds.kappa = plan.kappa;
  ds.entries.resize(grid.box_count());

  for (std::size_t k = 0; k < triples.size(); ++k) {
    const auto& tr = triples[k];
    const auto p = probs(tr, plan.t);
    std::array<double, 3> D{};
    double var = 0.0;
    for (int q = 0; q < 3; ++q) {
      double ph = p[q];
      if (plan.T > 0) {
        const long hits = draw_successes(p[q], plan.T, opt.seed, stream_id(k, q), opt.shot_limit);
        ph = static_cast<double>(hits) / static_cast<double>(plan.T);
        var += ph * (1.0 - ph) / static_cast<double>(plan.T);
      }
      D[q] = (ph - 0.5) / plan.t;
    }
    const auto w = recover_omegas(D, plan.kappa, tkin);
    const double se = std::sqrt(var) / (2.0 * plan.kappa * plan.t);
    const bool aux = rem > 0 && k + 1 == triples.size();
    const int use = aux ? rem : 3;
    for (int a = 0; a < use; ++a) {
      OmegaEntry& e = ds.entries[flat_index(grid, tr[a])];
      e.j = tr[a];
      e.omega_hat = w[a];
      e.std_error = se;
      e.T = plan.T;
      e.t = plan.t;
      e.mode = aux ? Mode::Sequential : plan.mode;
    }
  }
  return ds;
}

namespace {

constexpr std::array<std::pair<int, int>, 3> kPairs{{{0, 1}, {0, 2}, {1, 2}}};

}  // namespace

TripleProbabilities simulator_probabilities(const BoxGrid& grid, const Profile& profile,
                                            const PotentialModel& V, Backend backend,
                                            const SimulatorOptions& sim_opt) {
  return [=](const std::array<BoxIndex, 3>& tr, double t) {
    Simulator sim(grid, profile, V, {tr}, sim_opt);
    std::array<double, 3> p{};
    for (int q = 0; q < 3; ++q) p[q] = sim.probability(backend, {0, kPairs[q].first, kPairs[q].second, t});
    return p;
  };
}

TripleProbabilities parallel_probabilities(const BoxGrid& grid, const Profile& profile,
                                           const PotentialModel& V, Backend backend,
                                           const SimulatorOptions& sim_opt) {
  if (backend == Backend::Analytic)
    throw Error(ErrorKind::InvalidArgument, "parallel mode needs the dense or gaussian backend");
  const auto triples = partition_triples(grid).triples;
  auto sim = std::make_shared<Simulator>(grid, profile, V, triples, sim_opt);
  auto index = std::make_shared<std::map<long, int>>();
  for (int k = 0; k < static_cast<int>(triples.size()); ++k) (*index)[flat_index(grid, triples[k][0])] = k;
  auto seq = simulator_probabilities(grid, profile, V, backend, sim_opt);
  return [=](const std::array<BoxIndex, 3>& tr, double t) {
    auto it = index->find(flat_index(grid, tr[0]));
    if (it == index->end() || sim->triples()[it->second] != tr) return seq(tr, t);
    std::array<double, 3> p{};
    for (int q = 0; q < 3; ++q)
      p[q] = sim->probability(backend, {it->second, kPairs[q].first, kPairs[q].second, t});
    return p;
  };
}

TripleProbabilities linear_response_probabilities(const BoxGrid& grid, const Profile& profile,
                                                  std::vector<double> omega, double kappa) {
  if (static_cast<long>(omega.size()) != grid.box_count())
    throw Error(ErrorKind::InvalidArgument, "one local average per box is required");
  const double tkin = profile.kinetic_constant() / (grid.ell() * grid.ell());
  return [=](const std::array<BoxIndex, 3>& tr, double t) {
    std::array<double, 3> w{};
    for (int a = 0; a < 3; ++a) w[a] = omega[flat_index(grid, tr[a])];
    const auto D = forward_differences(w, kappa, tkin);
    return std::array<double, 3>{0.5 + t * D[0], 0.5 + t * D[1], 0.5 + t * D[2]};
  };
}

}  // namespace cfl
