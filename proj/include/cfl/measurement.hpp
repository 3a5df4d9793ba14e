#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "cfl/backends.hpp"
#include "cfl/grid.hpp"

namespace cfl {

enum class Mode { Sequential, Parallel };

Mode parse_mode(const std::string& s);
const char* to_string(Mode m);

// Shots per pair setting: ceil(ln(6 n / delta) / (2 eps_p^2)).
long plan_samples(double epsilon_p, double delta, int n_triples);

// 4 for sequential, 3d + 10 for parallel.
int time_exponent(int d, Mode mode);

// t = c_t * ell^g * epsilon.
double choose_time(double epsilon, const BoxGrid& grid, Mode mode, double c_t = 1.0);

struct SamplingPlan {
  double epsilon = 0.1;
  double delta = 0.05;
  double t = 0.0;
  double kappa = 0.5;
  double epsilon_p = 0.0;  // kappa t epsilon / 3
  long T = 0;              // 0 means exact probabilities
  int n_triples = 1;
  int gamma_exponent = 4;
  Mode mode = Mode::Sequential;
};

SamplingPlan make_plan(double epsilon, double delta, const BoxGrid& grid, Mode mode, int n_triples,
                       double kappa, double c_t = 1.0, bool noiseless = false);

struct ProbabilityEstimate {
  double p_hat = 0.0;
  double std_error = 0.0;
};

ProbabilityEstimate estimate_probability(std::span<const std::uint8_t> shots);

// Successes among T shots with success probability p on the given stream.
// Above `shot_limit` shots the count is drawn from the binomial law with a
// counter engine on the same stream.
long draw_successes(double p, long T, std::uint64_t seed, std::uint64_t stream,
                    long shot_limit = 100'000'000);

// omega_alpha = (1 / 2 kappa) sum sigma_alpha(beta, gamma) D^{beta gamma} - T_kin,
// with D ordered (01, 02, 12) and sigma = +1 if alpha in {beta, gamma}.
std::array<double, 3> recover_omegas(const std::array<double, 3>& D, double kappa, double tkin);
// Inverse map D^{beta gamma} = kappa (omega_beta + omega_gamma + 2 T_kin).
std::array<double, 3> forward_differences(const std::array<double, 3>& omega, double kappa, double tkin);

struct OmegaEntry {
  BoxIndex j{};
  double omega_hat = 0.0;
  double std_error = 0.0;
  long T = 0;
  double t = 0.0;
  Mode mode = Mode::Sequential;
};

struct OmegaDataset {
  BoxGrid grid;
  std::vector<OmegaEntry> entries;  // flat box order
  std::uint64_t seed = 0;
  std::string backend;
  double kappa = 0.5;

  const OmegaEntry& at(const BoxIndex& j) const;
  std::vector<double> values() const;
};

// Probabilities of the pairs (01, 02, 12) for one triple at time t.
using TripleProbabilities = std::function<std::array<double, 3>(const std::array<BoxIndex, 3>&, double)>;

// Triples covering every box: the partition plus one auxiliary triple that
// carries the remainder boxes, whose leading entries are the remainder.
std::vector<std::array<BoxIndex, 3>> measurement_triples(const BoxGrid& grid, int& remainder_count);

struct ProtocolOptions {
  std::uint64_t seed = 0;
  std::string backend = "analytic";
  long shot_limit = 100'000'000;
};

// Algorithm driver: for each triple and pair draws T shots, forms
// D = (p_hat - 1/2) / t and recovers omega for each box.
OmegaDataset run_protocol(const BoxGrid& grid, const Profile& profile, const SamplingPlan& plan,
                          const TripleProbabilities& probs, const ProtocolOptions& opt);

// Sequential probabilities from the quantum backends (one Simulator per triple).
TripleProbabilities simulator_probabilities(const BoxGrid& grid, const Profile& profile,
                                            const PotentialModel& V, Backend backend,
                                            const SimulatorOptions& sim_opt);

// Parallel probabilities: every triple prepared at once on one Simulator.
// Evaluations are memoised per time.
TripleProbabilities parallel_probabilities(const BoxGrid& grid, const Profile& profile,
                                           const PotentialModel& V, Backend backend,
                                           const SimulatorOptions& sim_opt);

// First-order response p = 1/2 + kappa t (omega_a + omega_b + 2 T_kin) for
// given exact local averages (flat order).
TripleProbabilities linear_response_probabilities(const BoxGrid& grid, const Profile& profile,
                                                  std::vector<double> omega, double kappa);

}  // namespace cfl
