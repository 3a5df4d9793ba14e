#pragma once

#include <array>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cfl/grid.hpp"
#include "cfl/measurement.hpp"
#include "cfl/potentials.hpp"

namespace cfl {

using OmegaLookup = std::function<double(const BoxIndex&)>;

// Argmax of omega_hat; ties go to the lexicographically smallest index.
BoxIndex find_peak(const OmegaDataset& data);

struct ProbeSet {
  BoxIndex j0{};
  std::array<int, 3> e{};            // signs of the axis steps toward j0
  std::array<BoxIndex, 6> boxes{};   // j0, j0 - e1, j0 - e2, peak + 2e3, peak + 3e3, peak + 4e3
};

// Probe boxes inside the 8^3 window [lo, lo + 7] that contains the peak. On an
// m = 8 grid the window is the grid; other m need `force`.
ProbeSet select_probe_points(const BoxIndex& peak, const BoxGrid& grid, bool force = false);

struct SingleCoulombResult {
  double charge = 0.0;
  Point position{};
  BoxIndex peak{};
  ProbeSet probes;
  double condition = 0.0;  // 2-norm condition number of the 4x4 system
  double eta_gap = 0.0;    // eta_12 - eta_34
  bool clamped = false;
};

// Solves v_ij = eta_ij lambda^2 + 2 <p_i - p_j, y> on the rows
// (peak+2e3, peak+3e3), (peak+3e3, peak+4e3), (j0-e2, j0), (j0-e1, j0),
// with eta_ij = 1/omega_i^2 - 1/omega_j^2 and v_ij = |p_i|^2 - |p_j|^2.
SingleCoulombResult solve_single(const OmegaLookup& omega, const BoxGrid& grid, const ProbeSet& probes,
                                 double lambda_lo, double lambda_hi);

// find_peak, select_probe_points and solve_single on a dataset.
SingleCoulombResult reconstruct_single(const OmegaDataset& data, double lambda_lo, double lambda_hi,
                                       bool force = false);

struct MultiCoulombConfig {
  int K = 1;
  double lambda_lo = 0.5;
  double lambda_hi = 5.0;
  double y_star = 5.0;
  double c_threshold = 0.0;  // <= 0 selects min(2 K Lambda* / y*, Lambda_* / (2 ell^{1/3}))
  double noise_sigmas = 3.0;
  int charge_sweeps = 1;     // charge-only passes before the first position round
};

int neighborhood_radius(const BoxGrid& grid);  // ceil(ell^{-1/3})
double default_threshold(const MultiCoulombConfig& cfg, const BoxGrid& grid);

struct GridCheck {
  long required_m = 0;         // max{64/L, (16 y*/3)^3, 125/y*^3}
  long required_m_strict = 0;  // includes the charge-dependent terms
  bool satisfied = false;
  std::string message;
};

GridCheck validate_grid(const MultiCoulombConfig& cfg, const BoxGrid& grid);

struct DetectionCandidate {
  BoxIndex box{};
  double omega = 0.0;
  double margin = 0.0;  // min over the s1 shell of omega_j - omega_j'
};

struct Detection {
  std::vector<BoxIndex> centers;
  std::vector<DetectionCandidate> candidates;
  double threshold = 0.0;
  int s1 = 1;
};

// Boxes whose omega exceeds every box on the boundary of their s1 neighbourhood
// by at least c, deduplicated to pairwise distance y* - 2 s1 ell.
Detection detect_centers(const OmegaDataset& data, const MultiCoulombConfig& cfg);

struct ChargeSystem {
  Eigen::MatrixXd M;
  double inv_norm_inf = 0.0;
  double inv_norm_2 = 0.0;
  double bound = 0.0;  // 2 (K - 1) / (5 y*)
  double min_dominance_margin = 0.0;
};

// M_{k k'} = int |f_{j_k}|^2 / |x - p_{j_k'}|.
ChargeSystem assemble_charge_system(const std::vector<BoxIndex>& centers, const BoxGrid& grid,
                                    const Profile& profile, double y_star);

std::vector<double> solve_charges(const ChargeSystem& sys, const OmegaDataset& data,
                                  const std::vector<BoxIndex>& centers);

struct RefinementRound {
  std::vector<double> charges;
  std::vector<Point> positions;
  double max_update = 0.0;
};

struct MultiCoulombResult {
  Detection detection;
  ChargeSystem system;
  std::vector<double> charges;
  std::vector<Point> positions;
  std::vector<RefinementRound> trace;  // trace[0] is the initial estimate
  int rounds = 0;
  GridCheck grid_check;
};

// max(1, ceil(log_3(ell^{1/3} / epsilon))).
int refinement_rounds(const BoxGrid& grid, double epsilon);

// Each round replaces the data near center k' by omega_j - sum_{k != k'} lambda_k
// H(|p_j - y_k|) and re-solves the single-center problem on its probe window.
void refine_positions(const OmegaLookup& omega, const BoxGrid& grid, const Profile& profile,
                      const MultiCoulombConfig& cfg, double epsilon, MultiCoulombResult& state);

MultiCoulombResult reconstruct_multi(const OmegaDataset& data, const Profile& profile,
                                     const MultiCoulombConfig& cfg, double epsilon);

// H_ell(r) = H(r / ell) / ell for the 3D profile density.
double scaled_radial_shift(const Profile& profile, double ell, double r);

}  // namespace cfl
