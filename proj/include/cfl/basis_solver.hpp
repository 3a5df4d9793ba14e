#pragma once

#include <functional>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "cfl/grid.hpp"
#include "cfl/measurement.hpp"
#include "cfl/potentials.hpp"

namespace cfl {

// Indicator functions of the boxes of `grid`, in flat order.
struct StepBasis {
  BoxGrid grid;
};

// e_i(x) = exp(2 pi i k_i . x).
struct TrigBasis {
  std::vector<Point> frequencies;
};

// Caller-declared linearly independent functions.
struct CustomBasis {
  std::vector<std::function<cplx(const Point&)>> functions;
  std::string label = "custom";
};

using BasisFamily = std::variant<StepBasis, TrigBasis, CustomBasis>;

int basis_size(const BasisFamily& b);
std::string basis_id(const BasisFamily& b);

struct OverlapMatrix {
  Eigen::MatrixXcd entries;  // rows: boxes in flat order, columns: basis functions
  std::string basis;
  BoxGrid grid;
};

// M_{j,i} = <f_j, e_i f_j>. Step bases give the identity without quadrature.
OverlapMatrix assemble_overlap(const BasisFamily& basis, const BoxGrid& grid, const Profile& profile,
                               double rel_tol = 1e-10);

struct ReconstructionReport {
  Eigen::VectorXcd coefficients;
  std::vector<double> singular_values;
  int rank = 0;
  bool rank_deficient = false;
  double pinv_norm_2 = 0.0;    // 1 / sigma_min above the cutoff
  double pinv_norm_inf = 0.0;  // max row sum of |M^+|
  double condition = 0.0;      // sigma_max / sigma_min, square matrices only (else 0)
  double residual = 0.0;       // ||M lambda - omega||_2
  double epsilon = 0.0;
  double epsilon_v = 0.0;
  double bound = 0.0;          // ||M^+||_inf (epsilon + epsilon_V)
};

// lambda = M^+ omega by SVD with singular values below 1e-12 sigma_max dropped.
ReconstructionReport pseudo_solve(const Eigen::MatrixXcd& M, const Eigen::VectorXcd& omega, double epsilon = 0.0,
                                  double epsilon_v = 0.0);
ReconstructionReport pseudo_solve(const OverlapMatrix& M, const std::vector<double>& omega, double epsilon = 0.0,
                                  double epsilon_v = 0.0);

struct DominanceResult {
  bool dominant = false;
  double bound = 0.0;  // 1 / min_i (|a_ii| - sum_{j != i} |a_ij|) when dominant
  std::vector<double> margins;
};

DominanceResult diag_dominance_bound(const Eigen::MatrixXd& M);

// Averages lambda_k with conj(lambda_{-k}) when every frequency has its negative
// in the basis. Returns false and leaves the vector unchanged otherwise.
bool symmetrize_conjugate_pairs(const TrigBasis& basis, Eigen::VectorXcd& coefficients);

// The trigonometric overlap factors as M = V D with Vandermonde nodes ell k_i,
// V_{j,i} = exp(2 pi i ell k_i . j) and D diagonal.
Eigen::MatrixXcd trig_vandermonde(const TrigBasis& basis, const BoxGrid& grid);
// D_ii = exp(pi i ell k_i . 1) int |f(u)|^2 exp(2 pi i ell k_i . u) du, from the
// radial transform of the profile.
Eigen::VectorXcd trig_diagonal(const TrigBasis& basis, const BoxGrid& grid, const Profile& profile);

struct VandermondeReport {
  double q = 0.0;  // torus separation of the nodes ell k_i; infinite for K = 1
  bool applicable = false;  // q (m - 1) >= (8 ln d + 14) / pi
  double applicability_threshold = 0.0;
  double sigma_min = 0.0;
  double sigma_max = 0.0;
  double d_inv_norm = 0.0;
  double neumann_bound = 0.0;  // 1 / (1 - a), a = 2 pi ell max|k| int |f|^2 |u|; infinite if a >= 1
  bool neumann_holds = false;
};

VandermondeReport vandermonde_analysis(const TrigBasis& basis, const BoxGrid& grid, const Profile& profile);

// min over pairs and integer shifts r of ||x_i - x_j + r||_inf.
double torus_separation(const std::vector<Point>& nodes, int d);

struct StepReconstruction {
  StepFunction potential;
  double sup_bound = 0.0;  // C_V sqrt(d) ell + epsilon
};

StepReconstruction step_reconstruct(const OmegaDataset& data, double lipschitz, double epsilon);

}  // namespace cfl
