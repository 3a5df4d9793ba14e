#pragma once

#include <Eigen/Dense>
#include <vector>

#include "cfl/fock.hpp"

namespace cfl {

using Eigen::MatrixXd;

// Majorana operators c_{2i} = a_i + a*_i, c_{2i+1} = i (a*_i - a_i) and
// covariance Gamma_pq = (i/2) <[c_p, c_q]>.
class GaussianState {
 public:
  static GaussianState vacuum(int n_modes);

  int modes() const { return static_cast<int>(gamma_.rows() / 2); }
  const MatrixXd& covariance() const { return gamma_; }

  // exp(i Q) for Hermitian quadratic Q = sum K_pq c_p c_q + const.
  void apply_quadratic(const MatrixXcd& K);

  // Largest violation of |eig(i Gamma)| <= 1, and antisymmetry defect.
  double physicality_defect() const;

  // Probability that every listed mode is empty.
  double vacuum_probability(const std::vector<int>& modes) const;

 private:
  MatrixXd gamma_;
};

// Coefficients of a*(u) and a(u) as linear forms in the Majoranas.
VectorXcd majorana_creation(const VectorXcd& u);
VectorXcd majorana_annihilation(const VectorXcd& u);

// K of dGamma(X) = sum_pq X_pq a*_p a_q.
MatrixXcd quadratic_one_body(const MatrixXcd& X);
// K of a*(u) a*(w).
MatrixXcd quadratic_pair_creation(const VectorXcd& u, const VectorXcd& w);

struct GaussianResult {
  double probability = 0.0;
  double physicality_defect = 0.0;
};

// Same measurement as dense_probability, on the covariance matrix.
GaussianResult gaussian_probability(const ModeProblem& mp);

}  // namespace cfl
