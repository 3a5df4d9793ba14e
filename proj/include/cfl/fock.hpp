#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <utility>
#include <vector>

#include "cfl/types.hpp"

namespace cfl {

using Eigen::MatrixXcd;
using Eigen::VectorXcd;

// Finite-mode description of one measurement: orthonormal mode basis of
// dimension n_modes, prepared pair orbitals per triple in that basis, the
// one-body propagator restricted to the modes, and the measured region.
struct ModeProblem {
  int n_modes = 0;
  std::vector<std::pair<VectorXcd, VectorXcd>> pairs;  // (f^alpha_k, f^beta_k)
  MatrixXcd propagator;                                 // unitary, n_modes x n_modes
  int measured = 0;
  std::vector<bool> region;  // modes inside B^alpha u B^beta; empty means global vacuum
  double truncation_error = 0.0;
};

// Hermitian X with U = exp(-i X), from the Schur form of a unitary U.
MatrixXcd one_body_generator(const MatrixXcd& U);

// Unitary on C^N mapping the orthonormal columns of F to those of G, chosen
// closest to the identity on the orthogonal complements.
MatrixXcd complete_unitary(const MatrixXcd& F, const MatrixXcd& G);

// Fock space over N modes as 2^N amplitudes indexed by occupation bitstrings,
// with the Jordan-Wigner ordering of mode 0 first.
class DenseFock {
 public:
  using State = VectorXcd;

  explicit DenseFock(int n_modes);

  int modes() const { return n_; }
  std::size_t dim() const { return std::size_t{1} << n_; }

  State vacuum() const;

  // a*(u) v
  State create(const VectorXcd& u, const State& v) const;
  // a(u) v, antilinear in u
  State annihilate(const VectorXcd& u, const State& v) const;
  // dGamma(X) v = sum_pq X_pq a*_p a_q v
  State one_body(const MatrixXcd& X, const State& v) const;

  // exp(op) v by scaled Taylor series; `norm_bound` bounds the operator norm of op.
  State expm_apply(const std::function<State(const State&)>& op, double norm_bound,
                   const State& v) const;

  // Dense matrices of a*_i and a_i, for checking the anticommutation relations.
  MatrixXcd creation_matrix(int i) const;
  MatrixXcd annihilation_matrix(int i) const;

 private:
  int n_;
};

struct DenseResult {
  double probability = 0.0;
  double truncation_error = 0.0;
  double state_norm = 1.0;
};

// Prepares 2^{-|J|/2} prod_k (1 + A_k) Omega with A_k = a*(f^alpha_k) a*(f^beta_k),
// evolves with exp(-i dGamma(X)), applies W = exp(i pi/4 (A + A*)) for the
// measured triple and returns the vacuum probability of the region.
DenseResult dense_probability(const ModeProblem& mp);

// The prepared state alone, for normalization and W checks.
DenseFock::State dense_initial_state(const DenseFock& fock, const ModeProblem& mp);
DenseFock::State dense_apply_w(const DenseFock& fock, const VectorXcd& fa, const VectorXcd& fb,
                               const DenseFock::State& v, double sign = 1.0);

}  // namespace cfl
