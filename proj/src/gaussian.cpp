#include "cfl/gaussian.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>
#include <numbers>

#include "cfl/error.hpp"

namespace cfl {

GaussianState GaussianState::vacuum(int n_modes) {
  GaussianState g;
  g.gamma_ = MatrixXd::Zero(2 * n_modes, 2 * n_modes);
  for (int i = 0; i < n_modes; ++i) {
    g.gamma_(2 * i, 2 * i + 1) = -1.0;
    g.gamma_(2 * i + 1, 2 * i) = 1.0;
  }
  return g;
}

void GaussianState::apply_quadratic(const MatrixXcd& K) {
  const MatrixXcd KA = 0.5 * (K - K.transpose());
  const MatrixXcd hc = cplx(0.0, -4.0) * KA;
  const double imag = hc.imag().cwiseAbs().maxCoeff();
  if (imag > 1e-9 * std::max(1.0, hc.real().cwiseAbs().maxCoeff()))
    throw Error(ErrorKind::InvalidArgument, "quadratic form is not Hermitian");
  const MatrixXd h = hc.real();
  const MatrixXd R = (-h).exp();
  gamma_ = R * gamma_ * R.transpose();
  gamma_ = 0.5 * (gamma_ - gamma_.transpose());
}

double GaussianState::physicality_defect() const {
  const MatrixXcd iG = cplx(0.0, 1.0) * gamma_.cast<cplx>();
  Eigen::SelfAdjointEigenSolver<MatrixXcd> es(iG);
  const double excess = std::max(0.0, es.eigenvalues().cwiseAbs().maxCoeff() - 1.0);
  const double asym = (gamma_ + gamma_.transpose()).cwiseAbs().maxCoeff();
  return std::max(excess, asym);
}

double GaussianState::vacuum_probability(const std::vector<int>& modes) const {
  const int r = static_cast<int>(modes.size());
  if (r == 0) return 1.0;
  MatrixXd sub(2 * r, 2 * r);
  for (int a = 0; a < r; ++a)
    for (int b = 0; b < r; ++b)
      for (int s = 0; s < 2; ++s)
        for (int t = 0; t < 2; ++t) sub(2 * a + s, 2 * b + t) = gamma_(2 * modes[a] + s, 2 * modes[b] + t);
  const GaussianState vac = vacuum(r);
  const double det = (sub + vac.gamma_).determinant();
  return std::ldexp(std::sqrt(std::max(det, 0.0)), -r);
}

VectorXcd majorana_creation(const VectorXcd& u) {
  VectorXcd a(2 * u.size());
  for (long j = 0; j < u.size(); ++j) {
    a[2 * j] = 0.5 * u[j];
    a[2 * j + 1] = cplx(0.0, -0.5) * u[j];
  }
  return a;
}

VectorXcd majorana_annihilation(const VectorXcd& u) {
  VectorXcd a(2 * u.size());
  for (long j = 0; j < u.size(); ++j) {
    a[2 * j] = 0.5 * std::conj(u[j]);
    a[2 * j + 1] = cplx(0.0, 0.5) * std::conj(u[j]);
  }
  return a;
}

MatrixXcd quadratic_one_body(const MatrixXcd& X) {
  const long N = X.rows();
  MatrixXcd K = MatrixXcd::Zero(2 * N, 2 * N);
  for (long p = 0; p < N; ++p) {
    VectorXcd ep = VectorXcd::Zero(N);
    ep[p] = 1.0;
    const VectorXcd cp = majorana_creation(ep);
    for (long q = 0; q < N; ++q) {
      if (X(p, q) == 0.0) continue;
      VectorXcd eq = VectorXcd::Zero(N);
      eq[q] = 1.0;
      K += X(p, q) * cp * majorana_annihilation(eq).transpose();
    }
  }
  return K;
}

MatrixXcd quadratic_pair_creation(const VectorXcd& u, const VectorXcd& w) {
  return majorana_creation(u) * majorana_creation(w).transpose();
}

GaussianResult gaussian_probability(const ModeProblem& mp) {
  if (mp.measured < 0 || mp.measured >= static_cast<int>(mp.pairs.size()))
    throw Error(ErrorKind::InvalidArgument, "measured triple index out of range");
  const double q = std::numbers::pi / 4.0;
  GaussianState g = GaussianState::vacuum(mp.n_modes);

  // Preparation exp(pi/4 (A - A*)) = exp(i Q) with Q = -i pi/4 (A - A*).
  // As coefficient matrices, the K of an adjoint is the adjoint of K.
  for (const auto& [fa, fb] : mp.pairs) {
    const MatrixXcd A = quadratic_pair_creation(fa, fb);
    g.apply_quadratic(cplx(0.0, -q) * (A - A.adjoint()));
  }
  // Evolution exp(-i dGamma(X)) = exp(i Q) with Q = -dGamma(X).
  g.apply_quadratic(-quadratic_one_body(one_body_generator(mp.propagator)));
  // W = exp(i pi/4 (A + A*)).
  const auto& [fa, fb] = mp.pairs[mp.measured];
  const MatrixXcd A = quadratic_pair_creation(fa, fb);
  g.apply_quadratic(q * (A + A.adjoint()));

  GaussianResult res;
  res.physicality_defect = g.physicality_defect();
  if (res.physicality_defect > 1e-9)
    throw Error(ErrorKind::InvalidArgument, "covariance left the physical range");
  std::vector<int> modes;
  for (int i = 0; i < mp.n_modes; ++i)
    if (mp.region.empty() || mp.region[i]) modes.push_back(i);
  res.probability = g.vacuum_probability(modes);
  return res;
}

}  // namespace cfl
