#include "cfl/fock.hpp"

#include <Eigen/Eigenvalues>
#include <bit>
#include <cmath>
#include <numbers>

#include "cfl/error.hpp"

namespace cfl {

namespace {

inline double jw_sign(std::uint64_t n, int i) {
  const std::uint64_t below = n & ((std::uint64_t{1} << i) - 1);
  return (std::popcount(below) & 1) ? -1.0 : 1.0;
}

MatrixXcd polar_factor(const MatrixXcd& M) {
  Eigen::JacobiSVD<MatrixXcd> svd(M, Eigen::ComputeThinU | Eigen::ComputeThinV);
  return svd.matrixU() * svd.matrixV().adjoint();
}

MatrixXcd complement(const MatrixXcd& F) {
  const long N = F.rows(), n = F.cols();
  Eigen::HouseholderQR<MatrixXcd> qr(F);
  MatrixXcd Q = qr.householderQ() * MatrixXcd::Identity(N, N);
  return Q.rightCols(N - n);
}

}  // namespace

MatrixXcd one_body_generator(const MatrixXcd& U) {
  Eigen::ComplexSchur<MatrixXcd> schur(U);
  const MatrixXcd& Z = schur.matrixU();
  const MatrixXcd& T = schur.matrixT();
  VectorXcd theta(U.rows());
  for (long i = 0; i < U.rows(); ++i) theta[i] = -std::arg(T(i, i));
  MatrixXcd X = Z * theta.asDiagonal() * Z.adjoint();
  return 0.5 * (X + X.adjoint());
}

MatrixXcd complete_unitary(const MatrixXcd& F, const MatrixXcd& G) {
  const long N = F.rows(), n = F.cols();
  if (G.rows() != N || G.cols() != n) throw Error(ErrorKind::InvalidArgument, "F and G shapes differ");
  const MatrixXcd Gu = n > 0 ? polar_factor(G) : G;
  MatrixXcd U = Gu * F.adjoint();
  if (n < N) {
    const MatrixXcd Fp = complement(F);
    const MatrixXcd Gp = complement(Gu);
    Eigen::JacobiSVD<MatrixXcd> svd(Fp.adjoint() * Gp, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const MatrixXcd Y = svd.matrixV() * svd.matrixU().adjoint();
    U += Gp * Y * Fp.adjoint();
  }
  return U;
}

DenseFock::DenseFock(int n_modes) : n_(n_modes) {
  if (n_modes < 1 || n_modes > 20)
    throw Error(ErrorKind::InvalidArgument, "dense Fock space supports 1..20 modes");
}

DenseFock::State DenseFock::vacuum() const {
  State v = State::Zero(static_cast<long>(dim()));
  v[0] = 1.0;
  return v;
}

DenseFock::State DenseFock::create(const VectorXcd& u, const State& v) const {
  State out = State::Zero(v.size());
  const std::uint64_t D = dim();
  for (std::uint64_t s = 0; s < D; ++s) {
    const cplx a = v[static_cast<long>(s)];
    if (a == 0.0) continue;
    for (int i = 0; i < n_; ++i) {
      const std::uint64_t bit = std::uint64_t{1} << i;
      if (s & bit || u[i] == 0.0) continue;
      out[static_cast<long>(s | bit)] += jw_sign(s, i) * u[i] * a;
    }
  }
  return out;
}

DenseFock::State DenseFock::annihilate(const VectorXcd& u, const State& v) const {
  State out = State::Zero(v.size());
  const std::uint64_t D = dim();
  for (std::uint64_t s = 0; s < D; ++s) {
    const cplx a = v[static_cast<long>(s)];
    if (a == 0.0) continue;
    for (int i = 0; i < n_; ++i) {
      const std::uint64_t bit = std::uint64_t{1} << i;
      if (!(s & bit) || u[i] == 0.0) continue;
      out[static_cast<long>(s ^ bit)] += jw_sign(s, i) * std::conj(u[i]) * a;
    }
  }
  return out;
}

DenseFock::State DenseFock::one_body(const MatrixXcd& X, const State& v) const {
  State out = State::Zero(v.size());
  const std::uint64_t D = dim();
  for (std::uint64_t s = 0; s < D; ++s) {
    const cplx a = v[static_cast<long>(s)];
    if (a == 0.0) continue;
    for (int q = 0; q < n_; ++q) {
      const std::uint64_t bq = std::uint64_t{1} << q;
      if (!(s & bq)) continue;
      const std::uint64_t s1 = s ^ bq;
      const double sq = jw_sign(s, q);
      for (int p = 0; p < n_; ++p) {
        const std::uint64_t bp = std::uint64_t{1} << p;
        if (s1 & bp) continue;
        const cplx x = X(p, q);
        if (x == 0.0) continue;
        out[static_cast<long>(s1 | bp)] += sq * jw_sign(s1, p) * x * a;
      }
    }
  }
  return out;
}

DenseFock::State DenseFock::expm_apply(const std::function<State(const State&)>& op,
                                       double norm_bound, const State& v) const {
  const int sub = std::max(1, static_cast<int>(std::ceil(norm_bound)));
  State acc = v;
  for (int s = 0; s < sub; ++s) {
    State term = acc;
    State next = acc;
    for (int k = 1; k <= 80; ++k) {
      term = op(term) / (static_cast<double>(sub) * k);
      next += term;
      if (term.norm() <= 1e-18 * next.norm()) break;
    }
    acc = next;
  }
  return acc;
}

MatrixXcd DenseFock::creation_matrix(int i) const {
  const long D = static_cast<long>(dim());
  MatrixXcd M = MatrixXcd::Zero(D, D);
  VectorXcd e = VectorXcd::Zero(n_);
  e[i] = 1.0;
  for (long s = 0; s < D; ++s) {
    State b = State::Zero(D);
    b[s] = 1.0;
    M.col(s) = create(e, b);
  }
  return M;
}

MatrixXcd DenseFock::annihilation_matrix(int i) const {
  return creation_matrix(i).adjoint();
}

DenseFock::State dense_initial_state(const DenseFock& fock, const ModeProblem& mp) {
  DenseFock::State psi = fock.vacuum();
  const double r = 1.0 / std::sqrt(2.0);
  for (const auto& [fa, fb] : mp.pairs) psi = r * (psi + fock.create(fa, fock.create(fb, psi)));
  return psi;
}

// exp(i sign pi/4 (A + A*)) v with A = a*(fa) a*(fb) and A* = a(fb) a(fa).
DenseFock::State dense_apply_w(const DenseFock& fock, const VectorXcd& fa, const VectorXcd& fb,
                               const DenseFock::State& v, double sign) {
  const cplx c(0.0, sign * std::numbers::pi / 4.0);
  auto op = [&](const DenseFock::State& x) -> DenseFock::State {
    return c * (fock.create(fa, fock.create(fb, x)) + fock.annihilate(fb, fock.annihilate(fa, x)));
  };
  return fock.expm_apply(op, std::numbers::pi / 2.0, v);
}

DenseResult dense_probability(const ModeProblem& mp) {
  if (mp.measured < 0 || mp.measured >= static_cast<int>(mp.pairs.size()))
    throw Error(ErrorKind::InvalidArgument, "measured triple index out of range");
  DenseFock fock(mp.n_modes);
  DenseFock::State psi = dense_initial_state(fock, mp);

  const MatrixXcd X = one_body_generator(mp.propagator);
  Eigen::SelfAdjointEigenSolver<MatrixXcd> es(X);
  const double bound = es.eigenvalues().cwiseAbs().sum();
  const cplx mi(0.0, -1.0);
  psi = fock.expm_apply([&](const DenseFock::State& x) { return DenseFock::State(mi * fock.one_body(X, x)); },
                        bound, psi);

  const auto& [fa, fb] = mp.pairs[mp.measured];
  psi = dense_apply_w(fock, fa, fb, psi);

  DenseResult res;
  res.truncation_error = mp.truncation_error;
  res.state_norm = psi.norm();
  if (mp.region.empty()) {
    res.probability = std::norm(psi[0]);
    return res;
  }
  std::uint64_t mask = 0;
  for (int i = 0; i < mp.n_modes; ++i)
    if (mp.region[i]) mask |= std::uint64_t{1} << i;
  double p = 0.0;
  for (std::uint64_t s = 0; s < fock.dim(); ++s)
    if ((s & mask) == 0) p += std::norm(psi[static_cast<long>(s)]);
  res.probability = p;
  return res;
}

}  // namespace cfl
