#include "cfl/basis_solver.hpp"

#include <cmath>
#include <exception>
#include <limits>
#include <numbers>
#include <sstream>

#include "cfl/averages.hpp"
#include "cfl/error.hpp"
#include "cfl/kernels.hpp"
#include "cfl/quadrature.hpp"

namespace cfl {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kRankCutoff = 1e-12;

// int_0^{1/2} g(r) w(r) |S^{d-1}| r^{d-1} dr for the unit-profile density g.
double radial_moment(const Profile& profile, const std::function<double(double)>& w) {
  const int d = profile.dimension();
  QuadOptions opt;
  opt.rel_tol = 1e-13;
  auto r = integrate<double>(
      [&](double s) { return profile.density(s) * w(s) * unit_sphere_area(d) * std::pow(s, d - 1); }, 0.0,
      profile.support_radius(), {}, opt);
  if (!r.converged) throw Error(ErrorKind::QuadratureFailure, "radial moment did not converge");
  return r.value;
}

// Euclidean norm over the first d components; the rest are ignored on lower-dimensional grids.
double norm_d(const Point& k, int d) {
  double s = 0.0;
  for (int a = 0; a < d; ++a) s += k[a] * k[a];
  return std::sqrt(s);
}

double max_frequency_norm(const std::vector<Point>& k, int d) {
  double m = 0.0;
  for (const auto& ki : k) m = std::max(m, norm_d(ki, d));
  return m;
}

}  // namespace

int basis_size(const BasisFamily& b) {
  return std::visit(
      [](const auto& x) -> int {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, StepBasis>) return static_cast<int>(x.grid.box_count());
        else if constexpr (std::is_same_v<T, TrigBasis>) return static_cast<int>(x.frequencies.size());
        else return static_cast<int>(x.functions.size());
      },
      b);
}

std::string basis_id(const BasisFamily& b) {
  if (std::holds_alternative<StepBasis>(b)) return "step";
  if (std::holds_alternative<TrigBasis>(b)) return "trig";
  return std::get<CustomBasis>(b).label;
}

OverlapMatrix assemble_overlap(const BasisFamily& basis, const BoxGrid& grid, const Profile& profile,
                               double rel_tol) {
  const int K = basis_size(basis);
  if (K < 1) throw Error(ErrorKind::InvalidArgument, "basis is empty");
  OverlapMatrix M;
  M.basis = basis_id(basis);
  M.grid = grid;
  const long n = grid.box_count();

  if (const auto* s = std::get_if<StepBasis>(&basis)) {
    if (s->grid.L != grid.L || s->grid.m != grid.m || s->grid.d != grid.d)
      throw Error(ErrorKind::GridMismatch, "step basis grid differs from the measurement grid");
    M.entries = Eigen::MatrixXcd::Identity(n, n);
    return M;
  }
  if (const auto* t = std::get_if<TrigBasis>(&basis)) {
    M.entries = kernels::trig_overlap_parallel(grid, profile, t->frequencies, rel_tol);
    return M;
  }

  const auto& fns = std::get<CustomBasis>(basis).functions;
  M.entries.resize(n, K);
  AverageOptions opt;
  opt.rel_tol = rel_tol;
  opt.abs_tol = 1e-15;
  std::exception_ptr err;
#pragma omp parallel for schedule(dynamic)
  for (long f = 0; f < n; ++f) {
    try {
      const Orbital orb = make_orbital(grid, box_at(grid, f), profile);
      for (int i = 0; i < K; ++i) M.entries(f, i) = weighted_average_complex(orb, fns[i], opt);
    } catch (...) {
#pragma omp critical
      if (!err) err = std::current_exception();
    }
  }
  if (err) std::rethrow_exception(err);
  return M;
}

ReconstructionReport pseudo_solve(const Eigen::MatrixXcd& M, const Eigen::VectorXcd& omega, double epsilon,
                                  double epsilon_v) {
  if (M.rows() != omega.size())
    throw Error(ErrorKind::InvalidArgument, "overlap rows and data length differ");
  if (M.cols() == 0) throw Error(ErrorKind::InvalidArgument, "overlap matrix has no columns");
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(M, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::VectorXd& s = svd.singularValues();
  ReconstructionReport rep;
  rep.singular_values.assign(s.data(), s.data() + s.size());
  const double cutoff = kRankCutoff * s(0);
  Eigen::VectorXd sinv = Eigen::VectorXd::Zero(s.size());
  double smin = 0.0;
  for (int i = 0; i < s.size(); ++i)
    if (s(i) > cutoff) {
      sinv(i) = 1.0 / s(i);
      smin = s(i);
      ++rep.rank;
    }
  rep.rank_deficient = rep.rank < M.cols();
  const Eigen::MatrixXcd pinv = svd.matrixV() * sinv.asDiagonal() * svd.matrixU().adjoint();
  rep.coefficients = pinv * omega;
  rep.pinv_norm_2 = smin > 0.0 ? 1.0 / smin : std::numeric_limits<double>::infinity();
  rep.pinv_norm_inf = pinv.cwiseAbs().rowwise().sum().maxCoeff();
  rep.condition = M.rows() == M.cols() && smin > 0.0 ? s(0) / smin : 0.0;
  rep.residual = (M * rep.coefficients - omega).norm();
  rep.epsilon = epsilon;
  rep.epsilon_v = epsilon_v;
  rep.bound = rep.pinv_norm_inf * (epsilon + epsilon_v);
  return rep;
}

ReconstructionReport pseudo_solve(const OverlapMatrix& M, const std::vector<double>& omega, double epsilon,
                                  double epsilon_v) {
  Eigen::VectorXcd w(static_cast<long>(omega.size()));
  for (std::size_t i = 0; i < omega.size(); ++i) w(static_cast<long>(i)) = omega[i];
  return pseudo_solve(M.entries, w, epsilon, epsilon_v);
}

DominanceResult diag_dominance_bound(const Eigen::MatrixXd& M) {
  if (M.rows() != M.cols()) throw Error(ErrorKind::InvalidArgument, "diagonal dominance needs a square matrix");
  DominanceResult r;
  double worst = std::numeric_limits<double>::infinity();
  for (long i = 0; i < M.rows(); ++i) {
    const double off = M.row(i).cwiseAbs().sum() - std::abs(M(i, i));
    r.margins.push_back(std::abs(M(i, i)) - off);
    worst = std::min(worst, r.margins.back());
  }
  r.dominant = worst > 0.0;
  r.bound = r.dominant ? 1.0 / worst : std::numeric_limits<double>::infinity();
  return r;
}

bool symmetrize_conjugate_pairs(const TrigBasis& basis, Eigen::VectorXcd& coefficients) {
  const auto& k = basis.frequencies;
  const int K = static_cast<int>(k.size());
  if (coefficients.size() != K) throw Error(ErrorKind::InvalidArgument, "coefficient count mismatch");
  std::vector<int> partner(K, -1);
  for (int i = 0; i < K; ++i)
    for (int j = 0; j < K; ++j)
      if (norm(k[i] + k[j]) == 0.0) partner[i] = j;
  for (int p : partner)
    if (p < 0) return false;
  Eigen::VectorXcd out(K);
  for (int i = 0; i < K; ++i) out(i) = 0.5 * (coefficients(i) + std::conj(coefficients(partner[i])));
  coefficients = out;
  return true;
}

Eigen::MatrixXcd trig_vandermonde(const TrigBasis& basis, const BoxGrid& grid) {
  const long n = grid.box_count();
  const int K = static_cast<int>(basis.frequencies.size());
  Eigen::MatrixXcd V(n, K);
  for (long f = 0; f < n; ++f) {
    const BoxIndex j = box_at(grid, f);
    const Point jp{double(j[0]), double(j[1]), double(j[2])};
    for (int i = 0; i < K; ++i) V(f, i) = std::polar(1.0, 2.0 * kPi * grid.ell() * dot(basis.frequencies[i], jp));
  }
  return V;
}

Eigen::VectorXcd trig_diagonal(const TrigBasis& basis, const BoxGrid& grid, const Profile& profile) {
  const int d = grid.d;
  const double ell = grid.ell();
  const int K = static_cast<int>(basis.frequencies.size());
  Eigen::VectorXcd D(K);
  for (int i = 0; i < K; ++i) {
    const Point& k = basis.frequencies[i];
    const double w = 2.0 * kPi * ell * norm_d(k, d);
    std::function<double(double)> kernel;
    if (d == 1) kernel = [w](double r) { return std::cos(w * r); };
    else if (d == 2) kernel = [w](double r) { return std::cyl_bessel_j(0.0, w * r); };
    else kernel = [w](double r) { return w * r == 0.0 ? 1.0 : std::sin(w * r) / (w * r); };
    double phase = 0.0;
    for (int a = 0; a < d; ++a) phase += kPi * ell * k[a];
    D(i) = std::polar(radial_moment(profile, kernel), phase);
  }
  return D;
}

double torus_separation(const std::vector<Point>& nodes, int d) {
  double q = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < nodes.size(); ++i)
    for (std::size_t j = i + 1; j < nodes.size(); ++j) {
      double dist = 0.0;
      for (int a = 0; a < d; ++a) {
        const double diff = nodes[i][a] - nodes[j][a];
        dist = std::max(dist, std::abs(diff - std::round(diff)));
      }
      q = std::min(q, dist);
    }
  return q;
}

VandermondeReport vandermonde_analysis(const TrigBasis& basis, const BoxGrid& grid, const Profile& profile) {
  if (basis.frequencies.empty()) throw Error(ErrorKind::InvalidArgument, "trig basis is empty");
  VandermondeReport r;
  std::vector<Point> nodes;
  for (const auto& k : basis.frequencies) nodes.push_back(grid.ell() * k);
  r.q = torus_separation(nodes, grid.d);
  r.applicability_threshold = (8.0 * std::log(static_cast<double>(grid.d)) + 14.0) / kPi;
  r.applicable = r.q * (grid.m - 1) >= r.applicability_threshold;

  const Eigen::MatrixXcd V = trig_vandermonde(basis, grid);
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(V);
  const auto& s = svd.singularValues();
  r.sigma_max = s(0);
  r.sigma_min = s(s.size() - 1);

  const Eigen::VectorXcd D = trig_diagonal(basis, grid, profile);
  r.d_inv_norm = 0.0;
  for (int i = 0; i < D.size(); ++i) r.d_inv_norm = std::max(r.d_inv_norm, 1.0 / std::abs(D(i)));
  const double first_moment = radial_moment(profile, [](double s) { return s; });
  const double a = 2.0 * kPi * grid.ell() * max_frequency_norm(basis.frequencies, grid.d) * first_moment;
  r.neumann_bound = a < 1.0 ? 1.0 / (1.0 - a) : std::numeric_limits<double>::infinity();
  r.neumann_holds = r.d_inv_norm <= r.neumann_bound;
  return r;
}

StepReconstruction step_reconstruct(const OmegaDataset& data, double lipschitz, double epsilon) {
  if (static_cast<long>(data.entries.size()) != data.grid.box_count())
    throw Error(ErrorKind::InconsistentData, "dataset does not cover every box");
  if (lipschitz < 0.0 || epsilon < 0.0)
    throw Error(ErrorKind::InvalidArgument, "Lipschitz constant and epsilon must be non-negative");
  StepReconstruction r;
  r.potential.grid = data.grid;
  r.potential.values = data.values();
  r.sup_bound = lipschitz * std::sqrt(static_cast<double>(data.grid.d)) * data.grid.ell() + epsilon;
  return r;
}

}  // namespace cfl
