#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "cfl/averages.hpp"
#include "cfl/basis_solver.hpp"
#include "cfl/error.hpp"

using namespace cfl;

namespace {

// Composite Simpson over the 1D support of f_j, written out here as an
// oracle for the library's adaptive quadrature.
cplx simpson_overlap(const BoxGrid& g, int j, double k) {
  const auto orb = make_orbital(g, {j, 0, 0}, Profile::bump(1));
  const double a = box_midpoint(g, {j, 0, 0})[0] - 0.5 * g.ell();
  const int n = 4000;
  const double h = g.ell() / n;
  cplx s = 0.0;
  for (int i = 0; i <= n; ++i) {
    const double x = a + i * h;
    const double w = (i == 0 || i == n) ? 1.0 : (i % 2 ? 4.0 : 2.0);
    const double f = orbital_eval(orb, {x, 0, 0});
    s += w * f * f * std::polar(1.0, 2 * std::numbers::pi * k * x);
  }
  return s * h / 3.0;
}

TrigBasis symmetric_basis(const std::vector<double>& ks) {
  TrigBasis b;
  for (double k : ks) b.frequencies.push_back({k, 0, 0});
  return b;
}

}  // namespace

TEST_SUITE("basis_solver") {

TEST_CASE("step basis gives the identity") {
  const auto g = build_grid(4.0, 4, 2);
  const auto M = assemble_overlap(StepBasis{g}, g, Profile::bump(2));
  CHECK(M.entries.isApprox(Eigen::MatrixXcd::Identity(16, 16)));
  CHECK(M.basis == "step");
  try {
    assemble_overlap(StepBasis{build_grid(4.0, 8, 2)}, g, Profile::bump(2));
    FAIL("expected a grid mismatch");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::GridMismatch);
  }
}

TEST_CASE("trig overlap entries against an independent quadrature") {
  const auto g = build_grid(4.0, 8, 1);
  const auto b = symmetric_basis({-0.3, 0.0, 0.45});
  const auto M = assemble_overlap(b, g, Profile::bump(1), 1e-12);
  for (int j = 0; j < 8; ++j)
    for (int i = 0; i < 3; ++i) CHECK(std::abs(M.entries(j, i) - simpson_overlap(g, j, b.frequencies[i][0])) <= 1e-10);
}

TEST_CASE("trig overlap factors into Vandermonde times diagonal") {
  for (int d : {1, 2}) {
    const auto g = build_grid(6.0, 6, d);
    TrigBasis b{{{0, 0, 0}, {0.2, -0.1, 0}, {-0.35, d == 2 ? 0.4 : 0.0, 0}}};
    const auto M = assemble_overlap(b, g, Profile::bump(d), 1e-12).entries;
    const Eigen::MatrixXcd VD = trig_vandermonde(b, g) * trig_diagonal(b, g, Profile::bump(d)).asDiagonal();
    CHECK((M - VD).cwiseAbs().maxCoeff() <= 1e-10);
  }
}

TEST_CASE("zero frequency column is all ones") {
  const auto g = build_grid(3.0, 3, 3);
  const auto M = assemble_overlap(TrigBasis{{{0, 0, 0}}}, g, Profile::bump(3));
  for (long f = 0; f < M.entries.rows(); ++f) CHECK(std::abs(M.entries(f, 0) - 1.0) <= 1e-9);
  const auto D = trig_diagonal(TrigBasis{{{0, 0, 0}}}, g, Profile::bump(3));
  CHECK(std::abs(D(0) - 1.0) <= 1e-12);
}

TEST_CASE("custom basis") {
  const auto g = build_grid(2.0, 2, 1);
  CustomBasis c{{[](const Point&) { return cplx(1.0, 0.0); }, [](const Point& x) { return cplx(x[0], 0.0); }}, "affine"};
  const auto M = assemble_overlap(c, g, Profile::bump(1));
  CHECK(M.basis == "affine");
  CHECK(std::abs(M.entries(0, 0) - 1.0) <= 1e-10);
  CHECK(std::abs(M.entries(1, 1) - 1.5) <= 1e-10);
}

TEST_CASE("pseudo-inverse recovers a real trig potential") {
  const auto g = build_grid(16.0, 32, 1);
  const auto b = symmetric_basis({-0.25, 0.0, 0.25, -0.4, 0.4});
  const Eigen::VectorXcd lam = (Eigen::VectorXcd(5) << cplx(0.3, -0.2), 1.1, cplx(0.3, 0.2), cplx(-0.5, 0.1),
                                cplx(-0.5, -0.1))
                                   .finished();
  TrigSum V;
  for (int i = 0; i < 5; ++i) {
    V.frequencies.push_back(b.frequencies[i]);
    V.coefficients.push_back(lam(i));
  }
  const auto M = assemble_overlap(b, g, Profile::bump(1), 1e-12);
  std::vector<double> w;
  for (int j = 0; j < g.m; ++j) w.push_back(local_average(V, make_orbital(g, {j, 0, 0}, Profile::bump(1)), {1e-12, 1e-14, 4000}));
  auto rep = pseudo_solve(M, w);
  CHECK(rep.rank == 5);
  CHECK_FALSE(rep.rank_deficient);
  CHECK((rep.coefficients - lam).cwiseAbs().maxCoeff() <= 1e-8);
  CHECK(rep.residual <= 1e-8);
  CHECK(symmetrize_conjugate_pairs(b, rep.coefficients));
  CHECK((rep.coefficients - lam).cwiseAbs().maxCoeff() <= 1e-8);
}

TEST_CASE("perturbation bound is sound") {
  const auto g = build_grid(16.0, 32, 1);
  const auto b = symmetric_basis({-0.25, 0.0, 0.25});
  const auto M = assemble_overlap(b, g, Profile::bump(1), 1e-12).entries;
  const Eigen::VectorXcd lam = (Eigen::VectorXcd(3) << cplx(0.4, 0.3), 2.0, cplx(0.4, -0.3)).finished();
  const Eigen::VectorXcd w = M * lam;
  std::mt19937_64 rng(41);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const double eps = 1e-3;
  for (int i = 0; i < 100; ++i) {
    Eigen::VectorXcd noisy = w;
    for (long f = 0; f < noisy.size(); ++f) noisy(f) += eps * u(rng);
    const auto rep = pseudo_solve(M, noisy, eps);
    CHECK((rep.coefficients - lam).cwiseAbs().maxCoeff() <= rep.bound);
  }
}

TEST_CASE("duplicate frequencies are rank deficient") {
  const auto g = build_grid(8.0, 8, 1);
  const auto M = assemble_overlap(symmetric_basis({0.1, 0.1, 0.3}), g, Profile::bump(1));
  const auto rep = pseudo_solve(M, std::vector<double>(8, 1.0));
  CHECK(rep.rank == 2);
  CHECK(rep.rank_deficient);
  CHECK_THROWS_AS(pseudo_solve(M, std::vector<double>(7, 1.0)), Error);
}

TEST_CASE("smallest singular value grows with the grid") {
  const auto b = symmetric_basis({-0.1, 0.0, 0.1});
  double prev = 0.0;
  for (int m : {8, 16, 32, 64}) {
    const auto g = build_grid(double(m), m, 1);
    const auto r = vandermonde_analysis(b, g, Profile::bump(1));
    CHECK(r.sigma_min > prev);
    prev = r.sigma_min;
  }
}

TEST_CASE("diagonal dominance bound") {
  Eigen::MatrixXd A(2, 2);
  A << 4, 1, -1, 3;
  auto r = diag_dominance_bound(A);
  CHECK(r.dominant);
  CHECK(r.margins == std::vector<double>{3.0, 2.0});
  CHECK(r.bound == doctest::Approx(0.5));
  A << 1, 2, 2, 1;
  r = diag_dominance_bound(A);
  CHECK_FALSE(r.dominant);
  CHECK(std::isinf(r.bound));
  CHECK_THROWS_AS(diag_dominance_bound(Eigen::MatrixXd(2, 3)), Error);

  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int i = 0; i < 50; ++i) {
    const int n = 2 + i % 5;
    Eigen::MatrixXd B(n, n);
    for (int a = 0; a < n; ++a) {
      double off = 0.0;
      for (int c = 0; c < n; ++c)
        if (c != a) off += std::abs(B(a, c) = u(rng));
      B(a, a) = (off + 0.1 + std::abs(u(rng))) * (u(rng) < 0 ? -1 : 1);
    }
    const auto res = diag_dominance_bound(B);
    REQUIRE(res.dominant);
    CHECK(B.inverse().cwiseAbs().rowwise().sum().maxCoeff() <= res.bound * (1 + 1e-12));
  }
}

TEST_CASE("torus separation") {
  CHECK(torus_separation({{0, 0, 0}, {0.25, 0, 0}}, 1) == doctest::Approx(0.25));
  CHECK(torus_separation({{0.1, 0, 0}, {0.9, 0, 0}}, 1) == doctest::Approx(0.2));
  CHECK(torus_separation({{0.1, 0.5, 0}, {0.15, 0.1, 0}}, 2) == doctest::Approx(0.4));
  CHECK(std::isinf(torus_separation({{0.3, 0, 0}}, 1)));
}

TEST_CASE("Vandermonde applicability") {
  const auto b = symmetric_basis({-0.25, 0.0, 0.25});
  auto r = vandermonde_analysis(b, build_grid(8.0, 16, 1), Profile::bump(1));
  CHECK(r.q == doctest::Approx(0.125));
  CHECK(r.applicability_threshold == doctest::Approx(14.0 / std::numbers::pi));
  CHECK_FALSE(r.applicable);
  CHECK(r.neumann_holds);
  r = vandermonde_analysis(b, build_grid(32.0, 64, 1), Profile::bump(1));
  CHECK(r.applicable);
  CHECK(r.sigma_min <= r.sigma_max);
  CHECK(r.sigma_max <= std::sqrt(64.0 * 3.0) + 1e-12);
  const auto r3 = vandermonde_analysis(TrigBasis{{{0.1, 0, 0}, {0, 0.1, 0}}}, build_grid(10.0, 10, 3), Profile::bump(3));
  CHECK(r3.applicability_threshold == doctest::Approx((8 * std::log(3.0) + 14) / std::numbers::pi));
}

TEST_CASE("step reconstruction bound") {
  const auto g = build_grid(4.0, 8, 2);
  const auto prof = Profile::bump(2);
  const double C = 1.3;
  Callable V{[](const Point& x) { return std::sin(1.3 * x[0]) * std::cos(0.0 * x[1]); }, C, "sine"};
  OmegaDataset ds;
  ds.grid = g;
  for (long f = 0; f < g.box_count(); ++f) {
    const BoxIndex j = box_at(g, f);
    ds.entries.push_back({j, local_average(PotentialModel(V), make_orbital(g, j, prof))});
  }
  const auto r = step_reconstruct(ds, C, 0.0);
  CHECK(r.sup_bound == doctest::Approx(C * std::sqrt(2.0) * 0.5));
  std::mt19937_64 rng(43);
  std::uniform_real_distribution<double> u(0.0, 4.0);
  for (int i = 0; i < 500; ++i) {
    const Point x{u(rng), u(rng), 0};
    CHECK(std::abs(eval(r.potential, x) - V.fn(x)) <= r.sup_bound);
  }
  ds.entries.pop_back();
  CHECK_THROWS_AS(step_reconstruct(ds, C, 0.0), Error);
}

}  // TEST_SUITE
