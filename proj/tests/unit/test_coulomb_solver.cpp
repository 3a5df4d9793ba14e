#include <doctest.h>

#include <cmath>
#include <random>

#include "cfl/averages.hpp"
#include "cfl/coulomb_solver.hpp"
#include "cfl/error.hpp"
#include "cfl/kernels.hpp"

using namespace cfl;

namespace {

OmegaDataset dataset_from(const BoxGrid& g, const std::vector<double>& w) {
  OmegaDataset ds;
  ds.grid = g;
  ds.entries.resize(w.size());
  for (long f = 0; f < static_cast<long>(w.size()); ++f) {
    ds.entries[f].j = box_at(g, f);
    ds.entries[f].omega_hat = w[f];
  }
  return ds;
}

// Forward model by the closed-form shell average, independent of the solver's own kernels.
OmegaDataset shell_dataset(const BoxGrid& g, const MultiCoulomb& V) {
  std::vector<double> w;
  const auto prof = Profile::bump(3);
  for (long f = 0; f < g.box_count(); ++f) {
    const BoxIndex j = box_at(g, f);
    try {
      w.push_back(shell_average(V, box_midpoint(g, j), 0.5 * g.ell()));
    } catch (const Error&) {
      w.push_back(local_average(V, make_orbital(g, j, prof), {1e-7, 1e-12, 8000}));
    }
  }
  return dataset_from(g, w);
}

bool in_grid(const BoxGrid& g, const BoxIndex& j) {
  for (int a = 0; a < 3; ++a)
    if (j[a] < 0 || j[a] >= g.m) return false;
  return true;
}

}  // namespace

TEST_SUITE("coulomb_solver") {

TEST_CASE("peak finding") {
  const auto g = build_grid(4.0, 4, 3);
  std::vector<double> w(g.box_count(), 1.0);
  auto ds = dataset_from(g, w);
  CHECK(find_peak(ds) == BoxIndex{0, 0, 0});
  ds.entries[flat_index(g, {2, 3, 1})].omega_hat = 2.0;
  CHECK(find_peak(ds) == BoxIndex{2, 3, 1});
  // Ties go to the lexicographically smallest index, comparing the first component first.
  ds.entries[flat_index(g, {1, 0, 3})].omega_hat = 2.0;
  CHECK(find_peak(ds) == BoxIndex{1, 0, 3});
  CHECK_THROWS_AS(find_peak(OmegaDataset{}), Error);
}

TEST_CASE("noiseless peak lies in the one-neighbourhood of the center") {
  const auto g = build_grid(8.0, 8, 3);
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 50; ++i) {
    const Point y{8 * u(rng), 8 * u(rng), 8 * u(rng)};
    const auto ds = shell_dataset(g, MultiCoulomb{{{0.5 + 4.5 * u(rng), y}}});
    const Point p = box_midpoint(g, find_peak(ds));
    CHECK(distance(p, y) <= std::sqrt(3.0) * 1.5 + 1.0);
  }
}

TEST_CASE("probe selection geometry") {
  const auto g = build_grid(8.0, 8, 3);
  auto ps = select_probe_points({0, 0, 0}, g);
  CHECK(ps.j0 == BoxIndex{7, 7, 7});
  CHECK(ps.e == std::array<int, 3>{1, 1, 1});
  CHECK(ps.boxes[1] == BoxIndex{6, 7, 7});
  CHECK(ps.boxes[2] == BoxIndex{7, 6, 7});
  CHECK(ps.boxes[3] == BoxIndex{0, 0, 2});
  CHECK(ps.boxes[5] == BoxIndex{0, 0, 4});
  ps = select_probe_points({7, 7, 7}, g);
  CHECK(ps.j0 == BoxIndex{0, 0, 0});
  CHECK(ps.e == std::array<int, 3>{-1, -1, -1});
  CHECK_THROWS_AS(select_probe_points({0, 0, 0}, build_grid(16.0, 16, 3)), Error);
  CHECK_NOTHROW(select_probe_points({0, 0, 0}, build_grid(16.0, 16, 3), true));
}

TEST_CASE("probes are valid and distinct for every peak") {
  const auto g = build_grid(8.0, 8, 3);
  for (long f = 0; f < g.box_count(); ++f) {
    const auto peak = box_at(g, f);
    const auto ps = select_probe_points(peak, g);
    for (const auto& b : ps.boxes) CHECK(in_grid(g, b));
    for (int i = 0; i < 6; ++i)
      for (int k = i + 1; k < 6; ++k) CHECK(ps.boxes[i] != ps.boxes[k]);
  }
  // Forced windows on larger grids stay inside as well.
  const auto big = build_grid(20.0, 20, 3);
  for (int a : {0, 5, 13, 19}) {
    const auto ps = select_probe_points({a, 19 - a, a / 2}, big, true);
    for (const auto& b : ps.boxes) CHECK(in_grid(big, b));
  }
}

TEST_CASE("noiseless single center is recovered exactly") {
  const auto g = build_grid(8.0, 8, 3);
  auto r = reconstruct_single(shell_dataset(g, MultiCoulomb{{{1.0, {4.1, 3.7, 2.9}}}}), 0.5, 5.0);
  CHECK(std::abs(r.charge - 1.0) <= 1e-8);
  CHECK(distance(r.position, {4.1, 3.7, 2.9}) <= 1e-8);
  CHECK_FALSE(r.clamped);

  std::mt19937_64 rng(22);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 50; ++i) {
    const Point y{1 + 6 * u(rng), 1 + 6 * u(rng), 1 + 6 * u(rng)};
    const double lam = 0.5 + 4.5 * u(rng);
    r = reconstruct_single(shell_dataset(g, MultiCoulomb{{{lam, y}}}), 0.5, 5.0);
    CHECK(std::abs(r.charge - lam) <= 1e-8);
    CHECK(distance(r.position, y) <= 1e-8);
    CHECK(r.charge > 0.0);
  }
}

TEST_CASE("recovery from quadrature data matches the shell model") {
  const auto g = build_grid(8.0, 8, 3);
  const MultiCoulomb V{{{2.3, {3.3, 4.6, 5.2}}}};
  const auto shell = shell_dataset(g, V);
  const auto r = reconstruct_single(shell, 0.5, 5.0);
  // Re-evaluate the six probe boxes by tensor quadrature.
  std::vector<double> w(g.box_count());
  for (long f = 0; f < g.box_count(); ++f) w[f] = shell.entries[f].omega_hat;
  for (const auto& b : r.probes.boxes)
    w[flat_index(g, b)] = local_average(V, make_orbital(g, b, Profile::bump(3)), {1e-11, 1e-15, 8000});
  const auto q = reconstruct_single(dataset_from(g, w), 0.5, 5.0);
  CHECK(std::abs(q.charge - 2.3) <= 1e-5);
  CHECK(distance(q.position, V.centers[0].position) <= 1e-5);
}

TEST_CASE("charge is clamped to the bounds") {
  const auto g = build_grid(8.0, 8, 3);
  const auto r = reconstruct_single(shell_dataset(g, MultiCoulomb{{{4.0, {4.1, 3.7, 2.9}}}}), 0.5, 3.0);
  CHECK(r.clamped);
  CHECK(r.charge == 3.0);
}

TEST_CASE("inconsistent data is rejected") {
  const auto g = build_grid(8.0, 8, 3);
  auto ds = shell_dataset(g, MultiCoulomb{{{1.0, {4.1, 3.7, 2.9}}}});
  for (auto& e : ds.entries) e.omega_hat = -1.0;
  ds.entries[0].omega_hat = 1.0;
  CHECK_THROWS_AS(reconstruct_single(ds, 0.5, 5.0), Error);
}

TEST_CASE("peak margin over the one-neighbourhood") {
  const auto g = build_grid(8.0, 8, 3);
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 100; ++i) {
    const Point y{1 + 6 * u(rng), 1 + 6 * u(rng), 1 + 6 * u(rng)};
    const auto ds = shell_dataset(g, MultiCoulomb{{{1.0, y}}});
    const auto peak = find_peak(ds);
    double best_outside = -1e300;
    for (const auto& e : ds.entries) {
      int cheb = 0;
      for (int a = 0; a < 3; ++a) cheb = std::max(cheb, std::abs(e.j[a] - peak[a]));
      if (cheb > 1) best_outside = std::max(best_outside, e.omega_hat);
    }
    CHECK(ds.at(peak).omega_hat - best_outside >= 1.0 / (4 * std::sqrt(2.0)));
  }
}

TEST_CASE("neighbourhood radius and refinement rounds") {
  CHECK(neighborhood_radius(build_grid(8.0, 8, 3)) == 1);
  CHECK(neighborhood_radius(build_grid(16.0, 64, 3)) == 2);
  CHECK(neighborhood_radius(build_grid(1.0, 1000, 3)) == 10);
  const auto g = build_grid(16.0, 64, 3);
  CHECK(refinement_rounds(g, 1e-3) == static_cast<int>(std::ceil(std::log(std::cbrt(0.25) / 1e-3) / std::log(3.0))));
  CHECK(refinement_rounds(g, 10.0) == 1);
}

TEST_CASE("default threshold") {
  MultiCoulombConfig cfg;
  cfg.K = 2;
  cfg.lambda_lo = 0.5;
  cfg.lambda_hi = 5.0;
  cfg.y_star = 5.0;
  const auto g = build_grid(16.0, 64, 3);
  CHECK(default_threshold(cfg, g) == doctest::Approx(std::min(2 * 2 * 5.0 / 5.0, 0.5 / (2 * std::cbrt(0.25)))));
}

TEST_CASE("grid validity bound") {
  MultiCoulombConfig cfg;
  cfg.y_star = 5.0;
  const auto check = validate_grid(cfg, build_grid(16.0, 64, 3));
  const long expect = static_cast<long>(std::ceil(std::max({64.0 / 16.0, std::pow(16 * 5.0 / 3, 3), 125.0 / 125.0})));
  CHECK(check.required_m == expect);
  CHECK_FALSE(check.satisfied);
  CHECK_FALSE(check.message.empty());
  CHECK(check.required_m_strict >= check.required_m);
}

TEST_CASE("charge matrix for one center") {
  const auto g = build_grid(8.0, 8, 3);
  const auto sys = assemble_charge_system({{3, 3, 3}}, g, Profile::bump(3), 5.0);
  REQUIRE(sys.M.rows() == 1);
  CHECK(sys.M(0, 0) == doctest::Approx(scaled_radial_shift(Profile::bump(3), 1.0, 0.0)));
  CHECK(sys.bound == 0.0);
}

TEST_CASE("charge matrix is diagonally dominant for separated centers") {
  const auto prof = Profile::bump(3);
  const auto half = build_grid(8.0, 16, 3);
  const auto sys = assemble_charge_system({{2, 2, 2}, {12, 2, 2}}, half, prof, 5.0);
  CHECK(sys.M(0, 1) / sys.M(0, 0) < 1.0);
  CHECK(sys.M(0, 1) == doctest::Approx(1.0 / 5.0));

  const auto g = build_grid(16.0, 64, 3);
  std::mt19937_64 rng(24);
  std::uniform_int_distribution<int> u(4, 59);
  for (int i = 0; i < 20; ++i) {
    const int K = 2 + i % 2;
    std::vector<BoxIndex> c;
    while (static_cast<int>(c.size()) < K) {
      const BoxIndex j{u(rng), u(rng), u(rng)};
      bool ok = true;
      for (const auto& o : c) ok = ok && distance(box_midpoint(g, j), box_midpoint(g, o)) >= 5.0;
      if (ok) c.push_back(j);
    }
    const auto s = assemble_charge_system(c, g, prof, 5.0);
    CHECK(s.min_dominance_margin > 0.0);
    const double inv = s.M.inverse().cwiseAbs().rowwise().sum().maxCoeff();
    CHECK(inv == doctest::Approx(s.inv_norm_inf).epsilon(1e-10));
    CHECK(inv <= s.bound);
  }
}

TEST_CASE("overlapping centers break dominance") {
  const auto g = build_grid(4.0, 4, 3);
  std::vector<BoxIndex> cluster{{1, 1, 1}};
  for (int a = 0; a < 3; ++a)
    for (int s : {-1, 1}) {
      BoxIndex j{1, 1, 1};
      j[a] += s;
      cluster.push_back(j);
    }
  CHECK(6.0 > radial_shift_value(Profile::bump(3), 0.0));
  CHECK_THROWS_AS(assemble_charge_system(cluster, g, Profile::bump(3), 5.0), Error);
}

TEST_CASE("scaled radial shift") {
  const auto prof = Profile::bump(3);
  CHECK(scaled_radial_shift(prof, 0.25, 2.0) == doctest::Approx(0.5));
  CHECK(scaled_radial_shift(prof, 0.25, 0.05) == doctest::Approx(radial_shift_value(prof, 0.2) / 0.25));
}

TEST_CASE("single-center pipeline through the multi-center solver") {
  const auto g = build_grid(8.0, 8, 3);
  const MultiCoulomb V{{{1.7, {4.1, 3.7, 2.9}}}};
  const auto ds = shell_dataset(g, V);
  MultiCoulombConfig cfg;
  cfg.K = 1;
  cfg.y_star = 5.0;
  const auto multi = reconstruct_multi(ds, Profile::bump(3), cfg, 1e-3);
  const auto single = reconstruct_single(ds, cfg.lambda_lo, cfg.lambda_hi);
  REQUIRE(multi.positions.size() == 1);
  CHECK(distance(multi.positions[0], single.position) <= 1e-8);
  CHECK(std::abs(multi.charges[0] - single.charge) <= 1e-8);
  CHECK(multi.detection.centers[0] == single.peak);
}

TEST_CASE("detection failure lists candidates") {
  const auto g = build_grid(16.0, 32, 3);
  const MultiCoulomb V{{{1.0, {4.2, 4.1, 4.3}}, {2.0, {11.1, 10.7, 11.9}}}};
  MultiCoulombConfig cfg;
  cfg.K = 2;
  cfg.y_star = 5.0;
  const auto ds = dataset_from(g, kernels::coulomb_field_parallel(g, Profile::bump(3), V));
  const auto det = detect_centers(ds, cfg);
  CHECK(det.centers.size() == 2);
  for (const auto& c : det.centers) {
    double best = 1e300;
    for (const auto& v : V.centers) best = std::min(best, distance(box_midpoint(g, c), v.position));
    CHECK(best <= std::cbrt(g.ell()) + 1e-12);
  }
  cfg.c_threshold = 100.0;
  try {
    detect_centers(ds, cfg);
    FAIL("expected a detection failure");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::DetectionFailure);
    CHECK(std::string(e.what()).find("found 0 centers") != std::string::npos);
  }
}

TEST_CASE("two-center refinement contracts") {
  const auto g = build_grid(16.0, 64, 3);
  const MultiCoulomb V{{{1.3, {5.3, 6.1, 4.7}}, {3.1, {10.9, 9.2, 11.4}}}};
  MultiCoulombConfig cfg;
  cfg.K = 2;
  cfg.y_star = 5.0;
  const auto ds = dataset_from(g, kernels::coulomb_field_parallel(g, Profile::bump(3), V));
  const auto r = reconstruct_multi(ds, Profile::bump(3), cfg, 1e-3);
  auto err = [&](const std::vector<Point>& pos) {
    double e = 0.0;
    for (const auto& c : V.centers) {
      double best = 1e300;
      for (const auto& p : pos) best = std::min(best, distance(p, c.position));
      e = std::max(e, best);
    }
    return e;
  };
  REQUIRE(r.trace.size() == static_cast<std::size_t>(r.rounds + 1));
  double prev = err(r.trace[0].positions);
  CHECK(prev <= std::cbrt(g.ell()));
  for (int k = 1; k <= r.rounds; ++k) {
    const double e = err(r.trace[k].positions);
    CHECK(e <= std::pow(0.5, k) * std::cbrt(g.ell()));
    CHECK(e <= prev);
    prev = e;
  }
  CHECK(err(r.positions) <= 1e-3);
}

}  // TEST_SUITE
