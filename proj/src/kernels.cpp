#include "cfl/kernels.hpp"

#include <exception>
#include <numbers>

#include "cfl/averages.hpp"
#include "cfl/rng.hpp"

namespace cfl::kernels {

long count_shots_serial(double p, long T, std::uint64_t seed, std::uint64_t stream) {
  long hits = 0;
  for (long i = 0; i < T; ++i) hits += to_unit(counter_hash(seed, stream, static_cast<std::uint64_t>(i))) < p;
  return hits;
}

long count_shots_parallel(double p, long T, std::uint64_t seed, std::uint64_t stream) {
  long hits = 0;
#pragma omp parallel for reduction(+ : hits) schedule(static)
  for (long i = 0; i < T; ++i) hits += to_unit(counter_hash(seed, stream, static_cast<std::uint64_t>(i))) < p;
  return hits;
}

namespace {

double coulomb_box(const BoxGrid& g, const Profile& p, const MultiCoulomb& V, long f) {
  const BoxIndex j = box_at(g, f);
  const Point c = box_midpoint(g, j);
  const double r = p.support_radius() * g.ell();
  bool outside = true;
  for (const auto& y : V.centers) outside = outside && distance(c, y.position) > r;
  if (outside) return shell_average(V, c, r);
  return local_average(V, make_orbital(g, j, p));
}

cplx trig_entry(const BoxGrid& g, const Profile& p, const Point& k, long f, double rel_tol) {
  AverageOptions opt;
  opt.rel_tol = rel_tol;
  opt.abs_tol = 1e-15;
  const Orbital orb = make_orbital(g, box_at(g, f), p);
  return weighted_average_complex(
      orb, [&](const Point& x) { return std::polar(1.0, 2.0 * std::numbers::pi * dot(k, x)); }, opt);
}

}  // namespace

std::vector<double> coulomb_field_serial(const BoxGrid& g, const Profile& p, const MultiCoulomb& V) {
  std::vector<double> out(g.box_count());
  for (long f = 0; f < g.box_count(); ++f) out[f] = coulomb_box(g, p, V, f);
  return out;
}

std::vector<double> coulomb_field_parallel(const BoxGrid& g, const Profile& p, const MultiCoulomb& V) {
  const long n = g.box_count();
  std::vector<double> out(n);
  std::exception_ptr err;
#pragma omp parallel for schedule(dynamic)
  for (long f = 0; f < n; ++f) {
    try {
      out[f] = coulomb_box(g, p, V, f);
    } catch (...) {
#pragma omp critical
      if (!err) err = std::current_exception();
    }
  }
  if (err) std::rethrow_exception(err);
  return out;
}

Eigen::MatrixXcd trig_overlap_serial(const BoxGrid& g, const Profile& p, const std::vector<Point>& k,
                                     double rel_tol) {
  const long n = g.box_count();
  Eigen::MatrixXcd M(n, static_cast<long>(k.size()));
  for (long f = 0; f < n; ++f)
    for (std::size_t i = 0; i < k.size(); ++i) M(f, static_cast<long>(i)) = trig_entry(g, p, k[i], f, rel_tol);
  return M;
}

Eigen::MatrixXcd trig_overlap_parallel(const BoxGrid& g, const Profile& p, const std::vector<Point>& k,
                                       double rel_tol) {
  const long n = g.box_count();
  const long K = static_cast<long>(k.size());
  Eigen::MatrixXcd M(n, K);
  std::exception_ptr err;
#pragma omp parallel for collapse(2) schedule(dynamic)
  for (long f = 0; f < n; ++f)
    for (long i = 0; i < K; ++i) {
      try {
        M(f, i) = trig_entry(g, p, k[i], f, rel_tol);
      } catch (...) {
#pragma omp critical
        if (!err) err = std::current_exception();
      }
    }
  if (err) std::rethrow_exception(err);
  return M;
}

}  // namespace cfl::kernels
