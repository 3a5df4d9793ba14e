#include "cfl/grid.hpp"

#include <cmath>
#include <string>

#include "cfl/error.hpp"
#include "cfl/quadrature.hpp"

namespace cfl {

long BoxGrid::box_count() const {
  long n = 1;
  for (int a = 0; a < d; ++a) n *= m;
  return n;
}

BoxGrid build_grid(double L, int m, int d) {
  if (d < 1 || d > 3)
    throw Error(ErrorKind::InvalidArgument, "dimension must be 1, 2 or 3, got " + std::to_string(d));
  if (!(L > 0.0) || !std::isfinite(L))
    throw Error(ErrorKind::InvalidArgument, "domain length must be positive");
  if (m < 1) throw Error(ErrorKind::InvalidArgument, "boxes per axis must be at least 1");
  return BoxGrid{L, m, d};
}

bool contains(const BoxGrid& g, const BoxIndex& j) {
  for (int a = 0; a < 3; ++a) {
    if (a < g.d) {
      if (j[a] < 0 || j[a] >= g.m) return false;
    } else if (j[a] != 0) {
      return false;
    }
  }
  return true;
}

void check_index(const BoxGrid& g, const BoxIndex& j) {
  if (!contains(g, j))
    throw Error(ErrorKind::IndexOutOfRange,
                "box index (" + std::to_string(j[0]) + "," + std::to_string(j[1]) + "," +
                    std::to_string(j[2]) + ") outside grid with m=" + std::to_string(g.m));
}

long flat_index(const BoxGrid& g, const BoxIndex& j) {
  long f = 0;
  for (int a = g.d - 1; a >= 0; --a) f = f * g.m + j[a];
  return f;
}

BoxIndex box_at(const BoxGrid& g, long flat) {
  BoxIndex j{0, 0, 0};
  for (int a = 0; a < g.d; ++a) {
    j[a] = static_cast<int>(flat % g.m);
    flat /= g.m;
  }
  return j;
}

Point box_midpoint(const BoxGrid& g, const BoxIndex& j) {
  check_index(g, j);
  const double ell = g.ell();
  Point p{0.0, 0.0, 0.0};
  for (int a = 0; a < g.d; ++a) p[a] = ell * (j[a] + 0.5);
  return p;
}

TripleSet partition_triples(const BoxGrid& g) {
  TripleSet ts;
  const long n = g.box_count();
  const long full = n / 3;
  ts.triples.reserve(full);
  for (long t = 0; t < full; ++t)
    ts.triples.push_back({box_at(g, 3 * t), box_at(g, 3 * t + 1), box_at(g, 3 * t + 2)});
  for (long f = 3 * full; f < n; ++f) ts.remainder.push_back(box_at(g, f));
  return ts;
}

namespace {

// exp(1 / ((2r)^2 - 1)) with the underflow near the support edge made explicit.
double bump_shape(double r) {
  const double q = 4.0 * r * r - 1.0;
  if (q >= 0.0) return 0.0;
  const double e = 1.0 / q;
  return e < -700.0 ? 0.0 : std::exp(e);
}

double radial_moment(int d, auto&& integrand) {
  QuadOptions opt;
  opt.rel_tol = 1e-14;
  opt.abs_tol = 0.0;
  auto r = integrate<double>(
      [&](double s) { return integrand(s) * unit_sphere_area(d) * std::pow(s, d - 1); }, 0.0,
      0.5, {}, opt);
  return r.value;
}

}  // namespace

Profile Profile::bump(int d) {
  if (d < 1 || d > 3) throw Error(ErrorKind::InvalidArgument, "profile dimension must be 1, 2 or 3");
  Profile p;
  p.d_ = d;
  const double mass = radial_moment(d, [](double s) {
    const double b = bump_shape(s);
    return b * b;
  });
  p.c_ = 1.0 / std::sqrt(mass);
  p.kinetic_ = radial_moment(d, [&p](double s) {
    const double g = p.radial_derivative(s);
    return g * g;
  });
  return p;
}

double Profile::radial(double r) const { return c_ * bump_shape(r); }

double Profile::radial_derivative(double r) const {
  const double q = 4.0 * r * r - 1.0;
  if (q >= 0.0) return 0.0;
  return radial(r) * (-8.0 * r / (q * q));
}

Orbital make_orbital(const BoxGrid& g, const BoxIndex& j, const Profile& p) {
  check_index(g, j);
  if (p.dimension() != g.d)
    throw Error(ErrorKind::InvalidArgument, "profile dimension does not match grid dimension");
  return Orbital{g, j, p};
}

double orbital_eval(const Orbital& orb, const Point& x) {
  const double ell = orb.grid.ell();
  const Point c = box_midpoint(orb.grid, orb.box);
  const double r = distance(x, c) / ell;
  return std::pow(ell, -0.5 * orb.grid.d) * orb.profile.radial(r);
}

double kinetic_energy(const Orbital& orb) {
  const double ell = orb.grid.ell();
  return orb.profile.kinetic_constant() / (ell * ell);
}

}  // namespace cfl
