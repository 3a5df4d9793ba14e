#include "cfl/averages.hpp"

#include <cmath>
#include <string>

#include "cfl/error.hpp"

namespace cfl {

namespace {

QuadOptions to_quad(const AverageOptions& opt) {
  QuadOptions q;
  q.rel_tol = opt.rel_tol;
  q.abs_tol = opt.abs_tol;
  q.max_intervals = opt.max_intervals;
  return q;
}

}  // namespace

QuadResult<double> local_average_detailed(const PotentialModel& V, const Orbital& orb,
                                          const AverageOptions& opt) {
  const Point c = box_midpoint(orb.grid, orb.box);
  const double ell = orb.grid.ell();
  const double radius = orb.profile.support_radius() * ell;
  const double scale = std::pow(ell, -static_cast<double>(orb.grid.d));

  std::vector<Point> inside;
  for (const Point& s : singular_points(V))
    if (distance(s, c) < radius) inside.push_back(s);

  auto integrand = [&](const Point& x) {
    const double w = scale * orb.profile.density(distance(x, c) / ell);
    if (w == 0.0) return 0.0;
    for (const Point& s : inside)
      if (distance(x, s) == 0.0) return 0.0;
    return w * eval(V, x);
  };
  return integrate_ball<double>(orb.grid.d, c, radius, integrand, inside, to_quad(opt));
}

double local_average(const PotentialModel& V, const Orbital& orb, const AverageOptions& opt) {
  auto r = local_average_detailed(V, orb, opt);
  if (!r.converged)
    throw Error(ErrorKind::QuadratureFailure,
                "local average did not converge; achieved error " + std::to_string(r.error));
  return r.value;
}

cplx weighted_average_complex(const Orbital& orb, const std::function<cplx(const Point&)>& e,
                              const AverageOptions& opt) {
  const Point c = box_midpoint(orb.grid, orb.box);
  const double ell = orb.grid.ell();
  const double radius = orb.profile.support_radius() * ell;
  const double scale = std::pow(ell, -static_cast<double>(orb.grid.d));
  auto r = integrate_ball<cplx>(
      orb.grid.d, c, radius,
      [&](const Point& x) { return scale * orb.profile.density(distance(x, c) / ell) * e(x); }, {},
      to_quad(opt));
  if (!r.converged)
    throw Error(ErrorKind::QuadratureFailure,
                "weighted average did not converge; achieved error " + std::to_string(r.error));
  return r.value;
}

}  // namespace cfl
