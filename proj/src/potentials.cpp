#include "cfl/potentials.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "cfl/error.hpp"
#include "cfl/quadrature.hpp"

namespace cfl {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

}  // namespace

cplx eval_complex(const TrigSum& V, const Point& x) {
  cplx s = 0.0;
  for (std::size_t i = 0; i < V.frequencies.size(); ++i)
    s += V.coefficients[i] * std::polar(1.0, 2.0 * std::numbers::pi * dot(V.frequencies[i], x));
  return s;
}

double eval(const PotentialModel& V, const Point& x) {
  return std::visit(
      overloaded{
          [&](const MultiCoulomb& v) {
            double s = 0.0;
            for (const auto& c : v.centers) {
              const double r = distance(x, c.position);
              if (r == 0.0) throw Error(ErrorKind::Singularity, "potential evaluated at a Coulomb center");
              s += c.charge / r;
            }
            return s;
          },
          [&](const SoftenedCoulomb& v) {
            double s = 0.0;
            for (const auto& c : v.centers) {
              const Point dx = x - c.position;
              s += c.charge / std::sqrt(dot(dx, dx) + v.a * v.a);
            }
            return s;
          },
          [&](const StepFunction& v) {
            const BoxGrid& g = v.grid;
            BoxIndex j{0, 0, 0};
            for (int a = 0; a < g.d; ++a) {
              if (x[a] < 0.0 || x[a] > g.L) return 0.0;
              j[a] = std::min(static_cast<int>(std::floor(x[a] / g.ell())), g.m - 1);
            }
            return v.values.at(flat_index(g, j));
          },
          [&](const TrigSum& v) { return eval_complex(v, x).real(); },
          [&](const Callable& v) { return v.fn(x); },
      },
      V);
}

std::vector<Point> singular_points(const PotentialModel& V) {
  std::vector<Point> out;
  if (const auto* mc = std::get_if<MultiCoulomb>(&V))
    for (const auto& c : mc->centers) out.push_back(c.position);
  return out;
}

double shell_average(const MultiCoulomb& V, const Point& p, double support_radius) {
  double s = 0.0;
  for (const auto& c : V.centers) {
    const double r = distance(p, c.position);
    if (!(r > support_radius))
      throw Error(ErrorKind::InvalidArgument, "Coulomb center inside the support ball; use quadrature");
    s += c.charge / r;
  }
  return s;
}

double radial_shift_value(const Profile& profile, double r) {
  if (profile.dimension() != 3)
    throw Error(ErrorKind::InvalidArgument, "radial shift functional is defined for d = 3");
  const double rs = profile.support_radius();
  if (r > rs) return 1.0 / r;
  QuadOptions opt;
  opt.rel_tol = 1e-13;
  opt.abs_tol = 0.0;
  const double bp[] = {r};
  auto res = integrate<double>(
      [&](double s) { return profile.density(s) * 4.0 * std::numbers::pi * s * s / std::max(r, s); },
      0.0, rs, bp, opt);
  return res.value;
}

double radial_shift_quadrature(const Profile& profile, double r, const Point& v) {
  if (profile.dimension() != 3)
    throw Error(ErrorKind::InvalidArgument, "radial shift functional is defined for d = 3");
  const Point y = r * v;
  const Point origin{0.0, 0.0, 0.0};
  QuadOptions opt;
  opt.rel_tol = 1e-9;
  opt.abs_tol = 1e-13;
  opt.max_intervals = 20000;
  std::vector<Point> sing;
  if (r < profile.support_radius()) sing.push_back(y);
  auto res = integrate_ball<double>(
      3, origin, profile.support_radius(),
      [&](const Point& x) {
        const double dist = distance(x, y);
        return dist == 0.0 ? 0.0 : profile.density(norm(x)) / dist;
      },
      sing, opt);
  if (!res.converged)
    throw Error(ErrorKind::QuadratureFailure, "radial shift quadrature did not converge");
  return res.value;
}

std::pair<double, double> h_prime_bounds(double r, double r_star) {
  if (!(r > r_star)) throw Error(ErrorKind::InvalidArgument, "h_prime_bounds requires r > r*");
  return {-r / (r - r_star), -(r - r_star) / (r_star + r)};
}

std::pair<double, double> h_prime_bounds_pointwise(double r, double r_star) {
  if (!(r > r_star)) throw Error(ErrorKind::InvalidArgument, "h_prime_bounds requires r > r*");
  const double lo = r - r_star, hi = r + r_star;
  return {-hi / (lo * lo * lo), -lo / (hi * hi * hi)};
}

PotentialModel soften(const PotentialModel& V, double a) {
  if (const auto* mc = std::get_if<MultiCoulomb>(&V)) return SoftenedCoulomb{mc->centers, a};
  return V;
}

}  // namespace cfl
