#pragma once

#include <functional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "cfl/grid.hpp"
#include "cfl/types.hpp"

namespace cfl {

struct CoulombCenter {
  double charge = 1.0;
  Point position{};
};

struct MultiCoulomb {
  std::vector<CoulombCenter> centers;
};

// lambda / sqrt(|x - y|^2 + a^2); used where the bare singularity cannot be
// sampled.
struct SoftenedCoulomb {
  std::vector<CoulombCenter> centers;
  double a = 0.0;
};

// Constant on each box of `grid`, indexed by flat_index; zero outside [0, L]^d.
struct StepFunction {
  BoxGrid grid;
  std::vector<double> values;
};

// sum_i lambda_i exp(2 pi i k_i . x). eval() returns the real part.
struct TrigSum {
  std::vector<Point> frequencies;
  std::vector<cplx> coefficients;
};

struct Callable {
  std::function<double(const Point&)> fn;
  double lipschitz = 0.0;
  std::string label = "callable";
};

using PotentialModel = std::variant<MultiCoulomb, SoftenedCoulomb, StepFunction, TrigSum, Callable>;

double eval(const PotentialModel& V, const Point& x);
cplx eval_complex(const TrigSum& V, const Point& x);

// Points where V is not smooth: Coulomb centers and, for step functions, none
// (box faces coincide with orbital support boundaries).
std::vector<Point> singular_points(const PotentialModel& V);

// sum_k lambda_k / |p - y_k| for a radial density of the given support radius
// centred at p. Throws when a center lies inside the support ball.
double shell_average(const MultiCoulomb& V, const Point& p, double support_radius);

// H(r) = int g(x) / |x - r v| dx for the 3D density g = |f|^2 of a unit-box
// profile. Exact radial shell form: int g(s) 4 pi s^2 / max(r, s) ds.
double radial_shift_value(const Profile& profile, double r);

// Same functional by direct 3D quadrature along direction v (independent route).
double radial_shift_quadrature(const Profile& profile, double r, const Point& v);

// Bracket (-r / (r - r*), -(r - r*) / (r* + r)) for H'(r), valid for r > r*.
std::pair<double, double> h_prime_bounds(double r, double r_star);

// (-(r* + r) / (r - r*)^3, -(r - r*) / (r* + r)^3), the bracket that follows
// from bounding the derivative integrand pointwise. Unlike h_prime_bounds it
// always contains H'(r) = -1 / r^2.
std::pair<double, double> h_prime_bounds_pointwise(double r, double r_star);

// Replace bare Coulomb centers by softened ones; other variants pass through.
PotentialModel soften(const PotentialModel& V, double a);

}  // namespace cfl
