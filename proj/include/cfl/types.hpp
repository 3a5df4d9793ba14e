#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <numbers>

namespace cfl {

using cplx = std::complex<double>;

// Points always carry three components; for d < 3 the trailing ones are zero.
using Point = std::array<double, 3>;

inline double dot(const Point& a, const Point& b) {
  return a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
}

inline Point operator-(const Point& a, const Point& b) {
  return {a[0] - b[0], a[1] - b[1], a[2] - b[2]};
}

inline Point operator+(const Point& a, const Point& b) {
  return {a[0] + b[0], a[1] + b[1], a[2] + b[2]};
}

inline Point operator*(double s, const Point& a) {
  return {s * a[0], s * a[1], s * a[2]};
}

inline double norm(const Point& a) { return std::sqrt(dot(a, a)); }

inline double distance(const Point& a, const Point& b) { return norm(a - b); }

// Surface area of the unit sphere S^{d-1}.
inline double unit_sphere_area(int d) {
  switch (d) {
    case 1: return 2.0;
    case 2: return 2.0 * std::numbers::pi;
    default: return 4.0 * std::numbers::pi;
  }
}

}  // namespace cfl
