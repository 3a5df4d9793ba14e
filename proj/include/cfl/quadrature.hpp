#pragma once

// Adaptive Gauss-Kronrod (7/15) integration in one dimension, and nested
// tensor integration over a d-ball built on top of it.

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <queue>
#include <span>
#include <vector>

#include "cfl/types.hpp"

namespace cfl {

struct QuadOptions {
  double rel_tol = 1e-10;
  double abs_tol = 1e-15;
  int max_intervals = 4000;
};

template <class T>
struct QuadResult {
  T value{};
  double error = 0.0;
  long evaluations = 0;
  bool converged = true;
};

namespace detail {

extern const std::array<double, 8> kKronrodNodes;
extern const std::array<double, 8> kKronrodWeights;
extern const std::array<double, 4> kGaussWeights;

template <class T, class F>
void gk15(F&& f, double a, double b, T& value, double& error) {
  const double c = 0.5 * (a + b);
  const double h = 0.5 * (b - a);
  const T fc = f(c);
  T kronrod = fc * kKronrodWeights[7];
  T gauss = fc * kGaussWeights[3];
  for (int i = 0; i < 7; ++i) {
    const double dx = h * kKronrodNodes[i];
    const T f1 = f(c - dx);
    const T f2 = f(c + dx);
    kronrod += (f1 + f2) * kKronrodWeights[i];
    if (i % 2 == 1) gauss += (f1 + f2) * kGaussWeights[i / 2];
  }
  value = kronrod * h;
  error = std::abs((kronrod - gauss) * h);
}

}  // namespace detail

// Global adaptive integration of f over [a, b]. Interior breakpoints split the
// interval up front, which is how integrable singularities are isolated.
template <class T = double, class F>
QuadResult<T> integrate(F&& f, double a, double b,
                        std::span<const double> breakpoints = {},
                        const QuadOptions& opt = {}) {
  struct Interval {
    double a, b;
    T value;
    double error;
    bool operator<(const Interval& o) const { return error < o.error; }
  };

  QuadResult<T> res;
  if (!(b > a)) return res;

  std::vector<double> cuts{a};
  for (double p : breakpoints)
    if (p > a && p < b) cuts.push_back(p);
  cuts.push_back(b);
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());

  std::priority_queue<Interval> heap;
  T total{};
  double total_err = 0.0;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    Interval iv{cuts[i], cuts[i + 1], T{}, 0.0};
    detail::gk15<T>(f, iv.a, iv.b, iv.value, iv.error);
    res.evaluations += 15;
    total += iv.value;
    total_err += iv.error;
    heap.push(iv);
  }

  int intervals = static_cast<int>(heap.size());
  while (total_err > std::max(opt.abs_tol, opt.rel_tol * std::abs(total))) {
    if (intervals >= opt.max_intervals) {
      res.converged = false;
      break;
    }
    Interval worst = heap.top();
    heap.pop();
    const double mid = 0.5 * (worst.a + worst.b);
    if (!(mid > worst.a && mid < worst.b)) {
      res.converged = false;
      heap.push(worst);
      break;
    }
    Interval left{worst.a, mid, T{}, 0.0};
    Interval right{mid, worst.b, T{}, 0.0};
    detail::gk15<T>(f, left.a, left.b, left.value, left.error);
    detail::gk15<T>(f, right.a, right.b, right.value, right.error);
    res.evaluations += 30;
    total += left.value + right.value - worst.value;
    total_err += left.error + right.error - worst.error;
    heap.push(left);
    heap.push(right);
    ++intervals;
  }

  // Re-sum from the pieces to avoid drift from the running updates.
  total = T{};
  total_err = 0.0;
  while (!heap.empty()) {
    total += heap.top().value;
    total_err += heap.top().error;
    heap.pop();
  }
  res.value = total;
  res.error = total_err;
  return res;
}

// Nested integration of f over the d-ball of the given radius. The integrand
// is expected to vanish smoothly at the sphere. Coordinates of `singular`
// points become breakpoints on every axis.
template <class T = double, class F>
QuadResult<T> integrate_ball(int d, const Point& center, double radius, F&& f,
                             std::span<const Point> singular = {},
                             const QuadOptions& opt = {}) {
  QuadResult<T> out;
  Point x = center;
  long evals = 0;
  bool ok = true;

  std::function<T(int, double)> level = [&](int axis, double r2) -> T {
    const double half = std::sqrt(std::max(r2, 0.0));
    std::vector<double> bps;
    bps.reserve(singular.size() + 1);
    bps.push_back(center[axis]);
    for (const auto& s : singular) bps.push_back(s[axis]);
    QuadOptions inner = opt;
    // Inner integrals must be tighter than the outer target.
    inner.rel_tol = opt.rel_tol * 0.05;
    inner.abs_tol = opt.abs_tol * 0.05;
    const QuadOptions& use = axis == 0 ? opt : inner;
    auto g = [&](double xa) -> T {
      x[axis] = xa;
      if (axis + 1 == d) {
        ++evals;
        return f(x);
      }
      const double off = xa - center[axis];
      const T v = level(axis + 1, r2 - off * off);
      x[axis + 1] = center[axis + 1];
      return v;
    };
    auto r = integrate<T>(g, center[axis] - half, center[axis] + half, bps, use);
    ok = ok && r.converged;
    if (axis == 0) out.error = r.error;
    return r.value;
  };

  out.value = level(0, radius * radius);
  out.evaluations = evals;
  out.converged = ok;
  return out;
}

}  // namespace cfl
