#include "cfl/dynamics.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <iostream>
#include <mutex>
#include <numbers>

#include "cfl/error.hpp"

namespace cfl {

namespace {

std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

int next_pow2(long x) {
  int p = 1;
  while (p < x) p <<= 1;
  return p;
}

template <class F>
void for_each_node(const SpectralGrid& g, F&& f) {
  std::array<int, 3> i{0, 0, 0};
  for (i[0] = 0; i[0] < g.n[0]; ++i[0])
    for (i[1] = 0; i[1] < g.n[1]; ++i[1])
      for (i[2] = 0; i[2] < g.n[2]; ++i[2]) f(i, g.offset(i));
}

}  // namespace

double SpectralGrid::cell_volume() const { return std::pow(h, d); }

Point SpectralGrid::node(const std::array<int, 3>& i) const {
  Point p{0.0, 0.0, 0.0};
  for (int a = 0; a < d; ++a) p[a] = origin[a] + i[a] * h;
  return p;
}

bool operator==(const SpectralGrid& a, const SpectralGrid& b) {
  return a.d == b.d && a.n == b.n && a.origin == b.origin && a.h == b.h;
}

SpectralGrid window_grid(const BoxGrid& g, const std::vector<BoxIndex>& boxes, int points_per_box,
                         double padding) {
  if (boxes.empty()) throw Error(ErrorKind::InvalidArgument, "window needs at least one box");
  if (points_per_box < 2) throw Error(ErrorKind::InvalidArgument, "points_per_box must be >= 2");
  SpectralGrid s;
  s.d = g.d;
  s.h = g.ell() / points_per_box;
  const int pad_cells = static_cast<int>(std::ceil(padding / s.h - 1e-9));
  s.padding = pad_cells * s.h;
  for (int a = 0; a < 3; ++a) {
    if (a >= g.d) {
      s.n[a] = 1;
      s.origin[a] = 0.0;
      continue;
    }
    int lo = g.m, hi = -1;
    for (const auto& j : boxes) {
      check_index(g, j);
      lo = std::min(lo, j[a]);
      hi = std::max(hi, j[a]);
    }
    const long needed = static_cast<long>(hi - lo + 1) * points_per_box + 2L * pad_cells;
    s.n[a] = std::max(8, next_pow2(needed));
    const long extra = s.n[a] - needed;
    s.origin[a] = lo * g.ell() - (pad_cells + extra / 2) * s.h;
  }
  return s;
}

double Wavefunction::norm_sq() const {
  double s = 0.0;
  for (const auto& v : values) s += std::norm(v);
  return s * grid.cell_volume();
}

Wavefunction discretize(const Orbital& orb, const SpectralGrid& g) {
  if (orb.grid.d != g.d) throw Error(ErrorKind::GridMismatch, "orbital and spectral grid dimensions differ");
  const Point c = box_midpoint(orb.grid, orb.box);
  const double r = orb.profile.support_radius() * orb.grid.ell();
  for (int a = 0; a < g.d; ++a)
    if (c[a] - r < g.origin[a] || c[a] + r > g.origin[a] + g.length(a))
      throw Error(ErrorKind::InvalidArgument, "box outside the computational domain");
  Wavefunction wf{g, std::vector<cplx>(g.size())};
  for_each_node(g, [&](const std::array<int, 3>& i, long off) {
    wf.values[off] = orbital_eval(orb, g.node(i));
  });
  const double ns = wf.norm_sq();
  if (!(ns > 0.0)) throw Error(ErrorKind::InvalidArgument, "orbital not resolved by the spectral grid");
  const double s = 1.0 / std::sqrt(ns);
  for (auto& v : wf.values) v *= s;
  return wf;
}

cplx overlap(const Wavefunction& a, const Wavefunction& b) {
  if (!(a.grid == b.grid)) throw Error(ErrorKind::GridMismatch, "overlap of wavefunctions on different grids");
  cplx s = 0.0;
  for (std::size_t i = 0; i < a.values.size(); ++i) s += std::conj(a.values[i]) * b.values[i];
  return s * a.grid.cell_volume();
}

PropagatorPlan PropagatorPlan::for_time(double t, double max_dt) {
  if (!(max_dt > 0.0)) throw Error(ErrorKind::InvalidArgument, "max_dt must be positive");
  PropagatorPlan p;
  p.steps = std::max(1, static_cast<int>(std::ceil(std::abs(t) / max_dt - 1e-12)));
  p.dt = t / p.steps;
  return p;
}

struct Propagator::Plans {
  fftw_plan forward = nullptr;
  fftw_plan backward = nullptr;
};

Propagator::Propagator(const SpectralGrid& g, const PotentialModel& V, double softening)
    : grid_(g), plans_(std::make_unique<Plans>()) {
  const double a = softening >= 0.0 ? softening : 0.5 * g.h;
  const PotentialModel Vs = soften(V, a);
  v_.resize(g.size());
  k2_.resize(g.size());
  for_each_node(g, [&](const std::array<int, 3>& i, long off) {
    v_[off] = eval(Vs, g.node(i));
    double k2 = 0.0;
    for (int ax = 0; ax < g.d; ++ax) {
      const int f = i[ax] <= g.n[ax] / 2 ? i[ax] : i[ax] - g.n[ax];
      const double k = 2.0 * std::numbers::pi * f / g.length(ax);
      k2 += k * k;
    }
    k2_[off] = k2;
  });

  std::vector<cplx> scratch(g.size());
  auto* p = reinterpret_cast<fftw_complex*>(scratch.data());
  std::lock_guard<std::mutex> lock(planner_mutex());
  const int dims[3] = {g.n[0], g.n[1], g.n[2]};
  const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
  plans_->forward = fftw_plan_dft(g.d, dims, p, p, FFTW_FORWARD, flags);
  plans_->backward = fftw_plan_dft(g.d, dims, p, p, FFTW_BACKWARD, flags);
}

Propagator::~Propagator() {
  std::lock_guard<std::mutex> lock(planner_mutex());
  if (plans_->forward) fftw_destroy_plan(plans_->forward);
  if (plans_->backward) fftw_destroy_plan(plans_->backward);
}

void Propagator::fft(std::vector<cplx>& data, bool forward) const {
  auto* p = reinterpret_cast<fftw_complex*>(data.data());
  fftw_execute_dft(forward ? plans_->forward : plans_->backward, p, p);
  if (!forward) {
    const double s = 1.0 / static_cast<double>(data.size());
    for (auto& v : data) v *= s;
  }
}

Wavefunction Propagator::evolve(const Wavefunction& wf, double t, const PropagatorPlan& plan) const {
  if (!(wf.grid == grid_)) throw Error(ErrorKind::GridMismatch, "wavefunction not on the propagator grid");
  Wavefunction out = wf;
  if (t == 0.0) return out;
  const long n = grid_.size();
  const double dt = plan.dt;
  std::vector<cplx> half_v(n), kin(n);
#pragma omp parallel for schedule(static)
  for (long i = 0; i < n; ++i) {
    half_v[i] = std::polar(1.0, -0.5 * dt * v_[i]);
    kin[i] = std::polar(1.0, -dt * k2_[i]);
  }
  auto& psi = out.values;
  for (int s = 0; s < plan.steps; ++s) {
#pragma omp parallel for schedule(static)
    for (long i = 0; i < n; ++i) psi[i] *= half_v[i];
    fft(psi, true);
#pragma omp parallel for schedule(static)
    for (long i = 0; i < n; ++i) psi[i] *= kin[i];
    fft(psi, false);
#pragma omp parallel for schedule(static)
    for (long i = 0; i < n; ++i) psi[i] *= half_v[i];
  }
  const double leak = leak_fraction(out);
  if (leak > 1e-6)
    std::cerr << "warning: " << leak << " of the norm reached the padding shell; enlarge the window\n";
  return out;
}

Wavefunction Propagator::evolve(const Wavefunction& wf, double t, double max_dt) const {
  return evolve(wf, t, PropagatorPlan::for_time(t, max_dt));
}

Wavefunction Propagator::apply_h(const Wavefunction& wf) const {
  if (!(wf.grid == grid_)) throw Error(ErrorKind::GridMismatch, "wavefunction not on the propagator grid");
  Wavefunction out = wf;
  fft(out.values, true);
  for (long i = 0; i < grid_.size(); ++i) out.values[i] *= k2_[i];
  fft(out.values, false);
  for (long i = 0; i < grid_.size(); ++i) out.values[i] += v_[i] * wf.values[i];
  return out;
}

double Propagator::leak_fraction(const Wavefunction& wf) const {
  const double shell = 0.5 * grid_.padding;
  if (shell <= 0.0) return 0.0;
  double outer = 0.0, total = 0.0;
  for_each_node(grid_, [&](const std::array<int, 3>& i, long off) {
    const double w = std::norm(wf.values[off]);
    total += w;
    for (int a = 0; a < grid_.d; ++a) {
      const double x = i[a] * grid_.h;
      if (x < shell || x > grid_.length(a) - shell) {
        outer += w;
        break;
      }
    }
  });
  return total > 0.0 ? outer / total : 0.0;
}

}  // namespace cfl
