#pragma once

#include <array>
#include <memory>
#include <vector>

#include "cfl/grid.hpp"
#include "cfl/potentials.hpp"

namespace cfl {

// Periodic computational box [origin, origin + n * h] per axis, with the same
// spacing h on every axis so boxes of a BoxGrid are sampled identically.
struct SpectralGrid {
  int d = 1;
  std::array<int, 3> n{1, 1, 1};
  Point origin{};
  double h = 1.0;
  double padding = 0.0;

  long size() const { return static_cast<long>(n[0]) * n[1] * n[2]; }
  double cell_volume() const;
  double length(int axis) const { return n[axis] * h; }
  // Axis 0 varies slowest in memory (row-major, matching FFTW).
  long offset(const std::array<int, 3>& i) const {
    return (static_cast<long>(i[0]) * n[1] + i[1]) * n[2] + i[2];
  }
  Point node(const std::array<int, 3>& i) const;
};

bool operator==(const SpectralGrid& a, const SpectralGrid& b);

// Window covering `boxes` plus at least `padding` on every side, with
// `points_per_box` nodes per box side. Per-axis counts are powers of two.
SpectralGrid window_grid(const BoxGrid& g, const std::vector<BoxIndex>& boxes, int points_per_box,
                         double padding);

struct Wavefunction {
  SpectralGrid grid;
  std::vector<cplx> values;

  double norm_sq() const;
};

// Samples f_j on the nodes and renormalises to unit discrete norm.
Wavefunction discretize(const Orbital& orb, const SpectralGrid& g);

// Discrete L2 inner product <a, b>, conjugate-linear in a.
cplx overlap(const Wavefunction& a, const Wavefunction& b);

struct PropagatorPlan {
  double dt = 1e-3;
  int steps = 1;

  // Smallest step count with |dt| <= max_dt and steps * dt == t.
  static PropagatorPlan for_time(double t, double max_dt);
};

// Strang split-step propagator for h = -Delta + V. Bare Coulomb centers are
// softened with a = h / 2 unless an explicit softening is given.
class Propagator {
 public:
  Propagator(const SpectralGrid& g, const PotentialModel& V, double softening = -1.0);
  ~Propagator();
  Propagator(const Propagator&) = delete;
  Propagator& operator=(const Propagator&) = delete;

  const SpectralGrid& grid() const { return grid_; }
  const std::vector<double>& potential_samples() const { return v_; }

  Wavefunction evolve(const Wavefunction& wf, double t, const PropagatorPlan& plan) const;
  Wavefunction evolve(const Wavefunction& wf, double t, double max_dt = 1e-3) const;

  // h applied spectrally: inverse FFT of |k|^2 FFT(psi) plus V psi.
  Wavefunction apply_h(const Wavefunction& wf) const;

  // Fraction of the norm within padding / 2 of the computational boundary.
  double leak_fraction(const Wavefunction& wf) const;

 private:
  void fft(std::vector<cplx>& data, bool forward) const;

  SpectralGrid grid_;
  std::vector<double> v_;
  std::vector<double> k2_;
  struct Plans;
  std::unique_ptr<Plans> plans_;
};

}  // namespace cfl
