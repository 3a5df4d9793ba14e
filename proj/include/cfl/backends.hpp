#pragma once

#include <array>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "cfl/dynamics.hpp"
#include "cfl/fock.hpp"
#include "cfl/grid.hpp"
#include "cfl/potentials.hpp"

namespace cfl {

enum class Backend { Analytic, Dense, Gaussian };

Backend parse_backend(const std::string& name);
const char* to_string(Backend b);

struct MeasurementSetting {
  int triple = 0;  // index into the prepared triples
  int alpha = 0;
  int beta = 1;
  double t = 0.0;
};

struct SimulatorOptions {
  int points_per_box = 32;
  double padding_boxes = 2.0;  // padding in units of ell
  double max_dt = 1e-3;
  double truncation_limit = 1e-6;
  int dense_mode_budget = 14;
};

// Prepares the orbitals of one or more triples on a shared spectral window and
// evaluates measurement probabilities with any backend.
class Simulator {
 public:
  Simulator(const BoxGrid& grid, const Profile& profile, const PotentialModel& V,
            std::vector<std::array<BoxIndex, 3>> triples, const SimulatorOptions& opt = {});

  const SpectralGrid& spectral() const { return spectral_; }
  const Propagator& propagator() const { return *prop_; }
  const std::vector<std::array<BoxIndex, 3>>& triples() const { return triples_; }
  const Wavefunction& prepared(int triple, int alpha) const;
  const Wavefunction& evolved(int triple, int alpha, double t) const;

  // Node mask of B^alpha u B^beta for the given triple.
  std::vector<bool> region_mask(int triple, int alpha, int beta) const;

  // |1 + i D(t)|^2 / 4 with D = ab - cd; global vacuum, single triple.
  double p_analytic(const MeasurementSetting& s) const;
  // d^2 p / dt^2 of the analytic expression, using h applied spectrally.
  double p_second_derivative(const MeasurementSetting& s) const;

  // Exact reduction of the measurement to a finite mode problem.
  ModeProblem mode_problem(const MeasurementSetting& s, bool regional) const;

  double probability(Backend b, const MeasurementSetting& s, bool regional = true) const;

 private:
  BoxGrid grid_;
  Profile profile_;
  std::vector<std::array<BoxIndex, 3>> triples_;
  SimulatorOptions opt_;
  SpectralGrid spectral_;
  std::unique_ptr<Propagator> prop_;
  std::vector<std::array<Wavefunction, 3>> prepared_;
  mutable std::map<std::tuple<int, int, double>, Wavefunction> cache_;
};

struct CalibrationReport {
  double kappa = 0.0;
  double pair_spread = 0.0;      // max |kappa_pair - kappa|
  double fit_residual = 0.0;     // max residual of the linear slope fit
  std::vector<double> kappas;    // per (potential, pair)
  std::vector<double> times;
};

// Fits dp/dt at t = 0 on the dense backend against omega_a + omega_b + 2 T_kin
// for V = 0 and a harmonic V on one 1D triple.
CalibrationReport calibrate_derivative_constant(const Profile& profile, const BoxGrid& grid,
                                                const SimulatorOptions& opt = {});

}  // namespace cfl
