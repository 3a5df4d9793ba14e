#pragma once

#include <vector>

#include "cfl/grid.hpp"
#include "cfl/potentials.hpp"
#include "cfl/quadrature.hpp"

namespace cfl {

struct AverageOptions {
  double rel_tol = 1e-8;
  double abs_tol = 1e-13;
  int max_intervals = 4000;
};

// omega_j = int |f_j|^2 V. Coulomb centers inside the support ball are passed
// to the quadrature as breakpoints. Throws QuadratureFailure if the tolerance
// is not reached.
double local_average(const PotentialModel& V, const Orbital& orb, const AverageOptions& opt = {});

// Same, with the achieved error estimate.
QuadResult<double> local_average_detailed(const PotentialModel& V, const Orbital& orb,
                                          const AverageOptions& opt = {});

// int |f_j|^2 e over the orbital support for a complex-valued e.
cplx weighted_average_complex(const Orbital& orb, const std::function<cplx(const Point&)>& e,
                              const AverageOptions& opt = {});

}  // namespace cfl
