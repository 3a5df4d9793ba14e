#pragma once

// Hot loops with a serial reference and an OpenMP version that must agree
// bit for bit (integer counts) or to rounding (floating-point fields).

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "cfl/grid.hpp"
#include "cfl/potentials.hpp"

namespace cfl::kernels {

// Number of u_i < p over shots i in [0, T), u_i from counter_hash(seed, stream, i).
long count_shots_serial(double p, long T, std::uint64_t seed, std::uint64_t stream);
long count_shots_parallel(double p, long T, std::uint64_t seed, std::uint64_t stream);

// omega_j for every box of the grid (flat order) under a multi-Coulomb V:
// shell theorem where all centers lie outside the support ball, quadrature
// otherwise.
std::vector<double> coulomb_field_serial(const BoxGrid& g, const Profile& p, const MultiCoulomb& V);
std::vector<double> coulomb_field_parallel(const BoxGrid& g, const Profile& p, const MultiCoulomb& V);

// M_{j,i} = int |f_j|^2 exp(2 pi i k_i . x) by quadrature, rows in flat order.
Eigen::MatrixXcd trig_overlap_serial(const BoxGrid& g, const Profile& p, const std::vector<Point>& k,
                                     double rel_tol);
Eigen::MatrixXcd trig_overlap_parallel(const BoxGrid& g, const Profile& p, const std::vector<Point>& k,
                                       double rel_tol);

}  // namespace cfl::kernels
