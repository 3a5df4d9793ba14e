#pragma once

#include <array>
#include <vector>

#include "cfl/types.hpp"

namespace cfl {

// Partition of [0, L]^d into m^d boxes of side ell = L / m.
struct BoxGrid {
  double L = 1.0;
  int m = 1;
  int d = 1;

  double ell() const { return L / m; }
  long box_count() const;
};

// Components beyond d are always zero.
using BoxIndex = std::array<int, 3>;

BoxGrid build_grid(double L, int m, int d);

bool contains(const BoxGrid& g, const BoxIndex& j);
void check_index(const BoxGrid& g, const BoxIndex& j);

// Lexicographic enumeration with the first axis fastest.
long flat_index(const BoxGrid& g, const BoxIndex& j);
BoxIndex box_at(const BoxGrid& g, long flat);

Point box_midpoint(const BoxGrid& g, const BoxIndex& j);

struct TripleSet {
  std::vector<std::array<BoxIndex, 3>> triples;
  std::vector<BoxIndex> remainder;
};

// Consecutive runs of three in flat enumeration order; element labels
// alpha = 0, 1, 2 follow that order.
TripleSet partition_triples(const BoxGrid& g);

// Radial bump c * exp(1 / ((2r)^2 - 1)) on r < 1/2, normalised in d dimensions.
class Profile {
 public:
  static Profile bump(int d);

  int dimension() const { return d_; }
  double support_radius() const { return 0.5; }
  double normalization() const { return c_; }

  double radial(double r) const;
  double radial_derivative(double r) const;
  double density(double r) const { return radial(r) * radial(r); }

  // <f, -Delta f> for the unit-box profile.
  double kinetic_constant() const { return kinetic_; }

 private:
  int d_ = 1;
  double c_ = 1.0;
  double kinetic_ = 0.0;
};

struct Orbital {
  BoxGrid grid;
  BoxIndex box{};
  Profile profile;
};

Orbital make_orbital(const BoxGrid& g, const BoxIndex& j, const Profile& p);

double orbital_eval(const Orbital& orb, const Point& x);

// <f_j, -Delta f_j> = ell^-2 <f, -Delta f>.
double kinetic_energy(const Orbital& orb);

}  // namespace cfl
