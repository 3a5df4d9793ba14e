#include "cfl/backends.hpp"

#include <cmath>
#include <numbers>

#include "cfl/averages.hpp"
#include "cfl/error.hpp"
#include "cfl/gaussian.hpp"

namespace cfl {

Backend parse_backend(const std::string& name) {
  if (name == "analytic") return Backend::Analytic;
  if (name == "dense") return Backend::Dense;
  if (name == "gaussian") return Backend::Gaussian;
  throw Error(ErrorKind::InvalidArgument, "unknown backend '" + name + "'");
}

const char* to_string(Backend b) {
  switch (b) {
    case Backend::Analytic: return "analytic";
    case Backend::Dense: return "dense";
    case Backend::Gaussian: return "gaussian";
  }
  return "unknown";
}

Simulator::Simulator(const BoxGrid& grid, const Profile& profile, const PotentialModel& V,
                     std::vector<std::array<BoxIndex, 3>> triples, const SimulatorOptions& opt)
    : grid_(grid), profile_(profile), triples_(std::move(triples)), opt_(opt) {
  if (triples_.empty()) throw Error(ErrorKind::InvalidArgument, "simulator needs at least one triple");
  std::vector<BoxIndex> boxes;
  for (const auto& t : triples_)
    for (const auto& j : t) boxes.push_back(j);
  spectral_ = window_grid(grid_, boxes, opt_.points_per_box, opt_.padding_boxes * grid_.ell());
  prop_ = std::make_unique<Propagator>(spectral_, V);
  for (const auto& t : triples_) {
    std::array<Wavefunction, 3> w;
    for (int a = 0; a < 3; ++a) w[a] = discretize(make_orbital(grid_, t[a], profile_), spectral_);
    prepared_.push_back(std::move(w));
  }
}

const Wavefunction& Simulator::prepared(int triple, int alpha) const {
  return prepared_.at(triple).at(alpha);
}

const Wavefunction& Simulator::evolved(int triple, int alpha, double t) const {
  const auto key = std::make_tuple(triple, alpha, t);
  auto it = cache_.find(key);
  if (it != cache_.end()) return it->second;
  Wavefunction w = prop_->evolve(prepared(triple, alpha), t, opt_.max_dt);
  return cache_.emplace(key, std::move(w)).first->second;
}

std::vector<bool> Simulator::region_mask(int triple, int alpha, int beta) const {
  const auto& tr = triples_.at(triple);
  const double ell = grid_.ell();
  std::vector<bool> mask(spectral_.size(), false);
  std::array<int, 3> i{0, 0, 0};
  for (i[0] = 0; i[0] < spectral_.n[0]; ++i[0])
    for (i[1] = 0; i[1] < spectral_.n[1]; ++i[1])
      for (i[2] = 0; i[2] < spectral_.n[2]; ++i[2]) {
        const Point x = spectral_.node(i);
        for (int box : {alpha, beta}) {
          bool in = true;
          for (int a = 0; a < grid_.d && in; ++a)
            in = x[a] >= ell * tr[box][a] && x[a] < ell * (tr[box][a] + 1);
          if (in) {
            mask[spectral_.offset(i)] = true;
            break;
          }
        }
      }
  return mask;
}

namespace {

void check_setting(const MeasurementSetting& s, std::size_t n_triples) {
  if (s.triple < 0 || s.triple >= static_cast<int>(n_triples))
    throw Error(ErrorKind::InvalidArgument, "measured triple out of range");
  if (s.alpha < 0 || s.beta > 2 || s.alpha >= s.beta)
    throw Error(ErrorKind::InvalidArgument, "pair must be one of (0,1), (0,2), (1,2)");
}

}  // namespace

double Simulator::p_analytic(const MeasurementSetting& s) const {
  check_setting(s, triples_.size());
  if (triples_.size() != 1)
    throw Error(ErrorKind::InvalidArgument, "analytic probability requires a single triple");
  const auto& fa = prepared(s.triple, s.alpha);
  const auto& fb = prepared(s.triple, s.beta);
  const auto& ua = evolved(s.triple, s.alpha, s.t);
  const auto& ub = evolved(s.triple, s.beta, s.t);
  const cplx D = overlap(fa, ua) * overlap(fb, ub) - overlap(fa, ub) * overlap(fb, ua);
  return std::norm(1.0 + cplx(0.0, 1.0) * D) / 4.0;
}

double Simulator::p_second_derivative(const MeasurementSetting& s) const {
  check_setting(s, triples_.size());
  const auto& fa = prepared(s.triple, s.alpha);
  const auto& fb = prepared(s.triple, s.beta);
  const Wavefunction hfa = prop_->apply_h(fa), hfb = prop_->apply_h(fb);
  const auto& ua = evolved(s.triple, s.alpha, s.t);
  const auto& ub = evolved(s.triple, s.beta, s.t);
  const Wavefunction hua = prop_->apply_h(ua), hub = prop_->apply_h(ub);
  const cplx mi(0.0, -1.0);

  // x(t) = <f, U g>, x' = -i <h f, U g>, x'' = -<h f, h U g>.
  struct Deriv {
    cplx v, d1, d2;
  };
  auto entry = [&](const Wavefunction& f, const Wavefunction& hf, const Wavefunction& ug,
                   const Wavefunction& hug) {
    return Deriv{overlap(f, ug), mi * overlap(hf, ug), -overlap(hf, hug)};
  };
  const Deriv a = entry(fa, hfa, ua, hua), b = entry(fb, hfb, ub, hub);
  const Deriv c = entry(fa, hfa, ub, hub), d = entry(fb, hfb, ua, hua);

  const cplx D = a.v * b.v - c.v * d.v;
  const cplx D1 = a.d1 * b.v + a.v * b.d1 - c.d1 * d.v - c.v * d.d1;
  const cplx D2 = a.d2 * b.v + 2.0 * a.d1 * b.d1 + a.v * b.d2 - c.d2 * d.v - 2.0 * c.d1 * d.d1 - c.v * d.d2;
  const cplx i(0.0, 1.0);
  const cplx w = 1.0 + i * D, w1 = i * D1, w2 = i * D2;
  return 0.5 * (std::norm(w1) + (std::conj(w) * w2).real());
}

namespace {

using Field = std::vector<cplx>;

cplx dot_field(const Field& a, const Field& b) {
  cplx s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::conj(a[i]) * b[i];
  return s;
}

// Gram-Schmidt with one re-orthogonalisation pass; vectors whose residual
// falls below `drop` are discarded.
void orthonormalize_into(std::vector<Field>& basis, std::vector<Field> candidates, double drop) {
  for (auto& v : candidates) {
    for (int pass = 0; pass < 2; ++pass)
      for (const auto& e : basis) {
        const cplx c = dot_field(e, v);
        for (std::size_t i = 0; i < v.size(); ++i) v[i] -= c * e[i];
      }
    const double n = std::sqrt(dot_field(v, v).real());
    if (n < drop) continue;
    for (auto& x : v) x /= n;
    basis.push_back(std::move(v));
  }
}

}  // namespace

ModeProblem Simulator::mode_problem(const MeasurementSetting& s, bool regional) const {
  check_setting(s, triples_.size());
  const double w = std::sqrt(spectral_.cell_volume());
  auto scaled = [w](const Wavefunction& f) {
    Field v(f.values);
    for (auto& x : v) x *= w;
    return v;
  };

  std::vector<Field> pre, post;
  for (int k = 0; k < static_cast<int>(triples_.size()); ++k)
    for (int a : {s.alpha, s.beta}) {
      pre.push_back(scaled(prepared(k, a)));
      post.push_back(scaled(evolved(k, a, s.t)));
    }

  const double drop = 1e-13;
  std::vector<Field> basis;
  std::vector<bool> in_region;
  std::vector<Field> all = pre;
  all.insert(all.end(), post.begin(), post.end());
  if (regional) {
    const auto mask = region_mask(s.triple, s.alpha, s.beta);
    std::vector<Field> inside, outside;
    for (const auto& v : all) {
      Field a(v.size(), 0.0), b(v.size(), 0.0);
      for (std::size_t i = 0; i < v.size(); ++i) (mask[i] ? a[i] : b[i]) = v[i];
      inside.push_back(std::move(a));
      outside.push_back(std::move(b));
    }
    orthonormalize_into(basis, std::move(inside), drop);
    in_region.assign(basis.size(), true);
    orthonormalize_into(basis, std::move(outside), drop);
    in_region.resize(basis.size(), false);
  } else {
    orthonormalize_into(basis, std::move(all), drop);
  }

  const int N = static_cast<int>(basis.size());
  const int n = static_cast<int>(pre.size());
  MatrixXcd F(N, n), G(N, n);
  double trunc = 0.0;
  for (int k = 0; k < n; ++k) {
    for (int e = 0; e < N; ++e) {
      F(e, k) = dot_field(basis[e], pre[k]);
      G(e, k) = dot_field(basis[e], post[k]);
    }
    const double full = dot_field(post[k], post[k]).real();
    trunc = std::max(trunc, 1.0 - G.col(k).squaredNorm() / full);
  }

  ModeProblem mp;
  mp.n_modes = N;
  mp.measured = s.triple;
  mp.propagator = complete_unitary(F, G);
  for (int k = 0; k < static_cast<int>(triples_.size()); ++k)
    mp.pairs.emplace_back(F.col(2 * k), F.col(2 * k + 1));
  if (regional) mp.region = in_region;
  mp.truncation_error = std::max(trunc, 0.0);
  return mp;
}

double Simulator::probability(Backend b, const MeasurementSetting& s, bool regional) const {
  switch (b) {
    case Backend::Analytic:
      return p_analytic(s);
    case Backend::Dense: {
      const ModeProblem mp = mode_problem(s, regional);
      if (mp.n_modes > opt_.dense_mode_budget)
        throw Error(ErrorKind::TruncationExceeded,
                    "dense backend needs " + std::to_string(mp.n_modes) + " modes, budget is " +
                        std::to_string(opt_.dense_mode_budget));
      if (mp.truncation_error > opt_.truncation_limit)
        throw Error(ErrorKind::TruncationExceeded,
                    "mode truncation error " + std::to_string(mp.truncation_error));
      return dense_probability(mp).probability;
    }
    case Backend::Gaussian: {
      const ModeProblem mp = mode_problem(s, regional);
      if (mp.truncation_error > opt_.truncation_limit)
        throw Error(ErrorKind::TruncationExceeded,
                    "mode truncation error " + std::to_string(mp.truncation_error));
      return gaussian_probability(mp).probability;
    }
  }
  return 0.0;
}

CalibrationReport calibrate_derivative_constant(const Profile& profile, const BoxGrid& grid,
                                                const SimulatorOptions& opt) {
  if (grid.d != profile.dimension())
    throw Error(ErrorKind::InvalidArgument, "profile and grid dimensions differ");
  if (grid.box_count() < 3) throw Error(ErrorKind::InvalidArgument, "calibration needs three boxes");
  const auto ts = partition_triples(grid);
  const auto triple = ts.triples.front();
  const Point mid = box_midpoint(grid, triple[1]);
  const double ell = grid.ell();

  std::vector<PotentialModel> potentials;
  potentials.emplace_back(Callable{[](const Point&) { return 0.0; }, 0.0, "zero"});
  potentials.emplace_back(Callable{[mid, ell](const Point& x) { return dot(x - mid, x - mid) / (ell * ell); },
                                   0.0, "harmonic"});

  CalibrationReport rep;
  rep.times = {8e-6, 4e-6, 2e-6, 1e-6};
  for (auto& t : rep.times) t *= ell * ell;
  const double tkin = kinetic_energy(make_orbital(grid, triple[0], profile));
  const std::array<std::pair<int, int>, 3> pairs{{{0, 1}, {0, 2}, {1, 2}}};

  for (const auto& V : potentials) {
    Simulator sim(grid, profile, V, {triple}, opt);
    std::array<double, 3> omega{};
    for (int a = 0; a < 3; ++a) omega[a] = local_average(V, make_orbital(grid, triple[a], profile));
    for (const auto& [a, b] : pairs) {
      std::vector<double> slope;
      for (double t : rep.times) {
        const double p = sim.probability(Backend::Dense, {0, a, b, t});
        slope.push_back((p - 0.5) / t);
      }
      // Quadratic through the three smallest times gives the t -> 0 slope.
      const double t1 = rep.times[1], t2 = rep.times[2], t3 = rep.times[3];
      const double s1 = slope[1], s2 = slope[2], s3 = slope[3];
      const double s0 = s1 * t2 * t3 / ((t1 - t2) * (t1 - t3)) + s2 * t1 * t3 / ((t2 - t1) * (t2 - t3)) +
                        s3 * t1 * t2 / ((t3 - t1) * (t3 - t2));
      rep.kappas.push_back(s0 / (omega[a] + omega[b] + 2.0 * tkin));

      // Linear least-squares fit residual over all times.
      const double n = static_cast<double>(rep.times.size());
      double st = 0, ss = 0, stt = 0, sts = 0;
      for (std::size_t i = 0; i < rep.times.size(); ++i) {
        st += rep.times[i];
        ss += slope[i];
        stt += rep.times[i] * rep.times[i];
        sts += rep.times[i] * slope[i];
      }
      const double m = (n * sts - st * ss) / (n * stt - st * st);
      const double c = (ss - m * st) / n;
      for (std::size_t i = 0; i < rep.times.size(); ++i)
        rep.fit_residual = std::max(rep.fit_residual, std::abs(slope[i] - (c + m * rep.times[i])));
    }
  }
  double sum = 0.0;
  for (double k : rep.kappas) sum += k;
  rep.kappa = sum / static_cast<double>(rep.kappas.size());
  for (double k : rep.kappas) rep.pair_spread = std::max(rep.pair_spread, std::abs(k - rep.kappa));
  return rep;
}

}  // namespace cfl
