#include "cfl/coulomb_solver.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <sstream>

#include "cfl/error.hpp"

namespace cfl {

namespace {

// |eta_12 - eta_34| must exceed kEtaGuardFactor * kEtaLowerBound * ell / (L - ell).
constexpr double kEtaGuardFactor = 0.1;
constexpr double kEtaLowerBound = 0.07;

BoxIndex shift(BoxIndex j, int axis, int step) {
  j[axis] += step;
  return j;
}

std::string describe(const BoxIndex& j) {
  std::ostringstream os;
  os << '(' << j[0] << ',' << j[1] << ',' << j[2] << ')';
  return os.str();
}

void require_3d(const BoxGrid& grid, const char* what) {
  if (grid.d != 3) throw Error(ErrorKind::InvalidArgument, std::string(what) + " requires d = 3");
}

BoxIndex box_containing(const BoxGrid& grid, const Point& y) {
  BoxIndex j{};
  for (int a = 0; a < 3; ++a)
    j[a] = std::clamp(static_cast<int>(std::floor(y[a] / grid.ell())), 0, grid.m - 1);
  return j;
}

}  // namespace

BoxIndex find_peak(const OmegaDataset& data) {
  if (data.entries.empty()) throw Error(ErrorKind::InvalidArgument, "empty dataset");
  long best = 0;
  for (long f = 1; f < static_cast<long>(data.entries.size()); ++f) {
    const double a = data.entries[f].omega_hat;
    const double b = data.entries[best].omega_hat;
    if (a > b) {
      best = f;
    } else if (a == b) {
      const BoxIndex ja = box_at(data.grid, f);
      const BoxIndex jb = box_at(data.grid, best);
      if (ja < jb) best = f;
    }
  }
  return box_at(data.grid, best);
}

ProbeSet select_probe_points(const BoxIndex& peak, const BoxGrid& grid, bool force) {
  require_3d(grid, "probe selection");
  check_index(grid, peak);
  if (grid.m < 8) throw Error(ErrorKind::InvalidArgument, "probe selection needs m >= 8");
  if (grid.m != 8 && !force)
    throw Error(ErrorKind::InvalidArgument, "probe selection is defined on the 8^3 grid; pass force for m != 8");
  ProbeSet ps;
  for (int a = 0; a < 3; ++a) {
    const int lo = std::clamp(peak[a] - 3, 0, grid.m - 8);
    const int c = peak[a] - lo;
    ps.j0[a] = c <= 3 ? lo + 7 : lo;
    ps.e[a] = ps.j0[a] > peak[a] ? 1 : -1;
  }
  ps.boxes[0] = ps.j0;
  ps.boxes[1] = shift(ps.j0, 0, -ps.e[0]);
  ps.boxes[2] = shift(ps.j0, 1, -ps.e[1]);
  for (int k = 0; k < 3; ++k) ps.boxes[3 + k] = shift(peak, 2, (2 + k) * ps.e[2]);
  for (const auto& b : ps.boxes)
    if (!contains(grid, b))
      throw Error(ErrorKind::IndexOutOfRange, "probe box " + describe(b) + " outside the grid");
  return ps;
}

SingleCoulombResult solve_single(const OmegaLookup& omega, const BoxGrid& grid, const ProbeSet& probes,
                                 double lambda_lo, double lambda_hi) {
  require_3d(grid, "single-center solve");
  if (!(lambda_lo > 0.0 && lambda_hi >= lambda_lo))
    throw Error(ErrorKind::InvalidArgument, "charge bounds must satisfy 0 < lo <= hi");
  std::array<double, 6> w{};
  std::array<Point, 6> p{};
  for (int i = 0; i < 6; ++i) {
    w[i] = omega(probes.boxes[i]);
    if (!(w[i] > 0.0))
      throw Error(ErrorKind::InconsistentData, "non-positive local average at probe " + describe(probes.boxes[i]));
    p[i] = box_midpoint(grid, probes.boxes[i]);
  }
  constexpr std::array<std::pair<int, int>, 4> rows{{{3, 4}, {4, 5}, {2, 0}, {1, 0}}};
  Eigen::Matrix4d A;
  Eigen::Vector4d v;
  std::array<double, 4> eta{};
  for (int r = 0; r < 4; ++r) {
    const auto [i, j] = rows[r];
    eta[r] = 1.0 / (w[i] * w[i]) - 1.0 / (w[j] * w[j]);
    const Point dp = p[i] - p[j];
    A(r, 0) = eta[r];
    for (int a = 0; a < 3; ++a) A(r, 1 + a) = 2.0 * dp[a];
    v(r) = dot(p[i], p[i]) - dot(p[j], p[j]);
  }

  SingleCoulombResult res;
  res.probes = probes;
  res.eta_gap = eta[0] - eta[1];
  const double ell = grid.ell();
  const double guard = kEtaGuardFactor * kEtaLowerBound * ell / (grid.L - ell);
  if (!(std::abs(res.eta_gap) >= guard)) {
    std::ostringstream os;
    os << "eta gap " << res.eta_gap << " below guard " << guard;
    throw Error(ErrorKind::IllConditioned, os.str());
  }
  Eigen::JacobiSVD<Eigen::Matrix4d> svd(A);
  const auto& s = svd.singularValues();
  res.condition = s(3) > 0.0 ? s(0) / s(3) : INFINITY;
  const Eigen::Vector4d x = A.fullPivLu().solve(v);
  if (!(x(0) > 0.0)) throw Error(ErrorKind::InconsistentData, "negative squared charge estimate");
  double lambda = std::sqrt(x(0));
  if (lambda < lambda_lo || lambda > lambda_hi) {
    lambda = std::clamp(lambda, lambda_lo, lambda_hi);
    res.clamped = true;
  }
  res.charge = lambda;
  res.position = {x(1), x(2), x(3)};
  return res;
}

SingleCoulombResult reconstruct_single(const OmegaDataset& data, double lambda_lo, double lambda_hi,
                                       bool force) {
  const BoxIndex peak = find_peak(data);
  const ProbeSet ps = select_probe_points(peak, data.grid, force);
  auto res = solve_single([&](const BoxIndex& j) { return data.at(j).omega_hat; }, data.grid, ps, lambda_lo,
                          lambda_hi);
  res.peak = peak;
  return res;
}

int neighborhood_radius(const BoxGrid& grid) {
  return static_cast<int>(std::ceil(std::cbrt(1.0 / grid.ell()) - 1e-12));
}

double default_threshold(const MultiCoulombConfig& cfg, const BoxGrid& grid) {
  return std::min(2.0 * cfg.K * cfg.lambda_hi / cfg.y_star, cfg.lambda_lo / (2.0 * std::cbrt(grid.ell())));
}

GridCheck validate_grid(const MultiCoulombConfig& cfg, const BoxGrid& grid) {
  const double ys = cfg.y_star;
  const double t1 = 64.0 / grid.L;
  const double t2 = std::pow(16.0 * ys / 3.0, 3);
  const double t3 = 125.0 / (ys * ys * ys);
  const double c = cfg.c_threshold > 0.0 ? cfg.c_threshold : default_threshold(cfg, grid);
  const double gap = 2.0 * cfg.K * cfg.lambda_hi / ys - c;
  const double t4 = gap > 0.0 ? std::pow(grid.L * cfg.lambda_lo, -3) * gap * gap * gap : 0.0;
  const double t5 = std::pow(32.0 * cfg.K * cfg.lambda_hi / (3.0 * c), 3);
  GridCheck g;
  g.required_m = static_cast<long>(std::ceil(std::max({t1, t2, t3})));
  g.required_m_strict = static_cast<long>(std::ceil(std::max({t1, t3, t4, t5})));
  g.satisfied = grid.m >= g.required_m;
  std::ostringstream os;
  os << "m = " << grid.m << "; grid-size bound requires m >= " << g.required_m
     << " (stricter form: " << g.required_m_strict << ")";
  g.message = os.str();
  return g;
}

Detection detect_centers(const OmegaDataset& data, const MultiCoulombConfig& cfg) {
  const BoxGrid& grid = data.grid;
  require_3d(grid, "center detection");
  if (cfg.K < 1) throw Error(ErrorKind::InvalidArgument, "K must be positive");
  Detection det;
  det.s1 = neighborhood_radius(grid);
  det.threshold = cfg.c_threshold > 0.0 ? cfg.c_threshold : default_threshold(cfg, grid);
  const int s = det.s1;
  const int m = grid.m;

  for (long f = 0; f < grid.box_count(); ++f) {
    const OmegaEntry& ej = data.entries[f];
    const BoxIndex j = box_at(grid, f);
    double margin = INFINITY;
    bool any = false;
    for (int a = -s; a <= s && margin >= det.threshold; ++a)
      for (int b = -s; b <= s && margin >= det.threshold; ++b)
        for (int c = -s; c <= s; ++c) {
          if (std::max({std::abs(a), std::abs(b), std::abs(c)}) != s) continue;
          const BoxIndex k{j[0] + a, j[1] + b, j[2] + c};
          if (k[0] < 0 || k[1] < 0 || k[2] < 0 || k[0] >= m || k[1] >= m || k[2] >= m) continue;
          const OmegaEntry& ek = data.entries[flat_index(grid, k)];
          const double d = ej.omega_hat - ek.omega_hat - cfg.noise_sigmas * (ej.std_error + ek.std_error);
          margin = std::min(margin, d);
          any = true;
          if (margin < det.threshold) break;
        }
    if (any && margin >= det.threshold) det.candidates.push_back({j, ej.omega_hat, margin});
  }

  auto order = det.candidates;
  std::stable_sort(order.begin(), order.end(), [](const auto& x, const auto& y) { return x.omega > y.omega; });
  const double sep = cfg.y_star - 2.0 * s * grid.ell();
  for (const auto& c : order) {
    const Point pc = box_midpoint(grid, c.box);
    bool keep = true;
    for (const auto& k : det.centers)
      if (distance(pc, box_midpoint(grid, k)) < sep) keep = false;
    if (keep) det.centers.push_back(c.box);
  }
  if (static_cast<int>(det.centers.size()) != cfg.K) {
    std::ostringstream os;
    os << "found " << det.centers.size() << " centers, expected " << cfg.K << " (threshold " << det.threshold
       << ", s1 " << s << ")";
    for (std::size_t i = 0; i < std::min<std::size_t>(order.size(), 10); ++i)
      os << "\n  candidate " << describe(order[i].box) << " omega " << order[i].omega << " margin "
         << order[i].margin;
    throw Error(ErrorKind::DetectionFailure, os.str());
  }
  return det;
}

double scaled_radial_shift(const Profile& profile, double ell, double r) {
  return radial_shift_value(profile, r / ell) / ell;
}

ChargeSystem assemble_charge_system(const std::vector<BoxIndex>& centers, const BoxGrid& grid,
                                    const Profile& profile, double y_star) {
  require_3d(grid, "charge system");
  const int K = static_cast<int>(centers.size());
  if (K < 1) throw Error(ErrorKind::InvalidArgument, "no centers");
  ChargeSystem sys;
  sys.M.resize(K, K);
  const double ell = grid.ell();
  for (int k = 0; k < K; ++k)
    for (int kp = 0; kp < K; ++kp) {
      const double r = distance(box_midpoint(grid, centers[k]), box_midpoint(grid, centers[kp]));
      sys.M(k, kp) = r > profile.support_radius() * ell ? 1.0 / r : scaled_radial_shift(profile, ell, r);
    }
  sys.min_dominance_margin = INFINITY;
  for (int k = 0; k < K; ++k) {
    double off = 0.0;
    for (int kp = 0; kp < K; ++kp)
      if (kp != k) off += std::abs(sys.M(k, kp));
    sys.min_dominance_margin = std::min(sys.min_dominance_margin, std::abs(sys.M(k, k)) - off);
  }
  if (!(sys.min_dominance_margin > 0.0)) {
    std::ostringstream os;
    os << "charge matrix is not strictly diagonally dominant (margin " << sys.min_dominance_margin << ")";
    throw Error(ErrorKind::ConfigurationInvalid, os.str());
  }
  const Eigen::MatrixXd inv = sys.M.inverse();
  sys.inv_norm_inf = inv.cwiseAbs().rowwise().sum().maxCoeff();
  sys.inv_norm_2 = Eigen::JacobiSVD<Eigen::MatrixXd>(inv).singularValues()(0);
  sys.bound = 2.0 * (K - 1) / (5.0 * y_star);
  return sys;
}

std::vector<double> solve_charges(const ChargeSystem& sys, const OmegaDataset& data,
                                  const std::vector<BoxIndex>& centers) {
  const int K = static_cast<int>(centers.size());
  if (sys.M.rows() != K) throw Error(ErrorKind::InvalidArgument, "charge system size mismatch");
  Eigen::VectorXd w(K);
  for (int k = 0; k < K; ++k) w(k) = data.at(centers[k]).omega_hat;
  const Eigen::VectorXd lam = sys.M.partialPivLu().solve(w);
  return {lam.data(), lam.data() + K};
}

int refinement_rounds(const BoxGrid& grid, double epsilon) {
  if (!(epsilon > 0.0)) throw Error(ErrorKind::InvalidArgument, "epsilon must be positive");
  const double r = std::log(std::cbrt(grid.ell()) / epsilon) / std::log(3.0);
  return std::max(1, static_cast<int>(std::ceil(r)));
}

void refine_positions(const OmegaLookup& omega, const BoxGrid& grid, const Profile& profile,
                      const MultiCoulombConfig& cfg, double epsilon, MultiCoulombResult& state) {
  const int K = static_cast<int>(state.positions.size());
  if (static_cast<int>(state.charges.size()) != K || K == 0)
    throw Error(ErrorKind::InvalidArgument, "refinement needs one charge per position");
  const double ell = grid.ell();
  state.rounds = refinement_rounds(grid, epsilon);
  const auto solve_center = [&](int kp) {
    const OmegaLookup isolated = [&](const BoxIndex& j) {
      const Point pj = box_midpoint(grid, j);
      double w = omega(j);
      for (int k = 0; k < K; ++k)
        if (k != kp) w -= state.charges[k] * scaled_radial_shift(profile, ell, distance(pj, state.positions[k]));
      return w;
    };
    const ProbeSet ps = select_probe_points(box_containing(grid, state.positions[kp]), grid, true);
    return solve_single(isolated, grid, ps, cfg.lambda_lo, cfg.lambda_hi);
  };
  for (int sweep = 0; sweep < cfg.charge_sweeps; ++sweep)
    for (int kp = 0; kp < K; ++kp) state.charges[kp] = solve_center(kp).charge;
  if (state.trace.empty()) state.trace.push_back({state.charges, state.positions, 0.0});

  int growth = 0;
  double prev = INFINITY;
  for (int round = 0; round < state.rounds; ++round) {
    double max_update = 0.0;
    for (int kp = 0; kp < K; ++kp) {
      const auto r = solve_center(kp);
      max_update = std::max(max_update, distance(r.position, state.positions[kp]));
      state.positions[kp] = r.position;
      state.charges[kp] = r.charge;
    }
    state.trace.push_back({state.charges, state.positions, max_update});
    growth = max_update > prev ? growth + 1 : 0;
    prev = max_update;
    if (growth >= 2) {
      std::ostringstream os;
      os << "refinement updates grew in two consecutive rounds (round " << round + 1 << ", update " << max_update
         << ")";
      throw Error(ErrorKind::NonContraction, os.str());
    }
  }
}

MultiCoulombResult reconstruct_multi(const OmegaDataset& data, const Profile& profile,
                                     const MultiCoulombConfig& cfg, double epsilon) {
  const BoxGrid& grid = data.grid;
  require_3d(grid, "multi-center reconstruction");
  MultiCoulombResult res;
  res.grid_check = validate_grid(cfg, grid);
  if (!res.grid_check.satisfied) std::cerr << "warning: " << res.grid_check.message << '\n';
  res.detection = detect_centers(data, cfg);
  res.system = assemble_charge_system(res.detection.centers, grid, profile, cfg.y_star);
  res.charges = solve_charges(res.system, data, res.detection.centers);
  for (auto& c : res.charges) c = std::clamp(c, cfg.lambda_lo, cfg.lambda_hi);
  for (const auto& j : res.detection.centers) res.positions.push_back(box_midpoint(grid, j));
  refine_positions([&](const BoxIndex& j) { return data.at(j).omega_hat; }, grid, profile, cfg, epsilon, res);
  return res;
}

}  // namespace cfl
