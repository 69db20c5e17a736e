#pragma once

// Williams-Otto CSTR, mass basis:
//   A + B -> 2C          k1 = 1.6599e6  exp(-6666.7 / T)
//   B + C -> P + E       k2 = 7.2177e8  exp(-8333.3 / T)
//   C + P -> G           k3 = 2.6745e12 exp(-11111  / T)
// with r1 = k1 xA xB W, r2 = k2 xB xC W, r3 = k3 xC xP W.

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Dense>

#include "eccbo/detail/box_minimizer.hpp"
#include "eccbo/errors.hpp"

namespace eccbo::wo {

using Composition = Eigen::Matrix<double, 6, 1>;

enum Species : int { A = 0, B = 1, C = 2, E = 3, G = 4, P = 5 };

inline constexpr std::array<const char*, 6> kSpeciesNames = {"x_a", "x_b", "x_c",
                                                            "x_e", "x_g", "x_p"};

inline std::optional<int> species_index(const std::string& name) {
  for (int i = 0; i < 6; ++i)
    if (name == kSpeciesNames[i]) return i;
  return std::nullopt;
}

/// Stoichiometric coefficients (rows: A B C E G P, columns: reactions 1..3).
inline Eigen::Matrix<double, 6, 3> stoichiometry() {
  Eigen::Matrix<double, 6, 3> s;
  // clang-format off
  s << -1.0,  0.0,  0.0,
       -1.0, -1.0,  0.0,
        2.0, -2.0, -1.0,
        0.0,  2.0,  0.0,
        0.0,  0.0,  1.5,
        0.0,  1.0, -0.5;
  // clang-format on
  return s;
}

inline constexpr double kDefaultHoldup = 2105.0;
inline constexpr double kMinTemperature = 320.0;
inline constexpr double kMaxTemperature = 420.0;

struct WoState {
  Composition x = (Composition() << 0.6, 0.4, 0.0, 0.0, 0.0, 0.0).finished();
  double holdup_w = kDefaultHoldup;

  double operator[](Species s) const { return x[s]; }

  void validate() const {
    if (!x.allFinite()) throw IntegrationBlowup("plant state is not finite");
    if (!(holdup_w > 0.0)) throw ContractViolation("plant: holdup must be positive");
  }
};

struct WoInputs {
  double f_a = 1.0;   // kg/s, context
  double f_b = 2.6;   // kg/s
  double t_r = 350.0; // K

  void validate() const {
    if (!(f_a > 0.0) || !(f_b > 0.0))
      throw ContractViolation("plant: feed rates must be positive");
    if (!(t_r >= kMinTemperature && t_r <= kMaxTemperature))
      throw ContractViolation("plant: reactor temperature " + std::to_string(t_r) +
                              " K outside [320, 420]");
  }
};

struct Rates {
  double k1, k2, k3;
  double r1, r2, r3;
};

inline std::array<double, 3> rate_constants(double t_r) {
  return {1.6599e6 * std::exp(-6666.7 / t_r), 7.2177e8 * std::exp(-8333.3 / t_r),
          2.6745e12 * std::exp(-11111.0 / t_r)};
}

inline Rates wo_rates(const WoState& s, double t_r) {
  const auto [k1, k2, k3] = rate_constants(t_r);
  const double w = s.holdup_w;
  return {k1, k2, k3, k1 * s[A] * s[B] * w, k2 * s[B] * s[C] * w, k3 * s[C] * s[P] * w};
}

inline Composition wo_derivatives(const WoState& s, const WoInputs& u) {
  const Rates r = wo_rates(s, u.t_r);
  const double f = u.f_a + u.f_b;
  Composition feed = Composition::Zero();
  feed[A] = u.f_a;
  feed[B] = u.f_b;
  const Eigen::Vector3d rv(r.r1, r.r2, r.r3);
  return (feed - f * s.x + stoichiometry() * rv) / s.holdup_w;
}

/// Profit rate ($/s); the optimizer minimizes its negation.
inline double wo_cost(const WoState& s, const WoInputs& u) {
  const double f = u.f_a + u.f_b;
  return 1043.38 * s[P] * f + 20.92 * s[E] * f - 79.23 * u.f_a - 118.34 * u.f_b;
}

inline constexpr double kMaxSubstep = 0.25;

/// Classical RK4 over `dt` with substeps no longer than `max_substep`.
inline WoState integrate_step(const WoState& s0, const WoInputs& u, double dt,
                              double max_substep = kMaxSubstep) {
  if (!(dt > 0.0)) throw ContractViolation("integrate_step: dt must be positive");
  u.validate();
  s0.validate();
  const int n = std::max(1, static_cast<int>(std::ceil(dt / max_substep - 1e-12)));
  const double h = dt / n;
  WoState s = s0;
  WoState tmp = s0;
  for (int i = 0; i < n; ++i) {
    const Composition k1 = wo_derivatives(s, u);
    tmp.x = s.x + 0.5 * h * k1;
    const Composition k2 = wo_derivatives(tmp, u);
    tmp.x = s.x + 0.5 * h * k2;
    const Composition k3 = wo_derivatives(tmp, u);
    tmp.x = s.x + h * k3;
    const Composition k4 = wo_derivatives(tmp, u);
    s.x += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  if (!s.x.allFinite()) throw IntegrationBlowup("integrate_step: non-finite state");
  const bool out_of_range = (s.x.array() < 0.0).any() || (s.x.array() > 1.0).any();
  if (out_of_range || std::abs(s.x.sum() - 1.0) > 1e-12) {
    s.x = s.x.cwiseMax(0.0).cwiseMin(1.0);
    const double total = s.x.sum();
    if (total > 0.0) s.x /= total;
  }
  return s;
}

// ---------------------------------------------------------------------------
// Steady states

namespace detail {

/// d f / d x (6x6), f = wo_derivatives.
inline Eigen::Matrix<double, 6, 6> state_jacobian(const WoState& s, const WoInputs& u) {
  const auto [k1, k2, k3] = rate_constants(u.t_r);
  const double w = s.holdup_w;
  Eigen::Matrix<double, 3, 6> dr = Eigen::Matrix<double, 3, 6>::Zero();
  dr(0, A) = k1 * s[B] * w;
  dr(0, B) = k1 * s[A] * w;
  dr(1, B) = k2 * s[C] * w;
  dr(1, C) = k2 * s[B] * w;
  dr(2, C) = k3 * s[P] * w;
  dr(2, P) = k3 * s[C] * w;
  Eigen::Matrix<double, 6, 6> j = stoichiometry() * dr;
  j.diagonal().array() -= (u.f_a + u.f_b);
  return j / w;
}

/// d f / d (f_b, t_r), 6x2.
inline Eigen::Matrix<double, 6, 2> input_jacobian(const WoState& s, const WoInputs& u) {
  const Rates r = wo_rates(s, u.t_r);
  Eigen::Matrix<double, 6, 2> j;
  Composition dfb = -s.x;
  dfb[B] += 1.0;
  j.col(0) = dfb / s.holdup_w;
  const double t2 = u.t_r * u.t_r;
  const Eigen::Vector3d dr(r.r1 * 6666.7 / t2, r.r2 * 8333.3 / t2, r.r3 * 11111.0 / t2);
  j.col(1) = stoichiometry() * dr / s.holdup_w;
  return j;
}

/// Newton polish of f(x) = 0 at fixed inputs. Returns false if it does not
/// reach `tol` in the infinity norm.
inline bool newton_state(WoState& s, const WoInputs& u, double tol) {
  for (int it = 0; it < 50; ++it) {
    const Composition f = wo_derivatives(s, u);
    if (f.cwiseAbs().maxCoeff() < tol) return true;
    const Composition dx = state_jacobian(s, u).partialPivLu().solve(-f);
    if (!dx.allFinite()) return false;
    double step = 1.0;
    const double f0 = f.cwiseAbs().maxCoeff();
    WoState trial = s;
    for (int ls = 0; ls < 30; ++ls) {
      trial.x = s.x + step * dx;
      if ((trial.x.array() >= -1e-14).all() &&
          wo_derivatives(trial, u).cwiseAbs().maxCoeff() < f0)
        break;
      step *= 0.5;
    }
    s = trial;
  }
  return wo_derivatives(s, u).cwiseAbs().maxCoeff() < tol;
}

}  // namespace detail

inline constexpr double kSteadyTolerance = 1e-10;

/// Steady state at fixed inputs, reached by integrating from `initial` until
/// the largest derivative falls below 1e-7, then finished by Newton to 1e-10.
/// Integration continues if the Newton phase fails. Cap: 1e6 simulated s.
inline WoState wo_steady_state(double f_a, double f_b, double t_r, const WoState& initial = {}) {
  const WoInputs u{f_a, f_b, t_r};
  u.validate();
  WoState s = initial;
  constexpr double kChunk = 10.0;
  constexpr double kCap = 1e6;
  constexpr double kNewtonEntry = 1e-7;
  for (double t = 0.0; t <= kCap; t += kChunk) {
    const double res = wo_derivatives(s, u).cwiseAbs().maxCoeff();
    if (res < kSteadyTolerance) return s;
    if (res < kNewtonEntry) {
      WoState polished = s;
      if (detail::newton_state(polished, u, kSteadyTolerance)) return polished;
    }
    s = integrate_step(s, u, kChunk);
  }
  throw NonConvergence("wo_steady_state: no steady state within 1e6 s");
}

/// Steady operating point with both constraint loops closed: x_G = z_g and
/// x_A = z_a, solving for the MVs (f_b, t_r).
struct SetpointSteadyState {
  WoState state;
  double f_b = 0.0;
  double t_r = 0.0;
  double profit = 0.0;
};

namespace detail {

inline std::optional<SetpointSteadyState> solve_setpoints_from(double f_a, double z_g, double z_a,
                                                               SetpointSteadyState guess) {
  WoState s = guess.state;
  double f_b = guess.f_b, t_r = guess.t_r;
  auto residual = [&](const WoState& st, double fb, double tr) {
    Eigen::Matrix<double, 8, 1> r;
    r.head<6>() = wo_derivatives(st, {f_a, fb, tr}) * st.holdup_w;
    r[6] = st[G] - z_g;
    r[7] = st[A] - z_a;
    return r;
  };
  for (int it = 0; it < 60; ++it) {
    if (!(t_r >= kMinTemperature && t_r <= kMaxTemperature) || !(f_b > 0.0)) return std::nullopt;
    const WoInputs u{f_a, f_b, t_r};
    const auto r = residual(s, f_b, t_r);
    const double r0 = r.cwiseAbs().maxCoeff();
    if (r0 < 1e-13) {
      SetpointSteadyState out{s, f_b, t_r, wo_cost(s, u)};
      return out;
    }
    Eigen::Matrix<double, 8, 8> j = Eigen::Matrix<double, 8, 8>::Zero();
    j.topLeftCorner<6, 6>() = state_jacobian(s, u) * s.holdup_w;
    j.topRightCorner<6, 2>() = input_jacobian(s, u) * s.holdup_w;
    j(6, G) = 1.0;
    j(7, A) = 1.0;
    const Eigen::Matrix<double, 8, 1> d = j.partialPivLu().solve(-r);
    if (!d.allFinite()) return std::nullopt;
    double step = 1.0;
    bool moved = false;
    for (int ls = 0; ls < 30; ++ls) {
      WoState ts = s;
      ts.x = s.x + step * d.head<6>();
      const double tfb = f_b + step * d[6], ttr = t_r + step * d[7];
      if (ttr >= kMinTemperature && ttr <= kMaxTemperature && tfb > 0.0 &&
          (ts.x.array() >= -1e-12).all() && residual(ts, tfb, ttr).cwiseAbs().maxCoeff() < r0) {
        s = ts;
        f_b = tfb;
        t_r = ttr;
        moved = true;
        break;
      }
      step *= 0.5;
    }
    if (!moved) return std::nullopt;
  }
  return std::nullopt;
}

}  // namespace detail

/// Nominal anchor used to seed setpoint continuation.
inline SetpointSteadyState nominal_operating_point(double f_a) {
  const double f_b = 2.6 * f_a;
  const double t_r = 350.0;
  const WoState s = wo_steady_state(f_a, f_b, t_r);
  return {s, f_b, t_r, wo_cost(s, {f_a, f_b, t_r})};
}

/// Closed-loop steady state for setpoints (z_g, z_a). With no `guess`, the
/// solve continues from the nominal operating point in small setpoint steps.
inline std::optional<SetpointSteadyState> steady_state_at_setpoints(
    double f_a, double z_g, double z_a, const std::optional<SetpointSteadyState>& guess = std::nullopt) {
  if (guess) {
    if (auto r = detail::solve_setpoints_from(f_a, z_g, z_a, *guess)) return r;
  }
  SetpointSteadyState cur = nominal_operating_point(f_a);
  const double g0 = cur.state[G], a0 = cur.state[A];
  constexpr int kSteps = 20;
  for (int k = 1; k <= kSteps; ++k) {
    const double s = double(k) / kSteps;
    auto r = detail::solve_setpoints_from(f_a, g0 + s * (z_g - g0), a0 + s * (z_a - a0), cur);
    if (!r) return std::nullopt;
    cur = *r;
  }
  return cur;
}

struct SetpointBoxes {
  double z_g_min = 0.07, z_g_max = 0.08;
  double z_a_min = 0.07, z_a_max = 0.12;
};

struct OptimumResult {
  double z_g = 0.0;
  double z_a = 0.0;
  double profit = 0.0;  // maximized profit, $/s
  double cost = 0.0;    // F* = -profit (minimization units)
  double f_b = 0.0;
  double t_r = 0.0;
  int feasible_points = 0;
};

/// Brute-force grid over the setpoint boxes (each point a closed-loop steady
/// state), then a local polish around the best grid point. Rows are solved in
/// parallel with deterministic continuation.
inline OptimumResult wo_true_optimum(double f_a, int grid_resolution, const SetpointBoxes& boxes = {},
                                     unsigned threads = 0) {
  if (grid_resolution < 51) throw ContractViolation("wo_true_optimum: grid_resolution must be >= 51");
  const int n = grid_resolution;
  auto zg_at = [&](int i) { return boxes.z_g_min + (boxes.z_g_max - boxes.z_g_min) * i / (n - 1); };
  auto za_at = [&](int j) { return boxes.z_a_min + (boxes.z_a_max - boxes.z_a_min) * j / (n - 1); };

  // Column j = 0 sequentially; each row continues along z_a from there.
  std::vector<std::optional<SetpointSteadyState>> first(n);
  std::optional<SetpointSteadyState> prev;
  for (int i = 0; i < n; ++i) {
    first[i] = steady_state_at_setpoints(f_a, zg_at(i), za_at(0), prev);
    if (first[i]) prev = first[i];
  }

  std::vector<double> profit(std::size_t(n) * n, -std::numeric_limits<double>::infinity());
  std::vector<std::optional<SetpointSteadyState>> sol(std::size_t(n) * n);
  auto solve_row = [&](int i) {
    std::optional<SetpointSteadyState> cur = first[i];
    for (int j = 0; j < n; ++j) {
      auto r = j == 0 ? cur : steady_state_at_setpoints(f_a, zg_at(i), za_at(j), cur);
      if (r) {
        profit[std::size_t(i) * n + j] = r->profit;
        sol[std::size_t(i) * n + j] = r;
        cur = r;
      }
    }
  };
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  if (threads <= 1) {
    for (int i = 0; i < n; ++i) solve_row(i);
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t)
      pool.emplace_back([&, t] {
        for (int i = int(t); i < n; i += int(threads)) solve_row(i);
      });
    for (auto& th : pool) th.join();
  }

  OptimumResult best;
  best.profit = -std::numeric_limits<double>::infinity();
  int best_idx = -1;
  for (int k = 0; k < n * n; ++k) {
    if (!sol[k]) continue;
    ++best.feasible_points;
    if (profit[k] > best.profit) {
      best.profit = profit[k];
      best_idx = k;
    }
  }
  if (best_idx < 0) throw NonConvergence("wo_true_optimum: no feasible grid point");

  // Polish in unit coordinates of the setpoint box (finite-difference gradient).
  const SetpointSteadyState anchor = *sol[best_idx];
  const Eigen::Vector2d lo(boxes.z_g_min, boxes.z_a_min), hi(boxes.z_g_max, boxes.z_a_max);
  const Eigen::Vector2d span = hi - lo;
  auto neg_profit = [&](const Eigen::Vector2d& u) {
    const Eigen::Vector2d z = lo + u.cwiseProduct(span);
    const auto r = steady_state_at_setpoints(f_a, std::clamp(z[0], lo[0], hi[0]),
                                             std::clamp(z[1], lo[1], hi[1]), anchor);
    return r ? -r->profit : std::numeric_limits<double>::infinity();
  };
  eccbo::detail::SmoothObjective obj = [&](const Eigen::VectorXd& u, Eigen::VectorXd& g) {
    const Eigen::Vector2d uu = u;
    const double f0 = neg_profit(uu);
    g.resize(2);
    constexpr double h = 1e-6;
    for (int k = 0; k < 2; ++k) {
      Eigen::Vector2d up = uu, dn = uu;
      up[k] = std::min(1.0, uu[k] + h);
      dn[k] = std::max(0.0, uu[k] - h);
      g[k] = (neg_profit(up) - neg_profit(dn)) / (up[k] - dn[k]);
    }
    return f0;
  };
  const int bi = best_idx / n, bj = best_idx % n;
  Eigen::VectorXd u0(2);
  u0 << double(bi) / (n - 1), double(bj) / (n - 1);
  eccbo::detail::MinimizeOptions opt;
  opt.max_iterations = 60;
  opt.gradient_tolerance = 1e-8;
  const auto r = eccbo::detail::minimize_in_box(obj, u0, Eigen::VectorXd::Zero(2),
                                                Eigen::VectorXd::Ones(2), opt);
  const Eigen::Vector2d z = lo + Eigen::Vector2d(r.x).cwiseProduct(span);
  best.z_g = std::clamp(z[0], lo[0], hi[0]);
  best.z_a = std::clamp(z[1], lo[1], hi[1]);
  const auto fin = steady_state_at_setpoints(f_a, best.z_g, best.z_a, anchor);
  if (fin && fin->profit >= best.profit) {
    best.profit = fin->profit;
    best.f_b = fin->f_b;
    best.t_r = fin->t_r;
  } else {
    best.z_g = zg_at(bi);
    best.z_a = za_at(bj);
    best.f_b = anchor.f_b;
    best.t_r = anchor.t_r;
  }
  best.cost = -best.profit;
  return best;
}

}  // namespace eccbo::wo
