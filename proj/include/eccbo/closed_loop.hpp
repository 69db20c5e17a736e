#pragma once

// Closed-loop Williams-Otto runner: 1 s sampling, PI constraint loops, R-test
// gating, and ECCBO setpoint updates on every steady-state event.

#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "eccbo/errors.hpp"
#include "eccbo/orchestrator.hpp"
#include "eccbo/regulatory.hpp"
#include "eccbo/scenario.hpp"
#include "eccbo/ssd.hpp"
#include "eccbo/williams_otto.hpp"

namespace eccbo::harness {

inline constexpr double kSampleTime = 1.0;

// ---------------------------------------------------------------------------
// Offline identification

struct FoptdModel {
  double gain = 0.0;
  double tau1 = 0.0;
  double theta = 0.0;
};

struct LoopTuning {
  std::string name;
  FoptdModel model;
  regulatory::PiTuning pi;
  double tau_c = 0.0;
  double operating_mv = 0.0;
  double operating_cv = 0.0;
};

inline double mv_value(const wo::WoInputs& u, const std::string& mv) {
  return mv == "f_b" ? u.f_b : u.t_r;
}

inline void set_mv(wo::WoInputs& u, const std::string& mv, double v) {
  (mv == "f_b" ? u.f_b : u.t_r) = v;
}

/// Open-loop step test around the steady state at `u0`: step `mv` by `step`
/// and fit a first-order-plus-delay model to `cv` (delay from the 2 % crossing,
/// time constant from the 63.2 % crossing).
inline FoptdModel identify_step(const wo::WoInputs& u0, double holdup, const std::string& mv,
                                const std::string& cv, double step) {
  wo::WoState init;
  init.holdup_w = holdup;
  const wo::WoState s0 = wo::wo_steady_state(u0.f_a, u0.f_b, u0.t_r, init);
  wo::WoInputs u1 = u0;
  set_mv(u1, mv, mv_value(u0, mv) + step);
  const wo::WoState s_inf = wo::wo_steady_state(u1.f_a, u1.f_b, u1.t_r, s0);
  const int idx = *wo::species_index(cv);
  const double dy = s_inf.x[idx] - s0.x[idx];
  if (dy == 0.0) throw UncontrollablePairing("identify_step: " + cv + " does not respond to " + mv);

  wo::WoState s = s0;
  double t2 = -1.0, t63 = -1.0;
  constexpr double kHorizon = 20.0 * 3600.0;
  for (double t = kSampleTime; t <= kHorizon; t += kSampleTime) {
    s = wo::integrate_step(s, u1, kSampleTime);
    const double frac = (s.x[idx] - s0.x[idx]) / dy;
    if (t2 < 0.0 && frac >= 0.02) t2 = t;
    if (frac >= 0.632) {
      t63 = t;
      break;
    }
  }
  if (t63 < 0.0) throw NonConvergence("identify_step: response never reached 63 %");
  // A response that is immediate within one sample carries no measurable delay.
  const double theta = t2 <= kSampleTime ? 0.0 : t2 - kSampleTime;
  return {dy / step, std::max(t63 - theta, kSampleTime), theta};
}

/// Identifies and SIMC-tunes every auto-tuned loop at the scenario's initial
/// operating point; explicit gains are passed through unchanged.
inline std::vector<LoopTuning> tune_loops(const Scenario& sc) {
  const wo::WoInputs u0{sc.schedule.front().f_a, sc.plant.initial_f_b, sc.plant.initial_t_r};
  std::vector<LoopTuning> out;
  for (const auto& l : sc.loops) {
    LoopTuning t;
    t.name = l.name;
    t.tau_c = l.tau_c;
    t.operating_mv = mv_value(u0, l.mv);
    if (l.auto_tune) {
      t.model = identify_step(u0, sc.plant.holdup, l.mv, l.cv, l.step_size);
      t.pi = regulatory::simc_tune(t.model.gain, t.model.tau1, t.model.theta, l.tau_c);
    } else {
      t.pi = {l.direction >= 0 ? std::abs(l.kc) : -std::abs(l.kc), l.tau_i};
    }
    out.push_back(t);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Trajectory

struct LogRow {
  double time = 0.0;
  double f_a = 0.0, f_b = 0.0, t_r = 0.0;
  wo::Composition x = wo::Composition::Zero();
  std::vector<double> setpoints;
  bool steady = false;
  bool bo_event = false;
  double profit = 0.0;
};

struct BoEvent {
  double time = 0.0;
  std::vector<double> applied;  // setpoints observed at steady state
  double context = 0.0;
  double profit_measured = 0.0;
  double profit_true = 0.0;
  double f_star = 0.0;          // minimization units
  double regret = 0.0;
  std::vector<double> g;
  std::vector<double> next;     // decision issued at this event
};

struct OracleEntry {
  double f_a = 0.0;
  wo::OptimumResult optimum;
};

struct TrajectoryLog {
  std::vector<std::string> setpoint_names;
  std::vector<LogRow> rows;
  std::vector<BoEvent> events;
  std::vector<LoopTuning> tuning;
  std::vector<OracleEntry> oracle;
  std::vector<std::vector<double>> decisions;  // every emitted decision, in order
  RtoMetrics metrics;
  std::string error;  // non-empty if the run aborted

  const OracleEntry* oracle_for(double f_a) const {
    for (const auto& o : oracle)
      if (o.f_a == f_a) return &o;
    return nullptr;
  }
};

struct RunOptions {
  std::optional<std::uint64_t> seed_override;
  std::function<void(const BoEvent&)> on_event;
};

inline EccboConfig make_eccbo_config(const Scenario& sc, std::uint64_t seed) {
  EccboConfig cfg;
  const Eigen::Index n = Eigen::Index(sc.loops.size());
  Eigen::VectorXd lo(n), hi(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    cfg.space.setpoint_names.push_back(sc.loops[i].name);
    lo[i] = sc.loops[i].setpoint_min;
    hi[i] = sc.loops[i].setpoint_max;
  }
  cfg.space.setpoint_box = Box(lo, hi);
  cfg.space.free_box = Box(Eigen::VectorXd(0), Eigen::VectorXd(0));
  cfg.context_box = Box(Eigen::VectorXd::Constant(1, sc.bo.context_min),
                        Eigen::VectorXd::Constant(1, sc.bo.context_max));
  cfg.acquisition.beta = sc.bo.beta;
  cfg.acquisition.multistart_count = sc.bo.multistart_count;
  cfg.acquisition.local_steps = sc.bo.local_steps;
  cfg.acquisition.seed = seed;
  cfg.init_count = sc.bo.init_count;
  cfg.default_lengthscale = sc.bo.default_lengthscale;
  cfg.hyper_bounds = sc.bo.hyper_bounds;
  cfg.fit_restarts = sc.bo.fit_restarts;
  cfg.fit_seed = seed;
  cfg.refit_every_until = sc.bo.refit_every_until;
  cfg.refit_interval = sc.bo.refit_interval;
  cfg.prior_mean_shift = sc.bo.prior_mean_shift;
  return cfg;
}

/// Oracle for the Williams-Otto pairing (x_g, x_a loops); nullopt otherwise.
inline std::optional<wo::SetpointBoxes> oracle_boxes(const Scenario& sc) {
  wo::SetpointBoxes b;
  bool has_g = false, has_a = false;
  for (const auto& l : sc.loops) {
    if (l.cv == "x_g") {
      b.z_g_min = l.setpoint_min;
      b.z_g_max = l.setpoint_max;
      has_g = true;
    } else if (l.cv == "x_a") {
      b.z_a_min = l.setpoint_min;
      b.z_a_max = l.setpoint_max;
      has_a = true;
    }
  }
  if (!(has_g && has_a) || sc.loops.size() != 2 || sc.plant.holdup != wo::kDefaultHoldup)
    return std::nullopt;
  return b;
}

inline TrajectoryLog run_closed_loop(const Scenario& sc, const RunOptions& opts = {}) {
  sc.validate();
  const std::uint64_t seed = opts.seed_override.value_or(sc.bo.seed);
  TrajectoryLog log;
  for (const auto& l : sc.loops) log.setpoint_names.push_back(l.name);
  log.metrics.violation_tolerance = sc.violation_tolerance;
  const auto steps = static_cast<long>(sc.total_duration / kSampleTime);
  if (steps == 0) return log;

  try {
    const EccboConfig cfg = make_eccbo_config(sc, seed);
    if (const auto boxes = oracle_boxes(sc)) {
      for (const auto& e : sc.schedule) {
        if (log.oracle_for(e.f_a)) continue;
        log.oracle.push_back({e.f_a, wo::wo_true_optimum(e.f_a, sc.oracle_grid, *boxes)});
      }
    }

    log.tuning = tune_loops(sc);
    const wo::WoInputs u_init{sc.schedule.front().f_a, sc.plant.initial_f_b, sc.plant.initial_t_r};
    EccboHistory history = EccboHistory::empty(cfg);
    Eigen::VectorXd context(1);
    context[0] = sc.f_a_at(0.0);
    DecisionVector decision = eccbo_step(history, context, cfg);
    log.decisions.push_back({decision.setpoints().data(),
                             decision.setpoints().data() + decision.setpoints().size()});

    std::vector<regulatory::PiLoop> loops;
    std::vector<int> cv_index;
    for (std::size_t i = 0; i < sc.loops.size(); ++i) {
      const auto& l = sc.loops[i];
      loops.push_back(regulatory::PiLoop::from_tuning(l.cv, l.mv, log.tuning[i].pi, l.u_min, l.u_max,
                                                      mv_value(u_init, l.mv),
                                                      decision.setpoints()[Eigen::Index(i)]));
      cv_index.push_back(*wo::species_index(l.cv));
    }

    std::vector<ssd::SsdConfig> ssd_cfgs;
    std::vector<int> ssd_source;  // -1 = profit, else species index
    for (const auto& sig : sc.ssd.signals) {
      ssd::SsdConfig c;
      c.lambda1 = sc.ssd.lambda1;
      c.lambda2 = sc.ssd.lambda2;
      c.lambda3 = sc.ssd.lambda3;
      c.r_crit = sc.ssd.r_crit;
      c.warmup = sc.ssd.warmup;
      c.epsilon = sig.epsilon;
      ssd_cfgs.push_back(c);
      ssd_source.push_back(sig.signal == "profit" ? -1 : *wo::species_index(sig.signal));
    }
    ssd::SteadyStateGate gate(ssd_cfgs, sc.ssd.hold);

    std::mt19937_64 noise_rng(seed ^ 0x9e3779b97f4a7c15ULL);
    std::normal_distribution<double> noise(0.0, 1.0);

    wo::WoState state;
    for (int i = 0; i < 6; ++i) state.x[i] = sc.plant.initial_fractions[std::size_t(i)];
    state.holdup_w = sc.plant.holdup;
    wo::WoInputs inputs = u_init;

    std::vector<double> ramp_from(loops.size()), ramp_to(loops.size());
    for (std::size_t i = 0; i < loops.size(); ++i) ramp_from[i] = ramp_to[i] = loops[i].setpoint();
    double ramp_start = 0.0;
    std::vector<double> samples(ssd_cfgs.size());

    log.rows.reserve(std::size_t(steps));
    for (long k = 0; k < steps; ++k) {
      const double t = double(k) * kSampleTime;
      inputs.f_a = sc.f_a_at(t);

      const double frac =
          sc.bo.ramp_seconds > 0.0 ? std::clamp((t - ramp_start) / sc.bo.ramp_seconds, 0.0, 1.0) : 1.0;
      for (std::size_t i = 0; i < loops.size(); ++i) {
        const double sp = frac >= 1.0 ? ramp_to[i] : ramp_from[i] + frac * (ramp_to[i] - ramp_from[i]);
        loops[i].set_setpoint(sp);
        set_mv(inputs, loops[i].manipulated_var, loops[i].step(state.x[cv_index[i]], kSampleTime));
      }

      state = wo::integrate_step(state, inputs, kSampleTime);
      const double t1 = t + kSampleTime;
      const double profit_true = wo::wo_cost(state, inputs);
      const double profit =
          sc.plant.cost_noise_std > 0.0 ? profit_true + sc.plant.cost_noise_std * noise(noise_rng) : profit_true;

      for (std::size_t j = 0; j < samples.size(); ++j)
        samples[j] = ssd_source[j] < 0 ? profit : state.x[ssd_source[j]];
      const bool steady = gate.update(samples);

      LogRow row;
      row.time = t1;
      row.f_a = inputs.f_a;
      row.f_b = inputs.f_b;
      row.t_r = inputs.t_r;
      row.x = state.x;
      row.setpoints.resize(loops.size());
      for (std::size_t i = 0; i < loops.size(); ++i) row.setpoints[i] = loops[i].setpoint();
      row.steady = steady;
      row.profit = profit;

      if (steady) {
        BoEvent ev;
        ev.time = t1;
        ev.context = inputs.f_a;
        ev.profit_measured = profit;
        ev.profit_true = profit_true;
        ev.applied = ramp_to;
        std::vector<double> g;
        for (std::size_t i = 0; i < loops.size(); ++i) g.push_back(sc.loops[i].limit - state.x[cv_index[i]]);
        ev.g = g;
        log.metrics = violation_update(std::move(log.metrics), g);
        if (const auto* o = log.oracle_for(inputs.f_a)) {
          ev.f_star = o->optimum.cost;
          log.metrics = regret_update(std::move(log.metrics), -profit_true, o->optimum.cost);
          ev.regret = log.metrics.regrets.back();
        } else {
          ev.f_star = std::numeric_limits<double>::quiet_NaN();
          ev.regret = std::numeric_limits<double>::quiet_NaN();
        }

        context[0] = inputs.f_a;
        history = record_observation(std::move(history), decision, context, -profit, t1, cfg);
        decision = eccbo_step(history, context, cfg);
        const auto& sp = decision.setpoints();
        ev.next.assign(sp.data(), sp.data() + sp.size());
        log.decisions.push_back(ev.next);

        for (std::size_t i = 0; i < loops.size(); ++i) {
          ramp_from[i] = loops[i].setpoint();
          ramp_to[i] = sp[Eigen::Index(i)];
        }
        ramp_start = t1;
        gate.reset();
        row.bo_event = true;
        if (opts.on_event) opts.on_event(ev);
        log.events.push_back(std::move(ev));
      }
      log.rows.push_back(std::move(row));
    }
  } catch (const std::exception& e) {
    log.error = e.what();
  }
  return log;
}

}  // namespace eccbo::harness
