#pragma once

// ECCBO orchestration. Constraint controllers hold g_i at setpoints z_i, so the
// optimizer searches x = [z_1..z_n, u_{n+1}..u_m] over a plain box X and never
// needs a constraint model. Every emitted decision lies in X exactly.

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "eccbo/acquisition.hpp"
#include "eccbo/box.hpp"
#include "eccbo/errors.hpp"
#include "eccbo/gp.hpp"

namespace eccbo {

using Eigen::Index;
using Eigen::VectorXd;

struct DecisionSpace {
  std::vector<std::string> setpoint_names;
  Box setpoint_box;
  std::vector<std::string> free_names;
  Box free_box;

  Index setpoint_count() const { return setpoint_box.dim(); }
  Index free_count() const { return free_box.dim(); }
  Index dim() const { return setpoint_count() + free_count(); }

  Box joint_box() const {
    VectorXd lo(dim()), hi(dim());
    lo << setpoint_box.lower, free_box.lower;
    hi << setpoint_box.upper, free_box.upper;
    return Box(lo, hi);
  }
};

/// x = [setpoints, free dofs]; only constructible inside its space's box.
class DecisionVector {
 public:
  static DecisionVector make(const DecisionSpace& space, VectorXd setpoints,
                             VectorXd free_dofs = VectorXd(0)) {
    if (setpoints.size() != space.setpoint_count() || free_dofs.size() != space.free_count())
      throw ContractViolation("decision vector: dimension does not match the decision space");
    if (!space.setpoint_box.contains(setpoints))
      throw BoxViolation("decision vector: setpoint outside its box");
    if (!space.free_box.contains(free_dofs))
      throw BoxViolation("decision vector: free degree of freedom outside its box");
    DecisionVector d;
    d.setpoints_ = std::move(setpoints);
    d.free_ = std::move(free_dofs);
    return d;
  }

  static DecisionVector from_joint(const DecisionSpace& space, const VectorXd& x) {
    if (x.size() != space.dim()) throw ContractViolation("decision vector: joint dimension mismatch");
    return make(space, x.head(space.setpoint_count()), x.tail(space.free_count()));
  }

  const VectorXd& setpoints() const { return setpoints_; }
  const VectorXd& free_dofs() const { return free_; }
  VectorXd joint() const {
    VectorXd x(setpoints_.size() + free_.size());
    x << setpoints_, free_;
    return x;
  }

  bool operator==(const DecisionVector& o) const {
    return setpoints_.size() == o.setpoints_.size() && setpoints_ == o.setpoints_ &&
           free_.size() == o.free_.size() && free_ == o.free_;
  }

 private:
  DecisionVector() = default;
  VectorXd setpoints_;
  VectorXd free_;
};

struct EccboConfig {
  DecisionSpace space;
  Box context_box;
  acquisition::AcquisitionConfig acquisition;
  int init_count = 3;
  double default_lengthscale = 0.5;
  gp::HyperBounds hyper_bounds;
  int fit_restarts = 5;
  std::uint64_t fit_seed = 0;
  int refit_every_until = 50;  // refit after every observation up to this count
  int refit_interval = 5;      // then every this many observations
  double prior_mean_shift = 0.0;  // normalized target units; 0 disables

  Index input_dim() const { return space.dim() + context_box.dim(); }

  Box input_box() const {
    const Box x = space.joint_box();
    VectorXd lo(input_dim()), hi(input_dim());
    lo << x.lower, context_box.lower;
    hi << x.upper, context_box.upper;
    return Box(lo, hi);
  }

  gp::KernelParams default_params() const {
    return gp::KernelParams::isotropic(input_dim(), default_lengthscale, 1.0, 0.1, 1e-4);
  }
};

struct Observation {
  DecisionVector x;
  VectorXd context;
  double cost = 0.0;  // minimization units (negated profit)
  double timestamp = 0.0;
};

class EccboHistory {
 public:
  static EccboHistory empty(const EccboConfig& cfg) {
    EccboHistory h;
    h.params_ = cfg.default_params();
    h.posterior_ = gp::condition(gp::Dataset::empty(cfg.input_box()), h.params_, cfg.prior_mean_shift);
    return h;
  }

  const std::vector<Observation>& observations() const { return obs_; }
  std::size_t size() const { return obs_.size(); }
  const gp::GpPosterior& posterior() const { return *posterior_; }
  const gp::KernelParams& params() const { return params_; }

 private:
  friend EccboHistory record_observation(EccboHistory, const DecisionVector&, const VectorXd&,
                                         double, double, const EccboConfig&);
  EccboHistory() = default;
  std::vector<Observation> obs_;
  gp::KernelParams params_;
  std::optional<gp::GpPosterior> posterior_;
};

/// Deterministic initial design: box center, then unrotated Halton points.
inline VectorXd initial_design_point(const Box& box, std::size_t index) {
  if (index == 0) return box.center();
  return box.from_unit(acquisition::halton(index, box.dim()));
}

inline DecisionVector eccbo_step(const EccboHistory& history, const VectorXd& d_next,
                                 const EccboConfig& cfg) {
  if (!d_next.allFinite()) throw ContractViolation("eccbo_step: non-finite context");
  if (d_next.size() != cfg.context_box.dim())
    throw ContractViolation("eccbo_step: context dimension mismatch");
  const Box box = cfg.space.joint_box();
  if (history.size() < std::size_t(std::max(0, cfg.init_count)))
    return DecisionVector::from_joint(cfg.space, initial_design_point(box, history.size()));
  const VectorXd x = acquisition::optimize_acquisition(history.posterior(), d_next, box, cfg.acquisition);
  return DecisionVector::from_joint(cfg.space, x);
}

/// Appends a steady-state observation and reconditions the GP, refitting
/// hyperparameters on the configured schedule.
inline EccboHistory record_observation(EccboHistory history, const DecisionVector& x,
                                       const VectorXd& d, double y_steady, double timestamp,
                                       const EccboConfig& cfg) {
  const VectorXd xj = x.joint();
  if (!cfg.space.joint_box().contains(xj))
    throw BoxViolation("record_observation: decision outside the search box");
  if (d.size() != cfg.context_box.dim() || !d.allFinite() || !std::isfinite(y_steady))
    throw ContractViolation("record_observation: bad context or cost");
  if (!history.obs_.empty() && !(timestamp > history.obs_.back().timestamp))
    throw ContractViolation("record_observation: timestamps must strictly increase");

  history.obs_.push_back({x, d, y_steady, timestamp});
  const Index n = Index(history.obs_.size());
  Eigen::MatrixXd in(n, cfg.input_dim());
  VectorXd y(n);
  for (Index i = 0; i < n; ++i) {
    in.row(i) = acquisition::join(history.obs_[i].x.joint(), history.obs_[i].context).transpose();
    y[i] = history.obs_[i].cost;
  }
  gp::Dataset data(std::move(in), std::move(y), cfg.input_box());

  const bool refit = n >= 2 && (n <= cfg.refit_every_until || n % cfg.refit_interval == 0);
  if (n < 2) {
    history.params_ = cfg.default_params();
  } else if (refit) {
    try {
      history.params_ = gp::fit_hyperparameters(data, cfg.hyper_bounds, cfg.fit_restarts,
                                                cfg.fit_seed + std::uint64_t(n), history.params_,
                                                cfg.prior_mean_shift);
    } catch (const NonPositiveDefinite&) {
      // keep previous params
    }
  }
  history.posterior_ = gp::condition(std::move(data), history.params_, cfg.prior_mean_shift);
  return history;
}

// ---------------------------------------------------------------------------
// Metrics

struct RtoMetrics {
  double violation_tolerance = 0.0;  // |g| below this counts as satisfied
  std::vector<std::vector<double>> violations;
  double cumulative_violation = 0.0;
  double cumulative_violation_raw = 0.0;  // max(0, -g) without tolerance
  std::vector<double> regrets;
  double cumulative_regret = 0.0;
};

inline RtoMetrics violation_update(RtoMetrics m, std::span<const double> g) {
  std::vector<double> v;
  v.reserve(g.size());
  for (double gi : g) {
    const double raw = std::max(0.0, -gi);
    const double counted = raw > m.violation_tolerance ? raw : 0.0;
    v.push_back(counted);
    m.cumulative_violation += counted;
    m.cumulative_violation_raw += raw;
  }
  m.violations.push_back(std::move(v));
  return m;
}

inline RtoMetrics regret_update(RtoMetrics m, double y_steady, double f_star) {
  const double r = y_steady - f_star;
  m.regrets.push_back(r);
  m.cumulative_regret += r;
  return m;
}

}  // namespace eccbo
