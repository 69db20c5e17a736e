#pragma once

// Decentralized PI constraint controllers, SIMC tuning and min/max selectors.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "eccbo/errors.hpp"

namespace eccbo::regulatory {

struct PiTuning {
  double kc = 0.0;
  double tau_i = 0.0;
};

/// SIMC rules for a first-order-plus-delay model k e^{-theta s} / (tau1 s + 1).
inline PiTuning simc_tune(double k, double tau1, double theta, double tau_c) {
  if (k == 0.0 || !std::isfinite(k)) throw UncontrollablePairing("simc_tune: plant gain is zero");
  if (!(tau1 > 0.0) || !(theta >= 0.0) || !(tau_c > 0.0))
    throw ContractViolation("simc_tune: need tau1 > 0, theta >= 0, tau_c > 0");
  return {tau1 / (k * (tau_c + theta)), std::min(tau1, 4.0 * (tau_c + theta))};
}

/// One PI loop. Output u = sat(u_bias + kc*e + (kc/tau_i)*integral) with
/// e = direction * (setpoint - measurement). Standalone loops use conditional
/// integration; loops under a selector are back-calculated with `track`.
class PiLoop {
 public:
  std::string controlled_var;
  std::string manipulated_var;

  PiLoop(std::string cv, std::string mv, double kc, double tau_i, double u_min, double u_max,
         int direction, double u_bias, double setpoint)
      : controlled_var(std::move(cv)),
        manipulated_var(std::move(mv)),
        kc_(kc),
        tau_i_(tau_i),
        u_min_(u_min),
        u_max_(u_max),
        direction_(direction >= 0 ? 1 : -1),
        u_bias_(u_bias),
        setpoint_(setpoint),
        last_output_(std::clamp(u_bias, u_min, u_max)) {
    if (!(tau_i > 0.0)) throw ContractViolation("pi loop: tau_i must be positive");
    if (!(u_min < u_max)) throw ContractViolation("pi loop: need u_min < u_max");
    if (!std::isfinite(kc)) throw ContractViolation("pi loop: kc must be finite");
  }

  /// Loop with magnitude and sign taken from a SIMC result.
  static PiLoop from_tuning(std::string cv, std::string mv, const PiTuning& t, double u_min,
                            double u_max, double u_bias, double setpoint) {
    return PiLoop(std::move(cv), std::move(mv), std::abs(t.kc), t.tau_i, u_min, u_max,
                  t.kc >= 0.0 ? 1 : -1, u_bias, setpoint);
  }

  double step(double measurement, double dt) {
    if (!(dt > 0.0)) throw ContractViolation("pi_step: dt must be positive");
    if (!std::isfinite(measurement)) {
      faulted_ = true;
      return last_output_;
    }
    const double e = direction_ * (setpoint_ - measurement);
    last_error_ = e;
    const double candidate_integral = integral_ + e * dt;
    const double unsat = raw_output(e, candidate_integral);
    const bool pushing_up = kc_ * e > 0.0;
    const bool pushing_down = kc_ * e < 0.0;
    const bool blocked = (unsat > u_max_ && pushing_up) || (unsat < u_min_ && pushing_down);
    if (!blocked) integral_ = candidate_integral;
    last_output_ = std::clamp(raw_output(e, integral_), u_min_, u_max_);
    return last_output_;
  }

  /// Back-calculates the integral so the unsaturated output equals `u_applied`
  /// for the most recent error.
  void track(double u_applied) {
    const double ki = kc_ / tau_i_;
    if (ki == 0.0) return;
    integral_ = (u_applied - u_bias_ - kc_ * last_error_) / ki;
    last_output_ = std::clamp(u_applied, u_min_, u_max_);
  }

  double setpoint() const { return setpoint_; }
  void set_setpoint(double sp) { setpoint_ = sp; }
  double output() const { return last_output_; }
  double integral_state() const { return integral_; }
  void set_integral_state(double v) { integral_ = v; }
  double kc() const { return kc_; }
  double tau_i() const { return tau_i_; }
  double u_min() const { return u_min_; }
  double u_max() const { return u_max_; }
  double u_bias() const { return u_bias_; }
  int direction() const { return direction_; }
  bool faulted() const { return faulted_; }
  void clear_fault() { faulted_ = false; }

 private:
  double raw_output(double e, double integral) const {
    return u_bias_ + kc_ * e + (kc_ / tau_i_) * integral;
  }

  double kc_;
  double tau_i_;
  double u_min_;
  double u_max_;
  int direction_;
  double u_bias_;
  double setpoint_;
  double integral_ = 0.0;
  double last_error_ = 0.0;
  double last_output_;
  bool faulted_ = false;
};

inline double pi_step(PiLoop& loop, double measurement, double dt) {
  return loop.step(measurement, dt);
}

enum class SelectorMode { min, max };

struct SelectorBlock {
  SelectorMode mode = SelectorMode::min;
  std::vector<double> inputs;
};

inline double selector_step(const SelectorBlock& block) {
  if (block.inputs.empty()) throw ContractViolation("selector: empty input list");
  double out = block.inputs.front();
  for (double v : block.inputs)
    out = block.mode == SelectorMode::min ? std::min(out, v) : std::max(out, v);
  return out;
}

/// Steps every loop sharing one MV, selects min/max of their outputs and
/// makes the non-selected loops track the applied value.
inline double override_step(SelectorMode mode, std::span<PiLoop> loops,
                            std::span<const double> measurements, double dt) {
  if (loops.size() != measurements.size())
    throw ContractViolation("override_step: loop and measurement counts differ");
  SelectorBlock block{mode, {}};
  block.inputs.reserve(loops.size());
  for (std::size_t i = 0; i < loops.size(); ++i) block.inputs.push_back(loops[i].step(measurements[i], dt));
  const double u = selector_step(block);
  for (std::size_t i = 0; i < loops.size(); ++i)
    if (block.inputs[i] != u) loops[i].track(u);
  return u;
}

/// First-order-plus-delay test plant k e^{-theta s} / (tau1 s + 1), explicit
/// exact discretization with a sample-delay buffer.
class FoptdPlant {
 public:
  FoptdPlant(double k, double tau1, double theta, double dt, double y0 = 0.0, double u0 = 0.0)
      : k_(k), a_(std::exp(-dt / tau1)), y_(y0),
        buffer_(static_cast<std::size_t>(std::lround(theta / dt)), u0) {}

  double output() const { return y_; }

  double step(double u) {
    buffer_.push_back(u);
    const double delayed = buffer_.front();
    buffer_.erase(buffer_.begin());
    y_ = a_ * y_ + (1.0 - a_) * k_ * delayed;
    return y_;
  }

 private:
  double k_;
  double a_;
  double y_;
  std::vector<double> buffer_;
};

}  // namespace eccbo::regulatory
