#pragma once

// R-statistic steady-state detection: ratio of the filtered variance about a
// filtered mean to the filtered variance of successive differences.

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "eccbo/errors.hpp"

namespace eccbo::ssd {

struct SsdConfig {
  double lambda1 = 0.2;
  double lambda2 = 0.1;
  double lambda3 = 0.1;
  double r_crit = 2.0;
  double epsilon = 1e-12;
  int warmup = 50;

  void validate() const {
    for (double l : {lambda1, lambda2, lambda3})
      if (!(l > 0.0 && l <= 1.0)) throw ContractViolation("ssd: filter factors must lie in (0, 1]");
    if (!(r_crit > 0.0)) throw ContractViolation("ssd: r_crit must be positive");
    if (!(epsilon > 0.0)) throw ContractViolation("ssd: epsilon must be positive");
    if (warmup < 0) throw ContractViolation("ssd: warmup must be non-negative");
  }

  bool operator==(const SsdConfig&) const = default;
};

struct SsdState {
  SsdConfig config;
  double filtered_mean = 0.0;
  double var_est1 = 0.0;
  double var_est2 = 0.0;
  double prev_sample = 0.0;
  int warmup_remaining = 0;
  bool initialized = false;

  static SsdState start(const SsdConfig& cfg) {
    cfg.validate();
    SsdState s;
    s.config = cfg;
    s.warmup_remaining = cfg.warmup;
    return s;
  }
};

struct SsdUpdate {
  SsdState state;
  double r_statistic = 0.0;
  bool is_steady = false;
};

inline SsdUpdate ssd_update(SsdState s, double sample) {
  if (!std::isfinite(sample)) throw ContractViolation("ssd_update: non-finite sample");
  const SsdConfig& c = s.config;
  if (!s.initialized) {
    s.filtered_mean = sample;
    s.prev_sample = sample;
    s.var_est1 = 0.0;
    s.var_est2 = 0.0;
    s.initialized = true;
  } else {
    const double dev = sample - s.filtered_mean;
    const double diff = sample - s.prev_sample;
    s.var_est1 = c.lambda2 * dev * dev + (1.0 - c.lambda2) * s.var_est1;
    s.filtered_mean = c.lambda1 * sample + (1.0 - c.lambda1) * s.filtered_mean;
    s.var_est2 = c.lambda3 * diff * diff + (1.0 - c.lambda3) * s.var_est2;
    s.prev_sample = sample;
  }
  if (s.warmup_remaining > 0) --s.warmup_remaining;
  const double r = (2.0 - c.lambda1) * s.var_est1 / std::max(s.var_est2, c.epsilon);
  const bool steady = s.warmup_remaining == 0 && r < c.r_crit;
  return {s, r, steady};
}

/// Steps every detector; true only if all of them report steady.
inline bool ssd_multi(std::vector<SsdState>& signals, std::span<const double> samples) {
  if (signals.size() != samples.size())
    throw ContractViolation("ssd_multi: signal and sample counts differ");
  bool all = true;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const SsdUpdate u = ssd_update(signals[i], samples[i]);
    signals[i] = u.state;
    all = all && u.is_steady;
  }
  return all;
}

/// AND over several detectors plus a consecutive-steady hold count.
class SteadyStateGate {
 public:
  SteadyStateGate() = default;
  SteadyStateGate(std::vector<SsdConfig> configs, int hold_samples)
      : configs_(std::move(configs)), hold_(hold_samples) {
    if (hold_samples < 0) throw ContractViolation("ssd gate: hold must be non-negative");
    reset();
  }

  bool update(std::span<const double> samples) {
    if (samples.size() != states_.size())
      throw ContractViolation("ssd_multi: expected " + std::to_string(states_.size()) +
                              " samples, got " + std::to_string(samples.size()));
    bool all = true;
    for (std::size_t i = 0; i < samples.size(); ++i) {
      const SsdUpdate u = ssd_update(states_[i], samples[i]);
      states_[i] = u.state;
      last_r_[i] = u.r_statistic;
      all = all && u.is_steady;
    }
    consecutive_ = all ? consecutive_ + 1 : 0;
    return all && consecutive_ >= std::max(1, hold_);
  }

  void reset() {
    states_.clear();
    for (const auto& c : configs_) states_.push_back(SsdState::start(c));
    last_r_.assign(states_.size(), 0.0);
    consecutive_ = 0;
  }

  const std::vector<SsdState>& states() const { return states_; }
  const std::vector<double>& last_r() const { return last_r_; }
  int consecutive() const { return consecutive_; }

 private:
  std::vector<SsdConfig> configs_;
  std::vector<SsdState> states_;
  std::vector<double> last_r_;
  int hold_ = 0;
  int consecutive_ = 0;
};

}  // namespace eccbo::ssd
