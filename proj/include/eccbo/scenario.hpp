#pragma once

// Scenario schema for closed-loop runs. Every field has a documented default
// (see README); a default-constructed Scenario is the 35 h Williams-Otto
// experiment with F_A = 1 -> 1.9 -> 1 kg/s at 10 h and 25 h.

#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "eccbo/errors.hpp"
#include "eccbo/gp.hpp"
#include "eccbo/williams_otto.hpp"

namespace eccbo::harness {

struct PlantConfig {
  double holdup = wo::kDefaultHoldup;
  std::array<double, 6> initial_fractions = {0.6, 0.4, 0.0, 0.0, 0.0, 0.0};
  double initial_f_b = 2.6;
  double initial_t_r = 350.0;
  double cost_noise_std = 0.0;

  bool operator==(const PlantConfig&) const = default;
};

/// One constraint loop: hold `cv` at a setpoint in [setpoint_min, setpoint_max]
/// by moving `mv`. The constraint is cv <= limit, so g = limit - cv.
struct LoopConfig {
  std::string name;
  std::string cv;
  std::string mv;
  double limit = 0.0;
  double setpoint_min = 0.0;
  double setpoint_max = 0.0;
  double u_min = 0.0;
  double u_max = 0.0;
  bool auto_tune = true;
  double tau_c = 600.0;       // s, closed-loop time constant for SIMC
  double step_size = 0.0;     // MV step used by the identification test
  double kc = 0.0;            // used when auto_tune is false
  double tau_i = 1.0;
  int direction = 1;

  bool operator==(const LoopConfig&) const = default;
};

struct SsdSignal {
  std::string signal;  // "profit" or a species name (x_a ... x_p)
  double epsilon = 1e-12;

  bool operator==(const SsdSignal&) const = default;
};

struct SsdSection {
  double lambda1 = 0.2;
  double lambda2 = 0.1;
  double lambda3 = 0.1;
  double r_crit = 2.0;
  int warmup = 50;
  int hold = 60;
  std::vector<SsdSignal> signals = {{"profit", 1e-8}, {"x_g", 1e-12}, {"x_a", 1e-12}};

  bool operator==(const SsdSection&) const = default;
};

struct BoSection {
  double context_min = 0.5;
  double context_max = 2.5;
  double beta = 4.0;
  int multistart_count = 32;
  int local_steps = 50;
  int init_count = 3;
  int fit_restarts = 5;
  std::uint64_t seed = 0;
  double ramp_seconds = 60.0;
  double prior_mean_shift = 0.0;
  double default_lengthscale = 0.5;
  int refit_every_until = 50;
  int refit_interval = 5;
  gp::HyperBounds hyper_bounds;

  bool operator==(const BoSection&) const = default;
};

struct ScheduleEntry {
  double time = 0.0;
  double f_a = 1.0;

  bool operator==(const ScheduleEntry&) const = default;
};

struct OutputSection {
  std::string csv = "trajectory.csv";
  std::string metrics = "trajectory.metrics.json";

  bool operator==(const OutputSection&) const = default;
};

struct Scenario {
  double total_duration = 35.0 * 3600.0;
  double violation_tolerance = 1e-3;
  int oracle_grid = 101;
  PlantConfig plant;
  std::vector<LoopConfig> loops = {
      {"z_g", "x_g", "t_r", 0.08, 0.07, 0.08, 330.0, 400.0, true, 600.0, 0.5, 0.0, 1.0, 1},
      {"z_a", "x_a", "f_b", 0.12, 0.07, 0.12, 0.5, 10.0, true, 600.0, 0.05, 0.0, 1.0, 1},
  };
  SsdSection ssd;
  BoSection bo;
  std::vector<ScheduleEntry> schedule = {{0.0, 1.0}, {10.0 * 3600.0, 1.9}, {25.0 * 3600.0, 1.0}};
  OutputSection output;

  bool operator==(const Scenario&) const = default;

  double f_a_at(double t) const {
    double v = schedule.front().f_a;
    for (const auto& e : schedule)
      if (e.time <= t) v = e.f_a;
    return v;
  }

  void validate() const;
};

inline void Scenario::validate() const {
  auto fail = [](const std::string& field, const std::string& msg) { throw ParseError(field, msg); };
  if (!(total_duration >= 0.0) || std::floor(total_duration) != total_duration)
    fail("total_duration", "must be a non-negative whole number of seconds");
  if (!(violation_tolerance >= 0.0)) fail("violation_tolerance", "must be non-negative");
  if (oracle_grid < 51) fail("oracle_grid", "must be at least 51");

  if (!(plant.holdup > 0.0)) fail("plant.holdup", "must be positive");
  double sum = 0.0;
  for (double v : plant.initial_fractions) {
    if (!(v >= 0.0 && v <= 1.0)) fail("plant.initial_fractions", "entries must lie in [0, 1]");
    sum += v;
  }
  if (std::abs(sum - 1.0) > 1e-8) fail("plant.initial_fractions", "must sum to 1");
  if (!(plant.initial_f_b > 0.0)) fail("plant.initial_f_b", "must be positive");
  if (!(plant.initial_t_r >= wo::kMinTemperature && plant.initial_t_r <= wo::kMaxTemperature))
    fail("plant.initial_t_r", "must lie in [320, 420] K");
  if (!(plant.cost_noise_std >= 0.0)) fail("plant.cost_noise_std", "must be non-negative");

  if (loops.empty()) fail("loops", "at least one constraint loop is required");
  std::set<std::string> mvs, names;
  for (std::size_t i = 0; i < loops.size(); ++i) {
    const auto& l = loops[i];
    const std::string p = "loops[" + std::to_string(i) + "]";
    if (l.name.empty() || !names.insert(l.name).second) fail(p + ".name", "must be unique and non-empty");
    if (!wo::species_index(l.cv)) fail(p + ".cv", "unknown controlled variable '" + l.cv + "'");
    if (l.mv != "f_b" && l.mv != "t_r") fail(p + ".mv", "manipulated variable must be f_b or t_r");
    if (!mvs.insert(l.mv).second) fail(p + ".mv", "each manipulated variable may be paired once");
    if (!(l.setpoint_min <= l.setpoint_max)) fail(p + ".setpoint_min", "setpoint box is empty");
    if (l.setpoint_max > l.limit) fail(p + ".setpoint_max", "setpoint box exceeds the constraint limit");
    if (!(l.u_min < l.u_max)) fail(p + ".u_min", "need u_min < u_max");
    if (l.mv == "t_r" && (l.u_min < wo::kMinTemperature || l.u_max > wo::kMaxTemperature))
      fail(p + ".u_max", "temperature bounds must lie in [320, 420] K");
    if (l.mv == "f_b" && !(l.u_min > 0.0)) fail(p + ".u_min", "feed rate bound must be positive");
    if (l.auto_tune) {
      if (!(l.tau_c > 0.0)) fail(p + ".tau_c", "must be positive");
      if (l.step_size == 0.0) fail(p + ".step_size", "must be non-zero");
    } else if (!(l.tau_i > 0.0)) {
      fail(p + ".tau_i", "must be positive");
    }
  }
  if (mvs.size() != 2) fail("loops", "both f_b and t_r must be paired with a constraint");

  for (double v : {ssd.lambda1, ssd.lambda2, ssd.lambda3})
    if (!(v > 0.0 && v <= 1.0)) fail("ssd.lambda", "filter factors must lie in (0, 1]");
  if (!(ssd.r_crit > 0.0)) fail("ssd.r_crit", "must be positive");
  if (ssd.warmup < 0) fail("ssd.warmup", "must be non-negative");
  if (ssd.hold < 0) fail("ssd.hold", "must be non-negative");
  if (ssd.signals.empty()) fail("ssd.signals", "at least one gated signal is required");
  for (std::size_t i = 0; i < ssd.signals.size(); ++i) {
    const auto& s = ssd.signals[i];
    const std::string p = "ssd.signals[" + std::to_string(i) + "]";
    if (s.signal != "profit" && !wo::species_index(s.signal)) fail(p + ".signal", "unknown signal '" + s.signal + "'");
    if (!(s.epsilon > 0.0)) fail(p + ".epsilon", "must be positive");
  }

  if (!(bo.context_min < bo.context_max)) fail("bo.context_min", "context box is empty");
  if (!(bo.beta >= 0.0)) fail("bo.beta", "must be non-negative");
  if (bo.multistart_count < 1) fail("bo.multistart_count", "must be at least 1");
  if (bo.local_steps < 0) fail("bo.local_steps", "must be non-negative");
  if (bo.init_count < 0) fail("bo.init_count", "must be non-negative");
  if (bo.fit_restarts < 1) fail("bo.fit_restarts", "must be at least 1");
  if (!(bo.ramp_seconds >= 0.0)) fail("bo.ramp_seconds", "must be non-negative");
  if (!(bo.default_lengthscale > 0.0)) fail("bo.default_lengthscale", "must be positive");
  if (bo.refit_every_until < 0) fail("bo.refit_every_until", "must be non-negative");
  if (bo.refit_interval < 1) fail("bo.refit_interval", "must be at least 1");
  const auto& hb = bo.hyper_bounds;
  auto check_pair = [&](double lo, double hi, const std::string& name) {
    if (!(lo > 0.0 && lo <= hi)) fail("bo.hyper_bounds." + name, "need 0 < min <= max");
  };
  check_pair(hb.rbf_variance_min, hb.rbf_variance_max, "rbf_variance");
  check_pair(hb.lengthscale_min, hb.lengthscale_max, "lengthscale");
  check_pair(hb.bias_variance_min, hb.bias_variance_max, "bias_variance");
  check_pair(hb.noise_variance_min, hb.noise_variance_max, "noise_variance");

  if (schedule.empty()) fail("schedule", "at least one entry is required");
  for (std::size_t i = 0; i < schedule.size(); ++i) {
    const std::string p = "schedule[" + std::to_string(i) + "]";
    const auto& e = schedule[i];
    if (i == 0 && e.time != 0.0) fail(p + ".time", "first entry must start at time 0");
    if (i > 0 && !(e.time > schedule[i - 1].time)) fail(p + ".time", "times must strictly increase");
    if (!(e.time >= 0.0 && e.time <= total_duration)) fail(p + ".time", "outside [0, total_duration]");
    if (!(e.f_a > 0.0)) fail(p + ".f_a", "must be positive");
  }
}

// ---------------------------------------------------------------------------
// JSON mapping

namespace detail {

using nlohmann::json;

class Reader {
 public:
  Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ParseError(path_.empty() ? "<root>" : path_, "expected an object");
  }

  template <typename T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) return;
    try {
      out = it->template get<T>();
    } catch (const nlohmann::json::exception&) {
      throw ParseError(field(key), "wrong type");
    }
  }

  template <typename T, typename F>
  void get_list(const char* key, std::vector<T>& out, F&& parse_item) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) return;
    if (!it->is_array()) throw ParseError(field(key), "expected an array");
    out.clear();
    for (std::size_t i = 0; i < it->size(); ++i) {
      T item{};
      parse_item((*it)[i], field(key) + "[" + std::to_string(i) + "]", item);
      out.push_back(std::move(item));
    }
  }

  template <typename F>
  void section(const char* key, F&& parse) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) return;
    parse(*it, field(key));
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.count(it.key())) throw ParseError(field(it.key().c_str()), "unknown field");
  }

 private:
  std::string field(const char* key) const { return path_.empty() ? key : path_ + "." + key; }
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

inline void parse_hyper(const json& j, const std::string& path, gp::HyperBounds& h) {
  Reader r(j, path);
  r.get("rbf_variance_min", h.rbf_variance_min);
  r.get("rbf_variance_max", h.rbf_variance_max);
  r.get("lengthscale_min", h.lengthscale_min);
  r.get("lengthscale_max", h.lengthscale_max);
  r.get("bias_variance_min", h.bias_variance_min);
  r.get("bias_variance_max", h.bias_variance_max);
  r.get("noise_variance_min", h.noise_variance_min);
  r.get("noise_variance_max", h.noise_variance_max);
  r.finish();
}

inline void parse_loop(const json& j, const std::string& path, LoopConfig& l) {
  Reader r(j, path);
  r.get("name", l.name);
  r.get("cv", l.cv);
  r.get("mv", l.mv);
  r.get("limit", l.limit);
  r.get("setpoint_min", l.setpoint_min);
  r.get("setpoint_max", l.setpoint_max);
  r.get("u_min", l.u_min);
  r.get("u_max", l.u_max);
  r.get("auto_tune", l.auto_tune);
  r.get("tau_c", l.tau_c);
  r.get("step_size", l.step_size);
  r.get("kc", l.kc);
  r.get("tau_i", l.tau_i);
  r.get("direction", l.direction);
  r.finish();
}

inline json hyper_json(const gp::HyperBounds& h) {
  return {{"rbf_variance_min", h.rbf_variance_min},     {"rbf_variance_max", h.rbf_variance_max},
          {"lengthscale_min", h.lengthscale_min},       {"lengthscale_max", h.lengthscale_max},
          {"bias_variance_min", h.bias_variance_min},   {"bias_variance_max", h.bias_variance_max},
          {"noise_variance_min", h.noise_variance_min}, {"noise_variance_max", h.noise_variance_max}};
}

}  // namespace detail

/// Parses a scenario; absent fields keep their defaults, unknown fields and
/// type errors raise ParseError naming the field. The result is validated.
inline Scenario parse_scenario(const nlohmann::json& j) {
  using detail::Reader;
  Scenario s;
  Reader root(j, "");
  root.get("total_duration", s.total_duration);
  root.get("violation_tolerance", s.violation_tolerance);
  root.get("oracle_grid", s.oracle_grid);
  root.section("plant", [&](const nlohmann::json& pj, const std::string& p) {
    Reader r(pj, p);
    r.get("holdup", s.plant.holdup);
    r.get("initial_fractions", s.plant.initial_fractions);
    r.get("initial_f_b", s.plant.initial_f_b);
    r.get("initial_t_r", s.plant.initial_t_r);
    r.get("cost_noise_std", s.plant.cost_noise_std);
    r.finish();
  });
  root.get_list("loops", s.loops, detail::parse_loop);
  root.section("ssd", [&](const nlohmann::json& sj, const std::string& p) {
    Reader r(sj, p);
    r.get("lambda1", s.ssd.lambda1);
    r.get("lambda2", s.ssd.lambda2);
    r.get("lambda3", s.ssd.lambda3);
    r.get("r_crit", s.ssd.r_crit);
    r.get("warmup", s.ssd.warmup);
    r.get("hold", s.ssd.hold);
    r.get_list("signals", s.ssd.signals,
               [](const nlohmann::json& ij, const std::string& ip, SsdSignal& sig) {
                 Reader ir(ij, ip);
                 ir.get("signal", sig.signal);
                 ir.get("epsilon", sig.epsilon);
                 ir.finish();
               });
    r.finish();
  });
  root.section("bo", [&](const nlohmann::json& bj, const std::string& p) {
    Reader r(bj, p);
    r.get("context_min", s.bo.context_min);
    r.get("context_max", s.bo.context_max);
    r.get("beta", s.bo.beta);
    r.get("multistart_count", s.bo.multistart_count);
    r.get("local_steps", s.bo.local_steps);
    r.get("init_count", s.bo.init_count);
    r.get("fit_restarts", s.bo.fit_restarts);
    r.get("seed", s.bo.seed);
    r.get("ramp_seconds", s.bo.ramp_seconds);
    r.get("prior_mean_shift", s.bo.prior_mean_shift);
    r.get("default_lengthscale", s.bo.default_lengthscale);
    r.get("refit_every_until", s.bo.refit_every_until);
    r.get("refit_interval", s.bo.refit_interval);
    r.section("hyper_bounds", [&](const nlohmann::json& hj, const std::string& hp) {
      detail::parse_hyper(hj, hp, s.bo.hyper_bounds);
    });
    r.finish();
  });
  root.get_list("schedule", s.schedule,
                [](const nlohmann::json& ej, const std::string& ep, ScheduleEntry& e) {
                  Reader r(ej, ep);
                  r.get("time", e.time);
                  r.get("f_a", e.f_a);
                  r.finish();
                });
  root.section("output", [&](const nlohmann::json& oj, const std::string& p) {
    Reader r(oj, p);
    r.get("csv", s.output.csv);
    r.get("metrics", s.output.metrics);
    r.finish();
  });
  root.finish();
  s.validate();
  return s;
}

inline Scenario parse_scenario_text(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError("<file>", std::string("malformed JSON: ") + e.what());
  }
  return parse_scenario(j);
}

inline Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("<file>", "cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_scenario_text(ss.str());
}

/// Every field written explicitly.
inline nlohmann::json to_json(const Scenario& s) {
  nlohmann::json loops = nlohmann::json::array();
  for (const auto& l : s.loops)
    loops.push_back({{"name", l.name},       {"cv", l.cv},
                     {"mv", l.mv},           {"limit", l.limit},
                     {"setpoint_min", l.setpoint_min}, {"setpoint_max", l.setpoint_max},
                     {"u_min", l.u_min},     {"u_max", l.u_max},
                     {"auto_tune", l.auto_tune}, {"tau_c", l.tau_c},
                     {"step_size", l.step_size}, {"kc", l.kc},
                     {"tau_i", l.tau_i},     {"direction", l.direction}});
  nlohmann::json signals = nlohmann::json::array();
  for (const auto& g : s.ssd.signals) signals.push_back({{"signal", g.signal}, {"epsilon", g.epsilon}});
  nlohmann::json schedule = nlohmann::json::array();
  for (const auto& e : s.schedule) schedule.push_back({{"time", e.time}, {"f_a", e.f_a}});
  return {
      {"total_duration", s.total_duration},
      {"violation_tolerance", s.violation_tolerance},
      {"oracle_grid", s.oracle_grid},
      {"plant",
       {{"holdup", s.plant.holdup},
        {"initial_fractions", s.plant.initial_fractions},
        {"initial_f_b", s.plant.initial_f_b},
        {"initial_t_r", s.plant.initial_t_r},
        {"cost_noise_std", s.plant.cost_noise_std}}},
      {"loops", loops},
      {"ssd",
       {{"lambda1", s.ssd.lambda1},
        {"lambda2", s.ssd.lambda2},
        {"lambda3", s.ssd.lambda3},
        {"r_crit", s.ssd.r_crit},
        {"warmup", s.ssd.warmup},
        {"hold", s.ssd.hold},
        {"signals", signals}}},
      {"bo",
       {{"context_min", s.bo.context_min},
        {"context_max", s.bo.context_max},
        {"beta", s.bo.beta},
        {"multistart_count", s.bo.multistart_count},
        {"local_steps", s.bo.local_steps},
        {"init_count", s.bo.init_count},
        {"fit_restarts", s.bo.fit_restarts},
        {"seed", s.bo.seed},
        {"ramp_seconds", s.bo.ramp_seconds},
        {"prior_mean_shift", s.bo.prior_mean_shift},
        {"default_lengthscale", s.bo.default_lengthscale},
        {"refit_every_until", s.bo.refit_every_until},
        {"refit_interval", s.bo.refit_interval},
        {"hyper_bounds", detail::hyper_json(s.bo.hyper_bounds)}}},
      {"schedule", schedule},
      {"output", {{"csv", s.output.csv}, {"metrics", s.output.metrics}}},
  };
}

}  // namespace eccbo::harness
