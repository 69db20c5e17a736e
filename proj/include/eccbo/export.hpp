#pragma once

// Trajectory CSV and run-summary JSON.

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include <json.hpp>

#include "eccbo/closed_loop.hpp"
#include "eccbo/errors.hpp"
#include "eccbo/williams_otto.hpp"

namespace eccbo::harness {

/// Shortest representation that parses back to the same double.
inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

inline std::string csv_field(std::string_view s) {
  if (s.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

inline std::vector<std::string> csv_header(const std::vector<std::string>& setpoint_names) {
  std::vector<std::string> h = {"time", "f_a", "f_b", "t_r"};
  for (const char* name : wo::kSpeciesNames) h.emplace_back(name);
  for (const auto& n : setpoint_names) h.push_back(n);
  h.insert(h.end(), {"ssd_steady", "bo_event", "profit"});
  return h;
}

inline void write_csv(std::ostream& os, const TrajectoryLog& log) {
  const auto header = csv_header(log.setpoint_names);
  for (std::size_t i = 0; i < header.size(); ++i) os << (i ? "," : "") << csv_field(header[i]);
  os << '\n';
  for (const LogRow& r : log.rows) {
    if (r.setpoints.size() != log.setpoint_names.size())
      throw ContractViolation("write_csv: row setpoint count does not match header");
    os << format_double(r.time) << ',' << format_double(r.f_a) << ',' << format_double(r.f_b) << ','
       << format_double(r.t_r);
    for (Eigen::Index k = 0; k < r.x.size(); ++k) os << ',' << format_double(r.x[k]);
    for (double z : r.setpoints) os << ',' << format_double(z);
    os << ',' << (r.steady ? 1 : 0) << ',' << (r.bo_event ? 1 : 0) << ',' << format_double(r.profit)
       << '\n';
  }
}

inline void export_csv(const TrajectoryLog& log, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path + " for writing");
  write_csv(f, log);
  if (!f) throw std::runtime_error("write failed: " + path);
}

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

/// RFC 4180 reader. Every record must have as many fields as the header.
inline CsvTable read_csv(std::istream& is) {
  CsvTable t;
  std::vector<std::string> record;
  std::string field;
  bool quoted = false, any = false;
  auto end_record = [&] {
    record.push_back(std::move(field));
    field.clear();
    if (t.header.empty()) {
      t.header = std::move(record);
    } else {
      if (record.size() != t.header.size())
        throw ParseError("csv", "record " + std::to_string(t.rows.size() + 1) + " has " +
                                    std::to_string(record.size()) + " fields, header has " +
                                    std::to_string(t.header.size()));
      t.rows.push_back(std::move(record));
    }
    record.clear();
    any = false;
  };
  char c;
  while (is.get(c)) {
    if (quoted) {
      if (c == '"') {
        if (is.peek() == '"') {
          is.get();
          field += '"';
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
      continue;
    }
    any = true;
    if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      record.push_back(std::move(field));
      field.clear();
    } else if (c == '\n') {
      end_record();
    } else if (c == '\r') {
      if (is.peek() == '\n') is.get();
      end_record();
    } else {
      field += c;
    }
  }
  if (quoted) throw ParseError("csv", "unterminated quoted field");
  if (any) end_record();
  return t;
}

inline double parse_double(const std::string& s) {
  if (s == "nan") return std::nan("");
  if (s == "inf") return HUGE_VAL;
  if (s == "-inf") return -HUGE_VAL;
  double v = 0.0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size())
    throw ParseError("csv", "not a number: '" + s + "'");
  return v;
}

/// Run summary: metrics, oracle optima, tuning, and every BO event.
inline nlohmann::json summary_json(const TrajectoryLog& log) {
  using nlohmann::json;
  json j;
  j["setpoint_names"] = log.setpoint_names;
  j["cumulative_violation"] = log.metrics.cumulative_violation;
  j["cumulative_violation_raw"] = log.metrics.cumulative_violation_raw;
  j["violation_tolerance"] = log.metrics.violation_tolerance;
  j["cumulative_regret"] = log.metrics.cumulative_regret;
  j["bo_events"] = log.events.size();
  j["error"] = log.error;

  json oracle = json::array();
  for (const auto& o : log.oracle)
    oracle.push_back({{"f_a", o.f_a},
                      {"z_g", o.optimum.z_g},
                      {"z_a", o.optimum.z_a},
                      {"profit", o.optimum.profit},
                      {"f_b", o.optimum.f_b},
                      {"t_r", o.optimum.t_r}});
  j["oracle"] = oracle;

  json tuning = json::array();
  for (const auto& t : log.tuning)
    tuning.push_back({{"loop", t.name},
                      {"gain", t.model.gain},
                      {"tau1", t.model.tau1},
                      {"theta", t.model.theta},
                      {"tau_c", t.tau_c},
                      {"kc", t.pi.kc},
                      {"tau_i", t.pi.tau_i}});
  j["tuning"] = tuning;

  json events = json::array();
  for (const auto& e : log.events) {
    json ej = {{"time", e.time},
               {"f_a", e.context},
               {"applied", e.applied},
               {"profit_measured", e.profit_measured},
               {"profit_true", e.profit_true},
               {"g", e.g},
               {"next", e.next}};
    if (std::isfinite(e.regret)) {
      ej["regret"] = e.regret;
      ej["f_star"] = e.f_star;
    }
    events.push_back(std::move(ej));
  }
  j["events"] = events;
  return j;
}

inline void export_summary(const TrajectoryLog& log, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path + " for writing");
  f << summary_json(log).dump(2) << '\n';
  if (!f) throw std::runtime_error("write failed: " + path);
}

}  // namespace eccbo::harness
