#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <string>

#include <CLI11.hpp>

#include "eccbo/closed_loop.hpp"
#include "eccbo/export.hpp"
#include "eccbo/scenario.hpp"
#include "eccbo/ssd.hpp"
#include "eccbo/williams_otto.hpp"

namespace fs = std::filesystem;
using namespace eccbo;

namespace {

struct Common {
  std::optional<std::uint64_t> seed;
  std::string out;
  bool quiet = false;
};

void add_common(CLI::App* cmd, Common& c, const char* out_help) {
  cmd->add_option("--seed", c.seed, "RNG seed");
  if (out_help) cmd->add_option("--out", c.out, out_help);
  cmd->add_flag("--quiet", c.quiet, "print nothing on success");
}

fs::path output_path(const std::string& out_dir, const std::string& name) {
  fs::path p(name);
  if (out_dir.empty() || p.is_absolute()) return p;
  fs::create_directories(out_dir);
  return fs::path(out_dir) / p;
}

int cmd_run(const std::string& file, const Common& c) {
  const harness::Scenario sc = harness::load_scenario(file);
  harness::RunOptions opts;
  opts.seed_override = c.seed;
  if (!c.quiet)
    opts.on_event = [](const harness::BoEvent& e) {
      std::printf("t=%8.0f s  F_A=%.3g  profit=%.4f  next=(", e.time, e.context, e.profit_measured);
      for (std::size_t i = 0; i < e.next.size(); ++i) std::printf("%s%.5f", i ? ", " : "", e.next[i]);
      std::printf(")\n");
    };
  const harness::TrajectoryLog log = harness::run_closed_loop(sc, opts);
  const fs::path csv = output_path(c.out, sc.output.csv);
  const fs::path metrics = output_path(c.out, sc.output.metrics);
  harness::export_csv(log, csv.string());
  harness::export_summary(log, metrics.string());
  if (!log.error.empty()) {
    std::cerr << "error: run aborted: " << log.error << " (partial log in " << csv.string() << ")\n";
    return 1;
  }
  if (!c.quiet) {
    std::printf("events=%zu  V_T=%.6g  V_T(raw)=%.6g  R_T=%.6g\n", log.events.size(),
                log.metrics.cumulative_violation, log.metrics.cumulative_violation_raw,
                log.metrics.cumulative_regret);
    std::printf("wrote %s and %s\n", csv.string().c_str(), metrics.string().c_str());
  }
  return 0;
}

int cmd_oracle(double f_a, int grid, const Common& c) {
  const wo::OptimumResult r = wo::wo_true_optimum(f_a, grid);
  if (!c.out.empty()) {
    const nlohmann::json j = {{"f_a", f_a},   {"grid", grid},       {"z_g", r.z_g}, {"z_a", r.z_a},
                              {"profit", r.profit}, {"cost", r.cost}, {"f_b", r.f_b}, {"t_r", r.t_r}};
    std::ofstream f(c.out);
    if (!(f << j.dump(2) << '\n')) throw std::runtime_error("cannot write " + c.out);
  }
  if (!c.quiet)
    std::printf("F_A=%.6g  z_g*=%.6f  z_a*=%.6f  profit*=%.6f  F*=%.6f  F_B=%.6f  T_r=%.4f\n", f_a, r.z_g,
                r.z_a, r.profit, r.cost, r.f_b, r.t_r);
  return 0;
}

int cmd_tune(const std::string& file, const Common& c) {
  const harness::Scenario sc = file.empty() ? harness::Scenario{} : harness::load_scenario(file);
  sc.validate();
  const auto tuning = harness::tune_loops(sc);
  if (!c.quiet)
    for (const auto& t : tuning)
      std::printf("%s  k=%.6g  tau1=%.1f s  theta=%.1f s  tau_c=%.1f s  ->  kc=%.6g  tau_i=%.1f s\n",
                  t.name.c_str(), t.model.gain, t.model.tau1, t.model.theta, t.tau_c, t.pi.kc, t.pi.tau_i);
  return 0;
}

int cmd_ssd_demo(const Common& c) {
  const ssd::SsdConfig cfg;
  std::mt19937_64 rng(c.seed.value_or(0));
  std::normal_distribution<double> noise(0.0, 1.0);
  constexpr int n = 2000;

  auto fraction = [&](auto signal) {
    ssd::SsdState s = ssd::SsdState::start(cfg);
    int steady = 0, counted = 0;
    for (int k = 0; k < n; ++k) {
      const auto u = ssd::ssd_update(s, signal(k));
      s = u.state;
      if (k >= cfg.warmup) {
        ++counted;
        steady += u.is_steady;
      }
    }
    return double(steady) / counted;
  };
  const double flat = fraction([&](int) { return 5.0 + noise(rng); });
  const double ramp = fraction([&](int k) { return 1.0 * k + noise(rng); });
  const double step = fraction([&](int k) { return (k < n / 2 ? 0.0 : 20.0) + noise(rng); });
  if (!c.quiet) {
    std::printf("signal            steady fraction after warmup\n");
    std::printf("constant + noise  %.4f\n", flat);
    std::printf("ramp + noise      %.4f\n", ramp);
    std::printf("step + noise      %.4f\n", step);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Embedded constraint-control contextual Bayesian optimization"};
  app.require_subcommand(1);

  Common common;
  std::string scenario_file;
  auto* run = app.add_subcommand("run", "run a closed-loop scenario");
  run->add_option("scenario", scenario_file, "scenario JSON file")->required();
  add_common(run, common, "output directory for the CSV and metrics files");

  double f_a = 1.0;
  int grid = 101;
  auto* oracle = app.add_subcommand("oracle", "steady-state optimum for a feed rate");
  oracle->add_option("--fa", f_a, "feed rate F_A, kg/s")->required();
  oracle->add_option("--grid", grid, "grid points per setpoint axis");
  add_common(oracle, common, "write the result as JSON to this file");

  std::string tune_file;
  auto* tune = app.add_subcommand("tune", "step-test the plant and print SIMC gains");
  tune->add_option("scenario", tune_file, "scenario JSON file (defaults if omitted)");
  add_common(tune, common, nullptr);

  auto* demo = app.add_subcommand("ssd-demo", "run the steady-state detector on synthetic signals");
  add_common(demo, common, nullptr);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }

  try {
    if (*run) return cmd_run(scenario_file, common);
    if (*oracle) return cmd_oracle(f_a, grid, common);
    if (*tune) return cmd_tune(tune_file, common);
    if (*demo) return cmd_ssd_demo(common);
  } catch (const ParseError& e) {
    std::cerr << "error: " << (*run ? scenario_file : tune_file) << ": " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
