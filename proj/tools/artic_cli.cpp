#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "artic/errors.hpp"
#include "artic/harness.hpp"
#include "artic/metrics.hpp"
#include "artic/selftest.hpp"

namespace fs = std::filesystem;

namespace {

artic::SimLog load_log(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw artic::ConfigError("cannot open log file '" + path + "'");
  return artic::SimLog::read_csv(in);
}

int cmd_run(const std::optional<std::string>& config_path,
            const std::optional<std::string>& framework,
            const std::optional<std::uint64_t>& seed,
            const std::optional<int>& laps,
            const std::optional<double>& duration, const std::string& out_dir,
            double windup) {
  artic::RunConfig cfg;
  if (config_path) cfg = artic::RunConfig::from_file(*config_path);
  artic::apply_thread_env(cfg);
  if (framework) cfg.framework = artic::framework_from_string(*framework);
  if (seed) cfg.seed = *seed;
  if (laps) cfg.laps = *laps;
  if (duration) cfg.duration_s = *duration;
  cfg.validate();

  fs::create_directories(out_dir);
  const artic::SimLog log = artic::run_closed_loop(cfg);
  {
    std::ofstream os(fs::path(out_dir) / "log.csv");
    log.write_csv(os);
  }
  const artic::Metrics m = artic::compute_metrics(log, windup);
  {
    std::ofstream os(fs::path(out_dir) / "metrics.txt");
    os << m.format_table();
  }
  {
    std::ofstream os(fs::path(out_dir) / "trajectory.csv");
    const artic::TimedReference traj =
        artic::build_eight(cfg.trajectory, cfg.dt, cfg.model);
    artic::export_csv(traj, cfg.dt, std::max(cfg.laps, 1), os);
  }
  std::cout << m.format_table();
  std::cout << "wrote " << (fs::path(out_dir) / "log.csv").string() << ", "
            << (fs::path(out_dir) / "metrics.txt").string() << ", "
            << (fs::path(out_dir) / "trajectory.csv").string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "articmpc: NMHE-NMPC vs ISL-LMPC closed-loop benchmark for an "
      "articulated tractor-trailer"};
  app.require_subcommand(1);

  // run
  auto* run = app.add_subcommand("run", "simulate one closed-loop run");
  std::optional<std::string> framework, config_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> laps;
  std::optional<double> duration;
  std::string out_dir = "out";
  double windup = 5.0;
  run->add_option("--framework", framework,
                  "nmhe-nmpc or isl-lmpc (default nmhe-nmpc)");
  run->add_option("--config", config_path, "flat key=value config file");
  run->add_option("--seed", seed, "noise / schedule seed");
  run->add_option("--laps", laps, "number of laps (default 2)");
  run->add_option("--duration", duration, "run length in seconds (overrides laps)");
  run->add_option("--out", out_dir, "output directory")->required();
  run->add_option("--windup", windup, "seconds excluded from metrics (default 5)");

  // metrics
  auto* metrics = app.add_subcommand("metrics", "recompute metrics from a log");
  std::string log_path;
  double m_windup = 5.0;
  metrics->add_option("--log", log_path, "log.csv from a run")->required();
  metrics->add_option("--windup", m_windup, "seconds excluded (default 5)");

  // compare
  auto* compare =
      app.add_subcommand("compare", "side-by-side tables for two runs");
  std::string log_a, log_b;
  double c_windup = 5.0;
  compare->add_option("--log-a", log_a, "first log.csv")->required();
  compare->add_option("--log-b", log_b, "second log.csv")->required();
  compare->add_option("--windup", c_windup, "seconds excluded (default 5)");

  // selftest
  app.add_subcommand("selftest", "run the built-in oracle checks");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  }

  try {
    if (run->parsed()) {
      return cmd_run(config_path, framework, seed, laps, duration, out_dir,
                     windup);
    }
    if (metrics->parsed()) {
      const artic::Metrics m = artic::compute_metrics(load_log(log_path), m_windup);
      std::cout << m.format_table();
      return 0;
    }
    if (compare->parsed()) {
      const artic::Metrics a = artic::compute_metrics(load_log(log_a), c_windup);
      const artic::Metrics b = artic::compute_metrics(load_log(log_b), c_windup);
      std::cout << artic::format_comparison(a, b);
      return 0;
    }
    return artic::selftest(std::cout) == 0 ? 0 : 1;
  } catch (const artic::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
