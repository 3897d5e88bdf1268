// SPDX-License-Identifier: Apache-2.0
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "commands.hpp"

using namespace bdris;

int main(int argc, char** argv) {
  CLI::App app{"Max-min SCNR design for BD-RIS aided dual-function radar-communication"};
  app.set_version_flag("--version", std::string(BDRIS_VERSION_STRING));
  app.require_subcommand(1);

  cli::SolveOptions solve;
  std::string arch_tag;
  auto* s = app.add_subcommand("solve", "Solve one scenario and write result.json + convergence.csv");
  s->add_option("--scenario", solve.run.scenario, "Scenario file")->required();
  s->add_option("--arch", arch_tag, "CW-SC, CW-GC, CW-FC or DOUBLE-RIS");
  s->add_option("--groups", solve.run.groups, "Number of groups G (implies CW-GC without --arch)");
  s->add_option("--cells", solve.run.n_cells, "Override the number of cells");
  s->add_option("--seed", solve.run.seed, "Channel and solver seed")->capture_default_str();
  s->add_option("--qos-db", solve.run.qos_db, "Override the QoS threshold in dB");
  s->add_option("--power", solve.run.power_w, "Override the power budget in W");
  s->add_flag("--radar-only", solve.run.radar_only, "Drop the communication constraints");
  s->add_option("--out", solve.out, "Output directory")->required();
  s->add_option("--max-iters", solve.config.max_iters)->capture_default_str();
  s->add_option("--rho", solve.config.rho, "Initial ADMM penalty")->capture_default_str();
  s->add_option("--sca-iters", solve.config.sca_inner_iters)->capture_default_str();

  std::string spec_path;
  std::optional<int> workers;
  auto* sw = app.add_subcommand("sweep", "Run a sweep described by a JSON spec");
  sw->add_option("--spec", spec_path, "Sweep spec file")->required();
  sw->add_option("--workers", workers, "Parallel solves (default: BDRIS_WORKERS or 1)");

  cli::MetricsOptions metrics;
  std::string which;
  std::string metrics_out;
  auto* m = app.add_subcommand("metrics", "Evaluate stored results");
  m->add_option("--in", metrics.in, "Result directory or a tree of them")->required();
  m->add_option("--which", which, "Metric")
      ->required()
      ->check(CLI::IsMember({"ber", "txbp", "srbp", "pd", "convergence"}));
  m->add_option("--target", metrics.target, "1-based target index (srbp)");
  m->add_option("--trials", metrics.trials, "Noise draws per user and slot (ber)")->capture_default_str();
  m->add_option("--noise-seed", metrics.noise_seed, "Seed of the BER noise")->capture_default_str();
  m->add_option("--step", metrics.step_deg, "Angle step in degrees (beampatterns)")->capture_default_str();
  m->add_option("--out", metrics_out, "CSV file (default: stdout)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*s) {
      if (!arch_tag.empty()) solve.run.arch = parse_architecture(arch_tag);
      return cli::cmd_solve(solve, std::cerr);
    }
    if (*sw) return cli::cmd_sweep(spec_path, workers ? *workers : cli::worker_count(), std::cerr);
    metrics.which = cli::parse_metric(which);
    if (metrics_out.empty()) return cli::cmd_metrics(metrics, std::cout, std::cerr);
    std::ofstream out(metrics_out, std::ios::binary);
    if (!out) throw ConfigError("cannot write '" + metrics_out + "'");
    return cli::cmd_metrics(metrics, out, std::cerr);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return cli::kError;
  }
}
