// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "bdris/result_io.hpp"

namespace bdris::cli {

enum ExitCode : int { kOk = 0, kError = 1, kMaxIterations = 2, kInfeasible = 3 };

struct SolveOptions {
  RunSpec run;
  std::filesystem::path out;
  SolverConfig config;
};

int cmd_solve(const SolveOptions& opts, std::ostream& log);

/// One architecture column of a sweep. Written in the spec either as a tag
/// ("CW-FC", "CW-GC:4") or as {"arch": ..., "groups": ..., "radar_only": ...}.
struct ArchChoice {
  std::optional<Architecture> arch;
  std::optional<int> groups;
  bool radar_only = false;

  std::string label() const;
};

enum class SweepKind { Gamma, Power, Groups, Cells, None };
std::string to_string(SweepKind kind);

struct ExperimentSpec {
  std::string name;
  std::filesystem::path scenario;  // relative paths resolve against the spec file
  SweepKind kind = SweepKind::None;
  std::vector<double> values;
  std::vector<ArchChoice> architectures;
  std::vector<std::uint64_t> seeds;
  std::filesystem::path out;  // relative paths resolve against the working directory
  std::optional<double> qos_db;
  std::optional<double> power_w;
  std::optional<int> n_cells;
  SolverConfig solver;
  std::string digest;  // of the spec text
};

ExperimentSpec load_experiment(const std::filesystem::path& path);

struct SweepPoint {
  ArchChoice arch;
  double value = 0.0;
  std::uint64_t seed = 0;
  std::string status;  // converged | max_iterations | infeasible | error
  std::string message;
  int iterations = 0;
  double min_scnr = 0.0;  // linear
  double gamma_star = 0.0;
  std::filesystem::path dir;
};

RunSpec point_run(const ExperimentSpec& spec, const ArchChoice& arch, double value, std::uint64_t seed);

/// Runs every (architecture, value, seed) point on `workers` threads and writes
/// the per-point results, <name>_points.csv and one <name>_<arch>.csv per
/// architecture. A failing point is recorded, never fatal.
std::vector<SweepPoint> run_sweep(const ExperimentSpec& spec, int workers, std::ostream& log);

int cmd_sweep(const std::filesystem::path& spec_path, int workers, std::ostream& log);

/// BDRIS_WORKERS, default 1.
int worker_count();

enum class MetricKind { Ber, TxBeampattern, SrBeampattern, Detection, Convergence };
MetricKind parse_metric(std::string_view tag);

struct MetricsOptions {
  std::filesystem::path in;  // one result directory or a tree of them
  MetricKind which = MetricKind::Convergence;
  std::optional<int> target;  // 1-based
  long long trials = 100000;
  std::uint64_t noise_seed = 1;
  double step_deg = 0.5;
  std::vector<double> p_fa = {1e-6, 1e-5, 1e-4, 1e-3, 1e-2, 1e-1};
};

/// Writes the metric CSV to `out`.
int cmd_metrics(const MetricsOptions& opts, std::ostream& out, std::ostream& log);

/// Result directories below `root` (or `root` itself), sorted.
std::vector<std::filesystem::path> result_dirs(const std::filesystem::path& root);

}  // namespace bdris::cli
