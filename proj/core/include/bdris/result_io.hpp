// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "bdris/admm.hpp"

namespace bdris {

/// Everything needed to rebuild a solve: the scenario file plus the overrides
/// given on the command line. The seed drives both channel generation and the
/// solver (symbols, initial BD-RIS matrices).
struct RunSpec {
  std::filesystem::path scenario;
  std::optional<Architecture> arch;
  std::optional<int> groups;
  std::optional<int> n_cells;
  std::optional<double> qos_db;
  std::optional<double> power_w;
  bool radar_only = false;
  std::uint64_t seed = 1;
};

Scenario build_scenario(const RunSpec& run);
Instance build_instance(const RunSpec& run);
SolverConfig solver_config(const RunSpec& run, SolverConfig base = {});

/// FNV-1a 64 of the file bytes, hex.
std::string file_digest(const std::filesystem::path& path);
std::string text_digest(std::string_view text);

/// %.10e
std::string format_number(double v);
/// RFC-4180 quoting when the field holds a comma, quote or line break.
std::string csv_field(std::string_view text);

double to_db(double linear);

/// iteration,min_scnr_db,feasibility,scnr_db_0,... one row per ADMM iteration.
void write_convergence_csv(std::ostream& out, const SolveResult& result);

struct StoredResult {
  RunSpec run;
  SolverConfig config;
  std::string scenario_digest;
  std::string status;
  int iterations = 0;
  double gamma_star = 0.0;
  std::vector<double> scnr;
  Waveform waveform;
  CMat phi_t;
  CMat phi_r;
  FilterBank filters;
};

/// Writes result.json and convergence.csv into `dir` (created if needed).
void write_result(const std::filesystem::path& dir, const RunSpec& run, const SolverConfig& config,
                  const SolveResult& result);

/// result.json for a run whose QoS thresholds cannot be met: status
/// "infeasible" and the largest feasible common threshold, no matrices.
void write_infeasible(const std::filesystem::path& dir, const RunSpec& run, const SolverConfig& config,
                      double gamma_star);

/// Reads result.json; an infeasible record comes back with empty matrices. Throws ConfigError when the file is missing or malformed
/// and when the scenario file no longer matches the recorded digest.
StoredResult read_result(const std::filesystem::path& dir);

}  // namespace bdris
