// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "bdris/result_io.hpp"
#include "support.hpp"

using namespace bdris;
namespace fs = std::filesystem;

namespace {

constexpr const char* kTiny = R"([system]
n_tx = 3
n_cells = 4
n_rx = 3
code_len = 4
power_w = 10
noise_comm_dbm = -100
noise_radar_dbm = -100
qos_db = 3
arch = CW-FC

[users]
T 16 *
R 16 *

[targets]
T 10 30 10
R 10 -10 10

[clutters]
T 1 14 30 25
R 1 15 -20 25
)";

class ResultIo : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("bdris_rio_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) +
                                        "_" + ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
    std::ofstream(dir_ / "tiny.cfg") << kTiny;
    run_.scenario = dir_ / "tiny.cfg";
    run_.seed = 4;
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }

  fs::path dir_;
  RunSpec run_;
};

}  // namespace

TEST(CsvField, QuotesOnlyWhenNeeded) {
  EXPECT_EQ(csv_field("plain"), "plain");
  EXPECT_EQ(csv_field("a,b"), "\"a,b\"");
  EXPECT_EQ(csv_field("say \"hi\""), "\"say \"\"hi\"\"\"");
  EXPECT_EQ(csv_field("two\nlines"), "\"two\nlines\"");
}

TEST(Digest, Fnv1a) {
  EXPECT_EQ(text_digest(""), "cbf29ce484222325");
  EXPECT_EQ(text_digest("a"), "af63dc4c8601ec8c");
  EXPECT_NE(text_digest("ab"), text_digest("ba"));
}

TEST(FormatNumber, FixedMantissa) {
  EXPECT_EQ(format_number(1.0), "1.0000000000e+00");
  EXPECT_EQ(format_number(-0.000123), "-1.2300000000e-04");
}

TEST_F(ResultIo, OverridesReachScenario) {
  run_.arch = Architecture::GroupConnected;
  run_.groups = 2;
  run_.qos_db = 7.0;
  run_.power_w = 3.0;
  const auto s = build_scenario(run_);
  EXPECT_EQ(s.arch, Architecture::GroupConnected);
  EXPECT_EQ(s.groups, 2);
  EXPECT_DOUBLE_EQ(s.qos_db, 7.0);
  EXPECT_DOUBLE_EQ(s.power_budget, 3.0);
  EXPECT_EQ(s.rng_seed, 4u);

  RunSpec only_groups = run_;
  only_groups.arch.reset();
  only_groups.groups = 4;
  EXPECT_EQ(build_scenario(only_groups).arch, Architecture::SingleConnected);

  RunSpec missing = run_;
  missing.scenario = dir_ / "nope.cfg";
  EXPECT_THROW(build_scenario(missing), ConfigError);
}

TEST_F(ResultIo, RoundTripsExactly) {
  const auto inst = build_instance(run_);
  SolverConfig cfg = solver_config(run_);
  cfg.max_iters = 6;
  const auto res = solve(inst, cfg);
  write_result(dir_ / "out", run_, cfg, res);

  const auto back = read_result(dir_ / "out");
  EXPECT_EQ(back.status, to_string(res.status));
  EXPECT_EQ(back.iterations, res.iterations);
  EXPECT_EQ(back.scnr, res.scnr);
  EXPECT_EQ(back.waveform.w, res.waveform.w);
  EXPECT_EQ(back.waveform.symbols, res.waveform.symbols);
  EXPECT_EQ(back.phi_t, res.state.phi_t);
  EXPECT_EQ(back.phi_r, res.state.phi_r);
  ASSERT_EQ(back.filters.u.size(), res.filters.u.size());
  for (std::size_t k = 0; k < res.filters.u.size(); ++k) EXPECT_EQ(back.filters.u[k], res.filters.u[k]);
  EXPECT_EQ(back.config.max_iters, 6);
  EXPECT_EQ(back.run.seed, 4u);
  EXPECT_EQ(fs::path(back.run.scenario), fs::weakly_canonical(run_.scenario));

  const std::string csv = slurp(dir_ / "out" / "convergence.csv");
  std::istringstream lines(csv);
  std::string line;
  std::getline(lines, line);
  EXPECT_EQ(line, "iteration,min_scnr_db,feasibility,scnr_db_0,scnr_db_1");
  int rows = 0;
  while (std::getline(lines, line)) ++rows;
  EXPECT_EQ(rows, res.iterations);
  EXPECT_EQ(csv.find('\r'), std::string::npos);
}

TEST_F(ResultIo, ConvergenceCsvIsByteIdentical) {
  SolverConfig cfg = solver_config(run_);
  cfg.max_iters = 8;
  write_result(dir_ / "a", run_, cfg, solve(build_instance(run_), cfg));
  write_result(dir_ / "b", run_, cfg, solve(build_instance(run_), cfg));
  EXPECT_EQ(slurp(dir_ / "a" / "convergence.csv"), slurp(dir_ / "b" / "convergence.csv"));
  EXPECT_EQ(slurp(dir_ / "a" / "result.json"), slurp(dir_ / "b" / "result.json"));
}

TEST_F(ResultIo, StaleOrMissingFilesAreRejected) {
  EXPECT_THROW(read_result(dir_ / "empty"), ConfigError);

  SolverConfig cfg = solver_config(run_);
  cfg.max_iters = 2;
  write_result(dir_ / "out", run_, cfg, solve(build_instance(run_), cfg));
  std::ofstream(dir_ / "tiny.cfg", std::ios::app) << "\n# edited\n";
  EXPECT_THROW(read_result(dir_ / "out"), ConfigError);

  std::ofstream(dir_ / "out" / "result.json") << "{\"run\": 3";
  EXPECT_THROW(read_result(dir_ / "out"), ConfigError);
}

TEST_F(ResultIo, InfeasibleRecord) {
  SolverConfig cfg = solver_config(run_);
  write_result(dir_ / "out", run_, cfg, solve(build_instance(run_), [&] {
                 SolverConfig c = cfg;
                 c.max_iters = 2;
                 return c;
               }()));
  write_infeasible(dir_ / "out", run_, cfg, 2.5);
  EXPECT_FALSE(fs::exists(dir_ / "out" / "convergence.csv"));
  const auto back = read_result(dir_ / "out");
  EXPECT_EQ(back.status, "infeasible");
  EXPECT_DOUBLE_EQ(back.gamma_star, 2.5);
  EXPECT_EQ(back.waveform.w.size(), 0);
  EXPECT_EQ(back.run.seed, 4u);
}
