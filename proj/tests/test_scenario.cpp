// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>

#include "bdris/scenario.hpp"
#include "support.hpp"

using namespace bdris;

namespace {

const char* kTwoTargets = R"(
[system]
n_tx = 2
n_cells = 4
n_rx = 2
code_len = 16
groups = 2
[targets]
T 10 30 10
T 19 -20 10
[clutters]
T 1 5 -20 25
T 10 14 [25:35] 25
)";

}  // namespace

TEST(Pathloss, ReferenceDistanceGivesReferenceGain) {
  EXPECT_DOUBLE_EQ(pathloss(1.0, 2.2), 1e-3);
  EXPECT_DOUBLE_EQ(pathloss(1.0, 0.0, 0.25), 0.25);
}

TEST(Pathloss, TwentyMetresAtExponent2p2) {
  // 1e-3 * 20^-2.2 evaluates to 1.37320e-6; the commonly quoted 1.3717e-6 is within 0.2%.
  EXPECT_NEAR(pathloss(20.0, 2.2), 1e-3 * std::exp(-2.2 * std::log(20.0)), 1e-18);
  EXPECT_NEAR(pathloss(20.0, 2.2), 1.3717e-6, 1.3717e-6 * 2e-3);
}

TEST(Pathloss, RejectsNonPositiveDistance) {
  EXPECT_THROW(pathloss(0.0, 2.0), std::invalid_argument);
  EXPECT_THROW(pathloss(-1.0, 2.0), std::invalid_argument);
}

TEST(Pathloss, DecreasingAndHomogeneous) {
  for (double d = 0.5; d < 50.0; d *= 1.7) {
    EXPECT_GT(pathloss(d, 2.2), pathloss(d * 1.01, 2.2));
    for (double alpha : {0.3, 2.0, 7.5})
      EXPECT_NEAR(pathloss(alpha * d, 2.2) / (std::pow(alpha, -2.2) * pathloss(d, 2.2)), 1.0, 1e-12);
  }
}

TEST(Scenario, RingsAndObservationLength) {
  const auto s = load_scenario(kTwoTargets);
  EXPECT_EQ(s.targets[0].ring, 0);
  EXPECT_EQ(s.targets[1].ring, 9);
  EXPECT_EQ(s.obs_len_t, 25);
  EXPECT_EQ(s.clutters[0].ring, -5);
  EXPECT_EQ(s.obs_len_r, s.code_len);
}

TEST(Scenario, SingleTargetHasZeroRing) {
  const auto s = load_scenario("[system]\ncode_len = 8\n[targets]\nR 13.7 0 0\n");
  EXPECT_EQ(s.targets[0].ring, 0);
  EXPECT_EQ(s.obs_len_r, 8);
}

TEST(Scenario, IntervalExpansion) {
  const auto s = load_scenario(kTwoTargets);
  ASSERT_EQ(s.clutters.size(), 11u);
  EXPECT_DOUBLE_EQ(s.clutters[1].azimuth_deg, 25.0);
  EXPECT_DOUBLE_EQ(s.clutters[10].azimuth_deg, 35.0);
  EXPECT_NEAR(s.clutters[2].azimuth_deg, 25.0 + 10.0 / 9.0, 1e-12);
  EXPECT_EQ(expand_interval("[17:21]", 5), (std::vector<double>{17, 18, 19, 20, 21}));
  EXPECT_EQ(expand_interval("4", 2), (std::vector<double>{4, 4}));
  EXPECT_THROW(expand_interval("[1:2", 2), ConfigError);
}

TEST(Scenario, ReferenceFileCounts) {
  const auto s = load_scenario_file(test::scenario_dir() / "paper_default.cfg");
  EXPECT_EQ(s.users.size(), 4u);
  EXPECT_EQ(s.targets.size(), 4u);
  EXPECT_EQ(s.clutters.size(), 60u);
  EXPECT_EQ(s.n_tx, 8);
  EXPECT_EQ(s.n_cells, 16);
  EXPECT_DOUBLE_EQ(s.power_budget, 10.0);
  EXPECT_NEAR(s.noise_radar, 1e-13, 1e-25);
  EXPECT_EQ(s.arch, Architecture::FullyConnected);
  EXPECT_EQ(s.obs_len_t, 25);
  EXPECT_EQ(s.obs_len_r, 21);
}

TEST(Scenario, PropagationPowerRatios) {
  const auto s = load_scenario_file(test::scenario_dir() / "paper_default.cfg");
  EXPECT_NEAR(s.targets[1].power / s.targets[0].power, 0.0767, 0.0767 * 0.01);
  EXPECT_NEAR(s.targets[3].power / s.targets[2].power, 0.1975, 0.1975 * 0.01);
}

TEST(Scenario, MinimumRingPerSideIsZero) {
  for (const char* f : {"paper_default.cfg", "desk_default.cfg"}) {
    const auto s = load_scenario_file(test::scenario_dir() / f);
    for (Side side : {Side::Transmissive, Side::Reflective}) {
      int lo = 1 << 30;
      for (int k : s.targets_on(side)) lo = std::min(lo, s.targets[k].ring);
      EXPECT_EQ(lo, 0);
      EXPECT_GE(s.obs_len(side), s.code_len);
    }
  }
}

TEST(Scenario, GroupsEqualCellsIsSingleConnected) {
  const auto s = load_scenario("[system]\nn_cells = 8\ngroups = 8\n[targets]\nT 10 0 0\n");
  EXPECT_EQ(s.arch, Architecture::SingleConnected);
  EXPECT_EQ(s.group_size(), 1);
}

TEST(Scenario, GroupsMustDivideCells) {
  EXPECT_THROW(load_scenario("[system]\nn_cells = 16\ngroups = 3\n[targets]\nT 10 0 0\n"), ConfigError);
}

TEST(Scenario, SchemaErrors) {
  EXPECT_THROW(load_scenario("[system]\nn_cells = 16\n"), ConfigError);
  EXPECT_THROW(load_scenario("[system]\narch = STAR\n[targets]\nT 10 0 0\n"), ConfigError);
  EXPECT_THROW(load_scenario("[system]\nbogus = 1\n[targets]\nT 10 0 0\n"), ConfigError);
  EXPECT_THROW(load_scenario("[nope]\n"), ConfigError);
  EXPECT_THROW(load_scenario("[targets]\nX 10 0 0\n"), ConfigError);
  EXPECT_THROW(load_scenario("[system]\npower_w = 0\n[targets]\nT 10 0 0\n"), ConfigError);
  EXPECT_THROW(load_scenario_file("/nonexistent/file.cfg"), ConfigError);
}

TEST(Scenario, RadarOnlyTagDropsUsers) {
  const auto s = load_scenario("[system]\narch = RADAR-ONLY\n[users]\nT 16 *\n[targets]\nT 10 0 0\n");
  EXPECT_TRUE(s.radar_only);
  EXPECT_TRUE(s.active_users().empty());
  EXPECT_EQ(s.users.size(), 1u);
}

TEST(Scenario, SetArchitectureResolvesSpecialCases) {
  auto s = load_scenario_file(test::scenario_dir() / "desk_default.cfg");
  set_architecture(s, Architecture::GroupConnected, 2);
  EXPECT_EQ(s.groups, 2);
  EXPECT_EQ(s.arch, Architecture::GroupConnected);
  set_architecture(s, Architecture::GroupConnected, 8);
  EXPECT_EQ(s.arch, Architecture::SingleConnected);
  set_architecture(s, Architecture::DoubleRis);
  EXPECT_EQ(s.groups, s.n_cells);
  EXPECT_THROW(set_architecture(s, Architecture::GroupConnected, 3), ConfigError);
}
