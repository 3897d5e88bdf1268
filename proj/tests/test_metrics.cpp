// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "bdris/admm.hpp"
#include "bdris/channel.hpp"
#include "bdris/metrics.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace bdris;

namespace {

double gauss_q(double x) { return 0.5 * std::erfc(x / std::sqrt(2.0)); }

}  // namespace

TEST(MarcumQ, ClosedForms) {
  for (double b : {0.1, 0.7, 1.0, 2.5, 6.0}) EXPECT_NEAR(marcum_q1(0.0, b), std::exp(-b * b / 2.0), 1e-15);
  for (double a : {0.0, 0.3, 2.0, 30.0}) EXPECT_EQ(marcum_q1(a, 0.0), 1.0);
  // Noncentral chi-square survival function, 2 degrees of freedom, lambda = 1, at x = 1.
  EXPECT_NEAR(marcum_q1(1.0, 1.0), 0.7328798037968203, 1e-12);
}

TEST(MarcumQ, MatchesBesselSeriesOnGrid) {
  double worst = 0.0;
  for (double a = 0.0; a <= 8.0 + 1e-12; a += 0.25)
    for (double b = 0.0; b <= 10.0 + 1e-12; b += 0.25)
      worst = std::max(worst, std::abs(marcum_q1(a, b) - test::marcum_q1_bessel(a, b)));
  EXPECT_LE(worst, 1e-10);
}

TEST(MarcumQ, LargeArgumentsStayInRange) {
  EXPECT_NEAR(marcum_q1(40.0, 20.0), 1.0, 1e-12);
  EXPECT_NEAR(marcum_q1(20.0, 40.0), 0.0, 1e-12);
  double prev = 0.0;
  for (double a = 0.0; a <= 60.0; a += 0.5) {
    const double q = marcum_q1(a, 30.0);
    EXPECT_GE(q, prev - 1e-13);
    prev = q;
  }
  EXPECT_THROW(marcum_q1(-1.0, 1.0), std::domain_error);
}

TEST(DetectionProbability, ZeroScnrGivesFalseAlarmRate) {
  for (double pfa : {1e-6, 1e-4, 1e-2, 0.3, 0.7}) EXPECT_EQ(detection_probability(0.0, pfa), pfa);
}

TEST(DetectionProbability, MonotoneInScnrAndFalseAlarm) {
  double prev = 0.0;
  for (double db = -20.0; db <= 14.0; db += 0.5) {
    const double pd = detection_probability(db_to_linear(db), 1e-4);
    EXPECT_GT(pd, prev) << db;
    prev = pd;
  }
  const double at10 = detection_probability(10.0, 1e-4);
  EXPECT_GT(at10, 1e-4);
  EXPECT_LT(at10, 1.0);
  prev = 1.0;
  for (double pfa : {0.5, 1e-1, 1e-2, 1e-3, 1e-4, 1e-6}) {
    const double pd = detection_probability(10.0, pfa);
    EXPECT_LT(pd, prev);
    prev = pd;
  }
  EXPECT_NEAR(detection_probability(1e4, 1e-4), 1.0, 1e-12);
  EXPECT_THROW(detection_probability(1.0, 0.0), std::domain_error);
  EXPECT_THROW(detection_probability(-1.0, 0.1), std::domain_error);
}

TEST(Ber, QpskBoundaryPointMatchesGaussianTail) {
  // QPSK index 0, CI margin 1: r = 3 + 2j sits on the region boundary.
  const cdouble y = cdouble(3.0, 2.0) * std::polar(1.0, kPi / 4.0);
  const double noise = 2.0;
  const double s = std::sqrt(noise / 2.0);
  const double expected = 0.5 * (gauss_q(y.real() / s) + gauss_q(y.imag() / s));
  std::mt19937_64 rng(7);
  const long long trials = 100000;
  const double ber = simulate_point_ber(y, 0, 4, noise, trials, rng);
  const double sigma = std::sqrt(expected * (1.0 - expected) / (2.0 * trials));
  EXPECT_NEAR(ber, expected, 3.0 * sigma);
}

TEST(Ber, NoiselessPointsDecodeExactly) {
  std::mt19937_64 rng(3);
  for (int order : {2, 4, 8})
    for (int m = 0; m < order; ++m) EXPECT_EQ(simulate_point_ber(2.0 * psk_point(m, order), m, order, 1e-20, 200, rng), 0.0);
  EXPECT_THROW(simulate_point_ber(1.0, 0, 4, 1.0, 0, rng), std::invalid_argument);
}

TEST(Ber, StandardErrorShrinksAsInverseSqrtTrials) {
  const cdouble y = cdouble(1.2, 0.9);
  auto spread = [&](long long trials) {
    std::mt19937_64 rng(11);
    std::vector<double> v;
    for (int rep = 0; rep < 60; ++rep) v.push_back(simulate_point_ber(y, 0, 4, 1.0, trials, rng));
    double mean = 0.0, var = 0.0;
    for (double x : v) mean += x;
    mean /= v.size();
    for (double x : v) var += (x - mean) * (x - mean);
    return std::sqrt(var / (v.size() - 1));
  };
  const double ratio = spread(500) / spread(2000);
  EXPECT_GT(ratio, 1.5);
  EXPECT_LT(ratio, 2.6);
}

TEST(Ber, SeededAndNoiselessOnCiFeasibleWaveform) {
  auto inst = Instance::make(test::small_scenario(5, 4, 4, 2, 4));
  std::mt19937_64 rng(1);
  const auto st = init_bdris(1, 4, Architecture::FullyConnected, rng);
  Waveform wf = draw_symbols(2, 4, 4, rng);
  const auto init = init_waveform(inst, st.phi_t, st.phi_r, wf.symbols);
  wf.w = init.w;
  inst.scenario.qos_db = 10.0 * std::log10(0.5 * init.gamma_star);
  ASSERT_GT(min_ci_slack(inst, wf, st.phi_t, st.phi_r), -1e-7);

  auto quiet = inst;
  quiet.scenario.noise_comm = 1e-14;
  EXPECT_EQ(simulate_ber(quiet, wf, st.phi_t, st.phi_r, 500).average, 0.0);

  const auto a = simulate_ber(inst, wf, st.phi_t, st.phi_r, 2000, 9);
  const auto b = simulate_ber(inst, wf, st.phi_t, st.phi_r, 2000, 9);
  EXPECT_EQ(a.per_user, b.per_user);
  EXPECT_EQ(a.bits, 2000LL * 4 * 2);
}

TEST(Beampattern, AngleGrid) {
  const auto g = angle_grid(-90.0, 90.0, 0.5);
  ASSERT_EQ(g.size(), 361u);
  EXPECT_DOUBLE_EQ(g.front(), -90.0);
  EXPECT_DOUBLE_EQ(g.back(), 90.0);
  for (std::size_t i = 1; i < g.size(); ++i) EXPECT_GT(g[i], g[i - 1]);
  EXPECT_THROW(angle_grid(0.0, 1.0, 0.0), std::invalid_argument);
}

TEST(Beampattern, TransmitPeaksAtSteeredDirection) {
  const auto inst = Instance::make(test::small_scenario(2, 4, 4, 2, 3));
  const CMat phi = CMat::Identity(4, 4);
  std::mt19937_64 rng(4);
  for (double th : {-35.0, 0.0, 22.5}) {
    const CVec a = steering_vector(th, 4, inst.scenario.spacing_ratio);
    const CMat w = inst.channels.g_mat.fullPivLu().solve(a) * test::random_cmat(1, 3, rng);
    const auto grid = angle_grid(-90.0, 90.0, 0.5);
    const auto bp = transmit_beampattern(inst, w, phi, grid);
    const auto peak = std::max_element(bp.values.begin(), bp.values.end()) - bp.values.begin();
    EXPECT_NEAR(grid[peak], th, 0.26);
    EXPECT_DOUBLE_EQ(*std::max_element(bp.values.begin(), bp.values.end()), 0.0);

    const auto rotated = transmit_beampattern(inst, w * std::polar(1.0, 1.234), phi, grid);
    for (std::size_t i = 0; i < grid.size(); ++i) EXPECT_NEAR(rotated.values[i], bp.values[i], 1e-9);
  }
  EXPECT_THROW(transmit_beampattern(inst, CMat::Zero(4, 3), phi, {}), std::invalid_argument);
}

TEST(Beampattern, SpaceRangeMatchesDenseTrace) {
  const auto s = test::small_scenario(8, 3, 4, 3, 4);
  const auto inst = Instance::make(s);
  std::mt19937_64 rng(8);
  const CMat w = test::random_cmat(3, 4, rng);
  const CMat phi_t = test::random_isometry(4, 4, rng), phi_r = test::random_isometry(4, 4, rng);
  const auto grid = angle_grid(-60.0, 60.0, 5.0);
  for (int k = 0; k < static_cast<int>(s.targets.size()); ++k) {
    const int obs = s.obs_len(s.targets[k].side);
    const CMat u = test::random_cmat(3, obs, rng);
    const auto bp = space_range_beampattern(inst, w, phi_t, phi_r, u, k, grid);
    ASSERT_EQ(bp.rings.size(), static_cast<std::size_t>(obs - s.code_len + 1));
    const CMat& phi = s.targets[k].side == Side::Transmissive ? phi_t : phi_r;
    std::vector<double> raw;
    for (double th : grid)
      for (int r : bp.rings) {
        const CMat m = u.adjoint() * radar_channel(th, 3, 4, s.spacing_ratio) * phi * inst.channels.g_mat * w *
                       shift_matrix(r, s.code_len, obs).cast<cdouble>();
        raw.push_back(std::norm(m.trace()));
      }
    const double peak = *std::max_element(raw.begin(), raw.end());
    for (std::size_t a = 0; a < grid.size(); ++a)
      for (std::size_t r = 0; r < bp.rings.size(); ++r)
        EXPECT_NEAR(bp.at(a, r), std::max(kDbFloor, 10.0 * std::log10(raw[a * bp.rings.size() + r] / peak)), 1e-9);
  }
}

TEST(Beampattern, ZeroWaveformIsFloor) {
  const auto s = test::small_scenario(8, 3, 4, 3, 4);
  const auto inst = Instance::make(s);
  const CMat u = CMat::Ones(3, s.obs_len(Side::Transmissive));
  const auto bp = space_range_beampattern(inst, CMat::Zero(3, 4), CMat::Identity(4, 4), CMat::Identity(4, 4), u, 0,
                                          angle_grid(-10.0, 10.0, 5.0));
  for (double v : bp.values) EXPECT_EQ(v, kDbFloor);
}
