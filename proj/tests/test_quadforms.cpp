// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>

#include "bdris/quadforms.hpp"
#include "support.hpp"

using namespace bdris;
using bdris::test::random_block_diagonal;
using bdris::test::random_cmat;
using bdris::test::random_cvec;

namespace {

using Sample = test::RandomSample;
using test::random_sample;

double rel(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

}  // namespace

TEST(Quadforms, ThreeFormsAgreeWithTrace) {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto smp = random_sample(seed, 2 + seed % 2, 2, 2 + seed % 3, 2 + seed % 2, 1, 1 + seed % 2);
    const auto& s = smp.inst.scenario;
    const auto psi = build_filter_forms(smp.inst, smp.w, smp.phi_t, smp.phi_r);
    const auto ups = build_waveform_forms(smp.inst, smp.phi_t, smp.phi_r, smp.filters);
    const auto xi = build_phase_forms(smp.inst, smp.w, smp.filters);
    for (int k = 0; k < static_cast<int>(s.targets.size()); ++k) {
      const CMat& phi = phi_for(s.targets[k].side, smp.phi_t, smp.phi_r);
      const double ref = scnr_trace(smp.inst, smp.w, phi, smp.filters.u[k], k);
      EXPECT_GT(ref, 0.0);
      EXPECT_LE(rel(psi[k].ratio(vec(smp.filters.u[k])), ref), 1e-9);
      EXPECT_LE(rel(ups[k].ratio(vec(smp.w)), ref), 1e-9);
      EXPECT_LE(rel(xi[k].ratio(vec(phi)), ref), 1e-9);
    }
  }
}

TEST(Quadforms, FormsArePsdAndSignalIsRankOne) {
  const auto smp = random_sample(5, 3, 4, 3, 3, 2, 2);
  const auto psi = build_filter_forms(smp.inst, smp.w, smp.phi_t, smp.phi_r);
  const auto ups = build_waveform_forms(smp.inst, smp.phi_t, smp.phi_r, smp.filters);
  const auto xi = build_phase_forms(smp.inst, smp.w, smp.filters);
  for (const auto* family : {&psi, &ups, &xi}) {
    for (const auto& f : *family) {
      for (const RankOneSum* r : {&f.signal, &f.interference}) {
        const CMat d = r->dense();
        EXPECT_LE((d - d.adjoint()).norm(), 1e-12 * std::max(1.0, d.norm()));
        Eigen::SelfAdjointEigenSolver<CMat> eig(d);
        const double top = eig.eigenvalues().cwiseAbs().maxCoeff();
        EXPECT_GE(eig.eigenvalues().minCoeff(), -1e-10 * top);
      }
      Eigen::SelfAdjointEigenSolver<CMat> eig(f.signal.dense());
      const auto& ev = eig.eigenvalues();
      const double top = ev.maxCoeff();
      int nonzero = 0;
      for (Eigen::Index i = 0; i < ev.size(); ++i) nonzero += ev(i) > 1e-10 * top;
      EXPECT_EQ(nonzero, 1);
    }
  }
}

TEST(Quadforms, NoClutterSingleTargetHasEmptyInterference) {
  Scenario s = test::small_scenario(2, 2, 2, 2, 2, 1, 0);
  s.targets.erase(s.targets.begin() + 1, s.targets.end());
  derive_rings(s);
  const auto inst = Instance::make(s);
  std::mt19937_64 rng(1);
  const auto psi = build_filter_forms(inst, random_cmat(2, 2, rng), CMat::Identity(2, 2), CMat::Identity(2, 2));
  ASSERT_EQ(psi.size(), 1u);
  EXPECT_EQ(psi[0].interference.terms(), 0u);
  EXPECT_EQ(psi[0].interference.dense().norm(), 0.0);
}

TEST(Quadforms, ZeroWaveformGivesZeroScnr) {
  const auto smp = random_sample(9);
  CMat u = smp.filters.u[0];
  u /= u.norm();
  EXPECT_EQ(scnr_trace(smp.inst, CMat::Zero(2, 2), smp.phi_t, u, 0), 0.0);
}

TEST(Quadforms, SingleTargetHandEvaluation) {
  // One target at broadside, ring 0, no clutter: SCNR = zeta^2 |<U, A G W>|^2 / (sigma^2 |U|^2).
  Scenario s = test::small_scenario(4, 2, 2, 2, 2, 1, 0);
  s.targets = {s.targets[0]};
  s.targets[0].azimuth_deg = 0.0;
  s.targets[0].power = 3.0;
  derive_rings(s);
  CommChannels ch;
  ch.g_mat = CMat::Identity(2, 2);
  ch.h = {CVec::Ones(2), CVec::Ones(2)};
  ch.user_angles = {0.0, 0.0};
  const auto inst = Instance::make(s, ch);
  CMat w(2, 2);
  w << 1.0, 0.0, 1.0, 0.0;  // both antennas transmit 1 in slot 0
  // A(0) is the all-0.5 matrix, so A G W = [[1, 0], [1, 0]]; matched U = that matrix.
  CMat u(2, 2);
  u << 1.0, 0.0, 1.0, 0.0;
  const double expected = 3.0 * 4.0 / (0.5 * 2.0);
  EXPECT_NEAR(scnr_trace(inst, w, CMat::Identity(2, 2), u, 0), expected, 1e-12);
}

TEST(Quadforms, WaveformFormInvariantToFilterScaling) {
  auto smp = random_sample(12);
  const auto ups = build_waveform_forms(smp.inst, smp.phi_t, smp.phi_r, smp.filters);
  for (auto& u : smp.filters.u) u *= cdouble(-2.5, 1.3);
  const auto ups2 = build_waveform_forms(smp.inst, smp.phi_t, smp.phi_r, smp.filters);
  for (std::size_t k = 0; k < ups.size(); ++k)
    EXPECT_LE(rel(ups2[k].ratio(vec(smp.w)), ups[k].ratio(vec(smp.w))), 1e-12);
}

TEST(Quadforms, ScnrNondecreasingInPowerWithoutClutter) {
  Scenario s = test::small_scenario(21, 2, 2, 2, 2, 1, 0);
  s.targets = {s.targets[0]};
  derive_rings(s);
  const auto inst = Instance::make(s);
  std::mt19937_64 rng(3);
  const CMat w = random_cmat(2, 2, rng);
  const CMat u = random_cmat(2, s.obs_len(s.targets[0].side), rng);
  double prev = 0.0;
  for (double c : {0.1, 0.5, 1.0, 2.0, 10.0}) {
    const double v = scnr_trace(inst, c * w, CMat::Identity(2, 2), u, 0);
    EXPECT_GE(v, prev);
    prev = v;
  }
}

TEST(GroupMap, FullyConnectedIsPermutation) {
  const RMat k = group_map(1, 4);
  EXPECT_EQ(k.rows(), 16);
  EXPECT_EQ(k.cols(), 16);
  EXPECT_LE((k * k.transpose() - RMat::Identity(16, 16)).norm(), 0.0);
  std::mt19937_64 rng(1);
  const CMat xi = random_cmat(16, 16, rng);
  const CMat xt = de_diagonalize(xi, 1, 4);
  EXPECT_LE((xt - k * xi * k.transpose()).norm(), 1e-13);
}

TEST(GroupMap, SingleConnectedExtractsDiagonal) {
  std::mt19937_64 rng(2);
  const int n = 5;
  const CMat phi = random_block_diagonal(n, n, rng);
  const CVec tilde = vec(stack_blocks(phi, n));
  EXPECT_LE((tilde - phi.diagonal()).norm(), 0.0);
  const RMat k = group_map(n, 1);
  EXPECT_LE((k.cast<cdouble>() * vec(phi) - tilde).norm(), 0.0);
}

TEST(GroupMap, DeDiagonalizationPreservesFormsAndTraces) {
  std::mt19937_64 rng(9);
  for (int groups : {1, 2, 4}) {
    const int n = 4, m = n / groups;
    for (int trial = 0; trial < 10; ++trial) {
      const CMat phi = random_block_diagonal(n, groups, rng);
      const CVec ph = vec(phi);
      const CVec pt = vec(stack_blocks(phi, groups));
      const CMat r = random_cmat(3, n * n, rng);
      const CMat xi = r.adjoint() * r;
      const cdouble full = ph.dot(xi * ph);
      const cdouble tilde = pt.dot(de_diagonalize(xi, groups, m) * pt);
      EXPECT_LE(std::abs(full - tilde), 1e-10 * std::abs(full));

      RankOneSum sum;
      for (int j = 0; j < 3; ++j) sum.add(0.5 + j, r.row(j).adjoint());
      EXPECT_LE(std::abs(sum.quad(ph) - de_diagonalize(sum, groups, m).quad(pt)), 1e-10 * sum.quad(ph));

      const CMat hbar = random_cmat(n, n, rng);
      const cdouble tr_full = (hbar * phi).trace();
      const cdouble tr_tilde = stacked_trace(h_tilde(hbar, groups), stack_blocks(phi, groups), groups);
      EXPECT_LE(std::abs(tr_full - tr_tilde), 1e-10 * std::max(1.0, std::abs(tr_full)));
      EXPECT_LE((unstack_blocks(stack_blocks(phi, groups), groups) - phi).norm(), 0.0);
    }
  }
  EXPECT_THROW(de_diagonalize(CMat::Zero(9, 9), 2, 2), std::invalid_argument);
}

TEST(RankOneSum, FactorAndApplyConsistent) {
  std::mt19937_64 rng(4);
  RankOneSum r;
  for (int j = 0; j < 4; ++j) r.add(0.3 * (j + 1), random_cvec(6, rng));
  const CMat d = r.dense();
  const CMat f = r.factor();
  EXPECT_LE((f.adjoint() * f - d).norm(), 1e-12 * d.norm());
  const CVec x = random_cvec(6, rng);
  EXPECT_LE((r.apply(x) - d * x).norm(), 1e-12 * d.norm() * x.norm());
  EXPECT_NEAR(r.quad(x), x.dot(d * x).real(), 1e-10 * r.quad(x));
  EXPECT_THROW(r.add(1.0, CVec::Zero(5)), std::invalid_argument);
}

TEST(ConstructiveInterference, SlackSign) {
  const double omega = kPi / 4;
  const cdouble s = std::polar(1.0, omega);
  // Point on the symbol's bisector beyond the margin: inside.
  EXPECT_GT(ci_slack(std::polar(2.0, omega), s, 1.0, omega), 0.0);
  // Exactly on the boundary ray starting at the margin point.
  const cdouble apex = std::polar(1.0, omega);
  const cdouble boundary = apex + std::polar(3.0, omega + omega);
  EXPECT_NEAR(ci_slack(boundary, s, 1.0, omega), 0.0, 1e-12);
  // Rotated away into the neighbouring region: outside.
  EXPECT_LT(ci_slack(std::polar(2.0, omega + kPi / 2), s, 1.0, omega), 0.0);
  // Below the margin along the bisector: outside.
  EXPECT_LT(ci_slack(std::polar(0.5, omega), s, 1.0, omega), 0.0);
}
