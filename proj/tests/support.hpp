// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <random>

#include "bdris/quadforms.hpp"
#include "bdris/scenario.hpp"

namespace bdris::test {

inline std::filesystem::path scenario_dir() { return std::filesystem::path(BDRIS_SOURCE_DIR) / "scenarios"; }

inline CMat random_cmat(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  CMat m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = cdouble(n(rng), n(rng));
  return m;
}

inline CVec random_cvec(Eigen::Index n, std::mt19937_64& rng) { return random_cmat(n, 1, rng).col(0); }

inline RVec random_rvec(Eigen::Index n, std::mt19937_64& rng) {
  std::normal_distribution<double> d(0.0, 1.0);
  RVec v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = d(rng);
  return v;
}

/// Random matrix with orthonormal columns.
inline CMat random_isometry(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
  Eigen::HouseholderQR<CMat> qr(random_cmat(rows, cols, rng));
  return qr.householderQ() * CMat::Identity(rows, cols);
}

/// Block-diagonal matrix with G random (not necessarily unitary) blocks.
inline CMat random_block_diagonal(int n, int groups, std::mt19937_64& rng) {
  const int m = n / groups;
  CMat out = CMat::Zero(n, n);
  for (int g = 0; g < groups; ++g) out.block(g * m, g * m, m, m) = random_cmat(m, m, rng);
  return out;
}

/// Small two-sided instance with random angles and unit-order powers so that
/// numerical comparisons are well conditioned.
inline Scenario small_scenario(std::uint64_t seed, int n_tx = 2, int n_cells = 2, int n_rx = 2, int code_len = 2,
                               int groups = 1, int clutter_per_side = 1) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> angle(-60.0, 60.0);
  std::uniform_real_distribution<double> range(5.0, 12.0);
  Scenario s;
  s.n_tx = n_tx;
  s.n_cells = n_cells;
  s.n_rx = n_rx;
  s.code_len = code_len;
  s.noise_comm = 1.0;
  s.noise_radar = 0.5;
  s.rng_seed = seed;
  s.qos_db = 0.0;
  s.users = {User{Side::Transmissive, 16.0, {}, {}}, User{Side::Reflective, 16.0, {}, {}}};
  for (Side side : {Side::Transmissive, Side::Reflective}) {
    for (double r : {10.0, 11.0}) {
      Target t;
      t.side = side;
      t.range_m = r;
      t.azimuth_deg = angle(rng);
      s.targets.push_back(t);
    }
    for (int q = 0; q < clutter_per_side; ++q) {
      Clutter c;
      c.side = side;
      c.range_m = range(rng);
      c.azimuth_deg = angle(rng);
      s.clutters.push_back(c);
    }
  }
  derive_rings(s);
  std::uniform_real_distribution<double> pw(0.5, 2.0);
  for (auto& t : s.targets) t.power = pw(rng);
  for (auto& c : s.clutters) c.power = pw(rng);
  set_architecture(s, groups == 1 ? Architecture::FullyConnected : Architecture::GroupConnected, groups);
  return s;
}

/// small_scenario with random channels, waveform, block-diagonal (not unitary)
/// BD-RIS matrices and filters.
struct RandomSample {
  Instance inst;
  CMat w, phi_t, phi_r;
  FilterBank filters;
};

inline RandomSample random_sample(std::uint64_t seed, int n_tx = 2, int n_cells = 2, int n_rx = 2, int code_len = 2,
                                  int groups = 1, int clutter_per_side = 1) {
  std::mt19937_64 rng(seed * 7919 + 1);
  Scenario s = small_scenario(seed, n_tx, n_cells, n_rx, code_len, groups, clutter_per_side);
  CommChannels ch;
  ch.g_mat = random_cmat(n_cells, n_tx, rng);
  for (std::size_t u = 0; u < s.users.size(); ++u) {
    ch.h.push_back(random_cvec(n_cells, rng));
    ch.user_angles.push_back(0.0);
  }
  RandomSample out{Instance::make(s, ch), random_cmat(n_tx, code_len, rng), random_block_diagonal(n_cells, groups, rng),
                   random_block_diagonal(n_cells, groups, rng), {}};
  for (const auto& t : s.targets) out.filters.u.push_back(random_cmat(n_rx, s.obs_len(t.side), rng));
  return out;
}

}  // namespace bdris::test
