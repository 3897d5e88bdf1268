// SPDX-License-Identifier: Apache-2.0
#include "bdris/channel.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace bdris {

namespace {

// Unit-modulus array response (no 1/sqrt(n) normalisation), used for LoS terms.
CVec array_phases(double angle_deg, int n, double spacing_ratio) {
  CVec a(n);
  const double phase = 2.0 * kPi * spacing_ratio * std::sin(deg_to_rad(angle_deg));
  for (int i = 0; i < n; ++i) a(i) = std::polar(1.0, phase * i);
  return a;
}

}  // namespace

CVec steering_vector(double angle_deg, int n, double spacing_ratio) {
  if (n < 1) throw std::invalid_argument("steering_vector: n must be >= 1");
  return array_phases(angle_deg, n, spacing_ratio) / std::sqrt(static_cast<double>(n));
}

CMat radar_channel(double angle_deg, int n_rx, int n_cells, double spacing_ratio) {
  return steering_vector(angle_deg, n_rx, spacing_ratio) * steering_vector(angle_deg, n_cells, spacing_ratio).adjoint();
}

ShiftMatrix::ShiftMatrix(int offset, int code_len, int obs_len)
    : offset_(offset), code_len_(code_len), obs_len_(obs_len) {
  if (code_len < 1 || obs_len < code_len) throw std::invalid_argument("ShiftMatrix: need obs_len >= code_len >= 1");
}

RMat ShiftMatrix::dense() const {
  RMat j = RMat::Zero(code_len_, obs_len_);
  for (int i = 0; i < code_len_; ++i) {
    const int col = i + offset_;
    if (col >= 0 && col < obs_len_) j(i, col) = 1.0;
  }
  return j;
}

CMat ShiftMatrix::right_apply(const CMat& x) const {
  CMat out = CMat::Zero(x.rows(), obs_len_);
  for (int i = 0; i < code_len_; ++i) {
    const int col = i + offset_;
    if (col >= 0 && col < obs_len_) out.col(col) = x.col(i);
  }
  return out;
}

CMat ShiftMatrix::right_apply_transpose(const CMat& y) const {
  CMat out = CMat::Zero(y.rows(), code_len_);
  for (int i = 0; i < code_len_; ++i) {
    const int col = i + offset_;
    if (col >= 0 && col < obs_len_) out.col(i) = y.col(col);
  }
  return out;
}

RMat shift_matrix(int offset, int code_len, int obs_len) { return ShiftMatrix(offset, code_len, obs_len).dense(); }

CMat rician_channel(int rows, int cols, double k_factor_db, const CMat& los, double link_pathloss,
                    std::mt19937_64& rng) {
  if (los.rows() != rows || los.cols() != cols) throw std::invalid_argument("rician_channel: LoS shape mismatch");
  const double scale = std::sqrt(link_pathloss);
  if (std::isinf(k_factor_db) && k_factor_db > 0) return scale * los;
  const double k = db_to_linear(k_factor_db);
  std::normal_distribution<double> normal(0.0, std::sqrt(0.5));
  CMat nlos(rows, cols);
  for (int c = 0; c < cols; ++c)
    for (int r = 0; r < rows; ++r) {
      const double re = normal(rng);
      const double im = normal(rng);
      nlos(r, c) = cdouble(re, im);
    }
  return scale * (std::sqrt(k / (1.0 + k)) * los + std::sqrt(1.0 / (1.0 + k)) * nlos);
}

CommChannels generate_channels(const Scenario& s) {
  std::mt19937_64 rng(s.rng_seed);
  CommChannels ch;
  const double ref = db_to_linear(s.pathloss.ref_gain_db);
  const double d0 = s.pathloss.ref_distance_m;

  // DFBS at (-d_BR, 0), RIS at the origin with its normal along x: both ends see
  // each other at broadside.
  const CMat los_g = array_phases(0.0, s.n_cells, s.spacing_ratio) * array_phases(0.0, s.n_tx, s.spacing_ratio).adjoint();
  ch.g_mat = rician_channel(s.n_cells, s.n_tx, s.rician_k_db, los_g, pathloss(s.bs_distance_m, s.pathloss.exp_bs_ris, ref, d0), rng);

  std::uniform_real_distribution<double> angle(-60.0, 60.0);
  for (const auto& u : s.users) {
    const double a = u.azimuth_deg ? *u.azimuth_deg : angle(rng);
    ch.user_angles.push_back(a);
    const CMat los = array_phases(a, s.n_cells, s.spacing_ratio);
    const double pl = pathloss(u.distance_m, s.pathloss.exp_ris_user, ref, d0);
    ch.h.push_back(rician_channel(s.n_cells, 1, s.rician_k_db, los, pl, rng).col(0));
  }
  return ch;
}

}  // namespace bdris
