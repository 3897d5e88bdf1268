// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "bdris/scenario.hpp"
#include "bdris/types.hpp"

namespace bdris {

/// ULA response with unit norm: entry i = exp(j 2 pi ratio i sin(angle)) / sqrt(n).
CVec steering_vector(double angle_deg, int n, double spacing_ratio = 0.5);

/// Effective RIS-to-receiver radar channel a_R(angle) a_T(angle)^H, N_R x N_S.
CMat radar_channel(double angle_deg, int n_rx, int n_cells, double spacing_ratio = 0.5);

/// Generalised L x L_obs shift: (J_r)[i, j] = 1 iff j = i + r and 0 <= j < L_obs.
/// Rows that would fall outside the observation window are zero.
class ShiftMatrix {
 public:
  ShiftMatrix(int offset, int code_len, int obs_len);

  int offset() const { return offset_; }
  int rows() const { return code_len_; }
  int cols() const { return obs_len_; }
  RMat dense() const;

  /// X J_r for X with code_len columns.
  CMat right_apply(const CMat& x) const;
  /// Y J_r^T for Y with obs_len columns.
  CMat right_apply_transpose(const CMat& y) const;

 private:
  int offset_;
  int code_len_;
  int obs_len_;
};

RMat shift_matrix(int offset, int code_len, int obs_len);

/// sqrt(pathloss) * (sqrt(k/(1+k)) LoS + sqrt(1/(1+k)) NLoS) with unit-variance
/// circular Gaussian NLoS entries. An infinite k returns the scaled LoS term.
CMat rician_channel(int rows, int cols, double k_factor_db, const CMat& los, double link_pathloss,
                    std::mt19937_64& rng);

struct CommChannels {
  CMat g_mat;                       // N_S x N_T, DFBS -> RIS
  std::vector<CVec> h;              // N_S per user, RIS -> user
  std::vector<double> user_angles;  // degrees, w.r.t. the RIS normal on the user's side
};

/// Deterministic in (scenario, scenario.rng_seed).
CommChannels generate_channels(const Scenario& scenario);

}  // namespace bdris
