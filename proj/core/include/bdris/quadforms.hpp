// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "bdris/channel.hpp"
#include "bdris/scenario.hpp"
#include "bdris/types.hpp"

namespace bdris {

/// Scenario plus everything derived from it that stays fixed during a solve.
struct Instance {
  Scenario scenario;
  CommChannels channels;
  std::vector<CMat> target_channels;   // A(phi_k), N_R x N_S
  std::vector<CMat> clutter_channels;  // A(theta_q)

  static Instance make(Scenario scenario);
  static Instance make(Scenario scenario, CommChannels channels);
};

struct Waveform {
  CMat w;        // N_T x L
  CMat symbols;  // U x L, unit-modulus PSK
  std::vector<int> symbol_index;  // row-major U x L constellation indices
};

struct BdRisState {
  CMat phi_t;                     // N_S x N_S, block diagonal
  CMat phi_r;
  std::vector<CMat> theta;        // G blocks, 2M x M, orthonormal columns
  std::vector<CMat> duals;        // G blocks, 2M x M
  double penalty = 1.0;
};

struct FilterBank {
  std::vector<CMat> u;  // per target, N_R x L_obs(side)
};

/// Sum of weighted rank-one Hermitian terms sum_j w_j v_j v_j^H, kept in
/// factored form so that the large Kronecker-structured matrices never have
/// to be materialised.
class RankOneSum {
 public:
  RankOneSum() = default;
  explicit RankOneSum(Eigen::Index dim) : dim_(dim) {}

  void add(double weight, CVec v);
  Eigen::Index dim() const { return dim_; }
  std::size_t terms() const { return vectors_.size(); }
  const std::vector<double>& weights() const { return weights_; }
  const std::vector<CVec>& vectors() const { return vectors_; }

  double quad(const CVec& x) const;
  CVec apply(const CVec& x) const;
  CMat dense() const;
  /// R with rows sqrt(w_j) v_j^H, so that R^H R equals dense().
  CMat factor() const;

 private:
  Eigen::Index dim_ = 0;
  std::vector<double> weights_;
  std::vector<CVec> vectors_;
};

/// ratio(x) = signal(x) / (interference(x) + noise_identity |x|^2 + noise_const)
struct FractionalForm {
  RankOneSum signal;
  RankOneSum interference;
  double noise_identity = 0.0;
  double noise_const = 0.0;

  double ratio(const CVec& x) const;
};

CVec vec(const CMat& m);
CMat unvec(const CVec& v, Eigen::Index rows, Eigen::Index cols);

const CMat& phi_for(Side side, const CMat& phi_t, const CMat& phi_r);

/// SCNR of target k by the direct trace expression with expected powers.
double scnr_trace(const Instance& inst, const CMat& w, const CMat& phi, const CMat& u_k, int k);

/// Filter-domain forms (Psi), variable u_k = vec(U_k).
std::vector<FractionalForm> build_filter_forms(const Instance& inst, const CMat& w, const CMat& phi_t,
                                               const CMat& phi_r);
/// Waveform-domain forms (Upsilon), variable vec(W).
std::vector<FractionalForm> build_waveform_forms(const Instance& inst, const CMat& phi_t, const CMat& phi_r,
                                                 const FilterBank& filters);
/// Phase-domain forms (Xi), variable vec(Phi_side) of the target's side.
std::vector<FractionalForm> build_phase_forms(const Instance& inst, const CMat& w, const FilterBank& filters);

/// Binary M N_S x N_S^2 map selecting the diagonal blocks of a block-diagonal
/// matrix: K vec(Phi) = vec([Phi_1, ..., Phi_G]).
RMat group_map(int groups, int group_size);
/// Index of vec(Phi) addressed by each entry of the stacked vector.
std::vector<Eigen::Index> group_indices(int groups, int group_size);

CMat de_diagonalize(const CMat& xi, int groups, int group_size);
RankOneSum de_diagonalize(const RankOneSum& xi, int groups, int group_size);
FractionalForm de_diagonalize(const FractionalForm& form, int groups, int group_size);

/// [Phi_1, ..., Phi_G] (M x N_S) from a block-diagonal N_S x N_S matrix, and back.
CMat stack_blocks(const CMat& phi, int groups);
CMat unstack_blocks(const CMat& stacked, int groups);
/// [H^{11}, ..., H^{GG}]: the diagonal blocks of H, side by side.
CMat h_tilde(const CMat& h_bar, int groups);
/// sum_g Tr(H~_g Phi~_g); equals Tr(H_bar Phi) for block-diagonal Phi.
cdouble stacked_trace(const CMat& h_tilde_mat, const CMat& phi_stacked, int groups);

/// Effective DFBS -> RIS -> user channel h~ with noise-free y = h~^H w[l].
CVec effective_channel(const Instance& inst, int user, const CMat& phi_t, const CMat& phi_r);

/// Signed distance-like margin of the constructive-interference condition:
/// min over both half-planes of (a - t) sin(Omega) -/+ b cos(Omega), with
/// a + jb = y e^{-j angle(s)} and t = sqrt(sigma^2 Gamma). Non-negative iff y
/// lies in the CI region.
double ci_slack(cdouble y, cdouble symbol, double margin, double half_angle);

/// Worst CI slack over all active users and slots, normalised by sqrt(sigma_C^2).
double min_ci_slack(const Instance& inst, const Waveform& wf, const CMat& phi_t, const CMat& phi_r);

}  // namespace bdris
