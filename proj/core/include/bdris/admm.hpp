// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "bdris/conic.hpp"
#include "bdris/quadforms.hpp"

namespace bdris {

struct SolverConfig {
  double rho = 2.0;
  int max_iters = 200;
  double tol_scnr = 1e-4;  // relative change of the min SCNR ...
  int scnr_window = 3;     // ... over this many consecutive iterations
  double tol_feas = 1e-4;  // max_g |Phi_g - Theta_g|_F
  int sca_inner_iters = 1;
  bool adaptive_rho = false;  // residual balancing
  // Once the min SCNR has settled but the consensus residual has not, the
  // penalty is multiplied by rho_growth (1 keeps it constant), up to rho_max.
  double rho_growth = 2.0;
  double rho_max = 1e4;
  int polish_iters = 20;      // filter/waveform passes after the final projection
  std::uint64_t rng_seed = 1;
  SocpOptions socp;
};

enum class SolveStatus { Converged, MaxIterations };
std::string to_string(SolveStatus status);

struct SolveResult {
  Waveform waveform;
  BdRisState state;  // phi_t / phi_r hold the projected, exactly feasible matrices
  FilterBank filters;
  std::vector<std::vector<double>> scnr_history;  // linear, per iteration and target
  std::vector<double> feasibility_history;        // max_g |Phi_g - Theta_g|_F
  std::vector<double> objective_history;          // min_k SCNR_k, linear
  SolveStatus status = SolveStatus::MaxIterations;
  int iterations = 0;
  double gamma_star = 0.0;   // largest common QoS margin of the initial waveform
  std::vector<double> scnr;  // final per-target SCNR on the projected matrices
  int socp_failures = 0;     // sub-problems whose solution was rejected

  double min_scnr() const;
};

/// The QoS thresholds cannot be met with the initial BD-RIS matrices and the
/// power budget; gamma_star is the largest common threshold that can.
class InfeasibleError : public std::runtime_error {
 public:
  InfeasibleError(const std::string& what, double gamma_star)
      : std::runtime_error(what), gamma_star_(gamma_star) {}
  double gamma_star() const { return gamma_star_; }

 private:
  double gamma_star_;
};

/// M-PSK point with index m: exp(j (2m + 1) pi / order).
cdouble psk_point(int index, int order);
/// Gray label of constellation index m.
int gray_label(int index);
Waveform draw_symbols(int users, int code_len, int order, std::mt19937_64& rng);

/// Cells of DOUBLE-RIS: the first half only transmits, the second half only reflects.
bool cell_active(Architecture arch, Side side, int cell, int n_cells);

/// [Phi_T,g; Phi_R,g] (2M x M), and the inverse assignment.
CMat group_block(const CMat& phi_t, const CMat& phi_r, int g, int group_size);
void set_group_block(CMat& phi_t, CMat& phi_r, int g, int group_size, const CMat& block);

double unitarity_residual(const CMat& phi_t, const CMat& phi_r, int groups);
double consensus_residual(const BdRisState& state, int groups);

BdRisState init_bdris(int groups, int group_size, Architecture arch, std::mt19937_64& rng, double rho = 1.0);

struct InitialWaveform {
  CMat w;
  double gamma_star;  // +inf when no user constrains the waveform
};

/// Maximises the common CI margin Gamma over W with |W|_F^2 <= E; every user
/// sees the BD-RIS matrix of its own side.
InitialWaveform init_waveform(const Instance& inst, const CMat& phi_t, const CMat& phi_r, const CMat& symbols,
                              const SocpOptions& opt = {});

/// Principal generalised eigenvector of (interference + noise I, signal) for a
/// rank-one signal term, normalised to unit norm.
CVec principal_filter(const FractionalForm& form);
FilterBank update_filters(const Instance& inst, const CMat& w, const CMat& phi_t, const CMat& phi_r);

/// Tangent minoriser of f(w, gamma) = w^H Y w / gamma at (w_ref, gamma_ref).
double minorizer(const CVec& w, double gamma, const CVec& w_ref, double gamma_ref, const CMat& ups);
double minorizer(const CVec& w, double gamma, const CVec& w_ref, double gamma_ref, const RankOneSum& ups);

std::vector<double> scnr_all(const Instance& inst, const CMat& w, const CMat& phi_t, const CMat& phi_r,
                             const FilterBank& filters);

struct SubproblemReport {
  int solves = 0;
  int rejected = 0;
  double surrogate = 0.0;  // optimal value of the last accepted SOCP (gamma or eta)
};

/// SCA rounds of the max-min waveform SOCP with CI and power constraints.
CMat update_waveform(const Instance& inst, const Waveform& wf, const CMat& phi_t, const CMat& phi_r,
                     const FilterBank& filters, int sca_iters, const SocpOptions& opt = {},
                     SubproblemReport* report = nullptr);

/// SCA rounds of the augmented-Lagrangian phase SOCP over the stacked diagonal
/// blocks; updates state.phi_t / state.phi_r in place. The SCNR term enters as
/// ln(min SCNR / current), bounded below by 1 - current / min SCNR, which keeps
/// the penalty parameter dimensionless.
void update_phases(const Instance& inst, const Waveform& wf, const FilterBank& filters, BdRisState& state,
                   int sca_iters, const SocpOptions& opt = {}, SubproblemReport* report = nullptr);

/// argmax over Theta^H Theta = I of Re Tr(Theta^H (Lambda + rho Phi)).
CMat project_theta(const CMat& lambda, const CMat& phi, double rho);
void update_thetas(BdRisState& state, int groups);
void update_duals(BdRisState& state, int groups);

SolveResult solve(const Instance& inst, const SolverConfig& config = {});

}  // namespace bdris
