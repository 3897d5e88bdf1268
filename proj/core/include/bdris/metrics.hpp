// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "bdris/quadforms.hpp"

namespace bdris {

inline constexpr double kDbFloor = -120.0;

/// Marcum Q-function of order 1, summed as a Poisson mixture of chi-square tails.
double marcum_q1(double a, double b);

/// Q1(sqrt(2 scnr), sqrt(-2 ln p_fa)).
double detection_probability(double scnr, double p_fa);

struct BerEstimate {
  std::vector<double> per_user;
  double average = 0.0;
  long long bits = 0;  // bits counted per user
};

/// Bit error rate of Gray-labelled PSK for a noiseless received point y whose
/// transmitted constellation index is `index`, with circular noise of power `noise`.
double simulate_point_ber(cdouble y, int index, int order, double noise, long long trials, std::mt19937_64& rng);

/// Fresh noise on the solved symbol block; users in the scenario order. Users
/// absent from active_users() (radar-only runs) are still demodulated.
BerEstimate simulate_ber(const Instance& inst, const Waveform& wf, const CMat& phi_t, const CMat& phi_r,
                         long long trials = 100000, std::uint64_t seed = 1);

struct BeampatternGrid {
  std::vector<double> angles;  // degrees, strictly increasing
  std::vector<int> rings;      // empty for a transmit beampattern
  std::vector<double> values;  // dB, angle-major: values[a * rings + r]

  double at(std::size_t angle, std::size_t ring = 0) const {
    return values[angle * std::max<std::size_t>(1, rings.size()) + ring];
  }
};

std::vector<double> angle_grid(double lo_deg, double hi_deg, double step_deg);

/// P(theta) = sum_l |a(theta)^H Phi G w[l]|^2, normalised to a 0 dB peak.
BeampatternGrid transmit_beampattern(const Instance& inst, const CMat& w, const CMat& phi,
                                     const std::vector<double>& angles);

/// |Tr(U_k^H A(theta) Phi G W J_r)|^2 over rings r = 0..L_obs - L of the target's
/// side, normalised to a 0 dB peak.
BeampatternGrid space_range_beampattern(const Instance& inst, const CMat& w, const CMat& phi_t, const CMat& phi_r,
                                        const CMat& u_k, int k, const std::vector<double>& angles);

}  // namespace bdris
