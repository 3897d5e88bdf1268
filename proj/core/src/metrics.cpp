// SPDX-License-Identifier: Apache-2.0
#include "bdris/metrics.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "bdris/admm.hpp"
#include "bdris/channel.hpp"

namespace bdris {

double marcum_q1(double a, double b) {
  if (!(a >= 0.0) || !(b >= 0.0)) throw std::domain_error("marcum_q1: arguments must be non-negative");
  if (b == 0.0) return 1.0;
  const double mu = 0.5 * a * a, x = 0.5 * b * b;
  const double log_mu = mu > 0.0 ? std::log(mu) : 0.0;
  const double log_x = std::log(x);
  auto pois = [&](long k) {
    return mu > 0.0 ? std::exp(-mu + k * log_mu - std::lgamma(k + 1.0)) : (k == 0 ? 1.0 : 0.0);
  };
  auto term = [&](long j) { return std::exp(-x + j * log_x - std::lgamma(j + 1.0)); };
  const long kmax = static_cast<long>(std::ceil(mu + 12.0 * std::sqrt(mu) + 40.0));
  // Q1 = sum_k Pois(k; mu) P(Gamma(k + 1) > x). Below the diagonal the sum is
  // taken directly, above it the complement with P(Gamma(k + 1) <= x) so that
  // values near one keep their small distance to one.
  if (a <= b) {
    double upper = 0.0, sum = 0.0;
    for (long k = 0; k <= kmax; ++k) {
      upper += term(k);
      sum += pois(k) * std::min(upper, 1.0);
    }
    return std::clamp(sum, 0.0, 1.0);
  }
  const long jmax = std::max(kmax, static_cast<long>(std::ceil(x + 12.0 * std::sqrt(x) + 40.0)));
  std::vector<double> lower(kmax + 1, 0.0);
  double acc = 0.0;
  for (long j = jmax; j >= 1; --j) {
    acc += term(j);
    if (j - 1 <= kmax) lower[j - 1] = acc;
  }
  double miss = 0.0;
  for (long k = 0; k <= kmax; ++k) miss += pois(k) * std::min(lower[k], 1.0);
  return std::clamp(1.0 - miss, 0.0, 1.0);
}

double detection_probability(double scnr, double p_fa) {
  if (!(scnr >= 0.0)) throw std::domain_error("detection_probability: scnr must be non-negative");
  if (!(p_fa > 0.0 && p_fa < 1.0)) throw std::domain_error("detection_probability: p_fa must lie in (0, 1)");
  // Q1(0, b) = exp(-b^2 / 2) = p_fa
  if (scnr == 0.0) return p_fa;
  return marcum_q1(std::sqrt(2.0 * scnr), std::sqrt(-2.0 * std::log(p_fa)));
}

namespace {

int decide(cdouble y, int order) {
  double ang = std::arg(y);
  if (ang < 0.0) ang += 2.0 * kPi;
  return std::min(order - 1, static_cast<int>(std::floor(ang * order / (2.0 * kPi))));
}

int bits_per_symbol(int order) { return std::max(1, static_cast<int>(std::bit_width(static_cast<unsigned>(order))) - 1); }

}  // namespace

double simulate_point_ber(cdouble y, int index, int order, double noise, long long trials, std::mt19937_64& rng) {
  if (trials <= 0) throw std::invalid_argument("simulate_point_ber: trials must be positive");
  std::normal_distribution<double> g(0.0, std::sqrt(noise / 2.0));
  const int sent = gray_label(index);
  long long errors = 0;
  for (long long t = 0; t < trials; ++t) {
    const cdouble r = y + cdouble(g(rng), g(rng));
    errors += std::popcount(static_cast<unsigned>(gray_label(decide(r, order)) ^ sent));
  }
  return static_cast<double>(errors) / (static_cast<double>(trials) * bits_per_symbol(order));
}

BerEstimate simulate_ber(const Instance& inst, const Waveform& wf, const CMat& phi_t, const CMat& phi_r,
                         long long trials, std::uint64_t seed) {
  if (trials <= 0) throw std::invalid_argument("simulate_ber: trials must be positive");
  const auto& s = inst.scenario;
  std::mt19937_64 rng(seed);
  BerEstimate out;
  const int users = static_cast<int>(s.users.size());
  for (int u = 0; u < users; ++u) {
    const CVec h = effective_channel(inst, u, phi_t, phi_r);
    double ber = 0.0;
    for (int l = 0; l < s.code_len; ++l) {
      const cdouble y = h.dot(wf.w.col(l));
      ber += simulate_point_ber(y, wf.symbol_index[u * s.code_len + l], s.psk_order, s.noise_comm, trials, rng);
    }
    out.per_user.push_back(ber / s.code_len);
  }
  out.bits = trials * s.code_len * bits_per_symbol(s.psk_order);
  if (users > 0) {
    for (double b : out.per_user) out.average += b;
    out.average /= users;
  }
  return out;
}

std::vector<double> angle_grid(double lo_deg, double hi_deg, double step_deg) {
  if (!(step_deg > 0.0) || !(hi_deg >= lo_deg)) throw std::invalid_argument("angle_grid: empty grid");
  const auto n = static_cast<long>(std::floor((hi_deg - lo_deg) / step_deg + 1e-9)) + 1;
  std::vector<double> out;
  for (long i = 0; i < n; ++i) out.push_back(lo_deg + i * step_deg);
  return out;
}

namespace {

void to_db(std::vector<double>& v) {
  const double peak = v.empty() ? 0.0 : *std::max_element(v.begin(), v.end());
  for (double& x : v) x = (peak > 0.0 && x > 0.0) ? std::max(kDbFloor, 10.0 * std::log10(x / peak)) : kDbFloor;
}

}  // namespace

BeampatternGrid transmit_beampattern(const Instance& inst, const CMat& w, const CMat& phi,
                                     const std::vector<double>& angles) {
  if (angles.empty()) throw std::invalid_argument("transmit_beampattern: empty grid");
  const auto& s = inst.scenario;
  const CMat pgw = phi * inst.channels.g_mat * w;
  BeampatternGrid grid;
  grid.angles = angles;
  for (double th : angles) {
    const CVec a = steering_vector(th, s.n_cells, s.spacing_ratio);
    grid.values.push_back((a.adjoint() * pgw).squaredNorm());
  }
  to_db(grid.values);
  return grid;
}

BeampatternGrid space_range_beampattern(const Instance& inst, const CMat& w, const CMat& phi_t, const CMat& phi_r,
                                        const CMat& u_k, int k, const std::vector<double>& angles) {
  if (angles.empty()) throw std::invalid_argument("space_range_beampattern: empty grid");
  const auto& s = inst.scenario;
  const Side side = s.targets.at(k).side;
  const int obs = s.obs_len(side);
  const CMat pgw = phi_for(side, phi_t, phi_r) * inst.channels.g_mat * w;
  BeampatternGrid grid;
  grid.angles = angles;
  for (int r = 0; r <= obs - s.code_len; ++r) grid.rings.push_back(r);
  for (double th : angles) {
    const CMat echo = radar_channel(th, s.n_rx, s.n_cells, s.spacing_ratio) * pgw;
    for (int r : grid.rings) {
      const CMat shifted = ShiftMatrix(r, s.code_len, obs).right_apply(echo);
      grid.values.push_back(std::norm(u_k.cwiseProduct(shifted.conjugate()).sum()));
    }
  }
  to_db(grid.values);
  return grid;
}

}  // namespace bdris
