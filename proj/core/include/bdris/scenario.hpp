// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "bdris/types.hpp"

namespace bdris {

enum class Side { Transmissive, Reflective };

/// BD-RIS connection topology. RADAR-ONLY is not a topology; it is carried by
/// Scenario::radar_only and combines with any of these.
enum class Architecture { SingleConnected, GroupConnected, FullyConnected, DoubleRis };

std::string to_string(Side side);
std::string to_string(Architecture arch);
Architecture parse_architecture(std::string_view tag);

struct PathlossModel {
  double ref_gain_db = -30.0;
  double ref_distance_m = 1.0;
  double exp_bs_ris = 2.2;
  double exp_ris_user = 2.2;
  double exp_ris_target = 2.0;
  double exp_ris_clutter = 2.0;
};

/// Linear power gain ref_gain * (d / d0)^(-exponent).
double pathloss(double distance_m, double exponent, double ref_gain_linear = 1e-3,
                double ref_distance_m = 1.0);

struct User {
  Side side = Side::Transmissive;
  double distance_m = 16.0;
  std::optional<double> azimuth_deg;  // drawn from the scenario seed when absent
  std::optional<double> qos_db;
};

struct Scatterer {
  Side side = Side::Transmissive;
  double range_m = 0.0;
  double azimuth_deg = 0.0;
  double rcs_db = 0.0;
  int ring = 0;        // delay offset in samples relative to the earliest same-side target
  double power = 0.0;  // expected propagation power, linear
};

using Target = Scatterer;
using Clutter = Scatterer;

struct Scenario {
  int n_tx = 8;
  int n_cells = 16;
  int n_rx = 8;
  int code_len = 16;
  int psk_order = 4;
  double power_budget = 10.0;  // W
  double noise_comm = 1e-13;   // W, per user
  double noise_radar = 1e-13;  // W
  double qos_db = 0.0;
  int groups = 1;
  Architecture arch = Architecture::FullyConnected;
  bool radar_only = false;
  std::vector<User> users;
  std::vector<Target> targets;
  std::vector<Clutter> clutters;
  PathlossModel pathloss;
  double sample_rate = 150e6;
  double bs_distance_m = 20.0;
  double rician_k_db = 3.0;
  double spacing_ratio = 0.5;
  std::uint64_t rng_seed = 1;
  int obs_len_t = 0;
  int obs_len_r = 0;

  int group_size() const { return n_cells / groups; }
  int obs_len(Side side) const { return side == Side::Transmissive ? obs_len_t : obs_len_r; }
  double qos_linear(const User& user) const { return db_to_linear(user.qos_db.value_or(qos_db)); }
  double half_angle() const { return kPi / psk_order; }
  /// Users that carry CI constraints; empty in radar-only mode.
  std::vector<int> active_users() const;
  std::vector<int> targets_on(Side side) const;
  std::vector<int> clutters_on(Side side) const;
};

/// Parses the sectioned key/value scenario format and returns a validated
/// scenario with rings, observation lengths and propagation powers filled in.
Scenario load_scenario(std::string_view config_text);
Scenario load_scenario_file(const std::filesystem::path& path);

/// Sets groups/arch consistently (G = N_S resolves to single-connected, G = 1 to
/// fully-connected) and re-validates.
void set_architecture(Scenario& scenario, Architecture arch, std::optional<int> groups = {});

/// Computes integer range rings for every target/clutter and the per-side
/// observation length L_obs = L + max ring - min ring.
void derive_rings(Scenario& scenario);

/// Expected propagation power of each scatterer: rcs * pathloss(range)^2.
void derive_powers(Scenario& scenario);

void validate(const Scenario& scenario);

/// Expands "[a:b]" into `count` evenly spaced values, or a scalar into `count` copies.
std::vector<double> expand_interval(std::string_view token, int count);

}  // namespace bdris
