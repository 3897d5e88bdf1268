// SPDX-License-Identifier: Apache-2.0
#include "bdris/scenario.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

namespace bdris {

namespace {

constexpr double kSpeedOfLight = 3e8;

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

std::string upper(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::toupper(c); });
  return s;
}

std::vector<std::string> split_ws(const std::string& line) {
  std::istringstream in(line);
  std::vector<std::string> out;
  for (std::string tok; in >> tok;) out.push_back(tok);
  return out;
}

double to_double(const std::string& tok, int line_no) {
  try {
    std::size_t used = 0;
    const double v = std::stod(tok, &used);
    if (used != tok.size()) throw std::invalid_argument(tok);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("line " + std::to_string(line_no) + ": expected a number, got '" + tok + "'");
  }
}

int to_int(const std::string& tok, int line_no) {
  const double v = to_double(tok, line_no);
  if (std::floor(v) != v) {
    throw ConfigError("line " + std::to_string(line_no) + ": expected an integer, got '" + tok + "'");
  }
  return static_cast<int>(v);
}

Side parse_side(const std::string& tok, int line_no) {
  const auto t = upper(tok);
  if (t == "T" || t == "TRANSMISSIVE") return Side::Transmissive;
  if (t == "R" || t == "REFLECTIVE") return Side::Reflective;
  throw ConfigError("line " + std::to_string(line_no) + ": unknown side '" + tok + "'");
}

// floor() that tolerates representation error in products like 9 * (2/c) * fs
int stable_floor(double x) { return static_cast<int>(std::floor(x + 1e-9)); }

}  // namespace

std::string to_string(Side side) { return side == Side::Transmissive ? "T" : "R"; }

std::string to_string(Architecture arch) {
  switch (arch) {
    case Architecture::SingleConnected: return "CW-SC";
    case Architecture::GroupConnected: return "CW-GC";
    case Architecture::FullyConnected: return "CW-FC";
    case Architecture::DoubleRis: return "DOUBLE-RIS";
  }
  return "?";
}

Architecture parse_architecture(std::string_view tag) {
  const auto t = upper(trim(tag));
  if (t == "CW-SC") return Architecture::SingleConnected;
  if (t == "CW-GC") return Architecture::GroupConnected;
  if (t == "CW-FC") return Architecture::FullyConnected;
  if (t == "DOUBLE-RIS") return Architecture::DoubleRis;
  throw ConfigError("unknown architecture tag '" + std::string(tag) + "'");
}

double pathloss(double distance_m, double exponent, double ref_gain_linear, double ref_distance_m) {
  if (!(distance_m > 0.0)) throw std::invalid_argument("pathloss: distance must be positive");
  return ref_gain_linear * std::pow(distance_m / ref_distance_m, -exponent);
}

std::vector<int> Scenario::active_users() const {
  std::vector<int> out;
  if (radar_only) return out;
  for (int u = 0; u < static_cast<int>(users.size()); ++u) out.push_back(u);
  return out;
}

std::vector<int> Scenario::targets_on(Side side) const {
  std::vector<int> out;
  for (int k = 0; k < static_cast<int>(targets.size()); ++k)
    if (targets[k].side == side) out.push_back(k);
  return out;
}

std::vector<int> Scenario::clutters_on(Side side) const {
  std::vector<int> out;
  for (int q = 0; q < static_cast<int>(clutters.size()); ++q)
    if (clutters[q].side == side) out.push_back(q);
  return out;
}

std::vector<double> expand_interval(std::string_view token, int count) {
  if (count < 1) throw ConfigError("interval count must be >= 1");
  const auto tok = trim(token);
  if (!tok.empty() && tok.front() == '[') {
    if (tok.back() != ']') throw ConfigError("malformed interval '" + tok + "'");
    const auto body = tok.substr(1, tok.size() - 2);
    const auto colon = body.find(':');
    if (colon == std::string::npos) throw ConfigError("malformed interval '" + tok + "'");
    const double lo = to_double(trim(body.substr(0, colon)), 0);
    const double hi = to_double(trim(body.substr(colon + 1)), 0);
    std::vector<double> out(count);
    for (int i = 0; i < count; ++i) {
      out[i] = count == 1 ? 0.5 * (lo + hi) : lo + (hi - lo) * i / (count - 1);
    }
    return out;
  }
  return std::vector<double>(count, to_double(tok, 0));
}

void derive_rings(Scenario& s) {
  for (const Side side : {Side::Transmissive, Side::Reflective}) {
    const auto ks = s.targets_on(side);
    int& obs = side == Side::Transmissive ? s.obs_len_t : s.obs_len_r;
    if (ks.empty()) {
      obs = s.code_len;
      continue;
    }
    double min_delay = std::numeric_limits<double>::infinity();
    for (int k : ks) min_delay = std::min(min_delay, 2.0 * s.targets[k].range_m / kSpeedOfLight);
    int max_ring = 0;
    int min_ring = std::numeric_limits<int>::max();
    for (int k : ks) {
      const double delay = 2.0 * s.targets[k].range_m / kSpeedOfLight;
      s.targets[k].ring = stable_floor((delay - min_delay) * s.sample_rate);
      max_ring = std::max(max_ring, s.targets[k].ring);
      min_ring = std::min(min_ring, s.targets[k].ring);
    }
    for (int q : s.clutters_on(side)) {
      const double delay = 2.0 * s.clutters[q].range_m / kSpeedOfLight;
      s.clutters[q].ring = stable_floor((delay - min_delay) * s.sample_rate);
    }
    obs = s.code_len + max_ring - min_ring;
  }
}

void derive_powers(Scenario& s) {
  const double ref = db_to_linear(s.pathloss.ref_gain_db);
  const double d0 = s.pathloss.ref_distance_m;
  for (auto& t : s.targets) {
    const double one_way = pathloss(t.range_m, s.pathloss.exp_ris_target, ref, d0);
    t.power = db_to_linear(t.rcs_db) * one_way * one_way;
  }
  for (auto& c : s.clutters) {
    const double one_way = pathloss(c.range_m, s.pathloss.exp_ris_clutter, ref, d0);
    c.power = db_to_linear(c.rcs_db) * one_way * one_way;
  }
}

void validate(const Scenario& s) {
  auto require = [](bool ok, const std::string& msg) {
    if (!ok) throw ConfigError(msg);
  };
  require(s.n_tx >= 1 && s.n_cells >= 1 && s.n_rx >= 1 && s.code_len >= 1, "dimensions must be positive");
  require(s.psk_order >= 2, "psk_order must be >= 2");
  require(s.groups >= 1 && s.n_cells % s.groups == 0,
          "n_cells (" + std::to_string(s.n_cells) + ") must be divisible by groups (" +
              std::to_string(s.groups) + ")");
  require(s.power_budget > 0.0, "power budget must be positive");
  require(s.noise_comm > 0.0 && s.noise_radar > 0.0, "noise variances must be positive");
  require(s.sample_rate > 0.0, "sample rate must be positive");
  require(!s.targets.empty(), "scenario needs at least one target");
  if (s.arch == Architecture::DoubleRis) {
    require(s.n_cells % 2 == 0, "DOUBLE-RIS needs an even number of cells");
    require(s.groups == s.n_cells, "DOUBLE-RIS is single-connected");
  }
  if (s.arch == Architecture::SingleConnected) require(s.groups == s.n_cells, "CW-SC needs groups == n_cells");
  if (s.arch == Architecture::FullyConnected) require(s.groups == 1, "CW-FC needs groups == 1");
  for (const auto& u : s.users) require(u.distance_m > 0.0, "user distance must be positive");
  for (const auto& t : s.targets) {
    require(t.range_m > 0.0, "target range must be positive");
    require(t.power > 0.0, "target power must be positive");
    require(t.ring >= 0, "target ring must be non-negative");
  }
  for (const auto& c : s.clutters) {
    require(c.range_m > 0.0, "clutter range must be positive");
    require(c.power > 0.0, "clutter power must be positive");
  }
}

void set_architecture(Scenario& s, Architecture arch, std::optional<int> groups) {
  switch (arch) {
    case Architecture::SingleConnected:
    case Architecture::DoubleRis: s.groups = s.n_cells; break;
    case Architecture::FullyConnected: s.groups = 1; break;
    case Architecture::GroupConnected:
      if (groups) s.groups = *groups;
      break;
  }
  s.arch = arch;
  if (arch == Architecture::GroupConnected) {
    if (s.groups == s.n_cells) s.arch = Architecture::SingleConnected;
    else if (s.groups == 1) s.arch = Architecture::FullyConnected;
  }
  validate(s);
}

Scenario load_scenario(std::string_view text) {
  Scenario s;
  std::string section;
  std::map<std::string, std::string> system;
  std::map<std::string, std::string> pl;
  std::string arch_tag;
  std::optional<int> groups;

  std::istringstream in{std::string(text)};
  int line_no = 0;
  for (std::string raw; std::getline(in, raw);) {
    ++line_no;
    auto line = trim(raw.substr(0, raw.find('#')));
    if (line.empty()) continue;
    if (line.front() == '[' && line.back() == ']' && line.find(':') == std::string::npos) {
      section = trim(line.substr(1, line.size() - 2));
      if (section != "system" && section != "users" && section != "targets" && section != "clutters" &&
          section != "pathloss") {
        throw ConfigError("line " + std::to_string(line_no) + ": unknown section [" + section + "]");
      }
      continue;
    }
    if (section.empty()) throw ConfigError("line " + std::to_string(line_no) + ": entry outside a section");

    if (section == "system" || section == "pathloss") {
      const auto eq = line.find('=');
      if (eq == std::string::npos) throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
      auto& dst = section == "system" ? system : pl;
      dst[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
      continue;
    }

    const auto tok = split_ws(line);
    if (section == "users") {
      // side distance_m [azimuth_deg|*] [qos_db]
      if (tok.size() < 2 || tok.size() > 4) throw ConfigError("line " + std::to_string(line_no) + ": bad user row");
      User u;
      u.side = parse_side(tok[0], line_no);
      u.distance_m = to_double(tok[1], line_no);
      if (tok.size() >= 3 && tok[2] != "*") u.azimuth_deg = to_double(tok[2], line_no);
      if (tok.size() == 4) u.qos_db = to_double(tok[3], line_no);
      s.users.push_back(u);
    } else if (section == "targets") {
      // side range_m azimuth_deg rcs_db
      if (tok.size() != 4) throw ConfigError("line " + std::to_string(line_no) + ": bad target row");
      Target t;
      t.side = parse_side(tok[0], line_no);
      t.range_m = to_double(tok[1], line_no);
      t.azimuth_deg = to_double(tok[2], line_no);
      t.rcs_db = to_double(tok[3], line_no);
      s.targets.push_back(t);
    } else {
      // side count range_m|[a:b] azimuth_deg|[a:b] rcs_db
      if (tok.size() != 5) throw ConfigError("line " + std::to_string(line_no) + ": bad clutter row");
      const Side side = parse_side(tok[0], line_no);
      const int count = to_int(tok[1], line_no);
      if (count < 1) throw ConfigError("line " + std::to_string(line_no) + ": clutter count must be >= 1");
      const auto ranges = expand_interval(tok[2], count);
      const auto angles = expand_interval(tok[3], count);
      const double rcs = to_double(tok[4], line_no);
      for (int i = 0; i < count; ++i) {
        Clutter c;
        c.side = side;
        c.range_m = ranges[i];
        c.azimuth_deg = angles[i];
        c.rcs_db = rcs;
        s.clutters.push_back(c);
      }
    }
  }

  auto take = [&](std::map<std::string, std::string>& m, const std::string& key) -> std::optional<std::string> {
    auto it = m.find(key);
    if (it == m.end()) return std::nullopt;
    auto v = it->second;
    m.erase(it);
    return v;
  };
  auto num = [&](std::map<std::string, std::string>& m, const std::string& key, double& dst) {
    if (auto v = take(m, key)) dst = to_double(*v, 0);
  };
  auto inum = [&](std::map<std::string, std::string>& m, const std::string& key, int& dst) {
    if (auto v = take(m, key)) dst = to_int(*v, 0);
  };

  inum(system, "n_tx", s.n_tx);
  inum(system, "n_cells", s.n_cells);
  inum(system, "n_rx", s.n_rx);
  inum(system, "code_len", s.code_len);
  inum(system, "psk_order", s.psk_order);
  num(system, "power_w", s.power_budget);
  double noise_comm_dbm = -100.0;
  double noise_radar_dbm = -100.0;
  num(system, "noise_comm_dbm", noise_comm_dbm);
  num(system, "noise_radar_dbm", noise_radar_dbm);
  s.noise_comm = dbm_to_watts(noise_comm_dbm);
  s.noise_radar = dbm_to_watts(noise_radar_dbm);
  num(system, "qos_db", s.qos_db);
  if (auto v = take(system, "groups")) groups = to_int(*v, 0);
  if (auto v = take(system, "arch")) arch_tag = *v;
  num(system, "sample_rate_hz", s.sample_rate);
  num(system, "bs_distance_m", s.bs_distance_m);
  num(system, "rician_k_db", s.rician_k_db);
  num(system, "spacing_ratio", s.spacing_ratio);
  if (auto v = take(system, "rng_seed")) s.rng_seed = static_cast<std::uint64_t>(to_int(*v, 0));
  if (!system.empty()) throw ConfigError("unknown [system] key '" + system.begin()->first + "'");

  num(pl, "ref_gain_db", s.pathloss.ref_gain_db);
  num(pl, "ref_distance_m", s.pathloss.ref_distance_m);
  num(pl, "exp_bs_ris", s.pathloss.exp_bs_ris);
  num(pl, "exp_ris_user", s.pathloss.exp_ris_user);
  num(pl, "exp_ris_target", s.pathloss.exp_ris_target);
  num(pl, "exp_ris_clutter", s.pathloss.exp_ris_clutter);
  if (!pl.empty()) throw ConfigError("unknown [pathloss] key '" + pl.begin()->first + "'");

  if (s.targets.empty()) throw ConfigError("scenario needs at least one target");
  if (groups && (*groups < 1 || s.n_cells % *groups != 0)) {
    throw ConfigError("n_cells (" + std::to_string(s.n_cells) + ") must be divisible by groups (" +
                      std::to_string(*groups) + ")");
  }

  derive_rings(s);
  derive_powers(s);

  Architecture arch = Architecture::GroupConnected;
  if (!arch_tag.empty()) {
    if (upper(arch_tag) == "RADAR-ONLY") {
      s.radar_only = true;
    } else {
      arch = parse_architecture(arch_tag);
    }
  } else if (!groups) {
    arch = Architecture::FullyConnected;
  }
  if (!groups) groups = arch == Architecture::GroupConnected ? 1 : std::optional<int>{};
  set_architecture(s, arch, groups);
  return s;
}

Scenario load_scenario_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open scenario file '" + path.string() + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return load_scenario(buf.str());
}

}  // namespace bdris
