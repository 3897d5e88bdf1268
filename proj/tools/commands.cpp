// SPDX-License-Identifier: Apache-2.0
#include "commands.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

#include "bdris/metrics.hpp"
#include "json.hpp"

namespace bdris::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string fmt_g(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

std::string db_field(double linear) { return linear > 0.0 ? format_number(to_db(linear)) : ""; }

std::string scenario_label(const Scenario& s) {
  std::string out = to_string(s.arch);
  if (s.arch == Architecture::GroupConnected) out += ":" + std::to_string(s.groups);
  if (s.radar_only) out += "+radar-only";
  return out;
}

void report(std::ostream& log, const SolveResult& r) {
  log << "status " << to_string(r.status) << " after " << r.iterations << " iterations, min SCNR "
      << fmt_g(to_db(r.min_scnr())) << " dB (";
  for (std::size_t k = 0; k < r.scnr.size(); ++k) log << (k ? ", " : "") << fmt_g(to_db(r.scnr[k]));
  log << ")\n";
}

}  // namespace

int cmd_solve(const SolveOptions& o, std::ostream& log) {
  try {
    const auto inst = build_instance(o.run);
    const auto cfg = solver_config(o.run, o.config);
    try {
      const auto r = solve(inst, cfg);
      write_result(o.out, o.run, cfg, r);
      report(log, r);
      return r.status == SolveStatus::Converged ? kOk : kMaxIterations;
    } catch (const InfeasibleError& e) {
      write_infeasible(o.out, o.run, cfg, e.gamma_star());
      log << "infeasible: " << e.what() << "; largest common threshold " << fmt_g(to_db(e.gamma_star()))
          << " dB\n";
      return kInfeasible;
    }
  } catch (const std::exception& e) {
    log << "error: " << e.what() << "\n";
    return kError;
  }
}

std::string ArchChoice::label() const {
  std::string out = arch ? to_string(*arch) : "scenario";
  if (groups) out += ":" + std::to_string(*groups);
  if (radar_only) out += "+radar-only";
  return out;
}

std::string to_string(SweepKind kind) {
  switch (kind) {
    case SweepKind::Gamma: return "gamma";
    case SweepKind::Power: return "power";
    case SweepKind::Groups: return "groups";
    case SweepKind::Cells: return "cells";
    case SweepKind::None: return "none";
  }
  return "none";
}

namespace {

SweepKind parse_kind(const std::string& tag) {
  for (auto k : {SweepKind::Gamma, SweepKind::Power, SweepKind::Groups, SweepKind::Cells, SweepKind::None})
    if (to_string(k) == tag) return k;
  throw ConfigError("unknown sweep kind '" + tag + "'");
}

const char* value_column(SweepKind kind) {
  switch (kind) {
    case SweepKind::Gamma: return "gamma_db";
    case SweepKind::Power: return "power_w";
    case SweepKind::Groups: return "groups";
    case SweepKind::Cells: return "n_cells";
    case SweepKind::None: return "point";
  }
  return "point";
}

ArchChoice parse_arch(const json& j) {
  ArchChoice a;
  if (j.is_string()) {
    const auto tag = j.get<std::string>();
    const auto colon = tag.find(':');
    a.arch = parse_architecture(tag.substr(0, colon));
    if (colon != std::string::npos) a.groups = std::stoi(tag.substr(colon + 1));
    return a;
  }
  if (!j.is_object()) throw ConfigError("architecture entries must be strings or objects");
  for (const auto& [key, v] : j.items()) {
    if (key == "arch")
      a.arch = parse_architecture(v.get<std::string>());
    else if (key == "groups")
      a.groups = v.get<int>();
    else if (key == "radar_only")
      a.radar_only = v.get<bool>();
    else
      throw ConfigError("unknown architecture key '" + key + "'");
  }
  return a;
}

void parse_solver(const json& j, SolverConfig& c) {
  for (const auto& [key, v] : j.items()) {
    if (key == "rho") c.rho = v.get<double>();
    else if (key == "max_iters") c.max_iters = v.get<int>();
    else if (key == "tol_scnr") c.tol_scnr = v.get<double>();
    else if (key == "scnr_window") c.scnr_window = v.get<int>();
    else if (key == "tol_feas") c.tol_feas = v.get<double>();
    else if (key == "sca_inner_iters") c.sca_inner_iters = v.get<int>();
    else if (key == "adaptive_rho") c.adaptive_rho = v.get<bool>();
    else if (key == "rho_growth") c.rho_growth = v.get<double>();
    else if (key == "rho_max") c.rho_max = v.get<double>();
    else if (key == "polish_iters") c.polish_iters = v.get<int>();
    else throw ConfigError("unknown solver key '" + key + "'");
  }
}

bool is_integer(double v) { return v == std::floor(v) && v >= 1.0 && v < 1e6; }

}  // namespace

ExperimentSpec load_experiment(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open sweep spec '" + path.string() + "'");
  const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  ExperimentSpec spec;
  spec.digest = text_digest(text);
  spec.name = path.stem().string();
  try {
    const json j = json::parse(text);
    for (const auto& [key, v] : j.items()) {
      if (key == "name") spec.name = v.get<std::string>();
      else if (key == "scenario") spec.scenario = v.get<std::string>();
      else if (key == "out") spec.out = v.get<std::string>();
      else if (key == "sweep") {
        spec.kind = parse_kind(v.at("kind").get<std::string>());
        if (v.contains("values")) spec.values = v.at("values").get<std::vector<double>>();
      } else if (key == "architectures") {
        for (const auto& a : v) spec.architectures.push_back(parse_arch(a));
      } else if (key == "seeds") spec.seeds = v.get<std::vector<std::uint64_t>>();
      else if (key == "qos_db") spec.qos_db = v.get<double>();
      else if (key == "power_w") spec.power_w = v.get<double>();
      else if (key == "n_cells") spec.n_cells = v.get<int>();
      else if (key == "solver") parse_solver(v, spec.solver);
      else throw ConfigError("unknown sweep spec key '" + key + "'");
    }
  } catch (const json::exception& e) {
    throw ConfigError("malformed sweep spec '" + path.string() + "': " + e.what());
  }
  if (spec.scenario.empty()) throw ConfigError("sweep spec: 'scenario' is required");
  if (spec.out.empty()) throw ConfigError("sweep spec: 'out' is required");
  if (spec.scenario.is_relative()) spec.scenario = path.parent_path() / spec.scenario;
  if (spec.kind == SweepKind::None) {
    if (spec.values.empty()) spec.values = {0.0};
    if (spec.values.size() != 1) throw ConfigError("sweep spec: kind 'none' takes at most one value");
  }
  if (spec.values.empty()) throw ConfigError("sweep spec: sweep values must not be empty");
  if (spec.kind == SweepKind::Groups || spec.kind == SweepKind::Cells)
    for (double v : spec.values)
      if (!is_integer(v)) throw ConfigError("sweep spec: " + to_string(spec.kind) + " values must be positive integers");
  if (spec.kind == SweepKind::Power)
    for (double v : spec.values)
      if (!(v >= 0.0)) throw ConfigError("sweep spec: power values must be non-negative");
  if (spec.seeds.empty()) spec.seeds = {1};
  if (spec.architectures.empty()) spec.architectures.emplace_back();
  return spec;
}

RunSpec point_run(const ExperimentSpec& spec, const ArchChoice& arch, double value, std::uint64_t seed) {
  RunSpec run;
  run.scenario = spec.scenario;
  run.arch = arch.arch;
  run.groups = arch.groups;
  run.radar_only = arch.radar_only;
  run.qos_db = spec.qos_db;
  run.power_w = spec.power_w;
  run.n_cells = spec.n_cells;
  run.seed = seed;
  switch (spec.kind) {
    case SweepKind::Gamma: run.qos_db = value; break;
    case SweepKind::Power: run.power_w = value; break;
    case SweepKind::Groups: run.groups = static_cast<int>(value); break;
    case SweepKind::Cells: run.n_cells = static_cast<int>(value); break;
    case SweepKind::None: break;
  }
  return run;
}

int worker_count() {
  const char* env = std::getenv("BDRIS_WORKERS");
  if (!env || !*env) return 1;
  char* end = nullptr;
  const long n = std::strtol(env, &end, 10);
  if (*end != '\0' || n < 1) throw ConfigError("BDRIS_WORKERS must be a positive integer");
  return static_cast<int>(std::min<long>(n, 256));
}

namespace {

void solve_point(const ExperimentSpec& spec, SweepPoint& p) {
  try {
    const RunSpec run = point_run(spec, p.arch, p.value, p.seed);
    const auto inst = build_instance(run);
    const auto cfg = solver_config(run, spec.solver);
    try {
      const auto r = solve(inst, cfg);
      write_result(p.dir, run, cfg, r);
      p.status = to_string(r.status);
      p.iterations = r.iterations;
      p.min_scnr = r.min_scnr();
      p.gamma_star = r.gamma_star;
    } catch (const InfeasibleError& e) {
      write_infeasible(p.dir, run, cfg, e.gamma_star());
      p.status = "infeasible";
      p.gamma_star = e.gamma_star();
      p.message = e.what();
    }
  } catch (const std::exception& e) {
    p.status = "error";
    p.message = e.what();
  }
}

bool usable(const SweepPoint& p) { return p.status == "converged" || p.status == "max_iterations"; }

void write_points_csv(const ExperimentSpec& spec, const std::vector<SweepPoint>& points) {
  std::ofstream out(spec.out / (spec.name + "_points.csv"), std::ios::binary);
  if (!out) throw ConfigError("cannot write into '" + spec.out.string() + "'");
  out << "arch," << value_column(spec.kind) << ",seed,status,iterations,min_scnr_db,gamma_star_db,dir,message\n";
  for (const auto& p : points)
    out << csv_field(p.arch.label()) << ',' << fmt_g(p.value) << ',' << p.seed << ',' << p.status << ','
        << p.iterations << ',' << (usable(p) ? db_field(p.min_scnr) : "") << ',' << db_field(p.gamma_star) << ','
        << csv_field(fs::relative(p.dir, spec.out).generic_string()) << ',' << csv_field(p.message) << "\n";
}

std::string file_token(std::string label) {
  for (char& c : label)
    if (c == ':' || c == '+') c = '_';
  return label;
}

void write_arch_csv(const ExperimentSpec& spec, const ArchChoice& arch, const std::vector<SweepPoint>& points,
                    const std::string& scenario_digest) {
  std::ofstream out(spec.out / (spec.name + "_" + file_token(arch.label()) + ".csv"), std::ios::binary);
  if (!out) throw ConfigError("cannot write into '" + spec.out.string() + "'");
  out << "# bdris " << BDRIS_VERSION_STRING << "; sweep=" << spec.name << "; kind=" << to_string(spec.kind)
      << "; arch=" << arch.label() << "; seeds=";
  for (std::size_t i = 0; i < spec.seeds.size(); ++i) out << (i ? " " : "") << spec.seeds[i];
  out << "; spec=" << spec.digest << "; scenario=" << scenario_digest << "\n";
  out << value_column(spec.kind) << ",min_scnr_db,seeds_ok,seeds_total,status\n";
  for (double v : spec.values) {
    double sum = 0.0;
    int ok = 0, total = 0, converged = 0, infeasible = 0;
    for (const auto& p : points) {
      if (p.arch.label() != arch.label() || p.value != v) continue;
      ++total;
      if (usable(p)) {
        sum += p.min_scnr;
        ++ok;
      }
      converged += p.status == "converged";
      infeasible += p.status == "infeasible";
    }
    std::string status = "ok";
    if (ok == 0) status = infeasible == total ? "infeasible" : "error";
    else if (converged < total) status = "partial";
    out << fmt_g(v) << ',' << (ok ? db_field(sum / ok) : "") << ',' << ok << ',' << total << ',' << status << "\n";
  }
}

}  // namespace

std::vector<SweepPoint> run_sweep(const ExperimentSpec& spec, int workers, std::ostream& log) {
  fs::create_directories(spec.out);
  {
    std::ofstream probe(spec.out / ".write-test");
    if (!probe) throw ConfigError("output directory '" + spec.out.string() + "' is not writable");
  }
  fs::remove(spec.out / ".write-test");
  const std::string scenario_digest = file_digest(spec.scenario);

  std::vector<SweepPoint> points;
  for (const auto& a : spec.architectures)
    for (double v : spec.values)
      for (auto seed : spec.seeds) {
        SweepPoint p;
        p.arch = a;
        p.value = v;
        p.seed = seed;
        p.dir = spec.out / "points" / (file_token(a.label()) + "_" + fmt_g(v) + "_s" + std::to_string(seed));
        points.push_back(p);
      }

  std::atomic<std::size_t> next{0};
  std::mutex log_mutex;
  auto work = [&] {
    for (std::size_t i; (i = next++) < points.size();) {
      solve_point(spec, points[i]);
      const auto& p = points[i];
      std::lock_guard lock(log_mutex);
      log << "[" << i + 1 << "/" << points.size() << "] " << p.arch.label() << " " << value_column(spec.kind) << "="
          << fmt_g(p.value) << " seed=" << p.seed << ": " << p.status;
      if (usable(p)) log << ", min SCNR " << fmt_g(to_db(p.min_scnr)) << " dB";
      if (!p.message.empty()) log << " (" << p.message << ")";
      log << "\n";
    }
  };
  const int n = std::max(1, std::min<int>(workers, static_cast<int>(points.size())));
  std::vector<std::thread> pool;
  for (int t = 1; t < n; ++t) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();

  write_points_csv(spec, points);
  for (const auto& a : spec.architectures) write_arch_csv(spec, a, points, scenario_digest);
  return points;
}

int cmd_sweep(const fs::path& spec_path, int workers, std::ostream& log) {
  try {
    const auto spec = load_experiment(spec_path);
    const auto points = run_sweep(spec, workers, log);
    const auto failed = std::count_if(points.begin(), points.end(), [](const SweepPoint& p) { return !usable(p); });
    log << points.size() - failed << "/" << points.size() << " points solved; CSVs in " << spec.out.string() << "\n";
    return kOk;
  } catch (const std::exception& e) {
    log << "error: " << e.what() << "\n";
    return kError;
  }
}

MetricKind parse_metric(std::string_view tag) {
  if (tag == "ber") return MetricKind::Ber;
  if (tag == "txbp") return MetricKind::TxBeampattern;
  if (tag == "srbp") return MetricKind::SrBeampattern;
  if (tag == "pd") return MetricKind::Detection;
  if (tag == "convergence") return MetricKind::Convergence;
  throw ConfigError("unknown metric '" + std::string(tag) + "'");
}

std::vector<fs::path> result_dirs(const fs::path& root) {
  if (!fs::exists(root)) throw ConfigError("'" + root.string() + "' does not exist");
  if (fs::exists(root / "result.json")) return {root};
  std::vector<fs::path> out;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_directory() && fs::exists(e.path() / "result.json")) out.push_back(e.path());
  if (out.empty()) throw ConfigError("no result.json under '" + root.string() + "'");
  std::sort(out.begin(), out.end());
  return out;
}

namespace {

struct Loaded {
  fs::path dir;
  StoredResult stored;
  Scenario scenario;
};

Loaded load(const fs::path& dir) {
  Loaded l{dir, read_result(dir), {}};
  l.scenario = build_scenario(l.stored.run);
  return l;
}

Loaded load_single(const MetricsOptions& o, const char* what) {
  const auto dirs = result_dirs(o.in);
  if (dirs.size() != 1) throw ConfigError(std::string(what) + " needs a single result directory");
  auto l = load(dirs.front());
  if (l.stored.status == "infeasible") throw ConfigError("'" + l.dir.string() + "' holds an infeasible run");
  return l;
}

void metric_ber(const MetricsOptions& o, std::ostream& out, std::ostream& log) {
  struct Acc {
    double sum = 0.0;
    long long bits = 0;
    int points = 0, skipped = 0;
  };
  std::map<std::pair<std::string, double>, Acc> rows;
  for (const auto& dir : result_dirs(o.in)) {
    const auto l = load(dir);
    auto& acc = rows[{scenario_label(l.scenario), l.scenario.qos_db}];
    if (l.stored.status == "infeasible") {
      ++acc.skipped;
      continue;
    }
    const auto inst = Instance::make(l.scenario);
    const auto ber = simulate_ber(inst, l.stored.waveform, l.stored.phi_t, l.stored.phi_r, o.trials, o.noise_seed);
    acc.sum += ber.average;
    acc.bits += ber.bits * static_cast<long long>(ber.per_user.size());
    ++acc.points;
    log << dir.string() << ": BER " << fmt_g(ber.average) << "\n";
  }
  out << "arch,gamma_db,ber,bits,points,skipped\n";
  for (const auto& [key, acc] : rows)
    out << csv_field(key.first) << ',' << fmt_g(key.second) << ','
        << (acc.points ? format_number(acc.sum / acc.points) : "") << ',' << acc.bits << ',' << acc.points << ','
        << acc.skipped << "\n";
}

void metric_txbp(const MetricsOptions& o, std::ostream& out) {
  const auto l = load_single(o, "txbp");
  const auto inst = Instance::make(l.scenario);
  const auto grid = angle_grid(-90.0, 90.0, o.step_deg);
  const auto t = transmit_beampattern(inst, l.stored.waveform.w, l.stored.phi_t, grid);
  const auto r = transmit_beampattern(inst, l.stored.waveform.w, l.stored.phi_r, grid);
  out << "angle_deg,transmissive_db,reflective_db\n";
  for (std::size_t i = 0; i < grid.size(); ++i)
    out << fmt_g(grid[i]) << ',' << format_number(t.values[i]) << ',' << format_number(r.values[i]) << "\n";
}

void metric_srbp(const MetricsOptions& o, std::ostream& out, std::ostream& log) {
  const auto l = load_single(o, "srbp");
  const int targets = static_cast<int>(l.scenario.targets.size());
  if (!o.target || *o.target < 1 || *o.target > targets)
    throw ConfigError("srbp needs --target between 1 and " + std::to_string(targets));
  const int k = *o.target - 1;
  const auto inst = Instance::make(l.scenario);
  const auto grid = angle_grid(-90.0, 90.0, o.step_deg);
  const auto bp = space_range_beampattern(inst, l.stored.waveform.w, l.stored.phi_t, l.stored.phi_r,
                                          l.stored.filters.u.at(k), k, grid);
  out << "angle_deg,ring,gain_db\n";
  std::size_t best = 0;
  for (std::size_t a = 0; a < grid.size(); ++a)
    for (std::size_t r = 0; r < bp.rings.size(); ++r) {
      const double v = bp.at(a, r);
      if (v > bp.values[best]) best = a * bp.rings.size() + r;
      out << fmt_g(grid[a]) << ',' << bp.rings[r] << ',' << format_number(v) << "\n";
    }
  const auto& t = l.scenario.targets[k];
  log << "target " << *o.target << " at " << fmt_g(t.azimuth_deg) << " deg, ring " << t.ring << "; peak at "
      << fmt_g(grid[best / bp.rings.size()]) << " deg, ring " << bp.rings[best % bp.rings.size()] << "\n";
}

void metric_pd(const MetricsOptions& o, std::ostream& out) {
  out << "arch,gamma_db,seed,target,scnr_db,p_fa,p_d\n";
  for (const auto& dir : result_dirs(o.in)) {
    const auto l = load(dir);
    if (l.stored.status == "infeasible") continue;
    for (std::size_t k = 0; k < l.stored.scnr.size(); ++k)
      for (double pfa : o.p_fa)
        out << csv_field(scenario_label(l.scenario)) << ',' << fmt_g(l.scenario.qos_db) << ',' << l.stored.run.seed
            << ',' << k + 1 << ',' << format_number(to_db(l.stored.scnr[k])) << ',' << fmt_g(pfa) << ','
            << format_number(detection_probability(l.stored.scnr[k], pfa)) << "\n";
  }
}

void metric_convergence(const MetricsOptions& o, std::ostream& out) {
  const auto dirs = result_dirs(o.in);
  auto slurp = [](const fs::path& dir) {
    std::ifstream in(dir / "convergence.csv", std::ios::binary);
    if (!in) throw ConfigError("no convergence.csv in '" + dir.string() + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  };
  if (dirs.size() == 1) {
    load(dirs.front());
    out << slurp(dirs.front());
    return;
  }
  out << "point,iteration,min_scnr_db,feasibility\n";
  for (const auto& dir : dirs) {
    if (load(dir).stored.status == "infeasible") continue;
    std::istringstream lines(slurp(dir));
    std::string line;
    std::getline(lines, line);
    const auto point = csv_field(fs::relative(dir, o.in).generic_string());
    while (std::getline(lines, line)) {
      const auto third = line.find(',', line.find(',', line.find(',') + 1) + 1);
      out << point << ',' << line.substr(0, third) << "\n";
    }
  }
}

}  // namespace

int cmd_metrics(const MetricsOptions& o, std::ostream& out, std::ostream& log) {
  try {
    std::ostringstream buf;
    switch (o.which) {
      case MetricKind::Ber: metric_ber(o, buf, log); break;
      case MetricKind::TxBeampattern: metric_txbp(o, buf); break;
      case MetricKind::SrBeampattern: metric_srbp(o, buf, log); break;
      case MetricKind::Detection: metric_pd(o, buf); break;
      case MetricKind::Convergence: metric_convergence(o, buf); break;
    }
    out << buf.str();
    return kOk;
  } catch (const std::exception& e) {
    log << "error: " << e.what() << "\n";
    return kError;
  }
}

}  // namespace bdris::cli
