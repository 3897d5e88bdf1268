// SPDX-License-Identifier: Apache-2.0
#include "bdris/result_io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <ostream>
#include <sstream>

#include "json.hpp"

namespace bdris {

using nlohmann::json;

Scenario build_scenario(const RunSpec& run) {
  Scenario s = load_scenario_file(run.scenario);
  s.rng_seed = run.seed;
  if (run.n_cells) s.n_cells = *run.n_cells;
  if (run.qos_db) s.qos_db = *run.qos_db;
  if (run.power_w) s.power_budget = *run.power_w;
  s.radar_only = run.radar_only;
  if (run.arch || run.groups || run.n_cells) {
    Architecture arch = run.arch.value_or(s.arch);
    std::optional<int> groups = run.groups;
    if (!run.arch && run.groups) arch = Architecture::GroupConnected;
    if (!groups && arch == Architecture::GroupConnected) groups = std::min(s.groups, s.n_cells);
    set_architecture(s, arch, groups);
  }
  validate(s);
  return s;
}

Instance build_instance(const RunSpec& run) { return Instance::make(build_scenario(run)); }

SolverConfig solver_config(const RunSpec& run, SolverConfig base) {
  base.rng_seed = run.seed;
  return base;
}

std::string text_digest(std::string_view text) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string file_digest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open '" + path.string() + "'");
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return text_digest(bytes);
}

std::string format_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10e", v);
  return buf;
}

std::string csv_field(std::string_view text) {
  if (text.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(text);
  std::string out = "\"";
  for (char c : text) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

double to_db(double linear) { return linear > 0.0 ? 10.0 * std::log10(linear) : -HUGE_VAL; }

void write_convergence_csv(std::ostream& out, const SolveResult& r) {
  const std::size_t k = r.scnr_history.empty() ? 0 : r.scnr_history.front().size();
  out << "iteration,min_scnr_db,feasibility";
  for (std::size_t i = 0; i < k; ++i) out << ",scnr_db_" << i;
  out << "\n";
  for (std::size_t n = 0; n < r.objective_history.size(); ++n) {
    out << n + 1 << ',' << format_number(to_db(r.objective_history[n])) << ','
        << format_number(r.feasibility_history[n]);
    for (double v : r.scnr_history[n]) out << ',' << format_number(to_db(v));
    out << "\n";
  }
}

namespace {

json matrix_json(const CMat& m) {
  json re = json::array(), im = json::array();
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      re.push_back(m(i, j).real());
      im.push_back(m(i, j).imag());
    }
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"re", re}, {"im", im}};
}

CMat matrix_from(const json& j) {
  const auto rows = j.at("rows").get<Eigen::Index>(), cols = j.at("cols").get<Eigen::Index>();
  const auto& re = j.at("re");
  const auto& im = j.at("im");
  if (re.size() != static_cast<std::size_t>(rows * cols) || im.size() != re.size())
    throw ConfigError("result: matrix payload has the wrong size");
  CMat m(rows, cols);
  std::size_t p = 0;
  for (Eigen::Index c = 0; c < cols; ++c)
    for (Eigen::Index r = 0; r < rows; ++r, ++p) m(r, c) = cdouble(re[p].get<double>(), im[p].get<double>());
  return m;
}

template <class T>
json opt(const std::optional<T>& v) {
  return v ? json(*v) : json(nullptr);
}

template <class T>
std::optional<T> opt_from(const json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<T>();
}

json header(const RunSpec& run, const SolverConfig& cfg) {
  const auto scenario_path = std::filesystem::weakly_canonical(std::filesystem::absolute(run.scenario));
  json j;
  j["version"] = BDRIS_VERSION_STRING;
  j["run"] = {{"scenario", scenario_path.string()},
              {"scenario_digest", file_digest(scenario_path)},
              {"arch", run.arch ? json(to_string(*run.arch)) : json(nullptr)},
              {"groups", opt(run.groups)},
              {"n_cells", opt(run.n_cells)},
              {"qos_db", opt(run.qos_db)},
              {"power_w", opt(run.power_w)},
              {"radar_only", run.radar_only},
              {"seed", run.seed}};
  j["solver"] = {{"rho", cfg.rho},
                 {"max_iters", cfg.max_iters},
                 {"tol_scnr", cfg.tol_scnr},
                 {"scnr_window", cfg.scnr_window},
                 {"tol_feas", cfg.tol_feas},
                 {"sca_inner_iters", cfg.sca_inner_iters},
                 {"adaptive_rho", cfg.adaptive_rho},
                 {"rho_growth", cfg.rho_growth},
                 {"rho_max", cfg.rho_max},
                 {"polish_iters", cfg.polish_iters},
                 {"rng_seed", cfg.rng_seed}};
  return j;
}

void write_json(const std::filesystem::path& dir, const json& j) {
  std::filesystem::create_directories(dir);
  std::ofstream out(dir / "result.json", std::ios::binary);
  if (!out) throw ConfigError("cannot write '" + (dir / "result.json").string() + "'");
  out << j.dump(1) << "\n";
}

}  // namespace

void write_result(const std::filesystem::path& dir, const RunSpec& run, const SolverConfig& cfg,
                  const SolveResult& r) {
  json j = header(run, cfg);
  json scnr = json::array();
  for (double v : r.scnr) scnr.push_back(v);
  json filters = json::array();
  for (const auto& u : r.filters.u) filters.push_back(matrix_json(u));
  j["result"] = {{"status", to_string(r.status)},
                 {"iterations", r.iterations},
                 {"gamma_star", std::isfinite(r.gamma_star) ? json(r.gamma_star) : json(nullptr)},
                 {"socp_failures", r.socp_failures},
                 {"min_scnr_db", to_db(r.min_scnr())},
                 {"scnr", scnr},
                 {"waveform", matrix_json(r.waveform.w)},
                 {"symbol_index", r.waveform.symbol_index},
                 {"symbol_rows", r.waveform.symbols.rows()},
                 {"phi_t", matrix_json(r.state.phi_t)},
                 {"phi_r", matrix_json(r.state.phi_r)},
                 {"filters", filters}};
  write_json(dir, j);
  std::ofstream csv(dir / "convergence.csv", std::ios::binary);
  if (!csv) throw ConfigError("cannot write '" + (dir / "convergence.csv").string() + "'");
  write_convergence_csv(csv, r);
}

void write_infeasible(const std::filesystem::path& dir, const RunSpec& run, const SolverConfig& cfg,
                      double gamma_star) {
  json j = header(run, cfg);
  j["result"] = {{"status", "infeasible"},
                 {"gamma_star", std::isfinite(gamma_star) ? json(gamma_star) : json(nullptr)},
                 {"gamma_star_db", gamma_star > 0.0 && std::isfinite(gamma_star) ? json(to_db(gamma_star)) : json(nullptr)}};
  write_json(dir, j);
  std::filesystem::remove(dir / "convergence.csv");
}

namespace {

void in_sync(const StoredResult& r, const std::filesystem::path& dir) {
  if (!std::filesystem::exists(r.run.scenario))
    throw ConfigError("scenario '" + r.run.scenario.string() + "' of '" + dir.string() + "' is gone");
  if (file_digest(r.run.scenario) != r.scenario_digest)
    throw ConfigError("scenario '" + r.run.scenario.string() + "' changed since '" + dir.string() + "' was written");
}

}  // namespace

StoredResult read_result(const std::filesystem::path& dir) {
  std::ifstream in(dir / "result.json", std::ios::binary);
  if (!in) throw ConfigError("no result.json in '" + dir.string() + "'");
  StoredResult out;
  try {
    const json j = json::parse(in);
    const auto& run = j.at("run");
    out.run.scenario = run.at("scenario").get<std::string>();
    out.scenario_digest = run.at("scenario_digest").get<std::string>();
    if (auto a = opt_from<std::string>(run, "arch")) out.run.arch = parse_architecture(*a);
    out.run.groups = opt_from<int>(run, "groups");
    out.run.n_cells = opt_from<int>(run, "n_cells");
    out.run.qos_db = opt_from<double>(run, "qos_db");
    out.run.power_w = opt_from<double>(run, "power_w");
    out.run.radar_only = run.at("radar_only").get<bool>();
    out.run.seed = run.at("seed").get<std::uint64_t>();
    const auto& sv = j.at("solver");
    out.config.rho = sv.at("rho").get<double>();
    out.config.max_iters = sv.at("max_iters").get<int>();
    out.config.tol_scnr = sv.at("tol_scnr").get<double>();
    out.config.scnr_window = sv.at("scnr_window").get<int>();
    out.config.tol_feas = sv.at("tol_feas").get<double>();
    out.config.sca_inner_iters = sv.at("sca_inner_iters").get<int>();
    out.config.adaptive_rho = sv.at("adaptive_rho").get<bool>();
    out.config.rho_growth = sv.at("rho_growth").get<double>();
    out.config.rho_max = sv.at("rho_max").get<double>();
    out.config.polish_iters = sv.at("polish_iters").get<int>();
    out.config.rng_seed = sv.at("rng_seed").get<std::uint64_t>();
    const auto& res = j.at("result");
    out.status = res.at("status").get<std::string>();
    out.gamma_star = res.at("gamma_star").is_null() ? HUGE_VAL : res.at("gamma_star").get<double>();
    if (out.status == "infeasible") {
      in_sync(out, dir);
      return out;
    }
    out.iterations = res.at("iterations").get<int>();
    out.scnr = res.at("scnr").get<std::vector<double>>();
    out.waveform.w = matrix_from(res.at("waveform"));
    out.waveform.symbol_index = res.at("symbol_index").get<std::vector<int>>();
    out.phi_t = matrix_from(res.at("phi_t"));
    out.phi_r = matrix_from(res.at("phi_r"));
    for (const auto& u : res.at("filters")) out.filters.u.push_back(matrix_from(u));
  } catch (const json::exception& e) {
    throw ConfigError("malformed result.json in '" + dir.string() + "': " + e.what());
  }
  in_sync(out, dir);
  const Scenario s = build_scenario(out.run);
  const auto users = static_cast<Eigen::Index>(s.users.size());
  if (out.waveform.symbol_index.size() != static_cast<std::size_t>(users * s.code_len))
    throw ConfigError("result.json symbol block does not match the scenario");
  out.waveform.symbols.resize(users, s.code_len);
  for (Eigen::Index u = 0; u < users; ++u)
    for (int l = 0; l < s.code_len; ++l)
      out.waveform.symbols(u, l) = psk_point(out.waveform.symbol_index[u * s.code_len + l], s.psk_order);
  return out;
}

}  // namespace bdris
