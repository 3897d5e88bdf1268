// SPDX-License-Identifier: Apache-2.0
#include "bdris/admm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace bdris {

std::string to_string(SolveStatus status) {
  return status == SolveStatus::Converged ? "converged" : "max_iterations";
}

double SolveResult::min_scnr() const {
  return scnr.empty() ? 0.0 : *std::min_element(scnr.begin(), scnr.end());
}

cdouble psk_point(int index, int order) { return std::polar(1.0, (2.0 * index + 1.0) * kPi / order); }

int gray_label(int index) { return index ^ (index >> 1); }

Waveform draw_symbols(int users, int code_len, int order, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> pick(0, order - 1);
  Waveform wf;
  wf.symbols.resize(users, code_len);
  wf.symbol_index.resize(static_cast<std::size_t>(users) * code_len);
  for (int u = 0; u < users; ++u)
    for (int l = 0; l < code_len; ++l) {
      const int m = pick(rng);
      wf.symbol_index[static_cast<std::size_t>(u) * code_len + l] = m;
      wf.symbols(u, l) = psk_point(m, order);
    }
  return wf;
}

bool cell_active(Architecture arch, Side side, int cell, int n_cells) {
  if (arch != Architecture::DoubleRis) return true;
  return (cell < n_cells / 2) == (side == Side::Transmissive);
}

CMat group_block(const CMat& phi_t, const CMat& phi_r, int g, int m) {
  CMat out(2 * m, m);
  out.topRows(m) = phi_t.block(g * m, g * m, m, m);
  out.bottomRows(m) = phi_r.block(g * m, g * m, m, m);
  return out;
}

void set_group_block(CMat& phi_t, CMat& phi_r, int g, int m, const CMat& block) {
  phi_t.block(g * m, g * m, m, m) = block.topRows(m);
  phi_r.block(g * m, g * m, m, m) = block.bottomRows(m);
}

double unitarity_residual(const CMat& phi_t, const CMat& phi_r, int groups) {
  const int m = static_cast<int>(phi_t.rows()) / groups;
  double worst = 0.0;
  for (int g = 0; g < groups; ++g) {
    const CMat b = group_block(phi_t, phi_r, g, m);
    worst = std::max(worst, (b.adjoint() * b - CMat::Identity(m, m)).norm());
  }
  return worst;
}

double consensus_residual(const BdRisState& st, int groups) {
  const int m = static_cast<int>(st.phi_t.rows()) / groups;
  double worst = 0.0;
  for (int g = 0; g < groups; ++g)
    worst = std::max(worst, (group_block(st.phi_t, st.phi_r, g, m) - st.theta[g]).norm());
  return worst;
}

BdRisState init_bdris(int groups, int m, Architecture arch, std::mt19937_64& rng, double rho) {
  const int n = groups * m;
  std::normal_distribution<double> gauss;
  std::uniform_real_distribution<double> angle(0.0, 2.0 * kPi);
  BdRisState st;
  st.phi_t = CMat::Zero(n, n);
  st.phi_r = CMat::Zero(n, n);
  st.penalty = rho;
  for (int g = 0; g < groups; ++g) {
    CMat block = CMat::Zero(2 * m, m);
    if (arch == Architecture::DoubleRis) {
      if (m != 1) throw ConfigError("DOUBLE-RIS needs single-cell groups");
      block(cell_active(arch, Side::Transmissive, g, n) ? 0 : 1, 0) = std::polar(1.0, angle(rng));
    } else {
      CMat z(2 * m, m);
      for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = cdouble(gauss(rng), gauss(rng));
      Eigen::HouseholderQR<CMat> qr(z);
      block = qr.householderQ() * CMat::Identity(2 * m, m);
    }
    set_group_block(st.phi_t, st.phi_r, g, m, block);
    st.theta.push_back(block);
    st.duals.push_back(CMat::Zero(2 * m, m));
  }
  return st;
}

namespace {

bool usable(const SocpSolution& sol) {
  return sol.status == SocpStatus::Optimal || sol.status == SocpStatus::Inaccurate;
}

RMat place_cols(const RMat& block, int offset, int n) {
  RMat out = RMat::Zero(block.rows(), n);
  out.middleCols(offset, block.cols()) = block;
  return out;
}

RVec place(const RVec& row, int offset, int n) {
  RVec out = RVec::Zero(n);
  out.segment(offset, row.size()) = row;
  return out;
}

// Both half-planes of the CI region for z = c^T x, x complex at `offset`:
// Re{(sin W +/- j cos W) z} >= rhs + sin W * x[tau] (tau < 0: no variable term).
void add_ci_pair(SocpProblem& p, const CVec& c, int offset, double half_angle, double rhs, int tau = -1) {
  const double sn = std::sin(half_angle), cs = std::cos(half_angle);
  for (const cdouble rot : {cdouble(sn, cs), cdouble(sn, -cs)}) {
    RVec row = -place(re_linear_row(rot * c), offset, p.n_vars());
    if (tau >= 0) row(tau) = sn;
    p.add_inequality(row, -rhs);
  }
}

// Convexified SCNR constraint of one target in normalised variables x (the
// physical variable is scale * x) and epigraph variable g = gamma / gamma_ref:
//   (gamma_ref / a) |R x|^2 - (2 / a) Re{v^H x} + g + gamma_ref n / (scale^2 a) <= 0,
// with R^H R the interference form, v = Y_T x_ref and a = x_ref^H Y_T x_ref.
void add_sca_constraint(SocpProblem& p, const FractionalForm& f, const CVec& x_ref, double gamma_ref,
                        double scale, int offset, int g_index) {
  const int n = p.n_vars();
  const CVec v = f.signal.apply(x_ref);
  const double a = f.signal.quad(x_ref);
  RVec c = place(RVec((2.0 / a) * re_inner_row(v)), offset, n);
  c(g_index) -= 1.0;
  const double d = -gamma_ref * f.noise_const / (scale * scale * a);
  if (f.interference.terms() == 0) {
    p.add_inequality(-c, d);
    return;
  }
  const RMat r = std::sqrt(gamma_ref / a) * real_embedding(f.interference.factor());
  p.add_quadratic_le(place_cols(r, offset, n), RVec::Zero(r.rows()), c, d);
}

double min_ratio(const std::vector<FractionalForm>& forms, const std::vector<CVec>& x) {
  double worst = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < forms.size(); ++k) worst = std::min(worst, forms[k].ratio(x[k]));
  return worst;
}

InitialWaveform max_margin_waveform(const Instance& inst, const std::vector<int>& users, const CMat& phi_t,
                                    const CMat& phi_r, const CMat& symbols, const SocpOptions& opt) {
  const auto& s = inst.scenario;
  const int nt = s.n_tx, len = s.code_len, dim = nt * len;
  if (users.empty()) return {CMat::Zero(nt, len), std::numeric_limits<double>::infinity()};
  if (!(s.power_budget > 0.0)) return {CMat::Zero(nt, len), 0.0};
  const double root_e = std::sqrt(s.power_budget);
  const double sigma = std::sqrt(s.noise_comm);
  const int tau = 2 * dim;
  SocpProblem p(2 * dim + 1);
  RVec obj = RVec::Zero(p.n_vars());
  obj(tau) = -1.0;
  p.set_objective(obj);
  for (int u : users) {
    const CVec h = effective_channel(inst, u, phi_t, phi_r).conjugate() * (root_e / sigma);
    for (int l = 0; l < len; ++l) {
      CVec c = CVec::Zero(dim);
      c.segment(l * nt, nt) = h * std::polar(1.0, -std::arg(symbols(u, l)));
      add_ci_pair(p, c, 0, s.half_angle(), 0.0, tau);
    }
  }
  p.add_soc(place_cols(RMat::Identity(2 * dim, 2 * dim), 0, p.n_vars()), RVec::Zero(2 * dim), RVec::Zero(p.n_vars()),
            1.0);
  const SocpSolution sol = solve_socp(p, opt);
  if (!usable(sol)) throw std::runtime_error("init_waveform: SOCP " + to_string(sol.status));
  const double t = std::max(sol.x(tau), 0.0);
  return {unvec(root_e * unstack_complex(sol.x.head(2 * dim)), nt, len), t * t};
}

}  // namespace

InitialWaveform init_waveform(const Instance& inst, const CMat& phi_t, const CMat& phi_r, const CMat& symbols,
                              const SocpOptions& opt) {
  return max_margin_waveform(inst, inst.scenario.active_users(), phi_t, phi_r, symbols, opt);
}

CVec principal_filter(const FractionalForm& form) {
  const Eigen::Index d = form.signal.dim();
  if (form.signal.terms() != 1) throw std::invalid_argument("principal_filter: signal must be rank one");
  if (!(form.noise_identity > 0.0)) throw std::invalid_argument("principal_filter: noise must be positive");
  const CVec& psi = form.signal.vectors()[0];
  // (n I + V D V^H)^{-1} psi via Woodbury with V' = V sqrt(D / n).
  std::vector<CVec> cols;
  for (std::size_t j = 0; j < form.interference.terms(); ++j)
    if (form.interference.weights()[j] > 0.0)
      cols.push_back(std::sqrt(form.interference.weights()[j] / form.noise_identity) *
                     form.interference.vectors()[j]);
  CVec u = psi;
  if (!cols.empty()) {
    CMat v(d, static_cast<Eigen::Index>(cols.size()));
    for (std::size_t j = 0; j < cols.size(); ++j) v.col(static_cast<Eigen::Index>(j)) = cols[j];
    const CMat small = CMat::Identity(v.cols(), v.cols()) + v.adjoint() * v;
    u -= v * small.llt().solve(v.adjoint() * psi);
  }
  const double norm = u.norm();
  if (!(norm > 0.0)) {
    CVec e = CVec::Zero(d);
    e(0) = 1.0;
    return e;
  }
  return u / norm;
}

FilterBank update_filters(const Instance& inst, const CMat& w, const CMat& phi_t, const CMat& phi_r) {
  const auto& s = inst.scenario;
  const auto forms = build_filter_forms(inst, w, phi_t, phi_r);
  FilterBank fb;
  for (std::size_t k = 0; k < forms.size(); ++k)
    fb.u.push_back(unvec(principal_filter(forms[k]), s.n_rx, s.obs_len(s.targets[k].side)));
  return fb;
}

double minorizer(const CVec& w, double gamma, const CVec& w_ref, double gamma_ref, const CMat& ups) {
  if (!(gamma_ref > 0.0)) throw std::domain_error("minorizer: reference gamma must be positive");
  const cdouble lin = w_ref.dot(ups * w);
  const double quad = std::real(w_ref.dot(ups * w_ref));
  return 2.0 * lin.real() / gamma_ref - gamma * quad / (gamma_ref * gamma_ref);
}

double minorizer(const CVec& w, double gamma, const CVec& w_ref, double gamma_ref, const RankOneSum& ups) {
  if (!(gamma_ref > 0.0)) throw std::domain_error("minorizer: reference gamma must be positive");
  const CVec yr = ups.apply(w_ref);
  return 2.0 * std::real(yr.dot(w)) / gamma_ref - gamma * ups.quad(w_ref) / (gamma_ref * gamma_ref);
}

std::vector<double> scnr_all(const Instance& inst, const CMat& w, const CMat& phi_t, const CMat& phi_r,
                             const FilterBank& filters) {
  const auto& s = inst.scenario;
  std::vector<double> out;
  for (int k = 0; k < static_cast<int>(s.targets.size()); ++k)
    out.push_back(scnr_trace(inst, w, phi_for(s.targets[k].side, phi_t, phi_r), filters.u.at(k), k));
  return out;
}

CMat update_waveform(const Instance& inst, const Waveform& wf, const CMat& phi_t, const CMat& phi_r,
                     const FilterBank& filters, int sca_iters, const SocpOptions& opt, SubproblemReport* report) {
  const auto& s = inst.scenario;
  const int nt = s.n_tx, len = s.code_len, dim = nt * len;
  if (!(s.power_budget > 0.0)) return wf.w;
  const double root_e = std::sqrt(s.power_budget);
  const double sigma = std::sqrt(s.noise_comm);
  const auto forms = build_waveform_forms(inst, phi_t, phi_r, filters);
  const int g_index = 2 * dim;

  struct Ci {
    CVec c;
    double rhs;
  };
  std::vector<Ci> ci;
  for (int u : s.active_users()) {
    const CVec h = effective_channel(inst, u, phi_t, phi_r).conjugate() * (root_e / sigma);
    const double rhs = std::sqrt(s.qos_linear(s.users[u])) * std::sin(s.half_angle());
    for (int l = 0; l < len; ++l) {
      CVec c = CVec::Zero(dim);
      c.segment(l * nt, nt) = h * std::polar(1.0, -std::arg(wf.symbols(u, l)));
      ci.push_back({std::move(c), rhs});
    }
  }

  CVec x_ref = vec(wf.w) / root_e;
  Waveform probe = wf;
  for (int it = 0; it < sca_iters; ++it) {
    const std::vector<CVec> w_ref(forms.size(), root_e * x_ref);
    const double gamma_ref = min_ratio(forms, w_ref);
    if (!(gamma_ref > 0.0)) break;
    SocpProblem p(2 * dim + 1);
    RVec obj = RVec::Zero(p.n_vars());
    obj(g_index) = -1.0;
    p.set_objective(obj);
    for (const auto& f : forms) add_sca_constraint(p, f, x_ref, gamma_ref, root_e, 0, g_index);
    for (const auto& row : ci) add_ci_pair(p, row.c, 0, s.half_angle(), row.rhs);
    p.add_soc(place_cols(RMat::Identity(2 * dim, 2 * dim), 0, p.n_vars()), RVec::Zero(2 * dim),
              RVec::Zero(p.n_vars()), 1.0);
    const SocpSolution sol = solve_socp(p, opt);
    if (report) ++report->solves;
    if (!usable(sol)) {
      if (report) ++report->rejected;
      break;
    }
    const CVec x_new = unstack_complex(sol.x.head(2 * dim));
    // The minoriser guarantees ascent from a feasible reference; anything else
    // is solver inaccuracy and the step is dropped.
    probe.w = unvec(root_e * x_ref, nt, len);
    const bool ref_feasible = ci.empty() || min_ci_slack(inst, probe, phi_t, phi_r) >= -1e-6;
    const std::vector<CVec> w_new(forms.size(), root_e * x_new);
    if (ref_feasible && min_ratio(forms, w_new) < gamma_ref * (1.0 - 1e-6)) {
      if (report) ++report->rejected;
      break;
    }
    x_ref = x_new;
    if (report) report->surrogate = sol.x(g_index) * gamma_ref;
  }
  return unvec(root_e * x_ref, nt, len);
}

void update_phases(const Instance& inst, const Waveform& wf, const FilterBank& filters, BdRisState& st,
                   int sca_iters, const SocpOptions& opt, SubproblemReport* report) {
  const auto& s = inst.scenario;
  const int groups = s.groups, m = s.group_size(), cells = s.n_cells;
  const int d = m * cells;  // complex unknowns per side
  const int e_index = 4 * d, t_index = 4 * d + 1, s_index = 4 * d + 2;
  auto offset = [&](Side side) { return side == Side::Transmissive ? 0 : 2 * d; };
  const double rho = st.penalty;
  if (!(rho > 0.0)) throw std::invalid_argument("update_phases: penalty must be positive");

  std::vector<FractionalForm> forms;
  for (const auto& f : build_phase_forms(inst, wf.w, filters)) forms.push_back(de_diagonalize(f, groups, m));

  // CI rows: Tr(H_tilde Phi_tilde) = c^T vec(Phi_tilde) with c the block-wise transpose.
  struct Ci {
    CVec c;
    int offset;
    double rhs;
  };
  std::vector<Ci> ci;
  const CMat gw = inst.channels.g_mat * wf.w;
  const double sigma = std::sqrt(s.noise_comm);
  for (int u : s.active_users()) {
    const Side side = s.users[u].side;
    const double rhs = std::sqrt(s.qos_linear(s.users[u])) * std::sin(s.half_angle());
    for (int l = 0; l < s.code_len; ++l) {
      const CMat h_bar = std::polar(1.0 / sigma, -std::arg(wf.symbols(u, l))) * gw.col(l) *
                         inst.channels.h[u].adjoint();
      CMat ht = h_tilde(h_bar, groups);
      for (int g = 0; g < groups; ++g) ht.middleCols(g * m, m) = ht.middleCols(g * m, m).transpose().eval();
      ci.push_back({vec(ht), offset(side), rhs});
    }
  }

  // rho/2 |Phi - Theta|^2 + Re Tr(Lambda^H (Phi - Theta)) = rho/2 |Phi - Theta + Lambda/rho|^2 + const.
  CMat anchor_t(m, cells), anchor_r(m, cells);
  for (int g = 0; g < groups; ++g) {
    const CMat a = st.theta[g] - st.duals[g] / rho;
    anchor_t.middleCols(g * m, m) = a.topRows(m);
    anchor_r.middleCols(g * m, m) = a.bottomRows(m);
  }
  RVec anchor(4 * d);
  anchor << stack_complex(vec(anchor_t)), stack_complex(vec(anchor_r));

  std::vector<CVec> x_side = {vec(stack_blocks(st.phi_t, groups)), vec(stack_blocks(st.phi_r, groups))};
  auto side_of = [&](int k) { return s.targets[k].side == Side::Transmissive ? 0 : 1; };

  for (int it = 0; it < sca_iters; ++it) {
    std::vector<CVec> per_target;
    for (int k = 0; k < static_cast<int>(forms.size()); ++k) per_target.push_back(x_side[side_of(k)]);
    const double gamma_ref = min_ratio(forms, per_target);
    if (!(gamma_ref > 0.0)) break;

    SocpProblem p(4 * d + 3);
    RVec obj = RVec::Zero(p.n_vars());
    obj(s_index) = -1.0;
    obj(t_index) = 0.5 * rho;
    p.set_objective(obj);
    for (int k = 0; k < static_cast<int>(forms.size()); ++k)
      add_sca_constraint(p, forms[k], per_target[k], gamma_ref, 1.0, offset(s.targets[k].side), e_index);
    // s <= 1 - 1/e <= ln e, as (1 - s) e >= 1.
    RMat hyp = RMat::Zero(2, p.n_vars());
    hyp(1, s_index) = hyp(1, e_index) = -1.0;
    RVec hyp_c = RVec::Zero(p.n_vars());
    hyp_c(s_index) = -1.0;
    hyp_c(e_index) = 1.0;
    p.add_soc(hyp, (RVec(2) << 2.0, 1.0).finished(), hyp_c, 1.0);
    for (const auto& row : ci) add_ci_pair(p, row.c, row.offset, s.half_angle(), row.rhs);
    RVec t_row = RVec::Zero(p.n_vars());
    t_row(t_index) = 1.0;
    p.add_quadratic_le(place_cols(RMat::Identity(4 * d, 4 * d), 0, p.n_vars()), -anchor, t_row, 0.0);
    if (s.arch == Architecture::DoubleRis)
      for (const Side side : {Side::Transmissive, Side::Reflective})
        for (int i = 0; i < cells; ++i)
          if (!cell_active(s.arch, side, i, cells))
            for (const int part : {0, d}) {
              RVec row = RVec::Zero(p.n_vars());
              row(offset(side) + part + i) = 1.0;
              p.add_equality(row, 0.0);
            }
    const SocpSolution sol = solve_socp(p, opt);
    if (report) ++report->solves;
    if (!usable(sol)) {
      if (report) ++report->rejected;
      break;
    }
    x_side[0] = unstack_complex(sol.x.segment(0, 2 * d));
    x_side[1] = unstack_complex(sol.x.segment(2 * d, 2 * d));
    if (s.arch == Architecture::DoubleRis)
      for (int i = 0; i < cells; ++i) {
        if (!cell_active(s.arch, Side::Transmissive, i, cells)) x_side[0](i) = 0.0;
        if (!cell_active(s.arch, Side::Reflective, i, cells)) x_side[1](i) = 0.0;
      }
    if (report) report->surrogate = sol.x(e_index) * gamma_ref;
  }
  st.phi_t = unstack_blocks(unvec(x_side[0], m, cells), groups);
  st.phi_r = unstack_blocks(unvec(x_side[1], m, cells), groups);
}

CMat project_theta(const CMat& lambda, const CMat& phi, double rho) {
  const CMat x = lambda + rho * phi;
  if (x.norm() == 0.0) return CMat::Identity(x.rows(), x.cols());
  Eigen::JacobiSVD<CMat> svd(x, Eigen::ComputeThinU | Eigen::ComputeThinV);
  return svd.matrixU() * svd.matrixV().adjoint();
}

void update_thetas(BdRisState& st, int groups) {
  const int m = static_cast<int>(st.phi_t.rows()) / groups;
  for (int g = 0; g < groups; ++g)
    st.theta[g] = project_theta(st.duals[g], group_block(st.phi_t, st.phi_r, g, m), st.penalty);
}

void update_duals(BdRisState& st, int groups) {
  const int m = static_cast<int>(st.phi_t.rows()) / groups;
  for (int g = 0; g < groups; ++g)
    st.duals[g] += st.penalty * (group_block(st.phi_t, st.phi_r, g, m) - st.theta[g]);
}

namespace {

double max_qos(const Scenario& s) {
  double q = 0.0;
  for (int u : s.active_users()) q = std::max(q, s.qos_linear(s.users[u]));
  return q;
}

double smallest(const std::vector<double>& v) { return *std::min_element(v.begin(), v.end()); }

// Filter/waveform passes on fixed (projected) BD-RIS matrices.
void polish(const Instance& inst, Waveform& wf, const BdRisState& st, const SolverConfig& cfg, SolveResult& res) {
  double last = 0.0;
  for (int i = 0; i < cfg.polish_iters; ++i) {
    const FilterBank fb = update_filters(inst, wf.w, st.phi_t, st.phi_r);
    SubproblemReport rep;
    wf.w = update_waveform(inst, wf, st.phi_t, st.phi_r, fb, 1, cfg.socp, &rep);
    res.socp_failures += rep.rejected;
    const double now = smallest(scnr_all(inst, wf.w, st.phi_t, st.phi_r,
                                         update_filters(inst, wf.w, st.phi_t, st.phi_r)));
    if (i > 0 && std::abs(now - last) <= cfg.tol_scnr * std::max(now, 1e-300)) break;
    last = now;
  }
}

}  // namespace

SolveResult solve(const Instance& inst, const SolverConfig& cfg) {
  const auto& s = inst.scenario;
  if (!(cfg.rho > 0.0) || !(cfg.tol_scnr > 0.0) || !(cfg.tol_feas > 0.0) || cfg.max_iters < 0 ||
      cfg.sca_inner_iters < 1 || cfg.scnr_window < 1)
    throw std::invalid_argument("solve: invalid solver configuration");
  const int groups = s.groups, m = s.group_size();

  std::mt19937_64 rng(cfg.rng_seed);
  Waveform wf = draw_symbols(static_cast<int>(s.users.size()), s.code_len, s.psk_order, rng);
  BdRisState st = init_bdris(groups, m, s.arch, rng, cfg.rho);

  SolveResult res;
  // Radar-only runs start from the same max-margin waveform as the
  // communication-constrained runs, so the two differ only in constraints.
  std::vector<int> init_users(s.users.size());
  for (std::size_t u = 0; u < init_users.size(); ++u) init_users[u] = static_cast<int>(u);
  if (init_users.empty()) {
    std::normal_distribution<double> gauss;
    CMat w(s.n_tx, s.code_len);
    for (Eigen::Index i = 0; i < w.size(); ++i) w(i) = cdouble(gauss(rng), gauss(rng));
    wf.w = w * (std::sqrt(s.power_budget) / w.norm());
    res.gamma_star = std::numeric_limits<double>::infinity();
  } else {
    const auto init = max_margin_waveform(inst, init_users, st.phi_t, st.phi_r, wf.symbols, cfg.socp);
    wf.w = init.w;
    res.gamma_star = init.gamma_star;
    if (!s.radar_only && init.gamma_star < max_qos(s) * (1.0 - 1e-9))
      throw InfeasibleError("QoS threshold exceeds the largest feasible margin of the initial point",
                            init.gamma_star);
  }

  FilterBank fb = update_filters(inst, wf.w, st.phi_t, st.phi_r);

  int stable = 0;
  std::vector<CMat> theta_prev;
  for (int n = 1; n <= cfg.max_iters; ++n) {
    SubproblemReport rep;
    wf.w = update_waveform(inst, wf, st.phi_t, st.phi_r, fb, cfg.sca_inner_iters, cfg.socp, &rep);
    update_phases(inst, wf, fb, st, cfg.sca_inner_iters, cfg.socp, &rep);
    res.socp_failures += rep.rejected;
    theta_prev = st.theta;
    update_thetas(st, groups);
    update_duals(st, groups);
    fb = update_filters(inst, wf.w, st.phi_t, st.phi_r);

    const auto scnr = scnr_all(inst, wf.w, st.phi_t, st.phi_r, fb);
    const double feas = consensus_residual(st, groups);
    const double obj = smallest(scnr);
    const double prev = res.objective_history.empty() ? 0.0 : res.objective_history.back();
    res.scnr_history.push_back(scnr);
    res.feasibility_history.push_back(feas);
    res.objective_history.push_back(obj);
    res.iterations = n;

    stable = (n > 1 && std::abs(obj - prev) <= cfg.tol_scnr * std::max(obj, 1e-300)) ? stable + 1 : 0;
    if (stable >= cfg.scnr_window && feas <= cfg.tol_feas) {
      res.status = SolveStatus::Converged;
      break;
    }
    if (stable >= cfg.scnr_window && cfg.rho_growth > 1.0 && st.penalty < cfg.rho_max) {
      st.penalty = std::min(st.penalty * cfg.rho_growth, cfg.rho_max);
      stable = 0;
    }
    if (cfg.adaptive_rho) {
      double dual = 0.0;
      for (int g = 0; g < groups; ++g) dual = std::max(dual, (st.theta[g] - theta_prev[g]).norm());
      dual *= st.penalty;
      if (feas > 10.0 * dual) st.penalty *= 2.0;
      else if (dual > 10.0 * feas) st.penalty /= 2.0;
    }
  }

  // Hard projection onto the feasible set, then re-fit W and U to it.
  for (int g = 0; g < groups; ++g) {
    const CMat b = project_theta(CMat::Zero(2 * m, m), group_block(st.phi_t, st.phi_r, g, m), 1.0);
    set_group_block(st.phi_t, st.phi_r, g, m, b);
    st.theta[g] = b;
  }
  polish(inst, wf, st, cfg, res);
  if (!s.active_users().empty() && min_ci_slack(inst, wf, st.phi_t, st.phi_r) < -1e-7) {
    const auto rescue = init_waveform(inst, st.phi_t, st.phi_r, wf.symbols, cfg.socp);
    if (rescue.gamma_star < max_qos(s) * (1.0 - 1e-9))
      throw InfeasibleError("QoS threshold infeasible on the projected BD-RIS matrices", rescue.gamma_star);
    wf.w = rescue.w;
    polish(inst, wf, st, cfg, res);
  }
  res.filters = update_filters(inst, wf.w, st.phi_t, st.phi_r);
  res.scnr = scnr_all(inst, wf.w, st.phi_t, st.phi_r, res.filters);
  res.waveform = wf;
  res.state = st;
  return res;
}

}  // namespace bdris
