// SPDX-License-Identifier: Apache-2.0
#include "bdris/quadforms.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace bdris {

Instance Instance::make(Scenario scenario) {
  CommChannels ch = generate_channels(scenario);
  return make(std::move(scenario), std::move(ch));
}

Instance Instance::make(Scenario scenario, CommChannels channels) {
  Instance inst;
  inst.scenario = std::move(scenario);
  inst.channels = std::move(channels);
  const auto& s = inst.scenario;
  for (const auto& t : s.targets)
    inst.target_channels.push_back(radar_channel(t.azimuth_deg, s.n_rx, s.n_cells, s.spacing_ratio));
  for (const auto& c : s.clutters)
    inst.clutter_channels.push_back(radar_channel(c.azimuth_deg, s.n_rx, s.n_cells, s.spacing_ratio));
  return inst;
}

void RankOneSum::add(double weight, CVec v) {
  if (dim_ == 0) dim_ = v.size();
  if (v.size() != dim_) throw std::invalid_argument("RankOneSum: dimension mismatch");
  weights_.push_back(weight);
  vectors_.push_back(std::move(v));
}

double RankOneSum::quad(const CVec& x) const {
  double acc = 0.0;
  for (std::size_t j = 0; j < vectors_.size(); ++j) acc += weights_[j] * std::norm(vectors_[j].dot(x));
  return acc;
}

CVec RankOneSum::apply(const CVec& x) const {
  CVec out = CVec::Zero(dim_);
  for (std::size_t j = 0; j < vectors_.size(); ++j) out += weights_[j] * vectors_[j].dot(x) * vectors_[j];
  return out;
}

CMat RankOneSum::dense() const {
  CMat out = CMat::Zero(dim_, dim_);
  for (std::size_t j = 0; j < vectors_.size(); ++j)
    out.noalias() += weights_[j] * vectors_[j] * vectors_[j].adjoint();
  return out;
}

CMat RankOneSum::factor() const {
  CMat r(static_cast<Eigen::Index>(vectors_.size()), dim_);
  for (std::size_t j = 0; j < vectors_.size(); ++j)
    r.row(static_cast<Eigen::Index>(j)) = std::sqrt(weights_[j]) * vectors_[j].adjoint();
  return r;
}

double FractionalForm::ratio(const CVec& x) const {
  const double den = interference.quad(x) + noise_identity * x.squaredNorm() + noise_const;
  if (!(den > 0.0)) throw std::domain_error("FractionalForm: non-positive denominator");
  return signal.quad(x) / den;
}

CVec vec(const CMat& m) { return Eigen::Map<const CVec>(m.data(), m.size()); }

CMat unvec(const CVec& v, Eigen::Index rows, Eigen::Index cols) {
  if (v.size() != rows * cols) throw std::invalid_argument("unvec: size mismatch");
  return Eigen::Map<const CMat>(v.data(), rows, cols);
}

const CMat& phi_for(Side side, const CMat& phi_t, const CMat& phi_r) {
  return side == Side::Transmissive ? phi_t : phi_r;
}

namespace {

struct Echo {
  double power;
  const CMat* channel;
  int ring;
};

// Every echo that reaches target k's filter: k itself first, then the other
// same-side targets, then same-side clutter.
std::vector<Echo> echoes_seen_by(const Instance& inst, int k) {
  const auto& s = inst.scenario;
  const Side side = s.targets.at(k).side;
  std::vector<Echo> out;
  out.push_back({s.targets[k].power, &inst.target_channels[k], s.targets[k].ring});
  for (int p : s.targets_on(side))
    if (p != k) out.push_back({s.targets[p].power, &inst.target_channels[p], s.targets[p].ring});
  for (int q : s.clutters_on(side)) out.push_back({s.clutters[q].power, &inst.clutter_channels[q], s.clutters[q].ring});
  return out;
}

cdouble inner(const CMat& a, const CMat& b) { return (a.conjugate().cwiseProduct(b)).sum(); }

}  // namespace

double scnr_trace(const Instance& inst, const CMat& w, const CMat& phi, const CMat& u_k, int k) {
  const auto& s = inst.scenario;
  const int obs = s.obs_len(s.targets.at(k).side);
  const CMat gw = inst.channels.g_mat * w;
  double num = 0.0;
  double den = s.noise_radar * u_k.squaredNorm();
  bool first = true;
  for (const auto& e : echoes_seen_by(inst, k)) {
    const CMat echo = ShiftMatrix(e.ring, s.code_len, obs).right_apply(*e.channel * phi * gw);
    const double v = e.power * std::norm(inner(u_k, echo));
    if (first) num = v; else den += v;
    first = false;
  }
  if (!(den > 0.0)) throw std::domain_error("scnr_trace: zero filter");
  return num / den;
}

std::vector<FractionalForm> build_filter_forms(const Instance& inst, const CMat& w, const CMat& phi_t,
                                               const CMat& phi_r) {
  const auto& s = inst.scenario;
  const CMat gw = inst.channels.g_mat * w;
  std::vector<FractionalForm> forms;
  for (int k = 0; k < static_cast<int>(s.targets.size()); ++k) {
    const Side side = s.targets[k].side;
    const int obs = s.obs_len(side);
    const CMat pgw = phi_for(side, phi_t, phi_r) * gw;
    FractionalForm f;
    f.signal = RankOneSum(s.n_rx * obs);
    f.interference = RankOneSum(s.n_rx * obs);
    f.noise_identity = s.noise_radar;
    bool first = true;
    for (const auto& e : echoes_seen_by(inst, k)) {
      CVec v = vec(ShiftMatrix(e.ring, s.code_len, obs).right_apply(*e.channel * pgw));
      (first ? f.signal : f.interference).add(e.power, std::move(v));
      first = false;
    }
    forms.push_back(std::move(f));
  }
  return forms;
}

std::vector<FractionalForm> build_waveform_forms(const Instance& inst, const CMat& phi_t, const CMat& phi_r,
                                                 const FilterBank& filters) {
  const auto& s = inst.scenario;
  const CMat& g = inst.channels.g_mat;
  std::vector<FractionalForm> forms;
  for (int k = 0; k < static_cast<int>(s.targets.size()); ++k) {
    const Side side = s.targets[k].side;
    const int obs = s.obs_len(side);
    const CMat& u = filters.u.at(k);
    const CMat gp = g.adjoint() * phi_for(side, phi_t, phi_r).adjoint();
    FractionalForm f;
    f.signal = RankOneSum(s.n_tx * s.code_len);
    f.interference = RankOneSum(s.n_tx * s.code_len);
    f.noise_const = s.noise_radar * u.squaredNorm();
    bool first = true;
    for (const auto& e : echoes_seen_by(inst, k)) {
      CVec v = vec(ShiftMatrix(e.ring, s.code_len, obs).right_apply_transpose(gp * e.channel->adjoint() * u));
      (first ? f.signal : f.interference).add(e.power, std::move(v));
      first = false;
    }
    forms.push_back(std::move(f));
  }
  return forms;
}

std::vector<FractionalForm> build_phase_forms(const Instance& inst, const CMat& w, const FilterBank& filters) {
  const auto& s = inst.scenario;
  const CMat gw = inst.channels.g_mat * w;
  std::vector<FractionalForm> forms;
  for (int k = 0; k < static_cast<int>(s.targets.size()); ++k) {
    const int obs = s.obs_len(s.targets[k].side);
    const CMat& u = filters.u.at(k);
    FractionalForm f;
    f.signal = RankOneSum(static_cast<Eigen::Index>(s.n_cells) * s.n_cells);
    f.interference = RankOneSum(static_cast<Eigen::Index>(s.n_cells) * s.n_cells);
    f.noise_const = s.noise_radar * u.squaredNorm();
    bool first = true;
    for (const auto& e : echoes_seen_by(inst, k)) {
      const CMat shifted = ShiftMatrix(e.ring, s.code_len, obs).right_apply(gw);
      CVec v = vec(e.channel->adjoint() * u * shifted.adjoint());
      (first ? f.signal : f.interference).add(e.power, std::move(v));
      first = false;
    }
    forms.push_back(std::move(f));
  }
  return forms;
}

std::vector<Eigen::Index> group_indices(int groups, int group_size) {
  if (groups < 1 || group_size < 1) throw std::invalid_argument("group_indices: sizes must be positive");
  const Eigen::Index n = static_cast<Eigen::Index>(groups) * group_size;
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(group_size * n));
  for (Eigen::Index j = 0; j < n; ++j) {
    const Eigen::Index row0 = (j / group_size) * group_size;
    for (Eigen::Index i = 0; i < group_size; ++i) idx[i + group_size * j] = (row0 + i) + n * j;
  }
  return idx;
}

RMat group_map(int groups, int group_size) {
  const auto idx = group_indices(groups, group_size);
  const Eigen::Index n = static_cast<Eigen::Index>(groups) * group_size;
  RMat k = RMat::Zero(static_cast<Eigen::Index>(idx.size()), n * n);
  for (std::size_t a = 0; a < idx.size(); ++a) k(static_cast<Eigen::Index>(a), idx[a]) = 1.0;
  return k;
}

namespace {

CVec restrict_to(const CVec& v, const std::vector<Eigen::Index>& idx) {
  CVec out(static_cast<Eigen::Index>(idx.size()));
  for (std::size_t a = 0; a < idx.size(); ++a) out(static_cast<Eigen::Index>(a)) = v(idx[a]);
  return out;
}

void check_square(Eigen::Index dim, int groups, int group_size) {
  const Eigen::Index n = static_cast<Eigen::Index>(groups) * group_size;
  if (dim != n * n) throw std::invalid_argument("de_diagonalize: expected an N_S^2 square operand");
}

}  // namespace

CMat de_diagonalize(const CMat& xi, int groups, int group_size) {
  if (xi.rows() != xi.cols()) throw std::invalid_argument("de_diagonalize: matrix not square");
  check_square(xi.rows(), groups, group_size);
  const auto idx = group_indices(groups, group_size);
  const auto m = static_cast<Eigen::Index>(idx.size());
  CMat out(m, m);
  for (Eigen::Index b = 0; b < m; ++b)
    for (Eigen::Index a = 0; a < m; ++a) out(a, b) = xi(idx[a], idx[b]);
  return out;
}

RankOneSum de_diagonalize(const RankOneSum& xi, int groups, int group_size) {
  check_square(xi.dim(), groups, group_size);
  const auto idx = group_indices(groups, group_size);
  RankOneSum out(static_cast<Eigen::Index>(idx.size()));
  for (std::size_t j = 0; j < xi.terms(); ++j) out.add(xi.weights()[j], restrict_to(xi.vectors()[j], idx));
  return out;
}

FractionalForm de_diagonalize(const FractionalForm& form, int groups, int group_size) {
  FractionalForm out;
  out.signal = de_diagonalize(form.signal, groups, group_size);
  out.interference = de_diagonalize(form.interference, groups, group_size);
  out.noise_identity = form.noise_identity;
  out.noise_const = form.noise_const;
  return out;
}

CMat stack_blocks(const CMat& phi, int groups) {
  const Eigen::Index n = phi.rows();
  if (phi.cols() != n || groups < 1 || n % groups != 0) throw std::invalid_argument("stack_blocks: bad shape");
  const Eigen::Index m = n / groups;
  CMat out(m, n);
  for (Eigen::Index g = 0; g < groups; ++g) out.middleCols(g * m, m) = phi.block(g * m, g * m, m, m);
  return out;
}

CMat unstack_blocks(const CMat& stacked, int groups) {
  const Eigen::Index m = stacked.rows();
  if (stacked.cols() != m * groups) throw std::invalid_argument("unstack_blocks: bad shape");
  const Eigen::Index n = m * groups;
  CMat out = CMat::Zero(n, n);
  for (Eigen::Index g = 0; g < groups; ++g) out.block(g * m, g * m, m, m) = stacked.middleCols(g * m, m);
  return out;
}

CMat h_tilde(const CMat& h_bar, int groups) { return stack_blocks(h_bar, groups); }

cdouble stacked_trace(const CMat& h_tilde_mat, const CMat& phi_stacked, int groups) {
  if (h_tilde_mat.rows() != phi_stacked.rows() || h_tilde_mat.cols() != phi_stacked.cols())
    throw std::invalid_argument("stacked_trace: shape mismatch");
  const Eigen::Index m = h_tilde_mat.rows();
  cdouble acc = 0.0;
  for (Eigen::Index g = 0; g < groups; ++g)
    acc += (h_tilde_mat.middleCols(g * m, m) * phi_stacked.middleCols(g * m, m)).trace();
  return acc;
}

CVec effective_channel(const Instance& inst, int user, const CMat& phi_t, const CMat& phi_r) {
  const Side side = inst.scenario.users.at(user).side;
  return inst.channels.g_mat.adjoint() * (phi_for(side, phi_t, phi_r).adjoint() * inst.channels.h.at(user));
}

double ci_slack(cdouble y, cdouble symbol, double margin, double half_angle) {
  const cdouble r = y * std::polar(1.0, -std::arg(symbol));
  return (r.real() - margin) * std::sin(half_angle) - std::abs(r.imag()) * std::cos(half_angle);
}

double min_ci_slack(const Instance& inst, const Waveform& wf, const CMat& phi_t, const CMat& phi_r) {
  const auto& s = inst.scenario;
  double worst = std::numeric_limits<double>::infinity();
  for (int u : s.active_users()) {
    const CVec h = effective_channel(inst, u, phi_t, phi_r);
    const double margin = std::sqrt(s.noise_comm * s.qos_linear(s.users[u]));
    const double scale = 1.0 / std::sqrt(s.noise_comm);
    for (int l = 0; l < s.code_len; ++l) {
      const cdouble y = h.dot(wf.w.col(l));
      worst = std::min(worst, scale * ci_slack(y, wf.symbols(u, l), margin, s.half_angle()));
    }
  }
  return worst;
}

}  // namespace bdris
