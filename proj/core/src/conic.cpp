// SPDX-License-Identifier: Apache-2.0
#include "bdris/conic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace bdris {

SocpProblem::SocpProblem(int n_vars) : n_(n_vars), c_(RVec::Zero(n_vars)) {
  if (n_vars < 1) throw std::invalid_argument("SocpProblem: need at least one variable");
}

void SocpProblem::set_objective(const RVec& c) {
  if (c.size() != n_) throw std::invalid_argument("SocpProblem: objective size mismatch");
  c_ = c;
}

void SocpProblem::add_equality(const RVec& row, double rhs) {
  if (row.size() != n_) throw std::invalid_argument("SocpProblem: equality row size mismatch");
  eq_rows_.push_back(row);
  eq_rhs_.push_back(rhs);
}

void SocpProblem::add_inequality(const RVec& row, double rhs) {
  if (row.size() != n_) throw std::invalid_argument("SocpProblem: inequality row size mismatch");
  if (!row.allFinite() || !std::isfinite(rhs)) throw std::invalid_argument("SocpProblem: non-finite inequality");
  lin_rows_.push_back(row);
  lin_rhs_.push_back(rhs);
}

void SocpProblem::add_soc(const RMat& a, const RVec& b, const RVec& c, double d) {
  if (a.cols() != n_ || c.size() != n_ || b.size() != a.rows())
    throw std::invalid_argument("SocpProblem: cone data size mismatch");
  if (!a.allFinite() || !b.allFinite() || !c.allFinite() || !std::isfinite(d))
    throw std::invalid_argument("SocpProblem: non-finite cone data");
  const Eigen::Index m = a.rows() + 1;
  RMat g(m, n_);
  RVec h(m);
  g.row(0) = -c.transpose();
  h(0) = d;
  g.bottomRows(a.rows()) = -a;
  h.tail(a.rows()) = b;
  soc_g_.push_back(std::move(g));
  soc_h_.push_back(std::move(h));
  soc_sizes_.push_back(static_cast<int>(m));
}

void SocpProblem::add_quadratic_le(const RMat& r, const RVec& r_off, const RVec& c, double d) {
  if (r.cols() != n_ || r_off.size() != r.rows()) throw std::invalid_argument("SocpProblem: quadratic size mismatch");
  RMat a(r.rows() + 1, n_);
  RVec b(r.rows() + 1);
  a.topRows(r.rows()) = 2.0 * r;
  b.head(r.rows()) = 2.0 * r_off;
  a.row(r.rows()) = c.transpose();
  b(r.rows()) = d - 1.0;
  add_soc(a, b, c, d + 1.0);
}

RMat SocpProblem::eq_matrix() const {
  RMat a(n_equalities(), n_);
  for (int i = 0; i < n_equalities(); ++i) a.row(i) = eq_rows_[i].transpose();
  return a;
}

RVec SocpProblem::eq_rhs() const { return Eigen::Map<const RVec>(eq_rhs_.data(), n_equalities()); }

RMat SocpProblem::cone_matrix() const {
  Eigen::Index m = n_linear();
  for (int q : soc_sizes_) m += q;
  RMat g(m, n_);
  Eigen::Index row = 0;
  for (int i = 0; i < n_linear(); ++i) g.row(row++) = lin_rows_[i].transpose();
  for (const auto& blk : soc_g_) {
    g.middleRows(row, blk.rows()) = blk;
    row += blk.rows();
  }
  return g;
}

RVec SocpProblem::cone_rhs() const {
  Eigen::Index m = n_linear();
  for (int q : soc_sizes_) m += q;
  RVec h(m);
  Eigen::Index row = 0;
  for (int i = 0; i < n_linear(); ++i) h(row++) = lin_rhs_[i];
  for (const auto& blk : soc_h_) {
    h.segment(row, blk.size()) = blk;
    row += blk.size();
  }
  return h;
}

namespace {

void write_row(std::ostream& os, const char* tag, const RVec& row, double rhs, bool with_rhs) {
  os << tag;
  for (Eigen::Index j = 0; j < row.size(); ++j) os << ' ' << row(j);
  if (with_rhs) os << " | " << rhs;
  os << '\n';
}

}  // namespace

void SocpProblem::write(std::ostream& os) const {
  const auto old_prec = os.precision(17);
  os << "socp " << n_ << ' ' << n_equalities() << ' ' << n_linear() << ' ' << soc_sizes_.size();
  for (int q : soc_sizes_) os << ' ' << q;
  os << '\n';
  write_row(os, "c", c_, 0.0, false);
  for (int i = 0; i < n_equalities(); ++i) write_row(os, "eq", eq_rows_[i], eq_rhs_[i], true);
  const RMat g = cone_matrix();
  const RVec h = cone_rhs();
  for (Eigen::Index i = 0; i < g.rows(); ++i) write_row(os, "g", g.row(i).transpose(), h(i), true);
  os.precision(old_prec);
}

SocpProblem SocpProblem::read(std::istream& is) {
  std::string tag;
  int n = 0, p = 0, l = 0, nq = 0;
  if (!(is >> tag >> n >> p >> l >> nq) || tag != "socp") throw std::runtime_error("SocpProblem::read: bad header");
  std::vector<int> sizes(nq);
  for (auto& q : sizes) is >> q;
  SocpProblem prob(n);
  auto read_row = [&](const char* expect, bool with_rhs, RVec& row, double& rhs) {
    std::string t, bar;
    if (!(is >> t) || t != expect) throw std::runtime_error("SocpProblem::read: expected '" + std::string(expect) + "'");
    row.resize(n);
    for (int j = 0; j < n; ++j) is >> row(j);
    if (with_rhs && !(is >> bar >> rhs)) throw std::runtime_error("SocpProblem::read: truncated row");
  };
  RVec row;
  double rhs = 0.0;
  read_row("c", false, row, rhs);
  prob.set_objective(row);
  for (int i = 0; i < p; ++i) {
    read_row("eq", true, row, rhs);
    prob.add_equality(row, rhs);
  }
  for (int i = 0; i < l; ++i) {
    read_row("g", true, row, rhs);
    prob.add_inequality(row, rhs);
  }
  for (int q : sizes) {
    RMat g(q, n);
    RVec h(q);
    for (int i = 0; i < q; ++i) {
      read_row("g", true, row, rhs);
      g.row(i) = row.transpose();
      h(i) = rhs;
    }
    prob.soc_g_.push_back(g);
    prob.soc_h_.push_back(h);
    prob.soc_sizes_.push_back(q);
  }
  if (!is) throw std::runtime_error("SocpProblem::read: truncated input");
  return prob;
}

std::string to_string(SocpStatus status) {
  switch (status) {
    case SocpStatus::Optimal: return "optimal";
    case SocpStatus::Infeasible: return "infeasible";
    case SocpStatus::Unbounded: return "unbounded";
    case SocpStatus::MaxIterations: return "max_iters";
    case SocpStatus::Inaccurate: return "inaccurate";
  }
  return "unknown";
}

namespace {

struct ConeLayout {
  int l = 0;
  std::vector<int> q;
  std::vector<int> offset;  // start of each cone block
  int m = 0;

  ConeLayout(int linear, const std::vector<int>& sizes) : l(linear), q(sizes) {
    int off = l;
    for (int s : q) {
      offset.push_back(off);
      off += s;
    }
    m = off;
  }
  int degree() const { return l + static_cast<int>(q.size()); }
};

RVec identity(const ConeLayout& k) {
  RVec e = RVec::Zero(k.m);
  e.head(k.l).setOnes();
  for (int off : k.offset) e(off) = 1.0;
  return e;
}

double min_eig(const RVec& x, const ConeLayout& k) {
  double v = std::numeric_limits<double>::infinity();
  if (k.l > 0) v = x.head(k.l).minCoeff();
  for (std::size_t i = 0; i < k.q.size(); ++i)
    v = std::min(v, x(k.offset[i]) - x.segment(k.offset[i] + 1, k.q[i] - 1).norm());
  return v;
}

RVec jordan(const RVec& u, const RVec& v, const ConeLayout& k) {
  RVec out(k.m);
  out.head(k.l) = u.head(k.l).cwiseProduct(v.head(k.l));
  for (std::size_t i = 0; i < k.q.size(); ++i) {
    const int o = k.offset[i], n = k.q[i] - 1;
    out(o) = u.segment(o, k.q[i]).dot(v.segment(o, k.q[i]));
    out.segment(o + 1, n) = u(o) * v.segment(o + 1, n) + v(o) * u.segment(o + 1, n);
  }
  return out;
}

// Solves lambda o x = d.
RVec jordan_divide(const RVec& lambda, const RVec& d, const ConeLayout& k) {
  RVec out(k.m);
  out.head(k.l) = d.head(k.l).cwiseQuotient(lambda.head(k.l));
  for (std::size_t i = 0; i < k.q.size(); ++i) {
    const int o = k.offset[i], n = k.q[i] - 1;
    const double l0 = lambda(o);
    const auto l1 = lambda.segment(o + 1, n);
    const double det = l0 * l0 - l1.squaredNorm();
    const double x0 = (l0 * d(o) - l1.dot(d.segment(o + 1, n))) / det;
    out(o) = x0;
    out.segment(o + 1, n) = (d.segment(o + 1, n) - x0 * l1) / l0;
  }
  return out;
}

// Largest alpha with x + alpha d in the cone, for x strictly inside.
double max_step(const RVec& x, const RVec& d, const ConeLayout& k) {
  double alpha = std::numeric_limits<double>::infinity();
  for (int i = 0; i < k.l; ++i)
    if (d(i) < 0.0) alpha = std::min(alpha, -x(i) / d(i));
  for (std::size_t i = 0; i < k.q.size(); ++i) {
    const int o = k.offset[i], n = k.q[i] - 1;
    const auto x1 = x.segment(o + 1, n);
    const auto d1 = d.segment(o + 1, n);
    const double a = d(o) * d(o) - d1.squaredNorm();
    const double b = x(o) * d(o) - x1.dot(d1);
    const double c = std::max(x(o) * x(o) - x1.squaredNorm(), 0.0);
    double root = std::numeric_limits<double>::infinity();
    if (a == 0.0) {
      if (b < 0.0) root = -c / (2.0 * b);
    } else {
      const double disc = b * b - a * c;
      if (disc >= 0.0) {
        const double q = -(b + std::copysign(std::sqrt(disc), b));
        for (double r : {q / a, q != 0.0 ? c / q : std::numeric_limits<double>::infinity()})
          if (r > 0.0) root = std::min(root, r);
      }
    }
    if (d(o) < 0.0) root = std::min(root, -x(o) / d(o));
    alpha = std::min(alpha, root);
  }
  return alpha;
}

// Nesterov-Todd scaling W (symmetric, W z = W^{-1} s = lambda).
struct Scaling {
  RVec d;                 // orthant diagonal
  std::vector<double> eta;
  std::vector<RVec> wbar;

  static Scaling compute(const RVec& s, const RVec& z, const ConeLayout& k) {
    Scaling w;
    w.d = (s.head(k.l).cwiseQuotient(z.head(k.l))).cwiseSqrt();
    for (std::size_t i = 0; i < k.q.size(); ++i) {
      const int o = k.offset[i], n = k.q[i] - 1;
      const double s1 = s.segment(o + 1, n).norm(), z1 = z.segment(o + 1, n).norm();
      const double sr = std::sqrt(std::max((s(o) - s1) * (s(o) + s1), 1e-300));
      const double zr = std::sqrt(std::max((z(o) - z1) * (z(o) + z1), 1e-300));
      const RVec sb = s.segment(o, k.q[i]) / sr;
      const RVec zb = z.segment(o, k.q[i]) / zr;
      const double gamma = std::sqrt(std::max((1.0 + sb.dot(zb)) / 2.0, 1e-300));
      RVec wb(k.q[i]);
      wb(0) = (sb(0) + zb(0)) / (2.0 * gamma);
      wb.tail(n) = (sb.tail(n) - zb.tail(n)) / (2.0 * gamma);
      // Renormalise against round-off so that wb stays on the unit hyperboloid.
      wb(0) = std::sqrt(1.0 + wb.tail(n).squaredNorm());
      w.eta.push_back(std::sqrt(sr / zr));
      w.wbar.push_back(std::move(wb));
    }
    return w;
  }

  // Replaces W by the scaling of the new iterates W st, W^{-1} zt, where st and
  // zt are given in the current scaled coordinates; returns the new lambda.
  // Working in scaled coordinates keeps the update accurate near the boundary.
  RVec update(const RVec& st, const RVec& zt, const ConeLayout& k) {
    RVec lambda(k.m);
    for (int i = 0; i < k.l; ++i) {
      const double a = std::sqrt(st(i)), b = std::sqrt(zt(i));
      d(i) *= a / b;
      lambda(i) = a * b;
    }
    for (std::size_t i = 0; i < k.q.size(); ++i) {
      const int o = k.offset[i], n = k.q[i] - 1;
      auto jnorm = [](const auto& x) {
        const double t = x.tail(x.size() - 1).norm();
        return std::sqrt(std::max((x(0) - t) * (x(0) + t), 1e-300));
      };
      const RVec ss = st.segment(o, k.q[i]);
      const RVec zz = zt.segment(o, k.q[i]);
      const double aa = jnorm(ss), bb = jnorm(zz);
      const RVec sn = ss / aa, zn = zz / bb;
      const double cc = std::sqrt(std::max((1.0 + sn.dot(zn)) / 2.0, 1e-300));
      // v = (wbar + e) / sqrt(2 (wbar_0 + 1)), so that 2 v v^T - J is the boost H(wbar).
      RVec v = wbar[i];
      v(0) += 1.0;
      v /= std::sqrt(2.0 * v(0));
      const double vs = v.dot(sn);
      const double vz = v(0) * zn(0) - v.tail(n).dot(zn.tail(n));
      const double vq = (vs + vz) / (2.0 * cc);
      const double vu = vs - vz;
      const double wk0 = 2.0 * v(0) * vq - (sn(0) + zn(0)) / (2.0 * cc);
      const double dd = (v(0) * vu - sn(0) / 2.0 + zn(0) / 2.0) / (wk0 + 1.0);
      lambda(o) = cc;
      lambda.segment(o + 1, n) = 2.0 * (-dd * vq + 0.5 * vu) * v.tail(n) + 0.5 * (1.0 - dd / cc) * sn.tail(n) +
                                 0.5 * (1.0 + dd / cc) * zn.tail(n);
      lambda.segment(o, k.q[i]) *= std::sqrt(aa * bb);
      RVec wk = 2.0 * vq * v;
      wk(0) -= (sn(0) + zn(0)) / (2.0 * cc);
      wk.tail(n) += (sn.tail(n) - zn.tail(n)) / (2.0 * cc);
      wk(0) = std::sqrt(1.0 + wk.tail(n).squaredNorm());
      wbar[i] = std::move(wk);
      eta[i] *= std::sqrt(aa / bb);
    }
    return lambda;
  }

  RVec apply(const RVec& v, const ConeLayout& k, bool inverse) const {
    RVec out(k.m);
    if (inverse) out.head(k.l) = v.head(k.l).cwiseQuotient(d);
    else out.head(k.l) = v.head(k.l).cwiseProduct(d);
    for (std::size_t i = 0; i < k.q.size(); ++i) {
      const int o = k.offset[i], n = k.q[i] - 1;
      const RVec& wb = wbar[i];
      const auto w1 = wb.tail(n);
      const auto v1 = v.segment(o + 1, n);
      const double sign = inverse ? -1.0 : 1.0;
      const double scale = inverse ? 1.0 / eta[i] : eta[i];
      const double w1v1 = w1.dot(v1);
      out(o) = scale * (wb(0) * v(o) + sign * w1v1);
      out.segment(o + 1, n) = scale * (sign * v(o) * w1 + v1 + (w1v1 / (1.0 + wb(0))) * w1);
    }
    return out;
  }
};

class KktSolver {
 public:
  KktSolver(const RMat& a, const RMat& g, const ConeLayout& k) : a_(a), g_(g), k_(k) {
    const Eigen::Index n = g_.cols();
    ata_ = RMat::Zero(n, n);
    if (a_.rows() > 0) ata_.selfadjointView<Eigen::Lower>().rankUpdate(a_.transpose());
    for (std::size_t i = 0; i < k_.q.size(); ++i) {
      RMat c = RMat::Zero(n, n);
      c.selfadjointView<Eigen::Lower>().rankUpdate(g_.middleRows(k_.offset[i], k_.q[i]).transpose());
      gram_.push_back(std::move(c));
    }
  }

  // G^T W^{-2} G assembled per block. With W^{-1} = (2 Jv v^T J - J) / eta on a
  // second-order block, G_i^T W_i^{-2} G_i = (C_i - 2 (p r^T + r p^T) + 4 |v|^2 r r^T) / eta^2
  // where C_i = G_i^T G_i, p = G_i^T v and r = G_i^T J v. Only the lower triangle is kept.
  void factor(const Scaling& w) {
    w_ = &w;
    RMat h = ata_;
    if (k_.l > 0) {
      const RMat gl = w.d.cwiseInverse().asDiagonal() * g_.topRows(k_.l);
      h.selfadjointView<Eigen::Lower>().rankUpdate(gl.transpose());
    }
    for (std::size_t i = 0; i < k_.q.size(); ++i) {
      const auto gi = g_.middleRows(k_.offset[i], k_.q[i]);
      RVec v = w.wbar[i];
      v(0) += 1.0;
      v /= std::sqrt(2.0 * v(0));
      RVec jv = -v;
      jv(0) = v(0);
      const RVec p = gi.transpose() * v;
      const RVec r = gi.transpose() * jv;
      const double sc = 1.0 / (w.eta[i] * w.eta[i]);
      h.triangularView<Eigen::Lower>() += sc * gram_[i];
      h.selfadjointView<Eigen::Lower>().rankUpdate(p, r, -2.0 * sc);
      h.selfadjointView<Eigen::Lower>().rankUpdate(r, 4.0 * sc * v.squaredNorm());
    }
    const double reg = 1e-13 * std::max(1.0, h.diagonal().maxCoeff());
    h.diagonal().array() += reg;
    llt_.compute(h);
    if (llt_.info() != Eigen::Success) {
      h.diagonal().array() += 1e3 * reg;
      llt_.compute(h);
    }
    if (a_.rows() > 0) {
      hinv_at_ = llt_.solve(a_.transpose());
      schur_.compute(a_ * hinv_at_);
    }
  }

  // [0 A^T G^T; A 0 0; G 0 -W^2] [x; y; z] = [bx; by; bz]
  void solve(const RVec& bx, const RVec& by, const RVec& bz, RVec& x, RVec& y, RVec& z, int refine) const {
    solve_once(bx, by, bz, x, y, z);
    for (int it = 0; it < refine; ++it) {
      const RVec rx = bx - (a_.transpose() * y + g_.transpose() * z);
      const RVec ry = by - a_ * x;
      const RVec rz = bz - (g_ * x - w2(z));
      RVec dx, dy, dz;
      solve_once(rx, ry, rz, dx, dy, dz);
      x += dx;
      y += dy;
      z += dz;
    }
  }

 private:
  RVec w2(const RVec& v) const { return w_->apply(w_->apply(v, k_, false), k_, false); }
  RVec w2inv(const RVec& v) const { return w_->apply(w_->apply(v, k_, true), k_, true); }

  void solve_once(const RVec& bx, const RVec& by, const RVec& bz, RVec& x, RVec& y, RVec& z) const {
    RVec rhs = bx + g_.transpose() * w2inv(bz);
    if (a_.rows() > 0) {
      rhs += a_.transpose() * by;
      const RVec hr = llt_.solve(rhs);
      y = schur_.solve(a_ * hr - by);
      x = llt_.solve(rhs - a_.transpose() * y);
    } else {
      y = RVec::Zero(0);
      x = llt_.solve(rhs);
    }
    z = w2inv(g_ * x - bz);
  }

  const RMat& a_;
  const RMat& g_;
  const ConeLayout& k_;
  const Scaling* w_ = nullptr;
  RMat ata_;
  std::vector<RMat> gram_;
  Eigen::LLT<RMat> llt_;
  RMat hinv_at_;
  Eigen::LDLT<RMat> schur_;
};

void shift_into_cone(RVec& v, const ConeLayout& k) {
  const double lo = min_eig(v, k);
  const double floor = 1e-8 * std::max(1.0, v.norm());
  if (lo < floor) v += (1.0 + std::max(0.0, -lo)) * identity(k);
}

}  // namespace

SocpSolution solve_socp(const SocpProblem& prob, const SocpOptions& opt) {
  const RMat a = prob.eq_matrix();
  const RVec b = prob.eq_rhs();
  const RMat g = prob.cone_matrix();
  const RVec h = prob.cone_rhs();
  const RVec& c = prob.objective();
  const ConeLayout k(prob.n_linear(), prob.cone_sizes());
  const int n = prob.n_vars();
  const int p = prob.n_equalities();

  SocpSolution sol;
  if (k.m == 0) throw std::invalid_argument("solve_socp: problem has no cone constraints");

  KktSolver kkt(a, g, k);
  Scaling w;
  w.d = RVec::Ones(k.l);
  for (int q : k.q) {
    RVec e = RVec::Zero(q);
    e(0) = 1.0;
    w.eta.push_back(1.0);
    w.wbar.push_back(e);
  }
  kkt.factor(w);

  RVec x, y, z, s;
  {
    RVec x0, y0, z0;
    kkt.solve(RVec::Zero(n), b, h, x0, y0, z0, opt.refinement_steps);
    x = x0;
    s = -z0;
    kkt.solve(-c, RVec::Zero(p), RVec::Zero(k.m), x0, y0, z0, opt.refinement_steps);
    y = y0;
    z = z0;
  }
  shift_into_cone(s, k);
  shift_into_cone(z, k);
  double tau = 1.0, kappa = 1.0;
  w = Scaling::compute(s, z, k);
  RVec lambda = w.apply(z, k, false);

  const double resx0 = std::max(1.0, c.norm());
  const double resy0 = std::max(1.0, b.norm());
  const double resz0 = std::max(1.0, h.norm());
  const RVec e = identity(k);
  const int deg = k.degree();
  struct Snapshot {
    RVec x, y, z, s;
    double tau = 1.0;
    double merit = std::numeric_limits<double>::infinity();
  } best;
  int stalled = 0;

  for (int iter = 0; iter <= opt.max_iters; ++iter) {
    sol.iterations = iter;
    const RVec rx = a.transpose() * y + g.transpose() * z + c * tau;
    const RVec ry = a * x - b * tau;
    const RVec rz = g * x + s - h * tau;
    const double cx = c.dot(x), by = b.dot(y), hz = h.dot(z);
    const double rt = kappa + cx + by + hz;

    const double pres = std::max(ry.norm() / resy0, rz.norm() / resz0) / tau;
    const double dres = rx.norm() / resx0 / tau;
    const double gap = s.dot(z) / (tau * tau);
    const double pcost = cx / tau, dcost = -(by + hz) / tau;
    double relgap = std::numeric_limits<double>::infinity();
    if (pcost < 0.0) relgap = gap / -pcost;
    else if (dcost > 0.0) relgap = gap / dcost;
    const double pinf = (hz + by < 0.0) ? (a.transpose() * y + g.transpose() * z).norm() / resx0 / -(hz + by)
                                         : std::numeric_limits<double>::infinity();
    const double dinf = (cx < 0.0) ? std::max((a * x).norm() / resy0, (g * x + s).norm() / resz0) / -cx
                                   : std::numeric_limits<double>::infinity();

    auto finish = [&](SocpStatus status, double scale) {
      sol.status = status;
      sol.x = x / scale;
      sol.y = y / scale;
      sol.z = z / scale;
      sol.s = s / scale;
      sol.objective = c.dot(sol.x);
      sol.primal_residual = std::max(p ? (a * sol.x - b).lpNorm<Eigen::Infinity>() : 0.0,
                                     (g * sol.x + sol.s - h).lpNorm<Eigen::Infinity>());
      sol.dual_residual = (a.transpose() * sol.y + g.transpose() * sol.z + c).lpNorm<Eigen::Infinity>();
      sol.gap = sol.s.dot(sol.z);
      return sol;
    };

    const double merit = std::max({pres / opt.feastol, dres / opt.feastol, std::min(gap / opt.abstol, relgap / opt.reltol)});
    if (merit <= 1.0) return finish(SocpStatus::Optimal, tau);
    if (pinf <= opt.feastol) return finish(SocpStatus::Infeasible, -(hz + by));
    if (dinf <= opt.feastol) return finish(SocpStatus::Unbounded, -cx);

    // Keep the best iterate: close to the tolerance floor rounding error can make
    // the residuals grow again, and then the best point seen is returned.
    if (merit < best.merit) {
      best = {x, y, z, s, tau, merit};
      stalled = 0;
    } else {
      ++stalled;
    }
    auto finish_best = [&]() {
      x = best.x, y = best.y, z = best.z, s = best.s;
      return finish(best.merit <= 1e3 ? SocpStatus::Inaccurate : SocpStatus::MaxIterations, best.tau);
    };
    if (iter == opt.max_iters || (stalled >= 5 && best.merit <= 1e3)) return finish_best();

    if (std::getenv("BDRIS_SOCP_TRACE"))
      std::fprintf(stderr, "it %d pres %.3e dres %.3e gap %.3e nt %.3e tau %.3e kappa %.3e\n", iter, pres, dres, gap,
                   (w.apply(z, k, false) - w.apply(s, k, true)).norm() / std::max(1e-300, lambda.norm()), tau, kappa);
    const double mu = (lambda.squaredNorm() + tau * kappa) / (deg + 1);
    kkt.factor(w);

    RVec dx1, dy1, dz1;
    kkt.solve(-c, b, h, dx1, dy1, dz1, opt.refinement_steps);
    const double denom_base = c.dot(dx1) + b.dot(dy1) + h.dot(dz1) - kappa / tau;

    struct Dir {
      RVec dx, dy, dz, ds_t, dz_t;
      double dtau, dkappa;
    };
    auto direction = [&](double eta, const RVec& d_s, double d_kappa) {
      Dir d;
      const RVec ld = jordan_divide(lambda, d_s, k);
      RVec dx0, dy0, dz0;
      kkt.solve(-eta * rx, -eta * ry, -eta * rz - w.apply(ld, k, false), dx0, dy0, dz0, opt.refinement_steps);
      d.dtau = (-eta * rt - d_kappa / tau - c.dot(dx0) - b.dot(dy0) - h.dot(dz0)) / denom_base;
      d.dkappa = (d_kappa - kappa * d.dtau) / tau;
      d.dx = dx0 + d.dtau * dx1;
      d.dy = dy0 + d.dtau * dy1;
      d.dz = dz0 + d.dtau * dz1;
      d.dz_t = w.apply(d.dz, k, false);
      d.ds_t = ld - d.dz_t;
      return d;
    };
    auto step = [&](const Dir& d) {
      double alpha = std::min(max_step(lambda, d.ds_t, k), max_step(lambda, d.dz_t, k));
      if (d.dtau < 0.0) alpha = std::min(alpha, -tau / d.dtau);
      if (d.dkappa < 0.0) alpha = std::min(alpha, -kappa / d.dkappa);
      return alpha;
    };

    const RVec ll = jordan(lambda, lambda, k);
    const Dir aff = direction(1.0, -ll, -tau * kappa);
    const double alpha_aff = std::min(1.0, step(aff));
    const double sigma = std::pow(std::clamp(1.0 - alpha_aff, 0.0, 1.0), 3);

    const RVec d_s = -ll - jordan(aff.ds_t, aff.dz_t, k) + sigma * mu * e;
    const double d_kappa = -tau * kappa - aff.dtau * aff.dkappa + sigma * mu;
    const Dir dir = direction(1.0 - sigma, d_s, d_kappa);
    const double alpha = std::min(1.0, 0.99 * step(dir));

    if (!(alpha > 1e-14) || !dir.dx.allFinite()) return finish_best();

    x += alpha * dir.dx;
    y += alpha * dir.dy;
    tau += alpha * dir.dtau;
    kappa += alpha * dir.dkappa;
    lambda = w.update(lambda + alpha * dir.ds_t, lambda + alpha * dir.dz_t, k);
    s = w.apply(lambda, k, false);
    z = w.apply(lambda, k, true);
  }
  return sol;
}

double cone_margin(const RVec& s, int linear_dim, const std::vector<int>& cone_sizes) {
  const ConeLayout k(linear_dim, cone_sizes);
  if (s.size() != k.m) throw std::invalid_argument("cone_margin: size mismatch");
  return min_eig(s, k);
}

RVec stack_complex(const CVec& x) {
  RVec out(2 * x.size());
  out << x.real(), x.imag();
  return out;
}

CVec unstack_complex(const RVec& x) {
  const Eigen::Index n = x.size() / 2;
  CVec out(n);
  for (Eigen::Index i = 0; i < n; ++i) out(i) = cdouble(x(i), x(n + i));
  return out;
}

RVec re_inner_row(const CVec& h) {
  RVec out(2 * h.size());
  out << h.real(), h.imag();
  return out;
}

RVec re_linear_row(const CVec& c) {
  RVec out(2 * c.size());
  out << c.real(), -c.imag();
  return out;
}

RMat real_embedding(const CMat& r) {
  const Eigen::Index m = r.rows(), n = r.cols();
  RMat out(2 * m, 2 * n);
  out.topLeftCorner(m, n) = r.real();
  out.topRightCorner(m, n) = -r.imag();
  out.bottomLeftCorner(m, n) = r.imag();
  out.bottomRightCorner(m, n) = r.real();
  return out;
}

CMat psd_factor(const CMat& x) {
  Eigen::SelfAdjointEigenSolver<CMat> eig(x);
  if (eig.info() != Eigen::Success) throw std::runtime_error("psd_factor: eigendecomposition failed");
  const RVec& ev = eig.eigenvalues();
  const double top = ev.size() ? ev.maxCoeff() : 0.0;
  if (ev.size() && ev.minCoeff() < -1e-8 * std::max(std::abs(top), 1e-300))
    throw std::invalid_argument("psd_factor: matrix is indefinite");
  std::vector<Eigen::Index> keep;
  for (Eigen::Index i = 0; i < ev.size(); ++i)
    if (ev(i) > 1e-12 * top && top > 0.0) keep.push_back(i);
  CMat r(static_cast<Eigen::Index>(keep.size()), x.cols());
  for (std::size_t j = 0; j < keep.size(); ++j)
    r.row(static_cast<Eigen::Index>(j)) = std::sqrt(ev(keep[j])) * eig.eigenvectors().col(keep[j]).adjoint();
  return r;
}

}  // namespace bdris
