// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "bdris/types.hpp"

namespace bdris {

/// Real conic program
///   minimize c^T x  s.t.  A x = b,  G x + s = h,  s in K,
/// where K is a nonnegative orthant of dimension l followed by second-order
/// cones {(t, v) : |v| <= t}. Constraints are added through the builder
/// methods; the matrices are assembled on demand.
class SocpProblem {
 public:
  explicit SocpProblem(int n_vars);

  int n_vars() const { return n_; }
  int n_equalities() const { return static_cast<int>(eq_rhs_.size()); }
  int n_linear() const { return static_cast<int>(lin_rhs_.size()); }
  const std::vector<int>& cone_sizes() const { return soc_sizes_; }

  void set_objective(const RVec& c);
  const RVec& objective() const { return c_; }

  void add_equality(const RVec& row, double rhs);
  /// row^T x <= rhs.
  void add_inequality(const RVec& row, double rhs);
  /// |A x + b| <= c^T x + d.
  void add_soc(const RMat& a, const RVec& b, const RVec& c, double d);
  /// |R x + r|^2 <= c^T x + d, as the cone |[2(Rx + r); c^T x + d - 1]| <= c^T x + d + 1.
  void add_quadratic_le(const RMat& r, const RVec& r_off, const RVec& c, double d);

  RMat eq_matrix() const;
  RVec eq_rhs() const;
  /// Rows of G ordered as: linear inequalities, then each cone block.
  RMat cone_matrix() const;
  RVec cone_rhs() const;

  /// Plain-text dump: header line, then c, A|b and G|h rows, one per line.
  void write(std::ostream& os) const;
  static SocpProblem read(std::istream& is);

 private:
  int n_;
  RVec c_;
  std::vector<RVec> eq_rows_;
  std::vector<double> eq_rhs_;
  std::vector<RVec> lin_rows_;
  std::vector<double> lin_rhs_;
  std::vector<RMat> soc_g_;  // rows of G for each cone block
  std::vector<RVec> soc_h_;
  std::vector<int> soc_sizes_;
};

enum class SocpStatus { Optimal, Infeasible, Unbounded, MaxIterations, Inaccurate };

std::string to_string(SocpStatus status);

struct SocpOptions {
  double feastol = 1e-9;
  double abstol = 1e-9;
  double reltol = 1e-9;
  int max_iters = 200;
  int refinement_steps = 2;
};

struct SocpSolution {
  SocpStatus status = SocpStatus::MaxIterations;
  RVec x, y, z, s;
  double objective = 0.0;
  double primal_residual = 0.0;  // max(|Ax - b|_inf, |Gx + s - h|_inf)
  double dual_residual = 0.0;    // |A^T y + G^T z + c|_inf
  double gap = 0.0;              // s^T z
  int iterations = 0;
};

/// Primal-dual interior point method on the homogeneous self-dual embedding
/// with Nesterov-Todd scaling and Mehrotra correction. Deterministic.
SocpSolution solve_socp(const SocpProblem& problem, const SocpOptions& options = {});

/// Distance of s from the boundary of K: min over blocks of s_i (orthant) or
/// t - |v| (cone). Negative means s lies outside K.
double cone_margin(const RVec& s, int linear_dim, const std::vector<int>& cone_sizes);

/// Real representation of complex x as [Re x; Im x].
RVec stack_complex(const CVec& x);
CVec unstack_complex(const RVec& x);
/// Row r with r^T [Re x; Im x] = Re{h^H x}.
RVec re_inner_row(const CVec& h);
/// Row r with r^T [Re x; Im x] = Re{c^T x} (no conjugation).
RVec re_linear_row(const CVec& c);
/// Real matrix M with M [Re x; Im x] = [Re(R x); Im(R x)].
RMat real_embedding(const CMat& r);
/// R with R^H R = X for Hermitian PSD X; eigenvalues below 1e-12 lambda_max are dropped.
CMat psd_factor(const CMat& x);

}  // namespace bdris
