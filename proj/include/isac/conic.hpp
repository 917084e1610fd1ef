// SPDX-License-Identifier: Apache-2.0
//
// Small interior-point kernel for the convex subproblems produced by the
// beamforming solvers: maximize a concave objective (linear traces,
// square roots of linear traces, log(1+scalar)) over Hermitian PSD matrix
// variables and scalars, subject to linear trace constraints and convex
// quadratic surrogate constraints. Log-barrier path following with damped
// Newton steps; square roots are handled through their epigraphs.
#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include "isac/common.hpp"

namespace isac::conic {

// ---------------------------------------------------------------------------
// Packed real parameterization of Hermitian matrices (orthonormal basis, so
// Tr(A X) = pack(A) . pack(X)).

inline int herm_dim(int m) { return m * m; }

inline Eigen::VectorXd pack_hermitian(const Eigen::MatrixXcd& a) {
  const int m = static_cast<int>(a.rows());
  Eigen::VectorXd x(herm_dim(m));
  int p = 0;
  for (int i = 0; i < m; ++i) x(p++) = a(i, i).real();
  const double r2 = std::sqrt(2.0);
  for (int i = 0; i < m; ++i)
    for (int j = i + 1; j < m; ++j) {
      x(p++) = r2 * a(i, j).real();
      x(p++) = r2 * a(i, j).imag();
    }
  return x;
}

inline Eigen::MatrixXcd unpack_hermitian(const Eigen::VectorXd& x, int m) {
  Eigen::MatrixXcd a = Eigen::MatrixXcd::Zero(m, m);
  int p = 0;
  for (int i = 0; i < m; ++i) a(i, i) = x(p++);
  const double inv_r2 = 1.0 / std::sqrt(2.0);
  for (int i = 0; i < m; ++i)
    for (int j = i + 1; j < m; ++j) {
      const double re = x(p++) * inv_r2;
      const double im = x(p++) * inv_r2;
      a(i, j) = std::complex<double>(re, im);
      a(j, i) = std::complex<double>(re, -im);
    }
  return a;
}

// ---------------------------------------------------------------------------
// Problem description.

struct AffineExpr {
  double constant = 0.0;
  // (psd variable index, Hermitian coefficient): contributes Tr(A X).
  std::vector<std::pair<int, Eigen::MatrixXcd>> matrix_terms;
  // (scalar variable index, weight).
  std::vector<std::pair<int, double>> scalar_terms;

  AffineExpr& add_matrix(int var, Eigen::MatrixXcd coeff) {
    matrix_terms.emplace_back(var, std::move(coeff));
    return *this;
  }
  AffineExpr& add_scalar(int var, double w) {
    scalar_terms.emplace_back(var, w);
    return *this;
  }
};

enum class Sense { LessEq, GreaterEq, Equal };

struct LinearConstraint {
  AffineExpr expr;
  Sense sense = Sense::LessEq;
  double bound = 0.0;
};

// alpha * E(x)^2 + beta * s_j^2 <= R(x), with alpha, beta >= 0.
struct QuadConstraint {
  double alpha = 0.0;
  AffineExpr e;
  double beta = 0.0;
  int scalar_index = -1;  // -1: no scalar quadratic part
  AffineExpr rhs;
};

struct SqrtTerm {
  double weight = 0.0;  // >= 0 so the objective stays concave
  AffineExpr arg;
};

struct Log1pTerm {
  double weight = 0.0;  // >= 0
  int scalar_index = -1;
};

struct ConicProblem {
  int matrix_dim = 0;   // M, common to all PSD variables
  int psd_count = 0;
  int scalar_count = 0;

  AffineExpr linear_objective;          // maximized
  std::vector<SqrtTerm> sqrt_terms;
  std::vector<Log1pTerm> log_terms;
  std::vector<LinearConstraint> linear_constraints;
  std::vector<QuadConstraint> quad_constraints;
};

struct InitialPoint {
  std::vector<Eigen::MatrixXcd> matrices;
  Eigen::VectorXd scalars;
};

struct SolverOptions {
  double tolerance = 1e-7;   // relative optimality-gap target
  int max_iterations = 200;  // total Newton iteration cap
  double barrier_growth = 10.0;
  std::optional<InitialPoint> initial_point;
};

enum class SolveStatus { Optimal, Infeasible, NumericalFailure };

struct ConicSolution {
  SolveStatus status = SolveStatus::NumericalFailure;
  std::vector<Eigen::MatrixXcd> matrices;
  Eigen::VectorXd scalars;
  double objective = 0.0;     // value of the maximized objective
  double max_residual = 0.0;  // max constraint violation at the returned point
  int newton_iterations = 0;
  std::string message;
};

// ---------------------------------------------------------------------------
// Internal flattened form.

namespace detail {

struct FlatAffine {
  Eigen::VectorXd a;
  double c = 0.0;
  double eval(const Eigen::VectorXd& x) const { return c + a.dot(x); }
};

struct FlatQuad {
  double alpha = 0.0;
  FlatAffine e;
  double beta = 0.0;
  int s = -1;  // flat variable index of the scalar quadratic part
  FlatAffine rhs;

  // slack u = rhs - alpha e^2 - beta s^2; constraint is u >= 0
  double slack(const Eigen::VectorXd& x) const {
    double u = rhs.eval(x);
    if (alpha != 0.0) {
      const double ev = e.eval(x);
      u -= alpha * ev * ev;
    }
    if (s >= 0) u -= beta * x(s) * x(s);
    return u;
  }
};

struct FlatProblem {
  int n = 0;          // total flat dimension
  int m = 0;          // matrix dim
  int psd_count = 0;
  int scalar_offset = 0;  // flat index of the first problem scalar
  int scalar_count = 0;   // problem scalars (excludes epigraph auxiliaries)

  FlatAffine objective;                       // maximized, already scaled
  double objective_scale = 1.0;               // reported = scale * internal
  std::vector<std::pair<double, int>> logs;   // (scaled weight, flat index)
  std::vector<FlatAffine> ineqs;              // a.x + c <= 0 form
  std::vector<FlatQuad> quads;
  Eigen::MatrixXd eq_a;                       // eq_a x = eq_b
  Eigen::VectorXd eq_b;

  double barrier_complexity() const {
    return static_cast<double>(psd_count * m + ineqs.size() + 2 * quads.size());
  }
};

inline FlatAffine flatten(const AffineExpr& e, const FlatProblem& fp) {
  FlatAffine f;
  f.a = Eigen::VectorXd::Zero(fp.n);
  f.c = e.constant;
  const int hd = herm_dim(fp.m);
  for (const auto& [var, coeff] : e.matrix_terms)
    f.a.segment(var * hd, hd) += pack_hermitian(coeff);
  for (const auto& [var, w] : e.scalar_terms) f.a(fp.scalar_offset + var) += w;
  return f;
}

// Point-in-domain data computed once per candidate point.
struct DomainState {
  bool ok = false;
  std::vector<Eigen::MatrixXcd> inv;       // X^-1 per PSD variable
  std::vector<double> logdet;
  std::vector<double> ineq_slack;          // -(a.x + c)
  std::vector<double> quad_slack;
};

inline DomainState evaluate_domain(const FlatProblem& fp, const Eigen::VectorXd& x) {
  DomainState d;
  const int hd = herm_dim(fp.m);
  d.inv.resize(fp.psd_count);
  d.logdet.resize(fp.psd_count);
  for (int v = 0; v < fp.psd_count; ++v) {
    const Eigen::MatrixXcd mat = unpack_hermitian(x.segment(v * hd, hd), fp.m);
    Eigen::LLT<Eigen::MatrixXcd> llt(mat);
    if (llt.info() != Eigen::Success) return d;
    double ld = 0.0;
    for (int i = 0; i < fp.m; ++i) {
      const double diag = llt.matrixL()(i, i).real();
      if (!(diag > 0.0)) return d;
      ld += 2.0 * std::log(diag);
    }
    d.logdet[v] = ld;
    d.inv[v] = llt.solve(Eigen::MatrixXcd::Identity(fp.m, fp.m));
  }
  d.ineq_slack.reserve(fp.ineqs.size());
  for (const auto& g : fp.ineqs) {
    const double s = -g.eval(x);
    if (!(s > 0.0)) return d;
    d.ineq_slack.push_back(s);
  }
  d.quad_slack.reserve(fp.quads.size());
  for (const auto& q : fp.quads) {
    const double s = q.slack(x);
    if (!(s > 0.0)) return d;
    d.quad_slack.push_back(s);
  }
  for (const auto& [w, idx] : fp.logs)
    if (!(1.0 + x(idx) > 0.0)) return d;
  d.ok = true;
  return d;
}

inline double objective_value(const FlatProblem& fp, const Eigen::VectorXd& x) {
  double f = fp.objective.eval(x);
  for (const auto& [w, idx] : fp.logs) f += w * std::log1p(x(idx));
  return f;
}

inline double barrier_value(const FlatProblem& fp, const DomainState& d) {
  double phi = 0.0;
  for (int v = 0; v < fp.psd_count; ++v) phi -= d.logdet[v];
  for (double s : d.ineq_slack) phi -= std::log(s);
  for (double s : d.quad_slack) phi -= std::log(s);
  return phi;
}

// Gradient and Hessian of Phi_t = -t f + barrier.
inline void assemble(const FlatProblem& fp, const Eigen::VectorXd& x,
                     const DomainState& d, double t, Eigen::VectorXd& grad,
                     Eigen::MatrixXd& hess) {
  const int hd = herm_dim(fp.m);
  grad = -t * fp.objective.a;
  hess = Eigen::MatrixXd::Zero(fp.n, fp.n);
  for (const auto& [w, idx] : fp.logs) {
    const double denom = 1.0 + x(idx);
    grad(idx) -= t * w / denom;
    hess(idx, idx) += t * w / (denom * denom);
  }
  // PSD blocks: grad -pack(X^-1), Hessian columns pack(X^-1 B_p X^-1).
  for (int v = 0; v < fp.psd_count; ++v) {
    const int off = v * hd;
    grad.segment(off, hd) -= pack_hermitian(d.inv[v]);
    for (int p = 0; p < hd; ++p) {
      Eigen::VectorXd ep = Eigen::VectorXd::Zero(hd);
      ep(p) = 1.0;
      const Eigen::MatrixXcd bp = unpack_hermitian(ep, fp.m);
      hess.block(off, off, hd, hd).col(p) =
          pack_hermitian(d.inv[v] * bp * d.inv[v]);
    }
  }
  for (std::size_t i = 0; i < fp.ineqs.size(); ++i) {
    const double s = d.ineq_slack[i];
    const Eigen::VectorXd& a = fp.ineqs[i].a;
    grad += a / s;
    hess += (a / (s * s)) * a.transpose();
  }
  for (std::size_t i = 0; i < fp.quads.size(); ++i) {
    const auto& q = fp.quads[i];
    const double u = d.quad_slack[i];
    Eigen::VectorXd du = q.rhs.a;
    if (q.alpha != 0.0) du -= (2.0 * q.alpha * q.e.eval(x)) * q.e.a;
    if (q.s >= 0) du(q.s) -= 2.0 * q.beta * x(q.s);
    grad -= du / u;
    hess += (du / (u * u)) * du.transpose();
    if (q.alpha != 0.0) hess += (2.0 * q.alpha / u) * q.e.a * q.e.a.transpose();
    if (q.s >= 0) hess(q.s, q.s) += 2.0 * q.beta / u;
  }
}

struct CenterResult {
  bool ok = false;
  int iterations = 0;
  double objective = 0.0;
};

// Damped Newton minimization of Phi_t from a strictly feasible x (updated in
// place). early_exit: stop as soon as the internal objective exceeds it.
inline CenterResult center(const FlatProblem& fp, Eigen::VectorXd& x, double t,
                           int iter_cap, std::optional<double> early_exit) {
  CenterResult res;
  DomainState d = evaluate_domain(fp, x);
  if (!d.ok) return res;
  Eigen::VectorXd grad;
  Eigen::MatrixXd hess;
  const int m_eq = static_cast<int>(fp.eq_a.rows());
  int stalled = 0;  // consecutive iterations with negligible Phi_t progress
  for (int it = 0; it < iter_cap; ++it) {
    res.objective = objective_value(fp, x);
    if (early_exit && res.objective > *early_exit) {
      res.ok = true;
      return res;
    }
    assemble(fp, x, d, t, grad, hess);
    double reg = 0.0;
    Eigen::VectorXd dx;
    Eigen::VectorXd lam;
    for (int attempt = 0; attempt < 8; ++attempt) {
      Eigen::MatrixXd h = hess;
      if (reg > 0.0) h.diagonal().array() += reg;
      Eigen::LLT<Eigen::MatrixXd> llt(h);
      if (llt.info() != Eigen::Success) {
        reg = reg == 0.0 ? 1e-10 * (1.0 + hess.diagonal().maxCoeff()) : reg * 100.0;
        continue;
      }
      if (m_eq == 0) {
        dx = llt.solve(-grad);
      } else {
        const Eigen::MatrixXd hinv_at = llt.solve(fp.eq_a.transpose());
        const Eigen::VectorXd hinv_g = llt.solve(grad);
        const Eigen::MatrixXd schur = fp.eq_a * hinv_at;
        lam = schur.ldlt().solve(-fp.eq_a * hinv_g);
        dx = -llt.solve(grad + fp.eq_a.transpose() * lam);
      }
      break;
    }
    if (dx.size() == 0) return res;  // factorization failed repeatedly
    const double decrement2 = -grad.dot(dx);
    ++res.iterations;
    // Approximate centering suffices for the duality-gap certificate; the
    // threshold scales with t because Phi_t does.
    if (decrement2 < 2e-10 * std::max(1.0, 1e-4 * t)) {
      res.ok = true;
      return res;
    }
    // fraction-to-boundary + Armijo backtracking
    double step = 1.0;
    const double phi0 = -t * res.objective + barrier_value(fp, d);
    DomainState dn;
    bool accepted = false;
    for (int ls = 0; ls < 60; ++ls) {
      const Eigen::VectorXd xn = x + step * dx;
      dn = evaluate_domain(fp, xn);
      if (dn.ok) {
        const double phin = -t * objective_value(fp, xn) + barrier_value(fp, dn);
        if (phin <= phi0 - 0.25 * step * decrement2) {
          // whole-step progress below the floating-point floor counts as a
          // stall even when the formal decrement is still above threshold
          if (phi0 - phin < 1e-9 * (1.0 + std::abs(phi0)))
            ++stalled;
          else
            stalled = 0;
          x = xn;
          d = std::move(dn);
          accepted = true;
          break;
        }
      }
      step *= 0.5;
    }
    if (!accepted || stalled >= 5) {
      res.ok = true;  // stalled at numerical precision
      return res;
    }
  }
  res.ok = true;
  return res;
}

}  // namespace detail

// ---------------------------------------------------------------------------

inline ConicSolution solve(const ConicProblem& problem,
                           const SolverOptions& options = {}) {
  using namespace detail;
  ConicSolution sol;
  const int m = problem.matrix_dim;
  const int hd = herm_dim(m);

  FlatProblem fp;
  fp.m = m;
  fp.psd_count = problem.psd_count;
  fp.scalar_offset = problem.psd_count * hd;
  fp.scalar_count = problem.scalar_count;
  const int n_sqrt = static_cast<int>(problem.sqrt_terms.size());
  fp.n = fp.scalar_offset + problem.scalar_count + n_sqrt;

  // Objective: linear part + epigraph variables for the sqrt terms + logs.
  fp.objective = flatten(problem.linear_objective, fp);
  for (int i = 0; i < n_sqrt; ++i) {
    if (problem.sqrt_terms[i].weight < 0.0)
      throw ValidationError("sqrt objective weights must be nonnegative");
    fp.objective.a(fp.scalar_offset + problem.scalar_count + i) =
        problem.sqrt_terms[i].weight;
  }
  for (const auto& lt : problem.log_terms) {
    if (lt.weight < 0.0)
      throw ValidationError("log objective weights must be nonnegative");
    fp.logs.emplace_back(lt.weight, fp.scalar_offset + lt.scalar_index);
  }

  // Scale the objective to O(1) so gap targets are relative.
  double scale = std::abs(fp.objective.c);
  if (fp.objective.a.size() > 0)
    scale = std::max(scale, fp.objective.a.cwiseAbs().maxCoeff());
  for (const auto& [w, idx] : fp.logs) scale = std::max(scale, w);
  if (scale <= 0.0) scale = 1.0;
  fp.objective_scale = scale;
  fp.objective.a /= scale;
  fp.objective.c /= scale;
  for (auto& [w, idx] : fp.logs) w /= scale;

  // Constraints, normalized to a.x + c <= 0.
  std::vector<Eigen::VectorXd> eq_rows;
  std::vector<double> eq_vals;
  for (const auto& lc : problem.linear_constraints) {
    FlatAffine f = flatten(lc.expr, fp);
    f.c -= lc.bound;
    if (lc.sense == Sense::Equal) {
      eq_rows.push_back(f.a);
      eq_vals.push_back(-f.c);
      continue;
    }
    if (lc.sense == Sense::GreaterEq) {
      f.a = -f.a;
      f.c = -f.c;
    }
    fp.ineqs.push_back(std::move(f));
  }
  for (const auto& qc : problem.quad_constraints) {
    FlatQuad q;
    q.alpha = qc.alpha;
    q.beta = qc.beta;
    q.e = flatten(qc.e, fp);
    q.rhs = flatten(qc.rhs, fp);
    q.s = qc.scalar_index >= 0 ? fp.scalar_offset + qc.scalar_index : -1;
    fp.quads.push_back(std::move(q));
  }
  // Epigraph constraints y_i^2 <= arg_i.
  for (int i = 0; i < n_sqrt; ++i) {
    FlatQuad q;
    q.alpha = 0.0;
    q.beta = 1.0;
    q.s = fp.scalar_offset + problem.scalar_count + i;
    q.rhs = flatten(problem.sqrt_terms[i].arg, fp);
    q.e.a = Eigen::VectorXd::Zero(fp.n);
    fp.quads.push_back(std::move(q));
  }
  fp.eq_a.resize(eq_rows.size(), fp.n);
  fp.eq_b.resize(eq_rows.size());
  for (std::size_t i = 0; i < eq_rows.size(); ++i) {
    fp.eq_a.row(i) = eq_rows[i];
    fp.eq_b(i) = eq_vals[i];
  }

  // Initial point.
  Eigen::VectorXd x = Eigen::VectorXd::Zero(fp.n);
  for (int v = 0; v < fp.psd_count; ++v)
    x.segment(v * hd, hd) =
        pack_hermitian(Eigen::MatrixXcd::Identity(m, m));
  if (options.initial_point) {
    const auto& ip = *options.initial_point;
    for (int v = 0; v < fp.psd_count && v < static_cast<int>(ip.matrices.size()); ++v)
      x.segment(v * hd, hd) = pack_hermitian(ip.matrices[v]);
    for (int s = 0; s < fp.scalar_count && s < ip.scalars.size(); ++s)
      x(fp.scalar_offset + s) = ip.scalars(s);
  }
  if (fp.eq_a.rows() > 0) {
    // Project onto the equality subspace.
    const Eigen::VectorXd r = fp.eq_b - fp.eq_a * x;
    x += fp.eq_a.transpose() *
         (fp.eq_a * fp.eq_a.transpose()).ldlt().solve(r);
  }

  int newton_budget = options.max_iterations;

  DomainState d0 = evaluate_domain(fp, x);
  if (!d0.ok) {
    // Phase I: minimize the worst violation with an extra slack variable.
    FlatProblem p1 = fp;
    p1.n += 1;
    const int sv = fp.n;
    p1.objective.a = Eigen::VectorXd::Zero(p1.n);
    p1.objective.a(sv) = -1.0;  // maximize -sigma
    p1.objective.c = 0.0;
    p1.logs.clear();
    for (auto& g : p1.ineqs) {
      g.a.conservativeResize(p1.n);
      g.a(sv) = -1.0;
    }
    for (auto& q : p1.quads) {
      q.e.a.conservativeResize(p1.n);
      q.e.a(sv) = 0.0;
      q.rhs.a.conservativeResize(p1.n);
      q.rhs.a(sv) = 1.0;
    }
    if (p1.eq_a.rows() > 0) {
      p1.eq_a.conservativeResize(Eigen::NoChange, p1.n);
      p1.eq_a.col(sv).setZero();
    }
    Eigen::VectorXd x1(p1.n);
    x1.head(fp.n) = x;
    // sigma_0 strictly above the worst violation
    double worst = 0.0;
    for (const auto& g : fp.ineqs) worst = std::max(worst, g.eval(x));
    for (const auto& q : fp.quads) worst = std::max(worst, -q.slack(x));
    x1(sv) = worst + 1.0;
    DomainState d1 = evaluate_domain(p1, x1);
    if (!d1.ok) {
      sol.message = "phase I: could not construct an interior starting point";
      return sol;
    }
    const double nu1 = p1.barrier_complexity();
    double t = 1.0;
    bool feasible = false;
    while (sol.newton_iterations < newton_budget) {
      auto cr = center(p1, x1, t, newton_budget - sol.newton_iterations, 1e-9);
      sol.newton_iterations += cr.iterations;
      if (!cr.ok) {
        sol.message = "phase I: Newton failure";
        return sol;
      }
      if (cr.objective > 1e-9) {  // sigma < -1e-9: strict interior found
        feasible = true;
        break;
      }
      if (nu1 / t < 0.25 * options.tolerance) break;  // certified: sigma* >= 0
      t *= options.barrier_growth;
    }
    if (!feasible) {
      sol.status = SolveStatus::Infeasible;
      sol.message = "no strictly feasible point exists (phase I gap closed)";
      return sol;
    }
    x = x1.head(fp.n);
    // Epigraph variables restart at zero inside their domains.
    for (int i = 0; i < n_sqrt; ++i) x(fp.scalar_offset + fp.scalar_count + i) = 0.0;
    if (!evaluate_domain(fp, x).ok) {
      sol.message = "phase I produced a point outside the phase II domain";
      return sol;
    }
  }

  // Phase II: follow the central path.
  const double nu = fp.barrier_complexity();
  double t = 1.0;
  double f = 0.0;
  while (true) {
    auto cr = center(fp, x, t, newton_budget - sol.newton_iterations,
                     std::nullopt);
    sol.newton_iterations += cr.iterations;
    if (!cr.ok) {
      sol.message = "Newton failure during path following";
      return sol;
    }
    f = cr.objective;
    if (nu / t <= options.tolerance * std::max(1.0, std::abs(f))) break;
    if (sol.newton_iterations >= newton_budget) {
      sol.message = "iteration cap exceeded before reaching the gap target";
      return sol;
    }
    t *= options.barrier_growth;
  }

  sol.status = SolveStatus::Optimal;
  sol.objective = fp.objective_scale * f;
  sol.matrices.resize(fp.psd_count);
  for (int v = 0; v < fp.psd_count; ++v)
    sol.matrices[v] = unpack_hermitian(x.segment(v * hd, hd), m);
  sol.scalars = x.segment(fp.scalar_offset, fp.scalar_count);
  double resid = 0.0;
  for (const auto& g : fp.ineqs) resid = std::max(resid, g.eval(x));
  for (const auto& q : fp.quads) resid = std::max(resid, -q.slack(x));
  if (fp.eq_a.rows() > 0)
    resid = std::max(resid, (fp.eq_a * x - fp.eq_b).cwiseAbs().maxCoeff());
  sol.max_residual = std::max(0.0, resid);
  return sol;
}

}  // namespace isac::conic
