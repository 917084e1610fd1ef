// SPDX-License-Identifier: Apache-2.0
#include <catch2/catch_amalgamated.hpp>

#include <complex>
#include <random>

#include <Eigen/Eigenvalues>

#include "isac/conic.hpp"

using namespace isac;
using namespace isac::conic;
using Cplx = std::complex<double>;

namespace {

Eigen::MatrixXcd random_hermitian(int m, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n01(0.0, 1.0);
  Eigen::MatrixXcd a(m, m);
  for (int r = 0; r < m; ++r)
    for (int c = 0; c < m; ++c) a(r, c) = Cplx(n01(rng), n01(rng));
  return ((a + a.adjoint()) / 2.0).eval();
}

double min_eig(const Eigen::MatrixXcd& x) {
  return Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd>(x).eigenvalues().minCoeff();
}

}  // namespace

TEST_CASE("pack_hermitian preserves the trace inner product") {
  for (std::uint64_t s = 0; s < 10; ++s) {
    const auto a = random_hermitian(3, 2 * s);
    const auto b = random_hermitian(3, 2 * s + 1);
    CHECK(pack_hermitian(a).dot(pack_hermitian(b)) ==
          Catch::Approx((a * b).trace().real()).epsilon(1e-12));
    CHECK((unpack_hermitian(pack_hermitian(a), 3) - a).cwiseAbs().maxCoeff() <
          1e-14);
  }
}

TEST_CASE("conic: trace-bounded PSD maximization hits P ||h||^2") {
  // maximize Tr(h h^H X) s.t. Tr(X) <= P. Optimum: P ||h||^2 along h.
  Eigen::VectorXcd h(3);
  h << Cplx(1.0, 0.5), Cplx(-0.3, 0.2), Cplx(0.0, -0.7);
  const double p_max = 0.5;  // identity start violates Tr <= 0.5: phase I runs
  ConicProblem prob;
  prob.matrix_dim = 3;
  prob.psd_count = 1;
  prob.linear_objective.add_matrix(0, h * h.adjoint());
  LinearConstraint power;
  power.expr.add_matrix(0, Eigen::MatrixXcd::Identity(3, 3));
  power.sense = Sense::LessEq;
  power.bound = p_max;
  prob.linear_constraints.push_back(power);

  const auto sol = solve(prob);
  REQUIRE(sol.status == SolveStatus::Optimal);
  CHECK(sol.objective == Catch::Approx(p_max * h.squaredNorm()).epsilon(1e-5));
  CHECK(sol.max_residual < 1e-6);
  CHECK(min_eig(sol.matrices[0]) > -1e-9);
  const auto x = sol.matrices[0];
  CHECK((x - x.adjoint()).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("conic: 1x1 problem reduces to a scalar LP") {
  ConicProblem prob;
  prob.matrix_dim = 1;
  prob.psd_count = 1;
  prob.linear_objective.add_matrix(0, Eigen::MatrixXcd::Constant(1, 1, 2.0));
  LinearConstraint cap;
  cap.expr.add_matrix(0, Eigen::MatrixXcd::Identity(1, 1));
  cap.bound = 3.0;
  prob.linear_constraints.push_back(cap);
  const auto sol = solve(prob);
  REQUIRE(sol.status == SolveStatus::Optimal);
  CHECK(sol.objective == Catch::Approx(6.0).epsilon(1e-5));
  CHECK(sol.matrices[0](0, 0).real() == Catch::Approx(3.0).epsilon(1e-5));
}

TEST_CASE("conic: contradictory scalar bounds are certified infeasible") {
  ConicProblem prob;
  prob.matrix_dim = 1;
  prob.scalar_count = 1;
  prob.linear_objective.add_scalar(0, 1.0);
  LinearConstraint up, lo;
  up.expr.add_scalar(0, 1.0);
  up.sense = Sense::LessEq;
  up.bound = 1.0;
  lo.expr.add_scalar(0, 1.0);
  lo.sense = Sense::GreaterEq;
  lo.bound = 2.0;
  prob.linear_constraints.push_back(up);
  prob.linear_constraints.push_back(lo);
  const auto sol = solve(prob);
  CHECK(sol.status == SolveStatus::Infeasible);
}

TEST_CASE("conic: unit-trace equality recovers the largest eigenvalue") {
  const auto a = random_hermitian(3, 42);
  ConicProblem prob;
  prob.matrix_dim = 3;
  prob.psd_count = 1;
  prob.linear_objective.add_matrix(0, a);
  LinearConstraint tr;
  tr.expr.add_matrix(0, Eigen::MatrixXcd::Identity(3, 3));
  tr.sense = Sense::Equal;
  tr.bound = 1.0;
  prob.linear_constraints.push_back(tr);
  const auto sol = solve(prob);
  REQUIRE(sol.status == SolveStatus::Optimal);
  const double lmax =
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd>(a).eigenvalues().maxCoeff();
  CHECK(sol.objective == Catch::Approx(lmax).epsilon(1e-5));
  CHECK(sol.matrices[0].trace().real() == Catch::Approx(1.0).margin(1e-7));
}

TEST_CASE("conic: sqrt epigraph, max of 2 sqrt(x) - x is 1 at x = 1") {
  ConicProblem prob;
  prob.matrix_dim = 1;
  prob.scalar_count = 1;
  prob.linear_objective.add_scalar(0, -1.0);
  SqrtTerm st;
  st.weight = 2.0;
  st.arg.add_scalar(0, 1.0);
  prob.sqrt_terms.push_back(st);
  LinearConstraint cap;
  cap.expr.add_scalar(0, 1.0);
  cap.bound = 100.0;
  prob.linear_constraints.push_back(cap);
  const auto sol = solve(prob);
  REQUIRE(sol.status == SolveStatus::Optimal);
  CHECK(sol.objective == Catch::Approx(1.0).epsilon(1e-5));
  CHECK(sol.scalars(0) == Catch::Approx(1.0).epsilon(1e-3));
}

TEST_CASE("conic: weighted sqrt split over a simplex gives sqrt(13)") {
  // maximize 2 sqrt(x1) + 3 sqrt(x2), x1 + x2 <= 1: optimum sqrt(4 + 9).
  ConicProblem prob;
  prob.matrix_dim = 1;
  prob.scalar_count = 2;
  SqrtTerm s1, s2;
  s1.weight = 2.0;
  s1.arg.add_scalar(0, 1.0);
  s2.weight = 3.0;
  s2.arg.add_scalar(1, 1.0);
  prob.sqrt_terms = {s1, s2};
  LinearConstraint budget;
  budget.expr.add_scalar(0, 1.0).add_scalar(1, 1.0);
  budget.bound = 1.0;
  prob.linear_constraints.push_back(budget);
  const auto sol = solve(prob);
  REQUIRE(sol.status == SolveStatus::Optimal);
  CHECK(sol.objective == Catch::Approx(std::sqrt(13.0)).epsilon(1e-5));
  CHECK(sol.scalars(0) == Catch::Approx(4.0 / 13.0).epsilon(1e-3));
  CHECK(sol.scalars(1) == Catch::Approx(9.0 / 13.0).epsilon(1e-3));
}

TEST_CASE("conic: log objective with a linear penalty peaks at s = 1") {
  // maximize log(1+s) - 0.5 s: optimum s = 1, value ln 2 - 0.5.
  ConicProblem prob;
  prob.matrix_dim = 1;
  prob.scalar_count = 1;
  prob.linear_objective.add_scalar(0, -0.5);
  prob.log_terms.push_back({1.0, 0});
  LinearConstraint box_lo, box_hi;
  box_lo.expr.add_scalar(0, 1.0);
  box_lo.sense = Sense::GreaterEq;
  box_lo.bound = -0.5;
  box_hi.expr.add_scalar(0, 1.0);
  box_hi.bound = 100.0;
  prob.linear_constraints.push_back(box_lo);
  prob.linear_constraints.push_back(box_hi);
  const auto sol = solve(prob);
  REQUIRE(sol.status == SolveStatus::Optimal);
  CHECK(sol.objective == Catch::Approx(std::log(2.0) - 0.5).margin(1e-5));
  CHECK(sol.scalars(0) == Catch::Approx(1.0).epsilon(1e-3));
}

TEST_CASE("conic: quadratic scalar cap s^2 <= 4 binds at s = 2") {
  ConicProblem prob;
  prob.matrix_dim = 1;
  prob.scalar_count = 1;
  prob.linear_objective.add_scalar(0, 1.0);
  QuadConstraint qc;
  qc.beta = 1.0;
  qc.scalar_index = 0;
  qc.rhs.constant = 4.0;
  prob.quad_constraints.push_back(qc);
  const auto sol = solve(prob);
  REQUIRE(sol.status == SolveStatus::Optimal);
  CHECK(sol.scalars(0) == Catch::Approx(2.0).epsilon(1e-5));
}

TEST_CASE("conic: affine quadratic term couples matrix and scalar blocks") {
  // maximize Tr(X) s.t. (Tr(X))^2 <= 2 + 2 s, s <= 1: optimum Tr(X) = 2.
  ConicProblem prob;
  prob.matrix_dim = 2;
  prob.psd_count = 1;
  prob.scalar_count = 1;
  prob.linear_objective.add_matrix(0, Eigen::MatrixXcd::Identity(2, 2));
  QuadConstraint qc;
  qc.alpha = 1.0;
  qc.e.add_matrix(0, Eigen::MatrixXcd::Identity(2, 2));
  qc.rhs.constant = 2.0;
  qc.rhs.add_scalar(0, 2.0);
  prob.quad_constraints.push_back(qc);
  LinearConstraint cap;
  cap.expr.add_scalar(0, 1.0);
  cap.bound = 1.0;
  prob.linear_constraints.push_back(cap);
  const auto sol = solve(prob);
  REQUIRE(sol.status == SolveStatus::Optimal);
  CHECK(sol.objective == Catch::Approx(2.0).epsilon(1e-4));
}

TEST_CASE("conic: solver output is deterministic") {
  const auto a = random_hermitian(3, 7);
  ConicProblem prob;
  prob.matrix_dim = 3;
  prob.psd_count = 1;
  prob.linear_objective.add_matrix(0, a);
  LinearConstraint tr;
  tr.expr.add_matrix(0, Eigen::MatrixXcd::Identity(3, 3));
  tr.bound = 2.0;
  prob.linear_constraints.push_back(tr);
  const auto s1 = solve(prob);
  const auto s2 = solve(prob);
  REQUIRE(s1.status == SolveStatus::Optimal);
  CHECK(s1.objective == s2.objective);
  CHECK((s1.matrices[0] - s2.matrices[0]).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("conic: negative sqrt weight is rejected") {
  ConicProblem prob;
  prob.matrix_dim = 1;
  prob.scalar_count = 1;
  SqrtTerm st;
  st.weight = -1.0;
  st.arg.add_scalar(0, 1.0);
  prob.sqrt_terms.push_back(st);
  CHECK_THROWS_AS(solve(prob), ValidationError);
}

TEST_CASE("conic: tiny trace coefficients still meet the relative gap") {
  // Same geometry as the MRT problem but with 1e-12 channel-scale entries.
  Eigen::VectorXcd h(3);
  h << Cplx(1e-6, 0.5e-6), Cplx(-0.3e-6, 0.2e-6), Cplx(0.0, -0.7e-6);
  ConicProblem prob;
  prob.matrix_dim = 3;
  prob.psd_count = 1;
  prob.linear_objective.add_matrix(0, h * h.adjoint());
  LinearConstraint power;
  power.expr.add_matrix(0, Eigen::MatrixXcd::Identity(3, 3));
  power.bound = 1.0;
  prob.linear_constraints.push_back(power);
  const auto sol = solve(prob);
  REQUIRE(sol.status == SolveStatus::Optimal);
  CHECK(sol.objective == Catch::Approx(h.squaredNorm()).epsilon(1e-5));
}
