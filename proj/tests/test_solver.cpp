#include <cmath>

#include "doctest.h"
#include "normscaler/model.hpp"
#include "normscaler/solver.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

using namespace normscaler;
using testsupport::gaussian_matrix;
using testsupport::gaussian_vector;
using testsupport::rel_err;

namespace {

ErrorKind kind_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an Error");
  return ErrorKind::SpecInvalid;
}

}  // namespace

TEST_CASE("conjugate exponent") {
  CHECK(conjugate_exponent(2.0) == 2.0);
  CHECK(conjugate_exponent(1.5) == doctest::Approx(3.0));
  CHECK(conjugate_exponent(1.1) == doctest::Approx(11.0));
  for (double p : {1.05, 1.3, 1.7, 1.99}) {
    CHECK(1.0 / p + 1.0 / conjugate_exponent(p) == doctest::Approx(1.0).epsilon(1e-14));
  }
  CHECK(kind_of([] { conjugate_exponent(1.0); }) == ErrorKind::DomainError);
  CHECK(kind_of([] { conjugate_exponent(2.5); }) == ErrorKind::DomainError);
}

TEST_CASE("kkt map") {
  const Vector v = gaussian_vector(7, 3);
  CHECK((kkt_map(v, 2.0) - v).norm() <= 1e-15 * v.norm());
  const Vector w = kkt_map((Vector(3) << -2, 0, 3).finished(), 3.0);
  CHECK(w[0] == doctest::Approx(-4.0));
  CHECK(w[1] == 0.0);
  CHECK(w[2] == doctest::Approx(9.0));
  CHECK(kkt_map((Vector(1) << 0.5).finished(), 11.0)[0] == doctest::Approx(0.0009765625).epsilon(1e-14));
  Vector bad = Vector::Ones(2);
  bad[1] = std::nan("");
  CHECK(kind_of([&] { kkt_map(bad, 3.0); }) == ErrorKind::NonFinite);
  bad[1] = INFINITY;
  CHECK(kind_of([&] { kkt_map(bad, 3.0); }) == ErrorKind::NonFinite);
}

TEST_CASE("dual objective") {
  const Matrix X = gaussian_matrix(4, 9, 1);
  const Vector Y = gaussian_vector(4, 2);
  CHECK(dual_objective(Vector::Zero(4), X, Y, 3.0) == 0.0);
  const Matrix one = Matrix::Constant(1, 1, 1.0);
  const Vector two = Vector::Constant(1, 2.0);
  CHECK(dual_objective(Vector::Ones(1), one, two, 3.0) == doctest::Approx(5.0 / 3.0));
  CHECK(kind_of([&] { dual_objective(Vector::Zero(3), X, Y, 3.0); }) == ErrorKind::DimensionMismatch);
}

TEST_CASE("dual optimum equals (1 - 1/q) ||w||_p^p") {
  const Matrix X = gaussian_matrix(15, 60, 8);
  const Vector Y = gaussian_vector(15, 9);
  for (double p : {1.2, 1.5, 1.8}) {
    const auto sol = solve_min_lp(X, Y, p);
    REQUIRE(sol.converged);
    const double q = conjugate_exponent(p);
    const double energy = std::pow(oracles::lp_norm(sol.w_hat, p), p);
    CHECK(rel_err(dual_objective(sol.lambda_star, X, Y, q), (1.0 - 1.0 / q) * energy) <= 1e-6);
  }
}

TEST_CASE("ray scale") {
  const Matrix one = Matrix::Constant(1, 1, 1.0);
  CHECK(ray_scale(one, Vector::Constant(1, 2.0), 3.0) == doctest::Approx(0.70710678).epsilon(1e-8));

  // Rows orthonormal: X X^T = I.
  const Matrix Q = oracles::row_space_basis(gaussian_matrix(5, 12, 4)).transpose();
  CHECK(ray_scale(Q, gaussian_vector(5, 6), 2.0) == doctest::Approx(1.0).epsilon(1e-12));

  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const Matrix X = gaussian_matrix(5, 20, 100 + seed);
    const Vector Y = gaussian_vector(5, 200 + seed);
    for (double q : {2.5, 3.0, 6.0}) {
      CHECK(rel_err(ray_scale(X, Y, q), oracles::ray_grid_search(X, Y, q)) <= 1e-4);
    }
  }

  Matrix X = Matrix::Zero(2, 3);
  X(0, 0) = 1.0;
  X(1, 0) = -1.0;
  CHECK(kind_of([&] { ray_scale(X, Vector::Ones(2), 3.0); }) == ErrorKind::DegenerateInstance);
}

TEST_CASE("closed-form minimum l2 interpolant") {
  Matrix X = Matrix::Zero(3, 7);
  X.leftCols(3).setIdentity();
  const Vector Y = (Vector(3) << 1.5, -2, 0.25).finished();
  const Vector w = min_l2_closed_form(X, Y);
  CHECK(w.head(3) == Y);
  CHECK(w.tail(4).isZero(0.0));

  const Matrix row = (Matrix(1, 2) << 3, 4).finished();
  const Vector w2 = min_l2_closed_form(row, Vector::Constant(1, 5.0));
  CHECK(w2[0] == doctest::Approx(0.6));
  CHECK(w2[1] == doctest::Approx(0.8));

  const Matrix G = gaussian_matrix(30, 120, 77);
  const Vector Yg = gaussian_vector(30, 78);
  const Vector wg = min_l2_closed_form(G, Yg);
  CHECK((G * wg - Yg).norm() / Yg.norm() <= 1e-10);
  // Null-space vectors from an SVD-based projector; w must be orthogonal to each.
  const Matrix Qr = oracles::row_space_basis(G);
  for (std::uint64_t k = 0; k < 10; ++k) {
    Vector z = gaussian_vector(120, 500 + k);
    z -= Qr * (Qr.transpose() * z);
    CHECK(std::abs(wg.dot(z)) <= 1e-10 * wg.norm() * z.norm());
  }

  const Matrix rank_deficient = Matrix::Ones(2, 5);
  CHECK(kind_of([&] { min_l2_closed_form(rank_deficient, Vector::Ones(2)); }) == ErrorKind::SingularGram);
}

TEST_CASE("scalar instance has a unique interpolant") {
  const Matrix X = Matrix::Constant(1, 1, 2.0);
  const Vector Y = Vector::Constant(1, 6.0);
  for (double p : {1.1, 1.5, 2.0}) {
    const auto sol = solve_min_lp(X, Y, p);
    CHECK(sol.w_hat[0] == doctest::Approx(3.0).epsilon(1e-8));
    CHECK(2.0 * sol.lambda_star[0] == doctest::Approx(std::pow(3.0, p - 1.0)).epsilon(1e-7));
  }
}

TEST_CASE("p = 2 solve matches the closed form") {
  const Matrix X = gaussian_matrix(20, 100, 12);
  const Vector Y = gaussian_vector(20, 13);
  const auto sol = solve_min_lp(X, Y, 2.0);
  const Vector ref = oracles::min_l2_svd(X, Y);
  CHECK((sol.w_hat - ref).norm() <= 1e-8 * ref.norm());
  CHECK(sol.converged);
}

TEST_CASE("p = 1.5 solve beats a projected-subgradient oracle") {
  const Matrix X = gaussian_matrix(10, 40, 31);
  const Vector Y = gaussian_vector(10, 32);
  const auto sol = solve_min_lp(X, Y, 1.5);
  REQUIRE(sol.converged);
  const double oracle = oracles::projected_subgradient_min(X, Y, 1.5, 1'000'000);
  CHECK(oracles::lp_norm(sol.w_hat, 1.5) <= (1.0 + 1e-4) * oracle);
}

TEST_CASE("converged solves satisfy both certificates") {
  for (std::uint64_t seed = 1; seed <= 12; ++seed) {
    const int n = 5 + static_cast<int>(seed * 3);
    const Matrix X = gaussian_matrix(n, 4 * n, seed);
    const Vector Y = gaussian_vector(n, 1000 + seed);
    for (double p : {1.1, 1.3, 1.5, 1.75, 2.0}) {
      const auto sol = solve_min_lp(X, Y, p);
      REQUIRE(sol.converged);
      CHECK(sol.feas_residual <= 1e-8);
      CHECK(sol.cert_residual <= 1e-6);
      CHECK(certificate_residual(X, Y, sol.w_hat, sol.lambda_star, p) <= 1e-6);
      CHECK((X * sol.w_hat - Y).norm() <= 1e-8 * Y.norm() * (1 + 1e-9));
    }
  }
}

TEST_CASE("dual ascent is monotone") {
  const Matrix X = gaussian_matrix(25, 100, 41);
  const Vector Y = gaussian_vector(25, 42);
  SolverOptions opts;
  opts.record_trace = true;
  for (auto ls : {LineSearch::BarzilaiBorwein, LineSearch::Backtracking}) {
    opts.line_search = ls;
    const auto sol = solve_min_lp(X, Y, 1.3, opts);
    REQUIRE(sol.objective_trace.size() >= 2);
    for (std::size_t k = 1; k < sol.objective_trace.size(); ++k) {
      const double prev = sol.objective_trace[k - 1];
      CHECK(sol.objective_trace[k] >= prev - 1e-13 * std::abs(prev));
    }
  }
}

TEST_CASE("scale equivariance") {
  const Matrix X = gaussian_matrix(12, 50, 51);
  const Vector Y = gaussian_vector(12, 52);
  const double c = 7.5;
  const auto base = solve_min_lp(X, Y, 2.0);
  const auto scaled = solve_min_lp(X, c * Y, 2.0);
  CHECK((scaled.w_hat - c * base.w_hat).norm() <= 1e-10 * c * base.w_hat.norm());
  for (double p : {1.2, 1.6}) {
    const auto s = solve_min_lp(X, c * Y, p);
    REQUIRE(s.converged);
    CHECK((X * s.w_hat - c * Y).norm() <= 1e-8 * c * Y.norm());
    CHECK(s.cert_residual <= 1e-6);
    // For min-lp the solution is also exactly homogeneous.
    const auto b = solve_min_lp(X, Y, p);
    CHECK((s.w_hat - c * b.w_hat).norm() <= 1e-6 * c * b.w_hat.norm());
  }
}

TEST_CASE("each solution is minimal in its own norm") {
  const Matrix X = gaussian_matrix(15, 60, 61);
  const Vector Y = gaussian_vector(15, 62);
  const double ps[] = {1.1, 1.4, 1.7, 2.0};
  Vector sols[4];
  for (int i = 0; i < 4; ++i) sols[i] = solve_min_lp(X, Y, ps[i]).w_hat;
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) {
      if (i == j) continue;
      CHECK(oracles::lp_norm(sols[i], ps[i]) <= oracles::lp_norm(sols[j], ps[i]) * (1.0 + 1e-9));
    }
  }
}

TEST_CASE("continuity as p approaches 2") {
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const Matrix X = gaussian_matrix(20, 100, 70 + seed);
    const Vector Y = gaussian_vector(20, 80 + seed);
    const Vector w2 = solve_min_lp(X, Y, 2.0).w_hat;
    const Vector w = solve_min_lp(X, Y, 1.999).w_hat;
    CHECK((w - w2).norm() / w2.norm() <= 1e-2);
  }
}

TEST_CASE("zero labels return the zero interpolant") {
  const Matrix X = gaussian_matrix(5, 20, 90);
  const auto sol = solve_min_lp(X, Vector::Zero(5), 1.5);
  CHECK(sol.degenerate);
  CHECK(sol.converged);
  CHECK(sol.iters == 0);
  CHECK(sol.w_hat.isZero(0.0));
}

TEST_CASE("domain and option validation") {
  const Matrix X = gaussian_matrix(5, 20, 91);
  const Vector Y = gaussian_vector(5, 92);
  CHECK(kind_of([&] { solve_min_lp(X, Y, 1.02); }) == ErrorKind::DomainError);
  CHECK(kind_of([&] { solve_min_lp(X, Y, 2.1); }) == ErrorKind::DomainError);
  CHECK(kind_of([&] { solve_min_lp(X, Vector::Ones(4), 1.5); }) == ErrorKind::DimensionMismatch);
  SolverOptions bad;
  bad.tol_feas = 1.5;
  CHECK(kind_of([&] { bad.validate(); }) == ErrorKind::ConfigError);
  bad = {};
  bad.p_floor = 1.0;
  CHECK(kind_of([&] { bad.validate(); }) == ErrorKind::ConfigError);
}

TEST_CASE("iteration cap is reported, not thrown") {
  const Matrix X = gaussian_matrix(40, 200, 93);
  const Vector Y = gaussian_vector(40, 94);
  SolverOptions opts;
  opts.max_iters = 2;
  const auto sol = solve_min_lp(X, Y, 1.1, opts);
  CHECK_FALSE(sol.converged);
  CHECK(sol.iters == 2);
  CHECK(sol.w_hat.size() == 200);
}
