#include <cmath>
#include <random>

#include "doctest.h"
#include "epirk/errors.hpp"
#include "epirk/integrator.hpp"
#include "epirk/problems.hpp"
#include "json.hpp"
#include "oracles.hpp"

using namespace epirk;

namespace {

Problem scalar_quadratic(double lambda) {
  Problem p;
  p.name = "scalar";
  p.dimension = 1;
  p.initial = Vector::Constant(1, 0.1);
  p.rhs = [lambda](const Vector& u, Vector& f) { f = Vector::Constant(1, lambda * u[0] + u[0] * u[0]); };
  p.jac_apply = [lambda](const Vector& u, const Vector& v, Vector& out) {
    out = Vector::Constant(1, (lambda + 2 * u[0]) * v[0]);
  };
  return p;
}

Problem linear_problem(const Matrix& A, const Vector& u0) {
  Problem p;
  p.name = "linear";
  p.dimension = A.rows();
  p.initial = u0;
  p.rhs = [A](const Vector& u, Vector& f) { f = A * u; };
  p.jac_apply = [A](const Vector&, const Vector& v, Vector& out) { out = A * v; };
  return p;
}

Matrix heat_matrix(int n) {
  const double dx = 1.0 / (n + 1);
  Matrix A = Matrix::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    A(i, i) = -2.0 / (dx * dx);
    if (i > 0) A(i, i - 1) = 1.0 / (dx * dx);
    if (i + 1 < n) A(i, i + 1) = 1.0 / (dx * dx);
  }
  return A;
}

std::vector<Strategy> all_strategies() { return {Strategy::vertical, Strategy::horizontal, Strategy::mixed}; }

}  // namespace

TEST_CASE("remainder") {
  auto P = allen_cahn_2d(8);
  StepContext ctx = make_context(P, P.initial, 0.1);
  CHECK(remainder(P.initial, ctx).lpNorm<Eigen::Infinity>() == 0.0);

  std::mt19937_64 rng(1);
  Matrix A = oracle::random_matrix(rng, 6, 3.0);
  auto L = linear_problem(A, oracle::random_vector(rng, 6));
  StepContext lc = make_context(L, L.initial, 0.3);
  CHECK(remainder(oracle::random_vector(rng, 6), lc).lpNorm<Eigen::Infinity>() < 1e-14);

  Problem sq;
  sq.dimension = 1;
  sq.rhs = [](const Vector& u, Vector& f) { f = u.cwiseProduct(u); };
  sq.jac_apply = [](const Vector& u, const Vector& v, Vector& out) { out = 2 * u.cwiseProduct(v); };
  StepContext sc = make_context(sq, Vector::Constant(1, 1.0), 0.1);
  CHECK(remainder(Vector::Constant(1, 1.5), sc)[0] == doctest::Approx(0.25).epsilon(1e-15));

  Problem bad = sq;
  bad.rhs = [](const Vector& u, Vector& f) { f = u.array().log().matrix(); };
  StepContext bc = make_context(bad, Vector::Constant(1, 1.0), 0.1);
  CHECK_THROWS_AS(remainder(Vector::Constant(1, -1.0), bc), NumericFailure);
  CHECK_THROWS_AS(remainder(Vector::Zero(2), sc), InvalidArgument);
}

TEST_CASE("plans and projection counts") {
  auto A = builtin(BuiltinScheme::EPIRK4s3A);
  auto v = plan(A, Strategy::vertical);
  CHECK(v.expected_projection_count == 3);
  REQUIRE(v.projections[0].kind == TaskKind::column);
  CHECK(v.projections[0].source == 1);
  CHECK(v.projections[0].waypoints == std::vector<Rational>{Rational(1, 2), Rational(2, 3), Rational(1)});
  CHECK(v.projections[1].max_order == 4);
  CHECK(v.projections[1].min_order == 3);
  CHECK(plan(A, Strategy::horizontal).expected_projection_count == 3);
  auto mx = plan(A, Strategy::mixed);
  CHECK(mx.expected_projection_count == 2);
  CHECK(mx.projections[0].waypoints == std::vector<Rational>{Rational(1, 2), Rational(2, 3)});
  CHECK(mx.projections[1].kind == TaskKind::row);

  auto h5 = plan(builtin(BuiltinScheme::EPIRK5s3), Strategy::horizontal);
  REQUIRE(h5.expected_projection_count == 3);
  CHECK(h5.projections[0].waypoints.front() == Rational(48, 55));
  CHECK(h5.projections[1].waypoints.front() == Rational(4, 9));
  CHECK(h5.projections[2].waypoints.front() == Rational(1));

  auto X = builtin(BuiltinScheme::EXPRB53s3);
  CHECK(plan(X, Strategy::vertical).expected_projection_count == 3);
  CHECK(plan(X, Strategy::mixed).expected_projection_count == 3);
  try {
    plan(X, Strategy::horizontal);
    CHECK(false);
  } catch (const PlanInfeasible& e) {
    CHECK(e.stage() == 3);
  }
  CHECK(plan(builtin(BuiltinScheme::EPIRK4s3B), Strategy::mixed).expected_projection_count == 2);

  // embedded estimate: free for vertical, one extra row otherwise
  CHECK(plan(A, Strategy::vertical, true).expected_projection_count == 3);
  CHECK(plan(A, Strategy::horizontal, true).expected_projection_count == 4);
  CHECK(plan(A, Strategy::mixed, true).expected_projection_count == 3);
  CHECK_THROWS_AS(plan(X, Strategy::vertical, true), NotAvailable);
  CHECK(v.describe().find("downshift") != std::string::npos);
}

TEST_CASE("scalar step against a direct evaluation") {
  const double lambda = -2.0, u0 = 0.1, h = 0.1;
  auto f = [&](long double u) { return lambda * u + u * u; };
  const long double J = lambda + 2 * u0, z = h * J, fn = f(u0);
  auto r = [&](long double U) { return f(U) - fn - J * (U - u0); };
  const long double U2 = u0 + 0.5L * oracle::phi(1, z / 2) * h * fn;
  const long double U3 = u0 + (2.0L / 3) * oracle::phi(1, 2 * z / 3) * h * fn;
  const long double expect = u0 + oracle::phi(1, z) * h * fn +
                             (32 * oracle::phi(3, z) - 144 * oracle::phi(4, z)) * h * r(U2) +
                             (-13.5L * oracle::phi(3, z) + 81 * oracle::phi(4, z)) * h * r(U3);
  auto P = scalar_quadratic(lambda);
  auto m = builtin(BuiltinScheme::EPIRK4s3A);
  for (auto s : all_strategies()) {
    auto res = step(make_context(P, P.initial, h), m, plan(m, s), 1e-14);
    CHECK(std::abs(res.u_next[0] - static_cast<double>(expect)) < 1e-12);
    CHECK(res.residual_vectors.size() == 2);
  }
}

TEST_CASE("linear problems are integrated exactly") {
  const int n = 64;
  Matrix A = heat_matrix(n);
  Vector u0 = heat_1d(n).initial;
  const double h = 0.01, tol = 1e-10;
  const Vector exact = (oracle::phi_matrix(0, A * h)[0] * u0.cast<long double>()).cast<double>();
  auto L = linear_problem(A, u0);
  for (const auto& name : builtin_names()) {
    auto m = builtin(name);
    for (auto s : all_strategies()) {
      ExecutionPlan p;
      try {
        p = plan(m, s);
      } catch (const PlanInfeasible&) {
        continue;
      }
      auto res = step(make_context(L, u0, h), m, p, tol);
      INFO(name << " " << to_string(s));
      CHECK((res.u_next - exact).lpNorm<Eigen::Infinity>() <= 10 * tol);
      for (const auto& r : res.residual_vectors) CHECK(r.lpNorm<Eigen::Infinity>() < 1e-9);
    }
  }
}

TEST_CASE("strategies agree step by step") {
  auto P = allen_cahn_2d(16);
  const double tol = 1e-12;
  for (const auto& name : builtin_names()) {
    auto m = builtin(name);
    Vector u = P.initial;
    for (int q = 0; q < 3; ++q) {
      std::vector<Vector> out;
      for (auto s : all_strategies()) {
        try {
          out.push_back(step(make_context(P, u, 0.05), m, plan(m, s), tol).u_next);
        } catch (const PlanInfeasible&) {
        }
      }
      REQUIRE(out.size() >= 2);
      for (std::size_t a = 1; a < out.size(); ++a) CHECK((out[a] - out[0]).lpNorm<Eigen::Infinity>() <= 1e-9);
      u = out[0];
    }
  }
}

TEST_CASE("forward-difference and residual forms execute identically") {
  auto P = brusselator_2d(8);
  for (const auto& name : builtin_names()) {
    auto r = builtin(name);
    auto d = to_forward_difference_method(r);
    auto a = step(make_context(P, P.initial, 0.05), r, plan(r, Strategy::vertical), 1e-13).u_next;
    auto b = step(make_context(P, P.initial, 0.05), d, plan(d, Strategy::vertical), 1e-13).u_next;
    CHECK((a - b).lpNorm<Eigen::Infinity>() < 1e-11);
  }
}

TEST_CASE("embedded estimate agrees across strategies and costs no vertical projection") {
  auto P = allen_cahn_2d(16);
  auto m = builtin(BuiltinScheme::EPIRK4s3A);
  std::vector<double> est;
  for (auto s : all_strategies()) {
    auto pl = plan(m, s, true);
    auto res = step(make_context(P, P.initial, 0.1), m, pl, 1e-13);
    REQUIRE(res.err_estimate.has_value());
    CHECK(res.projections == pl.expected_projection_count);
    est.push_back(*res.err_estimate);
  }
  CHECK(est[0] > 0.0);
  CHECK(std::abs(est[1] - est[0]) < 1e-10);
  CHECK(std::abs(est[2] - est[0]) < 1e-10);

  // dense oracle of the difference (24 phi3 - 144 phi4) h r2 + (-27/2 phi3 + 81 phi4) h r3
  const double h = 0.1;
  auto ctx = make_context(P, P.initial, h);
  auto res = step(ctx, m, plan(m, Strategy::vertical, true), 1e-13);
  Matrix Z = h * dense_jacobian(P, P.initial);
  auto ph = oracle::phi_matrix(4, Z);
  Matrix p3 = ph[3].cast<double>(), p4 = ph[4].cast<double>();
  Vector expect = (24 * p3 - 144 * p4) * (h * res.residual_vectors[0]) + (-13.5 * p3 + 81 * p4) * (h * res.residual_vectors[1]);
  CHECK((res.error_vector - expect).lpNorm<Eigen::Infinity>() < 1e-11);
}

TEST_CASE("step failures carry the stage") {
  auto P = allen_cahn_2d(16);
  auto m = builtin(BuiltinScheme::EPIRK4s3A);
  KrylovOptions tiny;
  tiny.max_matvecs = 3;
  try {
    step(make_context(P, P.initial, 0.1), m, plan(m, Strategy::horizontal), 1e-12, tiny);
    CHECK(false);
  } catch (const StepFailure& e) {
    CHECK(e.stage() == 2);
    CHECK_FALSE(e.numeric());
  }
  auto other = plan(builtin(BuiltinScheme::EPIRK4s3B), Strategy::mixed);
  CHECK_THROWS_AS(step(make_context(P, P.initial, 0.1), m, other, 1e-12), InvalidArgument);
}

TEST_CASE("finite-difference Jacobian fallback") {
  auto P = allen_cahn_2d(12);
  auto m = builtin(BuiltinScheme::EPIRK4s3A);
  auto a = integrate_fixed(P, m, Strategy::mixed, {0.0, 0.2}, 0.05, 1e-12);
  IntegratorOptions fd;
  fd.jacobian = JacobianMode::finite_difference;
  auto b = integrate_fixed(P, m, Strategy::mixed, {0.0, 0.2}, 0.05, 1e-12, fd);
  CHECK((a.final_state - b.final_state).lpNorm<Eigen::Infinity>() < 1e-6);
}

TEST_CASE("fixed-step driver") {
  auto Z = zero_problem(7);
  auto rz = integrate_fixed(Z, builtin(BuiltinScheme::EPIRK5s3), Strategy::horizontal, {0.0, 1.0}, 0.3, 1e-10);
  CHECK(rz.final_state == Z.initial);
  CHECK(rz.steps.size() == 4);
  CHECK(rz.steps.back().h == doctest::Approx(0.1));
  CHECK(rz.t_final == 1.0);

  auto S = semilinear_parabolic_1d(50);
  auto rs = integrate_fixed(S, builtin(BuiltinScheme::EPIRK4s3A), Strategy::mixed, {0.0, 1.0}, 0.05, 1e-12);
  REQUIRE(rs.final_error.has_value());
  CHECK(*rs.final_error < 1e-7);
  CHECK(rs.projection_contract_ok);
  for (const auto& st : rs.steps) CHECK(st.projections == 2);

  auto json = nlohmann::json::parse(rs.to_json());
  CHECK(json["method"] == "EPIRK4s3A");
  CHECK(json["strategy"] == "mixed");
  CHECK(json["N"] == 50);
  CHECK(json["steps"].size() == 20);
  CHECK(json["total_matvecs"].get<long>() == rs.total_matvecs);
  CHECK(json.contains("wall_time_s"));

  CHECK_THROWS_AS(integrate_fixed(S, builtin(BuiltinScheme::EPIRK4s3A), Strategy::mixed, {0.0, 1.0}, -1.0, 1e-12),
                  InvalidArgument);
}

TEST_CASE("halving h on Allen-Cahn gives a fourth-order error ratio") {
  auto P = allen_cahn_2d(16);
  auto m = builtin(BuiltinScheme::EPIRK4s3A);
  auto ref = integrate_fixed(P, m, Strategy::mixed, {0.0, 1.0}, 0.0125, 1e-13).final_state;
  const double e1 = P.distance(integrate_fixed(P, m, Strategy::mixed, {0.0, 1.0}, 0.2, 1e-13).final_state, ref);
  const double e2 = P.distance(integrate_fixed(P, m, Strategy::mixed, {0.0, 1.0}, 0.1, 1e-13).final_state, ref);
  CHECK(e1 / e2 == doctest::Approx(16.0).epsilon(0.3));
}

TEST_CASE("adaptive driver") {
  auto m = builtin(BuiltinScheme::EPIRK4s3A);
  SUBCASE("linear problem never rejects") {
    auto L = heat_1d(32);
    auto rep = integrate_adaptive(L, m, Strategy::mixed, {0.0, 1.0}, 1e-3, 1e-3, 1e-3);
    CHECK(rep.rejected == 0);
    CHECK(rep.completed);
    CHECK(rep.t_final == 1.0);
    double hmax = 0.0;
    for (const auto& s : rep.steps) hmax = std::max(hmax, s.h);
    CHECK(hmax > 0.1);
  }
  SUBCASE("tolerance sweep") {
    auto P = allen_cahn_2d(16);
    auto ref = integrate_fixed(P, m, Strategy::mixed, {0.0, 1.0}, 0.005, 1e-13).final_state;
    double prev_err = 1.0;
    long prev_steps = 0;
    for (double tol : {1e-3, 1e-4, 1e-5}) {
      auto rep = integrate_adaptive(P, m, Strategy::vertical, {0.0, 1.0}, tol, tol, 0.01);
      const double err = P.distance(rep.final_state, ref);
      CHECK(err <= 100 * tol);
      CHECK(err < prev_err);
      CHECK(rep.accepted > prev_steps);
      CHECK(rep.projection_contract_ok);
      prev_err = err;
      prev_steps = rep.accepted;
    }
  }
  SUBCASE("method without estimator") {
    auto P = allen_cahn_2d(8);
    CHECK_THROWS_AS(integrate_adaptive(P, builtin(BuiltinScheme::EPIRK5s3), Strategy::horizontal, {0.0, 1.0}, 1e-4,
                                       1e-4, 0.01),
                    NotAvailable);
  }
}
