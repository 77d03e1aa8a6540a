#include <map>
#include <random>

#include "dense_step.hpp"
#include "doctest.h"
#include "epirk/errors.hpp"
#include "epirk/schemes.hpp"
#include "epirk/tableau_io.hpp"
#include "oracles.hpp"

using namespace epirk;
using R = Rational;

namespace {

bool has_code(const std::vector<Violation>& v, const std::string& code, Severity sev) {
  for (const auto& x : v)
    if (x.code == code && x.severity == sev) return true;
  return false;
}

MethodDefinition random_fd_method(std::mt19937_64& rng, int s) {
  std::uniform_int_distribution<int> num(-9, 9), den(1, 7), k(1, 4), g(1, 4);
  MethodDefinition m("random", s, MethodForm::forward_difference);
  for (int i = 2; i <= s + 1; ++i) {
    m.first_term(i) = {R(num(rng), den(rng)), phi(k(rng), R(g(rng), 4))};
    for (int j = 2; j < i; ++j) {
      const int k1 = k(rng);
      int k2 = k(rng);
      if (k2 == k1) k2 = k1 % 4 + 1;
      PhiCombination c;
      c.scale = R(g(rng), 4);
      c.terms = {{k1, R(num(rng), den(rng))}, {k2, R(num(rng), den(rng))}};
      m.coeff(i, j) = {c};
    }
  }
  m.first_term(s + 1) = {R(1), phi(1)};
  return m;
}

}  // namespace

TEST_CASE("PhiCombination algebra") {
  PhiCombination c;
  c.scale = R(1, 2);
  c.terms = {{3, R(32)}, {4, R(-144)}};
  CHECK(c.max_order() == 4);
  CHECK(c.min_order() == 3);
  CHECK(c.at_zero() == doctest::Approx(32.0 / 6 - 144.0 / 24));
  CHECK(c.evaluate(-1.3) == doctest::Approx(32 * phi_scalar(3, -0.65) - 144 * phi_scalar(4, -0.65)));
  PhiSum s = normalized({phi(3, R(1), R(2)), phi(3, R(1), R(-2)), phi(4, R(1, 2), R(1))});
  REQUIRE(s.size() == 1);
  CHECK(s[0].scale == R(1, 2));
  CHECK(is_zero(add({phi(2)}, {phi(2, R(1), R(-1))})));
}

TEST_CASE("to_residual_form: three-stage worked expansion") {
  MethodDefinition m("fd3", 3, MethodForm::forward_difference);
  const PhiCombination psi32 = phi(2, R(1, 3), R(5));
  const PhiCombination psi42 = phi(3, R(1), R(7));
  const PhiCombination psi43 = phi(4, R(1), R(11));
  m.first_term(2) = {R(1, 2), phi(1, R(1, 2))};
  m.first_term(3) = {R(2, 3), phi(1, R(2, 3))};
  m.first_term(4) = {R(1), phi(1)};
  m.coeff(3, 2) = {psi32};
  m.coeff(4, 2) = {psi42};
  m.coeff(4, 3) = {psi43};
  auto rf = to_residual_form(m);
  CHECK(rf.a[3][2] == normalized({psi32}));
  CHECK(rf.b[2] == normalized({psi42, psi43.times(R(-2))}));
  CHECK(rf.b[3] == normalized({psi43}));
  CHECK(rf.b[1] == normalized({phi(1)}));
  CHECK(rf.a[2][1] == normalized({phi(1, R(1, 2), R(1, 2))}));

  MethodDefinition back = to_forward_difference_method(to_residual_method(m));
  for (int i = 3; i <= 4; ++i)
    for (int j = 2; j < i; ++j) CHECK(normalized(back.coeff(i, j)) == normalized(m.coeff(i, j)));
}

TEST_CASE("to_residual_form: two-stage methods are unchanged") {
  MethodDefinition m("fd2", 2, MethodForm::forward_difference);
  m.first_term(2) = {R(1, 2), phi(1, R(1, 2))};
  m.first_term(3) = {R(1), phi(1)};
  m.coeff(3, 2) = {phi(3, R(1), R(4))};
  auto rf = to_residual_form(m);
  CHECK(rf.b[2] == normalized({phi(3, R(1), R(4))}));
}

TEST_CASE("to_residual_form: random four-stage tableau, both forms evaluated directly") {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 5; ++trial) {
    MethodDefinition fd = random_fd_method(rng, 4);
    MethodDefinition rs = to_residual_method(fd);
    Matrix Z = oracle::random_matrix(rng, 6, 2.0);
    std::vector<Vector> r(6, Vector::Zero(6));
    for (int j = 2; j <= 4; ++j) r[j] = oracle::random_vector(rng, 6);
    auto delta = [&](int order) {
      std::vector<Vector> seq(r.begin() + 1, r.begin() + 2 + order);
      for (int d = 0; d < order; ++d)
        for (std::size_t i = 0; i + 1 < seq.size() - d; ++i) seq[i] = seq[i + 1] - seq[i];
      return seq[0];
    };
    for (int i = 3; i <= 5; ++i) {
      Vector a = Vector::Zero(6), b = Vector::Zero(6);
      for (int j = 2; j < i; ++j) {
        a += oracle::eval_sum(fd.coeff(i, j), Z) * delta(j - 1);
        b += oracle::eval_sum(rs.coeff(i, j), Z) * r[j];
      }
      CHECK((a - b).cwiseAbs().maxCoeff() <= 1e-13 * std::max(1.0, a.cwiseAbs().maxCoeff()));
    }
  }
}

TEST_CASE("builtins carry the published coefficients") {
  auto a = builtin(BuiltinScheme::EPIRK4s3A);
  CHECK(a.first_term(2).psi.scale == R(1, 2));
  CHECK(a.first_term(3).psi.scale == R(2, 3));
  CHECK(a.coeff(4, 2)[0].scale == R(1));
  CHECK(a.coeff(4, 2)[0].coeff(3) == R(32));
  CHECK(a.coeff(4, 2)[0].coeff(4) == R(-144));
  CHECK(a.coeff(4, 3)[0].coeff(3) == R(-27, 2));
  CHECK(a.coeff(4, 3)[0].coeff(4) == R(81));

  auto b = builtin(BuiltinScheme::EPIRK4s3B);
  CHECK(b.first_term(2).alpha == R(2, 3));
  CHECK(b.first_term(2).psi == phi(2, R(1, 2)));
  CHECK(b.first_term(3).psi == phi(2, R(3, 4)));
  CHECK(b.coeff(4, 2)[0].coeff(3) == R(54));
  CHECK(b.coeff(4, 3)[0].coeff(4) == R(144));

  auto e = builtin(BuiltinScheme::EPIRK5s3);
  CHECK(e.first_term(2).alpha == R(288, 55));
  CHECK(e.first_term(2).psi.scale == R(48, 55));
  CHECK(e.first_term(2).psi.coeff(2) == R(1));
  CHECK(e.first_term(2).psi.coeff(3) == R(-2));
  CHECK(e.first_term(3).alpha == R(212, 45));
  CHECK(e.first_term(3).psi.coeff(2) == R(-288, 53));
  CHECK(e.first_term(3).psi.coeff(3) == R(576, 53));
  CHECK(e.coeff(3, 2)[0].coeff(3) == R(32065, 13122));
  CHECK(e.coeff(3, 2)[0].scale == R(4, 9));
  CHECK(e.coeff(4, 2)[0].coeff(3) == R(-166375, 61056));
  CHECK(e.coeff(4, 2)[0].coeff(4) == R(499125, 27136));
  CHECK(e.coeff(4, 3)[0].coeff(3) == R(2187, 106));
  CHECK(e.coeff(4, 3)[0].coeff(4) == R(-120285, 1696));

  auto x = builtin(BuiltinScheme::EXPRB53s3);
  CHECK(x.first_term(3).alpha == R(9, 10));
  CHECK(x.first_term(3).psi == phi(1, R(9, 10)));
  REQUIRE(x.coeff(3, 2).size() == 2);
  CHECK(x.coeff(3, 2)[0] == phi(3, R(1, 2), R(27, 25)));
  CHECK(x.coeff(3, 2)[1] == phi(3, R(9, 10), R(729, 125)));
  CHECK(x.coeff(4, 3)[0].coeff(3) == R(-250, 81));
  CHECK(x.coeff(4, 3)[0].coeff(4) == R(500, 27));
  CHECK_THROWS_AS(builtin("nope"), InvalidArgument);
}

TEST_CASE("embedded estimator of EPIRK4s3A") {
  auto e = embedded_estimator(BuiltinScheme::EPIRK4s3A);
  CHECK(normalized(e.coupling[2]) == normalized({phi(3, R(1), R(8))}));
  CHECK(is_zero(e.coupling[3]));
  auto m = builtin(BuiltinScheme::EPIRK4s3A);
  PhiSum delta = add(m.coeff(4, 2), scaled(e.coupling[2], R(-1)));
  PhiCombination expect;
  expect.terms = {{3, R(24)}, {4, R(-144)}};
  CHECK(delta == normalized({expect}));
  CHECK_THROWS_AS(embedded_estimator(BuiltinScheme::EPIRK5s3), NotAvailable);
}

TEST_CASE("validate") {
  CHECK(validate(builtin(BuiltinScheme::EPIRK4s3A)).empty());
  CHECK(validate(builtin(BuiltinScheme::EXPRB53s3)).empty());

  auto m = builtin(BuiltinScheme::EPIRK4s3A);
  m.coeff(4, 2)[0].scale = R(9, 10);
  CHECK(has_code(validate(m), "lemma3", Severity::error));

  auto n = builtin(BuiltinScheme::EPIRK4s3A);
  n.first_term(4).alpha = R(2);
  CHECK(has_code(validate(n), "normalization", Severity::error));

  auto b = validate(builtin(BuiltinScheme::EPIRK4s3B));
  CHECK(has_code(b, "assumption3", Severity::warning));
  for (const auto& v : b) CHECK(v.severity == Severity::warning);

  auto g = builtin(BuiltinScheme::EPIRK4s3A);
  g.first_term(2).psi.scale = R(3, 2);
  CHECK(has_code(validate(g), "scale_range", Severity::error));
}

TEST_CASE("form equivalence on dense problems") {
  std::mt19937_64 rng(23);
  for (const auto& name : builtin_names()) {
    MethodDefinition rs = builtin(name);
    MethodDefinition fd = to_forward_difference_method(rs);
    const int n = 20;
    Matrix Q = Eigen::HouseholderQR<Matrix>(oracle::random_matrix(rng, n, 1.0)).householderQ();
    Vector spec = -10.0 * (oracle::random_vector(rng, n).array() + 1.0) / 2.0;
    Matrix L = Q * spec.asDiagonal() * Q.transpose();
    oracle::DenseSystem sys;
    sys.f = [&](const Vector& u) { return Vector(L * u + u.array().square().matrix() * 0.5); };
    sys.jac = [&](const Vector& u) { return Matrix(L + Matrix(u.asDiagonal())); };
    Vector u0 = oracle::random_vector(rng, n);
    Vector a = oracle::dense_step(rs, sys, u0, 0.3);
    Vector b = oracle::dense_step(fd, sys, u0, 0.3);
    CHECK((a - b).cwiseAbs().maxCoeff() <= 1e-12 * a.cwiseAbs().maxCoeff());
  }
}

TEST_CASE("horizontal groupability of fifth-order final stages") {
  std::mt19937_64 rng(29);
  for (auto scheme : {BuiltinScheme::EPIRK5s3, BuiltinScheme::EXPRB53s3}) {
    auto m = builtin(scheme);
    auto rf = to_residual_form(m);
    Matrix Z = oracle::random_matrix(rng, 8, 3.0);
    std::vector<Vector> v(4);
    for (int j = 1; j <= 3; ++j) v[j] = oracle::random_vector(rng, 8);
    std::vector<PhiTermVector> row;
    Vector direct = Vector::Zero(8);
    std::map<int, Vector> by_order;
    for (int j = 1; j <= 3; ++j)
      for (const auto& c : rf.b[j]) {
        CHECK(c.scale == R(1));
        direct += oracle::eval_combination(c, Z) * v[j];
        for (const auto& t : c.terms) {
          if (!by_order.count(t.k)) by_order[t.k] = Vector::Zero(8);
          by_order[t.k] += t.coeff.value() * v[j];
        }
      }
    for (const auto& [k, b] : by_order) row.push_back({k, b});
    GroupedRow g = group_row(row, dense_operator(Z));
    CHECK(g.order == 4);
    auto phiK = oracle::phi_matrix(g.order, Z);
    Vector grouped = phiK[g.order].cast<double>() * g.phi_argument + g.polynomial;
    CHECK((grouped - direct).cwiseAbs().maxCoeff() <= 1e-12 * std::max(1.0, direct.cwiseAbs().maxCoeff()));
  }
}

TEST_CASE("tableau text round trip for every builtin") {
  for (const auto& name : builtin_names()) {
    MethodDefinition m = builtin(name);
    MethodDefinition p = parse_tableau(write_tableau(m));
    CHECK(p.name == m.name);
    CHECK(p.stages == m.stages);
    CHECK(p.stiff_order == m.stiff_order);
    CHECK(p.strategy_hint == m.strategy_hint);
    for (int i = 2; i <= m.stages + 1; ++i) {
      CHECK(p.first_term(i).alpha == m.first_term(i).alpha);
      CHECK(p.first_term(i).psi == m.first_term(i).psi);
      for (int j = 2; j < i; ++j) CHECK(normalized(p.coeff(i, j)) == normalized(m.coeff(i, j)));
    }
    CHECK(p.embedded.has_value() == m.embedded.has_value());
  }
}

TEST_CASE("tableau parser: forward-difference input with ALPHA and BETA factors") {
  const char* text = R"(# a user scheme
NAME demo
STAGES 3
FORM forward_difference
STIFF_ORDER 4
ALPHA(2,1) = 1/2
PSI(2,1) = 1/2; phi_1
ALPHA(3,1) = 2/3
PSI(3,1) = 2/3; phi_1
ALPHA(3,2) = 2
PSI(3,2) = 1/3; 3*phi_2
PSI(4,1) = 1; phi_1
BETA(2) = 1/2
PSI(4,2) = 1; 64*phi_3 - 288*phi_4
PSI(4,3) = 1; -27/2*phi_3 + 81*phi_4
)";
  MethodDefinition m = parse_tableau(text);
  CHECK(m.form == MethodForm::forward_difference);
  CHECK(m.coeff(3, 2)[0].coeff(2) == R(6));
  CHECK(m.coeff(4, 2)[0].coeff(3) == R(32));
  auto rf = to_residual_form(m);
  // b2 = beta2 psi42 - 2 beta3 psi43
  CHECK(rf.b[2][0].coeff(3) == R(32 + 27));
}

TEST_CASE("tableau parser diagnostics carry line numbers") {
  auto line_of = [](const std::string& text) {
    try {
      parse_tableau(text);
    } catch (const TableauParseError& e) {
      return e.line();
    }
    return -1;
  };
  CHECK(line_of("STAGES 2\nPSI(2,1) = 1/2 phi_1\n") == 2);
  CHECK(line_of("ALPHA(2,1) = 1\n") == 1);
  CHECK(line_of("STAGES 2\nPSI(2,1) = 3/2; phi_1\n") == 2);
  CHECK(line_of("STAGES 2\n\nFOO 1\n") == 3);
  CHECK(line_of("STAGES 2\nPSI(2,1) = 1; 2*phi_1 + phi_1\n") == 2);
  CHECK(line_of("STAGES 2\nPSI(2,1) = 1; 2/0*phi_1\n") == 2);
  CHECK(line_of("STAGES 2\nPSI(2,1) = 1; phi_13\n") == 2);
  CHECK(line_of("STAGES 2\nPSI(2,1) = 1; phi_1\n") > 0);  // missing PSI(3,1)
}
