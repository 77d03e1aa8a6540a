#pragma once

#include <optional>
#include <string>
#include <vector>

#include "epirk/krylov.hpp"
#include "epirk/phi.hpp"
#include "epirk/rational.hpp"

namespace epirk {

struct PhiTerm {
  int k = 1;
  Rational coeff;
};

// z -> sum_k coeff_k phi_k(scale z)
struct PhiCombination {
  Rational scale{1};
  std::vector<PhiTerm> terms;

  bool is_zero() const;
  int max_order() const;
  int min_order() const;
  Rational coeff(int k) const;
  PhiCombination times(const Rational& c) const;
  double at_zero() const;
  double evaluate(double z) const;
  Matrix evaluate(const Matrix& Z) const;
  std::string str() const;
  friend bool operator==(const PhiCombination& a, const PhiCombination& b);
};

PhiCombination phi(int k, Rational scale = 1, Rational coeff = 1);

// A sum of combinations at possibly different scales.
using PhiSum = std::vector<PhiCombination>;

// Merges equal scales, drops zero coefficients, sorts by scale.
PhiSum normalized(const PhiSum& s);
PhiSum add(const PhiSum& a, const PhiSum& b);
PhiSum scaled(const PhiSum& a, const Rational& c);
double evaluate(const PhiSum& s, double z);
Matrix evaluate(const PhiSum& s, const Matrix& Z);
bool is_zero(const PhiSum& s);
std::string to_string(const PhiSum& s);

enum class MethodForm { forward_difference, residual };
enum class Strategy { vertical, horizontal, mixed };

std::string to_string(MethodForm f);
std::string to_string(Strategy s);
Strategy parse_strategy(const std::string& name);

// alpha * psi(g z) acting on h f(u_n)
struct FirstTerm {
  Rational alpha{1};
  PhiCombination psi;
};

struct EmbeddedStage {
  FirstTerm first;
  std::vector<PhiSum> coupling;  // index j = 2..s
  int order = 3;
};

// Stage i (2..s) and the final stage i = s+1:
//   U_i = u_n + alpha_i1 psi_i1(g_i1 hJ) h f(u_n) + h sum_{j=2}^{i-1} C_ij(hJ) x_j
// x_j = Delta^{(j-1)} r(u_n) in forward-difference form, r(U_j) in residual form.
// C_ij already includes the alpha_ij / beta_j factor.
struct MethodDefinition {
  std::string name;
  int stages = 0;
  MethodForm form = MethodForm::residual;
  std::vector<FirstTerm> first;             // index i = 2..s+1
  std::vector<std::vector<PhiSum>> coupling;  // [i][j], i = 2..s+1, j = 2..i-1
  int stiff_order = 0;
  Strategy strategy_hint = Strategy::vertical;
  std::optional<EmbeddedStage> embedded;

  MethodDefinition() = default;
  MethodDefinition(std::string name, int stages, MethodForm form);

  const FirstTerm& first_term(int i) const;
  FirstTerm& first_term(int i);
  const PhiSum& coeff(int i, int j) const;
  PhiSum& coeff(int i, int j);
  int final_index() const { return stages + 1; }
};

// a[i][j] for i = 2..s, b[j] for the final stage; column j = 1 holds alpha_i1 psi_i1.
struct ResidualFormCoefficients {
  std::vector<std::vector<PhiSum>> a;
  std::vector<PhiSum> b;
  int stages = 0;
};

ResidualFormCoefficients to_residual_form(const MethodDefinition& method);
MethodDefinition to_residual_method(const MethodDefinition& method);
MethodDefinition to_forward_difference_method(const MethodDefinition& method);

enum class BuiltinScheme { EPIRK4s3A, EPIRK4s3B, EPIRK5s3, EXPRB53s3 };

MethodDefinition builtin(BuiltinScheme scheme);
MethodDefinition builtin(const std::string& name);
std::vector<std::string> builtin_names();

// Third-order final stage sharing the main stages; throws NotAvailable otherwise.
EmbeddedStage embedded_estimator(BuiltinScheme scheme);

// Final stage of the embedded method as a standalone method.
MethodDefinition embedded_as_method(const MethodDefinition& method);

enum class Severity { warning, error };

struct Violation {
  std::string code;
  std::string message;
  Severity severity = Severity::error;
};

std::vector<Violation> validate(const MethodDefinition& method);

// sum_k phi_k(X) v_k == phi_K(X) w + polynomial, K the largest order present.
struct GroupedRow {
  int order = 0;
  Vector phi_argument;
  Vector polynomial;
};

GroupedRow group_row(const std::vector<PhiTermVector>& terms, const LinearOperator& X);

}  // namespace epirk
