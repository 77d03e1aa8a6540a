#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "epirk/schemes.hpp"

namespace epirk {

struct PCoefficients {
  double p1 = 0.0;  // sum_k p_k / k!
  double p2 = 0.0;  // sum_k p_k / (k+1)!
  double p3 = 0.0;  // sum_k p_k / (k+2)!
};

PCoefficients p_coefficients(const PhiCombination& psi);

enum class RuleSet { epirk, exprb };

// derived:      Psi_i = 1/2 sum_j alpha_j1^2 P_j1^2 a_ij - alpha_i1 g_i1^2 sum_k p_i1k phi_{k+2}(g_i1 Z),
//               fifth-order weight alpha_i1 P_i1
// as_printed:   no alpha_i1 on the phi_{k+2} sum, weight alpha_i1^2 P_i1
// leading_term: derived, keeping only the p_i11 term of the sum
enum class PsiConvention { derived, as_printed, leading_term };

struct ConditionOptions {
  int probes = 8;
  std::uint64_t seed = 0;
  double threshold = 1e-10;
  RuleSet rules = RuleSet::epirk;
  PsiConvention psi = PsiConvention::derived;
  int dimension = 6;
};

struct ConditionResult {
  std::string label;
  int order = 0;
  bool simplified = false;
  double residual = 0.0;
  bool satisfied = false;
};

struct ConditionReport {
  std::string method;
  RuleSet rules = RuleSet::epirk;
  std::vector<ConditionResult> conditions;
  int certified_order = 1;

  const ConditionResult& get(const std::string& label) const;
};

ConditionReport check_conditions(const MethodDefinition& method, const ConditionOptions& options = {});
ConditionReport check_conditions(const MethodDefinition& method, int probes, std::uint64_t seed);

Matrix big_psi(const MethodDefinition& method, int stage_i, const Matrix& Z,
               PsiConvention convention = PsiConvention::derived);

// Every tableau number nudged by delta, one at a time (scales move toward the interior of (0, 1]).
std::vector<std::pair<std::string, MethodDefinition>> single_coefficient_perturbations(
    const MethodDefinition& method, const Rational& delta);

std::string format_report(const ConditionReport& report);

}  // namespace epirk
