#include "epirk/order_conditions.hpp"

#include <iomanip>
#include <random>
#include <sstream>

#include "epirk/errors.hpp"

namespace epirk {
namespace {

double inf_norm(const Matrix& M) { return M.cwiseAbs().rowwise().sum().maxCoeff(); }

Matrix random_probe(std::mt19937_64& rng, int n) {
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  Matrix M(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) M(i, j) = U(rng);
  return M;
}

struct StageData {
  double alpha = 0.0, g = 0.0;
  PCoefficients P;
};

std::vector<StageData> stage_data(const MethodDefinition& m) {
  std::vector<StageData> out(static_cast<std::size_t>(m.stages) + 1);
  for (int i = 2; i <= m.stages; ++i) {
    const FirstTerm& ft = m.first_term(i);
    out[i] = {ft.alpha.value(), ft.psi.scale.value(), p_coefficients(ft.psi)};
  }
  return out;
}

double fifth_weight(const StageData& d, PsiConvention c) {
  return c == PsiConvention::as_printed ? d.alpha * d.alpha * d.P.p1 : d.alpha * d.P.p1;
}

class Checker {
 public:
  Checker(const MethodDefinition& m, const ConditionOptions& o)
      : method_(to_residual_method(m)), rf_(to_residual_form(m)), opt_(o), st_(stage_data(method_)) {}

  ConditionReport run() {
    ConditionReport rep;
    rep.method = method_.name;
    rep.rules = opt_.rules;
    std::mt19937_64 rng(opt_.seed);
    std::vector<Matrix> Zs, Ks;
    for (int p = 0; p < opt_.probes; ++p) {
      Zs.push_back(random_probe(rng, opt_.dimension));
      Ks.push_back(random_probe(rng, opt_.dimension));
    }
    if (opt_.rules == RuleSet::exprb) check_exprb_applicable();
    for (const auto& label : labels()) {
      ConditionResult r;
      r.label = label.name;
      r.order = label.order;
      r.simplified = label.simplified;
      for (int p = 0; p < opt_.probes; ++p) r.residual = std::max(r.residual, residual(label.name, Zs[p], Ks[p]));
      r.satisfied = r.residual <= opt_.threshold;
      rep.conditions.push_back(r);
    }
    rep.certified_order = certify(rep);
    return rep;
  }

 private:
  struct Label {
    std::string name;
    int order;
    bool simplified;
  };

  std::vector<Label> labels() const {
    if (opt_.rules == RuleSet::exprb)
      return {{"C0", 2, false},   {"C1'", 3, false},  {"C2'", 4, false}, {"C3'", 5, false},
              {"C4'", 5, false},  {"C3'*", 5, true},  {"C4'*", 5, true}};
    return {{"C0", 2, false},  {"C1", 3, false},  {"C2", 4, false},  {"C3", 4, false},  {"C4", 5, false},
            {"C5", 5, false},  {"C6", 5, false},  {"C7", 5, false},  {"C8", 5, false},  {"C4*", 5, true},
            {"C5*", 5, true},  {"C6*", 5, true},  {"C7*", 5, true},  {"C8*", 5, true}};
  }

  void check_exprb_applicable() const {
    for (int i = 2; i <= method_.stages; ++i) {
      const FirstTerm& ft = method_.first_term(i);
      if (!(ft.alpha == ft.psi.scale) || !(ft.psi.terms.size() == 1 && ft.psi == phi(1, ft.psi.scale)))
        throw InvalidArgument("EXPRB rule set needs psi_i1 = c_i phi_1(c_i z) for every internal stage");
    }
  }

  Matrix b(int i, const Matrix& Z) const { return evaluate(rf_.b[i], Z); }
  double b0(int i) const {
    double s = 0.0;
    for (const auto& c : rf_.b[i]) s += c.at_zero();
    return s;
  }

  // sum_i b_i(Z) w_i - rhs phi_k(Z), or the Z = 0 scalar version
  template <class W>
  double linear_condition(const Matrix& Z, W weight, double rhs, int k, bool at_zero) const {
    const Eigen::Index n = Z.rows();
    if (at_zero) {
      double s = -rhs * inverse_factorial(k);
      for (int i = 2; i <= method_.stages; ++i) s += b0(i) * weight(st_[i], i);
      return std::abs(s);
    }
    Matrix acc = -rhs * phi_dense(k, Z)[k];
    for (int i = 2; i <= method_.stages; ++i) {
      const double w = weight(st_[i], i);
      if (w != 0.0) acc += w * b(i, Z);
    }
    (void)n;
    return inf_norm(acc);
  }

  double psi_condition(const Matrix& Z, const Matrix& K, bool at_zero) const {
    Matrix acc = Matrix::Zero(Z.rows(), Z.cols());
    for (int i = 2; i <= method_.stages; ++i) {
      const double w = opt_.rules == RuleSet::exprb ? st_[i].alpha : fifth_weight(st_[i], opt_.psi);
      const Matrix Bi = at_zero ? Matrix(Matrix::Identity(Z.rows(), Z.cols()) * b0(i)) : b(i, Z);
      acc += w * Bi * K * big_psi(method_, i, Z, opt_.rules == RuleSet::exprb ? PsiConvention::derived : opt_.psi);
    }
    return inf_norm(acc);
  }

  double residual(const std::string& name, const Matrix& Z, const Matrix& K) const {
    using S = StageData;
    if (name == "C0") {
      const FirstTerm& ft = method_.first_term(method_.final_index());
      return inf_norm(ft.psi.evaluate(Z) * ft.alpha.value() - phi_dense(1, Z)[1]);
    }
    const bool star = name.back() == '*';
    const std::string base = star ? name.substr(0, name.size() - 1) : name;
    if (base == "C1") return linear_condition(Z, [](const S& d, int) { return d.alpha * d.alpha * d.P.p1 * d.P.p1; }, 2, 3, star);
    if (base == "C2") return linear_condition(Z, [](const S& d, int) { return d.alpha * d.alpha * d.g * d.P.p1 * d.P.p2; }, 3, 4, star);
    if (base == "C3") return linear_condition(Z, [](const S& d, int) { return std::pow(d.alpha * d.P.p1, 3); }, 6, 4, star);
    if (base == "C4") return linear_condition(Z, [](const S& d, int) { return d.g * d.g * d.alpha * d.alpha * d.P.p1 * d.P.p3; }, 4, 5, star);
    if (base == "C5") return linear_condition(Z, [](const S& d, int) { return d.alpha * d.alpha * d.g * d.g * d.P.p2 * d.P.p2; }, 6, 5, star);
    if (base == "C6") return linear_condition(Z, [](const S& d, int) { return d.g * std::pow(d.alpha, 3) * d.P.p1 * d.P.p1 * d.P.p2; }, 12, 5, star);
    if (base == "C7") return linear_condition(Z, [](const S& d, int) { return std::pow(d.alpha * d.P.p1, 4); }, 24, 5, star);
    if (base == "C8") return psi_condition(Z, K, star);
    if (base == "C1'") return linear_condition(Z, [](const S& d, int) { return std::pow(d.alpha, 2); }, 2, 3, star);
    if (base == "C2'") return linear_condition(Z, [](const S& d, int) { return std::pow(d.alpha, 3); }, 6, 4, star);
    if (base == "C3'") return linear_condition(Z, [](const S& d, int) { return std::pow(d.alpha, 4); }, 24, 5, star);
    if (base == "C4'") return psi_condition(Z, K, star);
    throw InvalidArgument("unknown condition " + name);
  }

  static int certify(const ConditionReport& rep) {
    auto ok = [&](const std::string& l) { return rep.get(l).satisfied; };
    if (rep.rules == RuleSet::exprb) {
      if (!ok("C0")) return 1;
      if (!ok("C1'")) return 2;
      if (!ok("C2'")) return 3;
      if ((ok("C3'") && ok("C4'")) || (ok("C3'*") && ok("C4'*"))) return 5;
      return 4;
    }
    if (!ok("C0")) return 1;
    if (!ok("C1")) return 2;
    if (!ok("C2") || !ok("C3")) return 3;
    const bool full = ok("C4") && ok("C5") && ok("C6") && ok("C7") && ok("C8");
    const bool simp = ok("C4*") && ok("C5*") && ok("C6*") && ok("C7*") && ok("C8*");
    return (full || simp) ? 5 : 4;
  }

  MethodDefinition method_;
  ResidualFormCoefficients rf_;
  ConditionOptions opt_;
  std::vector<StageData> st_;
};

}  // namespace

PCoefficients p_coefficients(const PhiCombination& psi) {
  PCoefficients p;
  for (const auto& t : psi.terms) {
    const double c = t.coeff.value();
    p.p1 += c * inverse_factorial(t.k);
    p.p2 += c * inverse_factorial(t.k + 1);
    p.p3 += c * inverse_factorial(t.k + 2);
  }
  return p;
}

const ConditionResult& ConditionReport::get(const std::string& label) const {
  for (const auto& c : conditions)
    if (c.label == label) return c;
  throw InvalidArgument("no condition labelled " + label);
}

Matrix big_psi(const MethodDefinition& method, int i, const Matrix& Z, PsiConvention convention) {
  if (i < 2 || i > method.stages) throw InvalidArgument("big_psi stage index out of range");
  const MethodDefinition m = to_residual_method(method);
  Matrix out = Matrix::Zero(Z.rows(), Z.cols());
  for (int j = 2; j < i; ++j) {
    const FirstTerm& fj = m.first_term(j);
    const double w = std::pow(fj.alpha.value() * p_coefficients(fj.psi).p1, 2) / 2.0;
    out += w * evaluate(m.coeff(i, j), Z);
  }
  const FirstTerm& fi = m.first_term(i);
  const double g = fi.psi.scale.value();
  const double lead = (convention == PsiConvention::as_printed ? 1.0 : fi.alpha.value()) * g * g;
  int kmax = 0;
  for (const auto& t : fi.psi.terms) kmax = std::max(kmax, t.k + 2);
  const PhiValueTable table = phi_dense(kmax, Z * g);
  for (const auto& t : fi.psi.terms) {
    if (convention == PsiConvention::leading_term && t.k != 1) continue;
    out -= lead * t.coeff.value() * table[t.k + 2];
  }
  return out;
}

ConditionReport check_conditions(const MethodDefinition& method, const ConditionOptions& options) {
  if (options.probes < 1) throw InvalidArgument("probes must be at least 1");
  return Checker(method, options).run();
}

ConditionReport check_conditions(const MethodDefinition& method, int probes, std::uint64_t seed) {
  ConditionOptions o;
  o.probes = probes;
  o.seed = seed;
  return check_conditions(method, o);
}

std::vector<std::pair<std::string, MethodDefinition>> single_coefficient_perturbations(
    const MethodDefinition& method, const Rational& delta) {
  const MethodDefinition base = to_residual_method(method);
  std::vector<std::pair<std::string, MethodDefinition>> out;
  auto nudge_scale = [&](Rational s) { return Rational(1) < s + delta ? s - delta : s + delta; };
  for (int i = 2; i <= base.final_index(); ++i) {
    const std::string stage = i == base.final_index() ? "final" : "stage " + std::to_string(i);
    {
      MethodDefinition m = base;
      m.first_term(i).alpha = m.first_term(i).alpha + delta;
      out.push_back({stage + " alpha", m});
    }
    {
      MethodDefinition m = base;
      m.first_term(i).psi.scale = nudge_scale(m.first_term(i).psi.scale);
      out.push_back({stage + " g", m});
    }
    for (std::size_t t = 0; t < base.first_term(i).psi.terms.size(); ++t) {
      MethodDefinition m = base;
      auto& term = m.first_term(i).psi.terms[t];
      term.coeff = term.coeff + delta;
      out.push_back({stage + " p_" + std::to_string(term.k), m});
    }
    for (int j = 2; j < i; ++j)
      for (std::size_t c = 0; c < base.coeff(i, j).size(); ++c) {
        {
          MethodDefinition m = base;
          auto& comb = m.coeff(i, j)[c];
          comb.scale = nudge_scale(comb.scale);
          out.push_back({stage + " column " + std::to_string(j) + " scale", m});
        }
        for (std::size_t t = 0; t < base.coeff(i, j)[c].terms.size(); ++t) {
          MethodDefinition m = base;
          auto& term = m.coeff(i, j)[c].terms[t];
          term.coeff = term.coeff + delta;
          out.push_back({stage + " column " + std::to_string(j) + " phi_" + std::to_string(term.k), m});
        }
      }
  }
  return out;
}

std::string format_report(const ConditionReport& report) {
  std::ostringstream os;
  os << "method " << report.method << " (" << (report.rules == RuleSet::epirk ? "EPIRK" : "EXPRB")
     << " conditions)\n";
  os << std::left << std::setw(8) << "label" << std::setw(7) << "order" << std::setw(14) << "residual"
     << "status\n";
  for (const auto& c : report.conditions)
    os << std::left << std::setw(8) << c.label << std::setw(7) << c.order << std::setw(14) << std::scientific
       << std::setprecision(3) << c.residual << (c.satisfied ? "pass" : "FAIL") << "\n";
  os << "certified order " << report.certified_order << "\n";
  return os.str();
}

}  // namespace epirk
