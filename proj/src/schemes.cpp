#include "epirk/schemes.hpp"

#include <algorithm>
#include <map>
#include <sstream>

#include "epirk/errors.hpp"

namespace epirk {
namespace {

std::int64_t binomial(int n, int k) {
  if (k < 0 || k > n) return 0;
  std::int64_t r = 1;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

PhiCombination combo(Rational scale, std::vector<PhiTerm> terms) {
  PhiCombination c;
  c.scale = scale;
  c.terms = std::move(terms);
  return c;
}

}  // namespace

bool PhiCombination::is_zero() const {
  return std::all_of(terms.begin(), terms.end(), [](const PhiTerm& t) { return t.coeff.is_zero(); });
}

int PhiCombination::max_order() const {
  int m = -1;
  for (const auto& t : terms)
    if (!t.coeff.is_zero()) m = std::max(m, t.k);
  return m;
}

int PhiCombination::min_order() const {
  int m = kMaxPhiOrder + 1;
  for (const auto& t : terms)
    if (!t.coeff.is_zero()) m = std::min(m, t.k);
  return m;
}

Rational PhiCombination::coeff(int k) const {
  Rational c;
  for (const auto& t : terms)
    if (t.k == k) c = c + t.coeff;
  return c;
}

PhiCombination PhiCombination::times(const Rational& c) const {
  PhiCombination out = *this;
  for (auto& t : out.terms) t.coeff = t.coeff * c;
  return out;
}

double PhiCombination::at_zero() const {
  double s = 0.0;
  for (const auto& t : terms) s += t.coeff.value() * inverse_factorial(t.k);
  return s;
}

double PhiCombination::evaluate(double z) const {
  double s = 0.0;
  for (const auto& t : terms) s += t.coeff.value() * phi_scalar(t.k, scale.value() * z);
  return s;
}

Matrix PhiCombination::evaluate(const Matrix& Z) const {
  Matrix out = Matrix::Zero(Z.rows(), Z.cols());
  const int kmax = max_order();
  if (kmax < 0) return out;
  const PhiValueTable table = phi_dense(kmax, Z * scale.value());
  for (const auto& t : terms) out += t.coeff.value() * table[t.k];
  return out;
}

std::string PhiCombination::str() const {
  std::ostringstream os;
  bool first = true;
  for (const auto& t : terms) {
    if (!first) os << " + ";
    first = false;
    os << t.coeff << "*phi_" << t.k;
  }
  if (first) os << "0";
  os << " @ " << scale;
  return os.str();
}

bool operator==(const PhiCombination& a, const PhiCombination& b) {
  if (!(a.scale == b.scale)) return false;
  for (int k = 0; k <= kMaxPhiOrder; ++k)
    if (!(a.coeff(k) == b.coeff(k))) return false;
  return true;
}

PhiCombination phi(int k, Rational scale, Rational coeff) { return combo(scale, {{k, coeff}}); }

PhiSum normalized(const PhiSum& s) {
  std::vector<std::pair<Rational, std::map<int, Rational>>> groups;
  for (const auto& c : s) {
    auto it = std::find_if(groups.begin(), groups.end(), [&](const auto& g) { return g.first == c.scale; });
    if (it == groups.end()) {
      groups.push_back({c.scale, {}});
      it = groups.end() - 1;
    }
    for (const auto& t : c.terms) it->second[t.k] = it->second[t.k] + t.coeff;
  }
  std::sort(groups.begin(), groups.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  PhiSum out;
  for (const auto& [scale, terms] : groups) {
    PhiCombination c;
    c.scale = scale;
    for (const auto& [k, v] : terms)
      if (!v.is_zero()) c.terms.push_back({k, v});
    if (!c.terms.empty()) out.push_back(c);
  }
  return out;
}

PhiSum add(const PhiSum& a, const PhiSum& b) {
  PhiSum all = a;
  all.insert(all.end(), b.begin(), b.end());
  return normalized(all);
}

PhiSum scaled(const PhiSum& a, const Rational& c) {
  PhiSum out;
  for (const auto& x : a) out.push_back(x.times(c));
  return normalized(out);
}

double evaluate(const PhiSum& s, double z) {
  double v = 0.0;
  for (const auto& c : s) v += c.evaluate(z);
  return v;
}

Matrix evaluate(const PhiSum& s, const Matrix& Z) {
  Matrix out = Matrix::Zero(Z.rows(), Z.cols());
  for (const auto& c : s) out += c.evaluate(Z);
  return out;
}

bool is_zero(const PhiSum& s) {
  return std::all_of(s.begin(), s.end(), [](const PhiCombination& c) { return c.is_zero(); });
}

std::string to_string(const PhiSum& s) {
  if (s.empty()) return "0";
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) out += (i ? " ; " : "") + s[i].str();
  return out;
}

std::string to_string(MethodForm f) {
  return f == MethodForm::forward_difference ? "forward_difference" : "residual";
}

std::string to_string(Strategy s) {
  switch (s) {
    case Strategy::vertical: return "vertical";
    case Strategy::horizontal: return "horizontal";
    case Strategy::mixed: return "mixed";
  }
  return "?";
}

Strategy parse_strategy(const std::string& name) {
  if (name == "vertical") return Strategy::vertical;
  if (name == "horizontal") return Strategy::horizontal;
  if (name == "mixed") return Strategy::mixed;
  throw InvalidArgument("unknown strategy '" + name + "'");
}

MethodDefinition::MethodDefinition(std::string name_, int stages_, MethodForm form_)
    : name(std::move(name_)), stages(stages_), form(form_) {
  if (stages < 1) throw InvalidArgument("a method needs at least one stage");
  first.resize(static_cast<std::size_t>(stages) + 2);
  coupling.resize(static_cast<std::size_t>(stages) + 2);
  for (int i = 0; i <= stages + 1; ++i) coupling[i].resize(static_cast<std::size_t>(std::max(i, 0)));
}

const FirstTerm& MethodDefinition::first_term(int i) const {
  if (i < 2 || i > stages + 1) throw InvalidArgument("stage index out of range");
  return first[i];
}

FirstTerm& MethodDefinition::first_term(int i) {
  if (i < 2 || i > stages + 1) throw InvalidArgument("stage index out of range");
  return first[i];
}

const PhiSum& MethodDefinition::coeff(int i, int j) const {
  if (i < 2 || i > stages + 1 || j < 2 || j >= i) throw InvalidArgument("coefficient index out of range");
  return coupling[i][j];
}

PhiSum& MethodDefinition::coeff(int i, int j) {
  if (i < 2 || i > stages + 1 || j < 2 || j >= i) throw InvalidArgument("coefficient index out of range");
  return coupling[i][j];
}

namespace {

// Delta^{(j-1)} r(u_n) = sum_{l=2}^{j} (-1)^{j-l} C(j-1, l-1) r(U_l)
std::vector<PhiSum> expand_row(const std::vector<PhiSum>& row, int last) {
  std::vector<PhiSum> out(row.size());
  for (int j = 2; j <= last; ++j) {
    if (row[j].empty()) continue;
    for (int l = 2; l <= j; ++l) {
      const std::int64_t sign = ((j - l) % 2) ? -1 : 1;
      out[l] = add(out[l], scaled(row[j], Rational(sign * binomial(j - 1, l - 1))));
    }
  }
  return out;
}

// r(U_l) = sum_{j=2}^{l} C(l-1, j-1) Delta^{(j-1)} r(u_n)
std::vector<PhiSum> contract_row(const std::vector<PhiSum>& row, int last) {
  std::vector<PhiSum> out(row.size());
  for (int l = 2; l <= last; ++l) {
    if (row[l].empty()) continue;
    for (int j = 2; j <= l; ++j) out[j] = add(out[j], scaled(row[l], Rational(binomial(l - 1, j - 1))));
  }
  return out;
}

}  // namespace

MethodDefinition to_residual_method(const MethodDefinition& m) {
  if (m.form == MethodForm::residual) return m;
  MethodDefinition out = m;
  out.form = MethodForm::residual;
  for (int i = 2; i <= m.stages + 1; ++i) out.coupling[i] = expand_row(m.coupling[i], i - 1);
  if (m.embedded) out.embedded->coupling = expand_row(m.embedded->coupling, m.stages);
  return out;
}

MethodDefinition to_forward_difference_method(const MethodDefinition& m) {
  if (m.form == MethodForm::forward_difference) return m;
  MethodDefinition out = m;
  out.form = MethodForm::forward_difference;
  for (int i = 2; i <= m.stages + 1; ++i) out.coupling[i] = contract_row(m.coupling[i], i - 1);
  if (m.embedded) out.embedded->coupling = contract_row(m.embedded->coupling, m.stages);
  return out;
}

ResidualFormCoefficients to_residual_form(const MethodDefinition& method) {
  const MethodDefinition r = to_residual_method(method);
  ResidualFormCoefficients out;
  out.stages = r.stages;
  out.a.resize(static_cast<std::size_t>(r.stages) + 1);
  for (int i = 2; i <= r.stages; ++i) {
    out.a[i].resize(static_cast<std::size_t>(i));
    out.a[i][1] = normalized({r.first[i].psi.times(r.first[i].alpha)});
    for (int j = 2; j < i; ++j) out.a[i][j] = normalized(r.coupling[i][j]);
  }
  const int f = r.stages + 1;
  out.b.resize(static_cast<std::size_t>(f));
  out.b[1] = normalized({r.first[f].psi.times(r.first[f].alpha)});
  for (int j = 2; j < f; ++j) out.b[j] = normalized(r.coupling[f][j]);
  return out;
}

std::vector<std::string> builtin_names() { return {"EPIRK4s3A", "EPIRK4s3B", "EPIRK5s3", "EXPRB53s3"}; }

MethodDefinition builtin(BuiltinScheme scheme) {
  using R = Rational;
  switch (scheme) {
    case BuiltinScheme::EPIRK4s3A: {
      MethodDefinition m("EPIRK4s3A", 3, MethodForm::residual);
      m.first_term(2) = {R(1, 2), phi(1, R(1, 2))};
      m.first_term(3) = {R(2, 3), phi(1, R(2, 3))};
      m.first_term(4) = {R(1), phi(1)};
      m.coeff(4, 2) = {combo(1, {{3, R(32)}, {4, R(-144)}})};
      m.coeff(4, 3) = {combo(1, {{3, R(-27, 2)}, {4, R(81)}})};
      m.stiff_order = 4;
      m.strategy_hint = Strategy::mixed;
      m.embedded = embedded_estimator(scheme);
      return m;
    }
    case BuiltinScheme::EPIRK4s3B: {
      MethodDefinition m("EPIRK4s3B", 3, MethodForm::residual);
      m.first_term(2) = {R(2, 3), phi(2, R(1, 2))};
      m.first_term(3) = {R(1), phi(2, R(3, 4))};
      m.first_term(4) = {R(1), phi(1)};
      m.coeff(4, 2) = {combo(1, {{3, R(54)}, {4, R(-324)}})};
      m.coeff(4, 3) = {combo(1, {{3, R(-16)}, {4, R(144)}})};
      m.stiff_order = 4;
      m.strategy_hint = Strategy::mixed;
      return m;
    }
    case BuiltinScheme::EPIRK5s3: {
      MethodDefinition m("EPIRK5s3", 3, MethodForm::residual);
      m.first_term(2) = {R(288, 55), combo(R(48, 55), {{2, R(1)}, {3, R(-2)}})};
      m.first_term(3) = {R(212, 45), combo(R(4, 9), {{1, R(1)}, {2, R(-288, 53)}, {3, R(576, 53)}})};
      m.coeff(3, 2) = {phi(3, R(4, 9), R(32065, 13122))};
      m.first_term(4) = {R(1), phi(1)};
      m.coeff(4, 2) = {combo(1, {{3, R(-166375, 61056)}, {4, R(499125, 27136)}})};
      // the printed phi_4 coefficient -2187/106 violates C1; C1-C3 all force this value
      m.coeff(4, 3) = {combo(1, {{3, R(2187, 106)}, {4, R(-120285, 1696)}})};
      m.stiff_order = 5;
      m.strategy_hint = Strategy::horizontal;
      return m;
    }
    case BuiltinScheme::EXPRB53s3: {
      MethodDefinition m("EXPRB53s3", 3, MethodForm::residual);
      m.first_term(2) = {R(1, 2), phi(1, R(1, 2))};
      m.first_term(3) = {R(9, 10), phi(1, R(9, 10))};
      m.coeff(3, 2) = {phi(3, R(1, 2), R(27, 25)), phi(3, R(9, 10), R(729, 125))};
      m.first_term(4) = {R(1), phi(1)};
      m.coeff(4, 2) = {combo(1, {{3, R(18)}, {4, R(-60)}})};
      m.coeff(4, 3) = {combo(1, {{3, R(-250, 81)}, {4, R(500, 27)}})};
      m.stiff_order = 5;
      m.strategy_hint = Strategy::mixed;
      return m;
    }
  }
  throw InvalidArgument("unknown builtin scheme");
}

MethodDefinition builtin(const std::string& name) {
  if (name == "EPIRK4s3A") return builtin(BuiltinScheme::EPIRK4s3A);
  if (name == "EPIRK4s3B") return builtin(BuiltinScheme::EPIRK4s3B);
  if (name == "EPIRK5s3") return builtin(BuiltinScheme::EPIRK5s3);
  if (name == "EXPRB53s3") return builtin(BuiltinScheme::EXPRB53s3);
  throw InvalidArgument("unknown method '" + name + "'");
}

EmbeddedStage embedded_estimator(BuiltinScheme scheme) {
  if (scheme != BuiltinScheme::EPIRK4s3A)
    throw NotAvailable("no embedded estimator is published for this scheme");
  EmbeddedStage e;
  e.first = {Rational(1), phi(1)};
  e.coupling.resize(4);
  e.coupling[2] = {phi(3, 1, Rational(8))};
  e.order = 3;
  return e;
}

MethodDefinition embedded_as_method(const MethodDefinition& method) {
  if (!method.embedded) throw NotAvailable(method.name + " has no embedded estimator");
  MethodDefinition m = method;
  m.name = method.name + "-embedded";
  m.first_term(m.final_index()) = method.embedded->first;
  for (int j = 2; j <= m.stages; ++j)
    m.coeff(m.final_index(), j) =
        j < static_cast<int>(method.embedded->coupling.size()) ? method.embedded->coupling[j] : PhiSum{};
  m.stiff_order = method.embedded->order;
  m.embedded.reset();
  return m;
}

namespace {

void check_combination(const PhiCombination& c, const std::string& where, std::vector<Violation>& out) {
  const Rational zero(0), one(1);
  if (!(zero < c.scale) || one < c.scale)
    out.push_back({"scale_range", where + ": scale " + c.scale.str() + " outside (0, 1]", Severity::error});
  std::vector<int> seen;
  for (const auto& t : c.terms) {
    if (t.k < 1 || t.k > kMaxPhiOrder)
      out.push_back({"phi_index", where + ": phi index " + std::to_string(t.k) + " outside [1, 12]",
                     Severity::error});
    if (std::find(seen.begin(), seen.end(), t.k) != seen.end())
      out.push_back({"duplicate_term", where + ": repeated phi_" + std::to_string(t.k), Severity::error});
    seen.push_back(t.k);
  }
}

}  // namespace

std::vector<Violation> validate(const MethodDefinition& m) {
  std::vector<Violation> out;
  const int s = m.stages;
  if (s < 1 || static_cast<int>(m.first.size()) != s + 2 || static_cast<int>(m.coupling.size()) != s + 2) {
    out.push_back({"structure", "tableau arrays do not match the stage count", Severity::error});
    return out;
  }
  for (int i = 2; i <= s + 1; ++i) {
    const std::string where = i == s + 1 ? "final stage" : "stage " + std::to_string(i);
    check_combination(m.first[i].psi, where + " first term", out);
    if (m.first[i].psi.is_zero() && i <= s)
      out.push_back({"empty_stage", where + " has no f(u_n) term", Severity::warning});
    for (int j = 2; j < i; ++j)
      for (const auto& c : m.coupling[i][j]) check_combination(c, where + " column " + std::to_string(j), out);
  }
  const FirstTerm& fin = m.first[s + 1];
  if (m.stiff_order >= 2) {
    const bool ok = fin.alpha == Rational(1) && fin.psi.scale == Rational(1) && fin.psi == phi(1);
    if (!ok)
      out.push_back({"normalization", "final stage must use beta_1 = 1 and phi_1(z) with g = 1", Severity::error});
  }
  if (m.stiff_order >= 3) {
    const MethodDefinition r = to_residual_method(m);
    for (int j = 2; j <= s; ++j)
      for (const auto& c : r.coupling[s + 1][j])
        if (!(c.scale == Rational(1)))
          out.push_back({"lemma3", "final stage column " + std::to_string(j) + " uses g = " + c.scale.str() +
                                       " (must be 1)", Severity::error});
  }
  for (int i = 2; i <= s; ++i) {
    const FirstTerm& ft = m.first[i];
    const Rational g = ft.psi.scale;
    for (const auto& t : ft.psi.terms) {
      if (t.coeff.is_zero()) continue;
      const bool ok = ft.alpha * t.coeff == g || ft.alpha == g || t.coeff == g;
      if (!ok) {
        out.push_back({"assumption3",
                       "stage " + std::to_string(i) + ": alpha*p = " + (ft.alpha * t.coeff).str() +
                           " for phi_" + std::to_string(t.k) + ", g = " + g.str(),
                       Severity::warning});
        break;
      }
    }
  }
  return out;
}

GroupedRow group_row(const std::vector<PhiTermVector>& terms, const LinearOperator& X) {
  if (terms.empty()) throw InvalidArgument("empty row");
  int kmin = kMaxPhiOrder + 1, kmax = -1;
  for (const auto& t : terms) {
    kmin = std::min(kmin, t.k);
    kmax = std::max(kmax, t.k);
  }
  const Eigen::Index n = X.dimension;
  std::vector<Vector> v(static_cast<std::size_t>(kmax) + 1, Vector::Zero(n));
  for (const auto& t : terms) v[t.k] += t.b;

  GroupedRow row;
  row.order = kmax;
  Vector acc = v[kmin];
  for (int k = kmin + 1; k <= kmax; ++k) acc = X(acc) + v[k];
  row.phi_argument = acc;

  // polynomial = sum_m X^m c_m, c_m = sum_{k+m <= K-1} v_k/(k+m)!
  const int mmax = kmax - 1 - kmin;
  Vector poly = Vector::Zero(n);
  for (int m = mmax; m >= 0; --m) {
    Vector c = Vector::Zero(n);
    for (int k = kmin; k + m <= kmax - 1; ++k) c += v[k] * inverse_factorial(k + m);
    poly = (m == mmax ? Vector(c) : Vector(X(poly) + c));
  }
  row.polynomial = poly;
  return row;
}

}  // namespace epirk
