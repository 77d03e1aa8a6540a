#include "epirk/tableau_io.hpp"

#include <cctype>
#include <fstream>
#include <map>
#include <sstream>

namespace epirk {
namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::string strip_spaces(std::string_view s) {
  std::string out;
  for (char c : s)
    if (!std::isspace(static_cast<unsigned char>(c))) out += c;
  return out;
}

int parse_int(std::string_view s, int line, const char* what) {
  s = trim(s);
  if (s.empty()) throw TableauParseError(line, std::string("missing ") + what);
  int v = 0;
  for (char c : s) {
    if (!std::isdigit(static_cast<unsigned char>(c)))
      throw TableauParseError(line, std::string("expected integer ") + what + ", got '" + std::string(s) + "'");
    v = v * 10 + (c - '0');
    if (v > 1000000) throw TableauParseError(line, std::string(what) + " too large");
  }
  return v;
}

Rational parse_rational(std::string_view s, int line) {
  try {
    return Rational::parse(trim(s));
  } catch (const std::exception& e) {
    throw TableauParseError(line, e.what());
  }
}

// "c1*phi_k1 - phi_k2 + p/q*phi_k3"
std::vector<PhiTerm> parse_terms(std::string_view text, int line) {
  const std::string s = strip_spaces(text);
  if (s.empty()) throw TableauParseError(line, "empty phi combination");
  std::vector<PhiTerm> terms;
  std::size_t pos = 0;
  while (pos < s.size()) {
    std::int64_t sign = 1;
    if (s[pos] == '+' || s[pos] == '-') {
      if (s[pos] == '-') sign = -1;
      ++pos;
    } else if (pos != 0) {
      throw TableauParseError(line, "expected '+' or '-' between terms");
    }
    const std::size_t phi_at = s.find("phi_", pos);
    if (phi_at == std::string::npos) throw TableauParseError(line, "expected phi_k in term");
    Rational c(1);
    if (phi_at > pos) {
      std::string_view coeff(s.data() + pos, phi_at - pos);
      if (coeff.back() != '*') throw TableauParseError(line, "expected '*' before phi_k");
      coeff.remove_suffix(1);
      c = parse_rational(coeff, line);
    }
    std::size_t end = phi_at + 4;
    while (end < s.size() && std::isdigit(static_cast<unsigned char>(s[end]))) ++end;
    const int k = parse_int(std::string_view(s.data() + phi_at + 4, end - phi_at - 4), line, "phi index");
    if (k < 1 || k > kMaxPhiOrder) throw TableauParseError(line, "phi index outside [1, 12]");
    for (const auto& t : terms)
      if (t.k == k) throw TableauParseError(line, "phi_" + std::to_string(k) + " repeated in one combination");
    terms.push_back({k, c * Rational(sign)});
    pos = end;
  }
  return terms;
}

// "(i,j)" or "(j)"
std::vector<int> parse_indices(std::string_view s, int line) {
  s = trim(s);
  if (s.size() < 3 || s.front() != '(' || s.back() != ')') throw TableauParseError(line, "expected (i,j) indices");
  s = s.substr(1, s.size() - 2);
  std::vector<int> out;
  while (true) {
    const auto comma = s.find(',');
    out.push_back(parse_int(s.substr(0, comma), line, "index"));
    if (comma == std::string_view::npos) break;
    s.remove_prefix(comma + 1);
  }
  return out;
}

struct Draft {
  std::map<std::pair<int, int>, Rational> alpha;
  std::map<int, Rational> beta, ebeta;
  std::map<std::pair<int, int>, std::vector<PhiCombination>> psi;
  std::map<int, std::vector<PhiCombination>> epsi;
  std::map<std::pair<int, int>, int> psi_line;
};

}  // namespace

MethodDefinition parse_tableau(std::string_view text) {
  std::string name = "custom";
  int stages = 0, stiff_order = 0, embedded_order = 0;
  MethodForm form = MethodForm::forward_difference;
  Strategy strategy = Strategy::vertical;
  bool in_embedded = false, has_embedded = false;
  Draft d;

  int line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t nl = text.find('\n', start);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view line = text.substr(start, nl - start);
    start = nl + 1;
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) {
      if (nl == text.size()) break;
      continue;
    }
    std::size_t kw_end = 0;
    while (kw_end < line.size() && (std::isalnum(static_cast<unsigned char>(line[kw_end])) || line[kw_end] == '_'))
      ++kw_end;
    const std::string kw(line.substr(0, kw_end));
    std::string_view rest = trim(line.substr(kw_end));

    auto need_stages = [&] {
      if (stages == 0) throw TableauParseError(line_no, kw + " before STAGES");
    };

    if (kw == "NAME") {
      if (rest.empty()) throw TableauParseError(line_no, "NAME needs a value");
      name = std::string(rest);
    } else if (kw == "STAGES") {
      if (stages != 0) throw TableauParseError(line_no, "STAGES given twice");
      stages = parse_int(rest, line_no, "stage count");
      if (stages < 1 || stages > 12) throw TableauParseError(line_no, "stage count outside [1, 12]");
    } else if (kw == "FORM") {
      if (rest == "forward_difference") form = MethodForm::forward_difference;
      else if (rest == "residual") form = MethodForm::residual;
      else throw TableauParseError(line_no, "FORM must be forward_difference or residual");
    } else if (kw == "STIFF_ORDER") {
      stiff_order = parse_int(rest, line_no, "order");
    } else if (kw == "STRATEGY") {
      try {
        strategy = parse_strategy(std::string(rest));
      } catch (const std::exception& e) {
        throw TableauParseError(line_no, e.what());
      }
    } else if (kw == "EMBEDDED") {
      if (!rest.empty()) throw TableauParseError(line_no, "EMBEDDED takes no value");
      in_embedded = has_embedded = true;
    } else if (kw == "EMBEDDED_ORDER") {
      embedded_order = parse_int(rest, line_no, "order");
    } else if (kw == "ALPHA" || kw == "BETA" || kw == "PSI") {
      need_stages();
      const auto eq = rest.find('=');
      if (eq == std::string_view::npos) throw TableauParseError(line_no, "expected '='");
      const auto idx = parse_indices(rest.substr(0, eq), line_no);
      std::string_view rhs = rest.substr(eq + 1);
      if (kw == "ALPHA") {
        if (in_embedded) throw TableauParseError(line_no, "ALPHA inside EMBEDDED section");
        if (idx.size() != 2 || idx[0] < 2 || idx[0] > stages || idx[1] < 1 || idx[1] >= idx[0])
          throw TableauParseError(line_no, "ALPHA(i,j) needs 2 <= i <= s and 1 <= j < i");
        d.alpha[{idx[0], idx[1]}] = parse_rational(rhs, line_no);
      } else if (kw == "BETA") {
        if (idx.size() != 1 || idx[0] < 1 || idx[0] > stages)
          throw TableauParseError(line_no, "BETA(j) needs 1 <= j <= s");
        (in_embedded ? d.ebeta : d.beta)[idx[0]] = parse_rational(rhs, line_no);
      } else {
        if (idx.size() != 2 || idx[0] < 2 || idx[0] > stages + 1 || idx[1] < 1 || idx[1] >= idx[0])
          throw TableauParseError(line_no, "PSI(i,j) needs 2 <= i <= s+1 and 1 <= j < i");
        const auto semi = rhs.find(';');
        if (semi == std::string_view::npos) throw TableauParseError(line_no, "expected ';' after scale");
        PhiCombination c;
        c.scale = parse_rational(rhs.substr(0, semi), line_no);
        if (!(Rational(0) < c.scale) || Rational(1) < c.scale)
          throw TableauParseError(line_no, "scale outside (0, 1]");
        c.terms = parse_terms(rhs.substr(semi + 1), line_no);
        if (in_embedded) {
          if (idx[0] != stages + 1) throw TableauParseError(line_no, "EMBEDDED section only takes PSI(s+1,j)");
          auto& slot = d.epsi[idx[1]];
          if (idx[1] == 1 && !slot.empty()) throw TableauParseError(line_no, "first term given twice");
          slot.push_back(c);
        } else {
          auto& slot = d.psi[{idx[0], idx[1]}];
          if (idx[1] == 1 && !slot.empty()) throw TableauParseError(line_no, "first term given twice");
          slot.push_back(c);
          d.psi_line[{idx[0], idx[1]}] = line_no;
        }
      }
    } else {
      throw TableauParseError(line_no, "unknown directive '" + kw + "'");
    }
    if (nl == text.size()) break;
  }
  if (stages == 0) throw TableauParseError(line_no, "missing STAGES");

  MethodDefinition m(name, stages, form);
  m.stiff_order = stiff_order;
  m.strategy_hint = strategy;
  auto factor = [&](int i, int j) {
    if (i == stages + 1) {
      auto it = d.beta.find(j);
      return it == d.beta.end() ? Rational(1) : it->second;
    }
    auto it = d.alpha.find({i, j});
    return it == d.alpha.end() ? Rational(1) : it->second;
  };
  for (int i = 2; i <= stages + 1; ++i) {
    auto it = d.psi.find({i, 1});
    if (it == d.psi.end())
      throw TableauParseError(line_no, "missing PSI(" + std::to_string(i) + ",1)");
    m.first_term(i) = {factor(i, 1), it->second.front()};
    for (int j = 2; j < i; ++j) {
      auto p = d.psi.find({i, j});
      if (p != d.psi.end()) m.coeff(i, j) = scaled(p->second, factor(i, j));
    }
  }
  for (const auto& [key, value] : d.alpha)
    if (!d.psi.count(key))
      throw TableauParseError(line_no, "ALPHA(" + std::to_string(key.first) + "," + std::to_string(key.second) +
                                           ") has no PSI line");
  if (has_embedded) {
    EmbeddedStage e;
    auto first = d.epsi.find(1);
    if (first == d.epsi.end()) throw TableauParseError(line_no, "EMBEDDED section lacks PSI(s+1,1)");
    auto eb = [&](int j) {
      auto it = d.ebeta.find(j);
      return it == d.ebeta.end() ? Rational(1) : it->second;
    };
    e.first = {eb(1), first->second.front()};
    e.coupling.resize(static_cast<std::size_t>(stages) + 1);
    for (int j = 2; j <= stages; ++j) {
      auto p = d.epsi.find(j);
      if (p != d.epsi.end()) e.coupling[j] = scaled(p->second, eb(j));
    }
    e.order = embedded_order > 0 ? embedded_order : std::max(1, stiff_order - 1);
    m.embedded = e;
  }
  return m;
}

MethodDefinition load_tableau(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open tableau file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_tableau(ss.str());
}

namespace {

std::string terms_text(const PhiCombination& c) {
  std::string out;
  for (std::size_t t = 0; t < c.terms.size(); ++t) {
    const Rational& v = c.terms[t].coeff;
    if (t > 0) out += v < Rational(0) ? " - " : " + ";
    else if (v < Rational(0)) out += "-";
    const Rational mag = v < Rational(0) ? -v : v;
    out += mag.str() + "*phi_" + std::to_string(c.terms[t].k);
  }
  return out;
}

void write_psi(std::ostream& os, int i, int j, const PhiCombination& c) {
  os << "PSI(" << i << "," << j << ") = " << c.scale << "; " << terms_text(c) << "\n";
}

}  // namespace

std::string write_tableau(const MethodDefinition& m) {
  std::ostringstream os;
  os << "NAME " << m.name << "\n"
     << "STAGES " << m.stages << "\n"
     << "FORM " << to_string(m.form) << "\n"
     << "STIFF_ORDER " << m.stiff_order << "\n"
     << "STRATEGY " << to_string(m.strategy_hint) << "\n";
  for (int i = 2; i <= m.stages + 1; ++i) {
    const FirstTerm& f = m.first_term(i);
    if (i <= m.stages) os << "ALPHA(" << i << ",1) = " << f.alpha << "\n";
    else os << "BETA(1) = " << f.alpha << "\n";
    write_psi(os, i, 1, f.psi);
    for (int j = 2; j < i; ++j)
      for (const auto& c : m.coeff(i, j))
        if (!c.is_zero()) write_psi(os, i, j, c);
  }
  if (m.embedded) {
    os << "EMBEDDED\n"
       << "EMBEDDED_ORDER " << m.embedded->order << "\n"
       << "BETA(1) = " << m.embedded->first.alpha << "\n";
    write_psi(os, m.stages + 1, 1, m.embedded->first.psi);
    for (int j = 2; j < static_cast<int>(m.embedded->coupling.size()); ++j)
      for (const auto& c : m.embedded->coupling[j])
        if (!c.is_zero()) write_psi(os, m.stages + 1, j, c);
  }
  return os.str();
}

}  // namespace epirk
