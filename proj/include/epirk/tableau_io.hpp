#pragma once

#include <string>
#include <string_view>

#include "epirk/errors.hpp"
#include "epirk/schemes.hpp"

namespace epirk {

class TableauParseError : public InvalidArgument {
 public:
  TableauParseError(int line, const std::string& what)
      : InvalidArgument("line " + std::to_string(line) + ": " + what), line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

// Line-oriented text format:
//   NAME <id> | STAGES <s> | FORM forward_difference|residual | STIFF_ORDER <p> | STRATEGY <name>
//   ALPHA(i,j) = p/q
//   BETA(j) = p/q
//   PSI(i,j) = g; c1*phi_k1 + c2*phi_k2 ...   (repeat a line to add a term at another scale)
//   EMBEDDED            following BETA / PSI(s+1,j) lines describe the embedded final stage
//   EMBEDDED_ORDER <p>
// '#' starts a comment. Unset ALPHA/BETA default to 1.
MethodDefinition parse_tableau(std::string_view text);
MethodDefinition load_tableau(const std::string& path);
std::string write_tableau(const MethodDefinition& method);

}  // namespace epirk
