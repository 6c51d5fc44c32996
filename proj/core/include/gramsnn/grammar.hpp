#pragma once

#include <string>
#include <string_view>
#include <unordered_map>
#include <variant>
#include <vector>

#include "gramsnn/errors.hpp"

namespace gramsnn {

struct NonTerminalRef {
  std::string name;
  bool operator==(const NonTerminalRef&) const = default;
};

struct TerminalAttr {
  std::string key;
  std::string value;
  bool operator==(const TerminalAttr&) const = default;
};

struct ParamSpec {
  enum class Num { Int, Float };
  std::string name;
  Num numtype = Num::Int;
  int count = 1;
  double lo = 0.0;
  double hi = 0.0;
  bool operator==(const ParamSpec&) const = default;
};

using GrammarSymbol = std::variant<NonTerminalRef, TerminalAttr, ParamSpec>;

struct Production {
  std::vector<GrammarSymbol> symbols;
  bool operator==(const Production&) const = default;
};

// Acyclic BNF-style grammar with parameterized terminals. Duplicate
// alternatives are kept in source order; uniform choice over the list is what
// turns duplication into probability weighting.
class Grammar {
 public:
  void add_rule(const std::string& lhs, std::vector<Production> alts);
  bool has(const std::string& nt) const { return rules_.count(nt) != 0; }
  const std::vector<Production>& alternatives(const std::string& nt) const;
  const std::vector<std::string>& order() const { return order_; }
  std::size_t size() const { return order_.size(); }
  bool operator==(const Grammar& other) const;

 private:
  std::vector<std::string> order_;
  std::unordered_map<std::string, std::vector<Production>> rules_;
};

// Line-oriented format: `<name> ::= alt | alt`, `#` comments, continuation
// lines begin with whitespace. Repeated LHS lines append alternatives.
Grammar parse_grammar(std::string_view text);
Grammar load_grammar_file(const std::string& path);

std::string print_grammar(const Grammar& g);

// Terminal attribute stream of a derivation, segmented into groups at each
// `layer:` or `learning:` attribute.
struct Attribute {
  std::string key;
  std::string value;
  bool operator==(const Attribute&) const = default;
};
using AttributeGroup = std::vector<Attribute>;
using AttributeGroups = std::vector<AttributeGroup>;

// Shortest round-trip rendering; integers print without a decimal point.
std::string render_number(double v, ParamSpec::Num numtype);

}  // namespace gramsnn
