#include "gramsnn/grammar.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>

namespace gramsnn {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    std::size_t j = i;
    while (j < s.size() && !std::isspace(static_cast<unsigned char>(s[j]))) ++j;
    if (j > i) out.push_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

bool parse_double(std::string_view s, double& out) {
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc{} && p == s.data() + s.size();
}

ParamSpec parse_param_spec(std::string_view tok, const std::string& line) {
  // tok = [name,type,count,lo,hi]
  std::string_view body = tok.substr(1, tok.size() - 2);
  std::vector<std::string_view> fields;
  std::size_t pos = 0;
  while (true) {
    std::size_t c = body.find(',', pos);
    if (c == std::string_view::npos) {
      fields.push_back(body.substr(pos));
      break;
    }
    fields.push_back(body.substr(pos, c - pos));
    pos = c + 1;
  }
  if (fields.size() != 5)
    throw GrammarError(GrammarError::Kind::MalformedParamSpec,
                       "parameter spec needs 5 fields: " + std::string(tok) + " in: " + line);
  ParamSpec spec;
  spec.name = std::string(trim(fields[0]));
  std::string_view type = trim(fields[1]);
  if (type == "int")
    spec.numtype = ParamSpec::Num::Int;
  else if (type == "float")
    spec.numtype = ParamSpec::Num::Float;
  else
    throw GrammarError(GrammarError::Kind::MalformedParamSpec,
                       "bad numeric type '" + std::string(type) + "' in: " + line);
  double count = 0;
  if (spec.name.empty() || !parse_double(trim(fields[2]), count) || count < 1 ||
      count != static_cast<int>(count) || !parse_double(trim(fields[3]), spec.lo) ||
      !parse_double(trim(fields[4]), spec.hi))
    throw GrammarError(GrammarError::Kind::MalformedParamSpec,
                       "bad parameter spec " + std::string(tok) + " in: " + line);
  spec.count = static_cast<int>(count);
  if (spec.lo > spec.hi)
    throw GrammarError(GrammarError::Kind::MalformedParamSpec,
                       "lo > hi in parameter spec " + std::string(tok) + " in: " + line);
  return spec;
}

GrammarSymbol parse_symbol(std::string_view tok, const std::string& line) {
  if (tok.size() >= 3 && tok.front() == '<' && tok.back() == '>')
    return NonTerminalRef{std::string(tok.substr(1, tok.size() - 2))};
  if (tok.front() == '[') {
    if (tok.back() != ']')
      throw GrammarError(GrammarError::Kind::MalformedParamSpec,
                         "unterminated parameter spec in: " + line);
    return parse_param_spec(tok, line);
  }
  std::size_t colon = tok.find(':');
  if (colon == std::string_view::npos || colon == 0 || colon + 1 == tok.size())
    throw GrammarError(GrammarError::Kind::MalformedRule,
                       "bad symbol '" + std::string(tok) + "' in: " + line);
  return TerminalAttr{std::string(tok.substr(0, colon)), std::string(tok.substr(colon + 1))};
}

void check_acyclic(const Grammar& g) {
  // colors: 0 unvisited, 1 on stack, 2 done
  std::unordered_map<std::string, int> color;
  struct Walker {
    const Grammar& g;
    std::unordered_map<std::string, int>& color;
    void visit(const std::string& nt) {
      int& c = color[nt];
      if (c == 1)
        throw GrammarError(GrammarError::Kind::CyclicGrammar,
                           "grammar cycle through <" + nt + ">");
      if (c == 2) return;
      c = 1;
      for (const auto& prod : g.alternatives(nt))
        for (const auto& sym : prod.symbols)
          if (const auto* ref = std::get_if<NonTerminalRef>(&sym)) visit(ref->name);
      color[nt] = 2;
    }
  } w{g, color};
  for (const auto& nt : g.order()) w.visit(nt);
}

}  // namespace

void Grammar::add_rule(const std::string& lhs, std::vector<Production> alts) {
  auto it = rules_.find(lhs);
  if (it == rules_.end()) {
    order_.push_back(lhs);
    rules_.emplace(lhs, std::move(alts));
  } else {
    for (auto& a : alts) it->second.push_back(std::move(a));
  }
}

const std::vector<Production>& Grammar::alternatives(const std::string& nt) const {
  auto it = rules_.find(nt);
  if (it == rules_.end())
    throw GrammarError(GrammarError::Kind::UnknownNonterminal, "unknown nonterminal <" + nt + ">");
  return it->second;
}

bool Grammar::operator==(const Grammar& other) const {
  return order_ == other.order_ && rules_ == other.rules_;
}

Grammar parse_grammar(std::string_view text) {
  // Assemble logical lines: continuation lines begin with whitespace.
  std::vector<std::string> logical;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t nl = text.find('\n', pos);
    std::string_view line = text.substr(pos, nl == std::string_view::npos ? nl : nl - pos);
    pos = (nl == std::string_view::npos) ? text.size() + 1 : nl + 1;
    if (trim(line).empty()) continue;
    if (trim(line).front() == '#') continue;
    bool continuation = std::isspace(static_cast<unsigned char>(line.front()));
    if (continuation && !logical.empty()) {
      logical.back() += ' ';
      logical.back() += std::string(trim(line));
    } else {
      logical.emplace_back(trim(line));
    }
  }

  Grammar g;
  for (const auto& line : logical) {
    std::size_t sep = line.find("::=");
    if (sep == std::string::npos)
      throw GrammarError(GrammarError::Kind::MalformedRule, "missing ::= in: " + line);
    std::string_view lhs = trim(std::string_view(line).substr(0, sep));
    if (lhs.size() < 3 || lhs.front() != '<' || lhs.back() != '>')
      throw GrammarError(GrammarError::Kind::MalformedRule, "bad rule head in: " + line);
    std::string name(lhs.substr(1, lhs.size() - 2));

    std::string_view rhs = std::string_view(line).substr(sep + 3);
    std::vector<Production> alts;
    std::size_t p = 0;
    while (true) {
      std::size_t bar = rhs.find('|', p);
      std::string_view alt =
          bar == std::string_view::npos ? rhs.substr(p) : rhs.substr(p, bar - p);
      Production prod;
      for (auto tok : split_ws(alt)) prod.symbols.push_back(parse_symbol(tok, line));
      if (prod.symbols.empty())
        throw GrammarError(GrammarError::Kind::MalformedRule, "empty alternative in: " + line);
      alts.push_back(std::move(prod));
      if (bar == std::string_view::npos) break;
      p = bar + 1;
    }
    g.add_rule(name, std::move(alts));
  }

  // Every referenced nonterminal must be defined.
  for (const auto& nt : g.order())
    for (const auto& prod : g.alternatives(nt))
      for (const auto& sym : prod.symbols)
        if (const auto* ref = std::get_if<NonTerminalRef>(&sym))
          if (!g.has(ref->name))
            throw GrammarError(GrammarError::Kind::UnknownNonterminal,
                               "undefined nonterminal <" + ref->name + "> referenced by <" +
                                   nt + ">");
  check_acyclic(g);
  return g;
}

Grammar load_grammar_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(DataError::Kind::Missing, "cannot open grammar file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_grammar(ss.str());
}

std::string render_number(double v, ParamSpec::Num numtype) {
  char buf[64];
  if (numtype == ParamSpec::Num::Int) {
    auto [p, ec] = std::to_chars(buf, buf + sizeof buf, static_cast<long long>(v));
    return std::string(buf, p);
  }
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, p);
}

std::string print_grammar(const Grammar& g) {
  std::ostringstream out;
  for (const auto& nt : g.order()) {
    out << '<' << nt << "> ::=";
    const auto& alts = g.alternatives(nt);
    for (std::size_t i = 0; i < alts.size(); ++i) {
      if (i) out << " |";
      for (const auto& sym : alts[i].symbols) {
        out << ' ';
        if (const auto* ref = std::get_if<NonTerminalRef>(&sym)) {
          out << '<' << ref->name << '>';
        } else if (const auto* attr = std::get_if<TerminalAttr>(&sym)) {
          out << attr->key << ':' << attr->value;
        } else {
          const auto& ps = std::get<ParamSpec>(sym);
          out << '[' << ps.name << ','
              << (ps.numtype == ParamSpec::Num::Int ? "int" : "float") << ',' << ps.count << ','
              << render_number(ps.lo, ParamSpec::Num::Float) << ','
              << render_number(ps.hi, ParamSpec::Num::Float) << ']';
        }
      }
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace gramsnn
