#pragma once

#include <stdexcept>
#include <string>

namespace gramsnn {

struct GrammarError : std::runtime_error {
  enum class Kind { MalformedRule, UnknownNonterminal, MalformedParamSpec, CyclicGrammar };
  Kind kind;
  GrammarError(Kind k, const std::string& msg) : std::runtime_error(msg), kind(k) {}
};

struct DeriveError : std::runtime_error {
  enum class Kind { GeneUnderflow, ChoiceOutOfRange };
  Kind kind;
  DeriveError(Kind k, const std::string& msg) : std::runtime_error(msg), kind(k) {}
};

struct ShapeError : std::runtime_error {
  explicit ShapeError(const std::string& msg) : std::runtime_error(msg) {}
};

// Thrown when a membrane potential goes non-finite mid-simulation. The
// evolution engine treats this as an invalid candidate.
struct NonFiniteActivation : std::runtime_error {
  explicit NonFiniteActivation(const std::string& msg) : std::runtime_error(msg) {}
};

struct DataError : std::runtime_error {
  enum class Kind { BadMagic, CountMismatch, Truncated, Missing };
  Kind kind;
  DataError(Kind k, const std::string& msg) : std::runtime_error(msg), kind(k) {}
};

struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace gramsnn
