#pragma once

#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gramsnn/grammar.hpp"
#include "gramsnn/rng.hpp"

namespace gramsnn {

// One DSGE expansion decision: which alternative of its nonterminal was
// chosen, plus the values drawn for every parameter spec of that alternative
// (in production order, expanded by count).
struct Gene {
  int choice = 0;
  std::vector<double> params;
  bool operator==(const Gene&) const = default;
};

// Per-nonterminal gene lists, consumed in depth-first leftmost derivation
// order.
struct GeneSet {
  std::vector<std::pair<std::string, std::vector<Gene>>> per_nonterminal;

  std::vector<Gene>* find(const std::string& nt);
  const std::vector<Gene>* find(const std::string& nt) const;
  std::vector<Gene>& get_or_create(const std::string& nt);
  bool operator==(const GeneSet&) const = default;
};

struct Unit {
  std::string nonterminal;
  GeneSet genes;
  bool operator==(const Unit&) const = default;
};

struct MacroUnitSpec {
  std::string nonterminal;
  int min_count = 1;
  int max_count = 1;
};

struct Individual {
  std::vector<Unit> units;
  std::optional<double> fitness;
  std::string id;
  std::optional<std::string> parent_id;
};

struct MutationRates {
  double add = 0.25;
  double duplicate = 0.15;
  double remove = 0.25;
  double layer_dsge = 0.15;
  double learning_dsge = 0.30;
  double gaussian_mean = 0.0;
  double gaussian_sigma = 0.15;
};

// Random DSGE derivation: uniform alternative choice per nonterminal,
// uniform parameter draws (integer bounds inclusive).
GeneSet sample_genes(const Grammar& grammar, const std::string& start, Rng& rng);

// Deterministic derivation with repair disabled; throws DeriveError on
// underflow or a corrupt choice index.
AttributeGroups derive_phenotype(const Grammar& grammar, const std::string& start,
                                 const GeneSet& genes);

Individual random_individual(const Grammar& grammar, const std::vector<MacroUnitSpec>& macro,
                             Rng& rng);

// Structural add/duplicate/remove plus per-unit DSGE mutation; falls back to
// one forced DSGE mutation when nothing fires. The parent is not modified.
Individual mutate(const Individual& parent, const MutationRates& rates, const Grammar& grammar,
                  const std::vector<MacroUnitSpec>& macro, Rng& rng);

// One mutation at a uniformly chosen mutable slot (grammatical / integer /
// float). Returns the unit unchanged when it has no mutable slot.
Unit dsge_mutate_unit(const Unit& unit, const Grammar& grammar, const MutationRates& rates,
                      Rng& rng);

struct DecodeResult {
  AttributeGroups groups;
  int repairs = 0;
};

// Concatenated phenotype over all units. Gene underflow is repaired in place
// (sample-and-append), so a second decode of the same individual performs
// zero repairs.
DecodeResult decode(Individual& individual, const Grammar& grammar);

bool macro_counts_ok(const Individual& ind, const std::vector<MacroUnitSpec>& macro);

nlohmann::json individual_to_json(const Individual& ind, const std::string& grammar_name);
Individual individual_from_json(const nlohmann::json& j);

std::vector<MacroUnitSpec> parse_macro(const std::string& text);
std::string macro_to_string(const std::vector<MacroUnitSpec>& macro);

}  // namespace gramsnn
