#include "gramsnn/genotype.hpp"

#include <algorithm>
#include <charconv>
#include <sstream>
#include <unordered_map>

#include <nlohmann/json.hpp>

namespace gramsnn {

std::vector<Gene>* GeneSet::find(const std::string& nt) {
  for (auto& [k, v] : per_nonterminal)
    if (k == nt) return &v;
  return nullptr;
}

const std::vector<Gene>* GeneSet::find(const std::string& nt) const {
  for (const auto& [k, v] : per_nonterminal)
    if (k == nt) return &v;
  return nullptr;
}

std::vector<Gene>& GeneSet::get_or_create(const std::string& nt) {
  if (auto* p = find(nt)) return *p;
  per_nonterminal.emplace_back(nt, std::vector<Gene>{});
  return per_nonterminal.back().second;
}

namespace {

double draw_param(const ParamSpec& ps, Rng& rng) {
  if (ps.numtype == ParamSpec::Num::Int)
    return static_cast<double>(
        uniform_int(rng, static_cast<int64_t>(ps.lo), static_cast<int64_t>(ps.hi)));
  return uniform_real(rng, ps.lo, ps.hi);
}

void draw_params(const Production& prod, std::vector<double>& out, Rng& rng) {
  for (const auto& sym : prod.symbols)
    if (const auto* ps = std::get_if<ParamSpec>(&sym))
      for (int c = 0; c < ps->count; ++c) out.push_back(draw_param(*ps, rng));
}

Gene sample_gene_for(const Grammar& g, const std::string& nt, Rng& rng) {
  const auto& alts = g.alternatives(nt);
  Gene gene;
  gene.choice = static_cast<int>(uniform_int(rng, 0, static_cast<int64_t>(alts.size()) - 1));
  draw_params(alts[gene.choice], gene.params, rng);
  return gene;
}

// Depth-first leftmost derivation over per-nonterminal gene cursors.
// With allow_repair set, underflows are fixed by sample-and-append.
struct Walker {
  const Grammar& g;
  GeneSet& genes;
  bool allow_repair = false;
  Rng* rng = nullptr;
  std::unordered_map<std::string, std::size_t> cursor;
  int repairs = 0;
  AttributeGroups groups;

  void emit(const std::string& key, std::string value) {
    if (key == "layer" || key == "learning" || groups.empty()) groups.emplace_back();
    groups.back().push_back(Attribute{key, std::move(value)});
  }

  void expand(const std::string& nt) {
    const auto& alts = g.alternatives(nt);
    auto& list = genes.get_or_create(nt);
    std::size_t& cur = cursor[nt];
    if (cur >= list.size()) {
      if (!allow_repair)
        throw DeriveError(DeriveError::Kind::GeneUnderflow, "gene list exhausted for <" + nt + ">");
      list.push_back(sample_gene_for(g, nt, *rng));
      ++repairs;
    }
    Gene& gene = list[cur];
    ++cur;
    if (gene.choice < 0 || gene.choice >= static_cast<int>(alts.size()))
      throw DeriveError(DeriveError::Kind::ChoiceOutOfRange,
                        "choice " + std::to_string(gene.choice) + " out of range for <" + nt + ">");
    const Production& prod = alts[gene.choice];
    std::size_t pidx = 0;
    for (const auto& sym : prod.symbols) {
      if (const auto* ref = std::get_if<NonTerminalRef>(&sym)) {
        expand(ref->name);
      } else if (const auto* attr = std::get_if<TerminalAttr>(&sym)) {
        emit(attr->key, attr->value);
      } else {
        const auto& ps = std::get<ParamSpec>(sym);
        for (int c = 0; c < ps.count; ++c) {
          if (pidx >= gene.params.size()) {
            if (!allow_repair)
              throw DeriveError(DeriveError::Kind::GeneUnderflow,
                                "parameter list exhausted for <" + nt + ">");
            gene.params.push_back(draw_param(ps, *rng));
            ++repairs;
          }
          emit(ps.name, render_number(gene.params[pidx], ps.numtype));
          ++pidx;
        }
      }
    }
  }
};

void sample_into(const Grammar& g, const std::string& nt, GeneSet& gs, Rng& rng) {
  Gene gene = sample_gene_for(g, nt, rng);
  const Production& prod = g.alternatives(nt)[gene.choice];
  gs.get_or_create(nt).push_back(std::move(gene));
  for (const auto& sym : prod.symbols)
    if (const auto* ref = std::get_if<NonTerminalRef>(&sym)) sample_into(g, ref->name, gs, rng);
}

std::string fresh_id(Rng& rng) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(rng()));
  return std::string(buf);
}

uint64_t fnv1a(const std::string& s) {
  uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

// Contiguous [begin, end) index range of each macro group.
std::vector<std::pair<int, int>> group_ranges(const Individual& ind,
                                              const std::vector<MacroUnitSpec>& macro) {
  std::vector<std::pair<int, int>> out(macro.size());
  int i = 0;
  const int n = static_cast<int>(ind.units.size());
  for (std::size_t s = 0; s < macro.size(); ++s) {
    int begin = i;
    while (i < n && ind.units[i].nonterminal == macro[s].nonterminal) ++i;
    out[s] = {begin, i};
  }
  return out;
}

}  // namespace

GeneSet sample_genes(const Grammar& grammar, const std::string& start, Rng& rng) {
  GeneSet gs;
  sample_into(grammar, start, gs, rng);
  return gs;
}

AttributeGroups derive_phenotype(const Grammar& grammar, const std::string& start,
                                 const GeneSet& genes) {
  GeneSet copy = genes;
  Walker w{grammar, copy};
  w.expand(start);
  return std::move(w.groups);
}

Individual random_individual(const Grammar& grammar, const std::vector<MacroUnitSpec>& macro,
                             Rng& rng) {
  Individual ind;
  ind.id = fresh_id(rng);
  for (const auto& spec : macro) {
    int count = static_cast<int>(uniform_int(rng, spec.min_count, spec.max_count));
    for (int i = 0; i < count; ++i)
      ind.units.push_back(Unit{spec.nonterminal, sample_genes(grammar, spec.nonterminal, rng)});
  }
  return ind;
}

Unit dsge_mutate_unit(const Unit& unit, const Grammar& grammar, const MutationRates& rates,
                      Rng& rng) {
  struct Slot {
    enum Kind { Choice, IntParam, FloatParam } kind;
    std::string nt;
    std::size_t gene_idx;
    std::size_t param_idx;
    const ParamSpec* spec;
  };
  std::vector<Slot> slots;
  for (const auto& [nt, list] : unit.genes.per_nonterminal) {
    const auto& alts = grammar.alternatives(nt);
    for (std::size_t gi = 0; gi < list.size(); ++gi) {
      if (alts.size() >= 2) slots.push_back({Slot::Choice, nt, gi, 0, nullptr});
      const Gene& gene = list[gi];
      if (gene.choice < 0 || gene.choice >= static_cast<int>(alts.size())) continue;
      std::size_t pi = 0;
      for (const auto& sym : alts[gene.choice].symbols) {
        if (const auto* ps = std::get_if<ParamSpec>(&sym)) {
          for (int c = 0; c < ps->count; ++c, ++pi) {
            if (pi >= gene.params.size()) break;
            slots.push_back({ps->numtype == ParamSpec::Num::Int ? Slot::IntParam
                                                                : Slot::FloatParam,
                             nt, gi, pi, ps});
          }
        }
      }
    }
  }
  if (slots.empty()) return unit;  // NoMutableSlot

  const Slot& slot = slots[uniform_int(rng, 0, static_cast<int64_t>(slots.size()) - 1)];
  Unit out = unit;
  Gene& gene = (*out.genes.find(slot.nt))[slot.gene_idx];
  switch (slot.kind) {
    case Slot::Choice: {
      const auto& alts = grammar.alternatives(slot.nt);
      int pick = static_cast<int>(uniform_int(rng, 0, static_cast<int64_t>(alts.size()) - 2));
      if (pick >= gene.choice) ++pick;
      gene.choice = pick;
      gene.params.clear();
      draw_params(alts[pick], gene.params, rng);
      // Re-derive: repair fills newly required genes, consumption counts
      // identify orphans of the replaced subderivation.
      Walker w{grammar, out.genes, /*allow_repair=*/true, &rng};
      w.expand(out.nonterminal);
      for (auto& [nt2, list2] : out.genes.per_nonterminal) {
        auto it = w.cursor.find(nt2);
        std::size_t used = it == w.cursor.end() ? 0 : it->second;
        if (used < list2.size()) list2.resize(used);
      }
      std::erase_if(out.genes.per_nonterminal, [](const auto& kv) { return kv.second.empty(); });
      break;
    }
    case Slot::IntParam:
      gene.params[slot.param_idx] =
          static_cast<double>(uniform_int(rng, static_cast<int64_t>(slot.spec->lo),
                                          static_cast<int64_t>(slot.spec->hi)));
      break;
    case Slot::FloatParam: {
      double v = gene.params[slot.param_idx] +
                 gaussian(rng, rates.gaussian_mean, rates.gaussian_sigma);
      gene.params[slot.param_idx] = std::clamp(v, slot.spec->lo, slot.spec->hi);
      break;
    }
  }
  return out;
}

Individual mutate(const Individual& parent, const MutationRates& rates, const Grammar& grammar,
                  const std::vector<MacroUnitSpec>& macro, Rng& rng) {
  Individual child;
  child.units = parent.units;
  child.id = fresh_id(rng);
  child.parent_id = parent.id;
  bool fired = false;

  // add
  if (bernoulli(rng, rates.add)) {
    auto ranges = group_ranges(child, macro);
    std::vector<std::size_t> cands;
    for (std::size_t s = 0; s < macro.size(); ++s)
      if (macro[s].max_count > macro[s].min_count &&
          ranges[s].second - ranges[s].first < macro[s].max_count)
        cands.push_back(s);
    if (!cands.empty()) {
      std::size_t s = cands[uniform_int(rng, 0, static_cast<int64_t>(cands.size()) - 1)];
      Unit unit{macro[s].nonterminal, sample_genes(grammar, macro[s].nonterminal, rng)};
      int pos = static_cast<int>(uniform_int(rng, ranges[s].first, ranges[s].second));
      child.units.insert(child.units.begin() + pos, std::move(unit));
      fired = true;
    }
  }

  // duplicate (by value; copies evolve independently afterwards)
  if (bernoulli(rng, rates.duplicate) && !child.units.empty()) {
    auto ranges = group_ranges(child, macro);
    int idx = static_cast<int>(uniform_int(rng, 0, static_cast<int64_t>(child.units.size()) - 1));
    for (std::size_t s = 0; s < macro.size(); ++s) {
      if (idx >= ranges[s].first && idx < ranges[s].second) {
        if (ranges[s].second - ranges[s].first < macro[s].max_count) {
          Unit copy = child.units[idx];
          child.units.insert(child.units.begin() + idx + 1, std::move(copy));
          fired = true;
        }
        break;
      }
    }
  }

  // remove
  if (bernoulli(rng, rates.remove)) {
    auto ranges = group_ranges(child, macro);
    std::vector<int> cands;
    for (std::size_t s = 0; s < macro.size(); ++s)
      if (ranges[s].second - ranges[s].first > macro[s].min_count)
        for (int i = ranges[s].first; i < ranges[s].second; ++i) cands.push_back(i);
    if (!cands.empty()) {
      int idx = cands[uniform_int(rng, 0, static_cast<int64_t>(cands.size()) - 1)];
      child.units.erase(child.units.begin() + idx);
      fired = true;
    }
  }

  // per-unit DSGE mutation
  for (auto& unit : child.units) {
    double rate = unit.nonterminal == "learning" ? rates.learning_dsge : rates.layer_dsge;
    if (bernoulli(rng, rate)) {
      unit = dsge_mutate_unit(unit, grammar, rates, rng);
      fired = true;
    }
  }

  // every offspring must be a new point in the search space
  if (!fired && !child.units.empty()) {
    int idx = static_cast<int>(uniform_int(rng, 0, static_cast<int64_t>(child.units.size()) - 1));
    child.units[idx] = dsge_mutate_unit(child.units[idx], grammar, rates, rng);
  }
  return child;
}

DecodeResult decode(Individual& individual, const Grammar& grammar) {
  DecodeResult result;
  for (std::size_t i = 0; i < individual.units.size(); ++i) {
    Unit& unit = individual.units[i];
    Rng repair_rng(mix_seed(fnv1a(unit.nonterminal), i, 0x9e3779b9ULL));
    Walker w{grammar, unit.genes, /*allow_repair=*/true, &repair_rng};
    w.expand(unit.nonterminal);
    result.repairs += w.repairs;
    for (auto& group : w.groups) result.groups.push_back(std::move(group));
  }
  return result;
}

bool macro_counts_ok(const Individual& ind, const std::vector<MacroUnitSpec>& macro) {
  std::size_t i = 0;
  for (const auto& spec : macro) {
    int count = 0;
    while (i < ind.units.size() && ind.units[i].nonterminal == spec.nonterminal) {
      ++count;
      ++i;
    }
    if (count < spec.min_count || count > spec.max_count) return false;
  }
  return i == ind.units.size();
}

nlohmann::json individual_to_json(const Individual& ind, const std::string& grammar_name) {
  nlohmann::json j;
  j["grammar"] = grammar_name;
  j["id"] = ind.id;
  j["parent_id"] = ind.parent_id ? nlohmann::json(*ind.parent_id) : nlohmann::json(nullptr);
  j["fitness"] = ind.fitness ? nlohmann::json(*ind.fitness) : nlohmann::json(nullptr);
  j["units"] = nlohmann::json::array();
  for (const auto& unit : ind.units) {
    nlohmann::json ju;
    ju["nonterminal"] = unit.nonterminal;
    ju["genes"] = nlohmann::json::array();
    for (const auto& [nt, list] : unit.genes.per_nonterminal) {
      nlohmann::json jl;
      jl["nonterminal"] = nt;
      jl["genes"] = nlohmann::json::array();
      for (const auto& gene : list)
        jl["genes"].push_back({{"choice", gene.choice}, {"params", gene.params}});
      ju["genes"].push_back(std::move(jl));
    }
    j["units"].push_back(std::move(ju));
  }
  return j;
}

Individual individual_from_json(const nlohmann::json& j) {
  Individual ind;
  ind.id = j.at("id").get<std::string>();
  if (!j.at("parent_id").is_null()) ind.parent_id = j["parent_id"].get<std::string>();
  if (!j.at("fitness").is_null()) ind.fitness = j["fitness"].get<double>();
  for (const auto& ju : j.at("units")) {
    Unit unit;
    unit.nonterminal = ju.at("nonterminal").get<std::string>();
    for (const auto& jl : ju.at("genes")) {
      std::vector<Gene> list;
      for (const auto& jg : jl.at("genes")) {
        Gene gene;
        gene.choice = jg.at("choice").get<int>();
        gene.params = jg.at("params").get<std::vector<double>>();
        list.push_back(std::move(gene));
      }
      unit.genes.per_nonterminal.emplace_back(jl.at("nonterminal").get<std::string>(),
                                              std::move(list));
    }
    ind.units.push_back(std::move(unit));
  }
  return ind;
}

std::vector<MacroUnitSpec> parse_macro(const std::string& text) {
  std::vector<MacroUnitSpec> out;
  std::string token;
  std::istringstream ss(text);
  std::string norm = text;
  std::replace(norm.begin(), norm.end(), ',', ' ');
  std::istringstream ns(norm);
  while (ns >> token) {
    std::size_t a = token.find(':');
    std::size_t b = token.rfind(':');
    if (a == std::string::npos || b == a)
      throw ConfigError("bad macro unit '" + token + "' (want name:min:max)");
    MacroUnitSpec spec;
    spec.nonterminal = token.substr(0, a);
    try {
      spec.min_count = std::stoi(token.substr(a + 1, b - a - 1));
      spec.max_count = std::stoi(token.substr(b + 1));
    } catch (const std::exception&) {
      throw ConfigError("bad macro unit '" + token + "' (want name:min:max)");
    }
    if (spec.min_count < 0 || spec.max_count < 1 || spec.min_count > spec.max_count)
      throw ConfigError("bad macro bounds in '" + token + "'");
    out.push_back(std::move(spec));
  }
  if (out.empty()) throw ConfigError("empty macro structure");
  return out;
}

std::string macro_to_string(const std::vector<MacroUnitSpec>& macro) {
  std::string out;
  for (const auto& spec : macro) {
    if (!out.empty()) out += ',';
    out += spec.nonterminal + ':' + std::to_string(spec.min_count) + ':' +
           std::to_string(spec.max_count);
  }
  return out;
}

}  // namespace gramsnn
