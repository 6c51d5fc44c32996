#pragma once

#include <functional>
#include <string>
#include <vector>

#include "gramsnn/assembler.hpp"
#include "gramsnn/config.hpp"
#include "gramsnn/dataio.hpp"
#include "gramsnn/genotype.hpp"

namespace gramsnn {

// Datasets plus index splits an evolution run works on.
struct EvoData {
  ImageDataset train;
  ImageDataset test;
  std::vector<int> evo_train;
  std::vector<int> fitness;
  std::vector<int> test_idx;
};

EvoData prepare_data(const RunConfig& cfg, uint64_t seed);

struct FitnessResult {
  double fitness = -1.0;
  bool valid = false;
  std::string reason;  // empty when valid
  double seconds = 0.0;
};

// decode -> assemble -> train epochs_per_eval on EvoTrain -> accuracy on the
// Fitness split. Invalid plans and diverged training map to
// cfg.invalid_fitness; no exception escapes.
FitnessResult evaluate_fitness(Individual& ind, const Grammar& grammar, const EvoData& data,
                               const RunConfig& cfg, uint64_t eval_seed);

struct OffspringRecord {
  std::string id;
  double fitness = 0.0;
  bool valid = false;
  double seconds = 0.0;
};

struct GenerationRecord {
  int gen = 0;
  double best_fit = 0.0;
  double mean_fit = 0.0;
  std::string parent_id;  // parent selected *after* this generation
  int invalid_count = 0;
  double seconds = 0.0;
  std::vector<OffspringRecord> offspring;
};

struct RunLog {
  std::vector<GenerationRecord> records;
};

struct RunState {
  RunConfig cfg;
  uint64_t seed = 0;
  int next_gen = 0;  // first generation not yet executed (0 = nothing done)
  Individual parent;
  RunLog log;
};

// Run directory artifacts.
void write_run_csv(const std::string& run_dir, const RunLog& log);
void write_checkpoint(const std::string& run_dir, const RunState& state);
RunState load_checkpoint(const std::string& run_dir);

using ProgressFn = std::function<void(const GenerationRecord&)>;

// (1 + lambda) loop. Generation 0 evaluates lambda random individuals; each
// later generation evaluates lambda mutants of the parent; ties keep the
// parent. Per-offspring seeds derive from (seed, gen, index) so the result is
// independent of evaluation order and of interruption. Resumes from
// state.next_gen. `workers` > 1 evaluates offspring on a thread pool.
void run_evolution(RunState& state, const Grammar& grammar, const EvoData& data,
                   const std::string& run_dir, int workers = 1,
                   const ProgressFn& progress = nullptr);

struct RetrainResult {
  std::vector<EpochLog> epochs;
  double test_accuracy = 0.0;
  TrainStatus status = TrainStatus::Ok;
};

// Fresh parameter init, train on EvoTrain ∪ Fitness, evaluate on Test; writes
// best/weights.bin and best/test_report.csv under run_dir.
RetrainResult retrain_best(Individual best, const Grammar& grammar, const EvoData& data,
                           const RunConfig& cfg, uint64_t seed, int epochs,
                           const std::string& run_dir);

// Percentage distribution of layer types, surrogates, reset mechanisms, and
// optimizers over the decoded individuals. Rows: (category, value, pct).
struct StatsRow {
  std::string category;
  std::string value;
  double pct = 0.0;
};

std::vector<StatsRow> stats_report(std::vector<Individual> individuals,
                                   const Grammar& grammar);
std::string stats_to_csv(const std::vector<StatsRow>& rows);

}  // namespace gramsnn
