#include "gramsnn/evolution.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "gramsnn/runtime.hpp"
#include "gramsnn/weights_io.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace gramsnn {

namespace {

constexpr const char* kGrammarName = "csnn";

double now_seconds(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

std::string gen_file(int gen) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "gen_%04d.json", gen);
  return buf;
}

uint64_t fnv1a(const std::string& s) {
  uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string format_id(int gen, int idx) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "g%04d_o%02d", gen, idx);
  return buf;
}

std::string csv_num(double v) {
  std::ostringstream out;
  out.precision(17);
  out << v;
  return out.str();
}

}  // namespace

EvoData prepare_data(const RunConfig& cfg, uint64_t seed) {
  EvoData data;
  const fs::path dir(cfg.dataset_dir);
  data.train = load_idx((dir / "train-images-idx3-ubyte").string(),
                        (dir / "train-labels-idx1-ubyte").string());
  data.test = load_idx((dir / "t10k-images-idx3-ubyte").string(),
                       (dir / "t10k-labels-idx1-ubyte").string());
  data.train.name = cfg.dataset_name + "-train";
  data.test.name = cfg.dataset_name + "-test";

  const int n_use = cfg.subset_n > 0 ? std::min(cfg.subset_n, data.train.n) : data.train.n;
  SplitSet splits = make_splits(n_use, seed);
  data.evo_train = std::move(splits.evo_train);
  data.fitness = std::move(splits.fitness);
  if (cfg.evotrain_n > 0 && cfg.evotrain_n < static_cast<int>(data.evo_train.size()))
    data.evo_train.resize(cfg.evotrain_n);
  if (cfg.fitness_n > 0 && cfg.fitness_n < static_cast<int>(data.fitness.size()))
    data.fitness.resize(cfg.fitness_n);

  const int n_test = cfg.test_n > 0 ? std::min(cfg.test_n, data.test.n) : data.test.n;
  data.test_idx.resize(n_test);
  std::iota(data.test_idx.begin(), data.test_idx.end(), 0);
  return data;
}

FitnessResult evaluate_fitness(Individual& ind, const Grammar& grammar, const EvoData& data,
                               const RunConfig& cfg, uint64_t eval_seed) {
  const auto start = std::chrono::steady_clock::now();
  FitnessResult result;
  result.fitness = cfg.invalid_fitness;
  try {
    AttributeGroups groups = decode(ind, grammar).groups;
    const Shape3 input{data.train.c, data.train.h, data.train.w};
    AssembleResult assembled = assemble(groups, input, 10);
    if (!assembled.ok()) {
      result.reason = assembled.error;
      result.seconds = now_seconds(start);
      return result;
    }
    Rng init_rng(mix_seed(eval_seed, 0xC0DE));
    NetworkRuntime<float> runtime(*assembled.plan, init_rng);
    Optimizer<float> opt(assembled.plan->optimizer);
    opt.attach(runtime.params());
    const LossConfig loss_cfg{cfg.correct_rate, cfg.incorrect_rate, cfg.time_steps};
    std::vector<EpochLog> log;
    const TrainStatus status =
        train_epochs(runtime, data.train, data.evo_train, cfg.epochs_per_eval,
                     cfg.batch_size, loss_cfg, opt, mix_seed(eval_seed, 0x7EA1), log);
    if (status == TrainStatus::Diverged) {
      result.reason = "diverged";
      result.seconds = now_seconds(start);
      return result;
    }
    result.fitness = evaluate_accuracy(runtime, data.train, data.fitness, cfg.time_steps,
                                       mix_seed(eval_seed, 0xF17), cfg.batch_size);
    result.valid = true;
  } catch (const std::exception& e) {
    result.fitness = cfg.invalid_fitness;
    result.valid = false;
    result.reason = e.what();
  }
  result.seconds = now_seconds(start);
  return result;
}

void write_run_csv(const std::string& run_dir, const RunLog& log) {
  std::ofstream out(fs::path(run_dir) / "run.csv", std::ios::trunc);
  out << "gen,best_fit,mean_fit,parent_id,invalid_count,seconds\n";
  for (const auto& rec : log.records) {
    if (rec.gen == 0) continue;  // initialization round; kept in checkpoints only
    out << rec.gen << ',' << csv_num(rec.best_fit) << ',' << csv_num(rec.mean_fit) << ','
        << rec.parent_id << ',' << rec.invalid_count << ',' << csv_num(rec.seconds)
        << '\n';
  }
}

namespace {

json record_to_json(const GenerationRecord& rec) {
  json offspring = json::array();
  for (const auto& o : rec.offspring)
    offspring.push_back(
        {{"id", o.id}, {"fitness", o.fitness}, {"valid", o.valid}, {"seconds", o.seconds}});
  return {{"gen", rec.gen},
          {"best_fit", rec.best_fit},
          {"mean_fit", rec.mean_fit},
          {"parent_id", rec.parent_id},
          {"invalid_count", rec.invalid_count},
          {"seconds", rec.seconds},
          {"offspring", offspring}};
}

GenerationRecord record_from_json(const json& j) {
  GenerationRecord rec;
  rec.gen = j.at("gen").get<int>();
  rec.best_fit = j.at("best_fit").get<double>();
  rec.mean_fit = j.at("mean_fit").get<double>();
  rec.parent_id = j.at("parent_id").get<std::string>();
  rec.invalid_count = j.at("invalid_count").get<int>();
  rec.seconds = j.at("seconds").get<double>();
  for (const auto& o : j.at("offspring"))
    rec.offspring.push_back({o.at("id").get<std::string>(), o.at("fitness").get<double>(),
                             o.at("valid").get<bool>(), o.at("seconds").get<double>()});
  return rec;
}

}  // namespace

void write_checkpoint(const std::string& run_dir, const RunState& state) {
  const fs::path dir = fs::path(run_dir) / "checkpoints";
  fs::create_directories(dir);
  json j;
  j["config_hash"] = fnv1a(config_to_text(state.cfg));
  j["seed"] = state.seed;
  j["next_gen"] = state.next_gen;
  j["parent"] = individual_to_json(state.parent, kGrammarName);
  json log = json::array();
  for (const auto& rec : state.log.records) log.push_back(record_to_json(rec));
  j["log"] = std::move(log);
  std::ofstream out(dir / gen_file(state.next_gen - 1), std::ios::trunc);
  out << j.dump(1) << '\n';
}

RunState load_checkpoint(const std::string& run_dir) {
  const fs::path cfg_path = fs::path(run_dir) / "config.snapshot";
  std::ifstream cfg_in(cfg_path);
  if (!cfg_in) throw DataError(DataError::Kind::Missing, "no config.snapshot in " + run_dir);
  std::ostringstream cfg_buf;
  cfg_buf << cfg_in.rdbuf();

  const fs::path dir = fs::path(run_dir) / "checkpoints";
  std::string latest;
  if (fs::is_directory(dir))
    for (const auto& entry : fs::directory_iterator(dir)) {
      const std::string name = entry.path().filename().string();
      if (name.starts_with("gen_") && name.ends_with(".json") && name > latest)
        latest = name;
    }
  if (latest.empty())
    throw DataError(DataError::Kind::Missing, "no checkpoint in " + run_dir);

  RunState state;
  state.cfg = parse_config_text(cfg_buf.str());
  std::ifstream in(dir / latest);
  json j;
  try {
    in >> j;
    state.seed = j.at("seed").get<uint64_t>();
    state.next_gen = j.at("next_gen").get<int>();
    state.parent = individual_from_json(j.at("parent"));
    for (const auto& rec : j.at("log")) state.log.records.push_back(record_from_json(rec));
  } catch (const json::exception& e) {
    throw DataError(DataError::Kind::Truncated,
                    "corrupt checkpoint " + (dir / latest).string() + ": " + e.what());
  }
  if (j.at("config_hash").get<uint64_t>() != fnv1a(config_to_text(state.cfg)))
    throw ConfigError("checkpoint was produced by a different config");
  return state;
}

void run_evolution(RunState& state, const Grammar& grammar, const EvoData& data,
                   const std::string& run_dir, int workers, const ProgressFn& progress) {
  const RunConfig& cfg = state.cfg;
  const std::vector<MacroUnitSpec> macro = parse_macro(cfg.macro);
  fs::create_directories(fs::path(run_dir) / "checkpoints");
  {
    std::ofstream snap(fs::path(run_dir) / "config.snapshot", std::ios::trunc);
    snap << config_to_text(cfg);
  }

  for (int gen = state.next_gen; gen <= cfg.generations; ++gen) {
    const auto gen_start = std::chrono::steady_clock::now();
    std::vector<Individual> offspring(cfg.lambda);
    std::vector<FitnessResult> results(cfg.lambda);

    auto job = [&](int i) {
      Rng rng(mix_seed(state.seed, static_cast<uint64_t>(gen), static_cast<uint64_t>(i)));
      Individual child;
      if (gen == 0) {
        child = random_individual(grammar, macro, rng);
      } else {
        child = mutate(state.parent, cfg.mutation, grammar, macro, rng);
        child.parent_id = state.parent.id;
      }
      child.id = format_id(gen, i);
      FitnessResult res = evaluate_fitness(
          child, grammar, data, cfg,
          mix_seed(state.seed, static_cast<uint64_t>(gen), 0x5EED00 + i));
      child.fitness = res.fitness;
      offspring[i] = std::move(child);
      results[i] = std::move(res);
    };

    if (workers > 1 && cfg.lambda > 1) {
      std::atomic<int> next{0};
      std::vector<std::thread> pool;
      const int n_threads = std::min(workers, cfg.lambda);
      for (int w = 0; w < n_threads; ++w)
        pool.emplace_back([&] {
          for (int i = next.fetch_add(1); i < cfg.lambda; i = next.fetch_add(1)) job(i);
        });
      for (auto& th : pool) th.join();
    } else {
      for (int i = 0; i < cfg.lambda; ++i) job(i);
    }

    GenerationRecord rec;
    rec.gen = gen;
    double mean = 0.0;
    int best_idx = -1;
    double best_fit = gen == 0 ? -std::numeric_limits<double>::infinity()
                               : state.parent.fitness.value_or(cfg.invalid_fitness);
    for (int i = 0; i < cfg.lambda; ++i) {
      const auto& res = results[i];
      rec.offspring.push_back({offspring[i].id, res.fitness, res.valid, res.seconds});
      mean += res.fitness;
      rec.invalid_count += !res.valid;
      if (res.fitness > best_fit) {  // ties keep the parent / earlier offspring
        best_fit = res.fitness;
        best_idx = i;
      }
    }
    if (best_idx >= 0) state.parent = offspring[best_idx];
    rec.best_fit = state.parent.fitness.value_or(cfg.invalid_fitness);
    rec.mean_fit = mean / cfg.lambda;
    rec.parent_id = state.parent.id;
    rec.seconds = now_seconds(gen_start);
    state.log.records.push_back(rec);
    state.next_gen = gen + 1;

    write_run_csv(run_dir, state.log);
    write_checkpoint(run_dir, state);
    if (progress) progress(rec);
  }

  fs::create_directories(fs::path(run_dir) / "best");
  std::ofstream best_out(fs::path(run_dir) / "best" / "individual.json", std::ios::trunc);
  best_out << individual_to_json(state.parent, kGrammarName).dump(1) << '\n';
}

RetrainResult retrain_best(Individual best, const Grammar& grammar, const EvoData& data,
                           const RunConfig& cfg, uint64_t seed, int epochs,
                           const std::string& run_dir) {
  AttributeGroups groups = decode(best, grammar).groups;
  const Shape3 input{data.train.c, data.train.h, data.train.w};
  AssembleResult assembled = assemble(groups, input, 10);
  if (!assembled.ok()) throw ConfigError("best individual is invalid: " + assembled.error);

  std::vector<int> full_train = data.evo_train;
  full_train.insert(full_train.end(), data.fitness.begin(), data.fitness.end());

  Rng init_rng(mix_seed(seed, 0xBE57));
  NetworkRuntime<float> runtime(*assembled.plan, init_rng);
  Optimizer<float> opt(assembled.plan->optimizer);
  opt.attach(runtime.params());
  const LossConfig loss_cfg{cfg.correct_rate, cfg.incorrect_rate, cfg.time_steps};

  RetrainResult result;
  result.status = train_epochs(runtime, data.train, full_train, epochs, cfg.batch_size,
                               loss_cfg, opt, mix_seed(seed, 0x7EA1), result.epochs);
  if (result.status == TrainStatus::Ok)
    result.test_accuracy = evaluate_accuracy(runtime, data.test, data.test_idx,
                                             cfg.time_steps, mix_seed(seed, 0x7E57),
                                             cfg.batch_size);

  const fs::path best_dir = fs::path(run_dir) / "best";
  fs::create_directories(best_dir);
  save_weights_file((best_dir / "weights.bin").string(), collect_weights(runtime));
  std::ofstream report(best_dir / "test_report.csv", std::ios::trunc);
  report << "epoch,loss,train_acc,seconds,test_acc\n";
  for (std::size_t i = 0; i < result.epochs.size(); ++i) {
    const auto& e = result.epochs[i];
    report << e.epoch << ',' << csv_num(e.loss) << ',' << csv_num(e.train_acc) << ','
           << csv_num(e.seconds) << ',';
    if (i + 1 == result.epochs.size()) report << csv_num(result.test_accuracy);
    report << '\n';
  }
  if (result.epochs.empty())
    report << "0,,,," << csv_num(result.test_accuracy) << '\n';
  return result;
}

std::vector<StatsRow> stats_report(std::vector<Individual> individuals,
                                   const Grammar& grammar) {
  static const std::vector<std::string> kLayerValues = {"conv", "max-pool", "avg-pool",
                                                        "dropout", "none", "fc"};
  static const std::vector<std::string> kSurrogateValues = {"atan", "fast-sigmoid"};
  static const std::vector<std::string> kResetValues = {"subtract", "zero"};
  static const std::vector<std::string> kOptValues = {"sgd", "rmsprop", "adam"};

  std::map<std::string, std::map<std::string, int>> counts;
  for (const auto& v : kLayerValues) counts["layer"][v] = 0;
  for (const auto& v : kSurrogateValues) counts["surrogate"][v] = 0;
  for (const auto& v : kResetValues) counts["reset"][v] = 0;
  for (const auto& v : kOptValues) counts["optimizer"][v] = 0;

  for (auto& ind : individuals) {
    AttributeGroups groups = decode(ind, grammar).groups;
    AssembleResult assembled = assemble(groups, Shape3{1, 28, 28}, 10);
    if (!assembled.ok()) continue;
    const NetworkPlan& plan = *assembled.plan;
    for (const auto& layer : plan.layers) {
      if (std::holds_alternative<ConvSpec>(layer)) ++counts["layer"]["conv"];
      else if (const auto* pool = std::get_if<PoolSpec>(&layer))
        ++counts["layer"][pool->kind == PoolKind::Max ? "max-pool" : "avg-pool"];
      else if (std::holds_alternative<DropoutSpec>(layer)) ++counts["layer"]["dropout"];
      else if (std::holds_alternative<NoOpSpec>(layer)) ++counts["layer"]["none"];
      else if (std::holds_alternative<DenseSpec>(layer)) ++counts["layer"]["fc"];
      else {
        const auto& lif = std::get<LIFSpec>(layer);
        ++counts["surrogate"][surrogate_name(lif.surrogate)];
        ++counts["reset"][reset_name(lif.reset)];
      }
    }
    ++counts["optimizer"][optimizer_name(plan.optimizer)];
  }

  std::vector<StatsRow> rows;
  for (const char* category : {"layer", "surrogate", "reset", "optimizer"}) {
    int total = 0;
    for (const auto& [value, n] : counts[category]) total += n;
    for (const auto& [value, n] : counts[category])
      rows.push_back({category, value, total ? 100.0 * n / total : 0.0});
  }
  return rows;
}

std::string stats_to_csv(const std::vector<StatsRow>& rows) {
  std::ostringstream out;
  out << "category,value,pct\n";
  out.precision(2);
  out << std::fixed;
  for (const auto& r : rows) out << r.category << ',' << r.value << ',' << r.pct << '\n';
  return out.str();
}

}  // namespace gramsnn
