#include "gramsnn/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "gramsnn/errors.hpp"

namespace gramsnn {

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

int to_int(const std::string& key, const std::string& v) {
  int out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size())
    throw ConfigError("bad integer for " + key + ": '" + v + "'");
  return out;
}

double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double out = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return out;
  } catch (const std::exception&) {
    throw ConfigError("bad number for " + key + ": '" + v + "'");
  }
}

}  // namespace

RunConfig parse_config_text(const std::string& text) {
  RunConfig cfg;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string val = trim(line.substr(eq + 1));

    if (key == "dataset.name") cfg.dataset_name = val;
    else if (key == "dataset.dir") cfg.dataset_dir = val;
    else if (key == "dataset.time_steps") cfg.time_steps = to_int(key, val);
    else if (key == "dataset.subset_n") cfg.subset_n = to_int(key, val);
    else if (key == "dataset.evotrain_n") cfg.evotrain_n = to_int(key, val);
    else if (key == "dataset.fitness_n") cfg.fitness_n = to_int(key, val);
    else if (key == "dataset.test_n") cfg.test_n = to_int(key, val);
    else if (key == "evo.generations") cfg.generations = to_int(key, val);
    else if (key == "evo.lambda") cfg.lambda = to_int(key, val);
    else if (key == "evo.epochs_per_eval") cfg.epochs_per_eval = to_int(key, val);
    else if (key == "evo.invalid_fitness") cfg.invalid_fitness = to_double(key, val);
    else if (key == "mutation.add") cfg.mutation.add = to_double(key, val);
    else if (key == "mutation.duplicate") cfg.mutation.duplicate = to_double(key, val);
    else if (key == "mutation.remove") cfg.mutation.remove = to_double(key, val);
    else if (key == "mutation.layer_dsge") cfg.mutation.layer_dsge = to_double(key, val);
    else if (key == "mutation.learning_dsge") cfg.mutation.learning_dsge = to_double(key, val);
    else if (key == "mutation.gaussian_mean") cfg.mutation.gaussian_mean = to_double(key, val);
    else if (key == "mutation.gaussian_sigma") cfg.mutation.gaussian_sigma = to_double(key, val);
    else if (key == "training.batch_size") cfg.batch_size = to_int(key, val);
    else if (key == "training.retrain_epochs") cfg.retrain_epochs = to_int(key, val);
    else if (key == "loss.correct_rate") cfg.correct_rate = to_double(key, val);
    else if (key == "loss.incorrect_rate") cfg.incorrect_rate = to_double(key, val);
    else if (key == "macro") cfg.macro = val;
    else throw ConfigError("unknown key '" + key + "' (line " + std::to_string(lineno) + ")");
  }
  if (cfg.generations < 1) throw ConfigError("evo.generations must be >= 1");
  if (cfg.lambda < 1) throw ConfigError("evo.lambda must be >= 1");
  if (cfg.time_steps < 1) throw ConfigError("dataset.time_steps must be >= 1");
  if (cfg.batch_size < 1) throw ConfigError("training.batch_size must be >= 1");
  if (cfg.epochs_per_eval < 0) throw ConfigError("evo.epochs_per_eval must be >= 0");
  parse_macro(cfg.macro);  // validates the macro string
  return cfg;
}

RunConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str());
}

std::string config_to_text(const RunConfig& cfg) {
  std::ostringstream out;
  out << "dataset.name = " << cfg.dataset_name << "\n";
  out << "dataset.dir = " << cfg.dataset_dir << "\n";
  out << "dataset.time_steps = " << cfg.time_steps << "\n";
  out << "dataset.subset_n = " << cfg.subset_n << "\n";
  out << "dataset.evotrain_n = " << cfg.evotrain_n << "\n";
  out << "dataset.fitness_n = " << cfg.fitness_n << "\n";
  out << "dataset.test_n = " << cfg.test_n << "\n";
  out << "evo.generations = " << cfg.generations << "\n";
  out << "evo.lambda = " << cfg.lambda << "\n";
  out << "evo.epochs_per_eval = " << cfg.epochs_per_eval << "\n";
  out << "evo.invalid_fitness = " << render_number(cfg.invalid_fitness, ParamSpec::Num::Float) << "\n";
  out << "mutation.add = " << render_number(cfg.mutation.add, ParamSpec::Num::Float) << "\n";
  out << "mutation.duplicate = " << render_number(cfg.mutation.duplicate, ParamSpec::Num::Float) << "\n";
  out << "mutation.remove = " << render_number(cfg.mutation.remove, ParamSpec::Num::Float) << "\n";
  out << "mutation.layer_dsge = " << render_number(cfg.mutation.layer_dsge, ParamSpec::Num::Float) << "\n";
  out << "mutation.learning_dsge = " << render_number(cfg.mutation.learning_dsge, ParamSpec::Num::Float) << "\n";
  out << "mutation.gaussian_mean = " << render_number(cfg.mutation.gaussian_mean, ParamSpec::Num::Float) << "\n";
  out << "mutation.gaussian_sigma = " << render_number(cfg.mutation.gaussian_sigma, ParamSpec::Num::Float) << "\n";
  out << "training.batch_size = " << cfg.batch_size << "\n";
  out << "training.retrain_epochs = " << cfg.retrain_epochs << "\n";
  out << "loss.correct_rate = " << render_number(cfg.correct_rate, ParamSpec::Num::Float) << "\n";
  out << "loss.incorrect_rate = " << render_number(cfg.incorrect_rate, ParamSpec::Num::Float) << "\n";
  out << "macro = " << cfg.macro << "\n";
  return out.str();
}

}  // namespace gramsnn
