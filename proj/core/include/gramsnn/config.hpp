#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gramsnn/genotype.hpp"
#include "gramsnn/training.hpp"

namespace gramsnn {

// Flat key = value run configuration. Unknown keys are rejected; missing keys
// keep the defaults below.
struct RunConfig {
  // dataset.*
  std::string dataset_name = "mnist";
  std::string dataset_dir = "data/mnist";
  int time_steps = 10;
  int subset_n = 0;      // 0 = full train set for evolution splits
  int evotrain_n = 0;    // 0 = 70% of the (sub)set
  int fitness_n = 0;     // 0 = the remaining 30%
  int test_n = 0;        // 0 = full test set

  // evo.*
  int generations = 200;
  int lambda = 10;
  int epochs_per_eval = 1;
  double invalid_fitness = -1.0;

  // mutation.*
  MutationRates mutation;

  // training.*
  int batch_size = 64;
  int retrain_epochs = 50;

  // loss.*
  double correct_rate = 1.0;
  double incorrect_rate = 0.0;

  std::string macro = "features:1:6,classification:1:4,output:1:1,learning:1:1";
};

RunConfig parse_config_text(const std::string& text);
RunConfig load_config_file(const std::string& path);
std::string config_to_text(const RunConfig& cfg);

}  // namespace gramsnn
