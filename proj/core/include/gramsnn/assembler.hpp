#pragma once

#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "gramsnn/grammar.hpp"

namespace gramsnn {

enum class Surrogate { ATan, FastSigmoid };
enum class ResetKind { Subtract, Zero };
enum class PoolKind { Max, Avg };

struct ConvSpec {
  int filters = 1;
  int kernel = 1;
  int stride = 1;
  bool same_pad = false;
  bool bias = true;
};

struct PoolSpec {
  PoolKind kind = PoolKind::Max;
  int kernel = 2;  // stride equals kernel (non-overlapping)
};

struct NoOpSpec {};

struct DropoutSpec {
  double rate = 0.0;
};

struct DenseSpec {
  int units = 1;
  bool bias = true;
};

struct LIFSpec {
  double beta = 0.9;
  bool beta_trainable = false;
  double threshold = 1.0;
  bool threshold_trainable = false;
  Surrogate surrogate = Surrogate::ATan;
  ResetKind reset = ResetKind::Subtract;
};

using LayerSpec = std::variant<ConvSpec, PoolSpec, NoOpSpec, DropoutSpec, DenseSpec, LIFSpec>;

struct SGDSpec {
  double lr = 0.01;
  double momentum = 0.9;
  double decay = 0.0;
  bool nesterov = false;
};

struct AdamSpec {
  double lr = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double decay = 0.0;
  bool amsgrad = false;
};

struct RMSPropSpec {
  double lr = 0.001;
  double rho = 0.9;
  double decay = 0.0;
};

using OptimizerSpec = std::variant<SGDSpec, AdamSpec, RMSPropSpec>;

struct Shape3 {
  int c = 0, h = 0, w = 0;
  int numel() const { return c * h * w; }
  bool operator==(const Shape3&) const = default;
};

// Validated, shape-checked executable description of one candidate network.
struct NetworkPlan {
  Shape3 input;
  std::vector<LayerSpec> layers;
  std::vector<Shape3> shapes;  // output shape per layer; dense outputs are (n,1,1)
  int flatten_index = -1;      // input is flattened before layers[flatten_index]
  OptimizerSpec optimizer;
  int num_classes = 0;
};

// InvalidNetwork is a value so the evolution engine can penalize it.
struct AssembleResult {
  std::optional<NetworkPlan> plan;
  std::string error;
  bool ok() const { return plan.has_value(); }
};

AssembleResult assemble(const AttributeGroups& groups, Shape3 input_shape, int num_classes);

std::size_t parameter_count(const NetworkPlan& plan);

// Indented one-layer-per-line rendering used in logs and by `stats`.
std::string describe(const NetworkPlan& plan);

const char* surrogate_name(Surrogate s);
const char* reset_name(ResetKind r);
const char* optimizer_name(const OptimizerSpec& o);

}  // namespace gramsnn
