#include "gramsnn/assembler.hpp"

#include <cmath>
#include <sstream>

namespace gramsnn {

namespace {

struct GroupReader {
  const AttributeGroup& group;
  std::vector<bool> used;
  explicit GroupReader(const AttributeGroup& g) : group(g), used(g.size(), false) {}

  const std::string* find(const std::string& key) {
    for (std::size_t i = 0; i < group.size(); ++i)
      if (group[i].key == key) {
        used[i] = true;
        return &group[i].value;
      }
    return nullptr;
  }
  // first unused key, for the unknown-attribute diagnostic
  const Attribute* leftover() const {
    for (std::size_t i = 0; i < group.size(); ++i)
      if (!used[i]) return &group[i];
    return nullptr;
  }
};

struct BuildError {
  std::string msg;
};

double need_num(GroupReader& r, const std::string& key) {
  const std::string* v = r.find(key);
  if (!v) throw BuildError{"missing attribute '" + key + "'"};
  try {
    return std::stod(*v);
  } catch (const std::exception&) {
    throw BuildError{"non-numeric value for '" + key + "': " + *v};
  }
}

int need_int(GroupReader& r, const std::string& key) {
  return static_cast<int>(std::llround(need_num(r, key)));
}

bool need_flag(GroupReader& r, const std::string& key) {
  const std::string* v = r.find(key);
  if (!v) throw BuildError{"missing attribute '" + key + "'"};
  if (*v == "True") return true;
  if (*v == "False") return false;
  throw BuildError{"bad flag value for '" + key + "': " + *v};
}

void check_range(const std::string& what, double v, double lo, double hi) {
  if (v < lo || v > hi)
    throw BuildError{what + " = " + std::to_string(v) + " outside [" + std::to_string(lo) + "," +
                     std::to_string(hi) + "]"};
}

LIFSpec read_lif(GroupReader& r) {
  LIFSpec lif;
  lif.beta = need_num(r, "beta");
  lif.beta_trainable = need_flag(r, "beta-trainable");
  lif.threshold = need_num(r, "threshold");
  lif.threshold_trainable = need_flag(r, "threshold-trainable");
  const std::string* sg = r.find("surr-grad");
  if (!sg) throw BuildError{"missing attribute 'surr-grad'"};
  if (*sg == "atan")
    lif.surrogate = Surrogate::ATan;
  else if (*sg == "fast-sigmoid")
    lif.surrogate = Surrogate::FastSigmoid;
  else
    throw BuildError{"unknown surrogate '" + *sg + "'"};
  const std::string* rs = r.find("reset");
  if (!rs) throw BuildError{"missing attribute 'reset'"};
  if (*rs == "subtract")
    lif.reset = ResetKind::Subtract;
  else if (*rs == "zero")
    lif.reset = ResetKind::Zero;
  else
    throw BuildError{"unknown reset mechanism '" + *rs + "'"};
  check_range("beta", lif.beta, 0.0, 1.0);
  check_range("threshold", lif.threshold, 0.5, 1.5);
  return lif;
}

OptimizerSpec read_optimizer(const std::string& kind, GroupReader& r) {
  if (kind == "gradient-descent") {
    SGDSpec s;
    s.lr = need_num(r, "lr");
    s.momentum = need_num(r, "momentum");
    s.decay = need_num(r, "decay");
    s.nesterov = need_flag(r, "nesterov");
    check_range("lr", s.lr, 0.0001, 0.1);
    check_range("momentum", s.momentum, 0.68, 0.99);
    check_range("decay", s.decay, 1e-6, 1e-3);
    return s;
  }
  if (kind == "adam") {
    AdamSpec a;
    a.lr = need_num(r, "lr");
    a.beta1 = need_num(r, "beta1");
    a.beta2 = need_num(r, "beta2");
    a.decay = need_num(r, "decay");
    a.amsgrad = need_flag(r, "amsgrad");
    check_range("lr", a.lr, 0.0001, 0.1);
    check_range("beta1", a.beta1, 0.5, 0.9999);
    check_range("beta2", a.beta2, 0.5, 0.9999);
    check_range("decay", a.decay, 1e-6, 1e-3);
    return a;
  }
  if (kind == "rmsprop") {
    RMSPropSpec p;
    p.lr = need_num(r, "lr");
    p.rho = need_num(r, "rho");
    p.decay = need_num(r, "decay");
    check_range("lr", p.lr, 0.0001, 0.1);
    check_range("rho", p.rho, 0.5, 1.0);
    check_range("decay", p.decay, 1e-6, 1e-3);
    return p;
  }
  throw BuildError{"unknown optimizer '" + kind + "'"};
}

int conv_out_dim(int in, int k, int s, bool same) {
  if (same) return (in + s - 1) / s;  // ceil(in/s)
  if (k > in) return 0;
  return (in - k) / s + 1;
}

}  // namespace

AssembleResult assemble(const AttributeGroups& groups, Shape3 input_shape, int num_classes) {
  NetworkPlan plan;
  plan.input = input_shape;
  plan.num_classes = num_classes;
  bool have_optimizer = false;
  bool flattened = false;
  Shape3 shape = input_shape;

  try {
    for (const auto& group : groups) {
      if (group.empty()) throw BuildError{"empty attribute group"};
      GroupReader r(group);
      if (const std::string* layer = r.find("layer")) {
        if (*layer == "conv") {
          ConvSpec conv;
          conv.filters = need_int(r, "num-filters");
          conv.kernel = need_int(r, "filter-shape");
          conv.stride = need_int(r, "stride");
          const std::string* pad = r.find("padding");
          if (!pad) throw BuildError{"missing attribute 'padding'"};
          if (*pad == "same")
            conv.same_pad = true;
          else if (*pad == "valid")
            conv.same_pad = false;
          else
            throw BuildError{"unknown padding '" + *pad + "'"};
          conv.bias = need_flag(r, "bias");
          check_range("num-filters", conv.filters, 32, 128);
          check_range("filter-shape", conv.kernel, 2, 4);
          check_range("stride", conv.stride, 1, 3);
          if (flattened) throw BuildError{"convolution after flatten point"};
          int oh = conv_out_dim(shape.h, conv.kernel, conv.stride, conv.same_pad);
          int ow = conv_out_dim(shape.w, conv.kernel, conv.stride, conv.same_pad);
          if (oh < 1 || ow < 1)
            throw BuildError{"convolution output collapses below 1x1 (input " +
                             std::to_string(shape.h) + "x" + std::to_string(shape.w) + ")"};
          shape = {conv.filters, oh, ow};
          plan.layers.emplace_back(conv);
        } else if (*layer == "pool-max" || *layer == "pool-avg") {
          PoolSpec pool;
          pool.kind = (*layer == "pool-max") ? PoolKind::Max : PoolKind::Avg;
          pool.kernel = need_int(r, "kernel-size");
          check_range("kernel-size", pool.kernel, 2, 4);
          if (flattened) throw BuildError{"pooling after flatten point"};
          if (pool.kernel > shape.h || pool.kernel > shape.w)
            throw BuildError{"pooling kernel " + std::to_string(pool.kernel) +
                             " exceeds spatial dim " + std::to_string(std::min(shape.h, shape.w))};
          shape = {shape.c, shape.h / pool.kernel, shape.w / pool.kernel};
          plan.layers.emplace_back(pool);
        } else if (*layer == "no-op") {
          plan.layers.emplace_back(NoOpSpec{});
        } else if (*layer == "dropout") {
          DropoutSpec drop;
          drop.rate = need_num(r, "rate");
          check_range("rate", drop.rate, 0.0, 0.5);
          plan.layers.emplace_back(drop);
        } else if (*layer == "fc") {
          DenseSpec dense;
          dense.units = need_int(r, "num-units");
          dense.bias = need_flag(r, "bias");
          if (!flattened) {
            plan.flatten_index = static_cast<int>(plan.layers.size());
            flattened = true;
          }
          shape = {dense.units, 1, 1};
          plan.layers.emplace_back(dense);
        } else if (*layer == "act") {
          plan.layers.emplace_back(read_lif(r));
        } else {
          throw BuildError{"unknown layer type '" + *layer + "'"};
        }
        plan.shapes.push_back(shape);
      } else if (const std::string* learn = r.find("learning")) {
        if (have_optimizer) throw BuildError{"more than one learning unit"};
        plan.optimizer = read_optimizer(*learn, r);
        have_optimizer = true;
      } else {
        throw BuildError{"group does not start with layer: or learning:"};
      }
      if (const Attribute* extra = r.leftover())
        throw BuildError{"unknown attribute key '" + extra->key + "'"};
    }

    if (!have_optimizer) throw BuildError{"no learning unit"};
    if (plan.layers.size() < 2) throw BuildError{"network has no output pair"};
    const auto* out_dense = std::get_if<DenseSpec>(&plan.layers[plan.layers.size() - 2]);
    const auto* out_lif = std::get_if<LIFSpec>(&plan.layers[plan.layers.size() - 1]);
    if (!out_dense || !out_lif) throw BuildError{"final layer pair is not fc + activation"};
    if (out_dense->units != num_classes)
      throw BuildError{"output units " + std::to_string(out_dense->units) + " != class count " +
                       std::to_string(num_classes)};
    // hidden fully-connected layers obey the grammar range
    for (std::size_t i = 0; i + 2 < plan.layers.size(); ++i)
      if (const auto* d = std::get_if<DenseSpec>(&plan.layers[i]))
        check_range("num-units", d->units, 32, 256);
    if (plan.flatten_index < 0) throw BuildError{"no flatten point before output"};
  } catch (const BuildError& e) {
    return AssembleResult{std::nullopt, e.msg};
  }
  return AssembleResult{std::move(plan), ""};
}

std::size_t parameter_count(const NetworkPlan& plan) {
  std::size_t total = 0;
  Shape3 shape = plan.input;
  for (const auto& layer : plan.layers) {
    if (const auto* conv = std::get_if<ConvSpec>(&layer)) {
      total += static_cast<std::size_t>(conv->filters) * shape.c * conv->kernel * conv->kernel;
      if (conv->bias) total += conv->filters;
      shape = {conv->filters, conv_out_dim(shape.h, conv->kernel, conv->stride, conv->same_pad),
               conv_out_dim(shape.w, conv->kernel, conv->stride, conv->same_pad)};
    } else if (const auto* pool = std::get_if<PoolSpec>(&layer)) {
      shape = {shape.c, shape.h / pool->kernel, shape.w / pool->kernel};
    } else if (const auto* dense = std::get_if<DenseSpec>(&layer)) {
      total += static_cast<std::size_t>(dense->units) * shape.numel();
      if (dense->bias) total += dense->units;
      shape = {dense->units, 1, 1};
    } else if (const auto* lif = std::get_if<LIFSpec>(&layer)) {
      if (lif->beta_trainable) total += 1;
      if (lif->threshold_trainable) total += 1;
    }
  }
  return total;
}

const char* surrogate_name(Surrogate s) {
  return s == Surrogate::ATan ? "atan" : "fast-sigmoid";
}

const char* reset_name(ResetKind r) {
  return r == ResetKind::Subtract ? "subtract" : "zero";
}

const char* optimizer_name(const OptimizerSpec& o) {
  if (std::holds_alternative<SGDSpec>(o)) return "sgd";
  if (std::holds_alternative<AdamSpec>(o)) return "adam";
  return "rmsprop";
}

std::string describe(const NetworkPlan& plan) {
  std::ostringstream out;
  out << "input " << plan.input.c << "x" << plan.input.h << "x" << plan.input.w << "\n";
  for (std::size_t i = 0; i < plan.layers.size(); ++i) {
    if (static_cast<int>(i) == plan.flatten_index) out << "  flatten\n";
    const Shape3& s = plan.shapes[i];
    out << "  ";
    const auto& layer = plan.layers[i];
    if (const auto* conv = std::get_if<ConvSpec>(&layer)) {
      out << "conv filters=" << conv->filters << " kernel=" << conv->kernel
          << " stride=" << conv->stride << " padding=" << (conv->same_pad ? "same" : "valid")
          << " bias=" << (conv->bias ? "true" : "false");
    } else if (const auto* pool = std::get_if<PoolSpec>(&layer)) {
      out << (pool->kind == PoolKind::Max ? "pool-max" : "pool-avg")
          << " kernel=" << pool->kernel;
    } else if (std::holds_alternative<NoOpSpec>(layer)) {
      out << "no-op";
    } else if (const auto* drop = std::get_if<DropoutSpec>(&layer)) {
      out << "dropout rate=" << drop->rate;
    } else if (const auto* dense = std::get_if<DenseSpec>(&layer)) {
      out << "fc units=" << dense->units << " bias=" << (dense->bias ? "true" : "false");
    } else {
      const auto& lif = std::get<LIFSpec>(layer);
      out << "lif beta=" << lif.beta << (lif.beta_trainable ? " (trainable)" : "")
          << " threshold=" << lif.threshold << (lif.threshold_trainable ? " (trainable)" : "")
          << " surrogate=" << surrogate_name(lif.surrogate)
          << " reset=" << reset_name(lif.reset);
    }
    out << " -> " << s.c << "x" << s.h << "x" << s.w << "\n";
  }
  out << "  optimizer " << optimizer_name(plan.optimizer);
  if (const auto* sgd = std::get_if<SGDSpec>(&plan.optimizer)) {
    out << " lr=" << sgd->lr << " momentum=" << sgd->momentum << " decay=" << sgd->decay
        << " nesterov=" << (sgd->nesterov ? "true" : "false");
  } else if (const auto* adam = std::get_if<AdamSpec>(&plan.optimizer)) {
    out << " lr=" << adam->lr << " beta1=" << adam->beta1 << " beta2=" << adam->beta2
        << " decay=" << adam->decay << " amsgrad=" << (adam->amsgrad ? "true" : "false");
  } else {
    const auto& rp = std::get<RMSPropSpec>(plan.optimizer);
    out << " lr=" << rp.lr << " rho=" << rp.rho << " decay=" << rp.decay;
  }
  out << "\n";
  return out.str();
}

}  // namespace gramsnn
