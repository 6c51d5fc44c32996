#pragma once

#include <chrono>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "gramsnn/dataio.hpp"
#include "gramsnn/runtime.hpp"

namespace gramsnn {

struct LossConfig {
  double correct_rate = 1.0;    // target spiking proportion of the labeled class
  double incorrect_rate = 0.0;  // and of every other class
  int t_steps = 10;
};

// Mean-square-error spike count loss, averaged over the batch:
//   L = mean_b (1/T) * sum_j (count_j - target_j)^2
template <class T>
std::pair<double, Tensor<T>> mse_spike_count(const Tensor<T>& counts,
                                             std::span<const int> labels,
                                             const LossConfig& cfg) {
  const std::size_t batch = counts.shape[0];
  const std::size_t classes = counts.shape[1];
  Tensor<T> grad(counts.shape);
  double loss = 0.0;
  for (std::size_t b = 0; b < batch; ++b) {
    if (labels[b] < 0 || labels[b] >= static_cast<int>(classes))
      throw ShapeError("label out of range: " + std::to_string(labels[b]));
    for (std::size_t j = 0; j < classes; ++j) {
      const double target =
          (static_cast<int>(j) == labels[b] ? cfg.correct_rate : cfg.incorrect_rate) *
          cfg.t_steps;
      const double diff = static_cast<double>(counts.data[b * classes + j]) - target;
      loss += diff * diff / cfg.t_steps;
      grad.data[b * classes + j] =
          static_cast<T>(2.0 * diff / (cfg.t_steps * static_cast<double>(batch)));
    }
  }
  return {loss / static_cast<double>(batch), std::move(grad)};
}

// Argmax per row; ties break toward the lowest class index.
template <class T>
std::vector<int> predict(const Tensor<T>& counts) {
  const std::size_t batch = counts.shape[0];
  const std::size_t classes = counts.shape[1];
  std::vector<int> out(batch, 0);
  for (std::size_t b = 0; b < batch; ++b) {
    T best = counts.data[b * classes];
    for (std::size_t j = 1; j < classes; ++j)
      if (counts.data[b * classes + j] > best) {
        best = counts.data[b * classes + j];
        out[b] = static_cast<int>(j);
      }
  }
  return out;
}

// SGD / RMSProp / Adam with per-step learning-rate decay
// lr_t = lr / (1 + decay * step).
template <class T>
class Optimizer {
 public:
  explicit Optimizer(OptimizerSpec spec) : spec_(std::move(spec)) {}

  void attach(std::vector<ParamView<T>> params) {
    params_ = std::move(params);
    slot1_.clear();
    slot2_.clear();
    slot3_.clear();
    for (const auto& p : params_) {
      slot1_.emplace_back(p.n, T(0));
      slot2_.emplace_back(p.n, T(0));
      slot3_.emplace_back(p.n, T(0));
    }
    step_ = 0;
  }

  void step() {
    constexpr double eps = 1e-8;
    if (const auto* sgd = std::get_if<SGDSpec>(&spec_)) {
      const double lr = sgd->lr / (1.0 + sgd->decay * step_);
      for (std::size_t k = 0; k < params_.size(); ++k) {
        auto& p = params_[k];
        auto& vel = slot1_[k];
        for (std::size_t i = 0; i < p.n; ++i) {
          vel[i] = static_cast<T>(sgd->momentum * vel[i] - lr * p.grad[i]);
          if (sgd->nesterov)
            p.value[i] += static_cast<T>(sgd->momentum * vel[i] - lr * p.grad[i]);
          else
            p.value[i] += vel[i];
        }
      }
    } else if (const auto* rms = std::get_if<RMSPropSpec>(&spec_)) {
      const double lr = rms->lr / (1.0 + rms->decay * step_);
      for (std::size_t k = 0; k < params_.size(); ++k) {
        auto& p = params_[k];
        auto& s = slot1_[k];
        for (std::size_t i = 0; i < p.n; ++i) {
          const double g = p.grad[i];
          s[i] = static_cast<T>(rms->rho * s[i] + (1.0 - rms->rho) * g * g);
          p.value[i] -= static_cast<T>(lr * g / (std::sqrt(static_cast<double>(s[i])) + eps));
        }
      }
    } else {
      const auto& adam = std::get<AdamSpec>(spec_);
      const double lr = adam.lr / (1.0 + adam.decay * step_);
      const std::int64_t t = step_ + 1;
      const double bc1 = 1.0 - std::pow(adam.beta1, static_cast<double>(t));
      const double bc2 = 1.0 - std::pow(adam.beta2, static_cast<double>(t));
      for (std::size_t k = 0; k < params_.size(); ++k) {
        auto& p = params_[k];
        auto& m = slot1_[k];
        auto& v = slot2_[k];
        auto& vmax = slot3_[k];
        for (std::size_t i = 0; i < p.n; ++i) {
          const double g = p.grad[i];
          m[i] = static_cast<T>(adam.beta1 * m[i] + (1.0 - adam.beta1) * g);
          v[i] = static_cast<T>(adam.beta2 * v[i] + (1.0 - adam.beta2) * g * g);
          double mhat = m[i] / bc1;
          double vhat = v[i] / bc2;
          if (adam.amsgrad) {
            if (vhat > vmax[i]) vmax[i] = static_cast<T>(vhat);
            vhat = vmax[i];
          }
          p.value[i] -= static_cast<T>(lr * mhat / (std::sqrt(vhat) + eps));
        }
      }
    }
    ++step_;
  }

  std::int64_t steps_taken() const { return step_; }

 private:
  OptimizerSpec spec_;
  std::vector<ParamView<T>> params_;
  std::vector<std::vector<T>> slot1_, slot2_, slot3_;
  std::int64_t step_ = 0;
};

struct EpochLog {
  int epoch = 0;
  double loss = 0.0;
  double train_acc = 0.0;
  double seconds = 0.0;
};

enum class TrainStatus { Ok, Diverged };

// Seeded shuffle per epoch, on-the-fly spike encoding per batch, final
// partial batch included.
template <class T>
TrainStatus train_epochs(NetworkRuntime<T>& runtime, const ImageDataset& ds,
                         std::span<const int> indices, int epochs, int batch_size,
                         const LossConfig& loss_cfg, Optimizer<T>& opt, uint64_t seed,
                         std::vector<EpochLog>& log) {
  std::vector<int> order(indices.begin(), indices.end());
  for (int epoch = 0; epoch < epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    Rng shuffle_rng(mix_seed(seed, static_cast<uint64_t>(epoch), 0xA11CE));
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double loss_sum = 0.0;
    std::size_t correct = 0, seen = 0, batches = 0;
    for (std::size_t pos = 0; pos < order.size(); pos += batch_size) {
      const std::size_t n = std::min<std::size_t>(batch_size, order.size() - pos);
      std::span<const int> batch_idx(order.data() + pos, n);
      Rng enc_rng(mix_seed(seed, static_cast<uint64_t>(epoch), 0xB0B + pos));
      Tensor<T> spikes = rate_encode_batch<T>(ds, batch_idx, loss_cfg.t_steps, enc_rng);
      std::vector<int> labels(n);
      for (std::size_t i = 0; i < n; ++i) labels[i] = ds.labels[batch_idx[i]];

      Tensor<T> counts;
      try {
        counts = runtime.forward(spikes, /*train=*/true);
      } catch (const NonFiniteActivation&) {
        return TrainStatus::Diverged;
      }
      auto [loss, grad] = mse_spike_count(counts, labels, loss_cfg);
      if (!std::isfinite(loss)) return TrainStatus::Diverged;
      loss_sum += loss;
      ++batches;
      auto preds = predict(counts);
      for (std::size_t i = 0; i < n; ++i) correct += preds[i] == labels[i];
      seen += n;
      runtime.zero_grad();
      runtime.backward(grad);
      opt.step();
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    log.push_back({epoch + 1, batches ? loss_sum / batches : 0.0,
                   seen ? static_cast<double>(correct) / seen : 0.0, secs});
  }
  return TrainStatus::Ok;
}

template <class T>
double evaluate_accuracy(NetworkRuntime<T>& runtime, const ImageDataset& ds,
                         std::span<const int> indices, int t_steps, uint64_t eval_seed,
                         int batch_size = 64) {
  if (indices.empty()) return 0.0;
  std::size_t correct = 0;
  for (std::size_t pos = 0; pos < indices.size(); pos += batch_size) {
    const std::size_t n = std::min<std::size_t>(batch_size, indices.size() - pos);
    std::span<const int> batch_idx(indices.data() + pos, n);
    Tensor<T> spikes = rate_encode_batch_stable<T>(ds, batch_idx, t_steps, eval_seed, pos);
    Tensor<T> counts = runtime.forward(spikes, /*train=*/false);
    auto preds = predict(counts);
    for (std::size_t i = 0; i < n; ++i) correct += preds[i] == ds.labels[batch_idx[i]];
  }
  return static_cast<double>(correct) / static_cast<double>(indices.size());
}

}  // namespace gramsnn
