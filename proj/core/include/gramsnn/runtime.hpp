#pragma once

#include <Eigen/Core>

#include <cmath>
#include <memory>
#include <numbers>
#include <string>
#include <vector>

#include "gramsnn/assembler.hpp"
#include "gramsnn/rng.hpp"
#include "gramsnn/tensor.hpp"

namespace gramsnn {

// Reference-implementation defaults for the surrogate constants; the grammar
// does not evolve them.
inline constexpr double kFastSigmoidSlope = 25.0;
inline constexpr double kATanAlpha = 2.0;

// Derivative of the surrogate activation with respect to V, centered at the
// threshold (U = V - v_thresh).
inline double surrogate_grad(Surrogate kind, double v, double v_thresh, double constant) {
  const double u = v - v_thresh;
  if (kind == Surrogate::FastSigmoid) {
    const double d = 1.0 + constant * std::abs(u);
    return 1.0 / (d * d);
  }
  const double z = std::numbers::pi * u * constant / 2.0;
  return (constant / 2.0) / (1.0 + z * z);
}

// The smooth activation itself; only the test-only "smooth twin" forward mode
// uses it in place of the Heaviside spike.
inline double surrogate_forward(Surrogate kind, double v, double v_thresh, double constant) {
  const double u = v - v_thresh;
  if (kind == Surrogate::FastSigmoid) return u / (1.0 + constant * std::abs(u));
  return std::atan(std::numbers::pi * u * constant / 2.0) / std::numbers::pi;
}

inline double surrogate_constant(Surrogate kind) {
  return kind == Surrogate::FastSigmoid ? kFastSigmoidSlope : kATanAlpha;
}

template <class T>
struct ParamView {
  std::string name;
  T* value = nullptr;
  T* grad = nullptr;
  std::size_t n = 0;
  std::vector<std::size_t> dims;
};

namespace detail {

template <class T>
using MatMap =
    Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
template <class T>
using ConstMatMap =
    Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

template <class T>
void uniform_fanin_init(std::vector<T>& w, std::size_t fan_in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  for (auto& v : w) v = static_cast<T>(uniform_real(rng, -bound, bound));
}

}  // namespace detail

template <class T>
class Layer {
 public:
  virtual ~Layer() = default;
  // Allocates state/caches for a pass of `t_steps` frames of `batch` samples.
  virtual void begin_pass(int batch, int t_steps, bool train) = 0;
  virtual void forward_step(int t, const Tensor<T>& in, Tensor<T>& out, bool train) = 0;
  virtual void begin_backward() {}
  virtual void backward_step(int t, const Tensor<T>& dout, Tensor<T>& din) = 0;
  virtual std::vector<ParamView<T>> params() { return {}; }
  virtual bool state_finite() const { return true; }
  virtual std::vector<std::size_t> out_dims(int batch) const = 0;
};

// --- Convolution (cross-correlation), im2col + GEMM -------------------------

template <class T>
class ConvLayer final : public Layer<T> {
 public:
  ConvLayer(const ConvSpec& spec, Shape3 in_shape, Rng& rng)
      : spec_(spec), in_(in_shape) {
    out_h_ = out_dim(in_.h);
    out_w_ = out_dim(in_.w);
    if (spec_.same_pad) {
      int pad_h = std::max(0, (out_h_ - 1) * spec_.stride + spec_.kernel - in_.h);
      int pad_w = std::max(0, (out_w_ - 1) * spec_.stride + spec_.kernel - in_.w);
      pad_top_ = pad_h / 2;
      pad_left_ = pad_w / 2;
    }
    const std::size_t ickk =
        static_cast<std::size_t>(in_.c) * spec_.kernel * spec_.kernel;
    w_.resize(static_cast<std::size_t>(spec_.filters) * ickk);
    gw_.assign(w_.size(), T(0));
    detail::uniform_fanin_init(w_, ickk, rng);
    if (spec_.bias) {
      b_.resize(spec_.filters);
      gb_.assign(b_.size(), T(0));
      detail::uniform_fanin_init(b_, ickk, rng);
    }
  }

  void begin_pass(int batch, int t_steps, bool train) override {
    batch_ = batch;
    if (train)
      inputs_.assign(t_steps, {});
    else
      inputs_.clear();
    col_.assign(col_rows() * static_cast<std::size_t>(batch) * out_h_ * out_w_, T(0));
  }

  void forward_step(int t, const Tensor<T>& in, Tensor<T>& out, bool train) override {
    if (train) inputs_[t] = in.data;
    im2col(in.data.data());
    gemm_forward(out);
  }

  void backward_step(int t, const Tensor<T>& dout, Tensor<T>& din) override {
    const std::size_t rows = col_rows();
    const std::size_t cols = static_cast<std::size_t>(batch_) * out_h_ * out_w_;
    im2col(inputs_[t].data());
    detail::ConstMatMap<T> w(w_.data(), spec_.filters, rows);
    detail::MatMap<T> gw(gw_.data(), spec_.filters, rows);
    // dY as [filters, batch*ohw] needs a transpose-gather because dout is
    // batch-major; build it once into dy_buf_.
    gather_dy(dout);
    detail::ConstMatMap<T> dym(dy_buf_.data(), spec_.filters, cols);
    detail::ConstMatMap<T> colm(col_.data(), rows, cols);
    gw.noalias() += dym * colm.transpose();
    if (spec_.bias)
      for (int f = 0; f < spec_.filters; ++f) gb_[f] += dym.row(f).sum();

    // dcol = W^T * dY, then scatter back to the input frame
    dcol_.assign(rows * cols, T(0));
    detail::MatMap<T> dcol(dcol_.data(), rows, cols);
    dcol.noalias() = w.transpose() * dym;
    col2im(din);
  }

  std::vector<ParamView<T>> params() override {
    std::vector<ParamView<T>> out;
    out.push_back({"conv.w", w_.data(), gw_.data(), w_.size(),
                   {static_cast<std::size_t>(spec_.filters),
                    static_cast<std::size_t>(in_.c),
                    static_cast<std::size_t>(spec_.kernel),
                    static_cast<std::size_t>(spec_.kernel)}});
    if (spec_.bias)
      out.push_back({"conv.b", b_.data(), gb_.data(), b_.size(),
                     {static_cast<std::size_t>(spec_.filters)}});
    return out;
  }

  std::vector<std::size_t> out_dims(int batch) const override {
    return {static_cast<std::size_t>(batch), static_cast<std::size_t>(spec_.filters),
            static_cast<std::size_t>(out_h_), static_cast<std::size_t>(out_w_)};
  }

 private:
  int out_dim(int in) const {
    if (spec_.same_pad) return (in + spec_.stride - 1) / spec_.stride;
    return (in - spec_.kernel) / spec_.stride + 1;
  }
  std::size_t col_rows() const {
    return static_cast<std::size_t>(in_.c) * spec_.kernel * spec_.kernel;
  }

  // col layout: [in_c*k*k, batch*out_h*out_w]
  void im2col(const T* x) {
    const int k = spec_.kernel, s = spec_.stride;
    const std::size_t cols = static_cast<std::size_t>(batch_) * out_h_ * out_w_;
    const std::size_t plane = static_cast<std::size_t>(in_.h) * in_.w;
    T* col = col_.data();
    for (int c = 0; c < in_.c; ++c) {
      for (int ky = 0; ky < k; ++ky) {
        for (int kx = 0; kx < k; ++kx) {
          T* row = col + ((static_cast<std::size_t>(c) * k + ky) * k + kx) * cols;
          for (int b = 0; b < batch_; ++b) {
            const T* src = x + (static_cast<std::size_t>(b) * in_.c + c) * plane;
            T* dst = row + static_cast<std::size_t>(b) * out_h_ * out_w_;
            for (int oy = 0; oy < out_h_; ++oy) {
              const int iy = oy * s - pad_top_ + ky;
              if (iy < 0 || iy >= in_.h) {
                for (int ox = 0; ox < out_w_; ++ox) dst[oy * out_w_ + ox] = T(0);
                continue;
              }
              for (int ox = 0; ox < out_w_; ++ox) {
                const int ix = ox * s - pad_left_ + kx;
                dst[oy * out_w_ + ox] =
                    (ix < 0 || ix >= in_.w) ? T(0) : src[iy * in_.w + ix];
              }
            }
          }
        }
      }
    }
  }

  void col2im(Tensor<T>& din) {
    const int k = spec_.kernel, s = spec_.stride;
    const std::size_t cols = static_cast<std::size_t>(batch_) * out_h_ * out_w_;
    const std::size_t plane = static_cast<std::size_t>(in_.h) * in_.w;
    din.fill(T(0));
    T* x = din.data.data();
    const T* col = dcol_.data();
    for (int c = 0; c < in_.c; ++c) {
      for (int ky = 0; ky < k; ++ky) {
        for (int kx = 0; kx < k; ++kx) {
          const T* row = col + ((static_cast<std::size_t>(c) * k + ky) * k + kx) * cols;
          for (int b = 0; b < batch_; ++b) {
            T* dst = x + (static_cast<std::size_t>(b) * in_.c + c) * plane;
            const T* src = row + static_cast<std::size_t>(b) * out_h_ * out_w_;
            for (int oy = 0; oy < out_h_; ++oy) {
              const int iy = oy * s - pad_top_ + ky;
              if (iy < 0 || iy >= in_.h) continue;
              for (int ox = 0; ox < out_w_; ++ox) {
                const int ix = ox * s - pad_left_ + kx;
                if (ix >= 0 && ix < in_.w) dst[iy * in_.w + ix] += src[oy * out_w_ + ox];
              }
            }
          }
        }
      }
    }
  }

  void gemm_forward(Tensor<T>& out) {
    const std::size_t rows = col_rows();
    const std::size_t cols = static_cast<std::size_t>(batch_) * out_h_ * out_w_;
    y_buf_.resize(static_cast<std::size_t>(spec_.filters) * cols);
    detail::ConstMatMap<T> w(w_.data(), spec_.filters, rows);
    detail::ConstMatMap<T> colm(col_.data(), rows, cols);
    detail::MatMap<T> y(y_buf_.data(), spec_.filters, cols);
    y.noalias() = w * colm;
    // scatter [filters, batch*ohw] -> [batch, filters, oh, ow]
    const std::size_t ohw = static_cast<std::size_t>(out_h_) * out_w_;
    for (int f = 0; f < spec_.filters; ++f) {
      const T bias = spec_.bias ? b_[f] : T(0);
      const T* src = y_buf_.data() + static_cast<std::size_t>(f) * cols;
      for (int b = 0; b < batch_; ++b) {
        T* dst = out.data.data() + (static_cast<std::size_t>(b) * spec_.filters + f) * ohw;
        const T* s2 = src + static_cast<std::size_t>(b) * ohw;
        for (std::size_t i = 0; i < ohw; ++i) dst[i] = s2[i] + bias;
      }
    }
  }

  void gather_dy(const Tensor<T>& dout) {
    const std::size_t cols = static_cast<std::size_t>(batch_) * out_h_ * out_w_;
    const std::size_t ohw = static_cast<std::size_t>(out_h_) * out_w_;
    dy_buf_.resize(static_cast<std::size_t>(spec_.filters) * cols);
    for (int f = 0; f < spec_.filters; ++f) {
      T* dst = dy_buf_.data() + static_cast<std::size_t>(f) * cols;
      for (int b = 0; b < batch_; ++b) {
        const T* src =
            dout.data.data() + (static_cast<std::size_t>(b) * spec_.filters + f) * ohw;
        std::copy(src, src + ohw, dst + static_cast<std::size_t>(b) * ohw);
      }
    }
  }

  ConvSpec spec_;
  Shape3 in_;
  int out_h_ = 0, out_w_ = 0, pad_top_ = 0, pad_left_ = 0;
  int batch_ = 0;
  std::vector<T> w_, b_, gw_, gb_;
  std::vector<T> col_, dcol_, y_buf_, dy_buf_;
  std::vector<std::vector<T>> inputs_;  // per-timestep input frames
};

// --- Pooling (stride = kernel, no padding) ----------------------------------

template <class T>
class PoolLayer final : public Layer<T> {
 public:
  PoolLayer(const PoolSpec& spec, Shape3 in_shape) : spec_(spec), in_(in_shape) {
    out_h_ = in_.h / spec_.kernel;
    out_w_ = in_.w / spec_.kernel;
  }

  void begin_pass(int batch, int t_steps, bool train) override {
    batch_ = batch;
    if (train && spec_.kind == PoolKind::Max)
      argmax_.assign(t_steps, {});
    else
      argmax_.clear();
  }

  void forward_step(int t, const Tensor<T>& in, Tensor<T>& out, bool train) override {
    const int k = spec_.kernel;
    const std::size_t planes = static_cast<std::size_t>(batch_) * in_.c;
    const std::size_t in_plane = static_cast<std::size_t>(in_.h) * in_.w;
    const std::size_t out_plane = static_cast<std::size_t>(out_h_) * out_w_;
    std::vector<int>* am = nullptr;
    if (train && spec_.kind == PoolKind::Max) {
      argmax_[t].resize(planes * out_plane);
      am = &argmax_[t];
    }
    for (std::size_t p = 0; p < planes; ++p) {
      const T* src = in.data.data() + p * in_plane;
      T* dst = out.data.data() + p * out_plane;
      for (int oy = 0; oy < out_h_; ++oy) {
        for (int ox = 0; ox < out_w_; ++ox) {
          if (spec_.kind == PoolKind::Max) {
            int best = (oy * k) * in_.w + ox * k;
            T best_v = src[best];
            for (int ky = 0; ky < k; ++ky)
              for (int kx = 0; kx < k; ++kx) {
                const int idx = (oy * k + ky) * in_.w + ox * k + kx;
                if (src[idx] > best_v) {
                  best_v = src[idx];
                  best = idx;
                }
              }
            dst[oy * out_w_ + ox] = best_v;
            if (am) (*am)[p * out_plane + oy * out_w_ + ox] = best;
          } else {
            T sum = T(0);
            for (int ky = 0; ky < k; ++ky)
              for (int kx = 0; kx < k; ++kx)
                sum += src[(oy * k + ky) * in_.w + ox * k + kx];
            dst[oy * out_w_ + ox] = sum / static_cast<T>(k * k);
          }
        }
      }
    }
  }

  void backward_step(int t, const Tensor<T>& dout, Tensor<T>& din) override {
    const int k = spec_.kernel;
    const std::size_t planes = static_cast<std::size_t>(batch_) * in_.c;
    const std::size_t in_plane = static_cast<std::size_t>(in_.h) * in_.w;
    const std::size_t out_plane = static_cast<std::size_t>(out_h_) * out_w_;
    din.fill(T(0));
    for (std::size_t p = 0; p < planes; ++p) {
      const T* src = dout.data.data() + p * out_plane;
      T* dst = din.data.data() + p * in_plane;
      for (int oy = 0; oy < out_h_; ++oy) {
        for (int ox = 0; ox < out_w_; ++ox) {
          const T g = src[oy * out_w_ + ox];
          if (spec_.kind == PoolKind::Max) {
            dst[argmax_[t][p * out_plane + oy * out_w_ + ox]] += g;
          } else {
            const T share = g / static_cast<T>(k * k);
            for (int ky = 0; ky < k; ++ky)
              for (int kx = 0; kx < k; ++kx)
                dst[(oy * k + ky) * in_.w + ox * k + kx] += share;
          }
        }
      }
    }
  }

  std::vector<std::size_t> out_dims(int batch) const override {
    return {static_cast<std::size_t>(batch), static_cast<std::size_t>(in_.c),
            static_cast<std::size_t>(out_h_), static_cast<std::size_t>(out_w_)};
  }

 private:
  PoolSpec spec_;
  Shape3 in_;
  int out_h_ = 0, out_w_ = 0, batch_ = 0;
  std::vector<std::vector<int>> argmax_;
};

// --- Dropout (fresh mask per timestep) ---------------------------------------

template <class T>
class DropoutLayer final : public Layer<T> {
 public:
  DropoutLayer(const DropoutSpec& spec, std::vector<std::size_t> dims, uint64_t seed)
      : rate_(spec.rate), dims_(std::move(dims)), rng_(seed) {}

  void begin_pass(int batch, int t_steps, bool train) override {
    batch_ = batch;
    if (train && rate_ > 0.0)
      masks_.assign(t_steps, {});
    else
      masks_.clear();
  }

  void forward_step(int t, const Tensor<T>& in, Tensor<T>& out, bool train) override {
    if (!train || rate_ <= 0.0) {
      out.data = in.data;
      return;
    }
    const T scale = static_cast<T>(1.0 / (1.0 - rate_));
    auto& mask = masks_[t];
    mask.resize(in.numel());
    std::bernoulli_distribution keep(1.0 - rate_);
    for (std::size_t i = 0; i < in.numel(); ++i) {
      mask[i] = keep(rng_) ? scale : T(0);
      out.data[i] = in.data[i] * mask[i];
    }
  }

  void backward_step(int t, const Tensor<T>& dout, Tensor<T>& din) override {
    if (masks_.empty() || masks_[t].empty()) {
      din.data = dout.data;
      return;
    }
    for (std::size_t i = 0; i < dout.numel(); ++i) din.data[i] = dout.data[i] * masks_[t][i];
  }

  std::vector<std::size_t> out_dims(int batch) const override {
    std::vector<std::size_t> d{static_cast<std::size_t>(batch)};
    d.insert(d.end(), dims_.begin(), dims_.end());
    return d;
  }

 private:
  double rate_;
  std::vector<std::size_t> dims_;  // per-sample dims
  Rng rng_;
  int batch_ = 0;
  std::vector<std::vector<T>> masks_;
};

// --- Identity / flatten -------------------------------------------------------

template <class T>
class NoOpLayer final : public Layer<T> {
 public:
  explicit NoOpLayer(std::vector<std::size_t> dims) : dims_(std::move(dims)) {}
  void begin_pass(int, int, bool) override {}
  void forward_step(int, const Tensor<T>& in, Tensor<T>& out, bool) override {
    out.data = in.data;
  }
  void backward_step(int, const Tensor<T>& dout, Tensor<T>& din) override {
    din.data = dout.data;
  }
  std::vector<std::size_t> out_dims(int batch) const override {
    std::vector<std::size_t> d{static_cast<std::size_t>(batch)};
    d.insert(d.end(), dims_.begin(), dims_.end());
    return d;
  }

 private:
  std::vector<std::size_t> dims_;
};

template <class T>
class FlattenLayer final : public Layer<T> {
 public:
  explicit FlattenLayer(std::size_t n) : n_(n) {}
  void begin_pass(int, int, bool) override {}
  void forward_step(int, const Tensor<T>& in, Tensor<T>& out, bool) override {
    out.data = in.data;
  }
  void backward_step(int, const Tensor<T>& dout, Tensor<T>& din) override {
    din.data = dout.data;
  }
  std::vector<std::size_t> out_dims(int batch) const override {
    return {static_cast<std::size_t>(batch), n_};
  }

 private:
  std::size_t n_;
};

// --- Dense --------------------------------------------------------------------

template <class T>
class DenseLayer final : public Layer<T> {
 public:
  DenseLayer(const DenseSpec& spec, std::size_t in_n, Rng& rng)
      : units_(spec.units), in_n_(in_n), has_bias_(spec.bias) {
    w_.resize(static_cast<std::size_t>(units_) * in_n_);
    gw_.assign(w_.size(), T(0));
    detail::uniform_fanin_init(w_, in_n_, rng);
    if (has_bias_) {
      b_.resize(units_);
      gb_.assign(b_.size(), T(0));
      detail::uniform_fanin_init(b_, in_n_, rng);
    }
  }

  // Identity-like construction for tests.
  void set_weights(const std::vector<T>& w, const std::vector<T>& b) {
    w_ = w;
    if (has_bias_) b_ = b;
  }

  void begin_pass(int batch, int t_steps, bool train) override {
    batch_ = batch;
    if (train)
      inputs_.assign(t_steps, {});
    else
      inputs_.clear();
  }

  void forward_step(int t, const Tensor<T>& in, Tensor<T>& out, bool train) override {
    if (train) inputs_[t] = in.data;
    detail::ConstMatMap<T> x(in.data.data(), batch_, in_n_);
    detail::ConstMatMap<T> w(w_.data(), units_, in_n_);
    detail::MatMap<T> y(out.data.data(), batch_, units_);
    y.noalias() = x * w.transpose();
    if (has_bias_)
      for (int b = 0; b < batch_; ++b)
        for (int u = 0; u < units_; ++u) out.data[static_cast<std::size_t>(b) * units_ + u] += b_[u];
  }

  void backward_step(int t, const Tensor<T>& dout, Tensor<T>& din) override {
    detail::ConstMatMap<T> x(inputs_[t].data(), batch_, in_n_);
    detail::ConstMatMap<T> dy(dout.data.data(), batch_, units_);
    detail::MatMap<T> gw(gw_.data(), units_, in_n_);
    gw.noalias() += dy.transpose() * x;
    if (has_bias_)
      for (int u = 0; u < units_; ++u) gb_[u] += dy.col(u).sum();
    detail::ConstMatMap<T> w(w_.data(), units_, in_n_);
    detail::MatMap<T> dx(din.data.data(), batch_, in_n_);
    dx.noalias() = dy * w;
  }

  std::vector<ParamView<T>> params() override {
    std::vector<ParamView<T>> out;
    out.push_back({"dense.w", w_.data(), gw_.data(), w_.size(),
                   {static_cast<std::size_t>(units_), in_n_}});
    if (has_bias_)
      out.push_back({"dense.b", b_.data(), gb_.data(), b_.size(),
                     {static_cast<std::size_t>(units_)}});
    return out;
  }

  std::vector<std::size_t> out_dims(int batch) const override {
    return {static_cast<std::size_t>(batch), static_cast<std::size_t>(units_)};
  }

 private:
  int units_;
  std::size_t in_n_;
  bool has_bias_;
  int batch_ = 0;
  std::vector<T> w_, b_, gw_, gb_;
  std::vector<std::vector<T>> inputs_;
};

// --- LIF ------------------------------------------------------------------------

// Discrete leaky integrate-and-fire dynamics over T steps.
//   subtract reset: V[t] = beta*V[t-1] + I[t] - Act[t-1]*v_thresh
//   zero reset:     V[t] = beta*V[t-1]*(1 - Act[t-1]) + I[t]
//   Act[t] = 1 iff V[t] > v_thresh
// Backward treats the reset-term Act[t-1] as constant unless
// grad_through_reset is set (smooth-twin exact adjoint).
template <class T>
class LIFLayer final : public Layer<T> {
 public:
  LIFLayer(const LIFSpec& spec, std::vector<std::size_t> dims, bool smooth_twin)
      : spec_(spec),
        dims_(std::move(dims)),
        beta_(static_cast<T>(spec.beta)),
        vth_(static_cast<T>(spec.threshold)),
        gbeta_(0),
        gvth_(0),
        smooth_twin_(smooth_twin) {
    sg_const_ = surrogate_constant(spec_.surrogate);
    n_ = 1;
    for (auto d : dims_) n_ *= d;
  }

  void begin_pass(int batch, int t_steps, bool train) override {
    batch_ = batch;
    const std::size_t total = static_cast<std::size_t>(batch) * n_;
    v_.assign(total, T(0));
    act_.assign(total, T(0));
    finite_ = true;
    if (train) {
      // v_cache_[t] / act_cache_[t] hold the state after step t; index 0 is
      // the zero-initialized state.
      v_cache_.assign(t_steps + 1, std::vector<T>(total, T(0)));
      act_cache_.assign(t_steps + 1, std::vector<T>(total, T(0)));
    } else {
      v_cache_.clear();
      act_cache_.clear();
    }
  }

  void forward_step(int t, const Tensor<T>& in, Tensor<T>& out, bool /*train*/) override {
    if (in.numel() != v_.size()) throw ShapeError("lif: input size mismatch");
    const bool zero_reset = spec_.reset == ResetKind::Zero;
    bool finite = true;
    for (std::size_t i = 0; i < v_.size(); ++i) {
      T v;
      if (zero_reset)
        v = beta_ * v_[i] * (T(1) - act_[i]) + in.data[i];
      else
        v = beta_ * v_[i] + in.data[i] - act_[i] * vth_;
      T a;
      if (smooth_twin_)
        a = static_cast<T>(surrogate_forward(spec_.surrogate, v, vth_, sg_const_));
      else
        a = v > vth_ ? T(1) : T(0);
      v_[i] = v;
      act_[i] = a;
      out.data[i] = a;
      finite &= std::isfinite(static_cast<double>(v));
    }
    finite_ = finite_ && finite;
    if (!v_cache_.empty()) {
      v_cache_[t + 1] = v_;
      act_cache_[t + 1] = act_;
    }
  }

  void begin_backward() override {
    const std::size_t total = static_cast<std::size_t>(batch_) * n_;
    carry_v_.assign(total, T(0));
    carry_act_.assign(total, T(0));
    grad_through_reset_ = smooth_twin_;
  }

  void backward_step(int t, const Tensor<T>& dout, Tensor<T>& din) override {
    const bool zero_reset = spec_.reset == ResetKind::Zero;
    const std::vector<T>& v_t = v_cache_[t + 1];
    const std::vector<T>& v_prev = v_cache_[t];
    const std::vector<T>& act_t = act_cache_[t + 1];
    const std::vector<T>& act_prev = act_cache_[t];
    T gbeta = T(0), gvth = T(0);
    for (std::size_t i = 0; i < v_t.size(); ++i) {
      const T dact = dout.data[i] + carry_act_[i];
      const T sg = static_cast<T>(surrogate_grad(spec_.surrogate, v_t[i], vth_, sg_const_));
      // recurrence V[t+1] <- V[t]
      T carry;
      if (zero_reset)
        carry = beta_ * (T(1) - act_t[i]) * carry_v_[i];
      else
        carry = beta_ * carry_v_[i];
      const T dv = dact * sg + carry;

      if (spec_.beta_trainable)
        gbeta += dv * (zero_reset ? v_prev[i] * (T(1) - act_prev[i]) : v_prev[i]);
      if (spec_.threshold_trainable) {
        gvth -= dact * sg;  // centering of the activation
        if (!zero_reset) gvth -= dv * act_prev[i];
      }
      if (grad_through_reset_) {
        // exact adjoint of the twin forward: gradient into Act[t-1]
        carry_act_[i] = zero_reset ? -beta_ * v_prev[i] * dv : -vth_ * dv;
      }
      carry_v_[i] = dv;
      din.data[i] = dv;
    }
    gbeta_ += gbeta;
    gvth_ += gvth;
  }

  std::vector<ParamView<T>> params() override {
    std::vector<ParamView<T>> out;
    if (spec_.beta_trainable) out.push_back({"lif.beta", &beta_, &gbeta_, 1, {1}});
    if (spec_.threshold_trainable) out.push_back({"lif.threshold", &vth_, &gvth_, 1, {1}});
    return out;
  }

  bool state_finite() const override { return finite_; }

  std::vector<std::size_t> out_dims(int batch) const override {
    std::vector<std::size_t> d{static_cast<std::size_t>(batch)};
    d.insert(d.end(), dims_.begin(), dims_.end());
    return d;
  }

  T beta() const { return beta_; }
  T threshold() const { return vth_; }
  const std::vector<T>& membrane() const { return v_; }

 private:
  LIFSpec spec_;
  std::vector<std::size_t> dims_;
  T beta_, vth_, gbeta_, gvth_;
  bool smooth_twin_;
  bool grad_through_reset_ = false;
  double sg_const_ = 0;
  std::size_t n_ = 0;
  int batch_ = 0;
  bool finite_ = true;
  std::vector<T> v_, act_, carry_v_, carry_act_;
  std::vector<std::vector<T>> v_cache_, act_cache_;
};

// --- Network runtime --------------------------------------------------------------

template <class T>
class NetworkRuntime {
 public:
  // smooth_twin replaces the Heaviside spike with the surrogate forward
  // function everywhere; test-only.
  NetworkRuntime(const NetworkPlan& plan, Rng& init_rng, bool smooth_twin = false)
      : plan_(plan) {
    Shape3 shape = plan.input;
    bool flattened = false;
    for (std::size_t i = 0; i < plan.layers.size(); ++i) {
      if (static_cast<int>(i) == plan.flatten_index) {
        layers_.push_back(std::make_unique<FlattenLayer<T>>(
            static_cast<std::size_t>(shape.numel())));
        flattened = true;
      }
      const LayerSpec& spec = plan.layers[i];
      if (const auto* conv = std::get_if<ConvSpec>(&spec)) {
        layers_.push_back(std::make_unique<ConvLayer<T>>(*conv, shape, init_rng));
      } else if (const auto* pool = std::get_if<PoolSpec>(&spec)) {
        layers_.push_back(std::make_unique<PoolLayer<T>>(*pool, shape));
      } else if (std::holds_alternative<NoOpSpec>(spec)) {
        layers_.push_back(std::make_unique<NoOpLayer<T>>(per_sample_dims(shape, flattened)));
      } else if (const auto* drop = std::get_if<DropoutSpec>(&spec)) {
        layers_.push_back(std::make_unique<DropoutLayer<T>>(
            *drop, per_sample_dims(shape, flattened), init_rng()));
      } else if (const auto* dense = std::get_if<DenseSpec>(&spec)) {
        layers_.push_back(std::make_unique<DenseLayer<T>>(
            *dense, static_cast<std::size_t>(shape.numel()), init_rng));
      } else {
        const auto& lif = std::get<LIFSpec>(spec);
        layers_.push_back(std::make_unique<LIFLayer<T>>(
            lif, per_sample_dims(shape, flattened), smooth_twin));
      }
      shape = plan.shapes[i];
    }
  }

  // input: [T, batch, c, h, w]; returns accumulated output spike counts
  // [batch, classes]. In train mode all per-step records needed by backward()
  // are cached.
  Tensor<T> forward(const Tensor<T>& spikes, bool train) {
    if (spikes.shape.size() != 5) throw ShapeError("network input must be [T,B,C,H,W]");
    const int t_steps = static_cast<int>(spikes.shape[0]);
    const int batch = static_cast<int>(spikes.shape[1]);
    if (static_cast<int>(spikes.shape[2]) != plan_.input.c ||
        static_cast<int>(spikes.shape[3]) != plan_.input.h ||
        static_cast<int>(spikes.shape[4]) != plan_.input.w)
      throw ShapeError("network input frame shape mismatch");
    t_steps_ = t_steps;
    batch_ = batch;

    for (auto& layer : layers_) layer->begin_pass(batch, t_steps, train);
    bufs_.resize(layers_.size());
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      Tensor<T> buf(layers_[i]->out_dims(batch));
      bufs_[i] = std::move(buf);
    }

    const std::size_t frame_n =
        static_cast<std::size_t>(batch) * plan_.input.c * plan_.input.h * plan_.input.w;
    Tensor<T> frame({static_cast<std::size_t>(batch), static_cast<std::size_t>(plan_.input.c),
                     static_cast<std::size_t>(plan_.input.h),
                     static_cast<std::size_t>(plan_.input.w)});
    Tensor<T> counts({static_cast<std::size_t>(batch),
                      static_cast<std::size_t>(plan_.num_classes)});
    for (int t = 0; t < t_steps; ++t) {
      std::copy(spikes.data.begin() + static_cast<std::size_t>(t) * frame_n,
                spikes.data.begin() + static_cast<std::size_t>(t + 1) * frame_n,
                frame.data.begin());
      const Tensor<T>* in = &frame;
      for (std::size_t i = 0; i < layers_.size(); ++i) {
        layers_[i]->forward_step(t, *in, bufs_[i], train);
        in = &bufs_[i];
      }
      for (auto& layer : layers_)
        if (!layer->state_finite())
          throw NonFiniteActivation("membrane potential diverged at step " + std::to_string(t));
      for (std::size_t i = 0; i < counts.numel(); ++i) counts.data[i] += in->data[i];
    }
    return counts;
  }

  // dcounts: [batch, classes]; the per-timestep upstream gradient is dcounts
  // broadcast over t.
  void backward(const Tensor<T>& dcounts) {
    for (auto& layer : layers_) layer->begin_backward();
    dbufs_.resize(layers_.size() + 1);
    dbufs_[0] = Tensor<T>({static_cast<std::size_t>(batch_),
                           static_cast<std::size_t>(plan_.input.c),
                           static_cast<std::size_t>(plan_.input.h),
                           static_cast<std::size_t>(plan_.input.w)});
    for (std::size_t i = 0; i < layers_.size(); ++i)
      dbufs_[i + 1] = Tensor<T>(layers_[i]->out_dims(batch_));

    for (int t = t_steps_ - 1; t >= 0; --t) {
      dbufs_[layers_.size()].data = dcounts.data;
      for (int i = static_cast<int>(layers_.size()) - 1; i >= 0; --i)
        layers_[i]->backward_step(t, dbufs_[i + 1], dbufs_[i]);
    }
  }

  std::vector<ParamView<T>> params() {
    std::vector<ParamView<T>> out;
    for (auto& layer : layers_)
      for (auto& p : layer->params()) out.push_back(p);
    return out;
  }

  void zero_grad() {
    for (auto& p : params()) std::fill(p.grad, p.grad + p.n, T(0));
  }

  const NetworkPlan& plan() const { return plan_; }
  std::vector<std::unique_ptr<Layer<T>>>& layers() { return layers_; }

 private:
  static std::vector<std::size_t> per_sample_dims(Shape3 shape, bool flattened) {
    if (flattened) return {static_cast<std::size_t>(shape.numel())};
    return {static_cast<std::size_t>(shape.c), static_cast<std::size_t>(shape.h),
            static_cast<std::size_t>(shape.w)};
  }

  NetworkPlan plan_;
  std::vector<std::unique_ptr<Layer<T>>> layers_;
  std::vector<Tensor<T>> bufs_, dbufs_;
  int t_steps_ = 0, batch_ = 0;
};

}  // namespace gramsnn
