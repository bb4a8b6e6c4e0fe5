#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "exo/errors.hpp"
#include "exo/nn/tensor.hpp"
#include "exo/random.hpp"

// Layers of the classifier networks. Each layer owns its parameters (with
// gradient and Adam moment storage) and caches what its backward pass needs
// during forward(). infer() is const and cache-free, so a built model can be
// evaluated from several threads at once.

namespace exo::nn {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMatrix>;
using ConstMatMap = Eigen::Map<const RowMatrix>;
using ConstStridedMap = Eigen::Map<const RowMatrix, 0, Eigen::OuterStride<>>;
using StridedMap = Eigen::Map<RowMatrix, 0, Eigen::OuterStride<>>;

/// A learnable array with its gradient and Adam moments.
struct Param {
  std::string name;
  std::vector<double> value;
  std::vector<double> grad;
  std::vector<double> m;
  std::vector<double> v;

  Param() = default;
  Param(std::string n, std::size_t size)
      : name(std::move(n)), value(size, 0.0), grad(size, 0.0), m(size, 0.0), v(size, 0.0) {}

  std::size_t size() const { return value.size(); }
  void zero_grad() { std::ranges::fill(grad, 0.0); }
  void reset_moments() {
    std::ranges::fill(m, 0.0);
    std::ranges::fill(v, 0.0);
  }
};

enum class LayerKind {
  Conv1D,
  BatchNorm,
  ReLU,
  MaxPool1D,
  Dropout,
  FullyConnected,
  LSTM,
  LastStep,
  TemporalStride,
  Softmax
};

inline std::string_view kind_name(LayerKind k) {
  switch (k) {
  case LayerKind::Conv1D:
    return "Conv1D";
  case LayerKind::BatchNorm:
    return "BatchNorm";
  case LayerKind::ReLU:
    return "ReLU";
  case LayerKind::MaxPool1D:
    return "MaxPool1D";
  case LayerKind::Dropout:
    return "Dropout";
  case LayerKind::FullyConnected:
    return "FullyConnected";
  case LayerKind::LSTM:
    return "LSTM";
  case LayerKind::LastStep:
    return "LastStep";
  case LayerKind::TemporalStride:
    return "TemporalStride";
  case LayerKind::Softmax:
    return "Softmax";
  }
  return "?";
}

inline LayerKind parse_kind(std::string_view s) {
  for (auto k : {LayerKind::Conv1D, LayerKind::BatchNorm, LayerKind::ReLU, LayerKind::MaxPool1D,
                 LayerKind::Dropout, LayerKind::FullyConnected, LayerKind::LSTM,
                 LayerKind::LastStep, LayerKind::TemporalStride, LayerKind::Softmax})
    if (kind_name(k) == s)
      return k;
  throw ConfigError("unknown layer kind '" + std::string(s) + "'");
}

class Layer {
public:
  virtual ~Layer() = default;

  virtual LayerKind kind() const = 0;
  /// Hyperparameters, enough to rebuild the layer with make_layer().
  virtual nlohmann::ordered_json config() const = 0;
  /// Output extents for a given input; throws ShapeError on mismatch.
  virtual Shape output_shape(const Shape &in) const = 0;

  /// Forward pass that caches activations for backward().
  virtual Tensor3 forward(const Tensor3 &x, Mode mode) = 0;
  /// Accumulates parameter gradients and, if requested, returns dL/dx.
  virtual Tensor3 backward(const Tensor3 &grad_out, bool need_input_grad) = 0;
  /// Inference-mode forward without side effects.
  virtual Tensor3 infer(const Tensor3 &x) const = 0;

  virtual std::vector<Param *> params() { return {}; }
  std::vector<const Param *> params() const {
    auto ps = const_cast<Layer *>(this)->params();
    return {ps.begin(), ps.end()};
  }
  /// Non-learnable state that must survive a checkpoint (batch-norm
  /// running statistics).
  virtual std::vector<std::vector<double> *> buffers() { return {}; }

  /// Frozen layers keep their statistics fixed; parameters are skipped by
  /// the optimizer separately.
  virtual void set_frozen(bool frozen) { frozen_ = frozen; }
  bool frozen() const { return frozen_; }

  /// Reseeds any stochastic behavior (dropout masks).
  virtual void reseed(std::uint64_t) {}

  virtual std::unique_ptr<Layer> clone() const = 0;

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto *p : params())
      n += p->size();
    return n;
  }

  void zero_grad() {
    for (auto *p : params())
      p->zero_grad();
  }

protected:
  bool frozen_ = false;
};

namespace detail {

inline void check_channels(const Shape &in, std::size_t expected, std::string_view who) {
  if (in.channels != expected)
    throw ShapeError(std::string(who) + ": expected " + std::to_string(expected) +
                     " input channels, got " + std::to_string(in.channels));
}

inline void fill_uniform(std::vector<double> &v, double limit, Rng &rng) {
  for (auto &x : v)
    x = rng.uniform(-limit, limit);
}

} // namespace detail

//------------------------------------------------------------------------------
// Conv1D

/// Same-length 1-D convolution (cross-correlation) with symmetric zero
/// padding of (kernel - 1) / 2: out[b][o][t] = bias[o] +
/// sum_{i,k} w[o][i][k] * x[b][i][t + k - pad].
class Conv1D final : public Layer {
public:
  Conv1D(std::size_t in_ch, std::size_t out_ch, std::size_t kernel)
      : in_(in_ch), out_(out_ch), k_(kernel), w_("weight", out_ch * in_ch * kernel),
        b_("bias", out_ch) {
    if (in_ch == 0 || out_ch == 0 || kernel == 0)
      throw ConfigError("Conv1D: sizes must be positive");
    if (kernel % 2 == 0)
      throw ConfigError("Conv1D: kernel must be odd for same-length output");
  }

  std::size_t in_channels() const { return in_; }
  std::size_t out_channels() const { return out_; }
  std::size_t kernel() const { return k_; }
  std::size_t padding() const { return (k_ - 1) / 2; }
  Param &weight() { return w_; }
  Param &bias() { return b_; }
  const Param &weight() const { return w_; }
  const Param &bias() const { return b_; }

  void init(Rng &rng) {
    const double lim = std::sqrt(1.0 / static_cast<double>(in_ * k_));
    detail::fill_uniform(w_.value, lim, rng);
    detail::fill_uniform(b_.value, lim, rng);
  }

  LayerKind kind() const override { return LayerKind::Conv1D; }
  nlohmann::ordered_json config() const override {
    return {{"in_channels", in_}, {"out_channels", out_}, {"kernel", k_}, {"padding", padding()}};
  }
  Shape output_shape(const Shape &in) const override {
    detail::check_channels(in, in_, "Conv1D");
    return {in.batch, out_, in.length};
  }

  Tensor3 forward(const Tensor3 &x, Mode) override {
    output_shape(x.shape);
    padded_ = pad_time_major(x);
    cached_shape_ = x.shape;
    return run(padded_, x.batch(), x.length());
  }

  Tensor3 infer(const Tensor3 &x) const override {
    output_shape(x.shape);
    return run(pad_time_major(x), x.batch(), x.length());
  }

  Tensor3 backward(const Tensor3 &g, bool need_input_grad) override {
    if (g.shape != Shape{cached_shape_.batch, out_, cached_shape_.length})
      throw ShapeError("Conv1D::backward: gradient shape " + g.shape.str() + " does not match output");
    const std::size_t B = g.batch(), L = g.length(), pad = padding(), Lp = L + 2 * pad;
    const RowMatrix wf = flat_weights();
    RowMatrix gw = RowMatrix::Zero(wf.rows(), wf.cols());
    Tensor3 dx;
    if (need_input_grad)
      dx = Tensor3(cached_shape_);
    RowMatrix dxt;
    const auto eo = static_cast<Eigen::Index>(out_), ei = static_cast<Eigen::Index>(in_),
               el = static_cast<Eigen::Index>(L), elp = static_cast<Eigen::Index>(Lp);
    for (std::size_t b = 0; b < B; ++b) {
      ConstMatMap G(g.sample(b), eo, el);
      // plain loop: Eigen's vectorized row sum peels by address, so the
      // rounding would depend on where the buffer landed
      for (std::size_t o = 0; o < out_; ++o) {
        const double *gr = g.row(b, o);
        double s = 0.0;
        for (std::size_t t = 0; t < L; ++t)
          s += gr[t];
        b_.grad[o] += s;
      }
      const double *xt = padded_.data() + b * Lp * in_;
      gw.noalias() += G * im2col(xt, L);
      if (need_input_grad) {
        dxt.setZero(elp, ei);
        for (std::size_t k = 0; k < k_; ++k)
          dxt.middleRows(static_cast<Eigen::Index>(k), el).noalias() +=
              G.transpose() * wf.middleCols(static_cast<Eigen::Index>(k * in_), ei);
        MatMap(dx.sample(b), ei, el) = dxt.middleRows(static_cast<Eigen::Index>(pad), el).transpose();
      }
    }
    for (std::size_t o = 0; o < out_; ++o)
      for (std::size_t k = 0; k < k_; ++k)
        for (std::size_t i = 0; i < in_; ++i)
          w_.grad[(o * in_ + i) * k_ + k] += gw(static_cast<Eigen::Index>(o), static_cast<Eigen::Index>(k * in_ + i));
    return dx;
  }

  std::vector<Param *> params() override { return {&w_, &b_}; }
  std::unique_ptr<Layer> clone() const override { return std::make_unique<Conv1D>(*this); }

private:
  // Padded input stored time-major per sample: [B][L + 2 pad][in]. Rows
  // t .. t + kernel - 1 are then contiguous, so the im2col matrix is an
  // overlapping view rather than a copy.
  std::vector<double> pad_time_major(const Tensor3 &x) const {
    const std::size_t L = x.length(), pad = padding(), Lp = L + 2 * pad;
    std::vector<double> out(x.batch() * Lp * in_, 0.0);
    for (std::size_t b = 0; b < x.batch(); ++b)
      MatMap(out.data() + (b * Lp + pad) * in_, static_cast<Eigen::Index>(L), static_cast<Eigen::Index>(in_)) =
          ConstMatMap(x.sample(b), static_cast<Eigen::Index>(in_), static_cast<Eigen::Index>(L)).transpose();
    return out;
  }

  // [L, kernel * in] with entry (t, k * in + i) = x_padded[t + k][i].
  ConstStridedMap im2col(const double *xt, std::size_t L) const {
    return ConstStridedMap(xt, static_cast<Eigen::Index>(L), static_cast<Eigen::Index>(k_ * in_),
                           Eigen::OuterStride<>(static_cast<Eigen::Index>(in_)));
  }

  // [out, kernel * in] with entry (o, k * in + i) = w[o][i][k].
  RowMatrix flat_weights() const {
    RowMatrix wf(static_cast<Eigen::Index>(out_), static_cast<Eigen::Index>(k_ * in_));
    for (std::size_t o = 0; o < out_; ++o)
      for (std::size_t i = 0; i < in_; ++i)
        for (std::size_t k = 0; k < k_; ++k)
          wf(static_cast<Eigen::Index>(o), static_cast<Eigen::Index>(k * in_ + i)) = w_.value[(o * in_ + i) * k_ + k];
    return wf;
  }

  Tensor3 run(const std::vector<double> &padded, std::size_t B, std::size_t L) const {
    const std::size_t Lp = L + 2 * padding();
    const RowMatrix wf = flat_weights();
    Tensor3 y(B, out_, L);
    const auto eo = static_cast<Eigen::Index>(out_), el = static_cast<Eigen::Index>(L);
    Eigen::Map<const Eigen::VectorXd> bias(b_.value.data(), eo);
    for (std::size_t b = 0; b < B; ++b) {
      MatMap Y(y.sample(b), eo, el);
      Y.noalias() = wf * im2col(padded.data() + b * Lp * in_, L).transpose();
      Y.colwise() += bias;
    }
    return y;
  }

  std::size_t in_, out_, k_;
  Param w_, b_;
  std::vector<double> padded_;
  Shape cached_shape_;
};

//------------------------------------------------------------------------------
// BatchNorm

/// Per-channel normalization over (batch x length) with learnable scale and
/// shift. Train mode uses batch statistics and updates running statistics
/// with the given momentum; infer mode (and frozen layers) use the running
/// statistics.
class BatchNorm final : public Layer {
public:
  explicit BatchNorm(std::size_t channels, double eps = 1e-5, double momentum = 0.1)
      : c_(channels), eps_(eps), momentum_(momentum), gamma_("scale", channels),
        beta_("shift", channels), running_mean_(channels, 0.0), running_var_(channels, 1.0) {
    if (channels == 0)
      throw ConfigError("BatchNorm: channels must be positive");
    std::ranges::fill(gamma_.value, 1.0);
  }

  Param &scale() { return gamma_; }
  Param &shift() { return beta_; }
  std::vector<double> &running_mean() { return running_mean_; }
  std::vector<double> &running_var() { return running_var_; }
  const std::vector<double> &running_mean() const { return running_mean_; }
  const std::vector<double> &running_var() const { return running_var_; }

  LayerKind kind() const override { return LayerKind::BatchNorm; }
  nlohmann::ordered_json config() const override {
    return {{"channels", c_}, {"eps", eps_}, {"momentum", momentum_}};
  }
  Shape output_shape(const Shape &in) const override {
    detail::check_channels(in, c_, "BatchNorm");
    return in;
  }

  Tensor3 forward(const Tensor3 &x, Mode mode) override {
    output_shape(x.shape);
    const std::size_t B = x.batch(), L = x.length();
    const double n = static_cast<double>(B * L);
    used_batch_stats_ = mode == Mode::Train && !frozen_;
    xhat_ = Tensor3(x.shape);
    inv_std_.assign(c_, 0.0);
    Tensor3 y(x.shape);
    for (std::size_t c = 0; c < c_; ++c) {
      double mean, var;
      if (used_batch_stats_) {
        mean = 0.0;
        for (std::size_t b = 0; b < B; ++b)
          for (std::size_t t = 0; t < L; ++t)
            mean += x(b, c, t);
        mean /= n;
        var = 0.0;
        for (std::size_t b = 0; b < B; ++b)
          for (std::size_t t = 0; t < L; ++t) {
            const double d = x(b, c, t) - mean;
            var += d * d;
          }
        var /= n;
        const double unbiased = n > 1.0 ? var * n / (n - 1.0) : var;
        running_mean_[c] = (1.0 - momentum_) * running_mean_[c] + momentum_ * mean;
        running_var_[c] = (1.0 - momentum_) * running_var_[c] + momentum_ * unbiased;
      } else {
        mean = running_mean_[c];
        var = running_var_[c];
      }
      const double inv = 1.0 / std::sqrt(var + eps_);
      inv_std_[c] = inv;
      for (std::size_t b = 0; b < B; ++b) {
        const double *xr = x.row(b, c);
        double *hr = xhat_.row(b, c);
        double *yr = y.row(b, c);
        for (std::size_t t = 0; t < L; ++t) {
          hr[t] = (xr[t] - mean) * inv;
          yr[t] = gamma_.value[c] * hr[t] + beta_.value[c];
        }
      }
    }
    return y;
  }

  Tensor3 infer(const Tensor3 &x) const override {
    output_shape(x.shape);
    Tensor3 y(x.shape);
    for (std::size_t c = 0; c < c_; ++c) {
      const double inv = 1.0 / std::sqrt(running_var_[c] + eps_);
      const double a = gamma_.value[c] * inv;
      const double off = beta_.value[c] - a * running_mean_[c];
      for (std::size_t b = 0; b < x.batch(); ++b) {
        const double *xr = x.row(b, c);
        double *yr = y.row(b, c);
        for (std::size_t t = 0; t < x.length(); ++t)
          yr[t] = a * xr[t] + off;
      }
    }
    return y;
  }

  Tensor3 backward(const Tensor3 &g, bool need_input_grad) override {
    if (g.shape != xhat_.shape)
      throw ShapeError("BatchNorm::backward: gradient shape mismatch");
    const std::size_t B = g.batch(), L = g.length();
    const double n = static_cast<double>(B * L);
    Tensor3 dx;
    if (need_input_grad)
      dx = Tensor3(g.shape);
    for (std::size_t c = 0; c < c_; ++c) {
      double sum_g = 0.0, sum_gx = 0.0;
      for (std::size_t b = 0; b < B; ++b) {
        const double *gr = g.row(b, c);
        const double *hr = xhat_.row(b, c);
        for (std::size_t t = 0; t < L; ++t) {
          sum_g += gr[t];
          sum_gx += gr[t] * hr[t];
        }
      }
      gamma_.grad[c] += sum_gx;
      beta_.grad[c] += sum_g;
      if (!need_input_grad)
        continue;
      const double gam = gamma_.value[c], inv = inv_std_[c];
      for (std::size_t b = 0; b < B; ++b) {
        const double *gr = g.row(b, c);
        const double *hr = xhat_.row(b, c);
        double *dr = dx.row(b, c);
        if (used_batch_stats_) {
          // d/dx of the batch-normalized value, statistics included.
          const double k = gam * inv / n;
          for (std::size_t t = 0; t < L; ++t)
            dr[t] = k * (n * gr[t] - sum_g - hr[t] * sum_gx);
        } else {
          for (std::size_t t = 0; t < L; ++t)
            dr[t] = gam * inv * gr[t];
        }
      }
    }
    return dx;
  }

  std::vector<Param *> params() override { return {&gamma_, &beta_}; }
  std::vector<std::vector<double> *> buffers() override { return {&running_mean_, &running_var_}; }
  std::unique_ptr<Layer> clone() const override { return std::make_unique<BatchNorm>(*this); }

private:
  std::size_t c_;
  double eps_, momentum_;
  Param gamma_, beta_;
  std::vector<double> running_mean_, running_var_;
  Tensor3 xhat_;
  std::vector<double> inv_std_;
  bool used_batch_stats_ = false;
};

//------------------------------------------------------------------------------
// ReLU

class ReLU final : public Layer {
public:
  LayerKind kind() const override { return LayerKind::ReLU; }
  nlohmann::ordered_json config() const override { return nlohmann::ordered_json::object(); }
  Shape output_shape(const Shape &in) const override { return in; }

  Tensor3 forward(const Tensor3 &x, Mode) override {
    input_ = x;
    return infer(x);
  }
  Tensor3 infer(const Tensor3 &x) const override {
    Tensor3 y(x.shape);
    for (std::size_t i = 0; i < x.size(); ++i)
      y.values[i] = x.values[i] > 0.0 ? x.values[i] : 0.0;
    return y;
  }
  Tensor3 backward(const Tensor3 &g, bool need_input_grad) override {
    if (!need_input_grad)
      return {};
    if (g.shape != input_.shape)
      throw ShapeError("ReLU::backward: gradient shape mismatch");
    Tensor3 dx(g.shape);
    for (std::size_t i = 0; i < g.size(); ++i)
      dx.values[i] = input_.values[i] > 0.0 ? g.values[i] : 0.0;
    return dx;
  }
  std::unique_ptr<Layer> clone() const override { return std::make_unique<ReLU>(*this); }

private:
  Tensor3 input_;
};

//------------------------------------------------------------------------------
// MaxPool1D

/// out[b][c][j] = max over x[b][c][j*stride .. j*stride + window). The
/// first maximal position in each window receives the gradient.
class MaxPool1D final : public Layer {
public:
  MaxPool1D(std::size_t window, std::size_t stride) : window_(window), stride_(stride) {
    if (window == 0 || stride == 0)
      throw ConfigError("MaxPool1D: window and stride must be positive");
  }

  LayerKind kind() const override { return LayerKind::MaxPool1D; }
  nlohmann::ordered_json config() const override { return {{"window", window_}, {"stride", stride_}}; }
  Shape output_shape(const Shape &in) const override {
    if (in.length < window_)
      throw ShapeError("MaxPool1D: window " + std::to_string(window_) + " exceeds length " +
                       std::to_string(in.length));
    return {in.batch, in.channels, (in.length - window_) / stride_ + 1};
  }

  Tensor3 forward(const Tensor3 &x, Mode) override {
    in_shape_ = x.shape;
    return pool(x, &argmax_);
  }
  Tensor3 infer(const Tensor3 &x) const override { return pool(x, nullptr); }

  Tensor3 backward(const Tensor3 &g, bool need_input_grad) override {
    if (!need_input_grad)
      return {};
    if (g.size() != argmax_.size())
      throw ShapeError("MaxPool1D::backward: gradient shape mismatch");
    Tensor3 dx(in_shape_);
    for (std::size_t i = 0; i < g.size(); ++i)
      dx.values[argmax_[i]] += g.values[i];
    return dx;
  }

  const std::vector<std::size_t> &argmax() const { return argmax_; }
  std::unique_ptr<Layer> clone() const override { return std::make_unique<MaxPool1D>(*this); }

private:
  Tensor3 pool(const Tensor3 &x, std::vector<std::size_t> *arg) const {
    const Shape os = output_shape(x.shape);
    Tensor3 y(os);
    if (arg)
      arg->assign(os.size(), 0);
    for (std::size_t b = 0; b < os.batch; ++b)
      for (std::size_t c = 0; c < os.channels; ++c) {
        const double *xr = x.row(b, c);
        double *yr = y.row(b, c);
        const std::size_t base = (b * x.channels() + c) * x.length();
        for (std::size_t j = 0; j < os.length; ++j) {
          const std::size_t s = j * stride_;
          std::size_t best = s;
          for (std::size_t t = s + 1; t < s + window_; ++t)
            if (xr[t] > xr[best])
              best = t;
          yr[j] = xr[best];
          if (arg)
            (*arg)[(b * os.channels + c) * os.length + j] = base + best;
        }
      }
    return y;
  }

  std::size_t window_, stride_;
  std::vector<std::size_t> argmax_;
  Shape in_shape_;
};

//------------------------------------------------------------------------------
// Dropout

/// Inverted dropout: in train mode each element is zeroed with probability
/// `rate` and survivors are scaled by 1 / (1 - rate). Identity at inference.
class Dropout final : public Layer {
public:
  explicit Dropout(double rate, std::uint64_t seed = 0) : rate_(rate), rng_(seed) {
    if (!(rate >= 0.0 && rate < 1.0))
      throw ConfigError("Dropout: rate must lie in [0, 1)");
  }

  double rate() const { return rate_; }
  LayerKind kind() const override { return LayerKind::Dropout; }
  nlohmann::ordered_json config() const override { return {{"rate", rate_}}; }
  Shape output_shape(const Shape &in) const override { return in; }
  void reseed(std::uint64_t seed) override { rng_ = Rng(seed); }

  Tensor3 forward(const Tensor3 &x, Mode mode) override {
    active_ = mode == Mode::Train && rate_ > 0.0;
    if (!active_)
      return x;
    mask_.assign(x.size(), 0.0);
    const double keep = 1.0 / (1.0 - rate_);
    Tensor3 y(x.shape);
    for (std::size_t i = 0; i < x.size(); ++i) {
      mask_[i] = rng_.uniform() < rate_ ? 0.0 : keep;
      y.values[i] = x.values[i] * mask_[i];
    }
    return y;
  }
  Tensor3 infer(const Tensor3 &x) const override { return x; }

  Tensor3 backward(const Tensor3 &g, bool need_input_grad) override {
    if (!need_input_grad)
      return {};
    if (!active_)
      return g;
    Tensor3 dx(g.shape);
    for (std::size_t i = 0; i < g.size(); ++i)
      dx.values[i] = g.values[i] * mask_[i];
    return dx;
  }
  std::unique_ptr<Layer> clone() const override { return std::make_unique<Dropout>(*this); }

private:
  double rate_;
  Rng rng_;
  std::vector<double> mask_;
  bool active_ = false;
};

//------------------------------------------------------------------------------
// FullyConnected

/// Flattens [B, C, L] to B rows of C*L features; out = W x + b as [B, out, 1].
class FullyConnected final : public Layer {
public:
  FullyConnected(std::size_t in, std::size_t out) : in_(in), out_(out), w_("weight", in * out), b_("bias", out) {
    if (in == 0 || out == 0)
      throw ConfigError("FullyConnected: sizes must be positive");
  }

  Param &weight() { return w_; }
  Param &bias() { return b_; }

  void init(Rng &rng) {
    const double lim = std::sqrt(1.0 / static_cast<double>(in_));
    detail::fill_uniform(w_.value, lim, rng);
    detail::fill_uniform(b_.value, lim, rng);
  }

  LayerKind kind() const override { return LayerKind::FullyConnected; }
  nlohmann::ordered_json config() const override { return {{"in", in_}, {"out", out_}}; }
  Shape output_shape(const Shape &in) const override {
    if (in.channels * in.length != in_)
      throw ShapeError("FullyConnected: expected " + std::to_string(in_) + " features, got " +
                       std::to_string(in.channels * in.length));
    return {in.batch, out_, 1};
  }

  Tensor3 forward(const Tensor3 &x, Mode) override {
    input_ = x;
    return infer(x);
  }
  Tensor3 infer(const Tensor3 &x) const override {
    const Shape os = output_shape(x.shape);
    Tensor3 y(os);
    const auto eb = static_cast<Eigen::Index>(x.batch()), ei = static_cast<Eigen::Index>(in_),
               eo = static_cast<Eigen::Index>(out_);
    ConstMatMap X(x.values.data(), eb, ei);
    ConstMatMap W(w_.value.data(), eo, ei);
    MatMap Y(y.values.data(), eb, eo);
    Y.noalias() = X * W.transpose();
    Y.rowwise() += Eigen::Map<const Eigen::RowVectorXd>(b_.value.data(), eo);
    return y;
  }
  Tensor3 backward(const Tensor3 &g, bool need_input_grad) override {
    const auto eb = static_cast<Eigen::Index>(input_.batch()), ei = static_cast<Eigen::Index>(in_),
               eo = static_cast<Eigen::Index>(out_);
    if (g.size() != input_.batch() * out_)
      throw ShapeError("FullyConnected::backward: gradient shape mismatch");
    ConstMatMap G(g.values.data(), eb, eo);
    ConstMatMap X(input_.values.data(), eb, ei);
    MatMap(w_.grad.data(), eo, ei).noalias() += G.transpose() * X;
    Eigen::Map<Eigen::RowVectorXd>(b_.grad.data(), eo) += G.colwise().sum();
    if (!need_input_grad)
      return {};
    Tensor3 dx(input_.shape);
    MatMap(dx.values.data(), eb, ei).noalias() = G * ConstMatMap(w_.value.data(), eo, ei);
    return dx;
  }

  std::vector<Param *> params() override { return {&w_, &b_}; }
  std::unique_ptr<Layer> clone() const override { return std::make_unique<FullyConnected>(*this); }

private:
  std::size_t in_, out_;
  Param w_, b_;
  Tensor3 input_;
};

//------------------------------------------------------------------------------
// LSTM

/// Single LSTM layer over the length axis: input [B, input_size, T] gives
/// the hidden sequence [B, hidden, T]. Gate rows are ordered input, forget,
/// cell candidate, output; one bias per gate unit. Zero initial state.
class LSTMLayer final : public Layer {
public:
  LSTMLayer(std::size_t input_size, std::size_t hidden)
      : in_(input_size), h_(hidden), w_ih_("weight_ih", 4 * hidden * input_size),
        w_hh_("weight_hh", 4 * hidden * hidden), b_("bias", 4 * hidden) {
    if (input_size == 0 || hidden == 0)
      throw ConfigError("LSTMLayer: sizes must be positive");
  }

  Param &weight_ih() { return w_ih_; }
  Param &weight_hh() { return w_hh_; }
  Param &bias() { return b_; }
  std::size_t hidden() const { return h_; }

  void init(Rng &rng) {
    const double lim = std::sqrt(1.0 / static_cast<double>(h_));
    detail::fill_uniform(w_ih_.value, lim, rng);
    detail::fill_uniform(w_hh_.value, lim, rng);
    detail::fill_uniform(b_.value, lim, rng);
  }

  LayerKind kind() const override { return LayerKind::LSTM; }
  nlohmann::ordered_json config() const override { return {{"input_size", in_}, {"hidden", h_}}; }
  Shape output_shape(const Shape &in) const override {
    detail::check_channels(in, in_, "LSTMLayer");
    return {in.batch, h_, in.length};
  }

  Tensor3 forward(const Tensor3 &x, Mode) override {
    output_shape(x.shape);
    cache_ = Cache{};
    cache_.shape = x.shape;
    return run(x, &cache_);
  }
  Tensor3 infer(const Tensor3 &x) const override {
    output_shape(x.shape);
    return run(x, nullptr);
  }

  Tensor3 backward(const Tensor3 &g, bool need_input_grad) override {
    const Shape in = cache_.shape;
    const std::size_t B = in.batch, T = in.length, H = h_;
    if (g.shape != Shape{B, H, T})
      throw ShapeError("LSTMLayer::backward: gradient shape mismatch");
    const auto eb = static_cast<Eigen::Index>(B), eh = static_cast<Eigen::Index>(H),
               eh4 = static_cast<Eigen::Index>(4 * H), ei = static_cast<Eigen::Index>(in_);
    ConstMatMap Whh(w_hh_.value.data(), eh4, eh);
    MatMap gWhh(w_hh_.grad.data(), eh4, eh);
    RowMatrix dz_all(static_cast<Eigen::Index>(T * B), eh4);
    RowMatrix dh_next = RowMatrix::Zero(eb, eh), dc_next = RowMatrix::Zero(eb, eh);
    for (std::size_t tt = T; tt-- > 0;) {
      const auto off = static_cast<Eigen::Index>(tt * B);
      auto gates = cache_.gates.middleRows(off, eb); // i f g o (activated)
      auto tc = cache_.tanh_c.middleRows(off, eb);
      RowMatrix dh = dh_next;
      for (std::size_t b = 0; b < B; ++b)
        for (std::size_t j = 0; j < H; ++j)
          dh(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(j)) += g(b, j, tt);
      auto dz = dz_all.middleRows(off, eb);
      for (Eigen::Index b = 0; b < eb; ++b)
        for (Eigen::Index j = 0; j < eh; ++j) {
          const double ig = gates(b, j), fg = gates(b, eh + j), gg = gates(b, 2 * eh + j),
                       og = gates(b, 3 * eh + j);
          const double c_prev = tt > 0 ? cache_.c(off - eb + b, j) : 0.0;
          const double dho = dh(b, j);
          const double dc = dho * og * (1.0 - tc(b, j) * tc(b, j)) + dc_next(b, j);
          dz(b, j) = dc * gg * ig * (1.0 - ig);
          dz(b, eh + j) = dc * c_prev * fg * (1.0 - fg);
          dz(b, 2 * eh + j) = dc * ig * (1.0 - gg * gg);
          dz(b, 3 * eh + j) = dho * tc(b, j) * og * (1.0 - og);
          dc_next(b, j) = dc * fg;
        }
      if (tt > 0) {
        gWhh.noalias() += dz.transpose() * cache_.h.middleRows(off - eb, eb);
      }
      dh_next.noalias() = dz * Whh;
    }
    Eigen::Map<Eigen::RowVectorXd>(b_.grad.data(), eh4) += dz_all.colwise().sum();
    MatMap(w_ih_.grad.data(), eh4, ei).noalias() += dz_all.transpose() * cache_.x;
    if (!need_input_grad)
      return {};
    RowMatrix dx_all = dz_all * ConstMatMap(w_ih_.value.data(), eh4, ei);
    Tensor3 dx(in);
    for (std::size_t t = 0; t < T; ++t)
      for (std::size_t b = 0; b < B; ++b)
        for (std::size_t i = 0; i < in_; ++i)
          dx(b, i, t) = dx_all(static_cast<Eigen::Index>(t * B + b), static_cast<Eigen::Index>(i));
    return dx;
  }

  std::vector<Param *> params() override { return {&w_ih_, &w_hh_, &b_}; }
  std::unique_ptr<Layer> clone() const override { return std::make_unique<LSTMLayer>(*this); }

private:
  // Rows are indexed t * B + b.
  struct Cache {
    Shape shape;
    RowMatrix x;      // [T*B, in]
    RowMatrix gates;  // [T*B, 4H] activated
    RowMatrix c;      // [T*B, H]
    RowMatrix tanh_c; // [T*B, H]
    RowMatrix h;      // [T*B, H]
  };

  static double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

  Tensor3 run(const Tensor3 &x, Cache *cache) const {
    const std::size_t B = x.batch(), T = x.length(), H = h_;
    const auto eb = static_cast<Eigen::Index>(B), eh = static_cast<Eigen::Index>(H),
               eh4 = static_cast<Eigen::Index>(4 * H), ei = static_cast<Eigen::Index>(in_);
    RowMatrix xs(static_cast<Eigen::Index>(T * B), ei);
    for (std::size_t b = 0; b < B; ++b)
      for (std::size_t i = 0; i < in_; ++i) {
        const double *r = x.row(b, i);
        for (std::size_t t = 0; t < T; ++t)
          xs(static_cast<Eigen::Index>(t * B + b), static_cast<Eigen::Index>(i)) = r[t];
      }
    RowMatrix zx = xs * ConstMatMap(w_ih_.value.data(), eh4, ei).transpose();
    zx.rowwise() += Eigen::Map<const Eigen::RowVectorXd>(b_.value.data(), eh4);
    ConstMatMap Whh(w_hh_.value.data(), eh4, eh);

    RowMatrix h = RowMatrix::Zero(eb, eh), c = RowMatrix::Zero(eb, eh);
    if (cache) {
      cache->gates.resize(static_cast<Eigen::Index>(T * B), eh4);
      cache->c.resize(static_cast<Eigen::Index>(T * B), eh);
      cache->tanh_c.resize(static_cast<Eigen::Index>(T * B), eh);
      cache->h.resize(static_cast<Eigen::Index>(T * B), eh);
    }
    Tensor3 y(B, H, T);
    RowMatrix z(eb, eh4);
    for (std::size_t t = 0; t < T; ++t) {
      const auto off = static_cast<Eigen::Index>(t * B);
      z.noalias() = zx.middleRows(off, eb);
      z.noalias() += h * Whh.transpose();
      for (Eigen::Index b = 0; b < eb; ++b)
        for (Eigen::Index j = 0; j < eh; ++j) {
          const double ig = sigmoid(z(b, j));
          const double fg = sigmoid(z(b, eh + j));
          const double gg = std::tanh(z(b, 2 * eh + j));
          const double og = sigmoid(z(b, 3 * eh + j));
          const double cn = fg * c(b, j) + ig * gg;
          const double tcn = std::tanh(cn);
          c(b, j) = cn;
          h(b, j) = og * tcn;
          y(static_cast<std::size_t>(b), static_cast<std::size_t>(j), t) = h(b, j);
          if (cache) {
            cache->gates(off + b, j) = ig;
            cache->gates(off + b, eh + j) = fg;
            cache->gates(off + b, 2 * eh + j) = gg;
            cache->gates(off + b, 3 * eh + j) = og;
            cache->c(off + b, j) = cn;
            cache->tanh_c(off + b, j) = tcn;
          }
        }
      if (cache)
        cache->h.middleRows(off, eb) = h;
    }
    if (cache)
      cache->x = std::move(xs);
    return y;
  }

  std::size_t in_, h_;
  Param w_ih_, w_hh_, b_;
  Cache cache_;
};

//------------------------------------------------------------------------------
// Sequence helpers

/// Keeps the final time step: [B, C, T] -> [B, C, 1].
class LastStep final : public Layer {
public:
  LayerKind kind() const override { return LayerKind::LastStep; }
  nlohmann::ordered_json config() const override { return nlohmann::ordered_json::object(); }
  Shape output_shape(const Shape &in) const override {
    if (in.length == 0)
      throw ShapeError("LastStep: empty sequence");
    return {in.batch, in.channels, 1};
  }
  Tensor3 forward(const Tensor3 &x, Mode) override {
    in_shape_ = x.shape;
    return infer(x);
  }
  Tensor3 infer(const Tensor3 &x) const override {
    Tensor3 y(output_shape(x.shape));
    for (std::size_t b = 0; b < x.batch(); ++b)
      for (std::size_t c = 0; c < x.channels(); ++c)
        y(b, c, 0) = x(b, c, x.length() - 1);
    return y;
  }
  Tensor3 backward(const Tensor3 &g, bool need_input_grad) override {
    if (!need_input_grad)
      return {};
    Tensor3 dx(in_shape_);
    for (std::size_t b = 0; b < in_shape_.batch; ++b)
      for (std::size_t c = 0; c < in_shape_.channels; ++c)
        dx(b, c, in_shape_.length - 1) = g(b, c, 0);
    return dx;
  }
  std::unique_ptr<Layer> clone() const override { return std::make_unique<LastStep>(*this); }

private:
  Shape in_shape_;
};

/// Keeps every stride-th time step starting at 0.
class TemporalStride final : public Layer {
public:
  explicit TemporalStride(std::size_t stride) : stride_(stride) {
    if (stride == 0)
      throw ConfigError("TemporalStride: stride must be positive");
  }
  LayerKind kind() const override { return LayerKind::TemporalStride; }
  nlohmann::ordered_json config() const override { return {{"stride", stride_}}; }
  Shape output_shape(const Shape &in) const override {
    return {in.batch, in.channels, (in.length + stride_ - 1) / stride_};
  }
  Tensor3 forward(const Tensor3 &x, Mode) override {
    in_shape_ = x.shape;
    return infer(x);
  }
  Tensor3 infer(const Tensor3 &x) const override {
    Tensor3 y(output_shape(x.shape));
    for (std::size_t b = 0; b < x.batch(); ++b)
      for (std::size_t c = 0; c < x.channels(); ++c)
        for (std::size_t j = 0; j < y.length(); ++j)
          y(b, c, j) = x(b, c, j * stride_);
    return y;
  }
  Tensor3 backward(const Tensor3 &g, bool need_input_grad) override {
    if (!need_input_grad)
      return {};
    Tensor3 dx(in_shape_);
    for (std::size_t b = 0; b < g.batch(); ++b)
      for (std::size_t c = 0; c < g.channels(); ++c)
        for (std::size_t j = 0; j < g.length(); ++j)
          dx(b, c, j * stride_) = g(b, c, j);
    return dx;
  }
  std::unique_ptr<Layer> clone() const override { return std::make_unique<TemporalStride>(*this); }

private:
  std::size_t stride_;
  Shape in_shape_;
};

/// Softmax over channels of a [B, C, 1] tensor (max-subtracted).
class Softmax final : public Layer {
public:
  LayerKind kind() const override { return LayerKind::Softmax; }
  nlohmann::ordered_json config() const override { return nlohmann::ordered_json::object(); }
  Shape output_shape(const Shape &in) const override {
    if (in.length != 1)
      throw ShapeError("Softmax: expected length 1, got " + std::to_string(in.length));
    return in;
  }
  Tensor3 forward(const Tensor3 &x, Mode) override {
    out_ = infer(x);
    return out_;
  }
  Tensor3 infer(const Tensor3 &x) const override {
    output_shape(x.shape);
    Tensor3 y(x.shape);
    for (std::size_t b = 0; b < x.batch(); ++b) {
      const double *xr = x.sample(b);
      double *yr = y.sample(b);
      const double mx = *std::max_element(xr, xr + x.channels());
      double sum = 0.0;
      for (std::size_t c = 0; c < x.channels(); ++c)
        sum += yr[c] = std::exp(xr[c] - mx);
      for (std::size_t c = 0; c < x.channels(); ++c)
        yr[c] /= sum;
    }
    return y;
  }
  Tensor3 backward(const Tensor3 &g, bool need_input_grad) override {
    if (!need_input_grad)
      return {};
    if (g.shape != out_.shape)
      throw ShapeError("Softmax::backward: gradient shape mismatch");
    Tensor3 dx(g.shape);
    for (std::size_t b = 0; b < g.batch(); ++b) {
      const double *p = out_.sample(b);
      const double *gr = g.sample(b);
      double dot = 0.0;
      for (std::size_t c = 0; c < g.channels(); ++c)
        dot += p[c] * gr[c];
      for (std::size_t c = 0; c < g.channels(); ++c)
        dx(b, c, 0) = p[c] * (gr[c] - dot);
    }
    return dx;
  }
  std::unique_ptr<Layer> clone() const override { return std::make_unique<Softmax>(*this); }

private:
  Tensor3 out_;
};

/// Builds an uninitialized layer from kind_name() and config().
inline std::unique_ptr<Layer> make_layer(LayerKind kind, const nlohmann::json &cfg) {
  auto sz = [&](const char *key) { return cfg.at(key).get<std::size_t>(); };
  try {
    switch (kind) {
    case LayerKind::Conv1D:
      return std::make_unique<Conv1D>(sz("in_channels"), sz("out_channels"), sz("kernel"));
    case LayerKind::BatchNorm:
      return std::make_unique<BatchNorm>(sz("channels"), cfg.at("eps").get<double>(),
                                         cfg.at("momentum").get<double>());
    case LayerKind::ReLU:
      return std::make_unique<ReLU>();
    case LayerKind::MaxPool1D:
      return std::make_unique<MaxPool1D>(sz("window"), sz("stride"));
    case LayerKind::Dropout:
      return std::make_unique<Dropout>(cfg.at("rate").get<double>());
    case LayerKind::FullyConnected:
      return std::make_unique<FullyConnected>(sz("in"), sz("out"));
    case LayerKind::LSTM:
      return std::make_unique<LSTMLayer>(sz("input_size"), sz("hidden"));
    case LayerKind::LastStep:
      return std::make_unique<LastStep>();
    case LayerKind::TemporalStride:
      return std::make_unique<TemporalStride>(sz("stride"));
    case LayerKind::Softmax:
      return std::make_unique<Softmax>();
    }
  } catch (const nlohmann::json::exception &e) {
    throw ConfigError(std::string("layer config for ") + std::string(kind_name(kind)) + ": " + e.what());
  }
  throw ConfigError("unknown layer kind");
}

} // namespace exo::nn
