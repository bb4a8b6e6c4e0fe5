#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "exo/errors.hpp"
#include "exo/nn/layers.hpp"
#include "exo/nn/loss.hpp"
#include "exo/nn/tensor.hpp"
#include "exo/random.hpp"

namespace exo::nn {

struct TrainConfig {
  std::size_t batch_size = 50;
  std::size_t epochs = 15;
  double learning_rate = 1e-3;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  std::uint64_t seed = 0;
  /// Extra layers to hold fixed, on top of those frozen on the model.
  std::set<std::size_t> frozen_layers;

  void validate() const {
    if (batch_size < 1)
      throw ConfigError("batch_size must be >= 1");
    if (epochs < 1)
      throw ConfigError("epochs must be >= 1");
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate))
      throw ConfigError("learning_rate must be positive");
    if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) || !(adam_beta2 >= 0.0 && adam_beta2 < 1.0))
      throw ConfigError("Adam betas must lie in [0, 1)");
    if (!(adam_epsilon > 0.0))
      throw ConfigError("adam_epsilon must be positive");
  }

  nlohmann::ordered_json to_json() const {
    return {{"batch_size", batch_size},   {"epochs", epochs},         {"learning_rate", learning_rate},
            {"adam_beta1", adam_beta1},   {"adam_beta2", adam_beta2}, {"adam_epsilon", adam_epsilon},
            {"seed", seed},               {"frozen_layers", frozen_layers}};
  }
};

/// A sequential network: layer stack, frozen set, optimizer step counter and
/// descriptive metadata (architecture definition, seed, epoch).
class Model {
public:
  Model() = default;
  Model(const Model &o) { *this = o; }
  Model &operator=(const Model &o) {
    if (this == &o)
      return *this;
    layers_.clear();
    for (const auto &l : o.layers_)
      layers_.push_back(l->clone());
    frozen_ = o.frozen_;
    step_ = o.step_;
    definition = o.definition;
    metadata = o.metadata;
    return *this;
  }
  Model(Model &&) noexcept = default;
  Model &operator=(Model &&) noexcept = default;

  /// Architecture description used to rebuild or report the model.
  nlohmann::ordered_json definition = nlohmann::ordered_json::object();
  /// Training metadata (seed, epoch, ...), carried through checkpoints.
  nlohmann::ordered_json metadata = nlohmann::ordered_json::object();

  void add(std::unique_ptr<Layer> layer) { layers_.push_back(std::move(layer)); }
  std::size_t size() const { return layers_.size(); }
  Layer &layer(std::size_t i) { return *layers_.at(i); }
  const Layer &layer(std::size_t i) const { return *layers_.at(i); }

  //-- freezing

  const std::set<std::size_t> &frozen_layers() const { return frozen_; }
  void set_frozen_layers(std::set<std::size_t> s) {
    for (auto i : s)
      if (i >= layers_.size())
        throw ArgumentError("frozen layer index " + std::to_string(i) + " out of range");
    frozen_ = std::move(s);
    for (std::size_t i = 0; i < layers_.size(); ++i)
      layers_[i]->set_frozen(frozen_.contains(i));
  }
  bool is_frozen(std::size_t i) const { return frozen_.contains(i); }

  std::size_t count_parameters(bool trainable_only = false) const {
    std::size_t n = 0;
    for (std::size_t i = 0; i < layers_.size(); ++i)
      if (!trainable_only || !frozen_.contains(i))
        n += layers_[i]->parameter_count();
    return n;
  }

  //-- optimizer state

  std::uint64_t step() const { return step_; }
  void set_step(std::uint64_t s) { step_ = s; }
  void reset_optimizer() {
    step_ = 0;
    for (auto &l : layers_)
      for (auto *p : l->params())
        p->reset_moments();
  }
  void zero_grad() {
    for (auto &l : layers_)
      l->zero_grad();
  }
  void reseed(std::uint64_t seed) {
    for (std::size_t i = 0; i < layers_.size(); ++i)
      layers_[i]->reseed(mix_seed(seed, i, 0xD50Full));
  }

  //-- passes

  std::vector<Shape> shape_trace(Shape in) const {
    std::vector<Shape> out;
    for (const auto &l : layers_) {
      in = l->output_shape(in);
      out.push_back(in);
    }
    return out;
  }

  /// Index one past the last layer producing logits (excludes a trailing
  /// softmax).
  std::size_t logits_end() const {
    return !layers_.empty() && layers_.back()->kind() == LayerKind::Softmax ? layers_.size() - 1
                                                                             : layers_.size();
  }

  /// Caching forward up to the logits.
  Tensor3 forward_logits(const Tensor3 &x, Mode mode) {
    Tensor3 h = x;
    for (std::size_t i = 0; i < logits_end(); ++i)
      h = layers_[i]->forward(h, mode);
    return h;
  }

  /// Backpropagates dL/dlogits, accumulating gradients in every layer at or
  /// above the lowest trainable one. Returns dL/dx only if asked.
  Tensor3 backward_logits(const Tensor3 &grad, bool need_input_grad = false) {
    const std::size_t end = logits_end();
    std::size_t lowest = end;
    for (std::size_t i = 0; i < end; ++i)
      if (!frozen_.contains(i) && layers_[i]->parameter_count() > 0) {
        lowest = i;
        break;
      }
    if (need_input_grad)
      lowest = 0;
    Tensor3 g = grad;
    for (std::size_t i = end; i-- > lowest;)
      g = layers_[i]->backward(g, i > lowest || need_input_grad);
    return g;
  }

  /// Side-effect-free class probabilities [B, classes, 1].
  Tensor3 predict(const Tensor3 &x) const {
    Tensor3 h = x;
    for (const auto &l : layers_)
      h = l->infer(h);
    return h;
  }

  /// Side-effect-free logits.
  Tensor3 infer_logits(const Tensor3 &x) const {
    Tensor3 h = x;
    for (std::size_t i = 0; i < logits_end(); ++i)
      h = layers_[i]->infer(h);
    return h;
  }

private:
  std::vector<std::unique_ptr<Layer>> layers_;
  std::set<std::size_t> frozen_;
  std::uint64_t step_ = 0;
};

/// One Adam update over every layer not in the model's frozen set or in
/// cfg.frozen_layers. Frozen layers are left untouched, moments included.
inline void adam_step(Model &model, const TrainConfig &cfg) {
  const std::uint64_t t = model.step() + 1;
  model.set_step(t);
  const double b1 = cfg.adam_beta1, b2 = cfg.adam_beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t));
  for (std::size_t i = 0; i < model.size(); ++i) {
    if (model.is_frozen(i) || cfg.frozen_layers.contains(i))
      continue;
    for (auto *p : model.layer(i).params()) {
      for (std::size_t k = 0; k < p->size(); ++k) {
        const double g = p->grad[k];
        p->m[k] = b1 * p->m[k] + (1.0 - b1) * g;
        p->v[k] = b2 * p->v[k] + (1.0 - b2) * g * g;
        const double mh = p->m[k] / c1;
        const double vh = p->v[k] / c2;
        p->value[k] -= cfg.learning_rate * mh / (std::sqrt(vh) + cfg.adam_epsilon);
      }
    }
  }
}

/// Forward, loss, backward and one Adam update on a mini-batch. Returns the
/// batch loss.
inline double train_step(Model &model, const Tensor3 &x, std::span<const int> labels, const TrainConfig &cfg) {
  model.zero_grad();
  const Tensor3 logits = model.forward_logits(x, Mode::Train);
  auto lr = softmax_cross_entropy(logits, labels);
  model.backward_logits(lr.grad);
  adam_step(model, cfg);
  return lr.loss;
}

/// FNV-1a over the raw bytes of every parameter and buffer.
inline std::uint64_t parameter_checksum(const Model &model) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto feed = [&](const std::vector<double> &v) {
    const auto *bytes = reinterpret_cast<const unsigned char *>(v.data());
    for (std::size_t i = 0; i < v.size() * sizeof(double); ++i) {
      h ^= bytes[i];
      h *= 0x100000001b3ULL;
    }
  };
  for (std::size_t i = 0; i < model.size(); ++i) {
    auto &l = const_cast<Layer &>(model.layer(i));
    for (auto *p : l.params())
      feed(p->value);
    for (auto *b : l.buffers())
      feed(*b);
  }
  return h;
}

} // namespace exo::nn
