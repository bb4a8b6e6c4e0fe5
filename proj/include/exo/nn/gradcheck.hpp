#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "exo/nn/layers.hpp"
#include "exo/nn/loss.hpp"
#include "exo/random.hpp"

// Central finite-difference checks of layer backward passes. The scalar
// probed is L = sum(w * layer(x)) for a fixed random w, so backward(w)
// must reproduce dL/dx and dL/dparams.

namespace exo::nn {

struct GradCheckResult {
  std::string name;
  std::size_t cases = 0;
  std::size_t entries = 0;
  double max_rel_error = 0.0;
};

namespace detail {

inline double rel_error(double a, double n) {
  return std::abs(a - n) / std::max({std::abs(a), std::abs(n), 1e-6});
}

inline Tensor3 random_tensor(Shape s, Rng &rng) {
  Tensor3 t(s);
  for (auto &v : t.values)
    v = rng.normal();
  return t;
}

/// Distinct values spaced well beyond the probe step, shuffled, so no kink
/// (ReLU zero, pooling tie) lies within reach of the finite difference.
inline Tensor3 kink_free_tensor(Shape s, Rng &rng) {
  Tensor3 t(s);
  for (std::size_t i = 0; i < t.size(); ++i)
    t.values[i] = (static_cast<double>(i) + 0.5 - static_cast<double>(t.size()) / 2.0) * 0.05 + 0.013;
  rng.shuffle(std::span<double>(t.values));
  return t;
}

inline double weighted_sum(const Tensor3 &y, const Tensor3 &w) {
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i)
    s += y.values[i] * w.values[i];
  return s;
}

} // namespace detail

/// Max relative error between backward() and central differences (step h)
/// over every input entry and every parameter entry.
inline double check_layer_gradients(Layer &layer, const Tensor3 &x, Mode mode, Rng &rng, double h = 1e-5,
                                    std::size_t *entries = nullptr) {
  const Tensor3 y0 = layer.forward(x, mode);
  const Tensor3 w = detail::random_tensor(y0.shape, rng);
  layer.zero_grad();
  layer.forward(x, mode);
  const Tensor3 dx = layer.backward(w, true);
  std::vector<std::vector<double>> pgrads;
  for (auto *p : layer.params())
    pgrads.push_back(p->grad);

  auto probe = [&](double &slot, const Tensor3 &input) {
    const double keep = slot;
    slot = keep + h;
    const double fp = detail::weighted_sum(layer.forward(input, mode), w);
    slot = keep - h;
    const double fm = detail::weighted_sum(layer.forward(input, mode), w);
    slot = keep;
    return (fp - fm) / (2.0 * h);
  };

  double worst = 0.0;
  std::size_t count = 0;
  Tensor3 xp = x;
  for (std::size_t i = 0; i < xp.size(); ++i, ++count)
    worst = std::max(worst, detail::rel_error(dx.values[i], probe(xp.values[i], xp)));
  auto ps = layer.params();
  for (std::size_t k = 0; k < ps.size(); ++k)
    for (std::size_t i = 0; i < ps[k]->size(); ++i, ++count)
      worst = std::max(worst, detail::rel_error(pgrads[k][i], probe(ps[k]->value[i], x)));
  if (entries)
    *entries += count;
  return worst;
}

/// Same check for mean softmax cross-entropy with respect to the logits.
inline double check_cross_entropy_gradients(const Tensor3 &logits, std::span<const int> labels, double h = 1e-5) {
  const auto r = softmax_cross_entropy(logits, labels);
  Tensor3 z = logits;
  double worst = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    const double keep = z.values[i];
    z.values[i] = keep + h;
    const double fp = softmax_cross_entropy(z, labels).loss;
    z.values[i] = keep - h;
    const double fm = softmax_cross_entropy(z, labels).loss;
    z.values[i] = keep;
    worst = std::max(worst, detail::rel_error(r.grad.values[i], (fp - fm) / (2.0 * h)));
  }
  return worst;
}

/// Runs `cases` randomized small shapes per layer type.
inline std::vector<GradCheckResult> run_gradient_suite(std::uint64_t seed, std::size_t cases = 20) {
  Rng rng(seed);
  auto pick = [&](std::size_t lo, std::size_t hi) { return lo + static_cast<std::size_t>(rng.below(hi - lo + 1)); };
  auto init_params = [&](Layer &l) {
    for (auto *p : l.params())
      for (auto &v : p->value)
        v = rng.uniform(-0.8, 0.8);
  };

  std::vector<GradCheckResult> out;
  auto run = [&](std::string name, auto make_case) {
    GradCheckResult r{std::move(name)};
    for (std::size_t c = 0; c < cases; ++c) {
      r.max_rel_error = std::max(r.max_rel_error, make_case(r.entries));
      ++r.cases;
    }
    out.push_back(std::move(r));
  };

  run("conv1d", [&](std::size_t &n) {
    const std::size_t k = 2 * pick(0, 2) + 1;
    Conv1D layer(pick(1, 3), pick(1, 3), k);
    init_params(layer);
    const auto x = detail::random_tensor({pick(1, 3), layer.in_channels(), pick(1, 7)}, rng);
    return check_layer_gradients(layer, x, Mode::Train, rng, 1e-5, &n);
  });
  run("batchnorm_train", [&](std::size_t &n) {
    BatchNorm layer(pick(1, 3));
    init_params(layer);
    const std::size_t b = pick(1, 3), l = pick(b == 1 ? 2 : 1, 5);
    const auto x = detail::random_tensor({b, layer.scale().size(), l}, rng);
    return check_layer_gradients(layer, x, Mode::Train, rng, 1e-5, &n);
  });
  run("batchnorm_infer", [&](std::size_t &n) {
    BatchNorm layer(pick(1, 3));
    init_params(layer);
    for (auto &v : layer.running_mean())
      v = rng.normal();
    for (auto &v : layer.running_var())
      v = rng.uniform(0.2, 2.0);
    const auto x = detail::random_tensor({pick(1, 3), layer.scale().size(), pick(1, 5)}, rng);
    return check_layer_gradients(layer, x, Mode::Infer, rng, 1e-5, &n);
  });
  run("relu", [&](std::size_t &n) {
    ReLU layer;
    const auto x = detail::kink_free_tensor({pick(1, 3), pick(1, 3), pick(1, 6)}, rng);
    return check_layer_gradients(layer, x, Mode::Train, rng, 1e-5, &n);
  });
  run("maxpool1d", [&](std::size_t &n) {
    const std::size_t w = pick(1, 3), s = pick(1, 3);
    MaxPool1D layer(w, s);
    const auto x = detail::kink_free_tensor({pick(1, 3), pick(1, 3), w + pick(0, 6)}, rng);
    return check_layer_gradients(layer, x, Mode::Train, rng, 1e-5, &n);
  });
  run("fully_connected", [&](std::size_t &n) {
    const std::size_t c = pick(1, 4), l = pick(1, 3);
    FullyConnected layer(c * l, pick(1, 5));
    init_params(layer);
    const auto x = detail::random_tensor({pick(1, 4), c, l}, rng);
    return check_layer_gradients(layer, x, Mode::Train, rng, 1e-5, &n);
  });
  run("softmax", [&](std::size_t &n) {
    Softmax layer;
    const auto x = detail::random_tensor({pick(1, 4), pick(2, 6), 1}, rng);
    return check_layer_gradients(layer, x, Mode::Train, rng, 1e-5, &n);
  });
  run("softmax_cross_entropy", [&](std::size_t &n) {
    const std::size_t b = pick(1, 5), c = pick(2, 6);
    auto z = detail::random_tensor({b, c, 1}, rng);
    for (auto &v : z.values)
      v *= 2.0;
    std::vector<int> y(b);
    for (auto &v : y)
      v = static_cast<int>(rng.below(c));
    n += z.size();
    return check_cross_entropy_gradients(z, y);
  });
  run("lstm", [&](std::size_t &n) {
    LSTMLayer layer(pick(1, 4), pick(1, 4));
    init_params(layer);
    const auto x = detail::random_tensor({pick(1, 3), layer.weight_ih().size() / (4 * layer.hidden()), pick(1, 4)}, rng);
    return check_layer_gradients(layer, x, Mode::Train, rng, 1e-5, &n);
  });
  run("last_step", [&](std::size_t &n) {
    LastStep layer;
    const auto x = detail::random_tensor({pick(1, 3), pick(1, 3), pick(1, 5)}, rng);
    return check_layer_gradients(layer, x, Mode::Train, rng, 1e-5, &n);
  });
  return out;
}

} // namespace exo::nn
