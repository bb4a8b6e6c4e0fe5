#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>

#include "exo/errors.hpp"
#include "exo/nn/tensor.hpp"

namespace exo::nn {

struct LossResult {
  double loss = 0.0; // mean over the batch
  Tensor3 grad;      // dL/dlogits, same shape as the logits
};

/// Mean cross-entropy of softmax(logits) against integer labels. Logits are
/// [B, classes, 1]; the gradient (p - onehot) / B is returned alongside.
inline LossResult softmax_cross_entropy(const Tensor3 &logits, std::span<const int> labels) {
  const std::size_t B = logits.batch(), C = logits.channels();
  if (logits.length() != 1)
    throw ShapeError("softmax_cross_entropy: logits must have length 1");
  if (labels.size() != B)
    throw ShapeError("softmax_cross_entropy: " + std::to_string(labels.size()) + " labels for batch of " +
                     std::to_string(B));
  LossResult r;
  r.grad = Tensor3(logits.shape);
  if (B == 0)
    return r;
  for (std::size_t b = 0; b < B; ++b) {
    const int y = labels[b];
    if (y < 0 || static_cast<std::size_t>(y) >= C)
      throw ArgumentError("softmax_cross_entropy: label " + std::to_string(y) + " out of range [0, " +
                          std::to_string(C) + ")");
    const double *z = logits.sample(b);
    const double mx = *std::max_element(z, z + C);
    double sum = 0.0;
    for (std::size_t c = 0; c < C; ++c)
      sum += std::exp(z[c] - mx);
    const double log_sum = std::log(sum);
    r.loss += -(z[y] - mx - log_sum);
    for (std::size_t c = 0; c < C; ++c) {
      const double p = std::exp(z[c] - mx - log_sum);
      r.grad(b, c, 0) = (p - (static_cast<int>(c) == y ? 1.0 : 0.0)) / static_cast<double>(B);
    }
  }
  r.loss /= static_cast<double>(B);
  return r;
}

} // namespace exo::nn
