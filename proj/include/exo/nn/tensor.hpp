#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "exo/errors.hpp"

namespace exo::nn {

/// [batch, channels, length] extents.
struct Shape {
  std::size_t batch = 0;
  std::size_t channels = 0;
  std::size_t length = 0;

  std::size_t size() const { return batch * channels * length; }
  bool operator==(const Shape &) const = default;

  std::string str() const {
    return "[" + std::to_string(batch) + ", " + std::to_string(channels) + ", " +
           std::to_string(length) + "]";
  }
};

/// Dense row-major batch of sequences: values[(b * channels + c) * length + t].
struct Tensor3 {
  Shape shape;
  std::vector<double> values;

  Tensor3() = default;
  explicit Tensor3(Shape s, double fill = 0.0) : shape(s), values(s.size(), fill) {}
  Tensor3(std::size_t b, std::size_t c, std::size_t l, double fill = 0.0)
      : Tensor3(Shape{b, c, l}, fill) {}

  std::size_t batch() const { return shape.batch; }
  std::size_t channels() const { return shape.channels; }
  std::size_t length() const { return shape.length; }
  std::size_t size() const { return values.size(); }

  double &operator()(std::size_t b, std::size_t c, std::size_t t) {
    return values[(b * shape.channels + c) * shape.length + t];
  }
  double operator()(std::size_t b, std::size_t c, std::size_t t) const {
    return values[(b * shape.channels + c) * shape.length + t];
  }

  double *row(std::size_t b, std::size_t c) { return values.data() + (b * shape.channels + c) * shape.length; }
  const double *row(std::size_t b, std::size_t c) const {
    return values.data() + (b * shape.channels + c) * shape.length;
  }
  double *sample(std::size_t b) { return values.data() + b * shape.channels * shape.length; }
  const double *sample(std::size_t b) const {
    return values.data() + b * shape.channels * shape.length;
  }
};

enum class Mode { Train, Infer };

} // namespace exo::nn
