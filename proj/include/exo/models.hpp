#pragma once

#include <array>
#include <cstdint>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "exo/errors.hpp"
#include "exo/nn/checkpoint.hpp"
#include "exo/nn/layers.hpp"
#include "exo/nn/model.hpp"
#include "exo/random.hpp"

// The two classifier architectures: a four-block 1-D CNN and a two-layer
// LSTM, plus freezing helpers for transfer learning.

namespace exo::models {

struct CnnDef {
  std::size_t input_channels = 35;
  std::array<std::size_t, 4> conv_channels{10, 20, 30, 40};
  std::size_t kernel = 9;
  std::array<std::pair<std::size_t, std::size_t>, 3> pools{{{50, 50}, {10, 10}, {10, 10}}};
  double dropout = 0.2;
  std::size_t classes = 5;
  std::size_t input_length = 5000;
  double bn_eps = 1e-5;
  double bn_momentum = 0.1;

  /// Throws ConfigError unless the pooled length collapses to exactly 1.
  void validate() const {
    if (input_channels == 0 || classes < 2 || kernel == 0 || kernel % 2 == 0)
      throw ConfigError("CnnDef: input_channels > 0, classes >= 2 and an odd kernel are required");
    for (auto c : conv_channels)
      if (c == 0)
        throw ConfigError("CnnDef: conv channel counts must be positive");
    if (!(dropout >= 0.0 && dropout < 1.0))
      throw ConfigError("CnnDef: dropout must lie in [0, 1)");
    std::size_t len = input_length;
    for (auto [w, s] : pools) {
      if (w == 0 || s == 0 || len < w)
        throw ConfigError("CnnDef: pooling window " + std::to_string(w) + " does not fit length " +
                          std::to_string(len));
      len = (len - w) / s + 1;
    }
    if (len != 1)
      throw ConfigError("CnnDef: pooling leaves length " + std::to_string(len) + ", expected 1");
  }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json pj = nlohmann::ordered_json::array();
    for (auto [w, s] : pools)
      pj.push_back({w, s});
    return {{"arch", "cnn"},         {"input_channels", input_channels}, {"conv_channels", conv_channels},
            {"kernel", kernel},      {"pools", pj},                      {"dropout", dropout},
            {"classes", classes},    {"input_length", input_length},     {"bn_eps", bn_eps},
            {"bn_momentum", bn_momentum}};
  }
};

struct LstmDef {
  std::size_t input_size = 35;
  std::size_t layers = 2;
  std::size_t hidden = 100;
  double dropout = 0.2;
  std::size_t classes = 5;
  /// Keeps every stride-th time step before the recurrent layers; 1 = off.
  std::size_t temporal_stride = 1;

  void validate() const {
    if (input_size == 0 || layers == 0 || hidden == 0 || classes < 2 || temporal_stride == 0)
      throw ConfigError("LstmDef: sizes must be positive and classes >= 2");
    if (!(dropout >= 0.0 && dropout < 1.0))
      throw ConfigError("LstmDef: dropout must lie in [0, 1)");
  }

  nlohmann::ordered_json to_json() const {
    return {{"arch", "lstm"}, {"input_size", input_size}, {"layers", layers},   {"hidden", hidden},
            {"dropout", dropout}, {"classes", classes},   {"temporal_stride", temporal_stride}};
  }
};

inline nn::Model build_cnn(const CnnDef &def, std::uint64_t seed = 0) {
  def.validate();
  Rng rng(mix_seed(seed, 0xC44Eull));
  nn::Model m;
  std::size_t in = def.input_channels;
  for (std::size_t blk = 0; blk < 4; ++blk) {
    auto conv = std::make_unique<nn::Conv1D>(in, def.conv_channels[blk], def.kernel);
    conv->init(rng);
    m.add(std::move(conv));
    m.add(std::make_unique<nn::BatchNorm>(def.conv_channels[blk], def.bn_eps, def.bn_momentum));
    if (blk < 3) {
      m.add(std::make_unique<nn::ReLU>());
      m.add(std::make_unique<nn::MaxPool1D>(def.pools[blk].first, def.pools[blk].second));
    }
    in = def.conv_channels[blk];
  }
  m.add(std::make_unique<nn::Dropout>(def.dropout));
  auto fc = std::make_unique<nn::FullyConnected>(in, def.classes);
  fc->init(rng);
  m.add(std::move(fc));
  m.add(std::make_unique<nn::Softmax>());
  m.definition = def.to_json();
  m.reseed(seed);
  return m;
}

inline nn::Model build_lstm(const LstmDef &def, std::uint64_t seed = 0) {
  def.validate();
  Rng rng(mix_seed(seed, 0x1575ull));
  nn::Model m;
  if (def.temporal_stride > 1)
    m.add(std::make_unique<nn::TemporalStride>(def.temporal_stride));
  std::size_t in = def.input_size;
  for (std::size_t l = 0; l < def.layers; ++l) {
    auto cell = std::make_unique<nn::LSTMLayer>(in, def.hidden);
    cell->init(rng);
    m.add(std::move(cell));
    in = def.hidden;
  }
  m.add(std::make_unique<nn::LastStep>());
  m.add(std::make_unique<nn::Dropout>(def.dropout));
  auto fc = std::make_unique<nn::FullyConnected>(def.hidden, def.classes);
  fc->init(rng);
  m.add(std::move(fc));
  m.add(std::make_unique<nn::Softmax>());
  m.definition = def.to_json();
  m.reseed(seed);
  return m;
}

inline std::size_t count_parameters(const nn::Model &m, bool trainable_only = false) {
  return m.count_parameters(trainable_only);
}

inline bool is_cnn(const nn::Model &m) {
  return m.definition.contains("arch") && m.definition["arch"] == "cnn";
}

/// Marks every convolution and batch-norm layer frozen; the classifier head
/// stays trainable.
inline void freeze_feature_layers(nn::Model &m) {
  if (!is_cnn(m))
    throw UnsupportedError("freeze_feature_layers is defined for the CNN only");
  std::set<std::size_t> s = m.frozen_layers();
  for (std::size_t i = 0; i < m.size(); ++i) {
    const auto k = m.layer(i).kind();
    if (k == nn::LayerKind::Conv1D || k == nn::LayerKind::BatchNorm)
      s.insert(i);
  }
  m.set_frozen_layers(std::move(s));
}

inline void unfreeze(nn::Model &m) { m.set_frozen_layers({}); }

/// Rebuilds a definition stored on a model (or in a config) as a fresh model.
inline nn::Model build_from_definition(const nlohmann::json &def, std::uint64_t seed) {
  try {
    const auto arch = def.at("arch").get<std::string>();
    if (arch == "cnn") {
      CnnDef d;
      d.input_channels = def.at("input_channels").get<std::size_t>();
      d.conv_channels = def.at("conv_channels").get<std::array<std::size_t, 4>>();
      d.kernel = def.at("kernel").get<std::size_t>();
      const auto pools = def.at("pools");
      for (std::size_t i = 0; i < 3; ++i)
        d.pools[i] = {pools.at(i).at(0).get<std::size_t>(), pools.at(i).at(1).get<std::size_t>()};
      d.dropout = def.at("dropout").get<double>();
      d.classes = def.at("classes").get<std::size_t>();
      d.input_length = def.at("input_length").get<std::size_t>();
      d.bn_eps = def.at("bn_eps").get<double>();
      d.bn_momentum = def.at("bn_momentum").get<double>();
      return build_cnn(d, seed);
    }
    if (arch == "lstm") {
      LstmDef d;
      d.input_size = def.at("input_size").get<std::size_t>();
      d.layers = def.at("layers").get<std::size_t>();
      d.hidden = def.at("hidden").get<std::size_t>();
      d.dropout = def.at("dropout").get<double>();
      d.classes = def.at("classes").get<std::size_t>();
      d.temporal_stride = def.at("temporal_stride").get<std::size_t>();
      return build_lstm(d, seed);
    }
    throw ConfigError("unknown architecture '" + arch + "'");
  } catch (const nlohmann::json::exception &e) {
    throw ConfigError(std::string("model definition: ") + e.what());
  }
}

using nn::load_checkpoint;
using nn::save_checkpoint;

} // namespace exo::models
