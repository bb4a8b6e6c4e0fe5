#pragma once

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <functional>
#include <mutex>
#include <numeric>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "exo/dataset.hpp"
#include "exo/errors.hpp"
#include "exo/models.hpp"
#include "exo/nn/model.hpp"
#include "exo/random.hpp"

// Training, evaluation and the three studies (modality ablation, transfer
// learning, sensor-failure robustness) with multi-seed aggregation.

namespace exo::exp {

using data::Trial;
using nlohmann::ordered_json;

//------------------------------------------------------------------------------
// Metrics

inline std::string class_label(std::size_t c, std::size_t classes) {
  return classes == data::kNumClasses ? std::string(data::kLabelNames[c]) : std::to_string(c);
}

struct ClassMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

struct Metrics {
  double accuracy = 0.0;
  std::vector<ClassMetrics> per_class;
  /// confusion[true][predicted]
  std::vector<std::vector<std::size_t>> confusion;

  std::size_t total() const {
    std::size_t n = 0;
    for (const auto &r : confusion)
      n += std::accumulate(r.begin(), r.end(), std::size_t{0});
    return n;
  }

  ordered_json to_json() const {
    ordered_json pc = ordered_json::array();
    for (std::size_t c = 0; c < per_class.size(); ++c)
      pc.push_back({{"class", class_label(c, per_class.size())},
                    {"precision", per_class[c].precision},
                    {"recall", per_class[c].recall},
                    {"f1", per_class[c].f1}});
    return {{"accuracy", accuracy}, {"count", total()}, {"per_class", std::move(pc)}, {"confusion", confusion}};
  }
};

inline double f1_score(double precision, double recall) {
  return precision + recall > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
}

/// Accuracy, per-class precision / recall / F1 from a confusion matrix.
/// A class never predicted has precision 0; never present, recall 0.
inline Metrics metrics_from_confusion(std::vector<std::vector<std::size_t>> confusion) {
  const std::size_t k = confusion.size();
  if (k == 0)
    throw ArgumentError("metrics_from_confusion: empty matrix");
  for (const auto &r : confusion)
    if (r.size() != k)
      throw ArgumentError("metrics_from_confusion: matrix must be square");
  Metrics m;
  m.confusion = std::move(confusion);
  const std::size_t n = m.total();
  if (n == 0)
    throw ArgumentError("metrics_from_confusion: no samples");
  std::size_t correct = 0;
  m.per_class.resize(k);
  for (std::size_t c = 0; c < k; ++c) {
    correct += m.confusion[c][c];
    std::size_t predicted = 0, actual = 0;
    for (std::size_t j = 0; j < k; ++j) {
      predicted += m.confusion[j][c];
      actual += m.confusion[c][j];
    }
    auto &pc = m.per_class[c];
    const double tp = static_cast<double>(m.confusion[c][c]);
    pc.precision = predicted ? tp / static_cast<double>(predicted) : 0.0;
    pc.recall = actual ? tp / static_cast<double>(actual) : 0.0;
    pc.f1 = f1_score(pc.precision, pc.recall);
  }
  m.accuracy = static_cast<double>(correct) / static_cast<double>(n);
  return m;
}

inline Metrics compute_metrics(std::span<const int> predictions, std::span<const int> labels,
                               std::size_t classes = data::kNumClasses) {
  if (predictions.empty())
    throw ArgumentError("compute_metrics: empty input");
  if (predictions.size() != labels.size())
    throw ArgumentError("compute_metrics: " + std::to_string(predictions.size()) + " predictions for " +
                        std::to_string(labels.size()) + " labels");
  std::vector<std::vector<std::size_t>> conf(classes, std::vector<std::size_t>(classes, 0));
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int y = labels[i], p = predictions[i];
    if (y < 0 || p < 0 || static_cast<std::size_t>(y) >= classes || static_cast<std::size_t>(p) >= classes)
      throw ArgumentError("compute_metrics: class index out of range at position " + std::to_string(i));
    ++conf[static_cast<std::size_t>(y)][static_cast<std::size_t>(p)];
  }
  return metrics_from_confusion(std::move(conf));
}

struct Aggregate {
  double mean_accuracy = 0.0;
  double std_accuracy = 0.0;
  std::vector<ClassMetrics> mean_per_class;

  ordered_json to_json() const {
    ordered_json pc = ordered_json::array();
    for (std::size_t c = 0; c < mean_per_class.size(); ++c)
      pc.push_back({{"class", class_label(c, mean_per_class.size())},
                    {"precision", mean_per_class[c].precision},
                    {"recall", mean_per_class[c].recall},
                    {"f1", mean_per_class[c].f1}});
    return {{"mean_accuracy", mean_accuracy}, {"std_accuracy", std_accuracy}, {"mean_per_class", std::move(pc)}};
  }
};

/// Mean and sample (n - 1) standard deviation of accuracy; per-class
/// metrics averaged elementwise.
inline Aggregate aggregate_seeds(std::span<const Metrics> runs) {
  if (runs.size() < 2)
    throw ArgumentError("aggregate_seeds: need at least 2 seeds for a sample standard deviation");
  Aggregate a;
  const double n = static_cast<double>(runs.size());
  for (const auto &r : runs)
    a.mean_accuracy += r.accuracy;
  a.mean_accuracy /= n;
  for (const auto &r : runs)
    a.std_accuracy += (r.accuracy - a.mean_accuracy) * (r.accuracy - a.mean_accuracy);
  a.std_accuracy = std::sqrt(a.std_accuracy / (n - 1.0));
  const std::size_t k = runs.front().per_class.size();
  a.mean_per_class.assign(k, {});
  for (const auto &r : runs) {
    if (r.per_class.size() != k)
      throw ArgumentError("aggregate_seeds: class counts differ between runs");
    for (std::size_t c = 0; c < k; ++c) {
      a.mean_per_class[c].precision += r.per_class[c].precision / n;
      a.mean_per_class[c].recall += r.per_class[c].recall / n;
      a.mean_per_class[c].f1 += r.per_class[c].f1 / n;
    }
  }
  return a;
}

/// Checks the structural invariants of a Metrics value.
inline void validate_metrics(const Metrics &m) {
  std::size_t trace = 0;
  for (std::size_t c = 0; c < m.confusion.size(); ++c)
    trace += m.confusion[c][c];
  if (m.total() == 0 || m.accuracy != static_cast<double>(trace) / static_cast<double>(m.total()))
    throw DataError("metrics: accuracy inconsistent with confusion matrix");
  for (const auto &pc : m.per_class)
    for (double v : {pc.precision, pc.recall, pc.f1})
      if (!(v >= 0.0 && v <= 1.0))
        throw DataError("metrics: per-class value outside [0, 1]");
}

//------------------------------------------------------------------------------
// Inputs

/// Which channels of a full trial feed the model, and which of them read
/// as zero (failed sensors).
struct InputView {
  std::vector<std::size_t> channels;
  std::vector<std::size_t> zeroed;

  static InputView of(data::ModalitySet m, const data::SensorMask &mask = {}) {
    return {data::modality_channels(m), data::masked_channels(mask)};
  }
  std::size_t width() const { return channels.size(); }
};

/// Gathers trials[idx[i]] into a [n, channels, length] tensor.
inline nn::Tensor3 assemble_batch(std::span<const Trial> trials, std::span<const std::size_t> idx,
                                  const InputView &view) {
  if (idx.empty())
    throw ArgumentError("assemble_batch: empty index list");
  const std::size_t L = trials[idx[0]].length;
  nn::Tensor3 x(idx.size(), view.channels.size(), L);
  for (std::size_t b = 0; b < idx.size(); ++b) {
    const Trial &t = trials[idx[b]];
    if (t.length != L)
      throw DataError("assemble_batch: trials differ in length");
    for (std::size_t j = 0; j < view.channels.size(); ++j) {
      const std::size_t c = view.channels[j];
      if (c >= t.channels)
        throw DataError("assemble_batch: channel " + std::to_string(c) + " missing from trial");
      if (std::ranges::binary_search(view.zeroed, c))
        continue;
      const auto src = t.channel(c);
      std::ranges::copy(src, x.row(b, j));
    }
  }
  return x;
}

inline std::vector<int> labels_at(std::span<const Trial> trials, std::span<const std::size_t> idx) {
  std::vector<int> y;
  y.reserve(idx.size());
  for (auto i : idx)
    y.push_back(static_cast<int>(trials[i].label));
  return y;
}

//------------------------------------------------------------------------------
// Parallel helper

/// Runs fn(0..n-1) on up to `jobs` threads; the first exception is rethrown.
inline void parallel_for(std::size_t n, std::size_t jobs, const std::function<void(std::size_t)> &fn) {
  jobs = std::max<std::size_t>(1, std::min(jobs, n));
  if (jobs == 1) {
    for (std::size_t i = 0; i < n; ++i)
      fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr err;
  std::mutex err_mu;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < jobs; ++w)
    pool.emplace_back([&] {
      for (std::size_t i; (i = next++) < n;) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lk(err_mu);
          if (!err)
            err = std::current_exception();
        }
      }
    });
  for (auto &t : pool)
    t.join();
  if (err)
    std::rethrow_exception(err);
}

//------------------------------------------------------------------------------
// Train / evaluate

struct ModelChoice {
  enum class Kind { Cnn, Lstm };
  Kind kind = Kind::Cnn;
  models::CnnDef cnn;
  models::LstmDef lstm;

  std::string name() const { return kind == Kind::Cnn ? "cnn" : "lstm"; }

  static ModelChoice parse(std::string_view s) {
    ModelChoice m;
    if (s == "cnn")
      m.kind = Kind::Cnn;
    else if (s == "lstm")
      m.kind = Kind::Lstm;
    else
      throw ArgumentError("unknown model '" + std::string(s) + "' (expected cnn or lstm)");
    return m;
  }

  nn::Model build(std::size_t input_channels, std::uint64_t seed) const {
    if (kind == Kind::Cnn) {
      auto d = cnn;
      d.input_channels = input_channels;
      return models::build_cnn(d, seed);
    }
    auto d = lstm;
    d.input_size = input_channels;
    return models::build_lstm(d, seed);
  }
};

/// Trains `model` in place on trials[train_idx]. The optimizer state is
/// reset first; mini-batches follow a seeded per-epoch shuffle and the last
/// short batch is kept. Returns the mean training loss of each epoch.
inline std::vector<double> fit(nn::Model &model, std::span<const Trial> trials,
                               std::span<const std::size_t> train_idx, const InputView &view,
                               const nn::TrainConfig &cfg) {
  cfg.validate();
  if (train_idx.empty())
    throw DataError("fit: empty training set");
  model.reset_optimizer();
  model.reseed(cfg.seed);
  Rng rng(mix_seed(cfg.seed, 0xF17ull));
  std::vector<std::size_t> order(train_idx.begin(), train_idx.end());
  std::vector<double> losses;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(std::span<std::size_t>(order));
    double total = 0.0;
    for (std::size_t s = 0; s < order.size(); s += cfg.batch_size) {
      const auto batch = std::span<const std::size_t>(order).subspan(s, std::min(cfg.batch_size, order.size() - s));
      const auto x = assemble_batch(trials, batch, view);
      const auto y = labels_at(trials, batch);
      total += nn::train_step(model, x, y, cfg) * static_cast<double>(batch.size());
    }
    losses.push_back(total / static_cast<double>(order.size()));
    model.metadata["epoch"] = epoch + 1;
  }
  model.metadata["seed"] = cfg.seed;
  return losses;
}

/// Arg-max class of each trial under inference mode. Does not touch the
/// model's state.
inline std::vector<int> predict_classes(const nn::Model &model, std::span<const Trial> trials,
                                        std::span<const std::size_t> idx, const InputView &view,
                                        std::size_t batch = 50) {
  std::vector<int> out(idx.size());
  for (std::size_t s = 0; s < idx.size(); s += batch) {
    const auto part = idx.subspan(s, std::min(batch, idx.size() - s));
    const auto p = model.predict(assemble_batch(trials, part, view));
    for (std::size_t b = 0; b < part.size(); ++b) {
      std::size_t best = 0;
      for (std::size_t c = 1; c < p.channels(); ++c)
        if (p(b, c, 0) > p(b, best, 0))
          best = c;
      out[s + b] = static_cast<int>(best);
    }
  }
  return out;
}

inline Metrics evaluate(const nn::Model &model, std::span<const Trial> trials, std::span<const std::size_t> idx,
                        const InputView &view) {
  const auto pred = predict_classes(model, trials, idx, view);
  const auto y = labels_at(trials, idx);
  return compute_metrics(pred, y);
}

inline void require_all_classes(std::span<const Trial> trials, std::span<const std::size_t> idx, std::string_view what) {
  std::array<bool, data::kNumClasses> seen{};
  for (auto i : idx)
    seen[static_cast<std::size_t>(trials[i].label)] = true;
  for (std::size_t c = 0; c < data::kNumClasses; ++c)
    if (!seen[c])
      throw DataError(std::string(what) + ": class " + std::string(data::kLabelNames[c]) + " absent");
}

struct RunOutcome {
  nn::Model model;
  data::Split split;
  std::vector<double> epoch_loss;
  Metrics metrics;
};

/// Stratified 80/20 split seeded by cfg.seed, fresh model seeded by
/// cfg.seed, training, then inference-mode evaluation on the test split.
inline RunOutcome run_training(std::span<const Trial> trials, const ModelChoice &choice, const InputView &view,
                               const nn::TrainConfig &cfg, double train_fraction = 0.8) {
  cfg.validate();
  RunOutcome r;
  r.split = data::split_dataset(trials, data::SplitSpec{train_fraction, cfg.seed, true});
  require_all_classes(trials, r.split.train, "run_training: training split");
  r.model = choice.build(view.width(), cfg.seed);
  r.epoch_loss = fit(r.model, trials, r.split.train, view, cfg);
  r.metrics = evaluate(r.model, trials, r.split.test, view);
  return r;
}

//------------------------------------------------------------------------------
// Reports

struct ExperimentReport {
  std::string study;
  ordered_json condition = ordered_json::object();
  std::vector<std::uint64_t> seeds;
  std::vector<Metrics> per_seed;
  std::vector<std::vector<double>> epoch_loss; // optional, per seed
  ordered_json extra = ordered_json::object();

  Aggregate aggregate() const { return aggregate_seeds(per_seed); }

  std::string label() const {
    std::string s;
    for (const auto &[k, v] : condition.items()) {
      if (!s.empty())
        s += " ";
      s += k + "=" + (v.is_string() ? v.get<std::string>() : v.dump());
    }
    return s;
  }

  ordered_json to_json() const {
    ordered_json runs = ordered_json::array();
    for (std::size_t i = 0; i < per_seed.size(); ++i) {
      ordered_json r{{"seed", seeds.at(i)}, {"metrics", per_seed[i].to_json()}};
      if (i < epoch_loss.size())
        r["epoch_loss"] = epoch_loss[i];
      runs.push_back(std::move(r));
    }
    ordered_json j{{"study", study}, {"condition", condition}, {"seeds", seeds}, {"runs", std::move(runs)}};
    if (per_seed.size() >= 2)
      j["aggregate"] = aggregate().to_json();
    else if (per_seed.size() == 1)
      j["aggregate"] = {{"mean_accuracy", per_seed[0].accuracy}, {"std_accuracy", nullptr}};
    if (!extra.empty())
      j["extra"] = extra;
    return j;
  }
};

inline std::vector<std::uint64_t> seed_list(std::uint64_t base, std::size_t n) {
  std::vector<std::uint64_t> s(n);
  for (std::size_t i = 0; i < n; ++i)
    s[i] = base + i;
  return s;
}

//------------------------------------------------------------------------------
// Modality ablation

struct AblationPlan {
  std::vector<data::ModalitySet> modalities{data::ModalitySet::ALL, data::ModalitySet::IMU_ONLY,
                                            data::ModalitySet::EMG_ONLY, data::ModalitySet::SINGLE_LEG_RIGHT};
  std::vector<ModelChoice> models{ModelChoice{}, ModelChoice::parse("lstm")};
  bool random_baseline = true;
};

/// Uniformly random class per test sample, seeded.
inline Metrics random_guess_metrics(std::span<const Trial> trials, std::span<const std::size_t> idx,
                                    std::uint64_t seed) {
  Rng rng(mix_seed(seed, 0x2A2Dull));
  std::vector<int> pred(idx.size());
  for (auto &p : pred)
    p = static_cast<int>(rng.below(data::kNumClasses));
  return compute_metrics(pred, labels_at(trials, idx));
}

inline std::vector<ExperimentReport> run_modality_ablation(std::span<const Trial> trials, const AblationPlan &plan,
                                                           std::span<const std::uint64_t> seeds,
                                                           const nn::TrainConfig &base, std::size_t jobs = 1) {
  for (const auto &t : trials)
    if (!t.is_full())
      throw DataError("run_modality_ablation: trials must carry all 35 channels");
  struct Cell {
    std::size_t model, modality, seed;
  };
  std::vector<Cell> cells;
  for (std::size_t m = 0; m < plan.models.size(); ++m)
    for (std::size_t d = 0; d < plan.modalities.size(); ++d)
      for (std::size_t s = 0; s < seeds.size(); ++s)
        cells.push_back({m, d, s});
  std::vector<RunOutcome> outcomes(cells.size());
  parallel_for(cells.size(), jobs, [&](std::size_t i) {
    auto cfg = base;
    cfg.seed = seeds[cells[i].seed];
    auto r = run_training(trials, plan.models[cells[i].model], InputView::of(plan.modalities[cells[i].modality]), cfg);
    r.model = nn::Model{}; // keep memory flat
    outcomes[i] = std::move(r);
  });

  std::vector<ExperimentReport> reports;
  std::size_t i = 0;
  for (std::size_t m = 0; m < plan.models.size(); ++m)
    for (std::size_t d = 0; d < plan.modalities.size(); ++d) {
      ExperimentReport rep;
      rep.study = "ablation";
      rep.condition = {{"model", plan.models[m].name()},
                       {"modality", data::modality_name(plan.modalities[d])},
                       {"input_channels", data::modality_channels(plan.modalities[d]).size()}};
      for (std::size_t s = 0; s < seeds.size(); ++s, ++i) {
        rep.seeds.push_back(seeds[s]);
        rep.per_seed.push_back(outcomes[i].metrics);
        rep.epoch_loss.push_back(outcomes[i].epoch_loss);
      }
      reports.push_back(std::move(rep));
    }
  if (plan.random_baseline) {
    ExperimentReport rep;
    rep.study = "ablation";
    rep.condition = {{"model", "random"}, {"modality", "none"}};
    for (auto seed : seeds) {
      const auto split = data::split_dataset(trials, data::SplitSpec{0.8, seed, true});
      rep.seeds.push_back(seed);
      rep.per_seed.push_back(random_guess_metrics(trials, split.test, seed));
    }
    reports.push_back(std::move(rep));
  }
  return reports;
}

//------------------------------------------------------------------------------
// Transfer learning

enum class TransferMode { PretrainOnly, FinetuneOnly, PretrainPlusFinetune, Original };

inline std::string_view transfer_mode_name(TransferMode m) {
  switch (m) {
  case TransferMode::PretrainOnly:
    return "pretrain-only";
  case TransferMode::FinetuneOnly:
    return "finetune-only";
  case TransferMode::PretrainPlusFinetune:
    return "pretrain+finetune";
  case TransferMode::Original:
    return "original";
  }
  return "?";
}

struct TransferPlan {
  std::set<int> pretrain_subjects{0, 1};
  int target_subject = 2;
  std::size_t finetune_per_class = 10;
  std::vector<TransferMode> modes{TransferMode::PretrainOnly, TransferMode::FinetuneOnly,
                                  TransferMode::PretrainPlusFinetune, TransferMode::Original};

  void validate() const {
    if (pretrain_subjects.empty())
      throw ConfigError("transfer: no pretraining subjects");
    if (pretrain_subjects.contains(target_subject))
      throw ConfigError("transfer: target subject " + std::to_string(target_subject) +
                        " is also a pretraining subject");
    if (finetune_per_class == 0)
      throw ConfigError("transfer: finetune_per_class must be positive");
    if (modes.empty())
      throw ConfigError("transfer: no modes requested");
  }
};

/// Target-subject indices split into the finetuning set (n per class) and
/// the evaluation set (the rest), seeded.
struct TargetSplit {
  std::vector<std::size_t> finetune;
  std::vector<std::size_t> evaluation;
};

inline TargetSplit split_target(std::span<const Trial> trials, int target, std::size_t per_class,
                                std::uint64_t seed) {
  std::array<std::vector<std::size_t>, data::kNumClasses> by_class;
  for (std::size_t i = 0; i < trials.size(); ++i)
    if (trials[i].subject_id == target)
      by_class[static_cast<std::size_t>(trials[i].label)].push_back(i);
  Rng rng(mix_seed(seed, 0x7A26ull));
  TargetSplit out;
  for (std::size_t c = 0; c < data::kNumClasses; ++c) {
    auto &v = by_class[c];
    if (v.size() <= per_class)
      throw DataError("transfer: target subject " + std::to_string(target) + " has " + std::to_string(v.size()) +
                      " trials of class " + std::string(data::kLabelNames[c]) + ", need more than " +
                      std::to_string(per_class));
    rng.shuffle(std::span<std::size_t>(v));
    out.finetune.insert(out.finetune.end(), v.begin(), v.begin() + static_cast<std::ptrdiff_t>(per_class));
    out.evaluation.insert(out.evaluation.end(), v.begin() + static_cast<std::ptrdiff_t>(per_class), v.end());
  }
  std::ranges::sort(out.finetune);
  std::ranges::sort(out.evaluation);
  return out;
}

/// Checksum over the parameters and buffers of the frozen layers only.
inline std::uint64_t frozen_checksum(const nn::Model &m) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (auto i : m.frozen_layers()) {
    auto &l = const_cast<nn::Layer &>(m.layer(i));
    auto feed = [&](const std::vector<double> &v) {
      const auto *bytes = reinterpret_cast<const unsigned char *>(v.data());
      for (std::size_t k = 0; k < v.size() * sizeof(double); ++k) {
        h ^= bytes[k];
        h *= 0x100000001b3ULL;
      }
    };
    for (auto *p : l.params())
      feed(p->value);
    for (auto *b : l.buffers())
      feed(*b);
  }
  return h;
}

struct TransferSeedResult {
  std::vector<Metrics> per_mode; // aligned with plan.modes
  bool frozen_unchanged = true;
  std::size_t finetune_count = 0, evaluation_count = 0;
};

inline TransferSeedResult run_transfer_seed(std::span<const Trial> trials, const TransferPlan &plan,
                                            const ModelChoice &choice, const InputView &view,
                                            const nn::TrainConfig &base, std::uint64_t seed) {
  auto cfg = base;
  cfg.seed = seed;
  const auto ts = split_target(trials, plan.target_subject, plan.finetune_per_class, seed);
  std::vector<std::size_t> source;
  for (std::size_t i = 0; i < trials.size(); ++i)
    if (plan.pretrain_subjects.contains(trials[i].subject_id))
      source.push_back(i);
  auto wants = [&](TransferMode m) { return std::ranges::find(plan.modes, m) != plan.modes.end(); };

  TransferSeedResult out;
  out.finetune_count = ts.finetune.size();
  out.evaluation_count = ts.evaluation.size();
  std::optional<nn::Model> pretrained;
  if (wants(TransferMode::PretrainOnly) || wants(TransferMode::PretrainPlusFinetune)) {
    if (source.empty())
      throw DataError("transfer: no trials from the pretraining subjects");
    require_all_classes(trials, source, "transfer: pretraining set");
    pretrained = choice.build(view.width(), seed);
    fit(*pretrained, trials, source, view, cfg);
  }
  for (auto mode : plan.modes) {
    switch (mode) {
    case TransferMode::PretrainOnly:
      out.per_mode.push_back(evaluate(*pretrained, trials, ts.evaluation, view));
      break;
    case TransferMode::FinetuneOnly: {
      auto m = choice.build(view.width(), mix_seed(seed, 0xF7ull));
      fit(m, trials, ts.finetune, view, cfg);
      out.per_mode.push_back(evaluate(m, trials, ts.evaluation, view));
      break;
    }
    case TransferMode::PretrainPlusFinetune: {
      nn::Model m = *pretrained;
      models::freeze_feature_layers(m);
      const auto before = frozen_checksum(m);
      fit(m, trials, ts.finetune, view, cfg);
      out.frozen_unchanged = out.frozen_unchanged && frozen_checksum(m) == before;
      out.per_mode.push_back(evaluate(m, trials, ts.evaluation, view));
      break;
    }
    case TransferMode::Original:
      out.per_mode.push_back(run_training(trials, choice, view, cfg).metrics);
      break;
    }
  }
  return out;
}

inline std::vector<ExperimentReport> run_transfer(std::span<const Trial> trials, const TransferPlan &plan,
                                                  std::span<const std::uint64_t> seeds, const nn::TrainConfig &base,
                                                  const ModelChoice &choice = {},
                                                  const InputView &view = InputView::of(data::ModalitySet::ALL),
                                                  std::size_t jobs = 1) {
  plan.validate();
  std::set<int> subjects;
  for (const auto &t : trials)
    subjects.insert(t.subject_id);
  if (subjects.size() < 2 || !subjects.contains(plan.target_subject))
    throw DataError("transfer: corpus lacks the target subject " + std::to_string(plan.target_subject));
  std::vector<TransferSeedResult> per_seed(seeds.size());
  parallel_for(seeds.size(), jobs,
               [&](std::size_t i) { per_seed[i] = run_transfer_seed(trials, plan, choice, view, base, seeds[i]); });

  std::vector<ExperimentReport> reports;
  for (std::size_t k = 0; k < plan.modes.size(); ++k) {
    ExperimentReport rep;
    rep.study = "transfer";
    rep.condition = {{"mode", transfer_mode_name(plan.modes[k])},
                     {"model", choice.name()},
                     {"pretrain_subjects", plan.pretrain_subjects},
                     {"target_subject", plan.target_subject},
                     {"finetune_per_class", plan.finetune_per_class}};
    bool frozen_ok = true;
    for (std::size_t s = 0; s < seeds.size(); ++s) {
      rep.seeds.push_back(seeds[s]);
      rep.per_seed.push_back(per_seed[s].per_mode[k]);
      frozen_ok = frozen_ok && per_seed[s].frozen_unchanged;
    }
    if (plan.modes[k] == TransferMode::PretrainPlusFinetune)
      rep.extra["frozen_parameters_unchanged"] = frozen_ok;
    if (plan.modes[k] != TransferMode::Original && !seeds.empty())
      rep.extra["evaluation_trials"] = per_seed[0].evaluation_count;
    reports.push_back(std::move(rep));
  }
  return reports;
}

//------------------------------------------------------------------------------
// Robustness

struct MaskCondition {
  std::string name;
  data::SensorMask mask;
};

/// "none" followed by one single-sensor condition per group.
inline std::vector<MaskCondition> robustness_conditions(std::span<const data::SensorGroup> groups) {
  std::vector<MaskCondition> out{{"none", {}}};
  for (auto g : groups)
    out.push_back({std::string(data::group_name(g)), data::SensorMask{{g}}});
  return out;
}

inline std::vector<data::SensorGroup> all_sensor_groups() {
  return {data::SensorGroup::IMU_LSHANK, data::SensorGroup::IMU_RSHANK, data::SensorGroup::IMU_RFOOT,
          data::SensorGroup::EMG_LEFT, data::SensorGroup::EMG_RIGHT};
}

/// Evaluates a model trained on unmasked data with each condition's sensors
/// zeroed in the test inputs only.
inline std::vector<Metrics> run_robustness(const nn::Model &model, std::span<const Trial> trials,
                                           std::span<const std::size_t> test_idx, const InputView &base,
                                           std::span<const MaskCondition> conditions) {
  std::vector<Metrics> out;
  for (const auto &c : conditions) {
    InputView v = base;
    const auto masked = data::masked_channels(c.mask);
    v.zeroed.insert(v.zeroed.end(), masked.begin(), masked.end());
    std::ranges::sort(v.zeroed);
    out.push_back(evaluate(model, trials, test_idx, v));
  }
  return out;
}

/// Trains one model per seed and reports every condition across seeds.
inline std::vector<ExperimentReport> run_robustness_study(std::span<const Trial> trials,
                                                          std::span<const MaskCondition> conditions,
                                                          std::span<const std::uint64_t> seeds,
                                                          const nn::TrainConfig &base, const ModelChoice &choice = {},
                                                          std::size_t jobs = 1) {
  const InputView view = InputView::of(data::ModalitySet::ALL);
  std::vector<std::vector<Metrics>> per_seed(seeds.size());
  parallel_for(seeds.size(), jobs, [&](std::size_t i) {
    auto cfg = base;
    cfg.seed = seeds[i];
    auto r = run_training(trials, choice, view, cfg);
    per_seed[i] = run_robustness(r.model, trials, r.split.test, view, conditions);
  });
  std::vector<ExperimentReport> reports;
  for (std::size_t k = 0; k < conditions.size(); ++k) {
    ExperimentReport rep;
    rep.study = "robustness";
    rep.condition = {{"masked", conditions[k].name}, {"model", choice.name()}};
    for (std::size_t s = 0; s < seeds.size(); ++s) {
      rep.seeds.push_back(seeds[s]);
      rep.per_seed.push_back(per_seed[s][k]);
    }
    reports.push_back(std::move(rep));
  }
  return reports;
}

} // namespace exo::exp
