#include <algorithm>
#include <numeric>
#include <set>
#include <vector>

#include <gtest/gtest.h>

#include "exo/experiments.hpp"
#include "exo/synthetic.hpp"

using namespace exo;
using namespace exo::exp;

namespace {

// 6 trials per class and subject, 3 subjects: 90 preprocessed trials.
const std::vector<Trial> &small_corpus() {
  static const std::vector<Trial> corpus = data::generate_corpus(6, 3, 11);
  return corpus;
}

nn::TrainConfig quick_config(std::size_t epochs, std::uint64_t seed = 0) {
  nn::TrainConfig cfg;
  cfg.epochs = epochs;
  cfg.batch_size = 16;
  cfg.learning_rate = 3e-3;
  cfg.seed = seed;
  return cfg;
}

std::vector<std::size_t> iota_idx(std::size_t n) {
  std::vector<std::size_t> v(n);
  std::iota(v.begin(), v.end(), 0);
  return v;
}

} // namespace

TEST(Metrics, PerfectPredictions) {
  const std::vector<int> y{0, 1, 2, 3, 4, 0, 1, 2, 3, 4};
  const auto m = compute_metrics(y, y);
  EXPECT_EQ(m.accuracy, 1.0);
  for (const auto &pc : m.per_class) {
    EXPECT_EQ(pc.precision, 1.0);
    EXPECT_EQ(pc.recall, 1.0);
    EXPECT_EQ(pc.f1, 1.0);
  }
  validate_metrics(m);
}

TEST(Metrics, TwoClassConfusionFixture) {
  const auto m = metrics_from_confusion({{8, 2}, {3, 7}});
  EXPECT_DOUBLE_EQ(m.accuracy, 0.75);
  EXPECT_DOUBLE_EQ(m.per_class[0].precision, 8.0 / 11.0);
  EXPECT_DOUBLE_EQ(m.per_class[0].recall, 0.8);
  EXPECT_NEAR(m.per_class[0].f1, 0.7619, 1e-4);
  EXPECT_DOUBLE_EQ(m.per_class[1].precision, 7.0 / 9.0);
  EXPECT_DOUBLE_EQ(m.per_class[1].recall, 0.7);
}

TEST(Metrics, F1FromPrecisionAndRecall) {
  EXPECT_NEAR(f1_score(0.9757, 0.9331), 0.9539, 5e-4);
  EXPECT_EQ(f1_score(0.0, 0.0), 0.0);
}

TEST(Metrics, ClassNeverPredictedHasZeroPrecision) {
  const std::vector<int> y{0, 0, 1, 1, 2, 2, 3, 3, 4, 4};
  const std::vector<int> p{0, 0, 1, 1, 2, 2, 3, 3, 3, 3};
  const auto m = compute_metrics(p, y);
  EXPECT_DOUBLE_EQ(m.accuracy, 0.8);
  EXPECT_EQ(m.per_class[4].precision, 0.0);
  EXPECT_EQ(m.per_class[4].recall, 0.0);
  EXPECT_EQ(m.per_class[4].f1, 0.0);
  EXPECT_DOUBLE_EQ(m.per_class[3].precision, 0.5);
  validate_metrics(m);
}

TEST(Metrics, AccuracyIsConfusionTraceOverTotal) {
  Rng rng(4);
  std::vector<int> y(200), p(200);
  for (std::size_t i = 0; i < y.size(); ++i) {
    y[i] = static_cast<int>(rng.below(5));
    p[i] = rng.uniform() < 0.6 ? y[i] : static_cast<int>(rng.below(5));
  }
  const auto m = compute_metrics(p, y);
  std::size_t trace = 0;
  for (std::size_t c = 0; c < 5; ++c)
    trace += m.confusion[c][c];
  EXPECT_EQ(m.total(), 200u);
  EXPECT_DOUBLE_EQ(m.accuracy, static_cast<double>(trace) / 200.0);
  validate_metrics(m);
}

TEST(Metrics, BadInputs) {
  const std::vector<int> a{0, 1}, b{0};
  EXPECT_THROW(compute_metrics(a, b), ArgumentError);
  EXPECT_THROW(compute_metrics(std::vector<int>{}, std::vector<int>{}), ArgumentError);
  EXPECT_THROW(compute_metrics(std::vector<int>{7}, std::vector<int>{0}), ArgumentError);
}

TEST(Aggregate, MeanAndSampleStd) {
  std::vector<Metrics> runs;
  for (double acc : {0.9, 0.8, 0.7}) {
    Metrics m = metrics_from_confusion({{1, 0}, {0, 1}});
    m.accuracy = acc;
    runs.push_back(m);
  }
  const auto a = aggregate_seeds(runs);
  EXPECT_NEAR(a.mean_accuracy, 0.8, 1e-12);
  EXPECT_NEAR(a.std_accuracy, 0.1, 1e-12);
  EXPECT_DOUBLE_EQ(a.mean_per_class[0].f1, 1.0);
}

TEST(Aggregate, IdenticalRunsHaveZeroStd) {
  const auto m = metrics_from_confusion({{3, 1}, {1, 3}});
  const std::vector<Metrics> runs{m, m, m, m};
  const auto a = aggregate_seeds(runs);
  EXPECT_DOUBLE_EQ(a.mean_accuracy, 0.75);
  EXPECT_EQ(a.std_accuracy, 0.0);
}

TEST(Aggregate, SingleSeedIsAnError) {
  const std::vector<Metrics> one{metrics_from_confusion({{1, 0}, {0, 1}})};
  EXPECT_THROW(aggregate_seeds(one), ArgumentError);
}

TEST(RandomBaseline, NearOneFifth) {
  std::vector<Trial> trials;
  for (std::size_t i = 0; i < 500; ++i) {
    Trial t(1, 1);
    t.label = data::label_from_index(static_cast<int>(i % 5));
    trials.push_back(std::move(t));
  }
  const auto idx = iota_idx(trials.size());
  for (std::uint64_t seed = 0; seed < 5; ++seed)
    EXPECT_NEAR(random_guess_metrics(trials, idx, seed).accuracy, 0.2, 0.06) << seed;
}

TEST(Inputs, MaskZeroesOnlyTheMaskedGroup) {
  const auto &trials = small_corpus();
  const std::vector<std::size_t> idx{0, 17, 44};
  const auto clean = assemble_batch(trials, idx, InputView::of(data::ModalitySet::ALL));
  for (auto g : all_sensor_groups()) {
    const data::SensorMask mask{{g}};
    const auto hidden = data::masked_channels(mask);
    const auto x = assemble_batch(trials, idx, InputView::of(data::ModalitySet::ALL, mask));
    for (std::size_t b = 0; b < idx.size(); ++b)
      for (std::size_t c = 0; c < data::kNumChannels; ++c) {
        const std::span<const double> row(x.row(b, c), x.shape.length);
        const std::span<const double> ref(clean.row(b, c), clean.shape.length);
        if (std::ranges::binary_search(hidden, c))
          EXPECT_TRUE(std::ranges::all_of(row, [](double v) { return v == 0.0; })) << c;
        else
          EXPECT_TRUE(std::ranges::equal(row, ref)) << c;
      }
  }
}

TEST(Inputs, ModalityViewWidths) {
  EXPECT_EQ(InputView::of(data::ModalitySet::ALL).width(), 35u);
  EXPECT_EQ(InputView::of(data::ModalitySet::IMU_ONLY).width(), 27u);
  EXPECT_EQ(InputView::of(data::ModalitySet::EMG_ONLY).width(), 8u);
  EXPECT_EQ(InputView::of(data::ModalitySet::SINGLE_LEG_RIGHT).width(), 22u);
}

TEST(Inputs, ParallelForRethrows) {
  std::vector<int> hit(8, 0);
  parallel_for(8, 3, [&](std::size_t i) { hit[i] = 1; });
  EXPECT_EQ(std::accumulate(hit.begin(), hit.end(), 0), 8);
  EXPECT_THROW(parallel_for(4, 2, [](std::size_t i) {
                 if (i == 2)
                   throw DataError("boom");
               }),
               DataError);
}

TEST(ModelChoiceTest, ParseAndBuild) {
  EXPECT_EQ(ModelChoice::parse("cnn").name(), "cnn");
  EXPECT_EQ(ModelChoice::parse("lstm").name(), "lstm");
  EXPECT_THROW(ModelChoice::parse("gru"), ArgumentError);
  EXPECT_EQ(ModelChoice{}.build(8, 0).count_parameters(), 19225u);
}

TEST(Training, DeterministicForFixedSeed) {
  const auto &trials = small_corpus();
  const auto view = InputView::of(data::ModalitySet::ALL);
  const auto a = run_training(trials, {}, view, quick_config(2, 3));
  const auto b = run_training(trials, {}, view, quick_config(2, 3));
  EXPECT_EQ(a.epoch_loss, b.epoch_loss);
  EXPECT_EQ(a.metrics.confusion, b.metrics.confusion);
  EXPECT_EQ(nn::parameter_checksum(a.model), nn::parameter_checksum(b.model));
  EXPECT_EQ(a.model.metadata["seed"], 3);
  EXPECT_EQ(a.model.metadata["epoch"], 2);
}

TEST(Training, LossFallsAndModelLearns) {
  const auto &trials = small_corpus();
  const auto r = run_training(trials, {}, InputView::of(data::ModalitySet::ALL), quick_config(15, 1));
  ASSERT_EQ(r.epoch_loss.size(), 15u);
  EXPECT_LT(r.epoch_loss.back(), r.epoch_loss.front());
  EXPECT_GT(r.metrics.accuracy, 0.5);
  EXPECT_EQ(r.metrics.total(), r.split.test.size());
  validate_metrics(r.metrics);
}

TEST(Training, SplitIsDisjointAndCoversCorpus) {
  const auto &trials = small_corpus();
  const auto r = run_training(trials, {}, InputView::of(data::ModalitySet::EMG_ONLY), quick_config(1));
  std::set<std::size_t> all(r.split.train.begin(), r.split.train.end());
  for (auto i : r.split.test)
    EXPECT_TRUE(all.insert(i).second);
  EXPECT_EQ(all.size(), trials.size());
}

TEST(Training, MissingClassIsDataError) {
  std::vector<Trial> trials;
  for (const auto &t : small_corpus())
    if (t.label != data::Label::Backwards)
      trials.push_back(t);
  EXPECT_THROW(run_training(trials, {}, InputView::of(data::ModalitySet::ALL), quick_config(1)), DataError);
}

TEST(Evaluation, LeavesModelUntouched) {
  const auto &trials = small_corpus();
  auto r = run_training(trials, {}, InputView::of(data::ModalitySet::ALL), quick_config(1));
  const auto before = nn::parameter_checksum(r.model);
  const auto m1 = evaluate(r.model, trials, r.split.test, InputView::of(data::ModalitySet::ALL));
  const auto m2 = evaluate(r.model, trials, r.split.test, InputView::of(data::ModalitySet::ALL));
  EXPECT_EQ(nn::parameter_checksum(r.model), before);
  EXPECT_EQ(m1.confusion, m2.confusion);
}

TEST(Transfer, TargetSplitIsDisjointAndBalanced) {
  const auto &trials = small_corpus();
  const auto ts = split_target(trials, 2, 2, 5);
  EXPECT_EQ(ts.finetune.size(), 10u);
  EXPECT_EQ(ts.evaluation.size(), 20u);
  std::set<std::size_t> seen;
  std::array<int, 5> per_class{};
  for (auto i : ts.finetune) {
    EXPECT_EQ(trials[i].subject_id, 2);
    ++per_class[static_cast<std::size_t>(trials[i].label)];
    EXPECT_TRUE(seen.insert(i).second);
  }
  for (auto i : ts.evaluation) {
    EXPECT_EQ(trials[i].subject_id, 2);
    EXPECT_TRUE(seen.insert(i).second);
  }
  for (int n : per_class)
    EXPECT_EQ(n, 2);
  EXPECT_THROW(split_target(trials, 2, 6, 5), DataError);
}

TEST(Transfer, PlanValidation) {
  TransferPlan p;
  p.pretrain_subjects = {0, 2};
  EXPECT_THROW(p.validate(), ConfigError);
  p = {};
  p.finetune_per_class = 0;
  EXPECT_THROW(p.validate(), ConfigError);
  p = {};
  EXPECT_NO_THROW(p.validate());
}

TEST(Transfer, ReportsEveryModeAndKeepsFrozenLayers) {
  const auto &trials = small_corpus();
  TransferPlan plan;
  plan.finetune_per_class = 2;
  const auto seeds = seed_list(0, 2);
  const auto reports = run_transfer(trials, plan, seeds, quick_config(2));
  ASSERT_EQ(reports.size(), 4u);
  const std::vector<std::string> names{"pretrain-only", "finetune-only", "pretrain+finetune", "original"};
  for (std::size_t k = 0; k < 4; ++k) {
    EXPECT_EQ(reports[k].condition["mode"], names[k]);
    ASSERT_EQ(reports[k].per_seed.size(), 2u);
    for (const auto &m : reports[k].per_seed)
      validate_metrics(m);
  }
  EXPECT_EQ(reports[0].per_seed[0].total(), 20u);
  EXPECT_EQ(reports[2].extra["frozen_parameters_unchanged"], true);
}

TEST(Transfer, MissingTargetSubjectIsDataError) {
  std::vector<Trial> trials;
  for (const auto &t : small_corpus())
    if (t.subject_id != 2)
      trials.push_back(t);
  EXPECT_THROW(run_transfer(trials, TransferPlan{}, seed_list(0, 2), quick_config(1)), DataError);
}

TEST(Robustness, UnmaskedConditionMatchesPlainEvaluation) {
  const auto &trials = small_corpus();
  const auto view = InputView::of(data::ModalitySet::ALL);
  const auto r = run_training(trials, {}, view, quick_config(3));
  const auto groups = all_sensor_groups();
  const auto conds = robustness_conditions(groups);
  ASSERT_EQ(conds.size(), 6u);
  EXPECT_EQ(conds[0].name, "none");
  const auto ms = run_robustness(r.model, trials, r.split.test, view, conds);
  EXPECT_EQ(ms[0].confusion, r.metrics.confusion);
  for (const auto &m : ms)
    EXPECT_EQ(m.total(), r.split.test.size());
}

TEST(Reports, JsonCarriesSeedsAndAggregate) {
  ExperimentReport rep;
  rep.study = "ablation";
  rep.condition = {{"model", "cnn"}, {"modality", "ALL"}};
  for (std::uint64_t s : {0, 1}) {
    rep.seeds.push_back(s);
    rep.per_seed.push_back(metrics_from_confusion({{2, 0}, {s, 2 - s}}));
  }
  const auto j = rep.to_json();
  EXPECT_EQ(j["seeds"].size(), 2u);
  EXPECT_EQ(j["runs"].size(), 2u);
  EXPECT_TRUE(j.contains("aggregate"));
  EXPECT_EQ(rep.to_json().dump(), j.dump());
}

// Both properties on a reduced synthetic corpus, five seeds each.
TEST(StudyProperties, FullInputBeatsSingleModalitiesAndMaskingOnlyDegrades) {
  const auto trials = data::generate_corpus(12, 3, 23);
  AblationPlan plan;
  plan.models = {ModelChoice{}};
  plan.random_baseline = false;
  const auto reports = run_modality_ablation(trials, plan, seed_list(0, 5), quick_config(10));
  ASSERT_EQ(reports.size(), 4u);
  const double all = reports[0].aggregate().mean_accuracy;
  for (std::size_t k = 1; k < reports.size(); ++k)
    EXPECT_GE(all, reports[k].aggregate().mean_accuracy) << reports[k].condition.dump();

  const auto conds = robustness_conditions(all_sensor_groups());
  const auto view = InputView::of(data::ModalitySet::ALL);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto r = run_training(trials, {}, view, quick_config(10, seed));
    const auto ms = run_robustness(r.model, trials, r.split.test, view, conds);
    for (std::size_t k = 1; k < ms.size(); ++k) {
      EXPECT_LE(ms[k].accuracy, ms[0].accuracy + 0.02) << conds[k].name << " seed " << seed;
      EXPECT_GT(ms[k].accuracy, 0.2) << conds[k].name << " seed " << seed;
    }
  }
}
