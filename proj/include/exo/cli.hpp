#pragma once

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <map>
#include <mutex>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "exo/dataset.hpp"
#include "exo/errors.hpp"
#include "exo/experiments.hpp"
#include "exo/io.hpp"
#include "exo/models.hpp"
#include "exo/synthetic.hpp"

// Command-line front end: synth, preprocess, train, ablate, transfer, robust.
// run() is the whole program minus process setup so tests can drive it.

namespace exo::cli {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

struct RunConfig {
  std::string command;
  fs::path config;
  fs::path manifest;
  fs::path out;
  std::string model; // empty: cnn, or both for ablate
  std::string modality = "all";
  std::size_t seeds = 5;
  std::uint64_t seed = 0;
  std::size_t epochs = 15;
  std::size_t batch = 50;
  double lr = 1e-3;
  std::string sensors = "imu_lshank,imu_rshank,imu_rfoot,emg_left,emg_right";
  std::string pretrain_subjects = "0,1";
  int target_subject = 2;
  std::size_t finetune_per_class = 10;
  std::size_t jobs = 1;
  bool emit_plot_data = false;
  std::size_t per_class = 100;
  int subjects = 3;
  std::string preset = "default";
  std::size_t lstm_stride = 1;
};

/// Everything a command needs, checked against module preconditions.
struct Plan {
  nn::TrainConfig train;
  std::vector<std::uint64_t> seeds;
  std::vector<exp::ModelChoice> models;
  data::ModalitySet modality = data::ModalitySet::ALL;
  std::vector<data::SensorGroup> sensors;
  exp::TransferPlan transfer;
  data::SyntheticConfig synth;
};

inline std::vector<std::string> split_list(std::string_view s) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (pos <= s.size()) {
    auto end = s.find(',', pos);
    if (end == std::string_view::npos)
      end = s.size();
    auto item = s.substr(pos, end - pos);
    while (!item.empty() && item.front() == ' ')
      item.remove_prefix(1);
    while (!item.empty() && item.back() == ' ')
      item.remove_suffix(1);
    if (!item.empty())
      out.emplace_back(item);
    pos = end + 1;
  }
  return out;
}

inline bool needs_manifest(const std::string &cmd) { return cmd != "synth"; }
inline bool trains(const std::string &cmd) {
  return cmd == "train" || cmd == "ablate" || cmd == "transfer" || cmd == "robust";
}

inline Plan resolve(const RunConfig &rc) {
  Plan p;
  if (rc.out.empty())
    throw ArgumentError("--out is required");
  if (needs_manifest(rc.command)) {
    if (rc.manifest.empty())
      throw ArgumentError("--manifest is required for " + rc.command);
    if (!fs::is_regular_file(rc.manifest))
      throw ArgumentError("manifest " + rc.manifest.string() + " does not exist");
  }
  if (rc.command == "synth") {
    if (rc.per_class == 0)
      throw ArgumentError("--per-class must be positive");
    if (rc.subjects <= 0)
      throw ArgumentError("--subjects must be positive");
    p.synth = data::SyntheticConfig::preset(rc.preset);
  }
  if (!trains(rc.command))
    return p;

  if (rc.seeds == 0)
    throw ArgumentError("--seeds must be at least 1");
  if (rc.jobs == 0)
    throw ArgumentError("--jobs must be at least 1");
  if (rc.lstm_stride == 0)
    throw ArgumentError("--lstm-stride must be at least 1");
  p.seeds = exp::seed_list(rc.seed, rc.seeds);
  p.train.batch_size = rc.batch;
  p.train.epochs = rc.epochs;
  p.train.learning_rate = rc.lr;
  p.train.validate();

  const std::string model = rc.model.empty() ? (rc.command == "ablate" ? "both" : "cnn") : rc.model;
  if (model == "both" && rc.command == "ablate") {
    p.models = {exp::ModelChoice::parse("cnn"), exp::ModelChoice::parse("lstm")};
  } else {
    p.models = {exp::ModelChoice::parse(model)};
  }
  for (auto &m : p.models)
    m.lstm.temporal_stride = rc.lstm_stride;
  p.modality = data::parse_modality(rc.modality);

  if (rc.command == "transfer") {
    if (p.models.front().kind != exp::ModelChoice::Kind::Cnn)
      throw ArgumentError("transfer freezes CNN feature layers; --model must be cnn");
    p.transfer.pretrain_subjects.clear();
    for (const auto &s : split_list(rc.pretrain_subjects)) {
      try {
        std::size_t used = 0;
        const int v = std::stoi(s, &used);
        if (used != s.size())
          throw std::invalid_argument(s);
        p.transfer.pretrain_subjects.insert(v);
      } catch (const std::logic_error &) {
        throw ArgumentError("--pretrain-subjects: '" + s + "' is not a subject id");
      }
    }
    p.transfer.target_subject = rc.target_subject;
    p.transfer.finetune_per_class = rc.finetune_per_class;
    p.transfer.validate();
  }
  if (rc.command == "robust") {
    for (const auto &s : split_list(rc.sensors))
      p.sensors.push_back(data::parse_sensor_group(s));
    if (p.sensors.empty())
      throw ArgumentError("--sensors lists no sensor groups");
    if (p.modality != data::ModalitySet::ALL)
      throw ArgumentError("robust masks sensors of the full input; --modality must be all");
  }
  return p;
}

//------------------------------------------------------------------------------
// Output helpers

inline std::string file_safe(std::string_view s) {
  std::string out;
  for (char c : s)
    out.push_back(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' ? c : '_');
  return out;
}

inline std::string fixed(double v, int digits = 4) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

inline void write_json(const fs::path &path, const ordered_json &j) { io::write_file_atomic(path, j.dump(2) + "\n"); }

inline void validate_reports(std::span<const exp::ExperimentReport> reports) {
  for (const auto &r : reports)
    for (const auto &m : r.per_seed)
      exp::validate_metrics(m);
}

inline double mean_accuracy(const exp::ExperimentReport &r) {
  return r.per_seed.size() >= 2 ? r.aggregate().mean_accuracy : r.per_seed.at(0).accuracy;
}

/// Plain-text table: one row per condition with mean and sample std.
inline std::string summary_table(std::span<const exp::ExperimentReport> reports) {
  std::size_t width = 9;
  for (const auto &r : reports)
    width = std::max(width, r.label().size());
  std::ostringstream s;
  auto pad = [&](const std::string &x) { return x + std::string(width + 2 - x.size(), ' '); };
  s << pad("condition") << "mean      std       seeds\n";
  for (const auto &r : reports) {
    const double mean = mean_accuracy(r);
    const std::string sd = r.per_seed.size() >= 2 ? fixed(r.aggregate().std_accuracy) : "-     ";
    s << pad(r.label()) << fixed(mean) << "    " << sd << "    " << r.per_seed.size() << "\n";
  }
  return s.str();
}

inline std::string plot_data(std::span<const exp::ExperimentReport> reports) {
  std::string s = "condition\tmean\tstd\n";
  for (const auto &r : reports) {
    const double mean = mean_accuracy(r);
    s += r.label() + "\t" + data::detail::format_double(mean) + "\t" +
         (r.per_seed.size() >= 2 ? data::detail::format_double(r.aggregate().std_accuracy) : std::string("nan")) +
         "\n";
  }
  return s;
}

/// 5x5 counts with class names; rows are true classes.
inline std::string confusion_table(const exp::Metrics &m) {
  std::string s = "true\\pred";
  for (auto n : data::kLabelNames)
    s += "\t" + std::string(n);
  s += "\n";
  for (std::size_t r = 0; r < m.confusion.size(); ++r) {
    s += std::string(data::kLabelNames.at(r));
    for (auto v : m.confusion[r])
      s += "\t" + std::to_string(v);
    s += "\n";
  }
  return s;
}

/// Report files, combined summary, text table and optional plot data.
inline void write_study(const fs::path &out, std::string_view prefix, std::span<const exp::ExperimentReport> reports,
                        std::span<const std::string> names, bool emit_plot_data) {
  validate_reports(reports);
  ordered_json all = ordered_json::array();
  for (std::size_t i = 0; i < reports.size(); ++i) {
    const auto j = reports[i].to_json();
    write_json(out / (std::string(prefix) + "_" + file_safe(names[i]) + ".json"), j);
    all.push_back(j);
  }
  write_json(out / "summary.json", all);
  io::write_file_atomic(out / "summary.txt", summary_table(reports));
  if (emit_plot_data)
    io::write_file_atomic(out / "plot_data.tsv", plot_data(reports));
}

//------------------------------------------------------------------------------
// Commands

class Runner {
public:
  Runner(RunConfig rc, Plan plan, std::ostream &log) : rc_(std::move(rc)), plan_(std::move(plan)), log_(log) {}

  void synth() {
    const auto &sc = plan_.synth;
    std::vector<data::ManifestEntry> entries;
    for (int s = 0; s < rc_.subjects; ++s)
      for (std::size_t c = 0; c < data::kNumClasses; ++c)
        for (std::size_t k = 0; k < rc_.per_class; ++k) {
          const auto label = static_cast<data::Label>(c);
          // same seeding as data::generate_corpus
          const auto trial = data::generate_synthetic_raw(label, s, mix_seed(rc_.seed, k), sc);
          const auto name = data::trial_file_name(s, label, k);
          data::write_trial_csv(trial, rc_.out / name);
          entries.push_back({rc_.out / name, label, s, false});
        }
    data::write_manifest(rc_.out / "manifest.jsonl", entries);
    ordered_json info{{"preset", rc_.preset},
                      {"per_class", rc_.per_class},
                      {"subjects", rc_.subjects},
                      {"seed", rc_.seed},
                      {"trials", entries.size()},
                      {"generator",
                       {{"subject_shift", sc.subject_shift},
                        {"emg_noise_counts", sc.emg_noise_counts},
                        {"emg_burst_counts", sc.emg_burst_counts},
                        {"imu_noise", sc.imu_noise},
                        {"spike_probability", sc.spike_probability},
                        {"timing_jitter_s", sc.timing_jitter_s}}}};
    write_json(rc_.out / "synth_info.json", info);
    log_ << "[synth] wrote " << entries.size() << " trials and manifest.jsonl to " << rc_.out.string() << "\n";
  }

  void preprocess() {
    const auto entries = data::read_manifest(rc_.manifest);
    std::set<std::string> names;
    for (const auto &e : entries) {
      if (e.preprocessed)
        throw DataError(e.path.string() + " is already preprocessed");
      if (!names.insert(e.path.filename().string()).second)
        throw DataError("manifest lists two trials named " + e.path.filename().string());
    }
    const data::Preprocessor pre;
    std::vector<data::ManifestEntry> out_entries;
    ordered_json files = ordered_json::array();
    for (const auto &e : entries) {
      data::Trial t = data::load_trial_csv(e.path);
      t.label = e.label;
      t.subject_id = e.subject;
      const auto p = pre(t);
      const auto dst = rc_.out / e.path.filename();
      data::write_trial_csv(p, dst);
      out_entries.push_back({dst, e.label, e.subject, true});
      files.push_back({{"input", e.path.filename().string()},
                       {"output", dst.filename().string()},
                       {"label", data::label_name(e.label)},
                       {"subject", e.subject}});
    }
    data::write_manifest(rc_.out / "manifest.jsonl", out_entries);
    ordered_json logj{{"chain", pre.config.to_json()}, {"trials", out_entries.size()}, {"files", std::move(files)}};
    write_json(rc_.out / "preprocess_log.json", logj);
    log_ << "[preprocess] " << out_entries.size() << " trials -> " << rc_.out.string() << "\n";
  }

  void train() {
    const auto trials = load();
    const auto view = exp::InputView::of(plan_.modality);
    const auto &choice = plan_.models.front();
    const auto n = plan_.seeds.size();
    std::vector<exp::Metrics> metrics(n);
    std::vector<std::vector<double>> losses(n);
    exp::parallel_for(n, rc_.jobs, [&](std::size_t i) {
      auto cfg = plan_.train;
      cfg.seed = plan_.seeds[i];
      const auto t0 = std::chrono::steady_clock::now();
      auto r = exp::run_training(trials, choice, view, cfg);
      models::save_checkpoint(r.model, rc_.out / ("model_seed" + std::to_string(cfg.seed) + ".ckpt"));
      metrics[i] = r.metrics;
      losses[i] = r.epoch_loss;
      note("[train] seed " + std::to_string(cfg.seed) + ": accuracy " + fixed(r.metrics.accuracy) + " (" +
           fixed(seconds_since(t0), 1) + " s)");
    });
    exp::ExperimentReport rep;
    rep.study = "train";
    rep.condition = {{"model", choice.name()},
                     {"modality", data::modality_name(plan_.modality)},
                     {"input_channels", view.width()}};
    rep.seeds = plan_.seeds;
    rep.per_seed = metrics;
    rep.epoch_loss = losses;
    auto tc = plan_.train.to_json();
    tc.erase("seed");
    rep.extra["train_config"] = tc;
    rep.extra["parameters"] = choice.build(view.width(), 0).count_parameters();
    validate_reports(std::span(&rep, 1));
    write_json(rc_.out / "report.json", rep.to_json());
    std::string text = summary_table(std::span(&rep, 1));
    for (std::size_t i = 0; i < n; ++i) {
      const auto table = confusion_table(metrics[i]);
      io::write_file_atomic(rc_.out / ("confusion_seed" + std::to_string(plan_.seeds[i]) + ".tsv"), table);
      text += "\nconfusion, seed " + std::to_string(plan_.seeds[i]) + "\n" + table;
    }
    io::write_file_atomic(rc_.out / "summary.txt", text);
    if (rc_.emit_plot_data)
      io::write_file_atomic(rc_.out / "plot_data.tsv", plot_data(std::span(&rep, 1)));
    log_ << summary_table(std::span(&rep, 1));
  }

  void ablate() {
    const auto trials = load();
    exp::AblationPlan ap;
    ap.models = plan_.models;
    note("[ablate] " + std::to_string(ap.models.size() * ap.modalities.size() * plan_.seeds.size()) +
         " training runs");
    const auto reports = exp::run_modality_ablation(trials, ap, plan_.seeds, plan_.train, rc_.jobs);
    std::vector<std::string> names;
    for (const auto &r : reports)
      names.push_back(r.condition["model"].get<std::string>() + "_" + r.condition["modality"].get<std::string>());
    write_study(rc_.out, "ablation", reports, names, rc_.emit_plot_data);
    log_ << summary_table(reports);
  }

  void transfer() {
    const auto trials = load();
    const auto reports = exp::run_transfer(trials, plan_.transfer, plan_.seeds, plan_.train, plan_.models.front(),
                                           exp::InputView::of(plan_.modality), rc_.jobs);
    for (const auto &r : reports)
      if (r.extra.contains("frozen_parameters_unchanged") && !r.extra["frozen_parameters_unchanged"].get<bool>())
        throw DataError("transfer: frozen parameters changed during finetuning");
    std::vector<std::string> names;
    for (const auto &r : reports)
      names.push_back(r.condition["mode"].get<std::string>());
    write_study(rc_.out, "transfer", reports, names, rc_.emit_plot_data);
    log_ << summary_table(reports);
  }

  void robust() {
    const auto trials = load();
    const auto conds = exp::robustness_conditions(plan_.sensors);
    const auto reports =
        exp::run_robustness_study(trials, conds, plan_.seeds, plan_.train, plan_.models.front(), rc_.jobs);
    std::vector<std::string> names;
    for (const auto &c : conds)
      names.push_back(c.name);
    write_study(rc_.out, "robust", reports, names, rc_.emit_plot_data);
    log_ << summary_table(reports);
  }

private:
  static double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }

  void note(const std::string &line) {
    std::lock_guard lock(log_mu_);
    log_ << line << "\n";
    log_.flush();
  }

  /// Loads the manifest; raw trials go through the preprocessing chain.
  std::vector<data::Trial> load() {
    const auto entries = data::read_manifest(rc_.manifest);
    const data::Preprocessor pre;
    std::vector<data::Trial> trials;
    trials.reserve(entries.size());
    std::size_t raw = 0;
    for (const auto &e : entries) {
      data::Trial t = data::load_trial_csv(e.path);
      t.label = e.label;
      t.subject_id = e.subject;
      if (e.preprocessed) {
        t.preprocessed = true;
        trials.push_back(std::move(t));
      } else {
        ++raw;
        trials.push_back(pre(t));
      }
    }
    note("[load] " + std::to_string(trials.size()) + " trials (" + std::to_string(raw) + " preprocessed on load)");
    return trials;
  }

  RunConfig rc_;
  Plan plan_;
  std::ostream &log_;
  std::mutex log_mu_;
};

//------------------------------------------------------------------------------
// Argument parsing

/// Flat `key = value` lines; '#' starts a comment. Keys are flag names
/// without the leading dashes.
inline std::vector<std::pair<std::string, std::string>> read_config_file(const fs::path &path) {
  const std::string text = io::read_file(path);
  std::vector<std::pair<std::string, std::string>> out;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  auto trim = [](std::string s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos)
      return std::string();
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos)
      line.resize(hash);
    line = trim(line);
    if (line.empty())
      continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ParseError(path.string() + ":" + std::to_string(lineno) + ": expected key = value");
    auto key = trim(line.substr(0, eq));
    auto value = trim(line.substr(eq + 1));
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"')
      value = value.substr(1, value.size() - 2);
    if (key.empty())
      throw ParseError(path.string() + ":" + std::to_string(lineno) + ": empty key");
    out.emplace_back(std::move(key), std::move(value));
  }
  return out;
}

struct Parser {
  CLI::App app{"Ankle-exoskeleton EMG + IMU motion classification toolkit", "exo"};
  RunConfig rc;
  std::map<std::string, CLI::App *> commands;

  Parser() {
    app.require_subcommand(1, 1);
    app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    auto add = [&](const std::string &name, const std::string &help) {
      auto *sub = app.add_subcommand(name, help);
      sub->option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
      sub->add_option("--out", rc.out, "output directory")->required();
      sub->add_option("--config", rc.config, "flat key = value file; flags given here override it");
      sub->add_option("--seed", rc.seed, "base seed")->capture_default_str();
      commands[name] = sub;
      return sub;
    };
    auto training = [&](CLI::App *sub, bool modality) {
      sub->add_option("--manifest", rc.manifest, "trial manifest (JSON lines)")->required();
      sub->add_option("--model", rc.model, "cnn or lstm" + std::string(sub->get_name() == "ablate" ? " or both" : ""));
      if (modality)
        sub->add_option("--modality", rc.modality, "all, imu, emg or single-leg")->capture_default_str();
      sub->add_option("--seeds", rc.seeds, "number of seeds (seed, seed+1, ...)")->capture_default_str();
      sub->add_option("--epochs", rc.epochs)->capture_default_str();
      sub->add_option("--batch", rc.batch)->capture_default_str();
      sub->add_option("--lr", rc.lr, "Adam learning rate")->capture_default_str();
      sub->add_option("--jobs", rc.jobs, "concurrent runs")->capture_default_str();
      sub->add_option("--lstm-stride", rc.lstm_stride, "keep every n-th time step before the LSTM")
          ->capture_default_str();
      sub->add_flag("--emit-plot-data", rc.emit_plot_data, "write plot_data.tsv (condition, mean, std)");
    };

    auto *synth = add("synth", "write a synthetic corpus as trial CSVs plus manifest");
    synth->add_option("--per-class", rc.per_class)->capture_default_str();
    synth->add_option("--subjects", rc.subjects)->capture_default_str();
    synth->add_option("--preset", rc.preset, "default or subject-shifted")->capture_default_str();

    auto *pre = add("preprocess", "run the filtering and normalization chain over a manifest");
    pre->add_option("--manifest", rc.manifest, "trial manifest (JSON lines)")->required();

    training(add("train", "train one model per seed, save checkpoints and a report"), true);
    training(add("ablate", "modality ablation for CNN and LSTM plus a random baseline"), false);
    auto *tr = add("transfer", "pretrain / finetune transfer study");
    training(tr, true);
    tr->add_option("--pretrain-subjects", rc.pretrain_subjects, "comma-separated ids")->capture_default_str();
    tr->add_option("--target-subject", rc.target_subject)->capture_default_str();
    tr->add_option("--finetune-per-class", rc.finetune_per_class)->capture_default_str();
    auto *rb = add("robust", "evaluate with single sensors zeroed at test time");
    training(rb, false);
    rb->add_option("--sensors", rc.sensors, "comma-separated sensor groups")->capture_default_str();
  }
};

/// Splices config-file entries in front of the command-line flags so the
/// latter win (every option keeps its last value).
inline std::vector<std::string> with_config(const std::vector<std::string> &args, Parser &parser) {
  if (args.size() < 2 || !parser.commands.contains(args[1]))
    return args;
  fs::path config;
  for (std::size_t i = 2; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size())
      config = args[i + 1];
    else if (args[i].starts_with("--config="))
      config = args[i].substr(9);
  }
  if (config.empty())
    return args;
  auto *sub = parser.commands.at(args[1]);
  std::vector<std::string> out(args.begin(), args.begin() + 2);
  for (const auto &[key, value] : read_config_file(config)) {
    const auto *opt = sub->get_option_no_throw("--" + key);
    if (!opt || key == "config")
      throw ArgumentError(config.string() + ": unknown key '" + key + "' for command " + args[1]);
    if (opt->get_expected_max() == 0) {
      if (value == "true" || value == "1")
        out.push_back("--" + key);
      else if (value != "false" && value != "0")
        throw ArgumentError(config.string() + ": " + key + " expects true or false");
    } else {
      out.push_back("--" + key);
      out.push_back(value);
    }
  }
  out.insert(out.end(), args.begin() + 2, args.end());
  return out;
}

/// Exit codes: 0 success, 1 data or runtime failure, 2 usage error.
inline int run(const std::vector<std::string> &args, std::ostream &out, std::ostream &err) {
  Parser parser;
  std::vector<std::string> full;
  try {
    full = with_config(args, parser);
  } catch (const Error &e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
  std::vector<const char *> argv;
  for (const auto &a : full)
    argv.push_back(a.c_str());
  try {
    parser.app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp &) {
    out << parser.app.help();
    return 0;
  } catch (const CLI::CallForAllHelp &) {
    out << parser.app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError &e) {
    if (e.get_exit_code() == 0) {
      out << e.what() << "\n";
      return 0;
    }
    err << "error: " << e.what() << "\n";
    for (auto &[name, sub] : parser.commands)
      if (sub->parsed()) {
        err << sub->help();
        return 2;
      }
    err << parser.app.help();
    return 2;
  }
  RunConfig rc = parser.rc;
  for (auto &[name, sub] : parser.commands)
    if (sub->parsed())
      rc.command = name;

  Plan plan;
  try {
    plan = resolve(rc);
  } catch (const Error &e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
  try {
    fs::create_directories(rc.out);
    Runner runner(rc, plan, err);
    if (rc.command == "synth")
      runner.synth();
    else if (rc.command == "preprocess")
      runner.preprocess();
    else if (rc.command == "train")
      runner.train();
    else if (rc.command == "ablate")
      runner.ablate();
    else if (rc.command == "transfer")
      runner.transfer();
    else if (rc.command == "robust")
      runner.robust();
  } catch (const std::exception &e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

} // namespace exo::cli
