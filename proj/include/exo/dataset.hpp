#pragma once

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "exo/errors.hpp"
#include "exo/io.hpp"
#include "exo/random.hpp"
#include "exo/signal.hpp"

// Trial data model and the operations that turn files into training-ready
// trials: CSV and manifest I/O, preprocessing, stratified splitting,
// modality selection, and sensor masking.

namespace exo::data {

inline constexpr std::size_t kNumClasses = 5;
inline constexpr std::size_t kNumChannels = 35;
inline constexpr std::size_t kNumEmgChannels = 8;
inline constexpr std::size_t kNumImuChannels = 27;
inline constexpr std::size_t kTrialLength = 5000;
inline constexpr double kSampleRateHz = 1000.0;
inline constexpr std::size_t kImuNativeLength = 125;
inline constexpr std::size_t kImuUpsampleFactor = 40;

//------------------------------------------------------------------------------
// Labels and sensors

enum class Label : int { TurnLeft = 0, TurnRight, PickUpObject, Backwards, Forwards };

inline constexpr std::array<std::string_view, kNumClasses> kLabelNames{
    "TurnLeft", "TurnRight", "PickUpObject", "Backwards", "Forwards"};

inline std::string_view label_name(Label l) { return kLabelNames.at(static_cast<std::size_t>(l)); }

inline Label parse_label(std::string_view s) {
  for (std::size_t i = 0; i < kNumClasses; ++i)
    if (kLabelNames[i] == s)
      return static_cast<Label>(i);
  throw ParseError("unknown label '" + std::string(s) + "'");
}

inline Label label_from_index(int i) {
  if (i < 0 || i >= static_cast<int>(kNumClasses))
    throw ArgumentError("label index " + std::to_string(i) + " out of range");
  return static_cast<Label>(i);
}

enum class Sensor : int {
  EMG_L_TA = 0, EMG_L_GM, EMG_L_GL, EMG_L_SOL,
  EMG_R_TA, EMG_R_GM, EMG_R_GL, EMG_R_SOL,
  IMU_LSHANK, IMU_RSHANK, IMU_RFOOT
};

enum class Axis : int { ACC_X = 0, ACC_Y, ACC_Z, GYRO_X, GYRO_Y, GYRO_Z, MAG_X, MAG_Y, MAG_Z };

inline constexpr std::size_t kAxesPerImu = 9;

inline bool is_emg(Sensor s) { return static_cast<int>(s) <= static_cast<int>(Sensor::EMG_R_SOL); }

/// Right-leg sensors: right EMG group, right shank and right foot IMUs.
inline bool is_right_leg(Sensor s) {
  switch (s) {
  case Sensor::EMG_R_TA:
  case Sensor::EMG_R_GM:
  case Sensor::EMG_R_GL:
  case Sensor::EMG_R_SOL:
  case Sensor::IMU_RSHANK:
  case Sensor::IMU_RFOOT:
    return true;
  default:
    return false;
  }
}

/// Physical units that can fail as a whole: one IMU, or one leg's four EMG
/// electrodes.
enum class SensorGroup : int { IMU_LSHANK = 0, IMU_RSHANK, IMU_RFOOT, EMG_LEFT, EMG_RIGHT };

inline constexpr std::array<std::string_view, 5> kSensorGroupNames{
    "imu_lshank", "imu_rshank", "imu_rfoot", "emg_left", "emg_right"};

inline std::string_view group_name(SensorGroup g) {
  return kSensorGroupNames.at(static_cast<std::size_t>(g));
}

inline SensorGroup parse_sensor_group(std::string_view s) {
  for (std::size_t i = 0; i < kSensorGroupNames.size(); ++i)
    if (kSensorGroupNames[i] == s)
      return static_cast<SensorGroup>(i);
  throw ArgumentError("unknown sensor '" + std::string(s) +
                      "' (expected imu_lshank, imu_rshank, imu_rfoot, emg_left or emg_right)");
}

inline bool in_group(Sensor s, SensorGroup g) {
  const int v = static_cast<int>(s);
  switch (g) {
  case SensorGroup::IMU_LSHANK:
    return s == Sensor::IMU_LSHANK;
  case SensorGroup::IMU_RSHANK:
    return s == Sensor::IMU_RSHANK;
  case SensorGroup::IMU_RFOOT:
    return s == Sensor::IMU_RFOOT;
  case SensorGroup::EMG_LEFT:
    return v >= static_cast<int>(Sensor::EMG_L_TA) && v <= static_cast<int>(Sensor::EMG_L_SOL);
  case SensorGroup::EMG_RIGHT:
    return v >= static_cast<int>(Sensor::EMG_R_TA) && v <= static_cast<int>(Sensor::EMG_R_SOL);
  }
  return false;
}

//------------------------------------------------------------------------------
// Channel map

struct ChannelEntry {
  std::size_t index; ///< column in the trial CSV
  Sensor sensor;
  std::optional<Axis> axis; ///< IMU channels only
};

/// Describes the 35 channels of a trial in canonical order and where each
/// one lives in a CSV file. Canonical order: EMG left TA, GM, GL, SOL, right
/// TA, GM, GL, SOL, then the left shank, right shank and right foot IMUs,
/// each as acc xyz, gyro xyz, mag xyz.
class ChannelMap {
public:
  /// entries[c] describes canonical channel c.
  explicit ChannelMap(std::vector<ChannelEntry> entries) : entries_(std::move(entries)) {
    validate();
  }

  static ChannelMap canonical() { return ChannelMap(canonical_entries()); }

  /// Canonical sensors with arbitrary file columns; columns[c] is the CSV
  /// column holding canonical channel c.
  static ChannelMap with_columns(std::span<const std::size_t> columns) {
    auto e = canonical_entries();
    if (columns.size() != e.size())
      throw ConfigError("ChannelMap: expected 35 column indices");
    for (std::size_t c = 0; c < e.size(); ++c)
      e[c].index = columns[c];
    return ChannelMap(std::move(e));
  }

  const std::vector<ChannelEntry> &entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  const ChannelEntry &operator[](std::size_t c) const { return entries_.at(c); }

  std::vector<std::size_t> channels_in(SensorGroup g) const {
    std::vector<std::size_t> out;
    for (std::size_t c = 0; c < entries_.size(); ++c)
      if (in_group(entries_[c].sensor, g))
        out.push_back(c);
    return out;
  }

private:
  static std::vector<ChannelEntry> canonical_entries() {
    std::vector<ChannelEntry> e;
    for (int s = 0; s < 8; ++s)
      e.push_back({e.size(), static_cast<Sensor>(s), std::nullopt});
    for (int u = 0; u < 3; ++u)
      for (int a = 0; a < 9; ++a)
        e.push_back({e.size(), static_cast<Sensor>(8 + u), static_cast<Axis>(a)});
    return e;
  }

  void validate() const {
    if (entries_.size() != kNumChannels)
      throw ConfigError("ChannelMap: expected 35 entries, got " + std::to_string(entries_.size()));
    std::vector<bool> seen(kNumChannels, false);
    std::size_t emg = 0;
    std::set<std::pair<int, int>> keys;
    for (const auto &e : entries_) {
      if (e.index >= kNumChannels || seen[e.index])
        throw ConfigError("ChannelMap: column indices must be a permutation of 0..34");
      seen[e.index] = true;
      if (is_emg(e.sensor)) {
        ++emg;
        if (e.axis)
          throw ConfigError("ChannelMap: EMG entries carry no axis");
      } else if (!e.axis) {
        throw ConfigError("ChannelMap: IMU entries need an axis");
      }
      if (!keys.insert({static_cast<int>(e.sensor), e.axis ? static_cast<int>(*e.axis) : -1}).second)
        throw ConfigError("ChannelMap: duplicate sensor/axis entry");
    }
    if (emg != kNumEmgChannels)
      throw ConfigError("ChannelMap: expected 8 EMG entries");
  }

  std::vector<ChannelEntry> entries_;
};

//------------------------------------------------------------------------------
// Trial

/// A labelled recording stored channel-major: data[c * length + t].
/// Full trials are 35 x 5000; modality selection yields fewer channels.
struct Trial {
  std::size_t channels = kNumChannels;
  std::size_t length = kTrialLength;
  std::vector<double> data;
  Label label = Label::TurnLeft;
  int subject_id = 0;
  bool preprocessed = false;

  Trial() : data(kNumChannels * kTrialLength, 0.0) {}
  Trial(std::size_t ch, std::size_t len) : channels(ch), length(len), data(ch * len, 0.0) {}

  std::span<double> channel(std::size_t c) {
    return std::span<double>(data).subspan(c * length, length);
  }
  std::span<const double> channel(std::size_t c) const {
    return std::span<const double>(data).subspan(c * length, length);
  }
  double at(std::size_t c, std::size_t t) const { return data[c * length + t]; }

  bool is_full() const { return channels == kNumChannels && length == kTrialLength; }

  bool operator==(const Trial &) const = default;
};

//------------------------------------------------------------------------------
// CSV I/O

namespace detail {

inline double parse_cell(std::string_view cell, std::size_t row, std::size_t col) {
  while (!cell.empty() && (cell.front() == ' ' || cell.front() == '\t'))
    cell.remove_prefix(1);
  while (!cell.empty() && (cell.back() == ' ' || cell.back() == '\t' || cell.back() == '\r'))
    cell.remove_suffix(1);
  double v = 0.0;
  if (!cell.empty() && cell.front() == '+')
    cell.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
  if (cell.empty() || ec != std::errc() || ptr != cell.data() + cell.size() || !std::isfinite(v))
    throw ParseError("non-numeric cell '" + std::string(cell) + "' at row " + std::to_string(row) +
                     ", column " + std::to_string(col));
  return v;
}

inline std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

using io::read_file;
using io::write_file_atomic;

} // namespace detail

/// Parses a headerless numeric CSV with exactly `rows` x `cols` cells.
inline std::vector<double> parse_csv_matrix(std::string_view text, std::size_t rows,
                                            std::size_t cols) {
  std::vector<double> cells;
  cells.reserve(rows * cols);
  std::size_t row = 0;
  std::size_t max_cols = 0;
  bool bad_cols = false;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string_view::npos)
      eol = text.size();
    std::string_view line = text.substr(pos, eol - pos);
    pos = eol + 1;
    if (!line.empty() && line.back() == '\r')
      line.remove_suffix(1);
    if (line.empty())
      continue;
    std::size_t col = 0;
    std::size_t start = 0;
    while (true) {
      const std::size_t comma = line.find(',', start);
      const auto cell = line.substr(start, comma == std::string_view::npos ? line.npos : comma - start);
      const double v = detail::parse_cell(cell, row, col);
      if (row < rows && col < cols)
        cells.push_back(v);
      ++col;
      if (comma == std::string_view::npos)
        break;
      start = comma + 1;
    }
    max_cols = std::max(max_cols, col);
    if (col != cols)
      bad_cols = true;
    ++row;
  }
  if (row != rows || bad_cols)
    throw FormatError("expected " + std::to_string(rows) + " rows x " + std::to_string(cols) +
                      " columns, observed " + std::to_string(row) + " rows x " +
                      std::to_string(max_cols) + " columns");
  return cells;
}

/// Loads one trial file (5000 rows x 35 columns, no header). Label and
/// subject are parsed from a `<subject>_<label>_<index>.csv` file name when
/// it follows that pattern.
inline Trial load_trial_csv(const std::filesystem::path &path,
                            const ChannelMap &map = ChannelMap::canonical()) {
  const std::string text = detail::read_file(path);
  std::vector<double> cells;
  try {
    cells = parse_csv_matrix(text, kTrialLength, kNumChannels);
  } catch (const ParseError &e) {
    throw ParseError(path.string() + ": " + e.what());
  } catch (const FormatError &e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  Trial t;
  for (std::size_t c = 0; c < kNumChannels; ++c) {
    const std::size_t col = map[c].index;
    auto dst = t.channel(c);
    for (std::size_t r = 0; r < kTrialLength; ++r)
      dst[r] = cells[r * kNumChannels + col];
  }
  const std::string stem = path.stem().string();
  const auto a = stem.find('_');
  const auto b = stem.rfind('_');
  if (a != std::string::npos && b != std::string::npos && a < b) {
    try {
      t.subject_id = std::stoi(stem.substr(0, a));
      t.label = parse_label(stem.substr(a + 1, b - a - 1));
    } catch (const std::exception &) {
      // Name does not follow the convention; the caller supplies metadata.
    }
  }
  return t;
}

inline std::string trial_to_csv(const Trial &t, const ChannelMap &map = ChannelMap::canonical()) {
  if (!t.is_full())
    throw ArgumentError("trial_to_csv: only full 35 x 5000 trials are written");
  std::vector<std::size_t> channel_at_col(kNumChannels);
  for (std::size_t c = 0; c < kNumChannels; ++c)
    channel_at_col[map[c].index] = c;
  std::string out;
  out.reserve(kTrialLength * kNumChannels * 12);
  for (std::size_t r = 0; r < kTrialLength; ++r) {
    for (std::size_t col = 0; col < kNumChannels; ++col) {
      if (col)
        out.push_back(',');
      out += detail::format_double(t.at(channel_at_col[col], r));
    }
    out.push_back('\n');
  }
  return out;
}

/// Writes shortest round-trip decimal renderings, so reloading is exact.
inline void write_trial_csv(const Trial &t, const std::filesystem::path &path,
                            const ChannelMap &map = ChannelMap::canonical()) {
  detail::write_file_atomic(path, trial_to_csv(t, map));
}

inline std::string trial_file_name(int subject, Label label, std::size_t index) {
  return std::to_string(subject) + "_" + std::string(label_name(label)) + "_" +
         std::to_string(index) + ".csv";
}

//------------------------------------------------------------------------------
// Manifest (JSON lines: {"path": ..., "label": ..., "subject": ...})

struct ManifestEntry {
  std::filesystem::path path;
  Label label = Label::TurnLeft;
  int subject = 0;
  /// Set when the file already went through the preprocessing chain.
  bool preprocessed = false;
};

/// Paths in the returned entries are resolved against the manifest's directory.
inline std::vector<ManifestEntry> read_manifest(const std::filesystem::path &manifest) {
  std::ifstream in(manifest);
  if (!in)
    throw FormatError("cannot open manifest " + manifest.string());
  std::vector<ManifestEntry> out;
  std::string line;
  std::size_t lineno = 0;
  const auto base = manifest.parent_path();
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos)
      continue;
    try {
      const auto j = nlohmann::json::parse(line);
      ManifestEntry e;
      std::filesystem::path p = j.at("path").get<std::string>();
      e.path = p.is_absolute() ? p : base / p;
      e.label = parse_label(j.at("label").get<std::string>());
      e.subject = j.at("subject").get<int>();
      e.preprocessed = j.value("preprocessed", false);
      out.push_back(std::move(e));
    } catch (const nlohmann::json::exception &ex) {
      throw ParseError(manifest.string() + ":" + std::to_string(lineno) + ": " + ex.what());
    }
  }
  if (out.empty())
    throw FormatError("manifest " + manifest.string() + " lists no trials");
  return out;
}

/// Stores paths relative to the manifest's directory when possible.
inline void write_manifest(const std::filesystem::path &manifest,
                           std::span<const ManifestEntry> entries) {
  std::string out;
  const auto base = manifest.parent_path();
  for (const auto &e : entries) {
    auto p = e.path;
    if (!base.empty() && p.is_absolute() == base.is_absolute())
      p = p.lexically_relative(base);
    nlohmann::ordered_json j;
    j["path"] = p.generic_string();
    j["label"] = std::string(label_name(e.label));
    j["subject"] = e.subject;
    if (e.preprocessed)
      j["preprocessed"] = true;
    out += j.dump();
    out.push_back('\n');
  }
  detail::write_file_atomic(manifest, out);
}

inline std::vector<Trial> load_manifest_trials(const std::filesystem::path &manifest,
                                               const ChannelMap &map = ChannelMap::canonical()) {
  std::vector<Trial> trials;
  for (const auto &e : read_manifest(manifest)) {
    Trial t = load_trial_csv(e.path, map);
    t.label = e.label;
    t.subject_id = e.subject;
    t.preprocessed = e.preprocessed;
    trials.push_back(std::move(t));
  }
  return trials;
}

//------------------------------------------------------------------------------
// Splitting

struct SplitSpec {
  double train_fraction = 0.8;
  std::uint64_t seed = 0;
  bool stratified = true;
};

/// Indices into the input sequence, each list ascending.
struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

/// Seeded partition of trial indices. Stratified splits take
/// round(fraction * n_c) training trials from each class.
inline Split split_dataset(std::span<const Label> labels, const SplitSpec &spec) {
  if (labels.empty())
    throw ArgumentError("split_dataset: empty input");
  if (!(spec.train_fraction > 0.0 && spec.train_fraction < 1.0))
    throw ArgumentError("split_dataset: train_fraction must lie in (0, 1)");
  Rng rng(mix_seed(spec.seed, 0x5b117));
  Split out;
  auto take = [&](std::vector<std::size_t> idx) {
    rng.shuffle(std::span<std::size_t>(idx));
    const auto n_train = static_cast<std::size_t>(
        std::llround(spec.train_fraction * static_cast<double>(idx.size())));
    out.train.insert(out.train.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_train));
    out.test.insert(out.test.end(), idx.begin() + static_cast<std::ptrdiff_t>(n_train), idx.end());
  };
  if (spec.stratified) {
    std::array<std::vector<std::size_t>, kNumClasses> by_class;
    for (std::size_t i = 0; i < labels.size(); ++i)
      by_class[static_cast<std::size_t>(labels[i])].push_back(i);
    for (std::size_t c = 0; c < kNumClasses; ++c) {
      if (by_class[c].empty())
        continue;
      if (by_class[c].size() < 5)
        throw ArgumentError("split_dataset: stratified split needs >= 5 trials of class " +
                            std::string(kLabelNames[c]));
      take(std::move(by_class[c]));
    }
  } else {
    std::vector<std::size_t> all(labels.size());
    for (std::size_t i = 0; i < all.size(); ++i)
      all[i] = i;
    take(std::move(all));
  }
  std::ranges::sort(out.train);
  std::ranges::sort(out.test);
  return out;
}

inline std::vector<Label> labels_of(std::span<const Trial> trials) {
  std::vector<Label> out;
  out.reserve(trials.size());
  for (const auto &t : trials)
    out.push_back(t.label);
  return out;
}

inline Split split_dataset(std::span<const Trial> trials, const SplitSpec &spec) {
  const auto labels = labels_of(trials);
  return split_dataset(std::span<const Label>(labels), spec);
}

//------------------------------------------------------------------------------
// Channel selection and masking

enum class ModalitySet { ALL, IMU_ONLY, EMG_ONLY, SINGLE_LEG_RIGHT };

inline std::string_view modality_name(ModalitySet m) {
  switch (m) {
  case ModalitySet::ALL:
    return "all";
  case ModalitySet::IMU_ONLY:
    return "imu";
  case ModalitySet::EMG_ONLY:
    return "emg";
  case ModalitySet::SINGLE_LEG_RIGHT:
    return "single-leg";
  }
  return "?";
}

inline ModalitySet parse_modality(std::string_view s) {
  for (auto m : {ModalitySet::ALL, ModalitySet::IMU_ONLY, ModalitySet::EMG_ONLY,
                 ModalitySet::SINGLE_LEG_RIGHT})
    if (modality_name(m) == s)
      return m;
  throw ArgumentError("unknown modality '" + std::string(s) + "' (expected all, imu, emg, single-leg)");
}

/// Canonical channel indices kept by a modality, in ChannelMap order.
inline std::vector<std::size_t> modality_channels(ModalitySet m,
                                                  const ChannelMap &map = ChannelMap::canonical()) {
  std::vector<std::size_t> out;
  for (std::size_t c = 0; c < map.size(); ++c) {
    const Sensor s = map[c].sensor;
    bool keep = false;
    switch (m) {
    case ModalitySet::ALL:
      keep = true;
      break;
    case ModalitySet::IMU_ONLY:
      keep = !is_emg(s);
      break;
    case ModalitySet::EMG_ONLY:
      keep = is_emg(s);
      break;
    case ModalitySet::SINGLE_LEG_RIGHT:
      keep = is_right_leg(s);
      break;
    }
    if (keep)
      out.push_back(c);
  }
  return out;
}

inline Trial select_channels(const Trial &t, std::span<const std::size_t> channels) {
  Trial out(channels.size(), t.length);
  out.label = t.label;
  out.subject_id = t.subject_id;
  out.preprocessed = t.preprocessed;
  for (std::size_t i = 0; i < channels.size(); ++i) {
    if (channels[i] >= t.channels)
      throw ArgumentError("select_channels: channel index out of range");
    std::ranges::copy(t.channel(channels[i]), out.channel(i).begin());
  }
  return out;
}

inline Trial select_modality(const Trial &t, ModalitySet m) {
  if (!t.is_full())
    throw ArgumentError("select_modality: expects a full 35-channel trial");
  const auto ch = modality_channels(m);
  return select_channels(t, ch);
}

struct SensorMask {
  std::set<SensorGroup> disabled;

  bool empty() const { return disabled.empty(); }

  std::string describe() const {
    if (disabled.empty())
      return "none";
    std::string s;
    for (auto g : disabled) {
      if (!s.empty())
        s += "+";
      s += group_name(g);
    }
    return s;
  }

  static SensorMask parse(std::span<const std::string> names) {
    SensorMask m;
    for (const auto &n : names)
      m.disabled.insert(parse_sensor_group(n));
    return m;
  }
};

/// Canonical channels zeroed by a mask.
inline std::vector<std::size_t> masked_channels(const SensorMask &mask,
                                                const ChannelMap &map = ChannelMap::canonical()) {
  std::vector<std::size_t> out;
  for (auto g : mask.disabled) {
    auto ch = map.channels_in(g);
    out.insert(out.end(), ch.begin(), ch.end());
  }
  std::ranges::sort(out);
  return out;
}

inline Trial apply_sensor_mask(const Trial &t, const SensorMask &mask) {
  if (!t.is_full())
    throw ArgumentError("apply_sensor_mask: expects a full 35-channel trial");
  Trial out = t;
  for (std::size_t c : masked_channels(mask))
    std::ranges::fill(out.channel(c), 0.0);
  return out;
}

//------------------------------------------------------------------------------
// Preprocessing

struct PreprocessConfig {
  signal::FilterSpec emg_filter{5, 0.2, 400.0, kSampleRateHz};
  signal::FilterSpec imu_filter{5, 0.2, 10.0, kSampleRateHz};
  signal::HampelConfig hampel{25, 3.0};

  nlohmann::ordered_json to_json() const {
    auto spec = [](const signal::FilterSpec &f) {
      nlohmann::ordered_json j;
      j["type"] = "butterworth_bandpass";
      j["order"] = f.order;
      j["low_cut_hz"] = f.low_cut_hz;
      j["high_cut_hz"] = f.high_cut_hz;
      j["sample_rate_hz"] = f.sample_rate_hz;
      j["application"] = "zero_phase";
      return j;
    };
    nlohmann::ordered_json j;
    j["emg"]["adc"] = {{"bits", 12}, {"reference_volts", signal::kAdcReferenceVolts}};
    j["emg"]["hampel"] = {{"half_window", hampel.half_window},
                          {"threshold_sigmas", hampel.threshold_sigmas}};
    j["emg"]["filter"] = spec(emg_filter);
    j["imu"]["filter"] = spec(imu_filter);
    j["normalization"] = "per-channel zero mean, unit population variance";
    return j;
  }
};

/// Filters designed once and reused across trials.
struct Preprocessor {
  PreprocessConfig config;
  signal::BiquadCascade emg;
  signal::BiquadCascade imu;

  explicit Preprocessor(PreprocessConfig cfg = {})
      : config(cfg), emg(signal::design_butterworth_bandpass(cfg.emg_filter)),
        imu(signal::design_butterworth_bandpass(cfg.imu_filter)) {}

  /// EMG counts: volts, Hampel, bandpass, normalize.
  std::vector<double> emg_channel(std::span<const double> counts) const {
    auto v = signal::adc_to_voltage(counts);
    v = signal::hampel_filter(v, config.hampel);
    v = signal::apply_filter_zero_phase(emg, v);
    return signal::normalize_channel(v);
  }

  /// IMU at 1000 Hz: bandpass, normalize. 125-sample native-rate rows are
  /// first upsampled by 40.
  std::vector<double> imu_channel(std::span<const double> x) const {
    if (x.size() == kImuNativeLength) {
      auto up = signal::upsample_linear(x, kImuUpsampleFactor);
      return imu_channel(up);
    }
    auto v = signal::apply_filter_zero_phase(imu, x);
    return signal::normalize_channel(v);
  }

  Trial operator()(const Trial &raw, const ChannelMap &map = ChannelMap::canonical()) const {
    if (!raw.is_full())
      throw ArgumentError("preprocess_trial: expects a full 35 x 5000 trial");
    std::vector<std::vector<double>> emg_v;
    std::vector<std::size_t> emg_c, imu_c;
    std::vector<std::span<const double>> imu_in;
    for (std::size_t c = 0; c < raw.channels; ++c) {
      if (is_emg(map[c].sensor)) {
        emg_v.push_back(signal::hampel_filter(signal::adc_to_voltage(raw.channel(c)), config.hampel));
        emg_c.push_back(c);
      } else {
        imu_in.push_back(raw.channel(c));
        imu_c.push_back(c);
      }
    }
    std::vector<std::span<const double>> emg_in(emg_v.begin(), emg_v.end());
    const auto emg_f = signal::apply_filter_zero_phase(emg, std::span<const std::span<const double>>(emg_in));
    const auto imu_f = signal::apply_filter_zero_phase(imu, std::span<const std::span<const double>>(imu_in));
    Trial out = raw;
    for (std::size_t k = 0; k < emg_c.size(); ++k)
      std::ranges::copy(signal::normalize_channel(emg_f[k]), out.channel(emg_c[k]).begin());
    for (std::size_t k = 0; k < imu_c.size(); ++k)
      std::ranges::copy(signal::normalize_channel(imu_f[k]), out.channel(imu_c[k]).begin());
    out.preprocessed = true;
    return out;
  }
};

/// Raw channels with possibly native-rate (125-sample) IMU rows.
struct RawTrial {
  std::array<std::vector<double>, kNumChannels> channels;
  Label label = Label::TurnLeft;
  int subject_id = 0;
};

inline Trial preprocess_trial(const Trial &raw, const ChannelMap &map = ChannelMap::canonical(),
                              const PreprocessConfig &cfg = {}) {
  return Preprocessor(cfg)(raw, map);
}

inline Trial preprocess_trial(const RawTrial &raw, const ChannelMap &map = ChannelMap::canonical(),
                              const PreprocessConfig &cfg = {}) {
  Trial full;
  full.label = raw.label;
  full.subject_id = raw.subject_id;
  for (std::size_t c = 0; c < kNumChannels; ++c) {
    const auto &x = raw.channels[c];
    const bool emg = is_emg(map[c].sensor);
    if (x.size() == kTrialLength) {
      std::ranges::copy(x, full.channel(c).begin());
    } else if (!emg && x.size() == kImuNativeLength) {
      std::ranges::copy(signal::upsample_linear(x, kImuUpsampleFactor), full.channel(c).begin());
    } else {
      throw SizeError("preprocess_trial: channel " + std::to_string(c) + " has " +
                      std::to_string(x.size()) + " samples");
    }
  }
  return Preprocessor(cfg)(full, map);
}

} // namespace exo::data
