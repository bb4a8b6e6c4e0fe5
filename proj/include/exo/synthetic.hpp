#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

#include "exo/dataset.hpp"
#include "exo/random.hpp"
#include "exo/signal.hpp"

// Deterministic synthetic trials for offline testing. Each motion class has a
// parametric signature: burst timing on the EMG channels and a motion
// envelope (pitch rate, yaw rate, heading, acceleration) on the IMUs. Subjects
// differ in tempo, electromechanical latency, electrode gains, IMU mounting
// rotation and muscle recruitment, which gives transfer-learning tests an
// inter-subject shift to overcome.
//
// Raw output mirrors the recorded format: EMG as 12-bit ADC counts at
// 1000 Hz, IMU sampled at 25 Hz and upsampled x40 to 5000 samples.

namespace exo::data {

struct SyntheticConfig {
  double subject_shift = 1.0;   ///< scales every inter-subject difference
  double emg_noise_counts = 12.0;
  double emg_burst_counts = 260.0;
  double imu_noise = 0.08;
  double spike_probability = 2e-4;
  double timing_jitter_s = 0.25;

  /// Wider subject differences and noisier, less stereotyped trials, so a
  /// model trained on other subjects transfers imperfectly and 10 samples
  /// per class are too few to learn from scratch.
  static SyntheticConfig subject_shifted() {
    SyntheticConfig c;
    c.subject_shift = 1.5;
    c.imu_noise = 0.8;
    c.emg_burst_counts = 120.0;
    c.timing_jitter_s = 0.8;
    return c;
  }

  /// "default" or "subject-shifted".
  static SyntheticConfig preset(std::string_view name) {
    if (name == "default")
      return {};
    if (name == "subject-shifted")
      return subject_shifted();
    throw ArgumentError("unknown synthetic preset '" + std::string(name) + "' (expected default, subject-shifted)");
  }
};

namespace synth_detail {

inline constexpr double kPi = std::numbers::pi;

inline double bump(double t, double center, double width) {
  const double z = (t - center) / width;
  return std::exp(-0.5 * z * z);
}

// Raised-cosine pulse train; width is a fraction of the period.
inline double pulse(double t, double period, double phase, double width) {
  double d = t / period - phase;
  d -= std::floor(d + 0.5);
  if (std::abs(d) >= width / 2)
    return 0.0;
  return 0.5 * (1.0 + std::cos(2.0 * kPi * d / width));
}

inline double gate(double t, double t0, double t1, double edge = 0.15) {
  auto ramp = [&](double x) {
    if (x <= 0)
      return 0.0;
    if (x >= 1)
      return 1.0;
    return x * x * (3.0 - 2.0 * x);
  };
  return ramp((t - t0) / edge) * ramp((t1 - t) / edge);
}

inline double smoothstep(double t, double t0, double t1) {
  const double x = std::clamp((t - t0) / (t1 - t0), 0.0, 1.0);
  return x * x * (3.0 - 2.0 * x);
}

struct SubjectProfile {
  double tempo = 1.0;
  double emg_latency_s = 0.05;
  std::array<double, kNumEmgChannels> emg_gain{};
  std::array<double, kNumEmgChannels> recruitment{}; ///< multiplies burst depth
  std::array<std::array<double, 9>, 3> mount{};      ///< row-major rotation per IMU
  std::array<double, 3> imu_gain{};
  double leg_phase = 0.5; ///< phase lag of the right leg in gait
};

inline std::array<double, 9> rotation(double yaw, double pitch, double roll) {
  const double cy = std::cos(yaw), sy = std::sin(yaw);
  const double cp = std::cos(pitch), sp = std::sin(pitch);
  const double cr = std::cos(roll), sr = std::sin(roll);
  return {cy * cp, cy * sp * sr - sy * cr, cy * sp * cr + sy * sr,
          sy * cp, sy * sp * sr + cy * cr, sy * sp * cr - cy * sr,
          -sp,     cp * sr,                cp * cr};
}

inline SubjectProfile subject_profile(int subject, const SyntheticConfig &cfg) {
  Rng rng(mix_seed(0x5ab1ec7ULL, static_cast<std::uint64_t>(subject)));
  const double s = cfg.subject_shift;
  SubjectProfile p;
  p.tempo = 1.0 + s * rng.uniform(-0.18, 0.18);
  p.emg_latency_s = 0.03 + s * rng.uniform(0.0, 0.12);
  for (auto &g : p.emg_gain)
    g = std::exp(s * rng.uniform(-0.45, 0.45));
  for (auto &r : p.recruitment)
    r = std::clamp(1.0 + s * rng.uniform(-0.6, 0.4), 0.15, 1.6);
  for (std::size_t u = 0; u < 3; ++u) {
    const double lim = s * 0.6; // radians
    p.mount[u] = rotation(rng.uniform(-lim, lim), rng.uniform(-lim, lim), rng.uniform(-lim, lim));
    p.imu_gain[u] = std::exp(s * rng.uniform(-0.3, 0.3));
  }
  p.leg_phase = 0.5 + s * rng.uniform(-0.12, 0.12);
  return p;
}

// Per-trial variation of the class template.
struct TrialVariation {
  double offset_s;
  double tempo;
  double heading0;
  std::array<double, kNumEmgChannels> amp;
  double imu_amp;
};

// EMG activation envelope in [0, ~1.2] for canonical EMG channel m at
// template time u (seconds, already warped).
inline double emg_envelope(Label label, std::size_t m, double u, double leg_phase) {
  const bool right = m >= 4;
  const std::size_t muscle = m % 4; // 0 TA, 1 GM, 2 GL, 3 SOL
  const double ph = right ? leg_phase : 0.0;
  switch (label) {
  case Label::Forwards: {
    const double T = 1.1;
    const double g = gate(u, 0.4, 4.6);
    static constexpr std::array<double, 4> amp{0.75, 0.9, 0.7, 1.0};
    if (muscle == 0)
      return g * amp[0] * pulse(u, T, 0.75 + ph, 0.22);
    return g * amp[muscle] * pulse(u, T, 0.35 + ph, 0.28);
  }
  case Label::Backwards: {
    const double T = 1.35;
    const double g = gate(u, 0.4, 4.6);
    static constexpr std::array<double, 4> amp{1.0, 0.35, 0.3, 0.55};
    if (muscle == 0)
      return g * amp[0] * pulse(u, T, 0.3 + ph, 0.35);
    return g * amp[muscle] * pulse(u, T, 0.8 + ph, 0.18);
  }
  case Label::TurnLeft:
  case Label::TurnRight: {
    // Pivot leg holds a tonic plantar-flexor contraction; the swing leg steps.
    const bool pivot_left = label == Label::TurnLeft;
    const bool pivot = pivot_left != right;
    const double g = gate(u, 1.0, 4.0, 0.3);
    if (pivot) {
      if (muscle == 0)
        return g * 0.25 * pulse(u, 1.0, 0.6, 0.3);
      return g * (muscle == 3 ? 0.55 : 0.45) * (0.7 + 0.3 * pulse(u, 1.0, 0.1, 0.5));
    }
    if (muscle == 0)
      return g * 1.0 * pulse(u, 1.0, 0.2, 0.25);
    return g * (muscle == 2 ? 0.8 : 0.5) * pulse(u, 1.0, 0.6, 0.25);
  }
  case Label::PickUpObject: {
    if (muscle == 0)
      return 1.0 * gate(u, 1.1, 2.1, 0.25);
    return (muscle == 2 ? 0.6 : 0.9) * gate(u, 2.7, 3.8, 0.25);
  }
  }
  return 0.0;
}

// IMU signals in the sensor's own frame for unit 0 (left shank), 1 (right
// shank), 2 (right foot): acc (g), gyro (rad/s scaled), mag (unit field).
inline std::array<double, 9> imu_sample(Label label, std::size_t unit, double u, double heading0,
                                        double leg_phase) {
  std::array<double, 9> v{};
  const double ph = unit == 0 ? 0.0 : leg_phase;
  const bool foot = unit == 2;
  double heading = heading0;
  double yaw_rate = 0.0, pitch_rate = 0.0, ax = 0.0, ay = 0.0, az = 1.0;
  switch (label) {
  case Label::Forwards: {
    const double T = 1.1;
    const double g = gate(u, 0.4, 4.6);
    const double w = 2.0 * kPi * (u / T - ph);
    pitch_rate = g * (foot ? 1.4 * std::pow(std::sin(w), 3) : std::sin(w));
    ax = g * (0.25 + 0.35 * std::sin(2 * w));
    az = 1.0 + g * 0.3 * std::cos(2 * w);
    ay = g * 0.1 * std::sin(w);
    break;
  }
  case Label::Backwards: {
    const double T = 1.35;
    const double g = gate(u, 0.4, 4.6);
    const double w = 2.0 * kPi * (u / T - ph);
    pitch_rate = -g * (foot ? 0.9 * std::sin(w) : 0.7 * std::sin(w + 0.6));
    ax = g * (-0.2 + 0.25 * std::sin(2 * w + 1.0));
    az = 1.0 + g * 0.2 * std::cos(2 * w);
    break;
  }
  case Label::TurnLeft:
  case Label::TurnRight: {
    const double sign = label == Label::TurnLeft ? 1.0 : -1.0;
    const double turn = kPi / 2 * smoothstep(u, 1.2, 3.8);
    heading += sign * turn;
    yaw_rate = sign * 1.2 * bump(u, 2.5, 0.7);
    const double g = gate(u, 1.0, 4.0, 0.3);
    const double w = 2.0 * kPi * (u - ph);
    pitch_rate = g * 0.45 * std::sin(w);
    ay = sign * 0.35 * bump(u, 2.5, 0.8);
    ax = g * 0.1 * std::sin(2 * w);
    break;
  }
  case Label::PickUpObject: {
    const double tilt = smoothstep(u, 1.2, 2.2) - smoothstep(u, 2.8, 3.8);
    pitch_rate = (foot ? 0.4 : 1.0) * (bump(u, 1.7, 0.3) - bump(u, 3.3, 0.3));
    ax = (foot ? 0.1 : 0.6) * tilt;
    az = 1.0 - 0.35 * tilt;
    break;
  }
  }
  v[0] = ax;
  v[1] = ay;
  v[2] = az;
  v[3] = 0.15 * yaw_rate * std::sin(heading); // small roll coupling
  v[4] = pitch_rate;
  v[5] = yaw_rate;
  v[6] = std::cos(heading);
  v[7] = std::sin(heading);
  v[8] = 0.4;
  return v;
}

} // namespace synth_detail

/// Raw (unpreprocessed) synthetic trial; deterministic in (label, subject, seed).
inline Trial generate_synthetic_raw(Label label, int subject_id, std::uint64_t seed,
                                    const SyntheticConfig &cfg = {}) {
  using namespace synth_detail;
  const auto sp = subject_profile(subject_id, cfg);
  Rng rng(mix_seed(seed, static_cast<std::uint64_t>(label), static_cast<std::uint64_t>(subject_id),
                   0x7a1a1ULL));

  TrialVariation var;
  var.offset_s = rng.uniform(-cfg.timing_jitter_s, cfg.timing_jitter_s);
  var.tempo = sp.tempo * rng.uniform(0.93, 1.07);
  var.heading0 = rng.uniform(0.0, 2.0 * kPi);
  for (auto &a : var.amp)
    a = rng.uniform(0.8, 1.2);
  var.imu_amp = rng.uniform(0.85, 1.15);

  Trial t;
  t.label = label;
  t.subject_id = subject_id;
  t.preprocessed = false;

  const double center = 2.5;
  auto warp = [&](double time) { return center + (time - center - var.offset_s) / var.tempo; };

  // EMG: amplitude-modulated Gaussian carrier on a 2048-count bias.
  for (std::size_t m = 0; m < kNumEmgChannels; ++m) {
    auto ch = t.channel(m);
    const double gain = sp.emg_gain[m];
    const double drift_f = rng.uniform(0.05, 0.3);
    const double drift_ph = rng.uniform(0.0, 2.0 * kPi);
    for (std::size_t i = 0; i < kTrialLength; ++i) {
      const double time = static_cast<double>(i) / kSampleRateHz;
      // EMG leads the motion it produces.
      const double u = warp(time + sp.emg_latency_s);
      const double env = emg_envelope(label, m, u, sp.leg_phase) * sp.recruitment[m] * var.amp[m];
      const double sd = gain * (cfg.emg_noise_counts + cfg.emg_burst_counts * env);
      double v = 2048.0 + 20.0 * std::sin(2.0 * kPi * drift_f * time + drift_ph) + sd * rng.normal();
      if (rng.uniform() < cfg.spike_probability)
        v = rng.uniform() < 0.5 ? 4095.0 : 0.0;
      ch[i] = std::clamp(std::round(v), 0.0, 4095.0);
    }
  }

  // IMU: 25 Hz native samples, rotated into each subject's mounting frame.
  for (std::size_t unit = 0; unit < 3; ++unit) {
    std::array<std::vector<double>, kAxesPerImu> native;
    for (auto &n : native)
      n.resize(kImuNativeLength);
    const auto &R = sp.mount[unit];
    for (std::size_t k = 0; k < kImuNativeLength; ++k) {
      const double time = static_cast<double>(k) * 5.0 / static_cast<double>(kImuNativeLength);
      const auto s = imu_sample(label, unit, warp(time), var.heading0, sp.leg_phase);
      for (std::size_t block = 0; block < 3; ++block) {
        for (std::size_t r = 0; r < 3; ++r) {
          double acc = 0.0;
          for (std::size_t c = 0; c < 3; ++c)
            acc += R[r * 3 + c] * s[block * 3 + c];
          const double amp = block == 2 ? 1.0 : sp.imu_gain[unit] * var.imu_amp;
          native[block * 3 + r][k] = amp * acc + cfg.imu_noise * rng.normal();
        }
      }
    }
    for (std::size_t a = 0; a < kAxesPerImu; ++a) {
      const auto up = signal::upsample_linear(native[a], kImuUpsampleFactor);
      std::ranges::copy(up, t.channel(kNumEmgChannels + unit * kAxesPerImu + a).begin());
    }
  }
  return t;
}

/// Preprocessed synthetic trial, ready for training.
inline Trial generate_synthetic_trial(Label label, int subject_id, std::uint64_t seed,
                                      const SyntheticConfig &cfg = {},
                                      const Preprocessor &pre = Preprocessor()) {
  return pre(generate_synthetic_raw(label, subject_id, seed, cfg));
}

/// per_class trials of every class for each subject 0..subjects-1. Trial k of
/// (subject, class) uses seed mix(seed, k).
inline std::vector<Trial> generate_corpus(std::size_t per_class, int subjects, std::uint64_t seed,
                                          const SyntheticConfig &cfg = {}, bool preprocess = true) {
  if (per_class == 0 || subjects <= 0)
    throw ArgumentError("generate_corpus: per_class and subjects must be positive");
  const Preprocessor pre;
  std::vector<Trial> out;
  out.reserve(per_class * kNumClasses * static_cast<std::size_t>(subjects));
  for (int s = 0; s < subjects; ++s)
    for (std::size_t c = 0; c < kNumClasses; ++c)
      for (std::size_t k = 0; k < per_class; ++k) {
        const auto trial_seed = mix_seed(seed, k);
        auto raw = generate_synthetic_raw(static_cast<Label>(c), s, trial_seed, cfg);
        out.push_back(preprocess ? pre(raw) : std::move(raw));
      }
  return out;
}

} // namespace exo::data
