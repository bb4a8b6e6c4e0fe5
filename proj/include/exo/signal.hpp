#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <limits>
#include <cstddef>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "exo/errors.hpp"

// Signal conditioning for raw EMG and IMU channels: ADC conversion, outlier
// removal, Butterworth bandpass design and zero-phase application,
// per-channel standardization, and linear-interpolation upsampling.
//
// Everything here is a pure function of its arguments and works in double.

namespace exo::signal {

enum class Modality { EMG, IMU };

/// A single raw sensor stream.
struct RawChannel {
  std::vector<double> samples;
  double sample_rate_hz = 1000.0;
  Modality modality = Modality::EMG;
};

//------------------------------------------------------------------------------
// ADC conversion

inline constexpr double kAdcReferenceVolts = 1.1;
inline constexpr double kAdcFullScale = 4095.0; // 12-bit

/// Converts 12-bit ADC counts to volts: v = 1.1 * s / 4095.
inline std::vector<double> adc_to_voltage(std::span<const double> raw) {
  std::vector<double> out(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const double s = raw[i];
    if (!(s >= 0.0 && s <= kAdcFullScale))
      throw RangeError("adc_to_voltage: count " + std::to_string(s) +
                       " at index " + std::to_string(i) +
                       " outside [0, 4095]");
    out[i] = s * kAdcReferenceVolts / kAdcFullScale;
  }
  return out;
}

//------------------------------------------------------------------------------
// Hampel identifier

struct HampelConfig {
  std::size_t half_window = 25;
  double threshold_sigmas = 3.0;
};

/// Consistency constant relating the median absolute deviation to the
/// standard deviation of a Gaussian.
inline constexpr double kMadScale = 1.4826;

namespace detail {

inline double sorted_median(std::span<const double> w) {
  const std::size_t m = w.size();
  return m % 2 ? w[m / 2] : 0.5 * (w[m / 2 - 1] + w[m / 2]);
}

// Median of |w - med| for sorted w: deviations grow outward from med, so the
// two sides are merged until the middle rank is reached.
inline double sorted_mad(std::span<const double> w, double med) {
  const auto m = static_cast<std::ptrdiff_t>(w.size());
  std::ptrdiff_t r = std::lower_bound(w.begin(), w.end(), med) - w.begin();
  std::ptrdiff_t l = r - 1;
  auto pop = [&] {
    if (l < 0)
      return w[r++] - med;
    if (r >= m)
      return med - w[l--];
    const double dl = med - w[l], dr = w[r] - med;
    if (dl <= dr) {
      --l;
      return dl;
    }
    ++r;
    return dr;
  };
  double prev = 0.0, cur = 0.0;
  for (std::ptrdiff_t k = 0; k <= m / 2; ++k) {
    prev = cur;
    cur = pop();
  }
  return m % 2 ? cur : 0.5 * (prev + cur);
}

} // namespace detail

/// Replaces samples that deviate from their window median by more than
/// threshold_sigmas robust standard deviations (1.4826 * MAD) with that
/// median. Windows shrink at the ends of the sequence.
inline std::vector<double> hampel_filter(std::span<const double> x,
                                         const HampelConfig &cfg = {}) {
  if (cfg.half_window < 1)
    throw ConfigError("hampel_filter: half_window must be >= 1");
  if (!(cfg.threshold_sigmas > 0.0))
    throw ConfigError("hampel_filter: threshold_sigmas must be > 0");
  const std::size_t n = x.size();
  const std::size_t k = cfg.half_window;
  if (n <= 2 * k)
    throw SizeError("hampel_filter: input of length " + std::to_string(n) +
                    " too short for half_window " + std::to_string(k));

  std::vector<double> out(x.begin(), x.end());
  // Sorted copy of the current window x[lo..hi].
  std::vector<double> win(x.begin(), x.begin() + static_cast<std::ptrdiff_t>(k));
  std::ranges::sort(win);
  for (std::size_t i = 0; i < n; ++i) {
    if (i + k < n)
      win.insert(std::upper_bound(win.begin(), win.end(), x[i + k]), x[i + k]);
    if (i > k)
      win.erase(std::lower_bound(win.begin(), win.end(), x[i - k - 1]));
    const double med = detail::sorted_median(win);
    const double sigma = kMadScale * detail::sorted_mad(win, med);
    if (std::abs(x[i] - med) > cfg.threshold_sigmas * sigma)
      out[i] = med;
  }
  return out;
}

//------------------------------------------------------------------------------
// Butterworth bandpass

struct FilterSpec {
  int order = 5;
  double low_cut_hz = 0.2;
  double high_cut_hz = 400.0;
  double sample_rate_hz = 1000.0;

  void validate() const {
    if (order < 1)
      throw ConfigError("FilterSpec: order must be >= 1");
    if (!(sample_rate_hz > 0.0))
      throw ConfigError("FilterSpec: sample rate must be positive");
    if (!(low_cut_hz > 0.0 && low_cut_hz < high_cut_hz &&
          high_cut_hz < sample_rate_hz / 2.0))
      throw ConfigError("FilterSpec: cutoffs must satisfy 0 < low (" +
                        std::to_string(low_cut_hz) + ") < high (" +
                        std::to_string(high_cut_hz) + ") < Nyquist (" +
                        std::to_string(sample_rate_hz / 2.0) + ")");
  }
};

/// Second-order section in transposed direct form II; a0 is 1.
struct Biquad {
  double b0 = 1.0, b1 = 0.0, b2 = 0.0;
  double a1 = 0.0, a2 = 0.0;

  std::complex<double> response(std::complex<double> z) const {
    const auto zi = 1.0 / z;
    return (b0 + zi * (b1 + zi * b2)) / (1.0 + zi * (a1 + zi * a2));
  }

  /// Roots of z^2 + a1 z + a2.
  std::pair<std::complex<double>, std::complex<double>> poles() const {
    const std::complex<double> disc = std::sqrt(std::complex<double>(a1 * a1 - 4.0 * a2));
    return {(-a1 + disc) / 2.0, (-a1 - disc) / 2.0};
  }
};

struct BiquadCascade {
  std::vector<Biquad> sections;
  double overall_gain = 1.0;

  /// Degree of the overall transfer function.
  std::size_t order() const { return 2 * sections.size(); }

  std::complex<double> response(double freq_hz, double sample_rate_hz) const {
    const double w = 2.0 * std::numbers::pi * freq_hz / sample_rate_hz;
    const std::complex<double> z = std::polar(1.0, w);
    std::complex<double> h = overall_gain;
    for (const auto &s : sections)
      h *= s.response(z);
    return h;
  }

  double magnitude(double freq_hz, double sample_rate_hz) const {
    return std::abs(response(freq_hz, sample_rate_hz));
  }

  std::vector<std::complex<double>> poles() const {
    std::vector<std::complex<double>> out;
    for (const auto &s : sections) {
      auto [p, q] = s.poles();
      out.push_back(p);
      out.push_back(q);
    }
    return out;
  }

  bool is_stable() const {
    return std::ranges::all_of(poles(), [](auto p) { return std::abs(p) < 1.0; });
  }
};

namespace detail {

inline std::complex<double> bilinear(std::complex<double> s, double fs) {
  return (2.0 * fs + s) / (2.0 * fs - s);
}

inline Biquad section_from_poles(std::complex<double> z1, std::complex<double> z2) {
  // z1, z2 are either a conjugate pair or both real.
  Biquad q;
  q.b0 = 1.0;
  q.b1 = 0.0;
  q.b2 = -1.0; // zeros at z = +1 and z = -1
  q.a1 = -(z1 + z2).real();
  q.a2 = (z1 * z2).real();
  return q;
}

} // namespace detail

/// Digital Butterworth bandpass: analog lowpass prototype, lowpass-to-bandpass
/// transform around prewarped band edges, then the bilinear transform. Each
/// prototype pole yields one biquad, so the cascade has spec.order sections.
/// Sections are scaled to unit magnitude at the digital center frequency.
inline BiquadCascade design_butterworth_bandpass(const FilterSpec &spec) {
  spec.validate();
  using cd = std::complex<double>;
  const double fs = spec.sample_rate_hz;
  const double pi = std::numbers::pi;
  const double w1 = 2.0 * fs * std::tan(pi * spec.low_cut_hz / fs);
  const double w2 = 2.0 * fs * std::tan(pi * spec.high_cut_hz / fs);
  const double w0sq = w1 * w2;
  const double bw = w2 - w1;
  const int n = spec.order;

  BiquadCascade cascade;
  for (int k = 0; k < n; ++k) {
    const cd p = std::polar(1.0, pi * (2.0 * k + n + 1) / (2.0 * n));
    if (p.imag() < -1e-12)
      continue; // handled with its conjugate
    if (std::abs(p.imag()) <= 1e-12) {
      // Real prototype pole at -1.
      const double disc = bw * bw - 4.0 * w0sq;
      if (disc >= 0.0) {
        const double r = std::sqrt(disc);
        const cd s1 = (-bw + r) / 2.0, s2 = (-bw - r) / 2.0;
        cascade.sections.push_back(detail::section_from_poles(
            detail::bilinear(s1, fs), detail::bilinear(s2, fs)));
      } else {
        const cd s(-bw / 2.0, std::sqrt(-disc) / 2.0);
        const cd z = detail::bilinear(s, fs);
        cascade.sections.push_back(detail::section_from_poles(z, std::conj(z)));
      }
      continue;
    }
    const cd pb = p * bw;
    const cd root = std::sqrt(pb * pb - 4.0 * w0sq);
    for (const cd s : {(pb + root) / 2.0, (pb - root) / 2.0}) {
      const cd z = detail::bilinear(s, fs);
      cascade.sections.push_back(detail::section_from_poles(z, std::conj(z)));
    }
  }

  const double f0 = fs / pi * std::atan(std::sqrt(w0sq) / (2.0 * fs));
  const cd z0 = std::polar(1.0, 2.0 * pi * f0 / fs);
  for (auto &s : cascade.sections) {
    const double g = std::abs(s.response(z0));
    s.b0 /= g;
    s.b1 /= g;
    s.b2 /= g;
  }
  cascade.overall_gain = 1.0 / cascade.magnitude(f0, fs);
  return cascade;
}

//------------------------------------------------------------------------------
// Filtering

/// Minimum input length accepted by apply_filter_zero_phase: three times the
/// order of the overall transfer function.
inline std::size_t zero_phase_min_padding(const BiquadCascade &c) { return 3 * c.order(); }

/// Samples needed for the slowest pole to decay by a factor of 1e-7.
inline std::size_t settling_length(const BiquadCascade &c) {
  double r = 0.0;
  for (auto p : c.poles())
    r = std::max(r, std::abs(p));
  if (r <= 0.0)
    return 0;
  if (r >= 1.0)
    throw ConfigError("settling_length: unstable cascade");
  return static_cast<std::size_t>(std::ceil(std::log(1e-7) / std::log(r)));
}

/// Edge padding on each side: at least three times the order, extended to
/// the settling length of the slowest pole so start-up transients die out
/// before reaching the data.
inline std::size_t zero_phase_padding(const BiquadCascade &c) {
  return std::max(zero_phase_min_padding(c), settling_length(c));
}

namespace detail {

// Index into the even (mirror) periodic extension of a length-n sequence.
inline std::size_t mirror_index(std::ptrdiff_t j, std::size_t n) {
  const auto period = static_cast<std::ptrdiff_t>(2 * (n - 1));
  j %= period;
  if (j < 0)
    j += period;
  return static_cast<std::size_t>(j < static_cast<std::ptrdiff_t>(n) ? j : period - j);
}

} // namespace detail

namespace detail {

inline constexpr std::size_t kLanes = 4;

// One pass of the cascade over `steps` interleaved samples (kLanes channels
// per step), starting from the steady state for a constant input equal to
// each lane's first sample. Backward passes walk the buffer in reverse. All
// sections advance together per step so their recursions overlap.
template <std::size_t S>
void sos_pass_fixed(const Biquad *sec, double gain, double *buf, std::size_t steps, bool forward) {
  constexpr std::size_t L = kLanes;
  double z1[S][L], z2[S][L];
  double level[L];
  const double *first = forward ? buf : buf + (steps - 1) * L;
  for (std::size_t l = 0; l < L; ++l)
    level[l] = first[l];
  for (std::size_t k = 0; k < S; ++k) {
    const auto &s = sec[k];
    const double g = (s.b0 + s.b1 + s.b2) / (1.0 + s.a1 + s.a2);
    for (std::size_t l = 0; l < L; ++l) {
      const double y_ss = g * level[l];
      z2[k][l] = s.b2 * level[l] - s.a2 * y_ss;
      z1[k][l] = s.b1 * level[l] - s.a1 * y_ss + z2[k][l];
      level[l] = y_ss;
    }
  }
  double b0[S], b1[S], b2[S], a1[S], a2[S];
  for (std::size_t k = 0; k < S; ++k) {
    b0[k] = sec[k].b0;
    b1[k] = sec[k].b1;
    b2[k] = sec[k].b2;
    a1[k] = sec[k].a1;
    a2[k] = sec[k].a2;
  }
  const std::ptrdiff_t stride = forward ? static_cast<std::ptrdiff_t>(L) : -static_cast<std::ptrdiff_t>(L);
  double *p = forward ? buf : buf + (steps - 1) * L;
  for (std::size_t t = 0; t < steps; ++t, p += stride) {
    double v[L];
    for (std::size_t l = 0; l < L; ++l)
      v[l] = p[l];
    for (std::size_t k = 0; k < S; ++k) {
      for (std::size_t l = 0; l < L; ++l) {
        const double in = v[l];
        const double out = b0[k] * in + z1[k][l];
        z1[k][l] = b1[k] * in - a1[k] * out + z2[k][l];
        z2[k][l] = b2[k] * in - a2[k] * out;
        v[l] = out;
      }
    }
    for (std::size_t l = 0; l < L; ++l)
      p[l] = gain * v[l];
  }
}

inline void sos_pass(const BiquadCascade &c, double *buf, std::size_t steps, bool forward) {
  const Biquad *sec = c.sections.data();
  const std::size_t n = c.sections.size();
  // Chunks of up to 4 sections keep the state in registers.
  for (std::size_t k = 0; k < n; k += 4) {
    const double gain = k + 4 >= n ? c.overall_gain : 1.0;
    switch (std::min<std::size_t>(4, n - k)) {
    case 1:
      sos_pass_fixed<1>(sec + k, gain, buf, steps, forward);
      break;
    case 2:
      sos_pass_fixed<2>(sec + k, gain, buf, steps, forward);
      break;
    case 3:
      sos_pass_fixed<3>(sec + k, gain, buf, steps, forward);
      break;
    default:
      sos_pass_fixed<4>(sec + k, gain, buf, steps, forward);
      break;
    }
  }
}

} // namespace detail

/// Forward-backward filtering of several equal-length channels with
/// mirror-reflection edge padding and steady-state initial conditions.
/// Zero net phase; squared magnitude. Inputs must be longer than
/// zero_phase_min_padding().
inline std::vector<std::vector<double>>
apply_filter_zero_phase(const BiquadCascade &cascade, std::span<const std::span<const double>> xs) {
  std::vector<std::vector<double>> out(xs.size());
  if (xs.empty())
    return out;
  const std::size_t n = xs.front().size();
  const std::size_t min_pad = zero_phase_min_padding(cascade);
  for (const auto &x : xs) {
    if (x.size() != n)
      throw SizeError("apply_filter_zero_phase: channels differ in length");
    if (n <= min_pad)
      throw SizeError("apply_filter_zero_phase: input of length " + std::to_string(n) +
                      " must exceed edge padding " + std::to_string(min_pad));
  }
  if (cascade.sections.empty()) {
    for (std::size_t k = 0; k < xs.size(); ++k)
      out[k].assign(xs[k].begin(), xs[k].end());
    return out;
  }
  constexpr std::size_t L = detail::kLanes;
  const auto pad = static_cast<std::ptrdiff_t>(zero_phase_padding(cascade));
  const auto len = static_cast<std::ptrdiff_t>(n);
  const std::size_t steps = n + 2 * static_cast<std::size_t>(pad);
  std::vector<double> buf(steps * L);
  for (std::size_t group = 0; group < xs.size(); group += L) {
    const std::size_t lanes = std::min(L, xs.size() - group);
    std::ranges::fill(buf, 0.0);
    for (std::size_t l = 0; l < lanes; ++l) {
      const auto &x = xs[group + l];
      for (std::ptrdiff_t j = -pad; j < len + pad; ++j)
        buf[static_cast<std::size_t>(j + pad) * L + l] = x[detail::mirror_index(j, n)];
    }
    detail::sos_pass(cascade, buf.data(), steps, true);
    detail::sos_pass(cascade, buf.data(), steps, false);
    for (std::size_t l = 0; l < lanes; ++l) {
      auto &y = out[group + l];
      y.resize(n);
      for (std::size_t i = 0; i < n; ++i)
        y[i] = buf[(i + static_cast<std::size_t>(pad)) * L + l];
    }
  }
  return out;
}

inline std::vector<double> apply_filter_zero_phase(const BiquadCascade &cascade,
                                                   std::span<const double> x) {
  const std::span<const double> one[1] = {x};
  return std::move(apply_filter_zero_phase(cascade, std::span<const std::span<const double>>(one)).front());
}

//------------------------------------------------------------------------------
// Standardization and resampling

inline constexpr double kDegenerateStd = 1e-12;

/// (x - mean) / std with population variance; all zeros when std < 1e-12.
inline std::vector<double> normalize_channel(std::span<const double> x) {
  if (x.empty())
    throw SizeError("normalize_channel: empty input");
  const double n = static_cast<double>(x.size());
  double mean = 0.0;
  for (double v : x)
    mean += v;
  mean /= n;
  double var = 0.0;
  for (double v : x)
    var += (v - mean) * (v - mean);
  const double sd = std::sqrt(var / n);
  std::vector<double> out(x.size(), 0.0);
  if (sd < kDegenerateStd)
    return out;
  for (std::size_t i = 0; i < x.size(); ++i)
    out[i] = (x[i] - mean) / sd;
  return out;
}

/// Linear interpolation by an integer factor. out[k*factor] == x[k]; the
/// factor-1 samples after the last input repeat it, so the output has
/// exactly factor * x.size() samples.
inline std::vector<double> upsample_linear(std::span<const double> x, std::size_t factor) {
  if (factor < 1)
    throw ArgumentError("upsample_linear: factor must be >= 1");
  if (x.size() < 2)
    throw SizeError("upsample_linear: need at least 2 samples");
  std::vector<double> out(x.size() * factor);
  const double f = static_cast<double>(factor);
  for (std::size_t k = 0; k + 1 < x.size(); ++k) {
    const double d = x[k + 1] - x[k];
    for (std::size_t j = 0; j < factor; ++j)
      out[k * factor + j] = x[k] + d * static_cast<double>(j) / f;
  }
  std::fill(out.end() - static_cast<std::ptrdiff_t>(factor), out.end(), x.back());
  return out;
}

} // namespace exo::signal
