#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "exo/signal.hpp"

using namespace exo;
using namespace exo::signal;

namespace {

constexpr double kPi = std::numbers::pi;

// Brute-force Hampel rule with full sorts, independent of the nth_element path.
std::vector<double> hampel_reference(const std::vector<double> &x, std::size_t k, double t) {
  auto median = [](std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
  };
  std::vector<double> out = x;
  const long n = static_cast<long>(x.size());
  for (long i = 0; i < n; ++i) {
    std::vector<double> w;
    for (long j = i - static_cast<long>(k); j <= i + static_cast<long>(k); ++j)
      if (j >= 0 && j < n)
        w.push_back(x[j]);
    const double med = median(w);
    std::vector<double> dev;
    for (double v : w)
      dev.push_back(std::fabs(v - med));
    if (std::fabs(x[i] - med) > t * 1.4826 * median(dev))
      out[i] = med;
  }
  return out;
}

// Analog Butterworth bandpass magnitude at the prewarped frequency; the
// bilinear transform maps it exactly onto the digital response.
double butterworth_oracle(const FilterSpec &s, double f) {
  const double fs = s.sample_rate_hz;
  auto warp = [&](double hz) { return 2.0 * fs * std::tan(kPi * hz / fs); };
  const double w1 = warp(s.low_cut_hz), w2 = warp(s.high_cut_hz), w = warp(f);
  const double omega = (w * w - w1 * w2) / (w * (w2 - w1));
  return 1.0 / std::sqrt(1.0 + std::pow(omega, 2 * s.order));
}

std::vector<double> sine(std::size_t n, double freq, double fs, double amp = 1.0,
                         double phase = 0.0) {
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i)
    x[i] = amp * std::sin(2 * kPi * freq * static_cast<double>(i) / fs + phase);
  return x;
}

} // namespace

TEST(AdcToVoltage, ZeroFullScaleAndHalf) {
  std::vector<double> raw{0, 4095, 2048};
  auto v = adc_to_voltage(raw);
  EXPECT_EQ(v[0], 0.0);
  EXPECT_NEAR(v[1], 1.1, 1e-15);
  EXPECT_NEAR(v[2], 2048.0 * 1.1 / 4095.0, 1e-15);
  EXPECT_NEAR(v[2], 0.5501343101, 1e-10);
}

TEST(AdcToVoltage, OutOfRangeNamesIndex) {
  std::vector<double> raw{10, 20, 4096};
  try {
    adc_to_voltage(raw);
    FAIL() << "expected RangeError";
  } catch (const RangeError &e) {
    EXPECT_NE(std::string(e.what()).find("index 2"), std::string::npos);
  }
  std::vector<double> neg{-1};
  EXPECT_THROW(adc_to_voltage(neg), RangeError);
}

TEST(Hampel, ConstantUnchanged) {
  std::vector<double> x(200, 5.0);
  EXPECT_EQ(hampel_filter(x), x);
}

TEST(Hampel, SingleSpikeReplaced) {
  std::vector<double> x(101, 0.0);
  x[50] = 100.0;
  auto y = hampel_filter(x, {25, 3.0});
  EXPECT_EQ(y, std::vector<double>(101, 0.0));
  EXPECT_EQ(y, hampel_reference(x, 25, 3.0));
}

TEST(Hampel, SineHasNoFalseReplacements) {
  auto x = sine(2000, 5.0, 1000.0);
  auto y = hampel_filter(x);
  auto ref = hampel_reference(x, 25, 3.0);
  EXPECT_EQ(ref, x);
  for (std::size_t i = 0; i < x.size(); ++i)
    EXPECT_NEAR(y[i], x[i], 1e-12);
}

TEST(Hampel, MatchesReferenceOnNoisyData) {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> pos(0, 999);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<double> x(1000);
    for (auto &v : x)
      v = g(rng);
    for (int s = 0; s < 20; ++s)
      x[pos(rng)] += 15.0 * (s % 2 ? 1 : -1);
    // Exact equality: both select the same order statistics.
    EXPECT_EQ(hampel_filter(x), hampel_reference(x, 25, 3.0));
    EXPECT_EQ(hampel_filter(x, {7, 2.0}), hampel_reference(x, 7, 2.0));
  }
}

TEST(Hampel, IdempotentOnSpikeFreeSignal) {
  auto x = sine(1500, 3.0, 1000.0, 2.0);
  auto once = hampel_filter(x);
  EXPECT_EQ(hampel_filter(once), once);
}

TEST(Hampel, Errors) {
  std::vector<double> x(50, 1.0);
  EXPECT_THROW(hampel_filter(x, {25, 3.0}), SizeError);
  EXPECT_THROW(hampel_filter(x, {0, 3.0}), ConfigError);
  EXPECT_THROW(hampel_filter(x, {5, 0.0}), ConfigError);
}

TEST(Butterworth, EmgStopbands) {
  FilterSpec s{5, 0.2, 400.0, 1000.0};
  auto c = design_butterworth_bandpass(s);
  EXPECT_EQ(c.sections.size(), 5u);
  EXPECT_LT(c.magnitude(0.05, 1000.0), 0.05);
  EXPECT_LT(c.magnitude(490.0, 1000.0), 0.2);
  EXPECT_TRUE(c.is_stable());
}

TEST(Butterworth, ImuCenterAndCutoffs) {
  FilterSpec s{5, 0.2, 10.0, 1000.0};
  auto c = design_butterworth_bandpass(s);
  double peak = 0.0;
  for (double f = 0.01; f < 500.0; f *= 1.01)
    peak = std::max(peak, c.magnitude(f, 1000.0));
  const double center = std::sqrt(0.2 * 10.0);
  EXPECT_NEAR(c.magnitude(center, 1000.0), peak, 1e-3);
  EXPECT_NEAR(c.magnitude(0.2, 1000.0) / peak, 1.0 / std::sqrt(2.0), 1e-3 / std::sqrt(2.0));
  EXPECT_NEAR(c.magnitude(10.0, 1000.0) / peak, 1.0 / std::sqrt(2.0), 1e-3 / std::sqrt(2.0));
  for (auto p : c.poles())
    EXPECT_LT(std::abs(p), 1.0);
}

TEST(Butterworth, MatchesAnalogPrototypeOnGrid) {
  for (const FilterSpec s : {FilterSpec{5, 0.2, 400.0, 1000.0}, FilterSpec{5, 0.2, 10.0, 1000.0},
                             FilterSpec{2, 5.0, 50.0, 500.0}, FilterSpec{3, 1.0, 4.0, 100.0}}) {
    auto c = design_butterworth_bandpass(s);
    EXPECT_EQ(c.sections.size(), static_cast<std::size_t>(s.order));
    for (double f = 0.01; f < s.sample_rate_hz / 2; f *= 1.05)
      EXPECT_NEAR(c.magnitude(f, s.sample_rate_hz), butterworth_oracle(s, f), 1e-8) << f;
  }
}

TEST(Butterworth, RandomSpecsAreStable) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 200; ++i) {
    FilterSpec s;
    s.order = 1 + static_cast<int>(u(rng) * 8);
    s.sample_rate_hz = 100.0 + 2000.0 * u(rng);
    const double nyq = s.sample_rate_hz / 2;
    s.low_cut_hz = nyq * (0.001 + 0.5 * u(rng));
    s.high_cut_hz = s.low_cut_hz + (nyq - s.low_cut_hz) * (0.05 + 0.9 * u(rng));
    auto c = design_butterworth_bandpass(s);
    EXPECT_TRUE(c.is_stable()) << s.order << " " << s.low_cut_hz << " " << s.high_cut_hz;
  }
}

TEST(Butterworth, InvalidSpecs) {
  EXPECT_THROW(design_butterworth_bandpass({5, 0.0, 10.0, 1000.0}), ConfigError);
  EXPECT_THROW(design_butterworth_bandpass({5, 20.0, 10.0, 1000.0}), ConfigError);
  EXPECT_THROW(design_butterworth_bandpass({5, 0.2, 500.0, 1000.0}), ConfigError);
  EXPECT_THROW(design_butterworth_bandpass({0, 0.2, 10.0, 1000.0}), ConfigError);
}

TEST(ZeroPhase, ZerosStayZero) {
  auto c = design_butterworth_bandpass({5, 0.2, 400.0, 1000.0});
  std::vector<double> x(5000, 0.0);
  EXPECT_EQ(apply_filter_zero_phase(c, x), x);
}

TEST(ZeroPhase, PassbandSinePreserved) {
  auto c = design_butterworth_bandpass({5, 0.2, 400.0, 1000.0});
  auto x = sine(5000, 50.0, 1000.0);
  auto y = apply_filter_zero_phase(c, x);
  ASSERT_EQ(y.size(), x.size());
  // Peak amplitude over each 20 ms period in the central 80%.
  for (std::size_t start = 500; start + 20 <= 4500; start += 20) {
    double amp = 0.0;
    for (std::size_t i = start; i < start + 20; ++i)
      amp = std::max(amp, std::fabs(y[i]));
    EXPECT_GE(amp, 0.98);
    EXPECT_LE(amp, 1.02);
  }
}

TEST(ZeroPhase, DcRejected) {
  auto c = design_butterworth_bandpass({5, 0.2, 10.0, 1000.0});
  std::vector<double> x(5000, 3.0);
  auto y = apply_filter_zero_phase(c, x);
  for (std::size_t i = 500; i < 4500; ++i)
    EXPECT_NEAR(y[i], 0.0, 0.05);
}

TEST(ZeroPhase, SymmetricInputGivesSymmetricOutput) {
  auto c = design_butterworth_bandpass({5, 0.2, 10.0, 1000.0});
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g;
  const std::size_t n = 3001;
  std::vector<double> x(n);
  for (std::size_t i = 0; i <= n / 2; ++i)
    x[i] = x[n - 1 - i] = g(rng) + std::sin(0.01 * static_cast<double>(i));
  auto y = apply_filter_zero_phase(c, x);
  for (std::size_t i = 0; i < n; ++i)
    EXPECT_NEAR(y[i], y[n - 1 - i], 1e-6);
}

TEST(ZeroPhase, TooShort) {
  auto c = design_butterworth_bandpass({5, 0.2, 10.0, 1000.0});
  std::vector<double> x(30, 1.0);
  EXPECT_THROW(apply_filter_zero_phase(c, x), SizeError);
  x.resize(31);
  EXPECT_NO_THROW(apply_filter_zero_phase(c, x));
}

TEST(Normalize, HandComputed) {
  std::vector<double> x{1, 2, 3};
  auto y = normalize_channel(x);
  const double s = std::sqrt(2.0 / 3.0);
  EXPECT_NEAR(y[0], -1.0 / s, 1e-12);
  EXPECT_NEAR(y[1], 0.0, 1e-12);
  EXPECT_NEAR(y[2], 1.0 / s, 1e-12);
  EXPECT_NEAR(y[2], 1.2247448714, 1e-9);
}

TEST(Normalize, DegenerateIsZero) {
  std::vector<double> x{7, 7, 7};
  EXPECT_EQ(normalize_channel(x), std::vector<double>(3, 0.0));
  EXPECT_THROW(normalize_channel(std::vector<double>{}), SizeError);
}

TEST(Normalize, MomentsAndAffineInvariance) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g(2.0, 3.0);
  std::uniform_real_distribution<double> u(0.1, 10.0);
  for (int t = 0; t < 50; ++t) {
    std::vector<double> x(100 + t * 37);
    for (auto &v : x)
      v = g(rng);
    auto y = normalize_channel(x);
    double m = 0, ss = 0;
    for (double v : y)
      m += v;
    m /= static_cast<double>(y.size());
    for (double v : y)
      ss += (v - m) * (v - m);
    EXPECT_NEAR(m, 0.0, 1e-9);
    EXPECT_NEAR(std::sqrt(ss / static_cast<double>(y.size())), 1.0, 1e-9);

    const double a = u(rng), b = 10.0 * g(rng);
    std::vector<double> ax(x.size());
    for (std::size_t i = 0; i < x.size(); ++i)
      ax[i] = a * x[i] + b;
    auto ay = normalize_channel(ax);
    for (std::size_t i = 0; i < y.size(); ++i)
      EXPECT_NEAR(ay[i], y[i], 1e-9);
  }
}

TEST(Upsample, RampExample) {
  std::vector<double> x{0, 40};
  auto y = upsample_linear(x, 40);
  ASSERT_EQ(y.size(), 80u);
  for (int i = 0; i <= 40; ++i)
    EXPECT_EQ(y[i], static_cast<double>(i));
  for (int i = 40; i < 80; ++i)
    EXPECT_EQ(y[i], 40.0);
}

TEST(Upsample, IdentityFactorAndLength) {
  std::vector<double> x{1.5, -2.0, 3.25, 8.0};
  EXPECT_EQ(upsample_linear(x, 1), x);
  std::vector<double> imu(125, 1.0);
  EXPECT_EQ(upsample_linear(imu, 40).size(), 5000u);
  EXPECT_THROW(upsample_linear(std::vector<double>{1.0}, 4), SizeError);
  EXPECT_THROW(upsample_linear(x, 0), ArgumentError);
}

TEST(Upsample, AnchorsRecovered) {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> g;
  for (std::size_t factor : {1u, 2u, 7u, 40u}) {
    std::vector<double> x(57);
    for (auto &v : x)
      v = g(rng);
    auto y = upsample_linear(x, factor);
    for (std::size_t k = 0; k < x.size(); ++k)
      EXPECT_EQ(y[k * factor], x[k]);
  }
}
