#pragma once

// Excitation synthesis and spectral feature extraction for the micro-vibration
// channel.

#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "vibtac/errors.hpp"
#include "vibtac/fft.hpp"
#include "vibtac/rng.hpp"

namespace vibtac {

inline constexpr double kSensorRate = 2200.0;        // Hz
inline constexpr std::size_t kTraceLength = 1100;    // 0.5 s at the sensor rate
inline constexpr double kQuantStep = 0.37;           // Pa
inline constexpr double kBinWidth = kSensorRate / static_cast<double>(kTraceLength);  // 2 Hz
inline constexpr std::size_t kFeatureFirstBin = 5;   // 10 Hz
inline constexpr std::size_t kFeatureCount = 515;    // bins 5..519, [10, 1040) Hz
inline constexpr double kFeatureFloor = 1e-12;
inline constexpr double kExcitationCutoff = 1100.0;  // Hz

// Vibration level -> noise intensity in dB.
inline constexpr std::array<double, 7> kLevelIntensityDb = {-999.0, -20.0, -16.0, -12.0,
                                                            -8.0,   -4.0,  0.0};

inline double level_intensity_db(int level) {
  if (level < 0 || level > 6) {
    throw InvalidArgument("vibration level must be in 0..6, got " + std::to_string(level));
  }
  return kLevelIntensityDb[static_cast<std::size_t>(level)];
}

struct ExcitationSignal {
  std::vector<double> samples;
  double sample_rate = 0.0;
  double intensity_db = 0.0;
  std::uint64_t seed = 0;
};

struct SensorTrace {
  std::vector<double> samples;  // Pa, multiples of kQuantStep
  double duration = 0.5;        // s
  double pdc = 0.0;             // kPa
  int label = 0;
  int level = 0;
};

struct FeatureVector {
  std::vector<double> values;  // dB, kFeatureCount entries
  int label = 0;
  int level = 0;
};

// i.i.d. draws from 10^(I/20) * N(0, 1).
inline ExcitationSignal gen_gaussian_noise(double intensity_db, std::size_t n,
                                           double sample_rate, std::uint64_t seed) {
  if (n == 0) throw InvalidArgument("gen_gaussian_noise: n must be positive");
  if (!(sample_rate > 0.0)) throw InvalidArgument("gen_gaussian_noise: sample_rate must be positive");
  ExcitationSignal sig{std::vector<double>(n), sample_rate, intensity_db, seed};
  const double amplitude = std::pow(10.0, intensity_db / 20.0);
  SplitMix64 rng(seed);
  for (double& s : sig.samples) s = amplitude * rng.gaussian();
  return sig;
}

// Kaiser-windowed sinc low-pass. The transition band spans 0.8..1.2 x cutoff
// and the Kaiser beta targets 60 dB, comfortably above the 40 dB stopband
// requirement. Taps are odd in number and normalised to unity DC gain.
inline std::vector<double> design_lowpass(double cutoff, double sample_rate) {
  if (!(cutoff > 0.0)) throw InvalidArgument("design_lowpass: cutoff must be positive");
  if (!(cutoff < sample_rate / 2.0)) {
    throw CutoffAboveNyquist("design_lowpass: cutoff " + std::to_string(cutoff) +
                             " Hz is not below Nyquist (" + std::to_string(sample_rate / 2.0) +
                             " Hz)");
  }
  constexpr double attenuation_db = 60.0;
  const double beta = 0.1102 * (attenuation_db - 8.7);
  const double transition = 2.0 * std::numbers::pi * (0.4 * cutoff) / sample_rate;
  auto order = static_cast<std::size_t>(std::ceil((attenuation_db - 8.0) / (2.285 * transition)));
  if (order % 2 == 1) ++order;
  const std::size_t taps = order + 1;
  const double center = static_cast<double>(order) / 2.0;
  const double fc = cutoff / sample_rate;
  const double i0_beta = std::cyl_bessel_i(0.0, beta);

  std::vector<double> h(taps);
  double sum = 0.0;
  for (std::size_t k = 0; k < taps; ++k) {
    const double t = static_cast<double>(k) - center;
    const double arg = 2.0 * fc * t;
    const double sinc = t == 0.0 ? 1.0 : std::sin(std::numbers::pi * arg) / (std::numbers::pi * arg);
    const double r = t / center;
    const double window = std::cyl_bessel_i(0.0, beta * std::sqrt(std::max(0.0, 1.0 - r * r))) / i0_beta;
    h[k] = 2.0 * fc * sinc * window;
    sum += h[k];
  }
  for (double& v : h) v /= sum;
  return h;
}

// Linear-phase FIR with the group delay removed: y[n] = sum_k h[k] x[n + M - k]
// where M = (taps - 1) / 2, zero outside the input.
inline std::vector<double> fir_filter_aligned(std::span<const double> x, std::span<const double> h) {
  const std::size_t n = x.size();
  const std::size_t taps = h.size();
  const std::ptrdiff_t half = static_cast<std::ptrdiff_t>(taps / 2);
  std::vector<double> y(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    // x index = i + half - k, valid range [0, n)
    const std::ptrdiff_t base = static_cast<std::ptrdiff_t>(i) + half;
    const std::ptrdiff_t k_lo = std::max<std::ptrdiff_t>(0, base - static_cast<std::ptrdiff_t>(n) + 1);
    const std::ptrdiff_t k_hi = std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(taps) - 1, base);
    double acc = 0.0;
    for (std::ptrdiff_t k = k_lo; k <= k_hi; ++k) acc += h[static_cast<std::size_t>(k)] * x[static_cast<std::size_t>(base - k)];
    y[i] = acc;
  }
  return y;
}

// Aligned FIR evaluated only at indices start, start + factor, ... (count outputs).
inline std::vector<double> fir_decimate(std::span<const double> x, std::span<const double> h,
                                        std::size_t factor, std::size_t start, std::size_t count) {
  const std::size_t n = x.size();
  const std::size_t taps = h.size();
  const std::ptrdiff_t half = static_cast<std::ptrdiff_t>(taps / 2);
  std::vector<double> y(count, 0.0);
  for (std::size_t o = 0; o < count; ++o) {
    const std::size_t i = start + o * factor;
    if (i >= n) throw DimensionMismatch("fir_decimate: output index beyond input");
    const std::ptrdiff_t base = static_cast<std::ptrdiff_t>(i) + half;
    const std::ptrdiff_t k_lo = std::max<std::ptrdiff_t>(0, base - static_cast<std::ptrdiff_t>(n) + 1);
    const std::ptrdiff_t k_hi = std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(taps) - 1, base);
    double acc = 0.0;
    for (std::ptrdiff_t k = k_lo; k <= k_hi; ++k) acc += h[static_cast<std::size_t>(k)] * x[static_cast<std::size_t>(base - k)];
    y[o] = acc;
  }
  return y;
}

inline ExcitationSignal lowpass_fir(const ExcitationSignal& signal, double cutoff) {
  const auto taps = design_lowpass(cutoff, signal.sample_rate);
  ExcitationSignal out = signal;
  out.samples = fir_filter_aligned(signal.samples, taps);
  return out;
}

inline std::vector<double> hanning(std::size_t n) {
  if (n < 2) throw InvalidArgument("hanning: n must be at least 2");
  std::vector<double> w(n);
  const double denom = static_cast<double>(n - 1);
  for (std::size_t k = 0; k < n; ++k) {
    w[k] = 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * static_cast<double>(k) / denom));
  }
  // exact symmetry regardless of cos rounding
  for (std::size_t k = 0; k < n / 2; ++k) w[n - 1 - k] = w[k];
  return w;
}

namespace detail {
inline const FftPlan& trace_fft_plan() {
  static const FftPlan plan(kTraceLength);
  return plan;
}
inline const std::vector<double>& trace_window() {
  static const std::vector<double> w = hanning(kTraceLength);
  return w;
}
inline void require_trace_length(std::size_t n) {
  if (n != kTraceLength) {
    throw BadTraceLength("trace must have " + std::to_string(kTraceLength) + " samples, got " +
                         std::to_string(n));
  }
}
}  // namespace detail

// One-sided |DFT| of raw samples (no window), bins 0..N/2.
inline std::vector<double> magnitude_spectrum(std::span<const double> samples) {
  const auto spec = samples.size() == kTraceLength
                        ? detail::trace_fft_plan().forward_real(samples)
                        : FftPlan(samples.size()).forward_real(samples);
  std::vector<double> mag(samples.size() / 2 + 1);
  for (std::size_t k = 0; k < mag.size(); ++k) mag[k] = std::abs(spec[k]);
  return mag;
}

// Hanning-windowed one-sided magnitude spectrum of a full trial, 2 Hz bins.
inline std::vector<double> power_spectrum(std::span<const double> samples) {
  detail::require_trace_length(samples.size());
  const auto& w = detail::trace_window();
  std::vector<double> windowed(kTraceLength);
  for (std::size_t i = 0; i < kTraceLength; ++i) windowed[i] = samples[i] * w[i];
  return magnitude_spectrum(windowed);
}

inline std::vector<double> power_spectrum(const SensorTrace& trace) {
  return power_spectrum(trace.samples);
}

inline double bin_frequency(std::size_t bin) { return static_cast<double>(bin) * kBinWidth; }

inline std::vector<double> extract_feature_values(std::span<const double> samples) {
  const auto mag = power_spectrum(samples);
  std::vector<double> out(kFeatureCount);
  for (std::size_t i = 0; i < kFeatureCount; ++i) {
    out[i] = 20.0 * std::log10(mag[kFeatureFirstBin + i] + kFeatureFloor);
  }
  return out;
}

inline FeatureVector extract_features(const SensorTrace& trace) {
  return {extract_feature_values(trace.samples), trace.label, trace.level};
}

}  // namespace vibtac
