#pragma once

// Paralinguistic features computed from one analysis chunk: energy,
// zero-crossing rate, spectral centroid and autocorrelation pitch.

#include <fftw3.h>

#include <cmath>
#include <complex>
#include <memory>
#include <mutex>
#include <span>
#include <vector>

#include "sec/chunker.hpp"
#include "sec/error.hpp"

namespace sec {

struct AcousticFeatures {
  double rms = 0.0;
  double log_rms_db = -60.0;
  double zcr = 0.0;
  double spectral_centroid_hz = 0.0;
  double f0_hz = 0.0;
};

inline constexpr double kDbFloor = -60.0;
inline constexpr double kRmsFloor = 1e-3;
inline constexpr double kVoicingThreshold = 0.3;

inline double compute_rms(std::span<const float> samples) {
  if (samples.empty()) throw EmptyChunk("rms of empty chunk");
  double acc = 0.0;
  for (float s : samples) acc += static_cast<double>(s) * s;
  return std::sqrt(acc / static_cast<double>(samples.size()));
}

inline double rms_to_db(double rms) {
  if (rms < kRmsFloor) return kDbFloor;
  return std::max(kDbFloor, 20.0 * std::log10(rms));
}

// Zero counts as positive.
inline double compute_zcr(std::span<const float> samples) {
  if (samples.size() < 2) throw EmptyChunk("zcr needs at least 2 samples");
  std::size_t crossings = 0;
  bool prev = samples[0] >= 0.0f;
  for (std::size_t i = 1; i < samples.size(); ++i) {
    const bool cur = samples[i] >= 0.0f;
    crossings += cur != prev;
    prev = cur;
  }
  return static_cast<double>(crossings) / static_cast<double>(samples.size() - 1);
}

namespace detail {

// FFTW planning is not thread-safe; execution on distinct buffers is.
inline std::mutex& fftw_planner_mutex() {
  static std::mutex mu;
  return mu;
}

struct FftwPlanDeleter {
  void operator()(fftw_plan_s* p) const {
    std::lock_guard lock(fftw_planner_mutex());
    fftw_destroy_plan(p);
  }
};

struct FftwFree {
  void operator()(void* p) const { fftw_free(p); }
};

}  // namespace detail

/// DFT magnitudes |X[k]| for k = 0..N/2 of a real signal.
inline std::vector<double> dft_magnitudes(std::span<const float> samples) {
  const std::size_t n = samples.size();
  const std::size_t bins = n / 2 + 1;
  std::unique_ptr<double, detail::FftwFree> in(fftw_alloc_real(n));
  std::unique_ptr<fftw_complex, detail::FftwFree> out(fftw_alloc_complex(bins));
  std::unique_ptr<fftw_plan_s, detail::FftwPlanDeleter> plan;
  {
    std::lock_guard lock(detail::fftw_planner_mutex());
    plan.reset(fftw_plan_dft_r2c_1d(static_cast<int>(n), in.get(), out.get(), FFTW_ESTIMATE));
  }
  for (std::size_t i = 0; i < n; ++i) in.get()[i] = samples[i];
  fftw_execute(plan.get());
  std::vector<double> mags(bins);
  for (std::size_t k = 0; k < bins; ++k) {
    mags[k] = std::hypot(out.get()[k][0], out.get()[k][1]);
  }
  return mags;
}

/// Magnitude-weighted mean frequency over bins 1..N/2 (DC excluded).
inline double compute_spectral_centroid(std::span<const float> samples, int sample_rate) {
  if (samples.size() < 2) throw EmptyChunk("spectral centroid needs at least 2 samples");
  const auto mags = dft_magnitudes(samples);
  const double bin_hz = static_cast<double>(sample_rate) / static_cast<double>(samples.size());
  double weighted = 0.0;
  double total = 0.0;
  for (std::size_t k = 1; k < mags.size(); ++k) {
    weighted += mags[k] * static_cast<double>(k) * bin_hz;
    total += mags[k];
  }
  if (total <= 0.0) return 0.0;
  return std::min(weighted / total, sample_rate / 2.0);
}

struct PitchSearch {
  double f_min = 60.0;
  double f_max = 400.0;
};

/// Smallest chunk the pitch search accepts: two periods of f_min.
inline std::size_t min_pitch_samples(int sample_rate, PitchSearch search = {}) {
  return static_cast<std::size_t>(std::ceil(2.0 * sample_rate / search.f_min));
}

/// Peak of the normalized autocorrelation r(L) = sum x[n]x[n+L] / sum x[n]^2
/// over lags [rate/f_max, rate/f_min]. The 1/r(0) normalization tapers long
/// lags, so the fundamental wins over its sub-harmonics. Returns 0 when the
/// peak is below the voicing threshold.
inline double estimate_f0_autocorr(std::span<const float> samples, int sample_rate,
                                   PitchSearch search = {}) {
  if (samples.empty()) throw EmptyChunk("pitch of empty chunk");
  if (samples.size() < min_pitch_samples(sample_rate, search)) {
    throw std::invalid_argument("chunk shorter than two periods of f_min");
  }
  double energy = 0.0;
  for (float s : samples) energy += static_cast<double>(s) * s;
  if (energy <= 0.0) return 0.0;

  const auto lag_lo = static_cast<std::size_t>(std::floor(sample_rate / search.f_max));
  const auto lag_hi = std::min(static_cast<std::size_t>(std::ceil(sample_rate / search.f_min)),
                               samples.size() - 1);
  double best = -1.0;
  std::size_t best_lag = 0;
  for (std::size_t lag = std::max<std::size_t>(lag_lo, 1); lag <= lag_hi; ++lag) {
    double acc = 0.0;
    const std::size_t n = samples.size() - lag;
    for (std::size_t i = 0; i < n; ++i) acc += static_cast<double>(samples[i]) * samples[i + lag];
    const double r = acc / energy;
    if (r > best) {
      best = r;
      best_lag = lag;
    }
  }
  if (best_lag == 0 || best < kVoicingThreshold) return 0.0;
  return static_cast<double>(sample_rate) / static_cast<double>(best_lag);
}

/// Computes every feature for a chunk. Chunks too short for a given feature
/// (short tails) report that feature at its silent value.
inline AcousticFeatures extract_features(const AudioChunk& chunk) {
  AcousticFeatures f;
  if (chunk.samples.empty()) return f;
  f.rms = compute_rms(chunk.samples);
  f.log_rms_db = rms_to_db(f.rms);
  if (f.rms == 0.0) return f;
  if (chunk.samples.size() >= 2) {
    f.zcr = compute_zcr(chunk.samples);
    f.spectral_centroid_hz = compute_spectral_centroid(chunk.samples, chunk.sample_rate);
  }
  if (chunk.samples.size() >= min_pitch_samples(chunk.sample_rate)) {
    f.f0_hz = estimate_f0_autocorr(chunk.samples, chunk.sample_rate);
  }
  return f;
}

}  // namespace sec
