#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"
#include "sec/features.hpp"

namespace sec {
namespace {

using testing::sine;
using testing::white_noise;

TEST(Rms, KnownValues) {
  EXPECT_EQ(compute_rms(std::vector<float>(100, 0.0f)), 0.0);
  EXPECT_NEAR(compute_rms(sine(100, 1.0, 16000, 16000)), 0.70711, 1e-4);
  EXPECT_DOUBLE_EQ(compute_rms(std::vector<float>(64, 0.25f)), 0.25);
  EXPECT_THROW(compute_rms(std::vector<float>{}), EmptyChunk);
}

TEST(Rms, DbFloor) {
  EXPECT_EQ(rms_to_db(0.0), -60.0);
  EXPECT_EQ(rms_to_db(0.0009), -60.0);
  EXPECT_NEAR(rms_to_db(1.0), 0.0, 1e-12);
  EXPECT_NEAR(rms_to_db(0.5), -6.0206, 1e-4);
}

TEST(Zcr, KnownValues) {
  EXPECT_EQ(compute_zcr(std::vector<float>(50, 0.3f)), 0.0);
  std::vector<float> alt;
  for (int i = 0; i < 50; ++i) alt.push_back(i % 2 ? -0.5f : 0.5f);
  EXPECT_EQ(compute_zcr(alt), 1.0);
  // Zero is treated as positive: 0 -> -x crosses, 0 -> +x does not.
  EXPECT_DOUBLE_EQ(compute_zcr(std::vector<float>{0.0f, 0.1f, 0.0f, -0.1f}), 1.0 / 3.0);
  EXPECT_THROW(compute_zcr(std::vector<float>{1.0f}), EmptyChunk);
}

TEST(Zcr, HundredHertzSine) {
  // Two crossings per period, 100 periods, over 15999 sample pairs.
  const double crossings = std::round(compute_zcr(sine(100, 1.0, 16000, 16000)) * 15999.0);
  EXPECT_GE(crossings, 199.0);
  EXPECT_LE(crossings, 201.0);
}

TEST(SpectralCentroid, SilenceIsZero) {
  EXPECT_EQ(compute_spectral_centroid(std::vector<float>(512, 0.0f), 16000), 0.0);
  EXPECT_THROW(compute_spectral_centroid(std::vector<float>{0.5f}, 16000), EmptyChunk);
}

TEST(SpectralCentroid, PureToneWithinOneBin) {
  // 1000 Hz at 16 kHz: 16-sample period; 1600 samples = 100 whole periods.
  auto x = sine(1000, 0.8, 16000, 1600);
  const double bin = 16000.0 / 1600.0;
  EXPECT_NEAR(compute_spectral_centroid(x, 16000), 1000.0, bin);
  EXPECT_NEAR(testing::naive_centroid(x, 16000), 1000.0, bin);
}

TEST(SpectralCentroid, MatchesNaiveDftOnRandomSignals) {
  std::mt19937 rng(21);
  for (std::size_t n : {2u, 3u, 17u, 256u, 499u, 1000u}) {
    auto x = white_noise(n, rng);
    const auto fast = dft_magnitudes(x);
    const auto slow = testing::naive_dft_magnitudes(x);
    ASSERT_EQ(fast.size(), slow.size());
    for (std::size_t k = 0; k < fast.size(); ++k) EXPECT_NEAR(fast[k], slow[k], 1e-9 * n) << n;
    EXPECT_NEAR(compute_spectral_centroid(x, 8000), testing::naive_centroid(x, 8000), 1e-6);
  }
}

TEST(SpectralCentroid, WhiteNoiseNearQuarterRate) {
  std::mt19937 rng(33);
  for (int trial = 0; trial < 100; ++trial) {
    const double c = compute_spectral_centroid(white_noise(4000, rng), 16000);
    ASSERT_NEAR(c, 4000.0, 400.0) << trial;
  }
}

TEST(F0, Sine220) {
  const double f0 = estimate_f0_autocorr(sine(220, 0.9, 16000, 16000), 16000);
  EXPECT_NEAR(f0, 220.0, 3.0);
}

TEST(F0, VoicedRangeRecovered) {
  for (double f : {80.0, 120.0, 180.0, 250.0, 330.0}) {
    const double got = estimate_f0_autocorr(sine(f, 0.5, 16000, 16000), 16000);
    // Integer lag quantization: error bounded by one lag step at f.
    const double lag = 16000.0 / f;
    EXPECT_NEAR(got, f, 16000.0 / (lag - 0.5) - f + 1e-9) << f;
  }
}

TEST(F0, WhiteNoiseIsUnvoiced) {
  std::mt19937 rng(44);
  for (int trial = 0; trial < 100; ++trial) {
    ASSERT_EQ(estimate_f0_autocorr(white_noise(16000, rng), 16000), 0.0) << trial;
  }
}

TEST(F0, SilenceAndShortChunks) {
  EXPECT_EQ(estimate_f0_autocorr(std::vector<float>(16000, 0.0f), 16000), 0.0);
  EXPECT_THROW(estimate_f0_autocorr(std::vector<float>{}, 16000), EmptyChunk);
  EXPECT_THROW(estimate_f0_autocorr(std::vector<float>(100, 0.1f), 16000), std::invalid_argument);
}

TEST(ExtractFeatures, SilenceInvariants) {
  AudioChunk c{std::vector<float>(16000, 0.0f), 16000, 0.0, 0};
  auto f = extract_features(c);
  EXPECT_EQ(f.rms, 0.0);
  EXPECT_EQ(f.log_rms_db, -60.0);
  EXPECT_EQ(f.zcr, 0.0);
  EXPECT_EQ(f.f0_hz, 0.0);
  EXPECT_EQ(f.spectral_centroid_hz, 0.0);
}

TEST(ExtractFeatures, ShortTailDoesNotThrow) {
  AudioChunk one{{0.3f}, 16000, 2.0, 2};
  auto f = extract_features(one);
  EXPECT_FLOAT_EQ(static_cast<float>(f.rms), 0.3f);
  EXPECT_EQ(f.zcr, 0.0);
  EXPECT_EQ(f.f0_hz, 0.0);
  AudioChunk empty{{}, 16000, 3.0, 3};
  EXPECT_EQ(extract_features(empty).rms, 0.0);
}

TEST(ExtractFeatures, CentroidBoundedByNyquist) {
  std::mt19937 rng(5);
  for (int i = 0; i < 20; ++i) {
    AudioChunk c{white_noise(800, rng), 8000, 0.0, 0};
    EXPECT_LE(extract_features(c).spectral_centroid_hz, 4000.0);
  }
}

}  // namespace
}  // namespace sec
