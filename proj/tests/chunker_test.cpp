#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"
#include "sec/chunker.hpp"

namespace sec {
namespace {

AudioStream ramp_stream(std::size_t n, int rate = 16000) {
  AudioStream s;
  s.sample_rate = rate;
  s.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) s.samples[i] = static_cast<float>(i % 1000) / 1000.0f;
  return s;
}

TEST(ChunkStream, SixtySecondsOneSecondWindows) {
  auto chunks = chunk_stream(ramp_stream(60 * 16000), {1.0, 1.0, TailPolicy::drop});
  ASSERT_EQ(chunks.size(), 60u);
  for (const auto& c : chunks) EXPECT_EQ(c.samples.size(), 16000u);
}

TEST(ChunkStream, SixtySecondsTenSecondWindows) {
  EXPECT_EQ(chunk_stream(ramp_stream(60 * 16000), {10.0, 10.0, TailPolicy::drop}).size(), 6u);
}

TEST(ChunkStream, OverlappingWindowsOnShortStream) {
  auto chunks = chunk_stream(ramp_stream(40000), {1.0, 0.5, TailPolicy::drop});
  ASSERT_EQ(chunks.size(), 4u);
  const double starts[] = {0.0, 0.5, 1.0, 1.5};
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_DOUBLE_EQ(chunks[i].start_time, starts[i]);
    EXPECT_EQ(chunks[i].seq, i);
  }
}

TEST(ChunkStream, InvalidWindows) {
  auto s = ramp_stream(100);
  EXPECT_THROW(chunk_stream(s, {0.0, 0.0, TailPolicy::drop}), InvalidWindow);
  EXPECT_THROW(chunk_stream(s, {-1.0, 0.5, TailPolicy::drop}), InvalidWindow);
  EXPECT_THROW(chunk_stream(s, {1.0, 0.0, TailPolicy::drop}), InvalidWindow);
  EXPECT_THROW(chunk_stream(s, {0.5, 1.0, TailPolicy::drop}), InvalidWindow);
  EXPECT_THROW(chunk_stream(s, {1e-6, 1e-6, TailPolicy::drop}), InvalidWindow);
}

TEST(ChunkStream, WindowRoundsHalfUp) {
  // 0.00003125 s * 16000 = 0.5 samples -> 1; 1.5 samples -> 2.
  EXPECT_EQ(seconds_to_samples(0.5 / 16000, 16000), 1u);
  EXPECT_EQ(seconds_to_samples(1.5 / 16000, 16000), 2u);
  EXPECT_EQ(seconds_to_samples(0.02, 16000), 320u);
}

TEST(ChunkStream, CountLawMatchesEnumeration) {
  std::mt19937 rng(1);
  std::uniform_int_distribution<int> ms(1, 400);
  std::uniform_int_distribution<std::size_t> len(0, 20000);
  for (int trial = 0; trial < 300; ++trial) {
    double w = ms(rng) / 1000.0;
    double h = ms(rng) / 1000.0;
    if (h > w) std::swap(h, w);
    const std::size_t n = len(rng);
    const auto stream = ramp_stream(n);
    auto chunks = chunk_stream(stream, {w, h, TailPolicy::drop});
    const std::size_t W = seconds_to_samples(w, 16000);
    const std::size_t H = seconds_to_samples(h, 16000);
    const auto starts = testing::enumerate_full_windows(n, W, H);
    const std::size_t law = n >= W ? (n - W) / H + 1 : 0;
    ASSERT_EQ(chunks.size(), starts.size());
    ASSERT_EQ(chunks.size(), law);
    for (std::size_t k = 0; k < chunks.size(); ++k) {
      ASSERT_EQ(chunks[k].samples.size(), W);
      ASSERT_EQ(chunks[k].seq, k);
      ASSERT_DOUBLE_EQ(chunks[k].start_time, k * h);
      ASSERT_EQ(chunks[k].samples.front(), stream.samples[starts[k]]);
    }
  }
}

TEST(ChunkStream, EmitShortCoversStreamExactly) {
  std::mt19937 rng(2);
  for (std::size_t n : {0u, 1u, 15999u, 16000u, 16001u, 50000u}) {
    auto s = ramp_stream(n);
    for (auto& v : s.samples) v = std::uniform_real_distribution<float>(-1, 1)(rng);
    auto chunks = chunk_stream(s, {1.0, 1.0, TailPolicy::emit_short});
    std::vector<float> joined;
    for (const auto& c : chunks) joined.insert(joined.end(), c.samples.begin(), c.samples.end());
    EXPECT_EQ(joined, s.samples) << n;
  }
}

TEST(ChunkStream, PadZeroTailIsFullLengthWithZeros) {
  auto s = ramp_stream(16000 + 123);
  for (auto& v : s.samples) v = 0.5f;
  auto chunks = chunk_stream(s, {1.0, 1.0, TailPolicy::pad_zero});
  ASSERT_EQ(chunks.size(), 2u);
  const auto& tail = chunks.back();
  ASSERT_EQ(tail.samples.size(), 16000u);
  for (std::size_t i = 0; i < 123; ++i) EXPECT_EQ(tail.samples[i], 0.5f);
  for (std::size_t i = 123; i < 16000; ++i) ASSERT_EQ(tail.samples[i], 0.0f);
  EXPECT_DOUBLE_EQ(tail.start_time, 1.0);
}

TEST(ChunkStream, DropPolicyIgnoresTail) {
  EXPECT_EQ(chunk_stream(ramp_stream(16000 + 8000), {1.0, 1.0, TailPolicy::drop}).size(), 1u);
  EXPECT_TRUE(chunk_stream(ramp_stream(100), {1.0, 1.0, TailPolicy::drop}).empty());
}

TEST(StreamingChunker, EmitsAsSoonAsWindowCompletes) {
  StreamingChunker c({1.0, 0.5, TailPolicy::drop}, 16000);
  std::vector<AudioChunk> out;
  std::vector<float> block(15999, 0.1f);
  c.push(block, out);
  EXPECT_TRUE(out.empty());
  float one = 0.2f;
  c.push(std::span(&one, 1), out);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0].samples.back(), 0.2f);
  std::vector<float> half(8000, 0.3f);
  c.push(half, out);
  ASSERT_EQ(out.size(), 2u);
  EXPECT_DOUBLE_EQ(out[1].start_time, 0.5);
}

TEST(StreamingChunker, ArbitrarySplitsMatchBatch) {
  std::mt19937 rng(4);
  auto s = ramp_stream(77777);
  const ChunkParams p{0.25, 0.1, TailPolicy::emit_short};
  auto batch = chunk_stream(s, p);
  StreamingChunker c(p, 16000);
  std::vector<AudioChunk> out;
  std::size_t i = 0;
  while (i < s.samples.size()) {
    const std::size_t n = std::min<std::size_t>(std::uniform_int_distribution<std::size_t>(1, 9000)(rng),
                                                s.samples.size() - i);
    c.push(std::span<const float>(s.samples).subspan(i, n), out);
    i += n;
  }
  c.finish(out);
  ASSERT_EQ(out.size(), batch.size());
  for (std::size_t k = 0; k < out.size(); ++k) {
    EXPECT_EQ(out[k].samples, batch[k].samples);
    EXPECT_EQ(out[k].seq, batch[k].seq);
  }
}

}  // namespace
}  // namespace sec
