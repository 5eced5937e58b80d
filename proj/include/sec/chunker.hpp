#pragma once

// Fixed-window segmentation of a sample stream into analysis chunks.

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sec/audio_io.hpp"
#include "sec/error.hpp"

namespace sec {

struct AudioChunk {
  std::vector<float> samples;
  int sample_rate = kCanonicalRate;
  double start_time = 0.0;
  std::uint64_t seq = 0;
};

enum class TailPolicy { drop, pad_zero, emit_short };

inline std::string_view to_string(TailPolicy p) {
  switch (p) {
    case TailPolicy::drop: return "drop";
    case TailPolicy::pad_zero: return "pad";
    case TailPolicy::emit_short: return "short";
  }
  return "?";
}

inline std::optional<TailPolicy> parse_tail_policy(std::string_view s) {
  if (s == "drop") return TailPolicy::drop;
  if (s == "pad") return TailPolicy::pad_zero;
  if (s == "short") return TailPolicy::emit_short;
  return std::nullopt;
}

struct ChunkParams {
  double window_s = 1.0;
  double hop_s = 1.0;
  TailPolicy tail = TailPolicy::drop;
};

/// Seconds to whole samples, rounding halves up.
inline std::size_t seconds_to_samples(double seconds, int sample_rate) {
  return static_cast<std::size_t>(std::floor(seconds * sample_rate + 0.5));
}

/// Incremental chunker. Chunk k covers samples [k*H, k*H + W); it is emitted
/// as soon as its last sample has been pushed.
class StreamingChunker {
 public:
  StreamingChunker(const ChunkParams& params, int sample_rate)
      : params_(params), rate_(sample_rate) {
    if (!(params.window_s > 0.0) || !std::isfinite(params.window_s)) {
      throw InvalidWindow("window must be positive");
    }
    if (!(params.hop_s > 0.0) || !std::isfinite(params.hop_s)) {
      throw InvalidWindow("hop must be positive");
    }
    if (params.hop_s > params.window_s) throw InvalidWindow("hop exceeds window");
    if (sample_rate <= 0) throw InvalidWindow("sample rate must be positive");
    window_ = seconds_to_samples(params.window_s, sample_rate);
    hop_ = seconds_to_samples(params.hop_s, sample_rate);
    if (window_ == 0 || hop_ == 0) throw InvalidWindow("window or hop shorter than one sample");
  }

  std::size_t window_samples() const { return window_; }
  std::size_t hop_samples() const { return hop_; }

  void push(std::span<const float> samples, std::vector<AudioChunk>& out) {
    buffer_.insert(buffer_.end(), samples.begin(), samples.end());
    while (buffer_.size() >= window_) {
      out.push_back(make_chunk(std::span<const float>(buffer_.data(), window_)));
      buffer_.erase(buffer_.begin(), buffer_.begin() + static_cast<std::ptrdiff_t>(hop_));
    }
  }

  /// Handles the final partial window per the tail policy.
  void finish(std::vector<AudioChunk>& out) {
    if (buffer_.empty() || params_.tail == TailPolicy::drop) {
      buffer_.clear();
      return;
    }
    AudioChunk chunk = make_chunk(buffer_);
    if (params_.tail == TailPolicy::pad_zero) chunk.samples.resize(window_, 0.0f);
    out.push_back(std::move(chunk));
    buffer_.clear();
  }

  std::uint64_t emitted() const { return next_seq_; }

 private:
  AudioChunk make_chunk(std::span<const float> samples) {
    AudioChunk c;
    c.samples.assign(samples.begin(), samples.end());
    c.sample_rate = rate_;
    c.seq = next_seq_++;
    c.start_time = static_cast<double>(c.seq) * params_.hop_s;
    return c;
  }

  ChunkParams params_;
  int rate_;
  std::size_t window_ = 0;
  std::size_t hop_ = 0;
  // Samples from the start of the next chunk onward.
  std::vector<float> buffer_;
  std::uint64_t next_seq_ = 0;
};

inline std::vector<AudioChunk> chunk_stream(const AudioStream& stream, const ChunkParams& params) {
  StreamingChunker chunker(params, stream.sample_rate);
  std::vector<AudioChunk> out;
  chunker.push(stream.samples, out);
  chunker.finish(out);
  return out;
}

}  // namespace sec
