#pragma once

// WAV loading, raw PCM decoding and linear resampling. Every stream that
// leaves this header is mono with samples in [-1, 1].

#include <algorithm>
#include <array>
#include <atomic>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <stdexcept>
#include <vector>

#include <cerrno>
#include <poll.h>
#include <unistd.h>

#include "sec/error.hpp"
#include "sec/log.hpp"

namespace sec {

inline constexpr int kCanonicalRate = 16000;

struct AudioStream {
  int sample_rate = kCanonicalRate;
  std::vector<float> samples;
  std::string source_name;

  double duration() const {
    return static_cast<double>(samples.size()) / sample_rate;
  }
};

enum class PcmEncoding { int16_le, float32_le };

namespace detail {

inline std::uint16_t load_u16le(const std::uint8_t* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

inline std::uint32_t load_u32le(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

inline float clamp_sample(float v) {
  if (!std::isfinite(v)) return 0.0f;
  return std::clamp(v, -1.0f, 1.0f);
}

inline float decode_int16(const std::uint8_t* p) {
  auto raw = static_cast<std::int16_t>(load_u16le(p));
  return static_cast<float>(raw) / 32768.0f;
}

inline float decode_float32(const std::uint8_t* p) {
  return clamp_sample(std::bit_cast<float>(load_u32le(p)));
}

inline void store_u16le(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xFF));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

inline void store_u32le(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xFF));
}

}  // namespace detail

inline constexpr std::uint16_t kWavFormatPcm = 1;
inline constexpr std::uint16_t kWavFormatFloat = 3;

/// Parses an in-memory RIFF/WAVE image. Accepts 16-bit PCM or 32-bit float,
/// one or two channels; stereo is averaged per frame.
inline AudioStream parse_wav(std::span<const std::uint8_t> bytes, std::string source_name = {}) {
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    throw MalformedContainer("missing RIFF/WAVE magic");
  }
  const std::uint32_t riff_size = detail::load_u32le(bytes.data() + 4);
  if (riff_size < 4 || static_cast<std::size_t>(riff_size) + 8 > bytes.size()) {
    throw MalformedContainer("RIFF size " + std::to_string(riff_size) + " exceeds file");
  }
  const std::size_t end = static_cast<std::size_t>(riff_size) + 8;

  struct Format {
    std::uint16_t tag = 0;
    std::uint16_t channels = 0;
    std::uint32_t rate = 0;
    std::uint16_t block_align = 0;
    std::uint16_t bits = 0;
  };
  std::optional<Format> fmt;
  std::optional<std::span<const std::uint8_t>> data;

  std::size_t pos = 12;
  while (pos + 8 <= end) {
    const std::uint8_t* hdr = bytes.data() + pos;
    const std::uint32_t size = detail::load_u32le(hdr + 4);
    const std::size_t body = pos + 8;
    if (size > end - body) {
      throw MalformedContainer("chunk '" + std::string(reinterpret_cast<const char*>(hdr), 4) +
                               "' size overruns container");
    }
    if (std::memcmp(hdr, "fmt ", 4) == 0) {
      if (size < 16) throw MalformedContainer("fmt chunk too short");
      const std::uint8_t* f = bytes.data() + body;
      fmt = Format{detail::load_u16le(f), detail::load_u16le(f + 2), detail::load_u32le(f + 4),
                   detail::load_u16le(f + 12), detail::load_u16le(f + 14)};
    } else if (std::memcmp(hdr, "data", 4) == 0) {
      data = bytes.subspan(body, size);
    }
    pos = body + size + (size & 1u);
  }

  if (!fmt) throw MalformedContainer("no fmt chunk");
  if (!data) throw MalformedContainer("no data chunk");
  if (fmt->channels == 0 || fmt->rate == 0) throw MalformedContainer("zero channels or rate");

  const bool pcm16 = fmt->tag == kWavFormatPcm && fmt->bits == 16;
  const bool f32 = fmt->tag == kWavFormatFloat && fmt->bits == 32;
  if (!pcm16 && !f32) {
    throw UnsupportedEncoding("format tag " + std::to_string(fmt->tag) + " with " +
                              std::to_string(fmt->bits) + " bits per sample");
  }
  if (fmt->channels > 2) {
    throw UnsupportedEncoding(std::to_string(fmt->channels) + " channels");
  }
  const std::size_t bytes_per_sample = fmt->bits / 8;
  const std::size_t frame_bytes = bytes_per_sample * fmt->channels;
  if (fmt->block_align != frame_bytes) throw MalformedContainer("block align mismatch");

  AudioStream out;
  out.sample_rate = static_cast<int>(fmt->rate);
  out.source_name = std::move(source_name);
  const std::size_t frames = data->size() / frame_bytes;
  out.samples.reserve(frames);
  auto decode = pcm16 ? detail::decode_int16 : detail::decode_float32;
  for (std::size_t i = 0; i < frames; ++i) {
    const std::uint8_t* p = data->data() + i * frame_bytes;
    if (fmt->channels == 1) {
      out.samples.push_back(decode(p));
    } else {
      out.samples.push_back((decode(p) + decode(p + bytes_per_sample)) / 2.0f);
    }
  }
  return out;
}

inline std::vector<std::uint8_t> read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoFailure("cannot open '" + path + "'");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  if (in.bad()) throw IoFailure("read error on '" + path + "'");
  return bytes;
}

inline AudioStream read_wav(const std::string& path) {
  return parse_wav(read_file_bytes(path), path);
}

/// Serializes interleaved frames (`channels` samples per frame) as a
/// canonical 44-byte-header WAV. Used by tests and the demo generator.
inline std::vector<std::uint8_t> encode_wav(std::span<const float> interleaved, int sample_rate,
                                            int channels = 1,
                                            PcmEncoding encoding = PcmEncoding::int16_le) {
  const std::uint16_t bits = encoding == PcmEncoding::int16_le ? 16 : 32;
  const std::uint16_t tag = encoding == PcmEncoding::int16_le ? kWavFormatPcm : kWavFormatFloat;
  const std::uint32_t data_bytes = static_cast<std::uint32_t>(interleaved.size() * (bits / 8));
  std::vector<std::uint8_t> out;
  out.reserve(44 + data_bytes);
  out.insert(out.end(), {'R', 'I', 'F', 'F'});
  detail::store_u32le(out, 36 + data_bytes);
  out.insert(out.end(), {'W', 'A', 'V', 'E', 'f', 'm', 't', ' '});
  detail::store_u32le(out, 16);
  detail::store_u16le(out, tag);
  detail::store_u16le(out, static_cast<std::uint16_t>(channels));
  detail::store_u32le(out, static_cast<std::uint32_t>(sample_rate));
  detail::store_u32le(out, static_cast<std::uint32_t>(sample_rate * channels * (bits / 8)));
  detail::store_u16le(out, static_cast<std::uint16_t>(channels * (bits / 8)));
  detail::store_u16le(out, bits);
  out.insert(out.end(), {'d', 'a', 't', 'a'});
  detail::store_u32le(out, data_bytes);
  for (float s : interleaved) {
    if (encoding == PcmEncoding::int16_le) {
      const long q = std::lround(std::clamp(s, -1.0f, 1.0f) * 32768.0f);
      detail::store_u16le(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(
                                   std::clamp(q, -32768L, 32767L))));
    } else {
      detail::store_u32le(out, std::bit_cast<std::uint32_t>(s));
    }
  }
  return out;
}

inline void write_wav(const std::string& path, std::span<const float> interleaved, int sample_rate,
                      int channels = 1, PcmEncoding encoding = PcmEncoding::int16_le) {
  const auto bytes = encode_wav(interleaved, sample_rate, channels, encoding);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoFailure("cannot create '" + path + "'");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoFailure("write error on '" + path + "'");
}

/// Number of output samples produced when resampling `n` input samples,
/// rounded to the nearest whole output sample.
inline std::size_t resampled_length(std::size_t n, int from_rate, int to_rate) {
  const auto num = static_cast<unsigned __int128>(n) * static_cast<unsigned>(to_rate);
  return static_cast<std::size_t>((num + static_cast<unsigned>(from_rate) / 2) /
                                  static_cast<unsigned>(from_rate));
}

/// Incremental linear-interpolation resampler. Output sample j sits at input
/// position j * from / to. Feeding a signal in pieces and calling finish()
/// yields exactly the samples resample_linear() produces for the whole.
class LinearResampler {
 public:
  LinearResampler(int from_rate, int to_rate) : from_(from_rate), to_(to_rate) {
    if (from_rate <= 0 || to_rate <= 0) throw std::invalid_argument("sample rates must be positive");
  }

  void push(std::span<const float> in, std::vector<float>& out) {
    history_.insert(history_.end(), in.begin(), in.end());
    received_ += in.size();
    emit(out, false);
  }

  void finish(std::vector<float>& out) {
    emit(out, true);
    history_.clear();
  }

 private:
  // Input index and fractional remainder (numerator over to_) of output j.
  std::pair<std::uint64_t, std::uint64_t> position(std::uint64_t j) const {
    const std::uint64_t scaled = j * static_cast<std::uint64_t>(from_);
    return {scaled / static_cast<std::uint64_t>(to_), scaled % static_cast<std::uint64_t>(to_)};
  }

  float at(std::uint64_t abs_index) const { return history_[abs_index - base_]; }

  void emit(std::vector<float>& out, bool final) {
    const std::uint64_t total = resampled_length(received_, from_, to_);
    while (next_ < total) {
      const auto [idx, rem] = position(next_);
      if (final) {
        if (received_ == 0) break;
        const std::uint64_t last = received_ - 1;
        if (idx >= last) {
          out.push_back(at(last));
        } else {
          out.push_back(interpolate(idx, rem));
        }
      } else {
        const bool need_next = rem != 0;
        if (idx + (need_next ? 1 : 0) >= received_) break;
        out.push_back(interpolate(idx, rem));
      }
      ++next_;
    }
    // Keep only samples still needed by the next output position.
    const std::uint64_t keep_from = std::min<std::uint64_t>(position(next_).first, received_);
    if (keep_from > base_) {
      history_.erase(history_.begin(), history_.begin() + static_cast<std::ptrdiff_t>(keep_from - base_));
      base_ = keep_from;
    }
  }

  float interpolate(std::uint64_t idx, std::uint64_t rem) const {
    const float a = at(idx);
    if (rem == 0) return a;
    const float b = at(idx + 1);
    const double frac = static_cast<double>(rem) / to_;
    return static_cast<float>(a + (static_cast<double>(b) - a) * frac);
  }

  int from_;
  int to_;
  std::vector<float> history_;
  std::uint64_t base_ = 0;
  std::uint64_t received_ = 0;
  std::uint64_t next_ = 0;
};

inline AudioStream resample_linear(const AudioStream& stream, int target_rate) {
  if (target_rate <= 0) throw std::invalid_argument("target_rate must be positive");
  if (stream.sample_rate == target_rate) return stream;
  AudioStream out;
  out.sample_rate = target_rate;
  out.source_name = stream.source_name;
  out.samples.reserve(resampled_length(stream.samples.size(), stream.sample_rate, target_rate));
  LinearResampler r(stream.sample_rate, target_rate);
  r.push(stream.samples, out.samples);
  r.finish(out.samples);
  return out;
}

/// Byte-to-sample decoder for raw little-endian PCM arriving in arbitrary
/// fragments. Incomplete trailing bytes are held until more data arrives.
class PcmDecoder {
 public:
  explicit PcmDecoder(PcmEncoding encoding) : encoding_(encoding) {}

  std::size_t sample_bytes() const { return encoding_ == PcmEncoding::int16_le ? 2 : 4; }

  void push(std::span<const std::uint8_t> bytes, std::vector<float>& out) {
    const std::size_t width = sample_bytes();
    std::size_t i = 0;
    while (pending_len_ > 0 && i < bytes.size()) {
      pending_[pending_len_++] = bytes[i++];
      if (pending_len_ == width) {
        out.push_back(decode(pending_.data()));
        pending_len_ = 0;
      }
    }
    for (; i + width <= bytes.size(); i += width) out.push_back(decode(bytes.data() + i));
    for (; i < bytes.size(); ++i) pending_[pending_len_++] = bytes[i];
  }

  /// Bytes of an incomplete sample still buffered. Non-zero at end of input
  /// means the stream was truncated.
  std::size_t pending() const { return pending_len_; }

 private:
  float decode(const std::uint8_t* p) const {
    return encoding_ == PcmEncoding::int16_le ? detail::decode_int16(p) : detail::decode_float32(p);
  }

  PcmEncoding encoding_;
  std::array<std::uint8_t, 4> pending_{};
  std::size_t pending_len_ = 0;
};

struct PcmReadResult {
  std::uint64_t samples = 0;
  std::size_t truncated_bytes = 0;  // non-zero: TruncatedSample at end of stream
};

/// Reads raw PCM from a file descriptor until EOF or `stop` is raised,
/// handing decoded samples to `sink` as soon as each read returns.
inline PcmReadResult read_pcm_fd(int fd, PcmEncoding encoding,
                                 const std::function<void(std::span<const float>)>& sink,
                                 const std::atomic<bool>* stop = nullptr) {
  PcmDecoder decoder(encoding);
  PcmReadResult result;
  std::array<std::uint8_t, 8192> buf{};
  std::vector<float> samples;
  for (;;) {
    if (stop && stop->load()) break;
    pollfd pfd{fd, POLLIN, 0};
    const int ready = ::poll(&pfd, 1, 100);
    if (ready < 0) {
      if (errno == EINTR) continue;
      throw IoFailure("poll failed on input");
    }
    if (ready == 0) continue;
    const ssize_t n = ::read(fd, buf.data(), buf.size());
    if (n < 0) {
      if (errno == EINTR) continue;
      throw IoFailure("read failed on input");
    }
    if (n == 0) break;
    samples.clear();
    decoder.push(std::span<const std::uint8_t>(buf.data(), static_cast<std::size_t>(n)), samples);
    result.samples += samples.size();
    if (!samples.empty()) sink(samples);
  }
  result.truncated_bytes = decoder.pending();
  if (result.truncated_bytes != 0) {
    log::warn("TruncatedSample: " + std::to_string(result.truncated_bytes) +
              " trailing byte(s) at end of PCM input discarded");
  }
  return result;
}

/// Collects all of standard input as one stream at the declared rate.
inline AudioStream read_pcm_stdin(int sample_rate, PcmEncoding encoding) {
  if (sample_rate <= 0) throw std::invalid_argument("sample_rate must be positive");
  AudioStream out;
  out.sample_rate = sample_rate;
  out.source_name = "-";
  read_pcm_fd(STDIN_FILENO, encoding, [&](std::span<const float> s) {
    out.samples.insert(out.samples.end(), s.begin(), s.end());
  });
  return out;
}

}  // namespace sec
