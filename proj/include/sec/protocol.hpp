#pragma once

// Serial actuator frame:
//
//   AA 55 | ver | seq | count | count x (ch, value_hi, value_lo) | xor
//
// `value` is a signed 16-bit big-endian integer: duty raw 0..255, meters in
// millimeters, degrees in tenths. The checksum is the XOR of every byte from
// `ver` through the last record byte.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "sec/error.hpp"
#include "sec/mapping.hpp"

namespace sec {

inline constexpr std::uint8_t kSync1 = 0xAA;
inline constexpr std::uint8_t kSync2 = 0x55;
inline constexpr std::uint8_t kProtocolVersion = 0x01;
inline constexpr std::size_t kMaxRecords = 16;
inline constexpr std::size_t kFrameOverhead = 6;  // sync(2) ver seq count xor
inline constexpr std::size_t kMaxFrameBytes = kFrameOverhead + 3 * kMaxRecords;

inline constexpr std::size_t frame_length(std::size_t count) { return 5 + 3 * count + 1; }

struct FrameRecord {
  std::uint8_t channel_id = 0;
  std::int16_t value = 0;

  friend bool operator==(const FrameRecord&, const FrameRecord&) = default;
};

struct SerialFrame {
  std::uint8_t version = kProtocolVersion;
  std::uint8_t seq = 0;
  std::vector<FrameRecord> records;

  friend bool operator==(const SerialFrame&, const SerialFrame&) = default;
};

inline double unit_scale(Unit u) {
  switch (u) {
    case Unit::duty: return 1.0;
    case Unit::meters: return 1000.0;
    case Unit::degrees: return 10.0;
  }
  return 1.0;
}

/// Physical value to its wire integer.
inline std::int16_t scale_to_wire(const ActuatorCommand& c) {
  const double scaled = std::round(c.value * unit_scale(c.unit));
  const double lo = c.unit == Unit::duty ? 0.0 : std::numeric_limits<std::int16_t>::min();
  const double hi = c.unit == Unit::duty ? 255.0 : std::numeric_limits<std::int16_t>::max();
  if (!std::isfinite(scaled) || scaled < lo || scaled > hi) {
    throw ValueOutOfRange("channel " + std::to_string(c.channel_id) + " value " +
                          std::to_string(c.value) + " " + std::string(to_string(c.unit)) +
                          " does not fit the wire range");
  }
  return static_cast<std::int16_t>(scaled);
}

inline double scale_from_wire(std::int16_t raw, Unit u) { return raw / unit_scale(u); }

inline std::uint8_t frame_checksum(std::span<const std::uint8_t> covered) {
  std::uint8_t x = 0;
  for (auto b : covered) x ^= b;
  return x;
}

inline std::vector<std::uint8_t> encode_frame(const SerialFrame& frame) {
  if (frame.records.empty() || frame.records.size() > kMaxRecords) {
    throw TooManyChannels("frame must carry 1.." + std::to_string(kMaxRecords) +
                          " records, got " + std::to_string(frame.records.size()));
  }
  std::vector<std::uint8_t> out;
  out.reserve(frame_length(frame.records.size()));
  out.push_back(kSync1);
  out.push_back(kSync2);
  out.push_back(frame.version);
  out.push_back(frame.seq);
  out.push_back(static_cast<std::uint8_t>(frame.records.size()));
  for (const auto& r : frame.records) {
    const auto raw = static_cast<std::uint16_t>(r.value);
    out.push_back(r.channel_id);
    out.push_back(static_cast<std::uint8_t>(raw >> 8));
    out.push_back(static_cast<std::uint8_t>(raw & 0xFF));
  }
  out.push_back(frame_checksum(std::span(out).subspan(2)));
  return out;
}

inline std::vector<std::uint8_t> encode_frame(std::span<const ActuatorCommand> commands,
                                              std::uint8_t seq) {
  if (commands.empty() || commands.size() > kMaxRecords) {
    throw TooManyChannels("frame must carry 1.." + std::to_string(kMaxRecords) +
                          " commands, got " + std::to_string(commands.size()));
  }
  SerialFrame f;
  f.seq = seq;
  for (const auto& c : commands) f.records.push_back({c.channel_id, scale_to_wire(c)});
  return encode_frame(f);
}

struct DecoderStats {
  std::uint64_t frames = 0;
  std::uint64_t checksum_errors = 0;
  std::uint64_t unknown_version = 0;
  std::uint64_t bad_count = 0;
  std::uint64_t skipped_bytes = 0;
};

/// Incremental frame decoder. Bytes may arrive in any split; decisions are
/// only made once enough bytes are buffered, so feeding one byte at a time
/// yields exactly the frames that feeding the whole buffer does.
///
/// On any rejection the decoder drops the sync pair it was looking at and
/// rescans from the following byte, so a valid frame hidden behind garbage
/// or a false sync is still found.
class FrameDecoder {
 public:
  std::vector<SerialFrame> feed(std::span<const std::uint8_t> bytes) {
    std::vector<SerialFrame> out;
    feed(bytes, out);
    return out;
  }

  void feed(std::span<const std::uint8_t> bytes, std::vector<SerialFrame>& out) {
    buf_.insert(buf_.end(), bytes.begin(), bytes.end());
    std::size_t pos = 0;
    while (true) {
      // Seek sync pair.
      while (pos < buf_.size() && !(buf_[pos] == kSync1 && pos + 1 < buf_.size() &&
                                    buf_[pos + 1] == kSync2)) {
        if (buf_[pos] == kSync1 && pos + 1 == buf_.size()) break;  // maybe half a sync
        ++pos;
        ++stats_.skipped_bytes;
      }
      if (buf_.size() - pos < 5) break;
      const std::uint8_t version = buf_[pos + 2];
      if (version != kProtocolVersion) {
        ++stats_.unknown_version;
        pos += 2;
        continue;
      }
      const std::size_t count = buf_[pos + 4];
      if (count == 0 || count > kMaxRecords) {
        ++stats_.bad_count;
        pos += 2;
        continue;
      }
      const std::size_t len = frame_length(count);
      if (buf_.size() - pos < len) break;
      const std::span<const std::uint8_t> frame(buf_.data() + pos, len);
      if (frame_checksum(frame.subspan(2, len - 3)) != frame[len - 1]) {
        ++stats_.checksum_errors;
        pos += 2;
        continue;
      }
      SerialFrame f;
      f.version = version;
      f.seq = frame[3];
      for (std::size_t i = 0; i < count; ++i) {
        const std::uint8_t* r = frame.data() + 5 + 3 * i;
        f.records.push_back({r[0], static_cast<std::int16_t>((r[1] << 8) | r[2])});
      }
      out.push_back(std::move(f));
      ++stats_.frames;
      pos += len;
    }
    buf_.erase(buf_.begin(), buf_.begin() + static_cast<std::ptrdiff_t>(pos));
  }

  const DecoderStats& stats() const { return stats_; }
  std::size_t buffered() const { return buf_.size(); }

 private:
  std::vector<std::uint8_t> buf_;
  DecoderStats stats_;
};

inline std::vector<SerialFrame> decode_frames(std::span<const std::uint8_t> bytes) {
  FrameDecoder d;
  return d.feed(bytes);
}

}  // namespace sec
