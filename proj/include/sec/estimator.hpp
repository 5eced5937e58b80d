#pragma once

// Emotion estimate backends. The baseline maps acoustic features to
// valence/arousal/dominance with fixed heuristics; the UDP source ingests
// estimates produced by an external recognizer.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>

#include "json.hpp"
#include "sec/chunker.hpp"
#include "sec/error.hpp"
#include "sec/features.hpp"
#include "sec/log.hpp"
#include "sec/net.hpp"

namespace sec {

/// One valence/arousal/dominance sample. All dimensions live in [0, 1] with
/// 0.5 as the neutral midpoint.
struct EmotionEstimate {
  double valence = 0.5;
  double arousal = 0.5;
  double dominance = 0.5;
  double timestamp = 0.0;
  std::uint64_t seq = 0;
  std::string source;
};

inline bool in_unit_range(double x) { return x >= 0.0 && x <= 1.0; }

inline double clamp01(double x) { return std::clamp(x, 0.0, 1.0); }

// Baseline heuristic coefficients. Fixed by design: the baseline is a
// reproducible reference, not a tunable model.
struct BaselineCoefficients {
  static constexpr double kDbSpan = 60.0;          // dB range mapped onto [0, 1]
  static constexpr double kArousalEnergyWeight = 0.6;
  static constexpr double kArousalZcrWeight = 0.4;
  static constexpr double kValencePivotHz = 180.0;  // f0 giving neutral valence
  static constexpr double kValenceScaleHz = 120.0;
};

inline EmotionEstimate baseline_estimate(const AcousticFeatures& f) {
  using C = BaselineCoefficients;
  const double db = f.rms < kRmsFloor ? kDbFloor : f.log_rms_db;
  const double energy = (db + C::kDbSpan) / C::kDbSpan;
  EmotionEstimate e;
  e.arousal = clamp01(energy * C::kArousalEnergyWeight + f.zcr * C::kArousalZcrWeight);
  e.dominance = clamp01(energy);
  e.valence = f.f0_hz > 0.0
                  ? clamp01(0.5 + 0.5 * std::tanh((f.f0_hz - C::kValencePivotHz) / C::kValenceScaleHz))
                  : 0.5;
  e.source = "baseline";
  return e;
}

/// Chunk-driven backend contract: one estimate per chunk, seq and timestamp
/// taken from the chunk.
class ChunkEstimator {
 public:
  virtual ~ChunkEstimator() = default;
  virtual EmotionEstimate estimate(const AudioChunk& chunk) = 0;
  virtual std::string_view name() const = 0;
};

class BaselineEstimator final : public ChunkEstimator {
 public:
  EmotionEstimate estimate(const AudioChunk& chunk) override {
    EmotionEstimate e = baseline_estimate(extract_features(chunk));
    e.timestamp = chunk.start_time;
    e.seq = chunk.seq;
    return e;
  }
  std::string_view name() const override { return "baseline"; }
};

inline constexpr std::size_t kMaxVadDatagram = 512;

/// Parses one json-vad datagram: a UTF-8 JSON object with numeric
/// `valence`, `arousal` and `dominance` in [0, 1]. Extra fields (including
/// `label`) are ignored.
inline EmotionEstimate parse_vad_datagram(std::string_view payload) {
  if (payload.empty()) throw ParseFailure("empty datagram");
  if (payload.size() > kMaxVadDatagram) throw ParseFailure("datagram exceeds 512 bytes");
  const auto doc = nlohmann::json::parse(payload, nullptr, false);
  if (doc.is_discarded()) throw ParseFailure("invalid JSON");
  if (!doc.is_object()) throw ParseFailure("datagram is not a JSON object");
  auto field = [&](const char* key) {
    auto it = doc.find(key);
    if (it == doc.end() || !it->is_number()) {
      throw ParseFailure(std::string("missing numeric field '") + key + "'");
    }
    const double v = it->get<double>();
    if (!std::isfinite(v) || !in_unit_range(v)) {
      throw ParseFailure(std::string("field '") + key + "' out of [0,1]");
    }
    return v;
  };
  EmotionEstimate e;
  e.valence = field("valence");
  e.arousal = field("arousal");
  e.dominance = field("dominance");
  e.source = "udp";
  return e;
}

/// Receives json-vad datagrams on a bound UDP socket. Malformed datagrams
/// are logged, counted and skipped; accepted ones are stamped with arrival
/// time (seconds since the source opened) and a local sequence number.
class UdpEstimateSource {
 public:
  explicit UdpEstimateSource(const net::HostPort& bind_address)
      : fd_(net::bind_udp(bind_address)), origin_(std::chrono::steady_clock::now()) {}

  std::uint16_t port() const { return net::local_port(fd_.get()); }
  std::uint64_t accepted() const { return next_seq_; }
  std::uint64_t rejected() const { return rejected_; }

  /// Waits up to `timeout` for one valid estimate. Returns nullopt on
  /// timeout or when the datagram that arrived was rejected.
  std::optional<EmotionEstimate> receive(std::chrono::milliseconds timeout) {
    pollfd pfd{fd_.get(), POLLIN, 0};
    const int ready = ::poll(&pfd, 1, static_cast<int>(timeout.count()));
    if (ready <= 0) return std::nullopt;
    char buf[kMaxVadDatagram + 1];
    const ssize_t n = ::recv(fd_.get(), buf, sizeof buf, 0);
    if (n < 0) return std::nullopt;
    try {
      EmotionEstimate e = parse_vad_datagram(std::string_view(buf, static_cast<std::size_t>(n)));
      e.timestamp = std::chrono::duration<double>(std::chrono::steady_clock::now() - origin_).count();
      e.seq = next_seq_++;
      return e;
    } catch (const ParseFailure& err) {
      ++rejected_;
      log::warn(std::string("udp source: ") + err.what());
      return std::nullopt;
    }
  }

  /// Delivers estimates until `stop` is raised, `max_count` estimates have
  /// arrived (0 = unlimited) or nothing arrives for `idle_timeout` (zero =
  /// wait forever).
  void run(const std::function<void(EmotionEstimate)>& sink, const std::atomic<bool>& stop,
           std::uint64_t max_count = 0,
           std::chrono::milliseconds idle_timeout = std::chrono::milliseconds::zero()) {
    auto last = std::chrono::steady_clock::now();
    while (!stop.load()) {
      if (max_count != 0 && next_seq_ >= max_count) return;
      if (auto e = receive(std::chrono::milliseconds(100))) {
        sink(std::move(*e));
        last = std::chrono::steady_clock::now();
      } else if (idle_timeout.count() > 0 && std::chrono::steady_clock::now() - last >= idle_timeout) {
        return;
      }
    }
  }

 private:
  net::Fd fd_;
  std::chrono::steady_clock::time_point origin_;
  std::uint64_t next_seq_ = 0;
  std::uint64_t rejected_ = 0;
};

}  // namespace sec
