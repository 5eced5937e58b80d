#pragma once

// Staged pipeline: ingest -> chunk -> estimate -> smooth/classify -> map ->
// sinks. Stages run on their own threads joined by bounded queues; a full
// queue blocks its producer. End of input is propagated by closing queues.

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <deque>
#include <functional>
#include <iostream>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "sec/affect_stream.hpp"
#include "sec/audio_io.hpp"
#include "sec/chunker.hpp"
#include "sec/estimator.hpp"
#include "sec/mapping.hpp"
#include "sec/sinks.hpp"

namespace sec {

template <typename T>
class BoundedQueue {
 public:
  explicit BoundedQueue(std::size_t capacity) : capacity_(capacity) {}

  /// Blocks while full. Returns false if the queue was closed.
  bool push(T item) {
    std::unique_lock lock(mu_);
    not_full_.wait(lock, [&] { return items_.size() < capacity_ || closed_; });
    if (closed_) return false;
    items_.push_back(std::move(item));
    not_empty_.notify_one();
    return true;
  }

  /// Blocks until an item arrives; nullopt once closed and drained.
  std::optional<T> pop() {
    std::unique_lock lock(mu_);
    not_empty_.wait(lock, [&] { return !items_.empty() || closed_; });
    if (items_.empty()) return std::nullopt;
    T item = std::move(items_.front());
    items_.pop_front();
    not_full_.notify_one();
    return item;
  }

  void close() {
    std::lock_guard lock(mu_);
    closed_ = true;
    not_empty_.notify_all();
    not_full_.notify_all();
  }

  std::size_t size() const {
    std::lock_guard lock(mu_);
    return items_.size();
  }

 private:
  std::size_t capacity_;
  mutable std::mutex mu_;
  std::condition_variable not_empty_;
  std::condition_variable not_full_;
  std::deque<T> items_;
  bool closed_ = false;
};

inline constexpr std::size_t kQueueDepth = 8;

enum class Backend { baseline, udp };

struct SinkSpec {
  enum class Kind { console, tcp, udp, serial, sim } kind = Kind::console;
  std::string target;  // host:port or device path
  int baud = kDefaultBaud;
};

struct PipelineConfig {
  std::string input;  // WAV path, or "-" for raw PCM on stdin
  std::optional<int> pcm_rate;
  PcmEncoding pcm_format = PcmEncoding::int16_le;
  ChunkParams chunk;
  Backend backend = Backend::baseline;
  std::optional<net::HostPort> udp_listen;
  std::uint64_t udp_max_count = 0;
  double udp_idle_timeout_s = 0.0;
  AffectParams affect;
  std::optional<std::string> mapping_path;
  std::vector<SinkSpec> sinks;
  log::Level log_level = log::Level::info;
};

struct SinkSummary {
  std::string name;
  SinkStats stats;
};

struct RunSummary {
  int exit_code = 0;
  std::string failed_stage;
  std::string error;
  bool interrupted = false;
  std::uint64_t chunks = 0;
  std::uint64_t estimates = 0;
  std::uint64_t commands = 0;
  std::uint64_t rejected_datagrams = 0;
  std::vector<SinkSummary> sinks;
};

inline std::string format_summary(const RunSummary& s) {
  std::string out = "summary: chunks=" + std::to_string(s.chunks) +
                    " estimates=" + std::to_string(s.estimates) +
                    " commands=" + std::to_string(s.commands) +
                    " rejected_datagrams=" + std::to_string(s.rejected_datagrams) + "\n";
  for (const auto& k : s.sinks) {
    out += "  sink " + k.name + ": sent=" + std::to_string(k.stats.sent) +
           " send_failures=" + std::to_string(k.stats.send_failures) +
           " connect_failures=" + std::to_string(k.stats.connect_failures) + "\n";
  }
  return out;
}

inline std::unique_ptr<Sink> make_sink(const SinkSpec& spec, std::ostream& out, double first_dt) {
  switch (spec.kind) {
    case SinkSpec::Kind::console: return std::make_unique<ConsoleSink>(out);
    case SinkSpec::Kind::sim: return std::make_unique<SimSink>(out, first_dt);
    case SinkSpec::Kind::serial: return std::make_unique<SerialSink>(spec.target, spec.baud);
    case SinkSpec::Kind::tcp:
    case SinkSpec::Kind::udp: {
      auto hp = net::parse_host_port(spec.target);
      if (!hp) throw ConnectFailure("bad address '" + spec.target + "'");
      if (spec.kind == SinkSpec::Kind::tcp) return std::make_unique<TcpSink>(*hp);
      return std::make_unique<UdpSink>(*hp);
    }
  }
  return nullptr;
}

namespace detail {

// First failure wins; later ones are logged only.
class FailureLatch {
 public:
  void fail(const std::string& stage, const std::string& what) {
    std::lock_guard lock(mu_);
    log::warn(stage + ": " + what);
    if (!stage_.empty()) return;
    stage_ = stage;
    what_ = what;
    failed_.store(true);
  }
  bool failed() const { return failed_.load(); }
  std::string stage() const {
    std::lock_guard lock(mu_);
    return stage_;
  }
  std::string what() const {
    std::lock_guard lock(mu_);
    return what_;
  }

 private:
  mutable std::mutex mu_;
  std::atomic<bool> failed_{false};
  std::string stage_;
  std::string what_;
};

template <typename T>
void drain(BoundedQueue<T>& q) {
  while (q.pop()) {
  }
}

}  // namespace detail

/// Runs the whole pipeline to completion. `out` receives console/sim sink
/// output; `stop` (e.g. raised by SIGINT) ends ingest early and lets the
/// downstream stages flush.
inline RunSummary run_pipeline(const PipelineConfig& cfg, std::ostream& out,
                               const std::atomic<bool>& stop) {
  RunSummary summary;
  detail::FailureLatch latch;

  auto finish_with_failure = [&](const std::string& stage, const std::string& what) {
    summary.exit_code = 1;
    summary.failed_stage = stage;
    summary.error = what;
    return summary;
  };

  // Everything that can be validated before threads start.
  MappingConfig mapping;
  try {
    mapping = cfg.mapping_path ? load_mapping_config(*cfg.mapping_path) : default_mapping_config();
  } catch (const Error& e) {
    return finish_with_failure("mapping-engine", e.what());
  }
  std::vector<std::unique_ptr<Sink>> sinks;
  try {
    for (const auto& spec : cfg.sinks) sinks.push_back(make_sink(spec, out, cfg.chunk.hop_s));
  } catch (const Error& e) {
    return finish_with_failure("wire-sinks", e.what());
  }
  std::unique_ptr<UdpEstimateSource> udp;
  if (cfg.backend == Backend::udp) {
    try {
      udp = std::make_unique<UdpEstimateSource>(*cfg.udp_listen);
      log::info("udp source listening on port " + std::to_string(udp->port()));
    } catch (const Error& e) {
      return finish_with_failure("estimator", e.what());
    }
  }

  BoundedQueue<AudioChunk> chunk_q(kQueueDepth);
  BoundedQueue<EmotionEstimate> estimate_q(kQueueDepth);
  BoundedQueue<Report> report_q(kQueueDepth);
  std::atomic<std::uint64_t> chunks{0}, estimates{0}, commands{0};
  std::atomic<bool> halt{false};
  auto halted = [&] { return stop.load() || halt.load(); };
  auto fail = [&](const std::string& stage, const std::string& what) {
    latch.fail(stage, what);
    halt.store(true);
  };

  std::vector<std::thread> threads;

  if (cfg.backend == Backend::baseline) {
    threads.emplace_back([&] {
      std::string stage = "audio-io";
      try {
        const int in_rate = cfg.input == "-" ? cfg.pcm_rate.value_or(kCanonicalRate) : 0;
        std::optional<AudioStream> wav;
        if (cfg.input != "-") wav = read_wav(cfg.input);
        const int rate = wav ? wav->sample_rate : in_rate;

        stage = "chunker";
        StreamingChunker chunker(cfg.chunk, kCanonicalRate);
        LinearResampler resampler(rate, kCanonicalRate);
        std::vector<float> resampled;
        std::vector<AudioChunk> ready;
        auto forward = [&] {
          for (auto& c : ready) {
            if (!chunk_q.push(std::move(c))) break;
            ++chunks;
          }
          ready.clear();
        };
        auto consume = [&](std::span<const float> block) {
          resampled.clear();
          resampler.push(block, resampled);
          chunker.push(resampled, ready);
          forward();
        };

        if (wav) {
          constexpr std::size_t kBlock = 4096;
          std::span<const float> all(wav->samples);
          for (std::size_t i = 0; i < all.size() && !halted(); i += kBlock) {
            consume(all.subspan(i, std::min(kBlock, all.size() - i)));
          }
        } else {
          stage = "audio-io";
          read_pcm_fd(STDIN_FILENO, cfg.pcm_format, consume, &stop);
          stage = "chunker";
        }
        if (!halt.load()) {
          resampled.clear();
          resampler.finish(resampled);
          chunker.push(resampled, ready);
          chunker.finish(ready);
          forward();
        }
      } catch (const std::exception& e) {
        fail(stage, e.what());
      }
      chunk_q.close();
    });

    threads.emplace_back([&] {
      BaselineEstimator estimator;
      while (auto chunk = chunk_q.pop()) {
        if (halt.load()) continue;
        try {
          if (estimate_q.push(estimator.estimate(*chunk))) ++estimates;
        } catch (const std::exception& e) {
          fail("estimator", e.what());
        }
      }
      estimate_q.close();
    });
  } else {
    threads.emplace_back([&] {
      try {
        udp->run(
            [&](EmotionEstimate e) {
              if (estimate_q.push(std::move(e))) ++estimates;
            },
            stop, cfg.udp_max_count,
            std::chrono::milliseconds(static_cast<long long>(cfg.udp_idle_timeout_s * 1000.0)));
      } catch (const std::exception& e) {
        fail("estimator", e.what());
      }
      estimate_q.close();
    });
  }

  threads.emplace_back([&] {
    std::string stage = "affect-stream";
    try {
      AffectStream affect(cfg.affect);
      MappingEngine engine(mapping, cfg.chunk.hop_s);
      while (auto e = estimate_q.pop()) {
        if (halt.load()) continue;
        stage = "affect-stream";
        AffectFrame frame = affect.push(*e);
        stage = "mapping-engine";
        Report r{frame.smoothed, frame.label, engine.map(frame.smoothed, frame.label)};
        commands += r.commands.size();
        report_q.push(std::move(r));
      }
    } catch (const std::exception& e) {
      fail(stage, e.what());
      detail::drain(estimate_q);
    }
    report_q.close();
  });

  threads.emplace_back([&] {
    try {
      while (auto r = report_q.pop()) {
        if (halt.load()) continue;
        for (auto& s : sinks) s->publish(*r);
      }
      for (auto& s : sinks) s->flush();
    } catch (const std::exception& e) {
      fail("wire-sinks", e.what());
      detail::drain(report_q);
    }
  });

  for (auto& t : threads) t.join();

  summary.chunks = chunks.load();
  summary.estimates = estimates.load();
  summary.commands = commands.load();
  summary.rejected_datagrams = udp ? udp->rejected() : 0;
  for (const auto& s : sinks) summary.sinks.push_back({s->name(), s->stats()});
  if (latch.failed()) {
    summary.exit_code = 1;
    summary.failed_stage = latch.stage();
    summary.error = latch.what();
  } else if (stop.load()) {
    summary.interrupted = true;
    summary.exit_code = 130;
  }
  return summary;
}

}  // namespace sec
