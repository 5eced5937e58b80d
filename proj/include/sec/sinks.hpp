#pragma once

// Output paths for smoothed estimates and actuator commands: framed serial,
// newline-delimited JSON over TCP, JSON datagrams over UDP, a terminal
// renderer and an in-process device simulator.

#include <fcntl.h>
#include <sys/stat.h>
#include <termios.h>
#include <unistd.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <map>
#include <memory>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "sec/affect_stream.hpp"
#include "sec/device_sim.hpp"
#include "sec/log.hpp"
#include "sec/mapping.hpp"
#include "sec/net.hpp"
#include "sec/protocol.hpp"

namespace sec {

/// Everything the mapping stage produces for one smoothed estimate.
struct Report {
  EmotionEstimate estimate;
  EmotionLabel label = EmotionLabel::neutral;
  std::vector<ActuatorCommand> commands;
};

struct SinkStats {
  std::uint64_t sent = 0;
  std::uint64_t send_failures = 0;
  std::uint64_t connect_failures = 0;
};

class Sink {
 public:
  virtual ~Sink() = default;
  virtual void publish(const Report& r) = 0;
  virtual void flush() {}
  virtual std::string name() const = 0;
  const SinkStats& stats() const { return stats_; }

 protected:
  SinkStats stats_;
};

/// Fixed-point with at most four fractional digits, trailing zeros trimmed.
inline std::string format_number(double x) {
  if (!std::isfinite(x)) return "0";
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.4f", x);
  std::string s(buf);
  if (s.find('.') != std::string::npos) {
    while (s.back() == '0') s.pop_back();
    if (s.back() == '.') s.pop_back();
  }
  if (s == "-0") s = "0";
  return s;
}

/// One JSON object per report, no trailing newline.
inline std::string format_json_line(const Report& r) {
  std::string s;
  s.reserve(160);
  s += "{\"t\":" + format_number(r.estimate.timestamp);
  s += ",\"seq\":" + std::to_string(r.estimate.seq);
  s += ",\"v\":" + format_number(r.estimate.valence);
  s += ",\"a\":" + format_number(r.estimate.arousal);
  s += ",\"d\":" + format_number(r.estimate.dominance);
  s += ",\"label\":\"";
  s += to_string(r.label);
  s += "\",\"commands\":[";
  for (std::size_t i = 0; i < r.commands.size(); ++i) {
    const auto& c = r.commands[i];
    if (i) s += ',';
    s += "{\"ch\":" + std::to_string(c.channel_id) + ",\"value\":" + format_number(c.value) +
         ",\"unit\":\"";
    s += to_string(c.unit);
    s += "\"}";
  }
  s += "]}";
  return s;
}

inline constexpr int kBarCells = 20;

inline std::string render_bar(double x) {
  const int filled = std::clamp(static_cast<int>(std::floor(x * kBarCells + 0.5)), 0, kBarCells);
  return "[" + std::string(static_cast<std::size_t>(filled), '#') +
         std::string(static_cast<std::size_t>(kBarCells - filled), '.') + "]";
}

inline std::string format_command(const ActuatorCommand& c) {
  char buf[48];
  switch (c.unit) {
    case Unit::duty:
      std::snprintf(buf, sizeof buf, "ch%u=%d", c.channel_id, static_cast<int>(c.value));
      break;
    case Unit::meters:
      std::snprintf(buf, sizeof buf, "ch%u=%.3fm", c.channel_id, c.value);
      break;
    case Unit::degrees:
      std::snprintf(buf, sizeof buf, "ch%u=%.1fdeg", c.channel_id, c.value);
      break;
  }
  return buf;
}

inline std::string format_console_line(const Report& r) {
  char head[32];
  std::snprintf(head, sizeof head, "%6llu", static_cast<unsigned long long>(r.estimate.seq));
  auto dim = [](char tag, double x) {
    char num[16];
    std::snprintf(num, sizeof num, " %.3f", x);
    return std::string("  ") + tag + render_bar(x) + num;
  };
  char label[16];
  std::snprintf(label, sizeof label, "  %-7s", std::string(to_string(r.label)).c_str());
  std::string s = head + dim('V', r.estimate.valence) + dim('A', r.estimate.arousal) +
                  dim('D', r.estimate.dominance) + label + " |";
  for (const auto& c : r.commands) s += " " + format_command(c);
  return s;
}

class ConsoleSink final : public Sink {
 public:
  explicit ConsoleSink(std::ostream& out) : out_(out) {}
  void publish(const Report& r) override {
    out_ << format_console_line(r) << '\n';
    ++stats_.sent;
  }
  void flush() override { out_.flush(); }
  std::string name() const override { return "console"; }

 private:
  std::ostream& out_;
};

/// Newline-delimited JSON to a TCP peer. Connection loss never stalls the
/// pipeline: messages are dropped and counted, and reconnection is retried
/// at most once per backoff interval.
class TcpSink final : public Sink {
 public:
  explicit TcpSink(net::HostPort peer,
                   std::chrono::milliseconds backoff = std::chrono::milliseconds(1000))
      : peer_(std::move(peer)), backoff_(backoff) {
    try_connect();
  }

  void publish(const Report& r) override {
    if (!fd_.valid() && std::chrono::steady_clock::now() - last_attempt_ >= backoff_) try_connect();
    if (!fd_.valid()) {
      ++stats_.send_failures;
      return;
    }
    if (net::send_all(fd_.get(), format_json_line(r) + "\n")) {
      ++stats_.sent;
    } else {
      ++stats_.send_failures;
      log::warn("tcp sink " + peer_.str() + ": send failed, reconnecting");
      fd_.reset();
    }
  }

  bool connected() const { return fd_.valid(); }
  std::string name() const override { return "tcp:" + peer_.str(); }

 private:
  void try_connect() {
    last_attempt_ = std::chrono::steady_clock::now();
    try {
      fd_ = net::connect_tcp(peer_);
      log::info("tcp sink connected to " + peer_.str());
    } catch (const ConnectFailure& e) {
      ++stats_.connect_failures;
      log::warn(std::string("tcp sink: ") + e.what() + "; retrying");
    }
  }

  net::HostPort peer_;
  std::chrono::milliseconds backoff_;
  net::Fd fd_;
  std::chrono::steady_clock::time_point last_attempt_{};
};

/// One JSON datagram per report.
class UdpSink final : public Sink {
 public:
  explicit UdpSink(net::HostPort peer) : peer_(std::move(peer)) {
    auto ai = net::resolve(peer_, SOCK_DGRAM, false);
    if (!ai) throw ConnectFailure("cannot resolve " + peer_.str());
    fd_ = net::Fd(::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol));
    if (!fd_.valid() || ::connect(fd_.get(), ai->ai_addr, ai->ai_addrlen) != 0) {
      throw ConnectFailure("cannot open UDP socket to " + peer_.str());
    }
  }

  void publish(const Report& r) override {
    const std::string msg = format_json_line(r);
    if (::send(fd_.get(), msg.data(), msg.size(), 0) == static_cast<ssize_t>(msg.size())) {
      ++stats_.sent;
    } else {
      ++stats_.send_failures;
    }
  }

  std::string name() const override { return "udp:" + peer_.str(); }

 private:
  net::HostPort peer_;
  net::Fd fd_;
};

inline speed_t baud_constant(int baud) {
  switch (baud) {
    case 9600: return B9600;
    case 19200: return B19200;
    case 38400: return B38400;
    case 57600: return B57600;
    case 115200: return B115200;
    case 230400: return B230400;
    case 460800: return B460800;
    case 921600: return B921600;
    default: return B0;
  }
}

inline constexpr int kDefaultBaud = 115200;

/// Commands only, as SerialFrames. A tty is switched to raw 8N1 at the
/// requested baud; any other path (file, FIFO) receives the bytes as-is.
class SerialSink final : public Sink {
 public:
  SerialSink(std::string path, int baud = kDefaultBaud) : path_(std::move(path)) {
    if (baud_constant(baud) == B0) throw ConnectFailure("unsupported baud " + std::to_string(baud));
    fd_ = net::Fd(::open(path_.c_str(), O_WRONLY | O_NOCTTY | O_CREAT | O_TRUNC, 0644));
    if (!fd_.valid()) throw IoFailure("cannot open serial device '" + path_ + "'");
    if (::isatty(fd_.get())) configure_tty(baud);
  }

  void publish(const Report& r) override {
    if (r.commands.empty()) return;
    std::vector<std::uint8_t> frame;
    try {
      frame = encode_frame(r.commands, seq_);
    } catch (const Error& e) {
      ++stats_.send_failures;
      log::warn(std::string("serial sink: ") + e.what());
      return;
    }
    ++seq_;
    std::size_t off = 0;
    while (off < frame.size()) {
      const ssize_t n = ::write(fd_.get(), frame.data() + off, frame.size() - off);
      if (n < 0) {
        if (errno == EINTR) continue;
        ++stats_.send_failures;
        return;
      }
      off += static_cast<std::size_t>(n);
    }
    ++stats_.sent;
  }

  std::string name() const override { return "serial:" + path_; }

 private:
  void configure_tty(int baud) {
    termios tio{};
    if (::tcgetattr(fd_.get(), &tio) != 0) throw IoFailure("tcgetattr failed on " + path_);
    ::cfmakeraw(&tio);
    tio.c_cflag &= ~(PARENB | CSTOPB | CSIZE);
    tio.c_cflag |= CS8 | CLOCAL;
    ::cfsetispeed(&tio, baud_constant(baud));
    ::cfsetospeed(&tio, baud_constant(baud));
    if (::tcsetattr(fd_.get(), TCSANOW, &tio) != 0) throw IoFailure("tcsetattr failed on " + path_);
  }

  std::string path_;
  net::Fd fd_;
  std::uint8_t seq_ = 0;
};

/// In-process device simulation. Commands go through the serial encoder and
/// decoder, then drive a vibro model per duty channel and a proxemic model
/// per meters channel. Writes `time,channel,model,value` CSV rows.
class SimSink final : public Sink {
 public:
  SimSink(std::ostream& out, double first_dt = 1.0) : out_(out), first_dt_(first_dt) {
    out_ << "time,channel,model,value\n";
  }

  void publish(const Report& r) override {
    if (r.commands.empty()) return;
    const double t = r.estimate.timestamp;
    const double dt = last_t_ ? std::max(t - *last_t_, kMinDt) : first_dt_;
    last_t_ = t;
    std::map<std::uint8_t, Unit> units;
    for (const auto& c : r.commands) units[c.channel_id] = c.unit;
    std::vector<SerialFrame> frames;
    try {
      frames = decoder_.feed(encode_frame(r.commands, seq_++));
    } catch (const Error& e) {
      ++stats_.send_failures;
      log::warn(std::string("sim sink: ") + e.what());
      return;
    }
    for (const auto& f : frames) {
      for (const auto& rec : f.records) {
        const Unit u = units[rec.channel_id];
        char line[96];
        if (u == Unit::duty) {
          auto& s = vibro_[rec.channel_id];
          s = sim::vibro_step(s, rec.value, dt);
          std::snprintf(line, sizeof line, "%.4f,%u,vibro,%.6f\n", t + dt, rec.channel_id, s.intensity);
        } else if (u == Unit::meters) {
          auto it = proxemic_.find(rec.channel_id);
          const double cmd = std::max(0.0, scale_from_wire(rec.value, Unit::meters));
          if (it == proxemic_.end()) {
            it = proxemic_.emplace(rec.channel_id, sim::ProxemicState{cmd, cmd, 0.5}).first;
          }
          it->second = sim::proxemic_step(it->second, cmd, dt);
          std::snprintf(line, sizeof line, "%.4f,%u,proxemic,%.6f\n", t + dt, rec.channel_id,
                        it->second.current_distance);
        } else {
          std::snprintf(line, sizeof line, "%.4f,%u,servo,%.1f\n", t + dt, rec.channel_id,
                        scale_from_wire(rec.value, Unit::degrees));
        }
        out_ << line;
      }
    }
    ++stats_.sent;
  }

  void flush() override { out_.flush(); }
  std::string name() const override { return "sim"; }

 private:
  std::ostream& out_;
  double first_dt_;
  std::optional<double> last_t_;
  FrameDecoder decoder_;
  std::uint8_t seq_ = 0;
  std::map<std::uint8_t, sim::VibroState> vibro_;
  std::map<std::uint8_t, sim::ProxemicState> proxemic_;
};

}  // namespace sec
