#pragma once

// Fixed-step models of the physical endpoints. Pure: state in, state out.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <string_view>

#include "sec/protocol.hpp"

namespace sec::sim {

/// Vibrotactile motor as a first-order lag on PWM duty.
struct VibroState {
  double intensity = 0.0;
  double time_constant = 0.05;
};

inline VibroState vibro_step(VibroState s, int duty, double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("dt must be positive");
  const double target = std::clamp(duty, 0, 255) / 255.0;
  s.intensity += (target - s.intensity) * (1.0 - std::exp(-dt / s.time_constant));
  s.intensity = std::clamp(s.intensity, 0.0, 1.0);
  return s;
}

/// Agent holding an interpersonal distance, moving at bounded speed.
struct ProxemicState {
  double current_distance = 1.5;
  double target_distance = 1.5;
  double max_speed = 0.5;
};

inline ProxemicState proxemic_step(ProxemicState s, double commanded_distance, double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("dt must be positive");
  if (!(commanded_distance >= 0.0)) throw std::invalid_argument("distance must be >= 0");
  s.target_distance = commanded_distance;
  const double step = s.max_speed * dt;
  const double delta = s.target_distance - s.current_distance;
  s.current_distance = std::abs(delta) <= step ? s.target_distance
                                               : s.current_distance + std::copysign(step, delta);
  return s;
}

enum class Model { vibro, proxemic };

inline std::optional<Model> parse_model(std::string_view s) {
  if (s == "vibro") return Model::vibro;
  if (s == "proxemic") return Model::proxemic;
  return std::nullopt;
}

/// Drives one model from decoded frames, one fixed step per frame, and
/// writes a `time,value` CSV trace. The record used is `channel` when given,
/// otherwise the first record of each frame. Frames lacking that channel
/// hold the previous command.
class FrameTrace {
 public:
  FrameTrace(Model model, double dt, std::optional<std::uint8_t> channel, std::ostream& out)
      : model_(model), dt_(dt), channel_(channel), out_(out) {
    if (!(dt > 0.0)) throw std::invalid_argument("dt must be positive");
    out_ << "time,value\n";
  }

  void on_frame(const SerialFrame& f) {
    const FrameRecord* rec = nullptr;
    for (const auto& r : f.records) {
      if (!channel_ || r.channel_id == *channel_) {
        rec = &r;
        break;
      }
    }
    if (rec) last_raw_ = rec->value;
    time_ += dt_;
    double value = 0.0;
    if (model_ == Model::vibro) {
      vibro_ = vibro_step(vibro_, last_raw_.value_or(0), dt_);
      value = vibro_.intensity;
    } else {
      const double cmd = last_raw_ ? std::max(0.0, scale_from_wire(*last_raw_, Unit::meters))
                                   : proxemic_.current_distance;
      proxemic_ = proxemic_step(proxemic_, cmd, dt_);
      value = proxemic_.current_distance;
    }
    char line[64];
    std::snprintf(line, sizeof line, "%.6f,%.6f\n", time_, value);
    out_ << line;
    ++steps_;
  }

  std::uint64_t steps() const { return steps_; }

 private:
  Model model_;
  double dt_;
  std::optional<std::uint8_t> channel_;
  std::ostream& out_;
  VibroState vibro_;
  ProxemicState proxemic_;
  std::optional<std::int16_t> last_raw_;
  double time_ = 0.0;
  std::uint64_t steps_ = 0;
};

}  // namespace sec::sim
