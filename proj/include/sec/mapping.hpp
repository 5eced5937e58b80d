#pragma once

// Declarative emotion-to-actuator mapping: piecewise-linear transfer
// functions, label tables, hysteresis gating and rate limiting.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"
#include "sec/affect_stream.hpp"
#include "sec/error.hpp"
#include "sec/estimator.hpp"

namespace sec {

enum class Unit { duty, meters, degrees };

inline std::string_view to_string(Unit u) {
  switch (u) {
    case Unit::duty: return "duty";
    case Unit::meters: return "meters";
    case Unit::degrees: return "degrees";
  }
  return "duty";
}

inline std::optional<Unit> parse_unit(std::string_view s) {
  if (s == "duty") return Unit::duty;
  if (s == "meters") return Unit::meters;
  if (s == "degrees") return Unit::degrees;
  return std::nullopt;
}

enum class Source { valence, arousal, dominance, label };

inline std::string_view to_string(Source s) {
  switch (s) {
    case Source::valence: return "valence";
    case Source::arousal: return "arousal";
    case Source::dominance: return "dominance";
    case Source::label: return "label";
  }
  return "label";
}

inline std::optional<Source> parse_source(std::string_view s) {
  for (auto v : {Source::valence, Source::arousal, Source::dominance, Source::label}) {
    if (to_string(v) == s) return v;
  }
  return std::nullopt;
}

struct ActuatorCommand {
  std::uint8_t channel_id = 0;
  double value = 0.0;
  Unit unit = Unit::duty;
  double timestamp = 0.0;
  std::uint64_t seq = 0;

  friend bool operator==(const ActuatorCommand&, const ActuatorCommand&) = default;
};

/// Piecewise-linear function on [0, 1]. Control points have strictly
/// increasing x, starting at 0 and ending at 1.
class TransferFunction {
 public:
  using Point = std::pair<double, double>;

  explicit TransferFunction(std::vector<Point> points) : points_(std::move(points)) {
    if (points_.size() < 2) throw ConfigInvalid("transfer needs at least 2 points");
    if (points_.front().first != 0.0 || points_.back().first != 1.0) {
      throw ConfigInvalid("transfer must span x = 0 to x = 1");
    }
    for (std::size_t i = 0; i < points_.size(); ++i) {
      if (!std::isfinite(points_[i].second)) throw ConfigInvalid("transfer y must be finite");
      if (i > 0 && !(points_[i].first > points_[i - 1].first)) {
        throw ConfigInvalid("transfer x must be strictly increasing");
      }
    }
  }

  const std::vector<Point>& points() const { return points_; }

  double operator()(double x) const {
    x = std::clamp(x, 0.0, 1.0);
    auto hi = std::lower_bound(points_.begin(), points_.end(), x,
                               [](const Point& p, double v) { return p.first < v; });
    if (hi->first == x) return hi->second;
    auto lo = std::prev(hi);
    const double t = (x - lo->first) / (hi->first - lo->first);
    return lo->second + (hi->second - lo->second) * t;
  }

 private:
  std::vector<Point> points_;
};

inline double eval_transfer(const TransferFunction& tf, double x) { return tf(x); }

inline bool apply_hysteresis(bool active, double x, double on_threshold, double off_threshold) {
  return active ? x > off_threshold : x >= on_threshold;
}

inline double apply_rate_limit(double prev, double target, double max_rate, double dt) {
  const double step = max_rate * dt;
  return prev + std::clamp(target - prev, -step, step);
}

inline double round_half_up(double x) { return std::floor(x + 0.5); }

struct Hysteresis {
  double on = 0.0;
  double off = 0.0;
};

using LabelTable = std::array<double, kAllLabels.size()>;

struct ChannelRule {
  std::uint8_t id = 0;
  Unit unit = Unit::duty;
  Source source = Source::arousal;
  std::optional<TransferFunction> transfer;  // dimension sources
  LabelTable table{};                        // label source
  std::optional<double> max_rate;
  std::optional<Hysteresis> hysteresis;
  std::optional<double> rest;

  /// Value the channel starts from and falls back to when gated off.
  double initial_value() const { return rest.value_or(0.0); }
};

struct MappingConfig {
  std::vector<ChannelRule> channels;
};

inline constexpr std::string_view kDefaultMappingJson = R"({"channels":[{"id":0,"unit":"duty","source":"arousal","transfer":[[0,0],[1,255]],"max_rate":null,"hysteresis":null,"rest":0}, {"id":1,"unit":"meters","source":"label","table":{"angry":2.0,"happy":1.0,"sad":1.5,"calm":1.2,"neutral":1.5},"max_rate":0.5,"rest":1.5}]})";

namespace detail {

inline std::optional<double> optional_number(const nlohmann::json& obj, const char* key,
                                             const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return std::nullopt;
  if (!it->is_number() || !std::isfinite(it->get<double>())) {
    throw ConfigInvalid(where + ": '" + key + "' must be a number or null");
  }
  return it->get<double>();
}

inline ChannelRule parse_channel(const nlohmann::json& c, std::size_t index) {
  const std::string where = "channels[" + std::to_string(index) + "]";
  if (!c.is_object()) throw ConfigInvalid(where + " is not an object");
  ChannelRule rule;

  auto id = c.find("id");
  if (id == c.end() || !id->is_number_integer() || id->get<long long>() < 0 ||
      id->get<long long>() > 255) {
    throw ConfigInvalid(where + ": 'id' must be an integer in 0..255");
  }
  rule.id = static_cast<std::uint8_t>(id->get<int>());

  auto unit = c.find("unit");
  if (unit == c.end() || !unit->is_string() || !parse_unit(unit->get<std::string>())) {
    throw ConfigInvalid(where + ": 'unit' must be duty, meters or degrees");
  }
  rule.unit = *parse_unit(unit->get<std::string>());

  auto source = c.find("source");
  if (source == c.end() || !source->is_string() || !parse_source(source->get<std::string>())) {
    throw ConfigInvalid(where + ": 'source' must be valence, arousal, dominance or label");
  }
  rule.source = *parse_source(source->get<std::string>());

  if (rule.source == Source::label) {
    auto table = c.find("table");
    if (table == c.end() || !table->is_object()) {
      throw ConfigInvalid(where + ": label source requires a 'table' object");
    }
    for (std::size_t i = 0; i < kAllLabels.size(); ++i) {
      const std::string name(to_string(kAllLabels[i]));
      auto v = table->find(name);
      if (v == table->end() || !v->is_number() || !std::isfinite(v->get<double>())) {
        throw ConfigInvalid(where + ": table missing numeric entry for '" + name + "'");
      }
      rule.table[i] = v->get<double>();
    }
    if (c.contains("transfer") && !c["transfer"].is_null()) {
      throw ConfigInvalid(where + ": label source cannot use 'transfer'");
    }
  } else {
    auto transfer = c.find("transfer");
    if (transfer == c.end() || !transfer->is_array()) {
      throw ConfigInvalid(where + ": dimension source requires a 'transfer' array");
    }
    std::vector<TransferFunction::Point> points;
    for (const auto& p : *transfer) {
      if (!p.is_array() || p.size() != 2 || !p[0].is_number() || !p[1].is_number()) {
        throw ConfigInvalid(where + ": transfer points must be [x, y] pairs");
      }
      points.emplace_back(p[0].get<double>(), p[1].get<double>());
    }
    try {
      rule.transfer.emplace(std::move(points));
    } catch (const ConfigInvalid& e) {
      throw ConfigInvalid(where + ": " + e.what());
    }
  }

  rule.max_rate = optional_number(c, "max_rate", where);
  if (rule.max_rate && !(*rule.max_rate > 0.0)) {
    throw ConfigInvalid(where + ": 'max_rate' must be positive");
  }
  rule.rest = optional_number(c, "rest", where);
  if (!rule.rest && rule.unit == Unit::duty) rule.rest = 0.0;

  auto hyst = c.find("hysteresis");
  if (hyst != c.end() && !hyst->is_null()) {
    if (rule.source == Source::label) {
      throw ConfigInvalid(where + ": hysteresis needs a dimension source");
    }
    if (!hyst->is_object()) throw ConfigInvalid(where + ": 'hysteresis' must be {\"on\",\"off\"}");
    auto on = optional_number(*hyst, "on", where + ".hysteresis");
    auto off = optional_number(*hyst, "off", where + ".hysteresis");
    if (!on || !off) throw ConfigInvalid(where + ": hysteresis needs 'on' and 'off'");
    if (!(*on > *off)) throw ConfigInvalid(where + ": hysteresis 'on' must exceed 'off'");
    rule.hysteresis = Hysteresis{*on, *off};
  }
  return rule;
}

}  // namespace detail

inline MappingConfig parse_mapping_config(std::string_view text) {
  const auto doc = nlohmann::json::parse(text, nullptr, false);
  if (doc.is_discarded()) throw ConfigInvalid("mapping config is not valid JSON");
  if (!doc.is_object() || !doc.contains("channels") || !doc["channels"].is_array()) {
    throw ConfigInvalid("mapping config needs a top-level 'channels' array");
  }
  MappingConfig cfg;
  std::size_t i = 0;
  for (const auto& c : doc["channels"]) cfg.channels.push_back(detail::parse_channel(c, i++));
  if (cfg.channels.empty()) throw ConfigInvalid("mapping config has no channels");
  std::vector<bool> seen(256, false);
  for (const auto& c : cfg.channels) {
    if (seen[c.id]) throw ConfigInvalid("duplicate channel id " + std::to_string(c.id));
    seen[c.id] = true;
  }
  return cfg;
}

inline MappingConfig load_mapping_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigInvalid("cannot open mapping config '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_mapping_config(ss.str());
}

inline MappingConfig default_mapping_config() { return parse_mapping_config(kDefaultMappingJson); }

inline constexpr double kMinDt = 1e-3;

/// Stateful mapper. Holds per-channel previous value and gate state; the
/// config is fixed for the engine's lifetime.
class MappingEngine {
 public:
  /// `first_dt` is used for the first estimate, which has no predecessor
  /// timestamp to difference against.
  explicit MappingEngine(MappingConfig config, double first_dt = 1.0)
      : config_(std::move(config)), first_dt_(std::max(first_dt, kMinDt)) {
    for (const auto& c : config_.channels) {
      prev_.push_back(c.initial_value());
      active_.push_back(false);
    }
  }

  const MappingConfig& config() const { return config_; }
  std::size_t channel_count() const { return config_.channels.size(); }

  /// dt derived from estimate timestamps, floored at 1 ms.
  std::vector<ActuatorCommand> map(const EmotionEstimate& e, EmotionLabel label) {
    const double dt = last_timestamp_ ? std::max(e.timestamp - *last_timestamp_, kMinDt) : first_dt_;
    last_timestamp_ = e.timestamp;
    return map(e, label, dt);
  }

  std::vector<ActuatorCommand> map(const EmotionEstimate& e, EmotionLabel label, double dt) {
    dt = std::max(dt, kMinDt);
    std::vector<ActuatorCommand> out;
    out.reserve(config_.channels.size());
    for (std::size_t i = 0; i < config_.channels.size(); ++i) {
      const ChannelRule& rule = config_.channels[i];
      double target = 0.0;
      double x = 0.0;
      switch (rule.source) {
        case Source::valence: x = e.valence; break;
        case Source::arousal: x = e.arousal; break;
        case Source::dominance: x = e.dominance; break;
        case Source::label: break;
      }
      if (rule.source == Source::label) {
        target = rule.table[static_cast<std::size_t>(label)];
      } else {
        target = (*rule.transfer)(x);
      }
      if (rule.hysteresis) {
        active_[i] = apply_hysteresis(active_[i], x, rule.hysteresis->on, rule.hysteresis->off);
        if (!active_[i]) target = rule.rest.value_or(prev_[i]);
      }
      double value = rule.max_rate ? apply_rate_limit(prev_[i], target, *rule.max_rate, dt) : target;
      if (rule.unit == Unit::duty) value = quantize_duty(value, prev_[i], rule, dt);
      prev_[i] = value;
      out.push_back(ActuatorCommand{rule.id, value, rule.unit, e.timestamp, e.seq});
    }
    return out;
  }

 private:
  // Round half up into 0..255. A rate-limited channel never rounds past its
  // per-step allowance; it truncates toward the previous value instead.
  static double quantize_duty(double v, double prev, const ChannelRule& rule, double dt) {
    double q = std::clamp(round_half_up(v), 0.0, 255.0);
    if (rule.max_rate && std::abs(q - prev) > *rule.max_rate * dt) {
      q = std::clamp(prev + std::trunc(v - prev), 0.0, 255.0);
    }
    return q;
  }

  MappingConfig config_;
  double first_dt_;
  std::vector<double> prev_;
  std::vector<bool> active_;
  std::optional<double> last_timestamp_;
};

}  // namespace sec
