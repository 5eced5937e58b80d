#pragma once

// Trajectory shaping: EMA smoothing, quadrant labels and debounced label
// changes.

#include <array>
#include <cmath>
#include <optional>
#include <string_view>

#include "sec/estimator.hpp"

namespace sec {

enum class EmotionLabel { happy, angry, sad, calm, neutral };

inline constexpr std::array<EmotionLabel, 5> kAllLabels = {
    EmotionLabel::happy, EmotionLabel::angry, EmotionLabel::sad, EmotionLabel::calm,
    EmotionLabel::neutral};

inline std::string_view to_string(EmotionLabel l) {
  switch (l) {
    case EmotionLabel::happy: return "happy";
    case EmotionLabel::angry: return "angry";
    case EmotionLabel::sad: return "sad";
    case EmotionLabel::calm: return "calm";
    case EmotionLabel::neutral: return "neutral";
  }
  return "neutral";
}

inline std::optional<EmotionLabel> parse_label(std::string_view s) {
  for (auto l : kAllLabels) {
    if (to_string(l) == s) return l;
  }
  return std::nullopt;
}

struct AffectParams {
  double alpha = 0.4;
  double neutral_band = 0.1;
  int hold_count = 2;
};

/// Exponential moving average over all three dimensions. The first input
/// passes through unchanged.
class EmaSmoother {
 public:
  explicit EmaSmoother(double alpha) : alpha_(alpha) {
    if (!(alpha > 0.0 && alpha <= 1.0)) throw std::invalid_argument("alpha must be in (0, 1]");
  }

  EmotionEstimate smooth(const EmotionEstimate& input) {
    if (!current_) {
      current_ = input;
      return input;
    }
    EmotionEstimate out = input;
    out.valence = blend(input.valence, current_->valence);
    out.arousal = blend(input.arousal, current_->arousal);
    out.dominance = blend(input.dominance, current_->dominance);
    current_ = out;
    return out;
  }

  const std::optional<EmotionEstimate>& current() const { return current_; }
  double alpha() const { return alpha_; }

 private:
  double blend(double x, double prev) const { return alpha_ * x + (1.0 - alpha_) * prev; }

  double alpha_;
  std::optional<EmotionEstimate> current_;
};

/// Quadrant labeling around the (0.5, 0.5) midpoint. Ties at 0.5 fall to the
/// lower quadrant. Dominance is ignored.
inline EmotionLabel classify(const EmotionEstimate& e, double neutral_band) {
  if (std::abs(e.valence - 0.5) <= neutral_band && std::abs(e.arousal - 0.5) <= neutral_band) {
    return EmotionLabel::neutral;
  }
  const bool pos_v = e.valence > 0.5;
  const bool high_a = e.arousal > 0.5;
  if (high_a) return pos_v ? EmotionLabel::happy : EmotionLabel::angry;
  return pos_v ? EmotionLabel::calm : EmotionLabel::sad;
}

/// Emits a label change once a new label has been seen `hold_count` times in
/// a row. The very first observation establishes the stable label and is
/// reported as an event.
class ChangeDetector {
 public:
  explicit ChangeDetector(int hold_count) : hold_(hold_count) {
    if (hold_count < 1) throw std::invalid_argument("hold_count must be >= 1");
  }

  std::optional<EmotionLabel> observe(EmotionLabel label) {
    if (!stable_) {
      stable_ = label;
      return label;
    }
    if (label == *stable_) {
      candidate_.reset();
      streak_ = 0;
      return std::nullopt;
    }
    if (candidate_ == label) {
      ++streak_;
    } else {
      candidate_ = label;
      streak_ = 1;
    }
    if (streak_ >= hold_) {
      stable_ = label;
      candidate_.reset();
      streak_ = 0;
      return label;
    }
    return std::nullopt;
  }

  std::optional<EmotionLabel> stable() const { return stable_; }

 private:
  int hold_;
  std::optional<EmotionLabel> stable_;
  std::optional<EmotionLabel> candidate_;
  int streak_ = 0;
};

/// Stateless form: given the held label and a run of new observations, the
/// index at which a change fires (if any).
template <typename Range>
std::optional<std::size_t> detect_change(EmotionLabel prev_label, const Range& observed,
                                         int hold_count) {
  ChangeDetector d(hold_count);
  d.observe(prev_label);
  std::size_t i = 0;
  for (EmotionLabel l : observed) {
    if (d.observe(l)) return i;
    ++i;
  }
  return std::nullopt;
}

struct AffectFrame {
  EmotionEstimate smoothed;
  EmotionLabel raw_label = EmotionLabel::neutral;
  EmotionLabel label = EmotionLabel::neutral;  // debounced
  bool changed = false;
};

/// Smoother, classifier and debouncer wired together as one stage.
class AffectStream {
 public:
  explicit AffectStream(const AffectParams& p = {})
      : params_(p), smoother_(p.alpha), detector_(p.hold_count) {
    if (!(p.neutral_band >= 0.0 && p.neutral_band < 0.5)) {
      throw std::invalid_argument("neutral_band must be in [0, 0.5)");
    }
  }

  AffectFrame push(const EmotionEstimate& e) {
    AffectFrame f;
    f.smoothed = smoother_.smooth(e);
    f.raw_label = classify(f.smoothed, params_.neutral_band);
    f.changed = detector_.observe(f.raw_label).has_value();
    f.label = *detector_.stable();
    return f;
  }

 private:
  AffectParams params_;
  EmaSmoother smoother_;
  ChangeDetector detector_;
};

}  // namespace sec
