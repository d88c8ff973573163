#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "painloop/error.hpp"

namespace painloop {

using Rng = std::mt19937_64;

enum class Persona { male, female };

inline std::string_view to_string(Persona p) { return p == Persona::male ? "male" : "female"; }

inline Persona parse_persona(std::string_view s) {
  if (s == "male") return Persona::male;
  if (s == "female") return Persona::female;
  throw Error(Errc::config, "persona must be \"male\" or \"female\", got \"" + std::string(s) + "\"");
}

inline Persona other(Persona p) { return p == Persona::male ? Persona::female : Persona::male; }

inline constexpr int kLevels = 4;
inline constexpr int kNumActions = kLevels * kLevels;

struct Action {
  int amp_idx = 0;
  int pitch_idx = 0;

  friend bool operator==(const Action&, const Action&) = default;
};

inline bool valid(const Action& a) {
  return a.amp_idx >= 0 && a.amp_idx < kLevels && a.pitch_idx >= 0 && a.pitch_idx < kLevels;
}

inline int encode(const Action& a) {
  if (!valid(a)) throw Error(Errc::invalid_action, "action index out of range");
  return kLevels * a.amp_idx + a.pitch_idx;
}

inline Action decode(int id) {
  if (id < 0 || id >= kNumActions)
    throw Error(Errc::invalid_action, "action id " + std::to_string(id) + " not in [0, 15]");
  return Action{id / kLevels, id % kLevels};
}

// Grid-adjacent: differ by one step on exactly one axis.
inline bool adjacent(const Action& a, const Action& b) {
  const int da = std::abs(a.amp_idx - b.amp_idx);
  const int dp = std::abs(a.pitch_idx - b.pitch_idx);
  return da + dp == 1;
}

struct ActionSpace {
  std::vector<double> amplitude_levels{1.0, 0.3, 0.1, 0.037};
  std::vector<double> pitch_levels{0.7, 0.9, 1.1, 1.3};
  std::vector<double> force_targets{5.0, 10.0, 15.0, 20.0};
  std::vector<int> tracks{1, 2, 3};

  double amplitude(const Action& a) const { return amplitude_levels.at(a.amp_idx); }
  double pitch(const Action& a) const { return pitch_levels.at(a.pitch_idx); }

  // Row of target in force_targets, or -1.
  int target_index(double target) const {
    for (std::size_t i = 0; i < force_targets.size(); ++i)
      if (force_targets[i] == target) return static_cast<int>(i);
    return -1;
  }

  double max_target() const {
    return *std::max_element(force_targets.begin(), force_targets.end());
  }

  void validate() const {
    if (amplitude_levels.size() != kLevels || pitch_levels.size() != kLevels)
      throw Error(Errc::config, "amplitude_levels and pitch_levels must have 4 entries");
    if (force_targets.empty() || tracks.empty())
      throw Error(Errc::config, "force_targets and tracks must be non-empty");
    for (std::size_t i = 1; i < kLevels; ++i) {
      if (!(amplitude_levels[i] < amplitude_levels[i - 1]))
        throw Error(Errc::config, "amplitude_levels must be strictly decreasing");
      if (!(pitch_levels[i] > pitch_levels[i - 1]))
        throw Error(Errc::config, "pitch_levels must be strictly increasing");
    }
    for (double a : amplitude_levels)
      if (!(a >= 0.0)) throw Error(Errc::config, "amplitude_levels must be >= 0");
    for (double p : pitch_levels)
      if (!(p > 0.0)) throw Error(Errc::config, "pitch_levels must be > 0");
    for (double f : force_targets)
      if (!(f > 0.0)) throw Error(Errc::config, "force_targets must be > 0");
  }
};

struct TrialContext {
  int track = 1;
  double target_force = 5.0;
  Persona persona = Persona::male;

  friend bool operator==(const TrialContext&, const TrialContext&) = default;
};

enum class Feedback { agree, disagree, timeout, void_trial };

inline std::string_view to_string(Feedback f) {
  switch (f) {
    case Feedback::agree: return "agree";
    case Feedback::disagree: return "disagree";
    case Feedback::timeout: return "timeout";
    case Feedback::void_trial: return "void";
  }
  return "?";
}

inline Feedback parse_feedback(std::string_view s) {
  if (s == "agree") return Feedback::agree;
  if (s == "disagree") return Feedback::disagree;
  if (s == "timeout") return Feedback::timeout;
  if (s == "void") return Feedback::void_trial;
  throw Error(Errc::format, "unknown feedback \"" + std::string(s) + "\"");
}

// Track first, then target, each uniform over its table.
inline TrialContext sample_context(const ActionSpace& space, Persona persona, Rng& rng) {
  std::uniform_int_distribution<std::size_t> pick_track(0, space.tracks.size() - 1);
  std::uniform_int_distribution<std::size_t> pick_target(0, space.force_targets.size() - 1);
  TrialContext ctx;
  ctx.track = space.tracks[pick_track(rng)];
  ctx.target_force = space.force_targets[pick_target(rng)];
  ctx.persona = persona;
  return ctx;
}

}  // namespace painloop
