#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <numbers>
#include <optional>
#include <random>
#include <string>

#include "painloop/actions.hpp"
#include "painloop/error.hpp"
#include "painloop/signal.hpp"

namespace painloop {

// Simulated participant's answers, keyed on the trial's target force.
struct OracleConfig {
  std::map<double, Action> preference{
      {5.0, {3, 1}}, {10.0, {2, 2}}, {15.0, {1, 0}}, {20.0, {0, 3}}};
  double p_hit = 0.9;
  double p_miss = 0.05;
  double p_timeout = 0.0;
  std::optional<double> neighbor_credit;

  void validate() const {
    auto prob = [](double p, const char* name) {
      if (!(p >= 0.0 && p <= 1.0)) throw Error(Errc::config, std::string(name) + " must be in [0, 1]");
    };
    prob(p_hit, "p_hit");
    prob(p_miss, "p_miss");
    prob(p_timeout, "p_timeout");
    if (neighbor_credit) prob(*neighbor_credit, "neighbor_credit");
    if (!(p_hit > p_miss)) throw Error(Errc::config, "p_hit must exceed p_miss");
    for (const auto& [target, a] : preference)
      if (!valid(a)) throw Error(Errc::config, "preference for " + std::to_string(target) + " N is out of range");
  }
};

// Simulated palpation style. Participants overshoot toward a comfortable force.
struct PalpatorConfig {
  double comfort_mean = 40.0;
  double comfort_sd = 8.0;
  double rise_time = 1.0;
  double noise_sd = 0.3;
  double duration = 5.0;
  double sample_rate = 1000.0;

  void validate() const {
    if (!(comfort_mean > 0.0)) throw Error(Errc::config, "comfort_mean must be > 0");
    if (!(comfort_sd >= 0.0)) throw Error(Errc::config, "comfort_sd must be >= 0");
    if (!(noise_sd >= 0.0)) throw Error(Errc::config, "noise_sd must be >= 0");
    if (!(rise_time > 0.0)) throw Error(Errc::config, "rise_time must be > 0");
    if (!(duration > 2.0 * rise_time + 0.4)) throw Error(Errc::config, "duration too short for rise and release");
    if (!(sample_rate > 0.0)) throw Error(Errc::config, "sample_rate must be > 0");
  }
};

// Noise-free total force at time t for a press that plateaus at `level`.
// Press starts at 0.2 s, rises over rise_time with a raised-cosine ramp, holds, and
// releases over rise_time so that force is back to zero 0.2 s before the window ends.
inline double palpation_profile(double t, double level, const PalpatorConfig& cfg) {
  const double onset = 0.2;
  const double release = cfg.duration - 0.2 - cfg.rise_time;
  auto ramp = [](double x) { return 0.5 - 0.5 * std::cos(std::numbers::pi * std::clamp(x, 0.0, 1.0)); };
  if (t < onset) return 0.0;
  if (t < onset + cfg.rise_time) return level * ramp((t - onset) / cfg.rise_time);
  if (t < release) return level;
  return level * (1.0 - ramp((t - release) / cfg.rise_time));
}

// Share of the total carried by each load cell.
inline constexpr std::array<double, 4> kCellShare{0.31, 0.27, 0.23, 0.19};

inline PalpationTrace gen_palpation_trace(double target, const PalpatorConfig& cfg, Rng& rng,
                                          const PainMapConfig& pm = {}) {
  if (!(target > 0.0)) throw Error(Errc::invalid_force, "target must be > 0");
  cfg.validate();
  std::normal_distribution<double> comfort(cfg.comfort_mean, cfg.comfort_sd);
  const double level = std::max(target, comfort(rng));
  const auto n = static_cast<std::size_t>(std::llround(cfg.duration * cfg.sample_rate));
  std::normal_distribution<double> noise(0.0, cfg.noise_sd);
  for (;;) {
    std::vector<ForceSample> samples(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double t = static_cast<double>(i) / cfg.sample_rate;
      const double f = palpation_profile(t, level, cfg);
      samples[i].t = t;
      for (std::size_t j = 0; j < 4; ++j) {
        const double e = cfg.noise_sd > 0.0 ? noise(rng) / 2.0 : 0.0;
        samples[i].f[j] = f > 0.0 ? std::max(0.0, f * kCellShare[j] + e) : 0.0;
      }
    }
    auto trace = process_trace(std::move(samples), target, pm);
    // Noise can leave a plateau sitting exactly at the target just short of it; redraw.
    if (trace.crossing_t) return trace;
  }
}

inline Feedback feedback(const Action& action, const TrialContext& ctx, const OracleConfig& cfg, Rng& rng) {
  const auto it = cfg.preference.find(ctx.target_force);
  if (it == cfg.preference.end())
    throw Error(Errc::config, "no preference configured for target " + std::to_string(ctx.target_force) + " N");
  std::uniform_real_distribution<double> u(0.0, 1.0);
  // Both draws happen every call so one feedback never shifts the next one's stream.
  const double u_timeout = u(rng);
  const double u_agree = u(rng);
  if (u_timeout < cfg.p_timeout) return Feedback::timeout;
  double p = cfg.p_miss;
  if (action == it->second)
    p = cfg.p_hit;
  else if (cfg.neighbor_credit && adjacent(action, it->second))
    p = *cfg.neighbor_credit;
  return u_agree < p ? Feedback::agree : Feedback::disagree;
}

}  // namespace painloop
