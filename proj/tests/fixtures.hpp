#pragma once

// Shared builders for tests and the acceptance binary.

#include <random>
#include <vector>

#include "painloop/agent.hpp"
#include "painloop/session.hpp"

namespace painloop::fixtures {

// Network with every weight and bias random, output layer included.
inline Mlp random_net(std::vector<std::size_t> sizes, Rng& rng, double scale = 0.5) {
  Mlp net(std::move(sizes));
  std::uniform_real_distribution<double> u(-scale, scale);
  for (auto& p : net.params()) p = u(rng);
  return net;
}

// Batch whose stored log-probs sit close to the current policy, so every ratio is in
// [0.9, 1.1], well inside the default clip band.
inline std::vector<Transition> near_policy_batch(const PolicyParams& policy, std::size_t n, Rng& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_real_distribution<double> jitter(-0.09, 0.09);
  std::uniform_int_distribution<int> action(0, kNumActions - 1);
  std::uniform_int_distribution<int> reward(0, 2);
  std::vector<Transition> batch(n);
  for (auto& t : batch) {
    t.state = {unit(rng), unit(rng)};
    t.action_id = action(rng);
    const auto p = policy_forward(policy, t.state);
    t.log_prob = std::log(p[t.action_id]) - std::log1p(jitter(rng));
    t.reward = reward(rng) * 0.5;
    t.next_state = t.state;
  }
  return batch;
}

// Fully scripted participant: replays fixed traces and feedback.
struct ScriptedTrial {
  std::vector<ForceSample> samples;
  Feedback feedback = Feedback::agree;
};

class ScriptedParticipant : public TraceSource, public FeedbackSource {
 public:
  explicit ScriptedParticipant(std::vector<ScriptedTrial> trials) : trials_(std::move(trials)) {}

  void begin_trial(std::size_t idx, const TrialContext&, double) override {
    cur_ = idx - 1;
    next_ = 0;
  }
  std::optional<ForceSample> next_sample() override {
    const auto& s = trials_.at(cur_).samples;
    if (next_ >= s.size()) return std::nullopt;
    return s[next_++];
  }
  Feedback await_feedback(const TrialContext&, const SoundEvent& sound, double,
                          const std::function<void(const ForceSample&)>& on_sample) override {
    sounds.push_back(sound);
    const auto& s = trials_.at(cur_).samples;
    while (next_ < s.size()) on_sample(s[next_++]);
    return trials_.at(cur_).feedback;
  }

  std::vector<SoundEvent> sounds;

 private:
  std::vector<ScriptedTrial> trials_;
  std::size_t cur_ = 0;
  std::size_t next_ = 0;
};

// Single-cell linear ramp from 0 to `peak` N over `n` samples at 1 kHz.
inline std::vector<ForceSample> ramp(double peak, std::size_t n) {
  std::vector<ForceSample> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    out[i].t = static_cast<double>(i) / 1000.0;
    out[i].f = {peak * static_cast<double>(i) / static_cast<double>(n - 1), 0.0, 0.0, 0.0};
  }
  return out;
}

}  // namespace painloop::fixtures
