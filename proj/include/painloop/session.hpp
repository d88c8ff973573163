#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "painloop/actions.hpp"
#include "painloop/agent.hpp"
#include "painloop/error.hpp"
#include "painloop/oracle.hpp"
#include "painloop/signal.hpp"

namespace painloop {

struct SessionConfig {
  Persona persona = Persona::male;
  std::size_t trials_per_persona = 120;
  std::size_t familiarization_trials = 6;
  double palpation_window = 5.0;
  double feedback_window = 3.0;
  bool counterbalance_order = false;
  // Run only the first persona of the order.
  bool single_persona = false;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(palpation_window > 0.0)) throw Error(Errc::config, "palpation_window must be > 0");
    if (!(feedback_window > 0.0)) throw Error(Errc::config, "feedback_window must be > 0");
    if (trials_per_persona < 1) throw Error(Errc::config, "trials_per_persona must be >= 1");
  }

  std::vector<Persona> persona_order() const {
    std::vector<Persona> order{persona, other(persona)};
    if (counterbalance_order) std::swap(order[0], order[1]);
    if (single_persona) order.resize(1);
    return order;
  }

  std::size_t total_trials() const {
    return persona_order().size() * (familiarization_trials + trials_per_persona);
  }
};

enum class TrialPhase { idle, palpating, sound_playing, await_feedback, recorded, void_trial };

inline std::string_view to_string(TrialPhase p) {
  switch (p) {
    case TrialPhase::idle: return "Idle";
    case TrialPhase::palpating: return "Palpating";
    case TrialPhase::sound_playing: return "SoundPlaying";
    case TrialPhase::await_feedback: return "AwaitFeedback";
    case TrialPhase::recorded: return "Recorded";
    case TrialPhase::void_trial: return "Void";
  }
  return "?";
}

// Within a trial: Idle -> Palpating -> (SoundPlaying -> AwaitFeedback -> Recorded | Void).
// Recorded and Void return to Idle when the next trial starts.
inline bool legal_transition(TrialPhase from, TrialPhase to) {
  using P = TrialPhase;
  switch (from) {
    case P::idle: return to == P::palpating;
    case P::palpating: return to == P::sound_playing || to == P::void_trial;
    case P::sound_playing: return to == P::await_feedback;
    case P::await_feedback: return to == P::recorded;
    case P::recorded:
    case P::void_trial: return to == P::idle;
  }
  return false;
}

class PhaseMachine {
 public:
  TrialPhase phase() const { return phase_; }

  void advance(TrialPhase to) {
    if (!legal_transition(phase_, to))
      throw Error(Errc::phase, std::string("illegal transition ") + std::string(to_string(phase_)) + " -> " +
                                   std::string(to_string(to)));
    phase_ = to;
  }

 private:
  TrialPhase phase_ = TrialPhase::idle;
};

inline double reward_from_feedback(Feedback fb) {
  switch (fb) {
    case Feedback::agree: return 1.0;
    case Feedback::disagree: return 0.0;
    case Feedback::timeout: return 0.5;
    case Feedback::void_trial: break;
  }
  throw Error(Errc::no_reward, "void trials carry no reward");
}

struct SoundEvent {
  int track = 1;
  Action action;
  double amplitude = 1.0;
  double pitch = 1.0;
  double pain_intensity = 0.0;
};

// Phase times are seconds on the trial's own sample clock.
struct PhaseTimes {
  double palpating = 0.0;
  std::optional<double> sound_playing;
  std::optional<double> await_feedback;
  double palpation_end = 0.0;

  friend bool operator==(const PhaseTimes&, const PhaseTimes&) = default;
};

struct TrialRecord {
  std::size_t trial_idx = 0;
  Persona persona = Persona::male;
  TrialContext context;
  double peak_force = 0.0;
  std::optional<double> crossing_t;
  std::optional<Action> action;
  std::optional<AgentState> state;
  std::optional<double> log_prob;
  std::optional<double> value_estimate;
  double pain_intensity = 0.0;
  Feedback feedback = Feedback::void_trial;
  std::optional<double> reward;
  PhaseTimes times;
  bool familiarization = false;
  std::uint64_t seed = 0;

  bool learned() const { return !familiarization && reward.has_value(); }

  friend bool operator==(const TrialRecord&, const TrialRecord&) = default;
};

// Supplies force samples for a trial. begin_trial blocks until the participant is
// ready; next_sample returns nullopt once the palpation window has ended.
class TraceSource {
 public:
  virtual ~TraceSource() = default;
  virtual void begin_trial(std::size_t trial_idx, const TrialContext& ctx, double palpation_window) = 0;
  virtual std::optional<ForceSample> next_sample() = 0;
};

// Supplies the participant's verdict. Samples still arriving from the ongoing
// palpation are handed to on_sample while waiting.
class FeedbackSource {
 public:
  virtual ~FeedbackSource() = default;
  virtual Feedback await_feedback(const TrialContext& ctx, const SoundEvent& sound, double feedback_window,
                                  const std::function<void(const ForceSample&)>& on_sample) = 0;
};

struct PersonaSummary {
  Persona persona = Persona::male;
  std::size_t learned_trials = 0;
  std::size_t void_trials = 0;
  std::size_t updates = 0;
  double cumulative_mean_reward = 0.0;
  // Most probable action per force target once the block ends.
  std::map<double, Action> best_action;
};

struct SessionSummary {
  std::vector<PersonaSummary> personas;
  std::size_t trials_done = 0;
};

// Observer for everything a live client needs to render. Defaults ignore events.
class EventSink {
 public:
  virtual ~EventSink() = default;
  virtual void on_phase(TrialPhase, std::size_t /*trial_idx*/, double /*deadline_s*/) {}
  virtual void on_progress(double /*newtons*/, double /*fraction*/) {}
  virtual void on_sound(const SoundEvent&) {}
  virtual void on_result(const TrialRecord&) {}
  virtual void on_stats(double /*cumulative_mean_reward*/, std::size_t /*trials_done*/) {}
  virtual void on_done(const SessionSummary&) {}
};

struct TrialEnv {
  const ActionSpace& space;
  const SessionConfig& session;
  const PainMapConfig& pain;
};

// One interaction cycle. Returns the record; the transition goes to the agent unless
// the trial is familiarization or Void.
inline TrialRecord run_trial(PpoAgent& agent, TraceSource& trace, FeedbackSource& fb, const TrialContext& ctx,
                             std::size_t trial_idx, bool familiarization, const TrialEnv& env,
                             EventSink* events = nullptr) {
  PhaseMachine pm;
  auto enter = [&](TrialPhase p, double deadline) {
    pm.advance(p);
    if (events) events->on_phase(p, trial_idx, deadline);
  };

  TrialRecord rec;
  rec.trial_idx = trial_idx;
  rec.persona = ctx.persona;
  rec.context = ctx;
  rec.familiarization = familiarization;
  rec.seed = env.session.seed;

  if (events) events->on_phase(TrialPhase::idle, trial_idx, 0.0);
  trace.begin_trial(trial_idx, ctx, env.session.palpation_window);
  enter(TrialPhase::palpating, env.session.palpation_window);

  ForceTracker tracker(ctx.target_force, env.pain);
  const double window = env.session.palpation_window;
  double last_progress_t = -1.0;
  bool first = true;
  while (auto s = trace.next_sample()) {
    if (s->t > window) break;
    tracker.push(*s);
    if (first) {
      rec.times.palpating = s->t;
      first = false;
    }
    const bool crossed = tracker.crossing_t().has_value();
    if (events && (crossed || s->t - last_progress_t >= 0.02)) {
      events->on_progress(tracker.filtered(), tracker.filtered() / ctx.target_force);
      last_progress_t = s->t;
    }
    if (crossed) break;
  }

  auto finish_peak = [&] {
    rec.peak_force = tracker.size() ? tracker.peak() : 0.0;
    rec.pain_intensity = pain_intensity(rec.peak_force, env.pain);
    rec.times.palpation_end = tracker.size() ? tracker.last_t() : 0.0;
  };

  if (!tracker.crossing_t()) {
    enter(TrialPhase::void_trial, 0.0);
    rec.feedback = Feedback::void_trial;
    finish_peak();
    return rec;
  }

  rec.crossing_t = tracker.crossing_t();
  const AgentState state = make_state(tracker.peak(), ctx.target_force);
  const Decision d = agent.act(state);
  const Action action = decode(d.action_id);
  SoundEvent sound{ctx.track, action, env.space.amplitude(action), env.space.pitch(action),
                   pain_intensity(tracker.peak(), env.pain)};
  enter(TrialPhase::sound_playing, 0.0);
  rec.times.sound_playing = rec.crossing_t;
  if (events) events->on_sound(sound);
  enter(TrialPhase::await_feedback, env.session.feedback_window);
  rec.times.await_feedback = rec.crossing_t;

  const Feedback answer = fb.await_feedback(ctx, sound, env.session.feedback_window, [&](const ForceSample& s) {
    if (s.t <= window && s.t >= tracker.last_t()) tracker.push(s);
  });
  if (answer == Feedback::void_trial) throw Error(Errc::session_aborted, "feedback source returned void");
  enter(TrialPhase::recorded, 0.0);

  rec.action = action;
  rec.state = state;
  rec.log_prob = d.log_prob;
  rec.value_estimate = d.value;
  rec.feedback = answer;
  rec.reward = reward_from_feedback(answer);
  finish_peak();

  if (!familiarization)
    agent.record(Transition{state, d.action_id, d.log_prob, d.value, *rec.reward, state});
  return rec;
}

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Session-level random streams, all derived from the one session seed.
enum class Stream : std::uint64_t { context = 1, oracle = 2, palpator = 3, agent_base = 16 };

using AgentFactory = std::function<PpoAgent(Persona, std::uint64_t agent_seed)>;

inline AgentFactory default_agent_factory(PpoConfig cfg) {
  return [cfg](Persona, std::uint64_t seed) mutable {
    PpoConfig c = cfg;
    c.seed = seed;
    return PpoAgent(c);
  };
}

struct SessionResult {
  std::vector<TrialRecord> records;
  SessionSummary summary;
};

// Familiarization then trials_per_persona trials for each persona in order, with a
// fresh agent per persona. Records go to on_record as they complete so a crash still
// leaves every finished trial behind.
inline SessionResult run_session(const SessionConfig& cfg, const ActionSpace& space, const PainMapConfig& pain,
                                 const AgentFactory& make_agent, TraceSource& trace, FeedbackSource& fb,
                                 const std::function<void(const TrialRecord&)>& on_record = {},
                                 EventSink* events = nullptr) {
  cfg.validate();
  space.validate();
  pain.validate();
  Rng context_rng(mix_seed(cfg.seed, static_cast<std::uint64_t>(Stream::context)));
  const TrialEnv env{space, cfg, pain};
  SessionResult result;
  std::size_t trial_idx = 0;
  const auto order = cfg.persona_order();
  for (std::size_t block = 0; block < order.size(); ++block) {
    const Persona persona = order[block];
    PpoAgent agent = make_agent(persona, mix_seed(cfg.seed, static_cast<std::uint64_t>(Stream::agent_base) + block));
    PersonaSummary ps;
    ps.persona = persona;
    double reward_sum = 0.0;
    const std::size_t n = cfg.familiarization_trials + cfg.trials_per_persona;
    for (std::size_t k = 0; k < n; ++k) {
      const bool fam = k < cfg.familiarization_trials;
      const TrialContext ctx = sample_context(space, persona, context_rng);
      TrialRecord rec = run_trial(agent, trace, fb, ctx, ++trial_idx, fam, env, events);
      if (rec.learned()) {
        ++ps.learned_trials;
        reward_sum += *rec.reward;
      }
      if (!fam && !rec.reward) ++ps.void_trials;
      ps.cumulative_mean_reward = ps.learned_trials ? reward_sum / static_cast<double>(ps.learned_trials) : 0.0;
      if (on_record) on_record(rec);
      if (events) {
        events->on_result(rec);
        events->on_stats(ps.cumulative_mean_reward, trial_idx);
      }
      result.records.push_back(std::move(rec));
    }
    ps.updates = agent.updates();
    for (double target : space.force_targets)
      ps.best_action[target] = decode(agent.greedy(make_state(target, target)));
    result.summary.personas.push_back(ps);
  }
  result.summary.trials_done = trial_idx;
  if (events) events->on_done(result.summary);
  return result;
}

// In-process participant backed by the palpation and feedback simulators.
class OracleParticipant : public TraceSource, public FeedbackSource {
 public:
  OracleParticipant(OracleConfig oracle, PalpatorConfig palpator, std::uint64_t session_seed,
                    PainMapConfig pain = {})
      : oracle_(std::move(oracle)),
        palpator_(palpator),
        pain_(pain),
        oracle_rng_(mix_seed(session_seed, static_cast<std::uint64_t>(Stream::oracle))),
        palpator_rng_(mix_seed(session_seed, static_cast<std::uint64_t>(Stream::palpator))) {
    oracle_.validate();
    palpator_.validate();
  }

  void begin_trial(std::size_t, const TrialContext& ctx, double) override {
    trace_ = gen_palpation_trace(ctx.target_force, palpator_, palpator_rng_, pain_);
    next_ = 0;
  }

  std::optional<ForceSample> next_sample() override {
    if (next_ >= trace_.samples.size()) return std::nullopt;
    return trace_.samples[next_++];
  }

  Feedback await_feedback(const TrialContext& ctx, const SoundEvent& sound, double,
                          const std::function<void(const ForceSample&)>& on_sample) override {
    // The participant keeps pressing until the window closes while deciding.
    while (next_ < trace_.samples.size()) on_sample(trace_.samples[next_++]);
    return feedback(sound.action, ctx, oracle_, oracle_rng_);
  }

  const PalpationTrace& current_trace() const { return trace_; }

 private:
  OracleConfig oracle_;
  PalpatorConfig palpator_;
  PainMapConfig pain_;
  Rng oracle_rng_;
  Rng palpator_rng_;
  PalpationTrace trace_;
  std::size_t next_ = 0;
};

}  // namespace painloop
