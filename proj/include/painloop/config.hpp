#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "painloop/actions.hpp"
#include "painloop/agent.hpp"
#include "painloop/error.hpp"
#include "painloop/oracle.hpp"
#include "painloop/session.hpp"
#include "painloop/signal.hpp"

namespace painloop {

// Everything one experiment needs. Every field has a default except the seed, which
// simulate insists on.
struct ExperimentConfig {
  SessionConfig session;
  bool seed_given = false;
  PpoConfig ppo;
  ActionSpace space;
  OracleConfig oracle;
  PalpatorConfig palpator;
  PainMapConfig pain;
  // Optional recorded tracks per persona, index 0 is track 1. Empty means synthesized.
  std::map<Persona, std::vector<std::string>> assets;
  std::string log_dir = "logs";

  void validate() const {
    session.validate();
    ppo.validate();
    space.validate();
    oracle.validate();
    palpator.validate();
    pain.validate();
    for (double t : space.force_targets)
      if (!oracle.preference.count(t))
        throw Error(Errc::config, "oracle.preference has no entry for target " + std::to_string(t) + " N");
    for (const auto& [persona, paths] : assets) {
      if (paths.size() != space.tracks.size())
        throw Error(Errc::config, "assets." + std::string(to_string(persona)) + " must list one file per track");
      for (const auto& p : paths)
        if (!std::filesystem::exists(p)) throw Error(Errc::config, "asset file not found: " + p);
    }
  }
};

namespace config_detail {

using json = nlohmann::json;

inline void check_keys(const json& j, const char* section, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw Error(Errc::config, std::string(section) + " must be an object");
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [k, v] : j.items())
    if (!ok.count(k)) throw Error(Errc::config, std::string("unknown key ") + section + "." + k);
}

template <class T>
void read(const json& j, const char* section, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw Error(Errc::config, std::string(section) + "." + key + " has the wrong type");
  }
}

}  // namespace config_detail

inline ExperimentConfig parse_experiment_config(const nlohmann::json& j) {
  using namespace config_detail;
  ExperimentConfig c;
  check_keys(j, "config", {"session", "ppo", "action_space", "oracle", "palpator", "pain_map", "assets", "output"});

  if (j.contains("session")) {
    const auto& s = j["session"];
    check_keys(s, "session",
               {"persona", "trials_per_persona", "familiarization_trials", "palpation_window", "feedback_window",
                "counterbalance_order", "single_persona", "seed"});
    std::string persona = std::string(to_string(c.session.persona));
    read(s, "session", "persona", persona);
    c.session.persona = parse_persona(persona);
    read(s, "session", "trials_per_persona", c.session.trials_per_persona);
    read(s, "session", "familiarization_trials", c.session.familiarization_trials);
    read(s, "session", "palpation_window", c.session.palpation_window);
    read(s, "session", "feedback_window", c.session.feedback_window);
    read(s, "session", "counterbalance_order", c.session.counterbalance_order);
    read(s, "session", "single_persona", c.session.single_persona);
    if (s.contains("seed")) {
      read(s, "session", "seed", c.session.seed);
      c.seed_given = true;
    }
  }
  if (j.contains("ppo")) {
    const auto& p = j["ppo"];
    check_keys(p, "ppo",
               {"clip_eps", "optimizer", "learning_rate", "batch_size", "epochs", "minibatch", "entropy_coef",
                "value_coef", "gamma", "hidden", "init_scale"});
    read(p, "ppo", "clip_eps", c.ppo.clip_eps);
    if (p.contains("optimizer")) {
      std::string o;
      read(p, "ppo", "optimizer", o);
      if (o == "adam") c.ppo.optimizer = OptimizerKind::adam;
      else if (o == "sgd") c.ppo.optimizer = OptimizerKind::sgd;
      else throw Error(Errc::config, "ppo.optimizer must be \"adam\" or \"sgd\"");
    }
    read(p, "ppo", "learning_rate", c.ppo.learning_rate);
    read(p, "ppo", "batch_size", c.ppo.batch_size);
    read(p, "ppo", "epochs", c.ppo.epochs);
    read(p, "ppo", "minibatch", c.ppo.minibatch);
    read(p, "ppo", "entropy_coef", c.ppo.entropy_coef);
    read(p, "ppo", "value_coef", c.ppo.value_coef);
    read(p, "ppo", "gamma", c.ppo.gamma);
    read(p, "ppo", "hidden", c.ppo.hidden);
    read(p, "ppo", "init_scale", c.ppo.init_scale);
  }
  if (j.contains("action_space")) {
    const auto& a = j["action_space"];
    check_keys(a, "action_space", {"amplitude_levels", "pitch_levels", "force_targets", "tracks"});
    read(a, "action_space", "amplitude_levels", c.space.amplitude_levels);
    read(a, "action_space", "pitch_levels", c.space.pitch_levels);
    read(a, "action_space", "force_targets", c.space.force_targets);
    read(a, "action_space", "tracks", c.space.tracks);
  }
  if (j.contains("oracle")) {
    const auto& o = j["oracle"];
    check_keys(o, "oracle", {"preference", "p_hit", "p_miss", "p_timeout", "neighbor_credit"});
    if (o.contains("preference")) {
      const auto& pref = o["preference"];
      if (!pref.is_array()) throw Error(Errc::config, "oracle.preference must be an array");
      c.oracle.preference.clear();
      for (const auto& e : pref) {
        check_keys(e, "oracle.preference[]", {"target_n", "amp_idx", "pitch_idx"});
        double t = 0;
        Action a;
        read(e, "oracle.preference[]", "target_n", t);
        read(e, "oracle.preference[]", "amp_idx", a.amp_idx);
        read(e, "oracle.preference[]", "pitch_idx", a.pitch_idx);
        c.oracle.preference[t] = a;
      }
    }
    read(o, "oracle", "p_hit", c.oracle.p_hit);
    read(o, "oracle", "p_miss", c.oracle.p_miss);
    read(o, "oracle", "p_timeout", c.oracle.p_timeout);
    if (o.contains("neighbor_credit") && !o["neighbor_credit"].is_null()) {
      double v = 0;
      read(o, "oracle", "neighbor_credit", v);
      c.oracle.neighbor_credit = v;
    }
  }
  if (j.contains("palpator")) {
    const auto& p = j["palpator"];
    check_keys(p, "palpator", {"comfort_mean", "comfort_sd", "rise_time", "noise_sd", "duration", "sample_rate"});
    read(p, "palpator", "comfort_mean", c.palpator.comfort_mean);
    read(p, "palpator", "comfort_sd", c.palpator.comfort_sd);
    read(p, "palpator", "rise_time", c.palpator.rise_time);
    read(p, "palpator", "noise_sd", c.palpator.noise_sd);
    read(p, "palpator", "duration", c.palpator.duration);
    read(p, "palpator", "sample_rate", c.palpator.sample_rate);
  }
  if (j.contains("pain_map")) {
    const auto& p = j["pain_map"];
    check_keys(p, "pain_map", {"beta", "pi_max", "gate", "window", "sample_rate"});
    read(p, "pain_map", "beta", c.pain.beta);
    read(p, "pain_map", "pi_max", c.pain.pi_max);
    read(p, "pain_map", "gate", c.pain.gate);
    read(p, "pain_map", "window", c.pain.window);
    read(p, "pain_map", "sample_rate", c.pain.sample_rate);
  }
  if (j.contains("assets")) {
    const auto& a = j["assets"];
    check_keys(a, "assets", {"male", "female"});
    for (const char* who : {"male", "female"}) {
      if (!a.contains(who)) continue;
      std::vector<std::string> paths;
      read(a, "assets", who, paths);
      c.assets[parse_persona(who)] = paths;
    }
  }
  if (j.contains("output")) {
    const auto& o = j["output"];
    check_keys(o, "output", {"log_dir"});
    read(o, "output", "log_dir", c.log_dir);
  }
  return c;
}

inline ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw Error(Errc::config, "cannot open config file " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(is);
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::config, path + ": " + e.what());
  }
  return parse_experiment_config(j);
}

// Full snapshot written into log headers.
inline nlohmann::ordered_json to_json(const ExperimentConfig& c) {
  nlohmann::ordered_json pref = nlohmann::ordered_json::array();
  for (const auto& [t, a] : c.oracle.preference)
    pref.push_back({{"target_n", t}, {"amp_idx", a.amp_idx}, {"pitch_idx", a.pitch_idx}});
  nlohmann::ordered_json assets = nlohmann::ordered_json::object();
  for (const auto& [p, paths] : c.assets) assets[std::string(to_string(p))] = paths;
  return {
      {"session",
       {{"persona", std::string(to_string(c.session.persona))},
        {"trials_per_persona", c.session.trials_per_persona},
        {"familiarization_trials", c.session.familiarization_trials},
        {"palpation_window", c.session.palpation_window},
        {"feedback_window", c.session.feedback_window},
        {"counterbalance_order", c.session.counterbalance_order},
        {"single_persona", c.session.single_persona},
        {"seed", c.session.seed}}},
      {"ppo",
       {{"clip_eps", c.ppo.clip_eps},
        {"optimizer", c.ppo.optimizer == OptimizerKind::adam ? "adam" : "sgd"},
        {"learning_rate", c.ppo.learning_rate},
        {"batch_size", c.ppo.batch_size},
        {"epochs", c.ppo.epochs},
        {"minibatch", c.ppo.minibatch},
        {"entropy_coef", c.ppo.entropy_coef},
        {"value_coef", c.ppo.value_coef},
        {"gamma", c.ppo.gamma},
        {"hidden", c.ppo.hidden},
        {"init_scale", c.ppo.init_scale}}},
      {"action_space",
       {{"amplitude_levels", c.space.amplitude_levels},
        {"pitch_levels", c.space.pitch_levels},
        {"force_targets", c.space.force_targets},
        {"tracks", c.space.tracks}}},
      {"oracle",
       {{"preference", pref},
        {"p_hit", c.oracle.p_hit},
        {"p_miss", c.oracle.p_miss},
        {"p_timeout", c.oracle.p_timeout},
        {"neighbor_credit", c.oracle.neighbor_credit ? nlohmann::ordered_json(*c.oracle.neighbor_credit)
                                                     : nlohmann::ordered_json(nullptr)}}},
      {"palpator",
       {{"comfort_mean", c.palpator.comfort_mean},
        {"comfort_sd", c.palpator.comfort_sd},
        {"rise_time", c.palpator.rise_time},
        {"noise_sd", c.palpator.noise_sd},
        {"duration", c.palpator.duration},
        {"sample_rate", c.palpator.sample_rate}}},
      {"pain_map",
       {{"beta", c.pain.beta},
        {"pi_max", c.pain.pi_max},
        {"gate", c.pain.gate},
        {"window", c.pain.window},
        {"sample_rate", c.pain.sample_rate}}},
      {"assets", assets},
      {"output", {{"log_dir", c.log_dir}}},
  };
}

}  // namespace painloop
