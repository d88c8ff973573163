#pragma once

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"
#include "painloop/actions.hpp"
#include "painloop/error.hpp"
#include "painloop/session.hpp"

namespace painloop {

using ordered_json = nlohmann::ordered_json;

inline constexpr int kLogSchemaVersion = 1;

// ---------------------------------------------------------------------------
// JSONL trial log

namespace detail {

template <class T>
ordered_json opt(const std::optional<T>& v) {
  return v ? ordered_json(*v) : ordered_json(nullptr);
}

inline double num(const ordered_json& j, const char* key) {
  const auto& v = j.at(key);
  if (!v.is_number()) throw Error(Errc::format, std::string("field ") + key + " is not a number");
  return v.get<double>();
}

inline std::optional<double> opt_num(const ordered_json& j, const char* key) {
  const auto& v = j.at(key);
  if (v.is_null()) return std::nullopt;
  if (!v.is_number()) throw Error(Errc::format, std::string("field ") + key + " is not a number");
  return v.get<double>();
}

}  // namespace detail

inline ordered_json to_json(const TrialRecord& r) {
  ordered_json j;
  j["type"] = "trial";
  j["trial_idx"] = r.trial_idx;
  j["persona"] = std::string(to_string(r.persona));
  j["track"] = r.context.track;
  j["target_n"] = r.context.target_force;
  j["familiarization"] = r.familiarization;
  j["peak_n"] = r.peak_force;
  j["crossing_s"] = detail::opt(r.crossing_t);
  if (r.action)
    j["action"] = ordered_json{{"amp_idx", r.action->amp_idx}, {"pitch_idx", r.action->pitch_idx}};
  else
    j["action"] = nullptr;
  if (r.state)
    j["state"] = ordered_json{{"norm_force", r.state->norm_force}, {"norm_target", r.state->norm_target}};
  else
    j["state"] = nullptr;
  j["log_prob"] = detail::opt(r.log_prob);
  j["value_estimate"] = detail::opt(r.value_estimate);
  j["pain_intensity"] = r.pain_intensity;
  j["feedback"] = std::string(to_string(r.feedback));
  j["reward"] = detail::opt(r.reward);
  j["times"] = ordered_json{{"palpating", r.times.palpating},
                            {"sound_playing", detail::opt(r.times.sound_playing)},
                            {"await_feedback", detail::opt(r.times.await_feedback)},
                            {"palpation_end", r.times.palpation_end}};
  j["seed"] = r.seed;
  return j;
}

inline TrialRecord record_from_json(const ordered_json& j) {
  if (!j.is_object()) throw Error(Errc::format, "record is not a JSON object");
  if (j.value("type", "") != "trial") throw Error(Errc::format, "record type is not \"trial\"");
  TrialRecord r;
  r.trial_idx = j.at("trial_idx").get<std::size_t>();
  r.persona = parse_persona(j.at("persona").get<std::string>());
  r.context.persona = r.persona;
  r.context.track = j.at("track").get<int>();
  r.context.target_force = detail::num(j, "target_n");
  r.familiarization = j.at("familiarization").get<bool>();
  r.peak_force = detail::num(j, "peak_n");
  r.crossing_t = detail::opt_num(j, "crossing_s");
  if (const auto& a = j.at("action"); !a.is_null()) {
    r.action = Action{a.at("amp_idx").get<int>(), a.at("pitch_idx").get<int>()};
    if (!valid(*r.action)) throw Error(Errc::format, "action out of range");
  }
  if (const auto& s = j.at("state"); !s.is_null())
    r.state = AgentState{detail::num(s, "norm_force"), detail::num(s, "norm_target")};
  r.log_prob = detail::opt_num(j, "log_prob");
  r.value_estimate = detail::opt_num(j, "value_estimate");
  r.pain_intensity = detail::num(j, "pain_intensity");
  r.feedback = parse_feedback(j.at("feedback").get<std::string>());
  r.reward = detail::opt_num(j, "reward");
  const auto& t = j.at("times");
  r.times.palpating = detail::num(t, "palpating");
  r.times.sound_playing = detail::opt_num(t, "sound_playing");
  r.times.await_feedback = detail::opt_num(t, "await_feedback");
  r.times.palpation_end = detail::num(t, "palpation_end");
  r.seed = j.at("seed").get<std::uint64_t>();
  if (r.reward.has_value() == (r.feedback == Feedback::void_trial))
    throw Error(Errc::format, "reward must be present exactly when the trial is not void");
  return r;
}

struct TrialLog {
  ordered_json header;
  std::vector<TrialRecord> records;
};

inline ordered_json make_header(const ordered_json& config, std::uint64_t seed) {
  return ordered_json{{"type", "header"}, {"schema_version", kLogSchemaVersion}, {"seed", seed}, {"config", config}};
}

inline std::string to_line(const TrialRecord& r) { return to_json(r).dump(); }

// Append-only writer; every record is flushed as soon as it is written.
class LogWriter {
 public:
  LogWriter(std::ostream& os, const ordered_json& header) : os_(os) {
    os_ << header.dump() << '\n';
    os_.flush();
  }

  void append(const TrialRecord& r) {
    if (last_idx_ && r.trial_idx <= *last_idx_) throw Error(Errc::corrupt_log, "trial_idx must increase");
    os_ << to_line(r) << '\n';
    os_.flush();
    last_idx_ = r.trial_idx;
  }

 private:
  std::ostream& os_;
  std::optional<std::size_t> last_idx_;
};

inline void log_write(std::ostream& os, const ordered_json& header, const std::vector<TrialRecord>& records) {
  LogWriter w(os, header);
  for (const auto& r : records) w.append(r);
}

struct PartialLog {
  TrialLog log;
  std::optional<LogError> error;
};

// Reads until the first bad line. Everything before it is returned along with the error.
inline PartialLog log_read_partial(std::istream& is) {
  PartialLog out;
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty() && is.peek() == std::char_traits<char>::eof()) break;
    ordered_json j;
    try {
      j = ordered_json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      out.error = LogError(Errc::corrupt_log, line_no, std::string("unparseable JSON: ") + e.what());
      return out;
    }
    if (!have_header) {
      if (!j.is_object() || j.value("type", "") != "header") {
        out.error = LogError(Errc::corrupt_log, line_no, "first line is not a header");
        return out;
      }
      const int version = j.value("schema_version", -1);
      if (version != kLogSchemaVersion) {
        out.error = LogError(Errc::migration, line_no,
                             "schema_version " + std::to_string(version) + " is not supported (expected " +
                                 std::to_string(kLogSchemaVersion) + ")");
        return out;
      }
      out.log.header = std::move(j);
      have_header = true;
      continue;
    }
    try {
      TrialRecord r = record_from_json(j);
      if (!out.log.records.empty() && r.trial_idx <= out.log.records.back().trial_idx)
        throw Error(Errc::corrupt_log, "trial_idx does not increase");
      out.log.records.push_back(std::move(r));
    } catch (const std::exception& e) {
      out.error = LogError(Errc::corrupt_log, line_no, e.what());
      return out;
    }
  }
  if (!have_header) out.error = LogError(Errc::corrupt_log, line_no + 1, "missing header line");
  return out;
}

inline TrialLog log_read(std::istream& is) {
  auto partial = log_read_partial(is);
  if (partial.error) throw *partial.error;
  return std::move(partial.log);
}

// ---------------------------------------------------------------------------
// Analyses

inline std::vector<TrialRecord> learned_only(const std::vector<TrialRecord>& records) {
  std::vector<TrialRecord> out;
  for (const auto& r : records)
    if (r.learned()) out.push_back(r);
  return out;
}

inline std::vector<TrialRecord> for_persona(const std::vector<TrialRecord>& records, Persona p) {
  std::vector<TrialRecord> out;
  for (const auto& r : records)
    if (r.persona == p) out.push_back(r);
  return out;
}

// Running mean reward over learned, non-void trials.
inline std::vector<double> cumulative_curve(const std::vector<TrialRecord>& records) {
  std::vector<double> out;
  double sum = 0.0;
  for (const auto& r : records) {
    if (!r.learned()) continue;
    sum += *r.reward;
    out.push_back(sum / static_cast<double>(out.size() + 1));
  }
  if (out.empty()) throw Error(Errc::empty_input, "no learned trials to build a curve from");
  return out;
}

inline std::vector<double> cumulative_curve(const std::vector<double>& rewards) {
  if (rewards.empty()) throw Error(Errc::empty_input, "no rewards to build a curve from");
  std::vector<double> out;
  double sum = 0.0;
  for (double r : rewards) {
    sum += r;
    out.push_back(sum / static_cast<double>(out.size() + 1));
  }
  return out;
}

enum class Dimension { amplitude, pitch };

inline std::string_view to_string(Dimension d) { return d == Dimension::amplitude ? "amplitude" : "pitch"; }

struct FrequencyTable {
  Dimension dimension = Dimension::amplitude;
  std::vector<double> targets;
  std::vector<std::array<std::size_t, kLevels>> counts;

  std::size_t total() const {
    std::size_t n = 0;
    for (const auto& row : counts)
      for (auto c : row) n += c;
    return n;
  }
};

// Counts over learned trials, rows in force_targets order.
inline FrequencyTable frequency_table(const std::vector<TrialRecord>& records, Dimension dim,
                                      const ActionSpace& space = {}, bool agree_only = false) {
  FrequencyTable t;
  t.dimension = dim;
  t.targets = space.force_targets;
  t.counts.assign(t.targets.size(), {});
  for (const auto& r : records) {
    if (!r.learned() || !r.action) continue;
    if (agree_only && r.feedback != Feedback::agree) continue;
    const int row = space.target_index(r.context.target_force);
    if (row < 0) continue;
    const int level = dim == Dimension::amplitude ? r.action->amp_idx : r.action->pitch_idx;
    ++t.counts[row][level];
  }
  return t;
}

// Argmax level per row, ties toward the lower index. Empty rows give -1.
inline std::vector<int> mode_per_force(const FrequencyTable& t) {
  std::vector<int> modes;
  for (const auto& row : t.counts) {
    int best = -1;
    std::size_t best_count = 0;
    for (int k = 0; k < kLevels; ++k)
      if (row[k] > best_count) {
        best = k;
        best_count = row[k];
      }
    modes.push_back(best);
  }
  return modes;
}

struct Quartiles {
  double min = 0, q1 = 0, median = 0, q3 = 0, max = 0;
};

// Linear interpolation between order statistics at position q * (n - 1).
inline double quantile(std::vector<double> sorted, double q) {
  if (sorted.empty()) throw Error(Errc::empty_input, "quantile of empty sample");
  std::sort(sorted.begin(), sorted.end());
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

inline Quartiles quartiles(std::vector<double> xs) {
  if (xs.empty()) throw Error(Errc::empty_input, "quartiles of empty sample");
  std::sort(xs.begin(), xs.end());
  return Quartiles{xs.front(), quantile(xs, 0.25), quantile(xs, 0.5), quantile(xs, 0.75), xs.back()};
}

// Final ceil(fraction * n) learned trials, in order.
inline std::vector<TrialRecord> last_fraction_of(const std::vector<TrialRecord>& records, double fraction) {
  if (!(fraction > 0.0 && fraction <= 1.0)) throw Error(Errc::config, "last_fraction must be in (0, 1]");
  auto learned = learned_only(records);
  const double want = fraction * static_cast<double>(learned.size());
  // Guards 0.2 * 120 = 24.000000000000004 from rounding up to 25.
  const auto k = std::min(learned.size(), static_cast<std::size_t>(std::ceil(want - 1e-9)));
  return std::vector<TrialRecord>(learned.end() - static_cast<std::ptrdiff_t>(k), learned.end());
}

struct ForceRow {
  double target = 0.0;
  std::size_t count = 0;
  Quartiles stats;
};

inline std::vector<ForceRow> force_stats(const std::vector<TrialRecord>& records,
                                         std::optional<double> last_fraction = std::nullopt,
                                         const ActionSpace& space = {}) {
  const auto pool = last_fraction ? last_fraction_of(records, *last_fraction) : learned_only(records);
  std::vector<ForceRow> rows;
  for (double target : space.force_targets) {
    std::vector<double> peaks;
    for (const auto& r : pool)
      if (r.context.target_force == target) peaks.push_back(r.peak_force);
    if (peaks.empty()) continue;
    rows.push_back(ForceRow{target, peaks.size(), quartiles(peaks)});
  }
  return rows;
}

inline ordered_json summary_to_json(const SessionSummary& s) {
  ordered_json personas = ordered_json::array();
  for (const auto& p : s.personas) {
    ordered_json best = ordered_json::array();
    for (const auto& [t, a] : p.best_action)
      best.push_back({{"target_n", t}, {"amp_idx", a.amp_idx}, {"pitch_idx", a.pitch_idx}});
    personas.push_back({{"persona", std::string(to_string(p.persona))},
                        {"learned_trials", p.learned_trials},
                        {"void_trials", p.void_trials},
                        {"updates", p.updates},
                        {"cumulative_mean_reward", p.cumulative_mean_reward},
                        {"best_action", best}});
  }
  return {{"trials_done", s.trials_done}, {"personas", personas}};
}

// ---------------------------------------------------------------------------
// CSV

inline std::string fmt_num(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

inline std::vector<Persona> personas_in(const std::vector<TrialRecord>& records) {
  std::vector<Persona> out;
  for (const auto& r : records)
    if (std::find(out.begin(), out.end(), r.persona) == out.end()) out.push_back(r.persona);
  return out;
}

inline void csv_trials(std::ostream& os, const std::vector<TrialRecord>& records) {
  os << "trial_idx,persona,target_n,peak_n,amp_idx,pitch_idx,track,feedback,reward\n";
  for (const auto& r : records) {
    os << r.trial_idx << ',' << to_string(r.persona) << ',' << fmt_num(r.context.target_force) << ','
       << fmt_num(r.peak_force) << ',';
    if (r.action)
      os << r.action->amp_idx << ',' << r.action->pitch_idx;
    else
      os << ',';
    os << ',' << r.context.track << ',' << to_string(r.feedback) << ',';
    if (r.reward) os << fmt_num(*r.reward);
    os << '\n';
  }
}

inline void csv_curve(std::ostream& os, const std::vector<TrialRecord>& records) {
  os << "persona,learned_trial,trial_idx,reward,cumulative_mean_reward\n";
  for (Persona p : personas_in(records)) {
    const auto learned = learned_only(for_persona(records, p));
    if (learned.empty()) continue;
    const auto curve = cumulative_curve(learned);
    for (std::size_t i = 0; i < learned.size(); ++i)
      os << to_string(p) << ',' << i + 1 << ',' << learned[i].trial_idx << ',' << fmt_num(*learned[i].reward)
         << ',' << fmt_num(curve[i]) << '\n';
  }
}

inline void csv_frequency(std::ostream& os, const std::vector<TrialRecord>& records, const ActionSpace& space,
                          bool agree_only) {
  os << "persona,dimension,target_n,level_idx,level,count\n";
  for (Persona p : personas_in(records)) {
    const auto sub = for_persona(records, p);
    for (Dimension d : {Dimension::amplitude, Dimension::pitch}) {
      const auto t = frequency_table(sub, d, space, agree_only);
      const auto& levels = d == Dimension::amplitude ? space.amplitude_levels : space.pitch_levels;
      for (std::size_t row = 0; row < t.targets.size(); ++row)
        for (int k = 0; k < kLevels; ++k)
          os << to_string(p) << ',' << to_string(d) << ',' << fmt_num(t.targets[row]) << ',' << k << ','
             << fmt_num(levels[k]) << ',' << t.counts[row][k] << '\n';
    }
  }
}

inline void csv_modes(std::ostream& os, const std::vector<TrialRecord>& records, const ActionSpace& space,
                      bool agree_only) {
  os << "persona,dimension,target_n,mode_idx,mode_level\n";
  for (Persona p : personas_in(records)) {
    const auto sub = for_persona(records, p);
    for (Dimension d : {Dimension::amplitude, Dimension::pitch}) {
      const auto t = frequency_table(sub, d, space, agree_only);
      const auto modes = mode_per_force(t);
      const auto& levels = d == Dimension::amplitude ? space.amplitude_levels : space.pitch_levels;
      for (std::size_t row = 0; row < t.targets.size(); ++row) {
        os << to_string(p) << ',' << to_string(d) << ',' << fmt_num(t.targets[row]) << ',';
        if (modes[row] >= 0) os << modes[row] << ',' << fmt_num(levels[modes[row]]);
        else os << ',';
        os << '\n';
      }
    }
  }
}

inline void csv_force(std::ostream& os, const std::vector<TrialRecord>& records, const ActionSpace& space,
                      std::optional<double> last_fraction) {
  os << "persona,target_n,count,min,q1,median,q3,max\n";
  for (Persona p : personas_in(records)) {
    for (const auto& row : force_stats(for_persona(records, p), last_fraction, space))
      os << to_string(p) << ',' << fmt_num(row.target) << ',' << row.count << ',' << fmt_num(row.stats.min) << ','
         << fmt_num(row.stats.q1) << ',' << fmt_num(row.stats.median) << ',' << fmt_num(row.stats.q3) << ','
         << fmt_num(row.stats.max) << '\n';
  }
}

}  // namespace painloop
