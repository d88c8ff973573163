#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "painloop/error.hpp"

namespace painloop {

// One reading of the four load cells. t is seconds since trial start.
struct ForceSample {
  double t = 0.0;
  std::array<double, 4> f{};
};

struct PainMapConfig {
  double beta = 5.0;
  double pi_max = 100.0;
  double gate = 0.5;
  std::size_t window = 20;
  double sample_rate = 1000.0;

  void validate() const {
    if (!(beta > 0.0)) throw Error(Errc::config, "beta must be > 0");
    if (window < 1) throw Error(Errc::config, "window must be >= 1");
    if (!(gate >= 0.0)) throw Error(Errc::config, "gate must be >= 0");
    if (!(sample_rate > 0.0)) throw Error(Errc::config, "sample_rate must be > 0");
  }
};

// Total force over the four cells, zeroed when below the noise gate.
inline double fuse_and_gate(const ForceSample& sample, const PainMapConfig& cfg) {
  double sum = 0.0;
  for (std::size_t j = 0; j < sample.f.size(); ++j) {
    if (!std::isfinite(sample.f[j]))
      throw Error(Errc::invalid_sample, "channel " + std::to_string(j) + " is not finite");
    sum += sample.f[j];
  }
  return sum >= cfg.gate ? sum : 0.0;
}

// Trailing moving average. The first window-1 outputs average over the samples seen so far.
inline std::vector<double> moving_average(std::span<const double> series, std::size_t window) {
  if (series.empty()) throw Error(Errc::empty_input, "moving_average on empty series");
  if (window < 1) throw Error(Errc::config, "moving_average window must be >= 1");
  std::vector<double> out(series.size());
  // Running sum drifts; re-summing each window keeps the result exact for exact inputs.
  for (std::size_t i = 0; i < series.size(); ++i) {
    const std::size_t lo = i + 1 >= window ? i + 1 - window : 0;
    double acc = 0.0;
    for (std::size_t k = lo; k <= i; ++k) acc += series[k];
    out[i] = acc / static_cast<double>(i - lo + 1);
  }
  return out;
}

inline double pain_intensity(double f_filtered, const PainMapConfig& cfg) {
  if (!(f_filtered >= 0.0)) throw Error(Errc::invalid_force, "force must be >= 0 and finite");
  return std::min(cfg.beta * f_filtered, cfg.pi_max);
}

// Index of the first filtered value reaching target, if any.
inline std::optional<std::size_t> first_crossing(std::span<const double> filtered, double target) {
  for (std::size_t i = 0; i < filtered.size(); ++i)
    if (filtered[i] >= target) return i;
  return std::nullopt;
}

// Crossing time assuming a uniform sample clock at `rate`.
inline std::optional<double> detect_crossing(std::span<const double> filtered, double target,
                                             double rate) {
  if (!(target > 0.0)) throw Error(Errc::invalid_force, "target must be > 0");
  if (auto i = first_crossing(filtered, target)) return static_cast<double>(*i) / rate;
  return std::nullopt;
}

struct PalpationTrace {
  std::vector<ForceSample> samples;
  std::vector<double> fused;
  std::vector<double> filtered;
  double peak = 0.0;
  std::optional<double> crossing_t;
};

// Runs gate, filter, peak and crossing over a whole trace. Crossing time comes from
// the sample timestamps.
inline PalpationTrace process_trace(std::vector<ForceSample> samples, double target,
                                    const PainMapConfig& cfg) {
  PalpationTrace trace;
  trace.samples = std::move(samples);
  if (trace.samples.empty()) return trace;
  trace.fused.reserve(trace.samples.size());
  for (const auto& s : trace.samples) {
    if (!(s.t >= 0.0) || !std::isfinite(s.t))
      throw Error(Errc::invalid_sample, "sample time must be finite and >= 0");
    trace.fused.push_back(fuse_and_gate(s, cfg));
  }
  trace.filtered = moving_average(trace.fused, cfg.window);
  trace.peak = *std::max_element(trace.filtered.begin(), trace.filtered.end());
  if (!(target > 0.0)) throw Error(Errc::invalid_force, "target must be > 0");
  if (auto i = first_crossing(trace.filtered, target)) trace.crossing_t = trace.samples[*i].t;
  return trace;
}

// Streaming form of the same pipeline, for samples that arrive one at a time.
// After each push, filtered() and peak() match process_trace over the prefix.
class ForceTracker {
 public:
  ForceTracker(double target, PainMapConfig cfg) : target_(target), cfg_(cfg) {
    cfg_.validate();
    if (!(target > 0.0)) throw Error(Errc::invalid_force, "target must be > 0");
  }

  // Returns the filtered value at this sample.
  double push(const ForceSample& s) {
    if (!(s.t >= 0.0) || !std::isfinite(s.t))
      throw Error(Errc::invalid_sample, "sample time must be finite and >= 0");
    fused_.push_back(fuse_and_gate(s, cfg_));
    const std::size_t n = fused_.size();
    const std::size_t lo = n >= cfg_.window ? n - cfg_.window : 0;
    double acc = 0.0;
    for (std::size_t k = lo; k < n; ++k) acc += fused_[k];
    const double value = acc / static_cast<double>(n - lo);
    peak_ = n == 1 ? value : std::max(peak_, value);
    last_ = value;
    if (!crossing_t_ && value >= target_) crossing_t_ = s.t;
    last_t_ = s.t;
    return value;
  }

  std::size_t size() const { return fused_.size(); }
  double filtered() const { return last_; }
  double peak() const { return peak_; }
  double last_t() const { return last_t_; }
  double target() const { return target_; }
  const std::optional<double>& crossing_t() const { return crossing_t_; }

 private:
  double target_;
  PainMapConfig cfg_;
  std::vector<double> fused_;
  double peak_ = 0.0;
  double last_ = 0.0;
  double last_t_ = 0.0;
  std::optional<double> crossing_t_;
};

}  // namespace painloop
