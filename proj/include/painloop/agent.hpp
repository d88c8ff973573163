#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <istream>
#include <numeric>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "painloop/actions.hpp"
#include "painloop/error.hpp"

namespace painloop {

// Policy input. Both features live in [0, 1].
struct AgentState {
  double norm_force = 0.0;
  double norm_target = 0.0;

  friend bool operator==(const AgentState&, const AgentState&) = default;
};

inline AgentState make_state(double peak_force, double target_force) {
  return AgentState{std::clamp(peak_force / 100.0, 0.0, 1.0),
                    std::clamp(target_force / 20.0, 0.0, 1.0)};
}

struct Transition {
  AgentState state;
  int action_id = 0;
  double log_prob = 0.0;
  double value = 0.0;
  double reward = 0.0;
  // Kept for log fidelity only; one-step episodes never read it.
  AgentState next_state;
};

enum class OptimizerKind { sgd, adam };

struct PpoConfig {
  double clip_eps = 0.2;
  OptimizerKind optimizer = OptimizerKind::adam;
  double learning_rate = 0.007;
  std::size_t batch_size = 16;
  std::size_t epochs = 10;
  std::size_t minibatch = 8;
  double entropy_coef = 0.05;
  double value_coef = 0.5;
  double gamma = 0.0;
  std::size_t hidden = 32;
  double init_scale = 1.0;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(clip_eps > 0.0 && clip_eps < 1.0)) throw Error(Errc::config, "clip_eps must be in (0, 1)");
    if (!(learning_rate > 0.0)) throw Error(Errc::config, "learning_rate must be > 0");
    if (minibatch < 1 || batch_size < minibatch)
      throw Error(Errc::config, "require batch_size >= minibatch >= 1");
    if (epochs < 1) throw Error(Errc::config, "epochs must be >= 1");
    if (hidden < 1) throw Error(Errc::config, "hidden must be >= 1");
    if (gamma != 0.0) throw Error(Errc::config, "only one-step episodes (gamma = 0) are supported");
    if (!(init_scale >= 0.0)) throw Error(Errc::config, "init_scale must be >= 0");
  }
};

// Fully connected tanh network with a linear output layer. All weights and biases
// live in one flat vector: per layer, a row-major (out x in) weight block then the bias.
class Mlp {
 public:
  struct Cache {
    // activations[0] is the input, activations.back() the raw output.
    std::vector<std::vector<double>> activations;
  };

  Mlp() = default;

  explicit Mlp(std::vector<std::size_t> sizes) : sizes_(std::move(sizes)) {
    if (sizes_.size() < 2) throw Error(Errc::config, "network needs at least two layer sizes");
    std::size_t n = 0;
    for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
      weight_offset_.push_back(n);
      n += sizes_[l] * sizes_[l + 1];
      bias_offset_.push_back(n);
      n += sizes_[l + 1];
    }
    params_.assign(n, 0.0);
  }

  // Hidden weights uniform in [-scale, scale]; output weights and every bias zero.
  void init(Rng& rng, double scale) {
    std::fill(params_.begin(), params_.end(), 0.0);
    std::uniform_real_distribution<double> u(-scale, scale);
    for (std::size_t l = 0; l + 2 < sizes_.size(); ++l) {
      auto w = weights(l);
      for (auto& x : w) x = u(rng);
    }
  }

  std::size_t num_layers() const { return sizes_.size() - 1; }
  const std::vector<std::size_t>& sizes() const { return sizes_; }
  std::size_t input_size() const { return sizes_.front(); }
  std::size_t output_size() const { return sizes_.back(); }
  std::size_t num_params() const { return params_.size(); }

  std::span<double> params() { return params_; }
  std::span<const double> params() const { return params_; }

  std::span<double> weights(std::size_t l) {
    return std::span(params_).subspan(weight_offset_[l], sizes_[l] * sizes_[l + 1]);
  }
  std::span<const double> weights(std::size_t l) const {
    return std::span(params_).subspan(weight_offset_[l], sizes_[l] * sizes_[l + 1]);
  }
  std::span<double> bias(std::size_t l) {
    return std::span(params_).subspan(bias_offset_[l], sizes_[l + 1]);
  }
  std::span<const double> bias(std::size_t l) const {
    return std::span(params_).subspan(bias_offset_[l], sizes_[l + 1]);
  }

  // Name of the tensor holding flat parameter index i, e.g. "layer1.weight".
  std::string tensor_name(std::size_t i) const {
    for (std::size_t l = 0; l < num_layers(); ++l) {
      if (i >= weight_offset_[l] && i < bias_offset_[l]) return "layer" + std::to_string(l) + ".weight";
      if (i >= bias_offset_[l] && i < bias_offset_[l] + sizes_[l + 1])
        return "layer" + std::to_string(l) + ".bias";
    }
    return "?";
  }

  std::vector<double> forward(std::span<const double> x, Cache* cache = nullptr) const {
    if (x.size() != input_size()) throw Error(Errc::numeric, "network input has wrong size");
    std::vector<double> a(x.begin(), x.end());
    if (cache) {
      cache->activations.clear();
      cache->activations.push_back(a);
    }
    for (std::size_t l = 0; l < num_layers(); ++l) {
      const std::size_t in = sizes_[l], out = sizes_[l + 1];
      const auto w = weights(l);
      const auto b = bias(l);
      std::vector<double> z(out);
      for (std::size_t o = 0; o < out; ++o) {
        double acc = b[o];
        for (std::size_t k = 0; k < in; ++k) acc += w[o * in + k] * a[k];
        z[o] = l + 1 < num_layers() ? std::tanh(acc) : acc;
      }
      a = std::move(z);
      if (cache) cache->activations.push_back(a);
    }
    return a;
  }

  // Accumulates d(objective)/d(params) into grad given d(objective)/d(output).
  void backward(const Cache& cache, std::span<const double> dout, std::span<double> grad) const {
    if (grad.size() != params_.size()) throw Error(Errc::numeric, "gradient buffer has wrong size");
    std::vector<double> delta(dout.begin(), dout.end());
    for (std::size_t l = num_layers(); l-- > 0;) {
      const std::size_t in = sizes_[l], out = sizes_[l + 1];
      const auto& a_in = cache.activations[l];
      const auto w = weights(l);
      double* gw = grad.data() + weight_offset_[l];
      double* gb = grad.data() + bias_offset_[l];
      for (std::size_t o = 0; o < out; ++o) {
        gb[o] += delta[o];
        for (std::size_t k = 0; k < in; ++k) gw[o * in + k] += delta[o] * a_in[k];
      }
      if (l == 0) break;
      std::vector<double> prev(in, 0.0);
      for (std::size_t o = 0; o < out; ++o)
        for (std::size_t k = 0; k < in; ++k) prev[k] += w[o * in + k] * delta[o];
      // Layer l-1 output went through tanh.
      for (std::size_t k = 0; k < in; ++k) prev[k] *= 1.0 - a_in[k] * a_in[k];
      delta = std::move(prev);
    }
  }

  friend bool operator==(const Mlp&, const Mlp&) = default;

 private:
  std::vector<std::size_t> sizes_;
  std::vector<std::size_t> weight_offset_;
  std::vector<std::size_t> bias_offset_;
  std::vector<double> params_;
};

using PolicyParams = Mlp;
using ValueParams = Mlp;

inline PolicyParams make_policy(std::size_t hidden = 32) { return Mlp({2, hidden, hidden, kNumActions}); }
inline ValueParams make_value(std::size_t hidden = 32) { return Mlp({2, hidden, hidden, 1}); }

inline std::array<double, 2> features(const AgentState& s) { return {s.norm_force, s.norm_target}; }

using Distribution = std::array<double, kNumActions>;

inline Distribution softmax(std::span<const double> logits) {
  Distribution p{};
  const double m = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (int k = 0; k < kNumActions; ++k) z += (p[k] = std::exp(logits[k] - m));
  for (auto& x : p) x /= z;
  return p;
}

inline void require_finite(const Mlp& net, const char* which) {
  const auto ps = net.params();
  for (std::size_t i = 0; i < ps.size(); ++i)
    if (!std::isfinite(ps[i]))
      throw Error(Errc::numeric, std::string(which) + "." + net.tensor_name(i) + " is not finite");
}

inline Distribution policy_forward(const PolicyParams& params, const AgentState& s) {
  require_finite(params, "policy");
  const auto f = features(s);
  return softmax(params.forward(f));
}

inline double value_forward(const ValueParams& params, const AgentState& s) {
  const auto f = features(s);
  return params.forward(f)[0];
}

struct Selection {
  int action_id = 0;
  double log_prob = 0.0;
};

inline Selection select_action(std::span<const double> dist, Rng& rng) {
  if (dist.size() != static_cast<std::size_t>(kNumActions))
    throw Error(Errc::distribution, "distribution must have 16 entries");
  double sum = 0.0;
  for (double p : dist) {
    if (!(p >= 0.0) || !std::isfinite(p))
      throw Error(Errc::distribution, "probabilities must be finite and >= 0");
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-6) throw Error(Errc::distribution, "probabilities do not sum to 1");
  std::discrete_distribution<int> pick(dist.begin(), dist.end());
  const int a = pick(rng);
  return Selection{a, std::log(dist[a])};
}

// Uniform first action, the same draw a zero-initialized policy makes.
inline int initial_action(Rng& rng) {
  Distribution uniform;
  uniform.fill(1.0 / kNumActions);
  return select_action(uniform, rng).action_id;
}

// One-step advantages r - V(s), standardized over the batch.
inline std::vector<double> compute_advantages(std::span<const Transition> batch,
                                              const ValueParams& value) {
  if (batch.empty()) throw Error(Errc::empty_input, "compute_advantages on empty batch");
  std::vector<double> adv;
  adv.reserve(batch.size());
  for (const auto& t : batch) adv.push_back(t.reward - value_forward(value, t.state));
  const double n = static_cast<double>(adv.size());
  const double mean = std::accumulate(adv.begin(), adv.end(), 0.0) / n;
  double var = 0.0;
  for (double a : adv) var += (a - mean) * (a - mean);
  const double sd = std::max(std::sqrt(var / n), 1e-8);
  for (auto& a : adv) a = (a - mean) / sd;
  return adv;
}

inline double clipped_term(double ratio, double advantage, double eps) {
  return std::min(ratio * advantage, std::clamp(ratio, 1.0 - eps, 1.0 + eps) * advantage);
}

// True when the clipped branch is the active minimum, so the sample carries no
// policy gradient.
inline bool clip_active(double ratio, double advantage, double eps) {
  return (advantage > 0.0 && ratio > 1.0 + eps) || (advantage < 0.0 && ratio < 1.0 - eps);
}

struct PpoStats {
  double objective = 0.0;
  double policy_objective = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double clip_fraction = 0.0;
};

// Objective to ascend over one minibatch:
//   mean[min(r A, clip(r) A)] + c_H mean[H(pi)] - c_V mean[(R - V)^2]
// Gradients (of the objective, not the loss) are accumulated into the two buffers
// when they are non-empty.
inline PpoStats ppo_objective(const PolicyParams& policy, const ValueParams& value,
                              std::span<const Transition> batch, std::span<const double> advantages,
                              const PpoConfig& cfg, std::span<double> policy_grad = {},
                              std::span<double> value_grad = {}) {
  if (batch.size() != advantages.size())
    throw Error(Errc::numeric, "batch and advantages differ in length");
  if (batch.empty()) throw Error(Errc::empty_input, "ppo objective on empty minibatch");
  const bool want_grad = !policy_grad.empty() || !value_grad.empty();
  if (want_grad && (policy_grad.size() != policy.num_params() || value_grad.size() != value.num_params()))
    throw Error(Errc::numeric, "gradient buffer shape mismatch");

  const double inv_n = 1.0 / static_cast<double>(batch.size());
  PpoStats st;
  Mlp::Cache pc, vc;
  std::array<double, kNumActions> dlogits{};
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto& t = batch[i];
    const auto f = features(t.state);
    const auto logits = policy.forward(f, want_grad ? &pc : nullptr);
    const auto p = softmax(logits);
    const double logp = std::log(p[t.action_id]);
    const double ratio = std::exp(logp - t.log_prob);
    const double adv = advantages[i];
    double h = 0.0;
    for (double pk : p)
      if (pk > 0.0) h -= pk * std::log(pk);
    const double v = value.forward(f, want_grad ? &vc : nullptr)[0];
    const double verr = t.reward - v;

    const bool clipped = clip_active(ratio, adv, cfg.clip_eps);
    st.policy_objective += clipped_term(ratio, adv, cfg.clip_eps) * inv_n;
    st.entropy += h * inv_n;
    st.value_loss += verr * verr * inv_n;
    st.clip_fraction += (clipped ? 1.0 : 0.0) * inv_n;

    if (want_grad) {
      // d/dlogp of the surrogate is r A outside the clipped branch.
      const double dsur = clipped ? 0.0 : ratio * adv;
      for (int k = 0; k < kNumActions; ++k) {
        const double dlogp = (k == t.action_id ? 1.0 : 0.0) - p[k];
        const double lg = p[k] > 0.0 ? std::log(p[k]) : 0.0;
        const double dh = -p[k] * (lg + h);
        dlogits[k] = (dsur * dlogp + cfg.entropy_coef * dh) * inv_n;
      }
      policy.backward(pc, dlogits, policy_grad);
      const double dv = 2.0 * cfg.value_coef * verr * inv_n;
      value.backward(vc, std::span<const double>(&dv, 1), value_grad);
    }
  }
  st.objective = st.policy_objective + cfg.entropy_coef * st.entropy - cfg.value_coef * st.value_loss;
  return st;
}

// Gradient-ascent step rule. Adam keeps per-parameter moment estimates; plain SGD
// keeps nothing.
class Optimizer {
 public:
  Optimizer() = default;
  Optimizer(OptimizerKind kind, std::size_t n) : kind_(kind) {
    if (kind_ == OptimizerKind::adam) {
      m_.assign(n, 0.0);
      v_.assign(n, 0.0);
    }
  }

  void ascend(std::span<double> params, std::span<const double> grad, double lr) {
    if (kind_ == OptimizerKind::sgd) {
      for (std::size_t i = 0; i < params.size(); ++i) params[i] += lr * grad[i];
      return;
    }
    if (m_.size() != params.size()) throw Error(Errc::numeric, "optimizer state shape mismatch");
    ++steps_;
    const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(steps_));
    const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(steps_));
    for (std::size_t i = 0; i < params.size(); ++i) {
      m_[i] = kBeta1 * m_[i] + (1.0 - kBeta1) * grad[i];
      v_[i] = kBeta2 * v_[i] + (1.0 - kBeta2) * grad[i] * grad[i];
      params[i] += lr * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + kEps);
    }
  }

  OptimizerKind kind() const { return kind_; }
  std::uint64_t steps() const { return steps_; }
  std::vector<double>& first_moment() { return m_; }
  std::vector<double>& second_moment() { return v_; }
  const std::vector<double>& first_moment() const { return m_; }
  const std::vector<double>& second_moment() const { return v_; }
  void set_steps(std::uint64_t n) { steps_ = n; }

 private:
  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  static constexpr double kEps = 1e-8;
  OptimizerKind kind_ = OptimizerKind::sgd;
  std::vector<double> m_;
  std::vector<double> v_;
  std::uint64_t steps_ = 0;
};

inline void require_finite_grad(const Mlp& net, std::span<const double> grad, const char* which) {
  for (std::size_t i = 0; i < grad.size(); ++i)
    if (!std::isfinite(grad[i]))
      throw Error(Errc::numeric,
                  std::string("gradient of ") + which + "." + net.tensor_name(i) + " is not finite");
}

// cfg.epochs passes over shuffled minibatches of the batch, one gradient-ascent step
// per minibatch. Returns the stats of the final pass averaged over minibatches.
inline PpoStats ppo_update(PolicyParams& policy, ValueParams& value, std::span<const Transition> batch,
                           const PpoConfig& cfg, Rng& rng, Optimizer& policy_opt,
                           Optimizer& value_opt) {
  cfg.validate();
  if (batch.size() != cfg.batch_size)
    throw Error(Errc::numeric, "batch holds " + std::to_string(batch.size()) + " transitions, expected " +
                                   std::to_string(cfg.batch_size));
  const auto adv = compute_advantages(batch, value);
  std::vector<std::size_t> order(batch.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<double> pg(policy.num_params()), vg(value.num_params());
  std::vector<Transition> mb;
  std::vector<double> mb_adv;
  PpoStats last;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    PpoStats acc;
    std::size_t count = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.minibatch) {
      const std::size_t end = std::min(start + cfg.minibatch, order.size());
      mb.clear();
      mb_adv.clear();
      for (std::size_t j = start; j < end; ++j) {
        mb.push_back(batch[order[j]]);
        mb_adv.push_back(adv[order[j]]);
      }
      std::fill(pg.begin(), pg.end(), 0.0);
      std::fill(vg.begin(), vg.end(), 0.0);
      const auto st = ppo_objective(policy, value, mb, mb_adv, cfg, pg, vg);
      require_finite_grad(policy, pg, "policy");
      require_finite_grad(value, vg, "value");
      policy_opt.ascend(policy.params(), pg, cfg.learning_rate);
      value_opt.ascend(value.params(), vg, cfg.learning_rate);
      acc.objective += st.objective;
      acc.policy_objective += st.policy_objective;
      acc.value_loss += st.value_loss;
      acc.entropy += st.entropy;
      acc.clip_fraction += st.clip_fraction;
      ++count;
    }
    const double k = 1.0 / static_cast<double>(count);
    last = PpoStats{acc.objective * k, acc.policy_objective * k, acc.value_loss * k, acc.entropy * k,
                    acc.clip_fraction * k};
  }
  require_finite(policy, "policy");
  require_finite(value, "value");
  return last;
}

inline PpoStats ppo_update(PolicyParams& policy, ValueParams& value, std::span<const Transition> batch,
                           const PpoConfig& cfg, Rng& rng) {
  Optimizer po(cfg.optimizer, policy.num_params()), vo(cfg.optimizer, value.num_params());
  return ppo_update(policy, value, batch, cfg, rng, po, vo);
}

// Max relative error between the analytic gradient of the objective over the whole
// batch and central finite differences with step h. Advantages are computed once and
// held fixed, as they are during an update.
inline double gradient_check(const PolicyParams& policy, const ValueParams& value,
                             std::span<const Transition> batch, const PpoConfig& cfg, double h = 1e-5) {
  const auto adv = compute_advantages(batch, value);
  std::vector<double> pg(policy.num_params(), 0.0), vg(value.num_params(), 0.0);
  ppo_objective(policy, value, batch, adv, cfg, pg, vg);

  auto rel = [](double a, double n) {
    return std::abs(a - n) / std::max({std::abs(a), std::abs(n), 1e-6});
  };
  double worst = 0.0;
  PolicyParams p = policy;
  for (std::size_t i = 0; i < p.num_params(); ++i) {
    const double orig = p.params()[i];
    p.params()[i] = orig + h;
    const double up = ppo_objective(p, value, batch, adv, cfg).objective;
    p.params()[i] = orig - h;
    const double dn = ppo_objective(p, value, batch, adv, cfg).objective;
    p.params()[i] = orig;
    worst = std::max(worst, rel(pg[i], (up - dn) / (2.0 * h)));
  }
  ValueParams v = value;
  for (std::size_t i = 0; i < v.num_params(); ++i) {
    const double orig = v.params()[i];
    v.params()[i] = orig + h;
    const double up = ppo_objective(policy, v, batch, adv, cfg).objective;
    v.params()[i] = orig - h;
    const double dn = ppo_objective(policy, v, batch, adv, cfg).objective;
    v.params()[i] = orig;
    worst = std::max(worst, rel(vg[i], (up - dn) / (2.0 * h)));
  }
  return worst;
}

struct Decision {
  int action_id = 0;
  double log_prob = 0.0;
  double value = 0.0;
};

// Owns both networks, the transition buffer and its own rng. Updates fire when the
// buffer reaches cfg.batch_size.
class PpoAgent {
 public:
  explicit PpoAgent(PpoConfig cfg)
      : cfg_(cfg), rng_(cfg.seed), policy_(make_policy(cfg.hidden)), value_(make_value(cfg.hidden)) {
    cfg_.validate();
    policy_.init(rng_, cfg_.init_scale);
    value_.init(rng_, cfg_.init_scale);
    policy_opt_ = Optimizer(cfg_.optimizer, policy_.num_params());
    value_opt_ = Optimizer(cfg_.optimizer, value_.num_params());
  }

  Decision act(const AgentState& s) {
    const auto dist = policy_forward(policy_, s);
    const auto sel = select_action(dist, rng_);
    return Decision{sel.action_id, sel.log_prob, value_forward(value_, s)};
  }

  // Buffers the transition; returns true when it triggered an update.
  bool record(const Transition& t) {
    if (t.reward != 0.0 && t.reward != 0.5 && t.reward != 1.0)
      throw Error(Errc::numeric, "reward must be 0, 0.5 or 1");
    buffer_.push_back(t);
    if (buffer_.size() < cfg_.batch_size) return false;
    stats_.push_back(ppo_update(policy_, value_, buffer_, cfg_, rng_, policy_opt_, value_opt_));
    buffer_.clear();
    return true;
  }

  int greedy(const AgentState& s) const {
    const auto p = policy_forward(policy_, s);
    return static_cast<int>(std::max_element(p.begin(), p.end()) - p.begin());
  }

  const PpoConfig& config() const { return cfg_; }
  const PolicyParams& policy() const { return policy_; }
  const ValueParams& value() const { return value_; }
  PolicyParams& policy() { return policy_; }
  ValueParams& value() { return value_; }
  const std::vector<Transition>& buffer() const { return buffer_; }
  std::size_t updates() const { return stats_.size(); }
  const std::vector<PpoStats>& stats() const { return stats_; }

 private:
  PpoConfig cfg_;
  Rng rng_;
  PolicyParams policy_;
  ValueParams value_;
  Optimizer policy_opt_;
  Optimizer value_opt_;
  std::vector<Transition> buffer_;
  std::vector<PpoStats> stats_;
};

// Checkpoint layout, all integers u32 little-endian:
//   "PLCK" version tensor_count
//   per tensor: name_len name ndim dims... then prod(dims) float32 values
namespace checkpoint {

inline constexpr std::uint32_t kVersion = 1;

inline void put_u32(std::ostream& os, std::uint32_t v) {
  const char b[4] = {char(v & 0xff), char((v >> 8) & 0xff), char((v >> 16) & 0xff), char((v >> 24) & 0xff)};
  os.write(b, 4);
}

inline std::uint32_t get_u32(std::istream& is, const char* what) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4)) throw Error(Errc::format, std::string("truncated ") + what);
  return std::uint32_t(b[0]) | std::uint32_t(b[1]) << 8 | std::uint32_t(b[2]) << 16 | std::uint32_t(b[3]) << 24;
}

inline void write_net(std::ostream& os, const Mlp& net, const std::string& prefix) {
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    const auto in = net.sizes()[l], out = net.sizes()[l + 1];
    auto put_tensor = [&](const std::string& name, std::span<const double> data,
                          std::vector<std::uint32_t> dims) {
      put_u32(os, static_cast<std::uint32_t>(name.size()));
      os.write(name.data(), static_cast<std::streamsize>(name.size()));
      put_u32(os, static_cast<std::uint32_t>(dims.size()));
      for (auto d : dims) put_u32(os, d);
      for (double x : data) put_u32(os, std::bit_cast<std::uint32_t>(static_cast<float>(x)));
    };
    put_tensor(prefix + ".layer" + std::to_string(l) + ".weight", net.weights(l),
               {static_cast<std::uint32_t>(out), static_cast<std::uint32_t>(in)});
    put_tensor(prefix + ".layer" + std::to_string(l) + ".bias", net.bias(l),
               {static_cast<std::uint32_t>(out)});
  }
}

inline void read_net(std::istream& is, Mlp& net, const std::string& prefix) {
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    const std::uint32_t in = static_cast<std::uint32_t>(net.sizes()[l]);
    const std::uint32_t out = static_cast<std::uint32_t>(net.sizes()[l + 1]);
    auto get_tensor = [&](const std::string& name, std::span<double> data, std::vector<std::uint32_t> dims) {
      const auto len = get_u32(is, "tensor name length");
      std::string got(len, '\0');
      if (!is.read(got.data(), len)) throw Error(Errc::format, "truncated tensor name");
      if (got != name) throw Error(Errc::format, "expected tensor " + name + ", found " + got);
      const auto ndim = get_u32(is, "ndim");
      if (ndim != dims.size()) throw Error(Errc::format, name + ": rank mismatch");
      for (auto d : dims)
        if (get_u32(is, "dim") != d) throw Error(Errc::format, name + ": shape mismatch");
      for (auto& x : data) x = std::bit_cast<float>(get_u32(is, "tensor data"));
    };
    get_tensor(prefix + ".layer" + std::to_string(l) + ".weight", net.weights(l), {out, in});
    get_tensor(prefix + ".layer" + std::to_string(l) + ".bias", net.bias(l), {out});
  }
}

}  // namespace checkpoint

inline void save_checkpoint(std::ostream& os, const PolicyParams& policy, const ValueParams& value) {
  os.write("PLCK", 4);
  checkpoint::put_u32(os, checkpoint::kVersion);
  checkpoint::put_u32(os, static_cast<std::uint32_t>(2 * (policy.num_layers() + value.num_layers())));
  checkpoint::write_net(os, policy, "policy");
  checkpoint::write_net(os, value, "value");
}

// Loads into networks that already have the expected shapes.
inline void load_checkpoint(std::istream& is, PolicyParams& policy, ValueParams& value) {
  char magic[4];
  if (!is.read(magic, 4) || std::string(magic, 4) != "PLCK") throw Error(Errc::format, "bad checkpoint magic");
  const auto version = checkpoint::get_u32(is, "version");
  if (version != checkpoint::kVersion)
    throw Error(Errc::migration, "checkpoint version " + std::to_string(version) + " unsupported");
  const auto count = checkpoint::get_u32(is, "tensor count");
  if (count != 2 * (policy.num_layers() + value.num_layers()))
    throw Error(Errc::format, "tensor count mismatch");
  checkpoint::read_net(is, policy, "policy");
  checkpoint::read_net(is, value, "value");
}

}  // namespace painloop
