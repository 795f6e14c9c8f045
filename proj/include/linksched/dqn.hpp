#pragma once

// Shared-policy double DQN: a two-hidden-layer tanh Q-network with analytic
// backpropagation, Adam, a time-slot replay buffer with concurrent sampling,
// and epsilon-greedy action selection.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <functional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"
#include "linksched/config.hpp"
#include "linksched/rng.hpp"
#include "linksched/scheduling.hpp"

namespace linksched {

inline constexpr int kNumActions = 2;

enum class Action : std::uint8_t { kInactive = 0, kActive = 1 };

class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ModelFormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class VersionMismatchError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct PolicyMetadata {
  std::string observation_layout{kObservationLayoutVersion};
  ObservationNormalization normalization;
  std::int64_t training_steps = 0;
  std::int64_t epoch = 0;
  double best_score = 0.0;

  bool operator==(const PolicyMetadata&) const = default;
};

/// Weights of the Q-network in -> hidden -> hidden -> 2.
struct PolicyParams {
  Eigen::MatrixXd w1, w2, w3;
  Eigen::VectorXd b1, b2, b3;
  PolicyMetadata meta;

  static PolicyParams zeros(int inputs, int hidden) {
    PolicyParams p;
    p.w1 = Eigen::MatrixXd::Zero(hidden, inputs);
    p.b1 = Eigen::VectorXd::Zero(hidden);
    p.w2 = Eigen::MatrixXd::Zero(hidden, hidden);
    p.b2 = Eigen::VectorXd::Zero(hidden);
    p.w3 = Eigen::MatrixXd::Zero(kNumActions, hidden);
    p.b3 = Eigen::VectorXd::Zero(kNumActions);
    return p;
  }

  /// Glorot-uniform weights, zero biases.
  static PolicyParams glorot(int inputs, int hidden, Rng& rng) {
    PolicyParams p = zeros(inputs, hidden);
    auto fill = [&](Eigen::MatrixXd& w) {
      const double limit = std::sqrt(6.0 / static_cast<double>(w.rows() + w.cols()));
      std::uniform_real_distribution<double> u(-limit, limit);
      for (Eigen::Index r = 0; r < w.rows(); ++r) {
        for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = u(rng);
      }
    };
    fill(p.w1);
    fill(p.w2);
    fill(p.w3);
    return p;
  }

  int input_dim() const { return static_cast<int>(w1.cols()); }
  int hidden_dim() const { return static_cast<int>(w1.rows()); }

  /// Visits every parameter tensor in a fixed order.
  template <typename F>
  void for_each_tensor(F&& f) {
    f(w1); f(b1); f(w2); f(b2); f(w3); f(b3);
  }
  template <typename F>
  void for_each_tensor(F&& f) const {
    f(w1); f(b1); f(w2); f(b2); f(w3); f(b3);
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for_each_tensor([&](const auto& t) { n += static_cast<std::size_t>(t.size()); });
    return n;
  }

  bool all_finite() const {
    bool ok = true;
    for_each_tensor([&](const auto& t) { ok = ok && t.allFinite(); });
    return ok;
  }

  /// Shapes and values equal bit for bit.
  bool bitwise_equal(const PolicyParams& o) const {
    auto same = [](const auto& a, const auto& b) {
      if (a.rows() != b.rows() || a.cols() != b.cols()) return false;
      return std::memcmp(a.data(), b.data(), sizeof(double) * static_cast<std::size_t>(a.size())) == 0;
    };
    return same(w1, o.w1) && same(b1, o.b1) && same(w2, o.w2) && same(b2, o.b2) &&
           same(w3, o.w3) && same(b3, o.b3) && meta == o.meta;
  }
};

struct QValues {
  double inactive = 0.0;
  double active = 0.0;
};

/// Q-values for a batch of observations stored column-wise (inputs x B).
inline Eigen::MatrixXd forward_batch(const PolicyParams& p, const Eigen::MatrixXd& obs) {
  if (obs.rows() != p.input_dim()) {
    throw std::invalid_argument("forward: observation length " + std::to_string(obs.rows()) +
                                " != network input " + std::to_string(p.input_dim()));
  }
  Eigen::MatrixXd a1 = ((p.w1 * obs).colwise() + p.b1).array().tanh().matrix();
  Eigen::MatrixXd a2 = ((p.w2 * a1).colwise() + p.b2).array().tanh().matrix();
  return (p.w3 * a2).colwise() + p.b3;
}

inline QValues forward(const PolicyParams& p, std::span<const double> obs) {
  Eigen::Map<const Eigen::VectorXd> x(obs.data(), static_cast<Eigen::Index>(obs.size()));
  const Eigen::MatrixXd q = forward_batch(p, x);
  return {q(0, 0), q(1, 0)};
}

/// Ties go to kActive.
inline Action greedy_action(double q_inactive, double q_active) {
  return q_active >= q_inactive ? Action::kActive : Action::kInactive;
}
inline Action greedy_action(QValues q) { return greedy_action(q.inactive, q.active); }

inline Action act(const PolicyParams& p, std::span<const double> obs, double epsilon, Rng& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  if (unit(rng) < epsilon) {
    return std::bernoulli_distribution(0.5)(rng) ? Action::kActive : Action::kInactive;
  }
  return greedy_action(forward(p, obs));
}

/// Epsilon-greedy decisions for several agents sharing one policy. Random
/// numbers are drawn agent by agent in index order.
inline std::vector<Action> act_all(const PolicyParams& p, std::span<const Observation> obs,
                                   double epsilon, Rng& rng) {
  std::vector<Action> actions(obs.size(), Action::kInactive);
  std::vector<bool> greedy(obs.size(), true);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  bool any_greedy = false;
  for (std::size_t a = 0; a < obs.size(); ++a) {
    if (epsilon > 0.0 && unit(rng) < epsilon) {
      greedy[a] = false;
      actions[a] = std::bernoulli_distribution(0.5)(rng) ? Action::kActive : Action::kInactive;
    } else {
      any_greedy = true;
    }
  }
  if (!any_greedy) return actions;
  Eigen::MatrixXd x(static_cast<Eigen::Index>(kObservationSize), static_cast<Eigen::Index>(obs.size()));
  for (std::size_t a = 0; a < obs.size(); ++a) {
    for (std::size_t k = 0; k < kObservationSize; ++k) {
      x(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(a)) = obs[a][k];
    }
  }
  const Eigen::MatrixXd q = forward_batch(p, x);
  for (std::size_t a = 0; a < obs.size(); ++a) {
    if (greedy[a]) actions[a] = greedy_action(q(0, static_cast<Eigen::Index>(a)), q(1, static_cast<Eigen::Index>(a)));
  }
  return actions;
}

/// Exploration probability by global episode index: 1 during pre-training,
/// then linear down to final_epsilon over the decay window.
struct EpsilonSchedule {
  int pretrain_episodes = 100;
  int decay_episodes = 50;
  double final_epsilon = 0.01;

  static EpsilonSchedule from(const AgentConfig& cfg) {
    return {cfg.pretrain_episodes, cfg.epsilon_decay_episodes, cfg.final_epsilon};
  }

  double at(std::int64_t episode) const {
    if (episode < pretrain_episodes) return 1.0;
    const std::int64_t k = episode - pretrain_episodes;
    if (decay_episodes <= 0 || k >= decay_episodes) return final_epsilon;
    const double frac = static_cast<double>(k) / static_cast<double>(decay_episodes);
    return 1.0 + (final_epsilon - 1.0) * frac;
  }
};

struct Transition {
  Observation obs{};
  Action action = Action::kInactive;
  double reward = 0.0;
  Observation next_obs{};
};

/// All agents' transitions for one scheduling interval.
struct TransitionSlot {
  std::int64_t interval = 0;
  std::vector<Transition> agents;
};

class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
    if (capacity == 0) throw std::invalid_argument("ReplayBuffer: capacity must be positive");
    slots_.reserve(std::min<std::size_t>(capacity, 1 << 16));
  }

  std::size_t capacity() const { return capacity_; }
  std::size_t size() const { return slots_.size(); }
  bool empty() const { return slots_.empty(); }

  void push(TransitionSlot slot) {
    if (slots_.size() < capacity_) {
      slots_.push_back(std::move(slot));
    } else {
      slots_[head_] = std::move(slot);
      head_ = (head_ + 1) % capacity_;
    }
  }

  /// i-th slot counting from the oldest.
  const TransitionSlot& at(std::size_t i) const { return slots_[(head_ + i) % slots_.size()]; }

  /// Uniform draws of whole time slots, with replacement.
  std::vector<const TransitionSlot*> sample_concurrent(std::size_t batch, Rng& rng) const {
    if (slots_.empty()) throw std::logic_error("sample_concurrent: replay buffer is empty");
    std::uniform_int_distribution<std::size_t> pick(0, slots_.size() - 1);
    std::vector<const TransitionSlot*> out;
    out.reserve(batch);
    for (std::size_t b = 0; b < batch; ++b) out.push_back(&slots_[pick(rng)]);
    return out;
  }

 private:
  std::size_t capacity_;
  std::size_t head_ = 0;
  std::vector<TransitionSlot> slots_;
};

inline std::vector<Transition> flatten(std::span<const TransitionSlot* const> slots) {
  std::vector<Transition> out;
  for (const TransitionSlot* s : slots) out.insert(out.end(), s->agents.begin(), s->agents.end());
  return out;
}

/// Double-DQN target: the main network picks the next action, the target
/// network values it. Episodes are truncated, so the bootstrap is always kept.
inline double td_target(const PolicyParams& main, const PolicyParams& target, const Transition& tr,
                        double gamma) {
  const QValues qm = forward(main, tr.next_obs);
  const QValues qt = forward(target, tr.next_obs);
  const double bootstrap = greedy_action(qm) == Action::kActive ? qt.active : qt.inactive;
  return tr.reward + gamma * bootstrap;
}

inline double huber(double delta, double threshold) {
  const double a = std::abs(delta);
  return a <= threshold ? 0.5 * delta * delta : threshold * (a - 0.5 * threshold);
}

/// A training batch in column layout.
struct TrainingBatch {
  Eigen::MatrixXd obs;          // inputs x B
  std::vector<Action> actions;  // B
  Eigen::VectorXd targets;      // B
};

inline TrainingBatch make_training_batch(const PolicyParams& main, const PolicyParams& target,
                                         std::span<const Transition> transitions, double gamma) {
  const auto b = static_cast<Eigen::Index>(transitions.size());
  const auto d = static_cast<Eigen::Index>(kObservationSize);
  TrainingBatch batch;
  batch.obs.resize(d, b);
  Eigen::MatrixXd next(d, b);
  batch.actions.resize(transitions.size());
  for (Eigen::Index i = 0; i < b; ++i) {
    const Transition& tr = transitions[static_cast<std::size_t>(i)];
    for (Eigen::Index k = 0; k < d; ++k) {
      batch.obs(k, i) = tr.obs[static_cast<std::size_t>(k)];
      next(k, i) = tr.next_obs[static_cast<std::size_t>(k)];
    }
    batch.actions[static_cast<std::size_t>(i)] = tr.action;
  }
  const Eigen::MatrixXd qm = forward_batch(main, next);
  const Eigen::MatrixXd qt = forward_batch(target, next);
  batch.targets.resize(b);
  for (Eigen::Index i = 0; i < b; ++i) {
    const Action best = greedy_action(qm(0, i), qm(1, i));
    const double bootstrap = qt(static_cast<Eigen::Index>(best), i);
    batch.targets(i) = transitions[static_cast<std::size_t>(i)].reward + gamma * bootstrap;
  }
  return batch;
}

struct LossAndGradient {
  double loss = 0.0;
  PolicyParams gradient;
};

/// Mean Huber loss between Q(s, a) and fixed targets, with its gradient.
inline LossAndGradient loss_and_gradient(const PolicyParams& p, const TrainingBatch& batch,
                                         double huber_delta) {
  const Eigen::Index b = batch.obs.cols();
  if (b == 0) throw std::invalid_argument("loss_and_gradient: empty batch");
  const Eigen::MatrixXd a1 = ((p.w1 * batch.obs).colwise() + p.b1).array().tanh().matrix();
  const Eigen::MatrixXd a2 = ((p.w2 * a1).colwise() + p.b2).array().tanh().matrix();
  const Eigen::MatrixXd q = (p.w3 * a2).colwise() + p.b3;

  const double inv_b = 1.0 / static_cast<double>(b);
  Eigen::MatrixXd dq = Eigen::MatrixXd::Zero(kNumActions, b);
  double loss = 0.0;
  for (Eigen::Index i = 0; i < b; ++i) {
    const auto a = static_cast<Eigen::Index>(batch.actions[static_cast<std::size_t>(i)]);
    const double delta = q(a, i) - batch.targets(i);
    loss += huber(delta, huber_delta);
    dq(a, i) = std::clamp(delta, -huber_delta, huber_delta) * inv_b;
  }

  LossAndGradient out;
  out.loss = loss * inv_b;
  PolicyParams& g = out.gradient;
  g.meta = p.meta;
  g.w3 = dq * a2.transpose();
  g.b3 = dq.rowwise().sum();
  const Eigen::MatrixXd dz2 = (p.w3.transpose() * dq).cwiseProduct((1.0 - a2.array().square()).matrix());
  g.w2 = dz2 * a1.transpose();
  g.b2 = dz2.rowwise().sum();
  const Eigen::MatrixXd dz1 = (p.w2.transpose() * dz2).cwiseProduct((1.0 - a1.array().square()).matrix());
  g.w1 = dz1 * batch.obs.transpose();
  g.b1 = dz1.rowwise().sum();
  return out;
}

class AdamOptimizer {
 public:
  AdamOptimizer() = default;
  AdamOptimizer(const PolicyParams& shape, double lr, double beta1, double beta2, double eps)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
    m_ = PolicyParams::zeros(shape.input_dim(), shape.hidden_dim());
    v_ = m_;
  }

  static AdamOptimizer from(const PolicyParams& shape, const AgentConfig& cfg) {
    return {shape, cfg.learning_rate, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_epsilon};
  }

  std::int64_t steps() const { return t_; }

  void step(PolicyParams& params, const PolicyParams& grad) {
    ++t_;
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    auto update = [&](auto& w, const auto& g, auto& m, auto& v) {
      m = beta1_ * m + (1.0 - beta1_) * g;
      v = beta2_ * v + (1.0 - beta2_) * g.cwiseProduct(g);
      w.array() -= lr_ * (m.array() / c1) / ((v.array() / c2).sqrt() + eps_);
    };
    update(params.w1, grad.w1, m_.w1, v_.w1);
    update(params.b1, grad.b1, m_.b1, v_.b1);
    update(params.w2, grad.w2, m_.w2, v_.w2);
    update(params.b2, grad.b2, m_.b2, v_.b2);
    update(params.w3, grad.w3, m_.w3, v_.w3);
    update(params.b3, grad.b3, m_.b3, v_.b3);
  }

  bool operator==(const AdamOptimizer& o) const {
    return t_ == o.t_ && m_.bitwise_equal(o.m_) && v_.bitwise_equal(o.v_);
  }

 private:
  double lr_ = 1e-3;
  double beta1_ = 0.9;
  double beta2_ = 0.999;
  double eps_ = 1e-8;
  std::int64_t t_ = 0;
  PolicyParams m_;
  PolicyParams v_;
};

/// One gradient step on `main`. Returns the pre-update loss.
inline double train_step(PolicyParams& main, const PolicyParams& target,
                         std::span<const Transition> transitions, AdamOptimizer& optimizer,
                         double gamma, double huber_delta) {
  if (transitions.empty()) throw std::invalid_argument("train_step: empty batch");
  const TrainingBatch batch = make_training_batch(main, target, transitions, gamma);
  LossAndGradient lg = loss_and_gradient(main, batch, huber_delta);
  if (!std::isfinite(lg.loss)) {
    throw DivergenceError("train_step: non-finite loss after " +
                          std::to_string(main.meta.training_steps) + " updates");
  }
  optimizer.step(main, lg.gradient);
  if (!main.all_finite()) {
    throw DivergenceError("train_step: non-finite parameters after " +
                          std::to_string(main.meta.training_steps) + " updates");
  }
  ++main.meta.training_steps;
  return lg.loss;
}

/// Main/target networks, optimizer, replay buffer and update cadences.
class DoubleDqn {
 public:
  DoubleDqn(const AgentConfig& cfg, std::uint64_t seed)
      : cfg_(cfg),
        rng_(seed),
        main_(PolicyParams::glorot(static_cast<int>(kObservationSize), cfg.hidden_units, rng_)),
        target_(main_),
        optimizer_(AdamOptimizer::from(main_, cfg)),
        buffer_(static_cast<std::size_t>(cfg.replay_capacity)),
        schedule_(EpsilonSchedule::from(cfg)) {}

  const PolicyParams& main() const { return main_; }
  PolicyParams& main() { return main_; }
  const PolicyParams& target() const { return target_; }
  const ReplayBuffer& buffer() const { return buffer_; }
  const AgentConfig& config() const { return cfg_; }
  Rng& rng() { return rng_; }

  std::int64_t episodes_started() const { return episode_; }
  std::int64_t updates() const { return updates_; }
  std::int64_t syncs() const { return syncs_; }
  double last_loss() const { return last_loss_; }

  bool pretraining() const { return current_episode_ < cfg_.pretrain_episodes; }
  double epsilon() const { return schedule_.at(current_episode_); }

  /// Advances the global episode counter that drives epsilon.
  void begin_episode() { current_episode_ = episode_++; }

  std::vector<Action> choose(std::span<const Observation> obs) {
    return act_all(main_, obs, epsilon(), rng_);
  }

  /// Stores one slot and applies the train / sync cadences (no updates
  /// during pre-training).
  void record(TransitionSlot slot) {
    buffer_.push(std::move(slot));
    if (pretraining()) return;
    ++trainable_intervals_;
    if (trainable_intervals_ % cfg_.train_every != 0) return;
    const auto slots = buffer_.sample_concurrent(static_cast<std::size_t>(cfg_.batch_slots), rng_);
    const auto batch = flatten(slots);
    last_loss_ = train_step(main_, target_, batch, optimizer_, cfg_.gamma, cfg_.huber_delta);
    ++updates_;
    if (updates_ % cfg_.target_sync_every == 0) sync_target();
  }

  void sync_target() {
    target_ = main_;
    ++syncs_;
  }

  bool state_equal(const DoubleDqn& o) const {
    if (buffer_.size() != o.buffer_.size()) return false;
    return main_.bitwise_equal(o.main_) && target_.bitwise_equal(o.target_) &&
           optimizer_ == o.optimizer_ && rng_ == o.rng_ && episode_ == o.episode_ &&
           updates_ == o.updates_ && syncs_ == o.syncs_ &&
           trainable_intervals_ == o.trainable_intervals_;
  }

 private:
  AgentConfig cfg_;
  Rng rng_;
  PolicyParams main_;
  PolicyParams target_;
  AdamOptimizer optimizer_;
  ReplayBuffer buffer_;
  EpsilonSchedule schedule_;
  std::int64_t episode_ = 0;
  std::int64_t current_episode_ = 0;
  std::int64_t trainable_intervals_ = 0;
  std::int64_t updates_ = 0;
  std::int64_t syncs_ = 0;
  double last_loss_ = 0.0;
};

// ---------------------------------------------------------------------------
// Model file

inline constexpr std::string_view kModelFormat = "linksched-policy";
inline constexpr int kModelFormatVersion = 1;

namespace detail {

inline std::string format_double(double v) {
  char buf[40];
  auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view s) {
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw ModelFormatError("model file: bad number '" + std::string(s) + "'");
  }
  return v;
}

/// Row-major, space-separated.
template <typename M>
std::string encode_values(const M& m) {
  std::string out;
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      if (!out.empty()) out.push_back(' ');
      out += format_double(m(r, c));
    }
  }
  return out;
}

template <typename M>
void decode_values(std::string_view text, M& m) {
  Eigen::Index count = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    while (pos < text.size() && text[pos] == ' ') ++pos;
    if (pos >= text.size()) break;
    std::size_t end = text.find(' ', pos);
    if (end == std::string_view::npos) end = text.size();
    if (count >= m.size()) throw ModelFormatError("model file: too many values for tensor");
    m(count / m.cols(), count % m.cols()) = parse_double(text.substr(pos, end - pos));
    ++count;
    pos = end;
  }
  if (count != m.size()) throw ModelFormatError("model file: too few values for tensor");
}

}  // namespace detail

inline std::string serialize(const PolicyParams& p) {
  using nlohmann::ordered_json;
  using detail::encode_values;
  using detail::format_double;
  ordered_json j;
  j["format"] = kModelFormat;
  j["format_version"] = kModelFormatVersion;
  j["observation_layout"] = p.meta.observation_layout;
  const auto& n = p.meta.normalization;
  j["normalization"] = {{"sinr_min_db", format_double(n.sinr_min_db)},
                        {"sinr_max_db", format_double(n.sinr_max_db)},
                        {"log_weight_min", format_double(n.log_weight_min)},
                        {"log_weight_max", format_double(n.log_weight_max)},
                        {"weight_scale", format_double(n.weight_scale)}};
  j["activation"] = "tanh";
  j["layer_sizes"] = {p.w1.cols(), p.w1.rows(), p.w2.rows(), p.w3.rows()};
  ordered_json layers = ordered_json::array();
  auto layer = [&](const Eigen::MatrixXd& w, const Eigen::VectorXd& b) {
    layers.push_back({{"rows", w.rows()},
                      {"cols", w.cols()},
                      {"weights", encode_values(w)},
                      {"bias", encode_values(b)}});
  };
  layer(p.w1, p.b1);
  layer(p.w2, p.b2);
  layer(p.w3, p.b3);
  j["layers"] = std::move(layers);
  j["training"] = {{"steps", p.meta.training_steps},
                   {"epoch", p.meta.epoch},
                   {"best_score", format_double(p.meta.best_score)}};
  return j.dump(1) + "\n";
}

/// Parses a model file, refusing one whose observation layout differs from
/// `expected_layout`.
inline PolicyParams deserialize(std::string_view text,
                                std::string_view expected_layout = kObservationLayoutVersion) {
  using nlohmann::json;
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ModelFormatError(std::string("model file: ") + e.what());
  }
  try {
    if (j.at("format").get<std::string>() != kModelFormat) {
      throw ModelFormatError("model file: unknown format");
    }
    if (j.at("format_version").get<int>() != kModelFormatVersion) {
      throw VersionMismatchError("model file: format version " +
                                 std::to_string(j.at("format_version").get<int>()) + " != " +
                                 std::to_string(kModelFormatVersion));
    }
    const auto layout = j.at("observation_layout").get<std::string>();
    if (layout != expected_layout) {
      throw VersionMismatchError("model file: observation layout '" + layout +
                                 "' does not match expected '" + std::string(expected_layout) + "'");
    }
    if (j.at("activation").get<std::string>() != "tanh") {
      throw ModelFormatError("model file: unsupported activation");
    }
    const auto& layers = j.at("layers");
    if (!layers.is_array() || layers.size() != 3) throw ModelFormatError("model file: expected 3 layers");
    PolicyParams p;
    auto read = [&](std::size_t k, Eigen::MatrixXd& w, Eigen::VectorXd& b) {
      const auto& l = layers.at(k);
      const auto rows = l.at("rows").get<Eigen::Index>();
      const auto cols = l.at("cols").get<Eigen::Index>();
      if (rows <= 0 || cols <= 0) throw ModelFormatError("model file: bad layer shape");
      w.resize(rows, cols);
      b.resize(rows);
      detail::decode_values(l.at("weights").get<std::string>(), w);
      detail::decode_values(l.at("bias").get<std::string>(), b);
    };
    read(0, p.w1, p.b1);
    read(1, p.w2, p.b2);
    read(2, p.w3, p.b3);
    if (p.w2.cols() != p.w1.rows() || p.w3.cols() != p.w2.rows() || p.w3.rows() != kNumActions ||
        p.w1.cols() != static_cast<Eigen::Index>(kObservationSize)) {
      throw ModelFormatError("model file: inconsistent layer shapes");
    }
    const auto& n = j.at("normalization");
    auto num = [](const json& v) { return detail::parse_double(v.get<std::string>()); };
    p.meta.observation_layout = layout;
    p.meta.normalization = {num(n.at("sinr_min_db")), num(n.at("sinr_max_db")),
                            num(n.at("log_weight_min")), num(n.at("log_weight_max")),
                            num(n.at("weight_scale"))};
    const auto& tr = j.at("training");
    p.meta.training_steps = tr.at("steps").get<std::int64_t>();
    p.meta.epoch = tr.at("epoch").get<std::int64_t>();
    p.meta.best_score = num(tr.at("best_score"));
    if (!p.all_finite()) throw ModelFormatError("model file: non-finite parameter");
    return p;
  } catch (const json::exception& e) {
    throw ModelFormatError(std::string("model file: ") + e.what());
  }
}

}  // namespace linksched
