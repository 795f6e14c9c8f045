#pragma once

// Episodes, evaluation metrics, validation-set calibration and the training
// loop with per-epoch validation and best-model checkpointing.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <functional>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Dense>

#include "linksched/baselines.hpp"
#include "linksched/config.hpp"
#include "linksched/dqn.hpp"
#include "linksched/environment.hpp"
#include "linksched/rng.hpp"
#include "linksched/scheduling.hpp"

namespace linksched {

class CalibrationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Metrics

inline double score(double avg_rate, double p5_rate, double avg_weight = 1.0, double p5_weight = 3.0) {
  return avg_weight * avg_rate + p5_weight * p5_rate;
}

/// Linear-interpolated percentile at rank q*(n-1) of the sorted samples.
inline double percentile(std::vector<double> samples, double q) {
  if (samples.empty()) throw std::invalid_argument("percentile: no samples");
  std::sort(samples.begin(), samples.end());
  const double pos = q * static_cast<double>(samples.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = static_cast<std::size_t>(std::ceil(pos));
  const double frac = pos - static_cast<double>(lo);
  return samples[lo] + frac * (samples[hi] - samples[lo]);
}

inline double percentile5(std::vector<double> samples) { return percentile(std::move(samples), 0.05); }

struct EvalMetrics {
  double avg_rate_bps = 0.0;
  double p5_rate_bps = 0.0;
  double score = 0.0;
  std::size_t samples = 0;

  bool operator==(const EvalMetrics&) const = default;
};

inline EvalMetrics summarize(const std::vector<double>& pooled, const HarnessConfig& h) {
  if (pooled.empty()) throw std::invalid_argument("summarize: no samples");
  EvalMetrics m;
  double sum = 0.0;
  for (double v : pooled) sum += v;
  m.avg_rate_bps = sum / static_cast<double>(pooled.size());
  m.p5_rate_bps = percentile5(pooled);
  m.score = score(m.avg_rate_bps, m.p5_rate_bps, h.score_avg_weight, h.score_p5_weight);
  m.samples = pooled.size();
  return m;
}

// ---------------------------------------------------------------------------
// Policies and episodes

enum class PolicyKind { kDqn, kFullReuse, kTdm, kExhaustive };

/// A scheduler used in evaluation mode. A DQN policy refers to parameters it
/// does not own and acts greedily.
struct Policy {
  PolicyKind kind = PolicyKind::kFullReuse;
  const PolicyParams* params = nullptr;

  static Policy dqn(const PolicyParams& p) { return {PolicyKind::kDqn, &p}; }
  static Policy full_reuse() { return {PolicyKind::kFullReuse, nullptr}; }
  static Policy tdm() { return {PolicyKind::kTdm, nullptr}; }
  static Policy exhaustive() { return {PolicyKind::kExhaustive, nullptr}; }

  std::string name() const {
    switch (kind) {
      case PolicyKind::kDqn: return "dqn";
      case PolicyKind::kFullReuse: return "full_reuse";
      case PolicyKind::kTdm: return "tdm";
      case PolicyKind::kExhaustive: return "exhaustive";
    }
    return "unknown";
  }
};

inline Policy baseline_by_name(const std::string& name) {
  if (name == "full_reuse") return Policy::full_reuse();
  if (name == "tdm") return Policy::tdm();
  if (name == "exhaustive") return Policy::exhaustive();
  throw std::invalid_argument("unknown baseline '" + name + "' (expected full_reuse, tdm or exhaustive)");
}

struct EpisodeResult {
  std::uint64_t seed = 0;
  std::vector<double> ue_avg_rate_bps;     // per UE over the evaluation window
  std::vector<int> active_intervals;       // per AP over the evaluation window
};

/// Everything known at one interval, handed to an optional observer.
struct IntervalView {
  std::int64_t t = 0;
  const Environment& env;
  const Eigen::MatrixXd& gains;                  // linear, [ue][ap]
  std::span<const double> weights;               // by UE, before this interval's update
  std::span<const Observation> observations;     // by agent
  const ActivationPattern& pattern;
  const MeasurementRecord& record;
  std::span<const double> rewards;               // by agent
};

using IntervalHook = std::function<void(const IntervalView&)>;

namespace detail {

/// Runs one episode. `decide(t, env, gains, weights, obs)` returns the
/// activation; `on_step(view, next_obs)` sees every interval.
template <typename Decide, typename OnStep>
EpisodeResult run_episode_impl(const RunConfig& cfg, std::uint64_t seed,
                               const ObservationNormalization& norm, Decide&& decide,
                               OnStep&& on_step) {
  const Environment env(cfg.network, seed);
  const Topology& topo = env.topology();
  const int n = topo.num_aps();
  const auto un = static_cast<std::size_t>(n);
  const std::vector<NeighborSet> neighbors = compute_neighbors(topo);
  const std::vector<int> ue_of = topo.ue_of_ap();
  const AgentConfig& ac = cfg.agent;
  const HarnessConfig& hc = cfg.harness;

  // EMA starts from the full-reuse rate of interval 0.
  std::vector<AgentState> agents(un);
  {
    const MeasurementRecord first = env.step(full_reuse(n), 0);
    for (std::size_t a = 0; a < un; ++a) {
      agents[a] = AgentState::initial(first.realized_rate_bps[static_cast<std::size_t>(ue_of[a])],
                                      ac.rate_floor_bps);
    }
  }
  MeasurementHistory history(DelaySchedule::from(ac));

  auto observe = [&](std::int64_t t) {
    std::vector<Observation> obs(un);
    for (int a = 0; a < n; ++a) {
      obs[static_cast<std::size_t>(a)] = build_observation(a, neighbors[static_cast<std::size_t>(a)], history, t, norm);
    }
    return obs;
  };

  EpisodeResult result;
  result.seed = seed;
  result.ue_avg_rate_bps.assign(un, 0.0);
  result.active_intervals.assign(un, 0);

  std::vector<double> weights(un);
  std::vector<double> pf(un);
  std::vector<Observation> obs = observe(0);
  for (std::int64_t t = 0; t < hc.intervals_per_episode; ++t) {
    const Eigen::MatrixXd gains = env.gains(t);
    for (std::size_t a = 0; a < un; ++a) weights[static_cast<std::size_t>(ue_of[a])] = agents[a].weight;

    const ActivationPattern pattern = decide(t, env, gains, std::span<const double>(weights),
                                             std::span<const Observation>(obs));
    const MeasurementRecord rec = measure(gains, topo.association, pattern, env.budget(), t);

    for (int a = 0; a < n; ++a) {
      const auto snap = history.local(t, a);
      pf[static_cast<std::size_t>(a)] = pf_ratio(agents[static_cast<std::size_t>(a)].ema_rate_bps,
                                                 snap ? snap->sinr_linear : 0.0, env.budget().bandwidth_hz);
    }
    const std::vector<double> rewards = compute_reward(rec, weights, pf);

    for (std::size_t a = 0; a < un; ++a) {
      agents[a].update(rec.realized_rate_bps[static_cast<std::size_t>(ue_of[a])], ac.ema_beta, ac.rate_floor_bps);
    }
    history.ingest(rec, agents, ue_of);

    if (t >= hc.warmup_intervals) {
      for (std::size_t i = 0; i < un; ++i) {
        result.ue_avg_rate_bps[i] += rec.realized_rate_bps[i];
        result.active_intervals[i] += pattern[i] ? 1 : 0;
      }
    }

    std::vector<Observation> next = observe(t + 1);
    const IntervalView view{t, env, gains, weights, obs, pattern, rec, rewards};
    on_step(view, std::span<const Observation>(next));
    obs = std::move(next);
  }
  const double window = static_cast<double>(hc.intervals_per_episode - hc.warmup_intervals);
  for (double& r : result.ue_avg_rate_bps) r /= window;
  return result;
}

inline ActivationPattern to_pattern(const std::vector<Action>& actions) {
  ActivationPattern p(actions.size());
  for (std::size_t a = 0; a < actions.size(); ++a) p[a] = actions[a] == Action::kActive ? 1 : 0;
  return p;
}

}  // namespace detail

/// Evaluation-mode episode: greedy for a DQN policy, no learning side effects.
inline EpisodeResult run_episode(const RunConfig& cfg, std::uint64_t seed, const Policy& policy,
                                 const IntervalHook& hook = {}) {
  if (policy.kind == PolicyKind::kDqn && policy.params == nullptr) {
    throw std::invalid_argument("run_episode: DQN policy without parameters");
  }
  const ObservationNormalization norm =
      policy.kind == PolicyKind::kDqn ? policy.params->meta.normalization : ObservationNormalization{};
  Rng unused(0);
  auto decide = [&](std::int64_t t, const Environment& env, const Eigen::MatrixXd& gains,
                    std::span<const double> weights, std::span<const Observation> obs) -> ActivationPattern {
    const int n = env.num_aps();
    switch (policy.kind) {
      case PolicyKind::kFullReuse: return full_reuse(n);
      case PolicyKind::kTdm: return tdm(n, t);
      case PolicyKind::kExhaustive:
        return exhaustive_search(gains, env.topology().association, weights, env.budget());
      case PolicyKind::kDqn: return detail::to_pattern(act_all(*policy.params, obs, 0.0, unused));
    }
    return full_reuse(n);
  };
  auto on_step = [&](const IntervalView& view, std::span<const Observation>) {
    if (hook) hook(view);
  };
  return detail::run_episode_impl(cfg, seed, norm, decide, on_step);
}

/// Training-mode episode: epsilon-greedy actions from the learner; slots from
/// the evaluation window go to the replay buffer with the train/sync cadence.
inline EpisodeResult run_training_episode(const RunConfig& cfg, std::uint64_t seed, DoubleDqn& learner) {
  learner.begin_episode();
  const ObservationNormalization norm = learner.main().meta.normalization;
  std::vector<Action> last_actions;
  auto decide = [&](std::int64_t, const Environment&, const Eigen::MatrixXd&, std::span<const double>,
                    std::span<const Observation> obs) {
    last_actions = learner.choose(obs);
    return detail::to_pattern(last_actions);
  };
  auto on_step = [&](const IntervalView& view, std::span<const Observation> next) {
    if (view.t < cfg.harness.warmup_intervals) return;
    TransitionSlot slot;
    slot.interval = view.t;
    slot.agents.resize(view.observations.size());
    for (std::size_t a = 0; a < slot.agents.size(); ++a) {
      slot.agents[a] = {view.observations[a], last_actions[a], view.rewards[a], next[a]};
    }
    learner.record(std::move(slot));
  };
  return detail::run_episode_impl(cfg, seed, norm, decide, on_step);
}

/// Runs every seed in evaluation mode and pools per-UE rates in seed order.
/// Results do not depend on `threads`.
inline EvalMetrics evaluate(const RunConfig& cfg, const Policy& policy, std::span<const std::uint64_t> seeds,
                            int threads = 1) {
  if (seeds.empty()) throw std::invalid_argument("evaluate: empty seed set");
  std::vector<EpisodeResult> results(seeds.size());
  const int workers = std::max(1, std::min<int>(threads, static_cast<int>(seeds.size())));
  if (workers == 1) {
    for (std::size_t k = 0; k < seeds.size(); ++k) results[k] = run_episode(cfg, seeds[k], policy);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(workers));
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (std::size_t k = next++; k < seeds.size(); k = next++) {
            results[k] = run_episode(cfg, seeds[k], policy);
          }
        } catch (...) {
          errors[static_cast<std::size_t>(w)] = std::current_exception();
        }
      });
    }
    for (auto& th : pool) th.join();
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }
  std::vector<double> pooled;
  for (const auto& r : results) pooled.insert(pooled.end(), r.ue_avg_rate_bps.begin(), r.ue_avg_rate_bps.end());
  return summarize(pooled, cfg.harness);
}

// ---------------------------------------------------------------------------
// Validation-set calibration

struct CalibrationResult {
  std::vector<std::uint64_t> seeds;
  EvalMetrics reference;
  EvalMetrics accepted;
  int attempts = 0;
};

inline double relative_error(double value, double reference) {
  if (reference == 0.0) return value == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  return std::abs(value - reference) / std::abs(reference);
}

/// Draws candidate seed sets until both TDM average and 5th-percentile rates
/// are within `tolerance` relative error of the reference set.
template <typename DrawCandidates>
CalibrationResult calibrate_against(const RunConfig& cfg, std::span<const std::uint64_t> reference_seeds,
                                    DrawCandidates&& draw, double tolerance, int max_attempts) {
  const Policy baseline = Policy::tdm();
  CalibrationResult out;
  out.reference = evaluate(cfg, baseline, reference_seeds, cfg.harness.threads);
  for (int attempt = 0; attempt < max_attempts; ++attempt) {
    std::vector<std::uint64_t> candidate = draw(attempt);
    const EvalMetrics m = evaluate(cfg, baseline, candidate, cfg.harness.threads);
    out.attempts = attempt + 1;
    if (relative_error(m.avg_rate_bps, out.reference.avg_rate_bps) <= tolerance &&
        relative_error(m.p5_rate_bps, out.reference.p5_rate_bps) <= tolerance) {
      out.seeds = std::move(candidate);
      out.accepted = m;
      return out;
    }
  }
  throw CalibrationError("calibration: no candidate set within " + std::to_string(tolerance) +
                         " relative error after " + std::to_string(max_attempts) + " attempts");
}

inline CalibrationResult calibrate_validation_set(const RunConfig& cfg) {
  const HarnessConfig& h = cfg.harness;
  const auto reference = derive_seeds(cfg.seed, SeedStream::kCalibrationReference,
                                      static_cast<std::size_t>(h.calibration_reference_envs));
  const auto size = static_cast<std::size_t>(h.validation_envs);
  auto draw = [&](int attempt) {
    return derive_seeds(cfg.seed, SeedStream::kCalibrationCandidate, size,
                        static_cast<std::uint64_t>(attempt) * size);
  };
  return calibrate_against(cfg, reference, draw, h.calibration_tolerance, h.calibration_max_attempts);
}

inline std::vector<std::uint64_t> validation_seeds(const RunConfig& cfg) {
  if (cfg.harness.calibrate_validation) return calibrate_validation_set(cfg).seeds;
  return derive_seeds(cfg.seed, SeedStream::kValidation, static_cast<std::size_t>(cfg.harness.validation_envs));
}

// ---------------------------------------------------------------------------
// Training

struct BaselineReference {
  std::string name;
  EvalMetrics metrics;
};

struct CurveRow {
  std::int64_t epoch = 0;
  EvalMetrics metrics;
  double best_score = 0.0;
};

struct TrainRunState {
  std::int64_t epoch = 0;
  std::int64_t episodes = 0;
  double best_score = -std::numeric_limits<double>::infinity();
  std::int64_t best_epoch = -1;
  bool early_stopped = false;
  std::vector<std::uint64_t> validation_seeds;
  std::vector<BaselineReference> baselines;
  std::vector<CurveRow> curve;
  PolicyParams best_params;
};

struct TrainCallbacks {
  std::function<void(const TrainRunState&)> on_start;
  std::function<void(const CurveRow&, const TrainRunState&)> on_epoch;
  std::function<void(const PolicyParams&, const TrainRunState&)> on_new_best;
};

/// Thrown when the learner diverges; carries the run state at that point.
class TrainingDiverged : public DivergenceError {
 public:
  TrainingDiverged(const std::string& what, TrainRunState state)
      : DivergenceError(what), state_(std::move(state)) {}
  const TrainRunState& state() const noexcept { return state_; }

 private:
  TrainRunState state_;
};

/// Baselines reported next to the learning curve. Exhaustive search is
/// included while 2^N enumeration stays cheap.
inline std::vector<Policy> reference_baselines(int num_aps) {
  std::vector<Policy> out{Policy::full_reuse(), Policy::tdm()};
  if (num_aps <= 10) out.push_back(Policy::exhaustive());
  return out;
}

inline TrainRunState train(const RunConfig& cfg, const TrainCallbacks& callbacks = {}) {
  cfg.validate();
  TrainRunState state;
  state.validation_seeds = validation_seeds(cfg);
  for (const Policy& p : reference_baselines(cfg.network.num_aps)) {
    state.baselines.push_back({p.name(), evaluate(cfg, p, state.validation_seeds, cfg.harness.threads)});
  }
  if (callbacks.on_start) callbacks.on_start(state);

  DoubleDqn learner(cfg.agent, derive_seed(cfg.seed, SeedStream::kAgent, 0));
  auto next_episode = [&] {
    const std::uint64_t seed = derive_seed(cfg.seed, SeedStream::kTraining, static_cast<std::uint64_t>(state.episodes));
    ++state.episodes;
    run_training_episode(cfg, seed, learner);
  };

  try {
    for (int e = 0; e < cfg.agent.pretrain_episodes; ++e) next_episode();
    for (std::int64_t epoch = 1; epoch <= cfg.harness.epochs; ++epoch) {
      state.epoch = epoch;
      for (int e = 0; e < cfg.harness.episodes_per_epoch; ++e) next_episode();
      CurveRow row;
      row.epoch = epoch;
      row.metrics = evaluate(cfg, Policy::dqn(learner.main()), state.validation_seeds, cfg.harness.threads);
      if (row.metrics.score > state.best_score) {
        state.best_score = row.metrics.score;
        state.best_epoch = epoch;
        state.best_params = learner.main();
        state.best_params.meta.epoch = epoch;
        state.best_params.meta.best_score = row.metrics.score;
        if (callbacks.on_new_best) callbacks.on_new_best(state.best_params, state);
      }
      row.best_score = state.best_score;
      state.curve.push_back(row);
      if (callbacks.on_epoch) callbacks.on_epoch(row, state);
      if (epoch - state.best_epoch >= cfg.harness.patience_epochs) {
        state.early_stopped = true;
        break;
      }
    }
  } catch (const DivergenceError& e) {
    throw TrainingDiverged(std::string(e.what()) + " (epoch " + std::to_string(state.epoch) + ", episode " +
                               std::to_string(state.episodes) + ")",
                           state);
  }
  if (state.best_epoch < 0) state.best_params = learner.main();
  return state;
}

}  // namespace linksched
