#pragma once

// Per-agent state: neighbor sets, long-term rates and weights, delayed
// measurement snapshots, observation vectors and rewards.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "linksched/config.hpp"
#include "linksched/environment.hpp"

namespace linksched {

inline constexpr int kNoNeighbor = -1;
inline constexpr std::size_t kNeighborsPerSide = 3;
inline constexpr std::size_t kNeighborSlots = 2 * kNeighborsPerSide;

/// Incoming interferers first, then outgoing victims; deduplicated and padded
/// with kNoNeighbor.
using NeighborSet = std::array<int, kNeighborSlots>;

namespace detail {

/// Indices of the `k` largest scores excluding `self`; ties go to the lower index.
inline std::vector<int> top_k_excluding(std::span<const double> score, int self, std::size_t k) {
  std::vector<int> idx;
  for (int j = 0; j < static_cast<int>(score.size()); ++j) {
    if (j != self) idx.push_back(j);
  }
  std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) {
    return score[static_cast<std::size_t>(a)] > score[static_cast<std::size_t>(b)];
  });
  if (idx.size() > k) idx.resize(k);
  return idx;
}

}  // namespace detail

inline std::vector<NeighborSet> compute_neighbors(const Topology& topo) {
  const int n = topo.num_aps();
  const std::vector<int> ue_of = topo.ue_of_ap();
  std::vector<NeighborSet> out(static_cast<std::size_t>(n));
  std::vector<double> score(static_cast<std::size_t>(n));
  for (int agent = 0; agent < n; ++agent) {
    // incoming: interference from AP j at this agent's UE
    const int own_ue = ue_of[static_cast<std::size_t>(agent)];
    for (int j = 0; j < n; ++j) score[static_cast<std::size_t>(j)] = topo.longterm_gain_db(own_ue, j);
    const auto incoming = detail::top_k_excluding(score, agent, kNeighborsPerSide);
    // outgoing: interference from this agent at AP j's UE
    for (int j = 0; j < n; ++j) {
      score[static_cast<std::size_t>(j)] = topo.longterm_gain_db(ue_of[static_cast<std::size_t>(j)], agent);
    }
    const auto outgoing = detail::top_k_excluding(score, agent, kNeighborsPerSide);

    NeighborSet set;
    set.fill(kNoNeighbor);
    std::size_t used = 0;
    for (const auto* side : {&incoming, &outgoing}) {
      for (int j : *side) {
        if (std::find(set.begin(), set.begin() + static_cast<std::ptrdiff_t>(used), j) ==
            set.begin() + static_cast<std::ptrdiff_t>(used)) {
          set[used++] = j;
        }
      }
    }
    out[static_cast<std::size_t>(agent)] = set;
  }
  return out;
}

/// Long-term average rate and the derived proportional-fair weight.
struct AgentState {
  double ema_rate_bps = 0.0;
  double weight = 0.0;

  static AgentState initial(double rate_bps, double rate_floor_bps) {
    AgentState s;
    s.ema_rate_bps = std::max(rate_floor_bps, rate_bps);
    s.weight = 1.0 / s.ema_rate_bps;
    return s;
  }

  void update(double realized_rate_bps, double beta, double rate_floor_bps) {
    ema_rate_bps = std::max(rate_floor_bps, (1.0 - beta) * ema_rate_bps + beta * realized_rate_bps);
    weight = 1.0 / ema_rate_bps;
  }
};

/// Periodic, delayed visibility of measurement snapshots.
struct DelaySchedule {
  int period = 10;
  int local_delay = 4;
  int remote_delay = 20;

  static DelaySchedule from(const AgentConfig& cfg) {
    return {cfg.snapshot_period, cfg.local_delay, cfg.remote_delay};
  }

  bool is_capture(std::int64_t t) const { return t >= 0 && t % period == 0; }

  /// Capture interval visible at `t` under `delay`, or nullopt before the
  /// first capture has become visible.
  std::optional<std::int64_t> visible_capture(std::int64_t t, int delay) const {
    if (t < delay) return std::nullopt;
    return static_cast<std::int64_t>(period) * ((t - delay) / period);
  }
  std::optional<std::int64_t> visible_local(std::int64_t t) const { return visible_capture(t, local_delay); }
  std::optional<std::int64_t> visible_remote(std::int64_t t) const { return visible_capture(t, remote_delay); }
};

/// What a UE reported at a capture interval.
struct Snapshot {
  std::int64_t interval = 0;
  double sinr_linear = 0.0;
  double weight = 0.0;
};

/// Captured snapshots of every agent's UE for one episode.
class MeasurementHistory {
 public:
  MeasurementHistory() = default;
  explicit MeasurementHistory(DelaySchedule schedule) : schedule_(schedule) {}

  const DelaySchedule& schedule() const { return schedule_; }

  /// Stores the snapshot for interval t when t is a capture interval.
  void ingest(const MeasurementRecord& record, std::span<const AgentState> agents,
              std::span<const int> ue_of_ap) {
    if (!schedule_.is_capture(record.interval)) return;
    std::vector<Snapshot> snap(agents.size());
    for (std::size_t a = 0; a < agents.size(); ++a) {
      snap[a] = {record.interval, record.sinr_linear[static_cast<std::size_t>(ue_of_ap[a])],
                 agents[a].weight};
    }
    const auto slot = static_cast<std::size_t>(record.interval / schedule_.period);
    if (captures_.size() <= slot) captures_.resize(slot + 1);
    captures_[slot] = std::move(snap);
  }

  std::optional<Snapshot> local(std::int64_t t, int agent) const {
    return lookup(schedule_.visible_local(t), agent);
  }
  std::optional<Snapshot> remote(std::int64_t t, int agent) const {
    return lookup(schedule_.visible_remote(t), agent);
  }

 private:
  std::optional<Snapshot> lookup(std::optional<std::int64_t> capture, int agent) const {
    if (!capture) return std::nullopt;
    const auto slot = static_cast<std::size_t>(*capture / schedule_.period);
    if (slot >= captures_.size() || captures_[slot].empty()) return std::nullopt;
    return captures_[slot][static_cast<std::size_t>(agent)];
  }

  DelaySchedule schedule_;
  std::vector<std::vector<Snapshot>> captures_;
};

// Observation layout: [own sinr, own log-weight] then six neighbor pairs.
inline constexpr std::string_view kObservationLayoutVersion = "v1";
inline constexpr std::size_t kObservationSize = 2 + 2 * kNeighborSlots;
inline constexpr double kObservationSentinel = -1.0;

using Observation = std::array<double, kObservationSize>;

struct ObservationNormalization {
  double sinr_min_db = -20.0;
  double sinr_max_db = 60.0;
  double log_weight_min = -3.0;
  double log_weight_max = 3.0;
  double weight_scale = 1e6;  // weight in 1/Mbps before log10

  static double to_unit(double v, double lo, double hi) {
    const double c = std::clamp(v, lo, hi);
    return 2.0 * (c - lo) / (hi - lo) - 1.0;
  }

  double sinr(double sinr_linear) const {
    // log10(0) = -inf clamps to the lower bound
    const double db = sinr_linear > 0.0 ? linear_to_db(sinr_linear) : sinr_min_db;
    return to_unit(db, sinr_min_db, sinr_max_db);
  }

  double weight(double w) const {
    const double lw = w > 0.0 ? std::log10(w * weight_scale) : log_weight_min;
    return to_unit(lw, log_weight_min, log_weight_max);
  }

  bool operator==(const ObservationNormalization&) const = default;
};

inline Observation build_observation(int agent, const NeighborSet& neighbors,
                                     const MeasurementHistory& history, std::int64_t t,
                                     const ObservationNormalization& norm = {}) {
  Observation obs;
  obs.fill(kObservationSentinel);
  if (auto own = history.local(t, agent)) {
    obs[0] = norm.sinr(own->sinr_linear);
    obs[1] = norm.weight(own->weight);
  }
  for (std::size_t k = 0; k < kNeighborSlots; ++k) {
    const int nb = neighbors[k];
    if (nb == kNoNeighbor) continue;
    if (auto snap = history.remote(t, nb)) {
      obs[2 + 2 * k] = norm.sinr(snap->sinr_linear);
      obs[3 + 2 * k] = norm.weight(snap->weight);
    }
  }
  return obs;
}

/// Estimated instantaneous rate over long-term rate.
inline double pf_ratio(double ema_rate_bps, double sinr_linear, double bandwidth_hz) {
  return bandwidth_hz * std::log2(1.0 + sinr_linear) / ema_rate_bps;
}

inline double weighted_sum_rate(std::span<const double> rates_bps, std::span<const double> weights) {
  double sum = 0.0;
  for (std::size_t i = 0; i < rates_bps.size(); ++i) sum += weights[i] * rates_bps[i];
  return sum;
}

/// Shared weighted sum-rate when any AP transmits. When all are silent, the
/// agent with the largest PF ratio (lowest index on ties) gets its negation.
/// `weights` are indexed by UE, `pf_ratios` by agent.
inline std::vector<double> compute_reward(const MeasurementRecord& record,
                                          std::span<const double> weights,
                                          std::span<const double> pf_ratios) {
  const std::size_t n = record.activation.size();
  std::vector<double> reward(n, 0.0);
  const bool any_active = std::any_of(record.activation.begin(), record.activation.end(),
                                      [](std::uint8_t a) { return a != 0; });
  if (any_active) {
    std::fill(reward.begin(), reward.end(), weighted_sum_rate(record.realized_rate_bps, weights));
    return reward;
  }
  std::size_t best = 0;
  for (std::size_t a = 1; a < pf_ratios.size(); ++a) {
    if (pf_ratios[a] > pf_ratios[best]) best = a;
  }
  if (!pf_ratios.empty()) reward[best] = -pf_ratios[best];
  return reward;
}

}  // namespace linksched
