#pragma once

// Reference schedulers.

#include <bit>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

#include "linksched/environment.hpp"

namespace linksched {

inline constexpr int kMaxExhaustiveAps = 20;

inline ActivationPattern full_reuse(int num_aps) {
  return ActivationPattern(static_cast<std::size_t>(num_aps), 1);
}

/// Round robin: only AP (t mod N) transmits.
inline ActivationPattern tdm(int num_aps, std::int64_t t) {
  if (num_aps < 1 || t < 0) throw std::invalid_argument("tdm: need num_aps >= 1 and t >= 0");
  ActivationPattern p(static_cast<std::size_t>(num_aps), 0);
  p[static_cast<std::size_t>(t % num_aps)] = 1;
  return p;
}

/// Weighted sum-rate of `pattern` with the same SINR/rate rule as `measure`.
inline double pattern_weighted_sum_rate(const Eigen::MatrixXd& gain, std::span<const int> association,
                                        const ActivationPattern& pattern,
                                        std::span<const double> weights, const LinkBudget& budget) {
  const MeasurementRecord rec = measure(gain, association, pattern, budget);
  double sum = 0.0;
  for (std::size_t i = 0; i < rec.realized_rate_bps.size(); ++i) sum += weights[i] * rec.realized_rate_bps[i];
  return sum;
}

/// Genie-aided centralized search over all 2^N patterns maximizing the
/// weighted sum-rate (weights indexed by UE). Ties prefer more active APs,
/// then the lowest bit encoding (bit k = AP k).
inline ActivationPattern exhaustive_search(const Eigen::MatrixXd& gain, std::span<const int> association,
                                           std::span<const double> weights, const LinkBudget& budget) {
  const int n = static_cast<int>(gain.cols());
  if (n > kMaxExhaustiveAps) {
    throw std::length_error("exhaustive_search: " + std::to_string(n) + " APs exceeds the limit of " +
                            std::to_string(kMaxExhaustiveAps));
  }
  if (n < 1 || gain.rows() != n || association.size() != static_cast<std::size_t>(n) ||
      weights.size() != static_cast<std::size_t>(n)) {
    throw std::invalid_argument("exhaustive_search: inconsistent dimensions");
  }
  // Received power P*G[i][j], indexed by UE then AP, in a flat row-major table.
  const auto un = static_cast<std::size_t>(n);
  std::vector<double> rx(un * un);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) rx[static_cast<std::size_t>(i) * un + static_cast<std::size_t>(j)] = budget.tx_power_w * gain(i, j);
  }
  std::uint32_t best_code = 0;
  double best_value = 0.0;
  int best_active = 0;
  const std::uint32_t patterns = 1u << n;
  for (std::uint32_t code = 1; code < patterns; ++code) {
    double value = 0.0;
    for (int i = 0; i < n; ++i) {
      const int serving = association[static_cast<std::size_t>(i)];
      if (!((code >> serving) & 1u)) continue;
      const double* row = &rx[static_cast<std::size_t>(i) * un];
      double interference = 0.0;
      for (int j = 0; j < n; ++j) {
        if (j != serving && ((code >> j) & 1u)) interference += row[j];
      }
      value += weights[static_cast<std::size_t>(i)] * budget.bandwidth_hz *
               std::log2(1.0 + row[serving] / (interference + budget.noise_w));
    }
    const int active = std::popcount(code);
    if (value > best_value || (value == best_value && active > best_active)) {
      best_value = value;
      best_code = code;
      best_active = active;
    }
  }
  ActivationPattern out(un, 0);
  for (int k = 0; k < n; ++k) out[static_cast<std::size_t>(k)] = static_cast<std::uint8_t>((best_code >> k) & 1u);
  return out;
}

}  // namespace linksched
