#pragma once

// Network realization and physical layer: placement, association, path loss,
// shadowing, sum-of-sinusoids fading, and per-interval SINR / rate.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "linksched/config.hpp"
#include "linksched/rng.hpp"

namespace linksched {

/// Per-AP on/off decisions for one interval (1 = transmit).
using ActivationPattern = std::vector<std::uint8_t>;

class PlacementError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Point {
  double x = 0.0;
  double y = 0.0;
};

inline double distance(Point a, Point b) { return std::hypot(a.x - b.x, a.y - b.y); }

inline double dbm_to_watts(double dbm) { return std::pow(10.0, (dbm - 30.0) / 10.0); }
inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }
inline double linear_to_db(double x) { return 10.0 * std::log10(x); }

/// Dual-slope path loss in dB.
inline double path_loss_db(double d, const NetworkConfig& cfg) {
  if (!(d > 0.0) || !std::isfinite(d)) {
    throw std::domain_error("path_loss_db: distance must be positive and finite");
  }
  auto near = [&](double x) {
    return cfg.pl0_db +
           10.0 * cfg.pathloss_alpha1 * std::log10(std::max(x, cfg.ref_dist_m) / cfg.ref_dist_m);
  };
  if (d <= cfg.breakpoint_m) return near(d);
  return near(cfg.breakpoint_m) + 10.0 * cfg.pathloss_alpha2 * std::log10(d / cfg.breakpoint_m);
}

inline double noise_power_w(const NetworkConfig& cfg) {
  return dbm_to_watts(cfg.noise_psd_dbm_hz + 10.0 * std::log10(cfg.bandwidth_hz));
}

/// Constants needed to turn linear channel gains into rates.
struct LinkBudget {
  double tx_power_w = 0.0;
  double noise_w = 0.0;
  double bandwidth_hz = 0.0;

  static LinkBudget from(const NetworkConfig& cfg) {
    return {dbm_to_watts(cfg.tx_power_dbm), noise_power_w(cfg), cfg.bandwidth_hz};
  }
};

/// A network realization. Gains are indexed [ue][ap].
struct Topology {
  std::vector<Point> ap_positions;
  std::vector<Point> ue_positions;
  std::vector<int> association;  // serving AP per UE
  Eigen::MatrixXd shadowing_db;
  Eigen::MatrixXd longterm_gain_db;

  int num_aps() const { return static_cast<int>(ap_positions.size()); }

  /// UE served by each AP (inverse of the association bijection).
  std::vector<int> ue_of_ap() const {
    std::vector<int> inv(association.size(), -1);
    for (std::size_t ue = 0; ue < association.size(); ++ue) {
      inv[static_cast<std::size_t>(association[ue])] = static_cast<int>(ue);
    }
    return inv;
  }
};

/// I.i.d. log-normal shadowing draws in dB, one per directed link.
inline Eigen::MatrixXd draw_shadowing_db(const NetworkConfig& cfg, Rng& rng, int rows,
                                         int cols) {
  std::normal_distribution<double> normal(0.0, cfg.shadowing_std_db);
  Eigen::MatrixXd out(rows, cols);
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) out(i, j) = normal(rng);
  }
  return out;
}

namespace detail {

inline std::vector<Point> place_aps(const NetworkConfig& cfg, Rng& rng) {
  std::uniform_real_distribution<double> coord(0.0, cfg.area_side_m);
  std::vector<Point> aps;
  aps.reserve(static_cast<std::size_t>(cfg.num_aps));
  for (int k = 0; k < cfg.num_aps; ++k) {
    bool placed = false;
    for (int attempt = 0; attempt < cfg.ap_placement_attempts && !placed; ++attempt) {
      Point p{coord(rng), coord(rng)};
      placed = true;
      for (const Point& q : aps) {
        if (distance(p, q) < cfg.min_ap_ap_dist_m) {
          placed = false;
          break;
        }
      }
      if (placed) aps.push_back(p);
    }
    if (!placed) {
      throw PlacementError("could not place AP " + std::to_string(k) + " of " +
                           std::to_string(cfg.num_aps) + " with minimum spacing " +
                           std::to_string(cfg.min_ap_ap_dist_m) + " m after " +
                           std::to_string(cfg.ap_placement_attempts) + " attempts");
    }
  }
  return aps;
}

/// Uniform over the annulus [min_ap_ue_dist, ue_drop_radius] around `center`.
inline Point drop_ue(Point center, const NetworkConfig& cfg, Rng& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double r0 = cfg.min_ap_ue_dist_m;
  const double r1 = cfg.ue_drop_radius_m;
  const double r = std::sqrt(unit(rng) * (r1 * r1 - r0 * r0) + r0 * r0);
  const double angle = 2.0 * std::numbers::pi * unit(rng);
  return {center.x + r * std::cos(angle), center.y + r * std::sin(angle)};
}

}  // namespace detail

/// Drops APs and UEs, draws shadowing, and associates each UE with the AP of
/// strongest long-term gain. UE k is dropped around AP k; if another AP is
/// stronger, UE k and its shadowing row are redrawn.
inline Topology generate_topology(const NetworkConfig& cfg, Rng& rng) {
  cfg.validate();
  const int n = cfg.num_aps;
  for (int regen = 0; regen < cfg.topology_regenerations; ++regen) {
    Topology topo;
    topo.ap_positions = detail::place_aps(cfg, rng);
    topo.ue_positions.resize(static_cast<std::size_t>(n));
    topo.association.resize(static_cast<std::size_t>(n));
    topo.shadowing_db.resize(n, n);
    topo.longterm_gain_db.resize(n, n);

    bool ok = true;
    for (int ue = 0; ue < n && ok; ++ue) {
      bool associated = false;
      for (int attempt = 0; attempt < cfg.ue_redraw_attempts && !associated; ++attempt) {
        const Point pos = detail::drop_ue(topo.ap_positions[static_cast<std::size_t>(ue)], cfg, rng);
        const Eigen::MatrixXd shadow = draw_shadowing_db(cfg, rng, 1, n);
        Eigen::RowVectorXd gain(n);
        for (int ap = 0; ap < n; ++ap) {
          gain(ap) = -path_loss_db(distance(pos, topo.ap_positions[static_cast<std::size_t>(ap)]), cfg) +
                     shadow(0, ap);
        }
        associated = true;
        for (int ap = 0; ap < n; ++ap) {
          if (gain(ap) > gain(ue)) {
            associated = false;
            break;
          }
        }
        if (associated) {
          topo.ue_positions[static_cast<std::size_t>(ue)] = pos;
          topo.association[static_cast<std::size_t>(ue)] = ue;
          topo.shadowing_db.row(ue) = shadow.row(0);
          topo.longterm_gain_db.row(ue) = gain;
        }
      }
      ok = associated;
    }
    if (ok) return topo;
  }
  throw PlacementError("could not associate every UE with its dropping AP after " +
                       std::to_string(cfg.topology_regenerations) + " topology regenerations");
}

/// Sum-of-sinusoids flat Rayleigh fading for every directed AP->UE link.
/// h(t) = M^{-1/2} sum_m exp(j(2 pi f_d cos(theta_m) t dt + phi_m)).
class FadingChannel {
 public:
  FadingChannel() = default;

  FadingChannel(int num_ues, int num_aps, const NetworkConfig& cfg, Rng& rng)
      : num_ues_(num_ues),
        num_aps_(num_aps),
        num_sinusoids_(cfg.num_sinusoids),
        interval_s_(cfg.interval_duration_s) {
    std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
    const auto links = static_cast<std::size_t>(num_ues) * static_cast<std::size_t>(num_aps);
    const auto total = links * static_cast<std::size_t>(num_sinusoids_);
    omega_.resize(total);
    phase_.resize(total);
    for (std::size_t k = 0; k < total; ++k) {
      const double theta = angle(rng);
      const double phi = angle(rng);
      omega_[k] = 2.0 * std::numbers::pi * cfg.doppler_hz * std::cos(theta);
      phase_[k] = phi;
    }
  }

  /// Builds a single-link channel from explicit arrival angles and phases.
  static FadingChannel from_angles(std::span<const double> theta, std::span<const double> phi,
                                   double doppler_hz, double interval_s) {
    if (theta.size() != phi.size() || theta.empty()) {
      throw std::invalid_argument("FadingChannel::from_angles: mismatched or empty tables");
    }
    FadingChannel ch;
    ch.num_ues_ = 1;
    ch.num_aps_ = 1;
    ch.num_sinusoids_ = static_cast<int>(theta.size());
    ch.interval_s_ = interval_s;
    for (std::size_t m = 0; m < theta.size(); ++m) {
      ch.omega_.push_back(2.0 * std::numbers::pi * doppler_hz * std::cos(theta[m]));
      ch.phase_.push_back(phi[m]);
    }
    return ch;
  }

  int num_ues() const { return num_ues_; }
  int num_aps() const { return num_aps_; }

  /// |h|^2 for link (ue, ap) at interval t.
  double power(int ue, int ap, std::int64_t t) const {
    const double time = static_cast<double>(t) * interval_s_;
    const std::size_t base =
        (static_cast<std::size_t>(ue) * static_cast<std::size_t>(num_aps_) +
         static_cast<std::size_t>(ap)) *
        static_cast<std::size_t>(num_sinusoids_);
    double re = 0.0;
    double im = 0.0;
    for (int m = 0; m < num_sinusoids_; ++m) {
      const double arg = omega_[base + static_cast<std::size_t>(m)] * time +
                         phase_[base + static_cast<std::size_t>(m)];
      re += std::cos(arg);
      im += std::sin(arg);
    }
    return (re * re + im * im) / static_cast<double>(num_sinusoids_);
  }

  /// Matrix of |h|^2 indexed [ue][ap] at interval t.
  Eigen::MatrixXd power_gains(std::int64_t t) const {
    Eigen::MatrixXd out(num_ues_, num_aps_);
    for (int i = 0; i < num_ues_; ++i) {
      for (int j = 0; j < num_aps_; ++j) out(i, j) = power(i, j, t);
    }
    return out;
  }

 private:
  int num_ues_ = 0;
  int num_aps_ = 0;
  int num_sinusoids_ = 0;
  double interval_s_ = 0.0;
  std::vector<double> omega_;  // rad/s per (link, sinusoid)
  std::vector<double> phase_;
};

/// Per-UE measurements for one interval.
struct MeasurementRecord {
  std::int64_t interval = 0;
  ActivationPattern activation;
  std::vector<double> desired_power_w;
  std::vector<double> interference_power_w;
  std::vector<double> sinr_linear;
  std::vector<double> realized_rate_bps;
};

/// Linear received-power gain (long-term x fading) indexed [ue][ap].
inline Eigen::MatrixXd received_gain(const Topology& topo, const Eigen::MatrixXd& fading_power) {
  return topo.longterm_gain_db.unaryExpr([](double g) { return db_to_linear(g); })
      .cwiseProduct(fading_power);
}

/// SINR and rate of every UE under `activation`. The serving link's SINR is
/// reported even when its AP is silent; its realized rate is then zero.
inline MeasurementRecord measure(const Eigen::MatrixXd& gain, std::span<const int> association,
                                 const ActivationPattern& activation, const LinkBudget& budget,
                                 std::int64_t interval = 0) {
  const auto n_ue = static_cast<std::size_t>(gain.rows());
  if (activation.size() != static_cast<std::size_t>(gain.cols()) || association.size() != n_ue) {
    throw std::invalid_argument("measure: activation length " + std::to_string(activation.size()) +
                                " does not match " + std::to_string(gain.cols()) + " APs");
  }
  MeasurementRecord rec;
  rec.interval = interval;
  rec.activation = activation;
  rec.desired_power_w.resize(n_ue);
  rec.interference_power_w.resize(n_ue);
  rec.sinr_linear.resize(n_ue);
  rec.realized_rate_bps.resize(n_ue);
  for (std::size_t i = 0; i < n_ue; ++i) {
    const int serving = association[i];
    const double s = budget.tx_power_w * gain(static_cast<Eigen::Index>(i), serving);
    double interference = 0.0;
    for (Eigen::Index j = 0; j < gain.cols(); ++j) {
      if (j != serving && activation[static_cast<std::size_t>(j)]) {
        interference += budget.tx_power_w * gain(static_cast<Eigen::Index>(i), j);
      }
    }
    const double sinr = s / (interference + budget.noise_w);
    rec.desired_power_w[i] = s;
    rec.interference_power_w[i] = interference;
    rec.sinr_linear[i] = sinr;
    rec.realized_rate_bps[i] =
        activation[static_cast<std::size_t>(serving)] ? budget.bandwidth_hz * std::log2(1.0 + sinr) : 0.0;
  }
  return rec;
}

/// One scheduling interval on a realized topology.
inline MeasurementRecord step_interval(const Topology& topo, const Eigen::MatrixXd& fading_power,
                                       const ActivationPattern& activation,
                                       const NetworkConfig& cfg, std::int64_t interval = 0) {
  if (activation.size() != static_cast<std::size_t>(topo.num_aps())) {
    throw std::invalid_argument("step_interval: activation length " +
                                std::to_string(activation.size()) + " != num_aps " +
                                std::to_string(topo.num_aps()));
  }
  return measure(received_gain(topo, fading_power), topo.association, activation,
                 LinkBudget::from(cfg), interval);
}

/// A topology together with its fading process, generated from one seed.
class Environment {
 public:
  Environment(const NetworkConfig& cfg, std::uint64_t seed) : cfg_(cfg), budget_(LinkBudget::from(cfg)) {
    Rng rng(seed);
    topology_ = generate_topology(cfg, rng);
    fading_ = FadingChannel(cfg.num_aps, cfg.num_aps, cfg, rng);
    longterm_linear_ =
        topology_.longterm_gain_db.unaryExpr([](double g) { return db_to_linear(g); });
  }

  const Topology& topology() const { return topology_; }
  const FadingChannel& fading() const { return fading_; }
  const LinkBudget& budget() const { return budget_; }
  const NetworkConfig& config() const { return cfg_; }
  int num_aps() const { return topology_.num_aps(); }

  Eigen::MatrixXd gains(std::int64_t t) const {
    return longterm_linear_.cwiseProduct(fading_.power_gains(t));
  }

  MeasurementRecord step(const ActivationPattern& activation, std::int64_t t) const {
    return measure(gains(t), topology_.association, activation, budget_, t);
  }

 private:
  NetworkConfig cfg_;
  LinkBudget budget_;
  Topology topology_;
  FadingChannel fading_;
  Eigen::MatrixXd longterm_linear_;
};

}  // namespace linksched
