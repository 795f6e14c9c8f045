#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace linksched {

/// Raised when a configuration value is out of range. The message names the
/// offending key.
class ConfigError : public std::invalid_argument {
 public:
  ConfigError(const std::string& key, const std::string& what)
      : std::invalid_argument(key + ": " + what), key_(key) {}
  const std::string& key() const noexcept { return key_; }

 private:
  std::string key_;
};

namespace detail {

inline void require(bool ok, const char* key, const char* what) {
  if (!ok) throw ConfigError(key, what);
}

inline void require_finite(double v, const char* key) {
  require(std::isfinite(v), key, "must be finite");
}

}  // namespace detail

/// Physical layer and deployment parameters.
struct NetworkConfig {
  int num_aps = 4;
  double area_side_m = 500.0;
  double min_ap_ap_dist_m = 35.0;
  double ue_drop_radius_m = 100.0;
  double min_ap_ue_dist_m = 10.0;
  double tx_power_dbm = 10.0;
  double noise_psd_dbm_hz = -174.0;
  double bandwidth_hz = 1e7;
  double shadowing_std_db = 7.0;
  double interval_duration_s = 1e-3;
  double doppler_hz = 10.0;
  int num_sinusoids = 8;
  // dual-slope path loss
  double pl0_db = 38.46;
  double pathloss_alpha1 = 2.0;
  double pathloss_alpha2 = 4.0;
  double breakpoint_m = 100.0;
  double ref_dist_m = 1.0;
  // rejection sampling caps
  int ap_placement_attempts = 10000;
  int ue_redraw_attempts = 1000;
  int topology_regenerations = 100;

  void validate() const {
    using detail::require;
    using detail::require_finite;
    require(num_aps >= 1, "num_aps", "must be >= 1");
    for (auto [v, k] : {std::pair{area_side_m, "area_side_m"},
                        {min_ap_ap_dist_m, "min_ap_ap_dist_m"},
                        {ue_drop_radius_m, "ue_drop_radius_m"},
                        {min_ap_ue_dist_m, "min_ap_ue_dist_m"},
                        {tx_power_dbm, "tx_power_dbm"},
                        {noise_psd_dbm_hz, "noise_psd_dbm_hz"},
                        {bandwidth_hz, "bandwidth_hz"},
                        {shadowing_std_db, "shadowing_std_db"},
                        {interval_duration_s, "interval_duration_s"},
                        {doppler_hz, "doppler_hz"},
                        {pl0_db, "pl0_db"},
                        {pathloss_alpha1, "pathloss_alpha1"},
                        {pathloss_alpha2, "pathloss_alpha2"},
                        {breakpoint_m, "breakpoint_m"},
                        {ref_dist_m, "ref_dist_m"}}) {
      require_finite(v, k);
    }
    require(area_side_m > 0, "area_side_m", "must be > 0");
    require(min_ap_ap_dist_m >= 0, "min_ap_ap_dist_m", "must be >= 0");
    require(min_ap_ue_dist_m >= 0, "min_ap_ue_dist_m", "must be >= 0");
    require(min_ap_ue_dist_m < ue_drop_radius_m, "min_ap_ue_dist_m",
            "must be < ue_drop_radius_m");
    require(bandwidth_hz > 0, "bandwidth_hz", "must be > 0");
    require(shadowing_std_db >= 0, "shadowing_std_db", "must be >= 0");
    require(interval_duration_s > 0, "interval_duration_s", "must be > 0");
    require(doppler_hz >= 0, "doppler_hz", "must be >= 0");
    require(num_sinusoids >= 1, "num_sinusoids", "must be >= 1");
    require(ref_dist_m > 0, "ref_dist_m", "must be > 0");
    require(ref_dist_m <= breakpoint_m, "ref_dist_m", "must be <= breakpoint_m");
    require(ap_placement_attempts >= 1, "ap_placement_attempts", "must be >= 1");
    require(ue_redraw_attempts >= 1, "ue_redraw_attempts", "must be >= 1");
    require(topology_regenerations >= 1, "topology_regenerations", "must be >= 1");
  }
};

/// Agent state, observation delays and learning hyperparameters.
struct AgentConfig {
  double ema_beta = 0.01;
  double rate_floor_bps = 1e3;
  int snapshot_period = 10;
  int local_delay = 4;
  int remote_delay = 20;

  int hidden_units = 128;
  double gamma = 0.9;
  double learning_rate = 1e-3;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  double huber_delta = 1.0;
  int replay_capacity = 10000;
  int batch_slots = 64;
  int train_every = 20;
  int target_sync_every = 100;
  int pretrain_episodes = 100;
  int epsilon_decay_episodes = 50;
  double final_epsilon = 0.01;

  void validate() const {
    using detail::require;
    require(std::isfinite(ema_beta) && ema_beta > 0 && ema_beta <= 1, "ema_beta",
            "must be in (0, 1]");
    require(std::isfinite(rate_floor_bps) && rate_floor_bps > 0, "rate_floor_bps",
            "must be > 0");
    require(snapshot_period >= 1, "snapshot_period", "must be >= 1");
    require(local_delay >= 0, "local_delay", "must be >= 0");
    require(remote_delay >= 0, "remote_delay", "must be >= 0");
    require(hidden_units >= 1, "hidden_units", "must be >= 1");
    require(std::isfinite(gamma) && gamma >= 0 && gamma < 1, "gamma", "must be in [0, 1)");
    require(std::isfinite(learning_rate) && learning_rate > 0, "learning_rate",
            "must be > 0");
    require(adam_beta1 >= 0 && adam_beta1 < 1, "adam_beta1", "must be in [0, 1)");
    require(adam_beta2 >= 0 && adam_beta2 < 1, "adam_beta2", "must be in [0, 1)");
    require(std::isfinite(adam_epsilon) && adam_epsilon > 0, "adam_epsilon", "must be > 0");
    require(std::isfinite(huber_delta) && huber_delta > 0, "huber_delta", "must be > 0");
    require(replay_capacity >= 1, "replay_capacity", "must be >= 1");
    require(batch_slots >= 1, "batch_slots", "must be >= 1");
    require(train_every >= 1, "train_every", "must be >= 1");
    require(target_sync_every >= 1, "target_sync_every", "must be >= 1");
    require(pretrain_episodes >= 0, "pretrain_episodes", "must be >= 0");
    require(epsilon_decay_episodes >= 0, "epsilon_decay_episodes", "must be >= 0");
    require(final_epsilon >= 0 && final_epsilon <= 1, "final_epsilon", "must be in [0, 1]");
  }
};

/// Episode, epoch, validation and scoring parameters.
struct HarnessConfig {
  int intervals_per_episode = 400;
  int warmup_intervals = 200;
  int epochs = 2000;
  int episodes_per_epoch = 50;
  int validation_envs = 50;
  bool calibrate_validation = true;
  int calibration_reference_envs = 1000;
  double calibration_tolerance = 0.05;
  int calibration_max_attempts = 1000;
  int eval_envs = 200;
  double score_avg_weight = 1.0;
  double score_p5_weight = 3.0;
  int patience_epochs = 200;
  int threads = 1;

  void validate() const {
    using detail::require;
    require(intervals_per_episode >= 1, "intervals_per_episode", "must be >= 1");
    require(warmup_intervals >= 0 && warmup_intervals < intervals_per_episode,
            "warmup_intervals", "must be in [0, intervals_per_episode)");
    require(epochs >= 0, "epochs", "must be >= 0");
    require(episodes_per_epoch >= 1, "episodes_per_epoch", "must be >= 1");
    require(validation_envs >= 1, "validation_envs", "must be >= 1");
    require(calibration_reference_envs >= 1, "calibration_reference_envs", "must be >= 1");
    require(validation_envs <= calibration_reference_envs, "validation_envs",
            "must be <= calibration_reference_envs");
    require(std::isfinite(calibration_tolerance) && calibration_tolerance >= 0,
            "calibration_tolerance", "must be >= 0");
    require(calibration_max_attempts >= 1, "calibration_max_attempts", "must be >= 1");
    require(eval_envs >= 1, "eval_envs", "must be >= 1");
    require(std::isfinite(score_avg_weight) && score_avg_weight >= 0, "score_avg_weight",
            "must be >= 0");
    require(std::isfinite(score_p5_weight) && score_p5_weight >= 0, "score_p5_weight",
            "must be >= 0");
    require(patience_epochs >= 1, "patience_epochs", "must be >= 1");
    require(threads >= 1, "threads", "must be >= 1");
  }
};

struct RunConfig {
  NetworkConfig network;
  AgentConfig agent;
  HarnessConfig harness;
  std::uint64_t seed = 1;
  std::string out_dir = "out";

  void validate() const {
    network.validate();
    agent.validate();
    harness.validate();
    detail::require(!out_dir.empty(), "out_dir", "must not be empty");
  }
};

}  // namespace linksched
