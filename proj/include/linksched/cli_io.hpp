#pragma once

// Run configuration file, result files, run manifest, and the command
// entry points wrapped by the CLI.

#include <chrono>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <sstream>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "json.hpp"
#include "linksched/config.hpp"
#include "linksched/dqn.hpp"
#include "linksched/harness.hpp"

namespace linksched {

inline constexpr std::string_view kArtifactVersion = "1.0.0";

// ---------------------------------------------------------------------------
// Config file: one flat JSON object. Omitted keys keep their defaults.

namespace detail {

using FieldPtr = std::variant<int*, double*, bool*, std::uint64_t*, std::string*>;

struct Field {
  const char* key;
  FieldPtr ptr;
};

inline std::vector<Field> config_fields(RunConfig& c) {
  NetworkConfig& n = c.network;
  AgentConfig& a = c.agent;
  HarnessConfig& h = c.harness;
  return {
      {"num_aps", &n.num_aps},
      {"area_side_m", &n.area_side_m},
      {"min_ap_ap_dist_m", &n.min_ap_ap_dist_m},
      {"ue_drop_radius_m", &n.ue_drop_radius_m},
      {"min_ap_ue_dist_m", &n.min_ap_ue_dist_m},
      {"tx_power_dbm", &n.tx_power_dbm},
      {"noise_psd_dbm_hz", &n.noise_psd_dbm_hz},
      {"bandwidth_hz", &n.bandwidth_hz},
      {"shadowing_std_db", &n.shadowing_std_db},
      {"interval_duration_s", &n.interval_duration_s},
      {"doppler_hz", &n.doppler_hz},
      {"num_sinusoids", &n.num_sinusoids},
      {"pl0_db", &n.pl0_db},
      {"pathloss_alpha1", &n.pathloss_alpha1},
      {"pathloss_alpha2", &n.pathloss_alpha2},
      {"breakpoint_m", &n.breakpoint_m},
      {"ref_dist_m", &n.ref_dist_m},
      {"ap_placement_attempts", &n.ap_placement_attempts},
      {"ue_redraw_attempts", &n.ue_redraw_attempts},
      {"topology_regenerations", &n.topology_regenerations},
      {"ema_beta", &a.ema_beta},
      {"rate_floor_bps", &a.rate_floor_bps},
      {"snapshot_period", &a.snapshot_period},
      {"local_delay", &a.local_delay},
      {"remote_delay", &a.remote_delay},
      {"hidden_units", &a.hidden_units},
      {"gamma", &a.gamma},
      {"learning_rate", &a.learning_rate},
      {"adam_beta1", &a.adam_beta1},
      {"adam_beta2", &a.adam_beta2},
      {"adam_epsilon", &a.adam_epsilon},
      {"huber_delta", &a.huber_delta},
      {"replay_capacity", &a.replay_capacity},
      {"batch_slots", &a.batch_slots},
      {"train_every", &a.train_every},
      {"target_sync_every", &a.target_sync_every},
      {"pretrain_episodes", &a.pretrain_episodes},
      {"epsilon_decay_episodes", &a.epsilon_decay_episodes},
      {"final_epsilon", &a.final_epsilon},
      {"intervals_per_episode", &h.intervals_per_episode},
      {"warmup_intervals", &h.warmup_intervals},
      {"epochs", &h.epochs},
      {"episodes_per_epoch", &h.episodes_per_epoch},
      {"validation_envs", &h.validation_envs},
      {"calibrate_validation", &h.calibrate_validation},
      {"calibration_reference_envs", &h.calibration_reference_envs},
      {"calibration_tolerance", &h.calibration_tolerance},
      {"calibration_max_attempts", &h.calibration_max_attempts},
      {"eval_envs", &h.eval_envs},
      {"score_avg_weight", &h.score_avg_weight},
      {"score_p5_weight", &h.score_p5_weight},
      {"patience_epochs", &h.patience_epochs},
      {"threads", &h.threads},
      {"seed", &c.seed},
      {"out_dir", &c.out_dir},
  };
}

inline void assign_field(const Field& f, const nlohmann::json& v) {
  const std::string key = f.key;
  std::visit(
      [&](auto* p) {
        using T = std::remove_pointer_t<decltype(p)>;
        if constexpr (std::is_same_v<T, bool>) {
          if (!v.is_boolean()) throw ConfigError(key, "expected a boolean");
          *p = v.get<bool>();
        } else if constexpr (std::is_same_v<T, std::string>) {
          if (!v.is_string()) throw ConfigError(key, "expected a string");
          *p = v.get<std::string>();
        } else if constexpr (std::is_same_v<T, std::uint64_t>) {
          if (!v.is_number_unsigned()) throw ConfigError(key, "expected a non-negative integer");
          *p = v.get<std::uint64_t>();
        } else if constexpr (std::is_same_v<T, int>) {
          if (!v.is_number_integer()) throw ConfigError(key, "expected an integer");
          const auto x = v.get<std::int64_t>();
          if (x < std::numeric_limits<int>::min() || x > std::numeric_limits<int>::max()) {
            throw ConfigError(key, "integer out of range");
          }
          *p = static_cast<int>(x);
        } else {
          if (!v.is_number()) throw ConfigError(key, "expected a number");
          *p = v.get<double>();
        }
      },
      f.ptr);
}

}  // namespace detail

/// Parses config text. Empty text yields the defaults. Unknown keys and
/// out-of-range values raise ConfigError naming the key.
inline RunConfig parse_config_text(std::string_view text) {
  RunConfig cfg;
  if (text.find_first_not_of(" \t\r\n") == std::string_view::npos) {
    cfg.validate();
    return cfg;
  }
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("<config>", std::string("parse error: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("<config>", "top level must be an object");
  auto fields = detail::config_fields(cfg);
  for (const auto& [key, value] : j.items()) {
    auto it = std::find_if(fields.begin(), fields.end(), [&](const detail::Field& f) { return key == f.key; });
    if (it == fields.end()) throw ConfigError(key, "unknown key");
    detail::assign_field(*it, value);
  }
  cfg.validate();
  return cfg;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path.string() + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline RunConfig parse_config(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw std::runtime_error("config file '" + path.string() + "' not found");
  return parse_config_text(read_file(path));
}

inline nlohmann::ordered_json config_to_json(const RunConfig& cfg) {
  RunConfig copy = cfg;
  nlohmann::ordered_json j;
  for (const auto& f : detail::config_fields(copy)) {
    std::visit([&](auto* p) { j[f.key] = *p; }, f.ptr);
  }
  return j;
}

// ---------------------------------------------------------------------------
// Files

inline std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

/// Writes via a temporary file and rename.
inline void write_file_atomic(const std::filesystem::path& path, std::string_view content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write '" + tmp.string() + "'");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw std::runtime_error("write failed for '" + tmp.string() + "'");
  }
  std::filesystem::rename(tmp, path);
}

inline void save_model(const std::filesystem::path& path, const PolicyParams& p) {
  write_file_atomic(path, serialize(p));
}

inline PolicyParams load_model(const std::filesystem::path& path) { return deserialize(read_file(path)); }

inline std::string csv_number(double v) { return detail::format_double(v); }

inline std::string learning_curve_header(const std::vector<BaselineReference>& baselines) {
  std::string h = "epoch,avg_rate_bps,p5_rate_bps,score,best_score";
  for (const auto& b : baselines) {
    h += "," + b.name + "_avg_rate_bps," + b.name + "_p5_rate_bps," + b.name + "_score";
  }
  return h + "\n";
}

inline std::string learning_curve_row(const CurveRow& row, const std::vector<BaselineReference>& baselines) {
  std::string s = std::to_string(row.epoch) + "," + csv_number(row.metrics.avg_rate_bps) + "," +
                  csv_number(row.metrics.p5_rate_bps) + "," + csv_number(row.metrics.score) + "," +
                  csv_number(row.best_score);
  for (const auto& b : baselines) {
    s += "," + csv_number(b.metrics.avg_rate_bps) + "," + csv_number(b.metrics.p5_rate_bps) + "," +
         csv_number(b.metrics.score);
  }
  return s + "\n";
}

/// One row of an evaluation report.
struct EvaluationRow {
  std::string policy;
  int num_aps = 0;
  int envs = 0;
  EvalMetrics metrics;
};

inline std::string evaluation_csv(const std::vector<EvaluationRow>& rows) {
  std::string s = "policy,num_aps,envs,avg_rate_bps,sum_rate_bps,p5_rate_bps,score\n";
  for (const auto& r : rows) {
    s += r.policy + "," + std::to_string(r.num_aps) + "," + std::to_string(r.envs) + "," +
         csv_number(r.metrics.avg_rate_bps) + "," +
         csv_number(r.metrics.avg_rate_bps * static_cast<double>(r.num_aps)) + "," +
         csv_number(r.metrics.p5_rate_bps) + "," + csv_number(r.metrics.score) + "\n";
  }
  return s;
}

inline std::string evaluation_json(const std::vector<EvaluationRow>& rows) {
  nlohmann::ordered_json j = nlohmann::ordered_json::array();
  for (const auto& r : rows) {
    j.push_back({{"policy", r.policy},
                 {"num_aps", r.num_aps},
                 {"envs", r.envs},
                 {"avg_rate_bps", r.metrics.avg_rate_bps},
                 {"sum_rate_bps", r.metrics.avg_rate_bps * static_cast<double>(r.num_aps)},
                 {"p5_rate_bps", r.metrics.p5_rate_bps},
                 {"score", r.metrics.score}});
  }
  return j.dump(1) + "\n";
}

inline std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

/// Tracks output files and writes manifest.json at the end of a command.
class RunManifest {
 public:
  RunManifest(std::string command, const RunConfig& cfg)
      : command_(std::move(command)), cfg_(cfg), started_(utc_timestamp()) {}

  void add_output(const std::filesystem::path& path) { outputs_.push_back(path); }
  const std::vector<std::filesystem::path>& outputs() const { return outputs_; }

  std::filesystem::path write(const std::filesystem::path& dir) const {
    nlohmann::ordered_json j;
    j["artifact"] = "linksched";
    j["version"] = kArtifactVersion;
    j["command"] = command_;
    j["started_utc"] = started_;
    j["finished_utc"] = utc_timestamp();
    j["config"] = config_to_json(cfg_);
    nlohmann::ordered_json files = nlohmann::ordered_json::array();
    for (const auto& p : outputs_) {
      const std::string bytes = read_file(p);
      files.push_back({{"file", p.filename().string()},
                       {"bytes", bytes.size()},
                       {"fnv1a64", hex64(fnv1a64(bytes))}});
    }
    j["outputs"] = std::move(files);
    const auto path = dir / "manifest.json";
    write_file_atomic(path, j.dump(1) + "\n");
    return path;
  }

 private:
  std::string command_;
  RunConfig cfg_;
  std::string started_;
  std::vector<std::filesystem::path> outputs_;
};

// ---------------------------------------------------------------------------
// Commands

struct CommandResult {
  std::vector<std::filesystem::path> outputs;
  std::filesystem::path manifest;
};

struct TrainCommandResult : CommandResult {
  TrainRunState state;
};

inline std::string seeds_json(const std::vector<std::uint64_t>& seeds) {
  return nlohmann::ordered_json{{"seeds", seeds}}.dump(1) + "\n";
}

inline nlohmann::ordered_json metrics_json(const EvalMetrics& m) {
  return {{"avg_rate_bps", m.avg_rate_bps}, {"p5_rate_bps", m.p5_rate_bps}, {"score", m.score}, {"samples", m.samples}};
}

/// Trains and writes learning_curve.csv, best_model.json, final_model.json,
/// validation_seeds.json and manifest.json into cfg.out_dir. On divergence
/// writes run_state.json before rethrowing.
inline TrainCommandResult cmd_train(const RunConfig& cfg,
                                    const std::function<void(const CurveRow&)>& progress = {}) {
  cfg.validate();
  const std::filesystem::path dir = cfg.out_dir;
  std::filesystem::create_directories(dir);
  RunManifest manifest("train", cfg);
  const auto curve_path = dir / "learning_curve.csv";
  const auto best_path = dir / "best_model.json";
  std::string curve;

  TrainCallbacks cb;
  cb.on_start = [&](const TrainRunState& s) {
    curve = learning_curve_header(s.baselines);
    write_file_atomic(curve_path, curve);
    write_file_atomic(dir / "validation_seeds.json", seeds_json(s.validation_seeds));
  };
  cb.on_epoch = [&](const CurveRow& row, const TrainRunState& s) {
    curve += learning_curve_row(row, s.baselines);
    write_file_atomic(curve_path, curve);
    if (progress) progress(row);
  };
  cb.on_new_best = [&](const PolicyParams& p, const TrainRunState&) { save_model(best_path, p); };

  TrainCommandResult result;
  try {
    result.state = train(cfg, cb);
  } catch (const TrainingDiverged& e) {
    const TrainRunState& s = e.state();
    nlohmann::ordered_json dump{{"error", e.what()},
                                {"epoch", s.epoch},
                                {"episodes", s.episodes},
                                {"best_epoch", s.best_epoch},
                                {"best_score", std::isfinite(s.best_score) ? s.best_score : 0.0}};
    write_file_atomic(dir / "run_state.json", dump.dump(1) + "\n");
    throw;
  }
  save_model(dir / "final_model.json", result.state.best_params);
  for (const char* name : {"learning_curve.csv", "validation_seeds.json", "best_model.json", "final_model.json"}) {
    if (std::filesystem::exists(dir / name)) manifest.add_output(dir / name);
  }
  result.outputs = manifest.outputs();
  result.manifest = manifest.write(dir);
  return result;
}

/// Evaluation seeds for a given density.
inline std::vector<std::uint64_t> evaluation_seeds(const RunConfig& cfg, int num_aps) {
  return derive_seeds(cfg.seed, SeedStream::kEvaluation, static_cast<std::size_t>(cfg.harness.eval_envs),
                      static_cast<std::uint64_t>(num_aps) << 32);
}

struct EvaluateCommandResult : CommandResult {
  std::vector<EvaluationRow> rows;
};

/// Evaluates a saved model and the baselines at each density, writing
/// evaluation.csv / evaluation.json. `policies` selects a subset of
/// dqn, full_reuse, tdm, exhaustive (empty = all; exhaustive only up to
/// kMaxExhaustiveAps).
inline EvaluateCommandResult cmd_evaluate(const RunConfig& cfg, const std::filesystem::path& model_path,
                                          const std::vector<int>& densities,
                                          const std::vector<std::string>& policies = {}) {
  cfg.validate();
  if (densities.empty()) throw std::invalid_argument("evaluate: no densities given");
  const PolicyParams params = load_model(model_path);
  auto wanted = [&](const std::string& name) {
    return policies.empty() || std::find(policies.begin(), policies.end(), name) != policies.end();
  };
  EvaluateCommandResult result;
  for (int n : densities) {
    RunConfig c = cfg;
    c.network.num_aps = n;
    c.validate();
    const auto seeds = evaluation_seeds(c, n);
    std::vector<Policy> list{Policy::dqn(params), Policy::full_reuse(), Policy::tdm()};
    if (n <= kMaxExhaustiveAps) list.push_back(Policy::exhaustive());
    for (const Policy& p : list) {
      if (!wanted(p.name())) continue;
      result.rows.push_back({p.name(), n, static_cast<int>(seeds.size()), evaluate(c, p, seeds, c.harness.threads)});
    }
  }
  const std::filesystem::path dir = cfg.out_dir;
  std::filesystem::create_directories(dir);
  RunManifest manifest("evaluate", cfg);
  write_file_atomic(dir / "evaluation.csv", evaluation_csv(result.rows));
  write_file_atomic(dir / "evaluation.json", evaluation_json(result.rows));
  manifest.add_output(dir / "evaluation.csv");
  manifest.add_output(dir / "evaluation.json");
  result.outputs = manifest.outputs();
  result.manifest = manifest.write(dir);
  return result;
}

inline EvaluateCommandResult cmd_baseline(const std::string& name, const RunConfig& cfg) {
  cfg.validate();
  const Policy policy = baseline_by_name(name);
  const int n = cfg.network.num_aps;
  const auto seeds = evaluation_seeds(cfg, n);
  EvaluateCommandResult result;
  result.rows.push_back({policy.name(), n, static_cast<int>(seeds.size()), evaluate(cfg, policy, seeds, cfg.harness.threads)});
  const std::filesystem::path dir = cfg.out_dir;
  std::filesystem::create_directories(dir);
  RunManifest manifest("baseline " + name, cfg);
  write_file_atomic(dir / "evaluation.csv", evaluation_csv(result.rows));
  write_file_atomic(dir / "evaluation.json", evaluation_json(result.rows));
  manifest.add_output(dir / "evaluation.csv");
  manifest.add_output(dir / "evaluation.json");
  result.outputs = manifest.outputs();
  result.manifest = manifest.write(dir);
  return result;
}

struct CalibrateCommandResult : CommandResult {
  CalibrationResult calibration;
};

inline CalibrateCommandResult cmd_calibrate(const RunConfig& cfg) {
  cfg.validate();
  CalibrateCommandResult result;
  result.calibration = calibrate_validation_set(cfg);
  const auto& c = result.calibration;
  nlohmann::ordered_json j{{"seeds", c.seeds},
                           {"attempts", c.attempts},
                           {"tolerance", cfg.harness.calibration_tolerance},
                           {"reference_envs", cfg.harness.calibration_reference_envs},
                           {"reference", metrics_json(c.reference)},
                           {"accepted", metrics_json(c.accepted)}};
  const std::filesystem::path dir = cfg.out_dir;
  std::filesystem::create_directories(dir);
  RunManifest manifest("calibrate", cfg);
  write_file_atomic(dir / "validation_seeds.json", j.dump(1) + "\n");
  manifest.add_output(dir / "validation_seeds.json");
  result.outputs = manifest.outputs();
  result.manifest = manifest.write(dir);
  return result;
}

}  // namespace linksched
