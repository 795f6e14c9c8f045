// linksched command-line entry point: train, evaluate, baseline, calibrate.

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "linksched/linksched.hpp"

namespace {

struct CommonFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<int> threads;
};

void add_common(CLI::App* sub, CommonFlags& f) {
  sub->add_option("--config", f.config, "run configuration file (JSON); defaults apply when omitted");
  sub->add_option("--seed", f.seed, "master seed (overrides config)");
  sub->add_option("--out", f.out, "output directory (overrides config)");
  sub->add_option("--threads", f.threads, "evaluation worker threads (overrides config)")->check(CLI::PositiveNumber);
}

linksched::RunConfig load(const CommonFlags& f) {
  linksched::RunConfig cfg = f.config.empty() ? linksched::RunConfig{} : linksched::parse_config(f.config);
  if (f.seed) cfg.seed = *f.seed;
  if (f.out) cfg.out_dir = *f.out;
  if (f.threads) cfg.harness.threads = *f.threads;
  cfg.validate();
  return cfg;
}

void print_rows(const std::vector<linksched::EvaluationRow>& rows) {
  std::printf("%-12s %4s %5s %14s %14s %14s\n", "policy", "N", "envs", "avg_Mbps", "p5_Mbps", "score_Mbps");
  for (const auto& r : rows) {
    std::printf("%-12s %4d %5d %14.4f %14.4f %14.4f\n", r.policy.c_str(), r.num_aps, r.envs,
                r.metrics.avg_rate_bps / 1e6, r.metrics.p5_rate_bps / 1e6, r.metrics.score / 1e6);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-agent deep Q-learning link scheduler and wireless network simulator"};
  app.require_subcommand(1);

  CommonFlags train_flags, eval_flags, base_flags, cal_flags;
  bool quiet = false;

  auto* train = app.add_subcommand("train", "train the shared scheduling policy");
  add_common(train, train_flags);
  train->add_flag("--quiet", quiet, "suppress per-epoch progress");

  auto* evaluate = app.add_subcommand("evaluate", "evaluate a saved model and the baselines across densities");
  add_common(evaluate, eval_flags);
  std::string model;
  std::vector<int> densities;
  std::vector<std::string> policies;
  evaluate->add_option("--model", model, "model file")->required()->check(CLI::ExistingFile);
  evaluate->add_option("--densities", densities, "numbers of APs, e.g. 4,6,8,10")->delimiter(',');
  evaluate->add_option("--policies", policies, "subset of dqn,full_reuse,tdm,exhaustive")->delimiter(',');

  auto* baseline = app.add_subcommand("baseline", "evaluate one baseline scheduler");
  add_common(baseline, base_flags);
  std::string baseline_name;
  baseline->add_option("name", baseline_name, "full_reuse | tdm | exhaustive")
      ->required()
      ->check(CLI::IsMember({"full_reuse", "tdm", "exhaustive"}));

  auto* calibrate = app.add_subcommand("calibrate", "select a representative validation environment set");
  add_common(calibrate, cal_flags);

  CLI11_PARSE(app, argc, argv);

  try {
    if (train->parsed()) {
      const auto cfg = load(train_flags);
      auto progress = [&](const linksched::CurveRow& row) {
        if (quiet) return;
        std::printf("epoch %5lld  avg %10.4f Mbps  p5 %10.4f Mbps  score %10.4f  best %10.4f\n",
                    static_cast<long long>(row.epoch), row.metrics.avg_rate_bps / 1e6,
                    row.metrics.p5_rate_bps / 1e6, row.metrics.score / 1e6, row.best_score / 1e6);
        std::fflush(stdout);
      };
      const auto result = linksched::cmd_train(cfg, progress);
      std::printf("best score %.4f Mbps at epoch %lld; outputs in %s\n", result.state.best_score / 1e6,
                  static_cast<long long>(result.state.best_epoch), cfg.out_dir.c_str());
    } else if (evaluate->parsed()) {
      auto cfg = load(eval_flags);
      if (densities.empty()) densities.push_back(cfg.network.num_aps);
      const auto result = linksched::cmd_evaluate(cfg, model, densities, policies);
      print_rows(result.rows);
    } else if (baseline->parsed()) {
      const auto cfg = load(base_flags);
      const auto result = linksched::cmd_baseline(baseline_name, cfg);
      print_rows(result.rows);
    } else if (calibrate->parsed()) {
      const auto cfg = load(cal_flags);
      const auto result = linksched::cmd_calibrate(cfg);
      const auto& c = result.calibration;
      std::printf("accepted %zu seeds after %d attempts: avg %.4f / ref %.4f Mbps, p5 %.4f / ref %.4f Mbps\n",
                  c.seeds.size(), c.attempts, c.accepted.avg_rate_bps / 1e6, c.reference.avg_rate_bps / 1e6,
                  c.accepted.p5_rate_bps / 1e6, c.reference.p5_rate_bps / 1e6);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
