// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any FAIL.
// Usage: linksched_acceptance [output-dir]

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "linksched/linksched.hpp"
#include "oracles.hpp"

using namespace linksched;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::map<int, Outcome> g_results;

void record(int id, bool pass, std::string detail) {
  std::printf("  [%d] %s\n", id, detail.c_str());
  std::fflush(stdout);
  g_results[id] = {pass, std::move(detail)};
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), f, args...);
  return buf;
}

double elapsed_s(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

Observation random_obs(Rng& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Observation o;
  for (double& v : o) v = u(rng);
  return o;
}

// 1 -------------------------------------------------------------------------

double loss_only(const PolicyParams& p, const Observation& x, Action a, double target) {
  const QValues qv = forward(p, x);
  const double q = a == Action::kActive ? qv.active : qv.inactive;
  return oracle::huber(q - target, 1.0);
}

void gradient_check() {
  const double h = 1e-6;
  Rng rng(derive_seed(1, SeedStream::kAgent, 1000));
  double worst = 0.0;
  std::size_t checked = 0;
  for (int trial = 0; trial < 100; ++trial) {
    PolicyParams p = PolicyParams::glorot(static_cast<int>(kObservationSize), 128, rng);
    std::uniform_real_distribution<double> ub(-0.3, 0.3);
    for (Eigen::Index i = 0; i < p.b1.size(); ++i) p.b1(i) = ub(rng);
    for (Eigen::Index i = 0; i < p.b2.size(); ++i) p.b2(i) = ub(rng);
    const Observation x = random_obs(rng);
    const Action a = (rng() & 1u) ? Action::kActive : Action::kInactive;
    const double target = std::uniform_real_distribution<double>(-3.0, 3.0)(rng);

    TrainingBatch batch;
    batch.obs = Eigen::Map<const Eigen::VectorXd>(x.data(), static_cast<Eigen::Index>(x.size()));
    batch.actions = {a};
    batch.targets = Eigen::VectorXd::Constant(1, target);
    const PolicyParams g = loss_and_gradient(p, batch, 1.0).gradient;

    std::vector<Eigen::MatrixXd*> params;
    std::vector<const Eigen::MatrixXd*> grads;
    auto collect_w = [&](Eigen::MatrixXd& w, const Eigen::MatrixXd& gw) {
      params.push_back(&w);
      grads.push_back(&gw);
    };
    collect_w(p.w1, g.w1);
    collect_w(p.w2, g.w2);
    collect_w(p.w3, g.w3);
    for (std::size_t k = 0; k < params.size(); ++k) {
      Eigen::MatrixXd& w = *params[k];
      for (Eigen::Index i = 0; i < w.size(); ++i) {
        const double saved = w(i);
        w(i) = saved + h;
        const double up = loss_only(p, x, a, target);
        w(i) = saved - h;
        const double down = loss_only(p, x, a, target);
        w(i) = saved;
        const double fd = (up - down) / (2 * h);
        const double an = (*grads[k])(i);
        worst = std::max(worst, std::abs(an - fd) / std::max({std::abs(an), std::abs(fd), 1e-5}));
        ++checked;
      }
    }
    for (auto [b, gb] : {std::pair{&p.b1, &g.b1}, std::pair{&p.b2, &g.b2}, std::pair{&p.b3, &g.b3}}) {
      for (Eigen::Index i = 0; i < b->size(); ++i) {
        const double saved = (*b)(i);
        (*b)(i) = saved + h;
        const double up = loss_only(p, x, a, target);
        (*b)(i) = saved - h;
        const double down = loss_only(p, x, a, target);
        (*b)(i) = saved;
        const double fd = (up - down) / (2 * h);
        const double an = (*gb)(i);
        worst = std::max(worst, std::abs(an - fd) / std::max({std::abs(an), std::abs(fd), 1e-5}));
        ++checked;
      }
    }
  }
  record(1, worst < 1e-4, fmt("gradient: %zu partials over 100 triples, worst relative error %.3e (limit 1e-4)", checked, worst));
}

// 2 -------------------------------------------------------------------------

void dominance(const RunConfig& base, const PolicyParams& trained) {
  RunConfig cfg = base;
  cfg.network.num_aps = 4;
  const auto seeds = derive_seeds(cfg.seed, SeedStream::kEvaluation, 20, 0xD0ull << 32);
  long violations = 0;
  long intervals = 0;
  for (std::uint64_t seed : seeds) {
    auto hook = [&](const IntervalView& v) {
      if (v.t < cfg.harness.warmup_intervals) return;
      const auto& assoc = v.env.topology().association;
      const double best = pattern_weighted_sum_rate(v.gains, assoc, v.pattern, v.weights, v.env.budget());
      Rng unused(0);
      const ActivationPattern dqn = detail::to_pattern(act_all(trained, v.observations, 0.0, unused));
      for (const auto& p : {full_reuse(4), tdm(4, v.t), dqn}) {
        if (pattern_weighted_sum_rate(v.gains, assoc, p, v.weights, v.env.budget()) > best) ++violations;
      }
      ++intervals;
    };
    run_episode(cfg, seed, Policy::exhaustive(), hook);
  }

  // exhaustive output against the naive enumerator on 3-AP instances
  RunConfig c3 = cfg;
  c3.network.num_aps = 3;
  Rng rng(derive_seed(cfg.seed, SeedStream::kEvaluation, 0xD1ull << 32));
  std::uniform_real_distribution<double> rate(1e5, 2e8);
  int mismatches = 0;
  const int instances = 500;
  for (int i = 0; i < instances; ++i) {
    const Environment env(c3.network, rng());
    const Eigen::MatrixXd g = env.gains(static_cast<std::int64_t>(rng() % 400));
    std::vector<std::vector<double>> rows(3, std::vector<double>(3));
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) rows[r][c] = g(r, c);
    }
    std::vector<double> w(3);
    for (double& x : w) x = 1.0 / rate(rng);
    const auto& assoc = env.topology().association;
    const ActivationPattern p = exhaustive_search(g, assoc, w, env.budget());
    const std::uint32_t code =
        oracle::best_pattern(rows, assoc, w, env.budget().tx_power_w, env.budget().noise_w, env.budget().bandwidth_hz);
    for (int k = 0; k < 3; ++k) {
      if (p[static_cast<std::size_t>(k)] != ((code >> k) & 1u)) {
        ++mismatches;
        break;
      }
    }
  }
  record(2, violations == 0 && intervals == 4000 && mismatches == 0,
         fmt("dominance: %ld violations over %ld intervals x 3 patterns; %d/%d naive-enumerator mismatches",
             violations, intervals, mismatches, instances));
}

// 3 -------------------------------------------------------------------------

void channel_statistics() {
  NetworkConfig cfg;
  Rng rng(derive_seed(1, SeedStream::kEvaluation, 0xC3ull << 32));
  const Eigen::MatrixXd s = draw_shadowing_db(cfg, rng, 100, 1000);
  const double mean = s.mean();
  const double sd = std::sqrt((s.array() - mean).square().sum() / static_cast<double>(s.size() - 1));

  const FadingChannel ch(40, 50, cfg, rng);
  double power = 0.0, envelope = 0.0;
  std::size_t n = 0;
  for (std::int64_t t = 0; t < 5000; t += 10) {
    const Eigen::MatrixXd g = ch.power_gains(t);
    power += g.sum();
    envelope += g.array().sqrt().sum();
    n += static_cast<std::size_t>(g.size());
  }
  power /= static_cast<double>(n);
  envelope /= static_cast<double>(n);
  const double rayleigh = std::sqrt(std::numbers::pi / 4.0);
  const bool ok = std::abs(sd - 7.0) <= 0.2 && std::abs(power - 1.0) <= 0.01 &&
                  std::abs(envelope - rayleigh) / rayleigh <= 0.02 && n == 1000000;
  record(3, ok,
         fmt("channel: shadowing std %.4f dB (7 +/- 0.2); mean power %.5f (1 +/- 1%%); mean envelope %.5f vs %.5f (+/- 2%%); %zu samples",
             sd, power, envelope, rayleigh, n));
}

// 4 -------------------------------------------------------------------------

void delay_semantics() {
  const DelaySchedule d = DelaySchedule::from(AgentConfig{});
  bool ok = d.visible_local(4) == 0 && d.visible_local(23) == 10 && d.visible_remote(23) == 0 &&
            d.visible_local(45) == 40 && d.visible_remote(45) == 20 && !d.visible_local(3) && !d.visible_remote(19);

  // causality against a live measurement stream
  NetworkConfig net;
  const Environment env(net, 99);
  const std::vector<int> ue_of = env.topology().ue_of_ap();
  MeasurementHistory history(d);
  std::vector<AgentState> agents(static_cast<std::size_t>(net.num_aps), AgentState::initial(1e7, 1e3));
  std::vector<std::vector<double>> sinr_at;
  long checks = 0;
  Rng rng(5);
  for (std::int64_t t = 0; t < 400; ++t) {
    for (int k = 0; k < net.num_aps; ++k) {
      for (auto snap : {history.local(t, k), history.remote(t, k)}) {
        if (!snap) continue;
        ok = ok && snap->interval <= t - d.local_delay && d.is_capture(snap->interval) &&
             snap->sinr_linear == sinr_at[static_cast<std::size_t>(snap->interval)][static_cast<std::size_t>(ue_of[k])];
        ++checks;
      }
      const auto r = history.remote(t, k);
      ok = ok && (!r || r->interval <= t - d.remote_delay);
      ok = ok && (history.local(t, k).has_value() == (t >= d.local_delay));
    }
    ActivationPattern p(static_cast<std::size_t>(net.num_aps));
    for (auto& x : p) x = rng() & 1u;
    const MeasurementRecord rec = env.step(p, t);
    sinr_at.push_back(rec.sinr_linear);
    history.ingest(rec, agents, ue_of);
  }
  record(4, ok, fmt("delays: visibility formula and causality (%ld snapshot lookups)", checks));
}

// 5 -------------------------------------------------------------------------

struct LearningRun {
  TrainRunState state;
  PolicyParams best;
};

LearningRun learning_run(const RunConfig& base, const fs::path& out) {
  RunConfig cfg = base;
  cfg.network.num_aps = 4;
  cfg.harness.epochs = 300;
  cfg.harness.episodes_per_epoch = 10;
  cfg.harness.validation_envs = 50;
  cfg.out_dir = (out / "train").string();
  const auto start = std::chrono::steady_clock::now();
  auto progress = [&](const CurveRow& row) {
    if (row.epoch % 25 == 0) {
      std::printf("      epoch %3lld  score %.3f Mbps  best %.3f Mbps  (%.0f s)\n", static_cast<long long>(row.epoch),
                  row.metrics.score / 1e6, row.best_score / 1e6, elapsed_s(start));
      std::fflush(stdout);
    }
  };
  const TrainCommandResult r = cmd_train(cfg, progress);
  double fr = 0.0, td = 0.0, ex = 0.0;
  for (const auto& b : r.state.baselines) {
    if (b.name == "full_reuse") fr = b.metrics.score;
    if (b.name == "tdm") td = b.metrics.score;
    if (b.name == "exhaustive") ex = b.metrics.score;
  }
  const double best = r.state.best_score;
  const double bar = 1.05 * std::max(fr, td);
  const double ratio = best / ex;
  record(5, best >= bar,
         fmt("learning: best %.3f Mbps at epoch %lld vs 1.05 x max(FR %.3f, TDM %.3f) = %.3f; "
             "%.3f of exhaustive %.3f (soft target 0.8: %s); %.0f s",
             best / 1e6, static_cast<long long>(r.state.best_epoch), fr / 1e6, td / 1e6, bar / 1e6, ratio, ex / 1e6,
             ratio >= 0.8 ? "met" : "not met", elapsed_s(start)));
  return {r.state, load_model(fs::path(cfg.out_dir) / "best_model.json")};
}

// 6 -------------------------------------------------------------------------

void density_generalization(const RunConfig& base, const PolicyParams& trained) {
  bool ok = true;
  std::string detail = "densities:";
  for (int n : {6, 8, 10}) {
    RunConfig cfg = base;
    cfg.network.num_aps = n;
    cfg.harness.eval_envs = 200;
    const auto seeds = evaluation_seeds(cfg, n);
    const EvalMetrics dq = evaluate(cfg, Policy::dqn(trained), seeds, cfg.harness.threads);
    const EvalMetrics fr = evaluate(cfg, Policy::full_reuse(), seeds, cfg.harness.threads);
    const EvalMetrics td = evaluate(cfg, Policy::tdm(), seeds, cfg.harness.threads);
    ok = ok && dq.score >= fr.score && dq.score >= td.score;
    detail += fmt(" N=%d dqn %.2f / FR %.2f / TDM %.2f;", n, dq.score / 1e6, fr.score / 1e6, td.score / 1e6);
  }
  record(6, ok, detail + " (Mbps, 200 envs each)");
}

// 7 -------------------------------------------------------------------------

void calibration(const RunConfig& base) {
  RunConfig cfg = base;
  cfg.network.num_aps = 4;
  cfg.harness.validation_envs = 50;
  cfg.harness.calibration_reference_envs = 1000;
  cfg.harness.calibration_tolerance = 0.05;
  const CalibrationResult a = calibrate_validation_set(cfg);
  const CalibrationResult b = calibrate_validation_set(cfg);
  const double ea = relative_error(a.accepted.avg_rate_bps, a.reference.avg_rate_bps);
  const double ep = relative_error(a.accepted.p5_rate_bps, a.reference.p5_rate_bps);
  const bool ok = a.seeds.size() == 50 && ea <= 0.05 && ep <= 0.05 && a.seeds == b.seeds && a.accepted == b.accepted;
  record(7, ok,
         fmt("calibration: accepted after %d attempt(s); avg error %.4f, p5 error %.4f (limit 0.05); reproducible: %s",
             a.attempts, ea, ep, a.seeds == b.seeds ? "yes" : "no"));
}

// 8 -------------------------------------------------------------------------

void determinism(const RunConfig& base, const fs::path& out) {
  RunConfig cfg = base;
  cfg.network.num_aps = 4;
  cfg.harness.epochs = 5;
  cfg.harness.episodes_per_epoch = 2;
  cfg.harness.validation_envs = 10;
  cfg.harness.calibrate_validation = false;
  cfg.agent.pretrain_episodes = 2;
  cfg.agent.epsilon_decay_episodes = 4;
  cfg.out_dir = (out / "determinism_a").string();
  cmd_train(cfg);
  const std::string a = read_file(fs::path(cfg.out_dir) / "learning_curve.csv");
  cfg.out_dir = (out / "determinism_b").string();
  cmd_train(cfg);
  const std::string b = read_file(fs::path(cfg.out_dir) / "learning_curve.csv");

  DoubleDqn learner(cfg.agent, 3);
  for (std::uint64_t s = 0; s < 4; ++s) run_training_episode(cfg, s, learner);
  const DoubleDqn before = learner;
  const auto seeds = derive_seeds(cfg.seed, SeedStream::kValidation, 5);
  const EvalMetrics m1 = evaluate(cfg, Policy::dqn(learner.main()), seeds);
  const EvalMetrics m2 = evaluate(cfg, Policy::dqn(learner.main()), seeds);
  const bool untouched = learner.state_equal(before) && m1 == m2;
  record(8, a == b && !a.empty() && untouched,
         fmt("determinism: learning curves %s (%zu bytes); evaluation side-effect-free: %s",
             a == b ? "byte-identical" : "differ", a.size(), untouched ? "yes" : "no"));
}

// 9 -------------------------------------------------------------------------

void reward_rules() {
  Rng rng(909);
  bool ok = true;
  long all_off_cases = 0;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 20000; ++trial) {
    const int n = 1 + static_cast<int>(rng() % 8);
    const auto un = static_cast<std::size_t>(n);
    MeasurementRecord rec;
    rec.activation.assign(un, 0);
    rec.realized_rate_bps.assign(un, 0.0);
    rec.sinr_linear.assign(un, 0.0);
    const bool all_off = trial % 2 == 0;
    for (std::size_t k = 0; k < un; ++k) {
      rec.activation[k] = all_off ? 0 : (rng() & 1u);
      if (rec.activation[k]) rec.realized_rate_bps[k] = 1e8 * u(rng);
    }
    if (!all_off && std::none_of(rec.activation.begin(), rec.activation.end(), [](auto x) { return x; })) {
      rec.activation[0] = 1;
      rec.realized_rate_bps[0] = 5e7;
    }
    std::vector<double> w(un), pf(un);
    for (std::size_t k = 0; k < un; ++k) {
      w[k] = 1.0 / (1e3 + 1e8 * u(rng));
      pf[k] = trial % 3 == 0 ? std::floor(4.0 * u(rng)) : 10.0 * u(rng);  // quantized values force ties
    }
    const auto r = compute_reward(rec, w, pf);
    if (!all_off) {
      const double shared = weighted_sum_rate(rec.realized_rate_bps, w);
      for (double x : r) ok = ok && x == shared;
    } else {
      ++all_off_cases;
      const auto it = std::max_element(pf.begin(), pf.end());  // first maximum
      const auto idx = static_cast<std::size_t>(it - pf.begin());
      for (std::size_t k = 0; k < un; ++k) ok = ok && r[k] == (k == idx ? -*it : 0.0);
    }
  }

  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    AgentState s = AgentState::initial(1e8 * u(rng), 1e3);
    for (int t = 0; t < 500; ++t) {
      s.update(u(rng) < 0.3 ? 0.0 : 2e8 * u(rng), 0.01, 1e3);
      worst = std::max(worst, std::abs(s.weight * s.ema_rate_bps - 1.0));
    }
  }
  ok = ok && worst <= 1e-12;
  record(9, ok, fmt("reward: shared/penalty/tie rules on 20000 cases (%ld all-off); max |w*R - 1| = %.2e",
                    all_off_cases, worst));
}

}  // namespace

int main(int argc, char** argv) {
  const fs::path out = argc > 1 ? fs::path(argv[1]) : fs::temp_directory_path() / "linksched_acceptance";
  fs::create_directories(out);
  RunConfig cfg;
  cfg.seed = 1;

  std::printf("linksched acceptance run (output in %s)\n", out.string().c_str());
  std::fflush(stdout);
  const auto start = std::chrono::steady_clock::now();

  auto guarded = [](int id, auto&& f) {
    try {
      f();
    } catch (const std::exception& e) {
      record(id, false, std::string("exception: ") + e.what());
    }
  };

  guarded(1, gradient_check);
  guarded(3, channel_statistics);
  guarded(4, delay_semantics);
  guarded(9, reward_rules);
  guarded(7, [&] { calibration(cfg); });
  guarded(8, [&] { determinism(cfg, out); });

  PolicyParams trained;
  bool have_model = false;
  guarded(5, [&] {
    trained = learning_run(cfg, out).best;
    have_model = true;
  });
  if (have_model) {
    guarded(2, [&] { dominance(cfg, trained); });
    guarded(6, [&] { density_generalization(cfg, trained); });
  } else {
    record(2, false, "no trained model");
    record(6, false, "no trained model");
  }

  std::printf("\n");
  int failures = 0;
  for (const auto& [id, o] : g_results) {
    std::printf("%s criterion %d: %s\n", o.pass ? "PASS" : "FAIL", id, o.detail.c_str());
    failures += o.pass ? 0 : 1;
  }
  std::printf("\n%d/%zu criteria passed in %.0f s\n", static_cast<int>(g_results.size()) - failures, g_results.size(),
              elapsed_s(start));
  return failures == 0 ? 0 : 1;
}
