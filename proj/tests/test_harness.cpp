#include <cmath>
#include <numeric>
#include <vector>

#include <gtest/gtest.h>

#include "linksched/harness.hpp"

using namespace linksched;

namespace {

/// Small, fast configuration for harness tests.
RunConfig small_config(int num_aps = 4) {
  RunConfig cfg;
  cfg.network.num_aps = num_aps;
  cfg.agent.hidden_units = 16;
  cfg.agent.pretrain_episodes = 1;
  cfg.agent.epsilon_decay_episodes = 2;
  cfg.agent.replay_capacity = 1000;
  cfg.agent.batch_slots = 8;
  cfg.harness.epochs = 2;
  cfg.harness.episodes_per_epoch = 1;
  cfg.harness.validation_envs = 3;
  cfg.harness.calibrate_validation = false;
  cfg.harness.calibration_reference_envs = 20;
  return cfg;
}

}  // namespace

TEST(Score, WeightedCombination) {
  EXPECT_DOUBLE_EQ(score(20e6, 2e6), 26e6);
  EXPECT_DOUBLE_EQ(score(7.5, 0.0), 7.5);
  EXPECT_DOUBLE_EQ(score(0.0, 4.0), 12.0);
}

TEST(Percentile, FifthPercentile) {
  std::vector<double> v(100);
  std::iota(v.begin(), v.end(), 1.0);
  EXPECT_NEAR(percentile5(v), 5.95, 1e-12);
  EXPECT_EQ(percentile5({42.0}), 42.0);
  EXPECT_EQ(percentile5({3.0, 3.0, 3.0, 3.0}), 3.0);
  EXPECT_THROW(percentile5({}), std::invalid_argument);
  // order independent
  std::reverse(v.begin(), v.end());
  EXPECT_NEAR(percentile5(v), 5.95, 1e-12);
}

TEST(Episode, SingleLinkFullReuseMatchesClosedForm) {
  RunConfig cfg = small_config(1);
  const std::uint64_t seed = 77;
  const EpisodeResult r = run_episode(cfg, seed, Policy::full_reuse());

  const Environment env(cfg.network, seed);
  const double snr0 = dbm_to_watts(cfg.network.tx_power_dbm) *
                      std::pow(10.0, env.topology().longterm_gain_db(0, 0) / 10.0) /
                      noise_power_w(cfg.network);
  double sum = 0.0;
  for (int t = 200; t < 400; ++t) sum += 1e7 * std::log2(1.0 + snr0 * env.fading().power(0, 0, t));
  ASSERT_EQ(r.ue_avg_rate_bps.size(), 1u);
  EXPECT_NEAR(r.ue_avg_rate_bps[0], sum / 200.0, 1e-6 * r.ue_avg_rate_bps[0]);
}

TEST(Episode, DeterministicInEvalMode) {
  const RunConfig cfg = small_config();
  Rng rng(1);
  const PolicyParams p = PolicyParams::glorot(static_cast<int>(kObservationSize), 16, rng);
  for (const Policy& pol : {Policy::dqn(p), Policy::tdm(), Policy::exhaustive()}) {
    const auto a = run_episode(cfg, 123, pol);
    const auto b = run_episode(cfg, 123, pol);
    EXPECT_EQ(a.ue_avg_rate_bps, b.ue_avg_rate_bps) << pol.name();
  }
}

TEST(Episode, TdmGivesEachApAQuarterOfTheWindow) {
  const auto r = run_episode(small_config(4), 5, Policy::tdm());
  EXPECT_EQ(r.active_intervals, (std::vector<int>{50, 50, 50, 50}));
  for (double v : r.ue_avg_rate_bps) EXPECT_GT(v, 0.0);
}

TEST(Episode, ObservationsStayInRangeAtAnyDensity) {
  for (int n : {1, 2, 4, 7, 10}) {
    const RunConfig cfg = small_config(n);
    auto hook = [&](const IntervalView& v) {
      ASSERT_EQ(v.observations.size(), static_cast<std::size_t>(n));
      for (const auto& o : v.observations) {
        for (double x : o) {
          EXPECT_GE(x, -1.0);
          EXPECT_LE(x, 1.0);
        }
      }
    };
    run_episode(cfg, 9, Policy::full_reuse(), hook);
  }
}

TEST(Episode, RewardsFollowSharingAndPenaltyRules) {
  const RunConfig cfg = small_config(4);
  Rng rng(3);
  PolicyParams p = PolicyParams::zeros(static_cast<int>(kObservationSize), 4);
  p.b3 << 1.0, 0.0;  // always inactive: exercises the all-off penalty
  int penalties = 0;
  auto hook = [&](const IntervalView& v) {
    const bool any = std::any_of(v.pattern.begin(), v.pattern.end(), [](auto a) { return a; });
    if (any) {
      for (double r : v.rewards) EXPECT_EQ(r, v.rewards[0]);
    } else {
      EXPECT_LE(std::count_if(v.rewards.begin(), v.rewards.end(), [](double r) { return r != 0.0; }), 1);
      penalties += std::count_if(v.rewards.begin(), v.rewards.end(), [](double r) { return r < 0.0; });
    }
  };
  run_episode(cfg, 4, Policy::dqn(p), hook);
  EXPECT_GT(penalties, 300);
}

TEST(Episode, ExhaustiveDominatesOtherPatternsEachInterval) {
  const RunConfig cfg = small_config(4);
  Rng rng(5);
  const PolicyParams p = PolicyParams::glorot(static_cast<int>(kObservationSize), 16, rng);
  int checked = 0;
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    auto hook = [&](const IntervalView& v) {
      const auto& assoc = v.env.topology().association;
      const double best = pattern_weighted_sum_rate(v.gains, assoc, v.pattern, v.weights, v.env.budget());
      std::vector<ActivationPattern> others{full_reuse(4), tdm(4, v.t)};
      Rng unused(0);
      std::vector<Action> a = act_all(p, v.observations, 0.0, unused);
      ActivationPattern dqn(4);
      for (int k = 0; k < 4; ++k) dqn[static_cast<std::size_t>(k)] = a[static_cast<std::size_t>(k)] == Action::kActive;
      others.push_back(dqn);
      for (const auto& o : others) {
        EXPECT_GE(best, pattern_weighted_sum_rate(v.gains, assoc, o, v.weights, v.env.budget()));
      }
      ++checked;
    };
    run_episode(cfg, seed, Policy::exhaustive(), hook);
  }
  EXPECT_EQ(checked, 1200);
}

TEST(Evaluate, SingleEnvSingleUe) {
  const RunConfig cfg = small_config(1);
  const std::vector<std::uint64_t> seeds{11};
  const EvalMetrics m = evaluate(cfg, Policy::full_reuse(), seeds);
  const auto r = run_episode(cfg, 11, Policy::full_reuse());
  EXPECT_EQ(m.avg_rate_bps, r.ue_avg_rate_bps[0]);
  EXPECT_EQ(m.p5_rate_bps, r.ue_avg_rate_bps[0]);
  EXPECT_EQ(m.samples, 1u);
}

TEST(Evaluate, PoolsEveryUeOfEveryEnvironment) {
  const RunConfig cfg = small_config(5);
  const auto seeds = derive_seeds(3, SeedStream::kEvaluation, 7);
  const EvalMetrics m = evaluate(cfg, Policy::tdm(), seeds);
  EXPECT_EQ(m.samples, 35u);
  double sum = 0.0;
  for (auto s : seeds) {
    for (double v : run_episode(cfg, s, Policy::tdm()).ue_avg_rate_bps) sum += v;
  }
  EXPECT_NEAR(m.avg_rate_bps, sum / 35.0, 1e-9 * m.avg_rate_bps);
}

TEST(Evaluate, ExhaustiveScoresAtLeastFullReuse) {
  const RunConfig cfg = small_config(4);
  const auto seeds = derive_seeds(8, SeedStream::kEvaluation, 20);
  const auto ex = evaluate(cfg, Policy::exhaustive(), seeds);
  const auto fr = evaluate(cfg, Policy::full_reuse(), seeds);
  EXPECT_GE(ex.score, fr.score);
}

TEST(Evaluate, RepeatableAndThreadIndependent) {
  const RunConfig cfg = small_config(4);
  const auto seeds = derive_seeds(4, SeedStream::kValidation, 6);
  Rng rng(2);
  const PolicyParams p = PolicyParams::glorot(static_cast<int>(kObservationSize), 16, rng);
  const auto a = evaluate(cfg, Policy::dqn(p), seeds, 1);
  const auto b = evaluate(cfg, Policy::dqn(p), seeds, 1);
  const auto c = evaluate(cfg, Policy::dqn(p), seeds, 3);
  EXPECT_EQ(a, b);
  EXPECT_EQ(a, c);
  EXPECT_THROW(evaluate(cfg, Policy::tdm(), std::vector<std::uint64_t>{}), std::invalid_argument);
}

TEST(Evaluate, LeavesTrainingStateUntouched) {
  const RunConfig cfg = small_config(4);
  DoubleDqn learner(cfg.agent, 17);
  run_training_episode(cfg, 1, learner);
  run_training_episode(cfg, 2, learner);
  const DoubleDqn snapshot = learner;
  const auto seeds = derive_seeds(1, SeedStream::kValidation, 3);
  evaluate(cfg, Policy::dqn(learner.main()), seeds);
  EXPECT_TRUE(learner.state_equal(snapshot));
}

TEST(Evaluate, ModelRunsUnmodifiedAtHigherDensities) {
  Rng rng(6);
  const PolicyParams p = PolicyParams::glorot(static_cast<int>(kObservationSize), 16, rng);
  for (int n : {6, 8, 10}) {
    const RunConfig cfg = small_config(n);
    const auto m = evaluate(cfg, Policy::dqn(p), derive_seeds(2, SeedStream::kEvaluation, 2));
    EXPECT_EQ(m.samples, static_cast<std::size_t>(2 * n));
  }
}

TEST(TrainingEpisode, PushesEvaluationWindowSlots) {
  const RunConfig cfg = small_config(3);
  DoubleDqn learner(cfg.agent, 5);
  run_training_episode(cfg, 10, learner);
  EXPECT_EQ(learner.buffer().size(), 200u);
  EXPECT_EQ(learner.updates(), 0);  // pre-training episode
  const TransitionSlot& s = learner.buffer().at(0);
  EXPECT_EQ(s.interval, 200);
  EXPECT_EQ(s.agents.size(), 3u);
  EXPECT_EQ(learner.buffer().at(199).interval, 399);
  run_training_episode(cfg, 11, learner);
  EXPECT_EQ(learner.updates(), 10);
}

TEST(Train, BookkeepingAndCheckpoints) {
  RunConfig cfg = small_config(4);
  cfg.harness.epochs = 4;
  std::vector<double> saved;
  TrainCallbacks cb;
  cb.on_new_best = [&](const PolicyParams& p, const TrainRunState& s) {
    saved.push_back(s.best_score);
    EXPECT_EQ(p.meta.best_score, s.best_score);
  };
  const TrainRunState s = train(cfg, cb);
  ASSERT_EQ(s.curve.size(), 4u);
  for (std::size_t k = 0; k < s.curve.size(); ++k) {
    EXPECT_EQ(s.curve[k].epoch, static_cast<std::int64_t>(k + 1));
    if (k > 0) EXPECT_GE(s.curve[k].best_score, s.curve[k - 1].best_score);
  }
  ASSERT_FALSE(saved.empty());
  for (std::size_t k = 1; k < saved.size(); ++k) EXPECT_GT(saved[k], saved[k - 1]);
  EXPECT_EQ(s.baselines.size(), 3u);
  EXPECT_EQ(s.episodes, 1 + 4);
}

TEST(Train, PatienceStopsEarly) {
  RunConfig cfg = small_config(2);
  cfg.harness.epochs = 50;
  cfg.harness.patience_epochs = 1;
  const TrainRunState s = train(cfg);
  EXPECT_TRUE(s.early_stopped);
  EXPECT_LT(s.curve.size(), 50u);
}

TEST(Train, DivergenceCarriesRunState) {
  RunConfig cfg = small_config(2);
  cfg.agent.learning_rate = 1e308;
  cfg.agent.batch_slots = 4;
  try {
    train(cfg);
    FAIL() << "expected divergence";
  } catch (const TrainingDiverged& e) {
    EXPECT_GE(e.state().episodes, 2);
  }
}

TEST(Calibration, IdenticalSetsAcceptOnFirstDraw) {
  const RunConfig cfg = small_config(4);
  const auto ref = derive_seeds(5, SeedStream::kCalibrationReference, 12);
  const auto result = calibrate_against(cfg, ref, [&](int) { return ref; }, 0.0, 3);
  EXPECT_EQ(result.attempts, 1);
  EXPECT_EQ(result.seeds, ref);
  EXPECT_EQ(result.accepted, result.reference);
}

TEST(Calibration, ZeroToleranceWithDisjointSeedsFails) {
  const RunConfig cfg = small_config(4);
  const auto ref = derive_seeds(5, SeedStream::kCalibrationReference, 12);
  auto draw = [&](int k) { return derive_seeds(5, SeedStream::kCalibrationCandidate, 6, 6 * static_cast<std::uint64_t>(k)); };
  EXPECT_THROW(calibrate_against(cfg, ref, draw, 0.0, 5), CalibrationError);
}

TEST(Calibration, AcceptedSetWithinToleranceAndReproducible) {
  RunConfig cfg = small_config(4);
  cfg.harness.calibration_reference_envs = 100;
  cfg.harness.validation_envs = 20;
  const auto a = calibrate_validation_set(cfg);
  const auto b = calibrate_validation_set(cfg);
  EXPECT_EQ(a.seeds, b.seeds);
  EXPECT_EQ(a.seeds.size(), 20u);
  EXPECT_LE(relative_error(a.accepted.avg_rate_bps, a.reference.avg_rate_bps), 0.05);
  EXPECT_LE(relative_error(a.accepted.p5_rate_bps, a.reference.p5_rate_bps), 0.05);
}
