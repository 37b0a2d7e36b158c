#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "eemo/grpo_sim.hpp"
#include "test_support.hpp"

namespace eemo {
namespace {

CandidatePool ranking_pool() {
  CandidatePool pool;
  pool.ground_truth = GroundTruth{TaskKind::kRanking, {"joy", "surprise", "neutral"}};
  pool.candidates = {
      "task: ranking\n<think>exact</think>\n<answer>joy, surprise, neutral</answer>",
      "task: ranking\n<think>one swap</think>\n<answer>surprise, joy, neutral</answer>",
      "task: ranking\n<think>two of three</think>\n<answer>joy, surprise, fear</answer>",
      "task: ranking\n<think>disjoint</think>\n<answer>anger, fear, sadness</answer>",
      "joy, surprise, neutral",
  };
  return pool;
}

TEST(SamplingTest, DominantLogitAlwaysDrawn) {
  const CategoricalPolicy policy({25.0, 0.0, 0.0});
  for (auto i : sample_group(policy, 8, 3)) EXPECT_EQ(i, 0u);
}

TEST(SamplingTest, DeterministicForSeed) {
  const CategoricalPolicy policy(std::vector<double>(5, 0.0));
  EXPECT_EQ(sample_group(policy, 8, 11), sample_group(policy, 8, 11));
  EXPECT_THROW(sample_group(policy, 1, 11), Error);
}

TEST(SamplingTest, EmpiricalFrequency) {
  const CategoricalPolicy policy({std::log(3.0), 0.0});
  const auto draws = sample_group(policy, 100000, 5);
  const double f = static_cast<double>(std::count(draws.begin(), draws.end(), 0u)) / 1e5;
  EXPECT_NEAR(f, 0.75, 0.01);
}

struct Instance {
  std::vector<double> logits, old_probs, ref_probs;
  GroupBatch batch;
};

// Random 5-candidate instance kept away from the clip kinks.
Instance random_instance(std::mt19937_64& rng, double eps) {
  std::normal_distribution<double> g(0.0, 1.0);
  for (;;) {
    Instance in;
    std::vector<double> old(5), ref(5);
    for (auto& x : old) x = g(rng);
    for (auto& x : ref) x = g(rng);
    in.logits = old;
    for (auto& x : in.logits) x += 0.3 * g(rng);
    in.old_probs = softmax(old);
    in.ref_probs = softmax(ref);
    const auto p = softmax(in.logits);
    std::vector<double> rewards;
    bool near_kink = false;
    for (int i = 0; i < 8; ++i) {
      const auto c = static_cast<std::size_t>(rng() % 5);
      in.batch.samples.push_back(c);
      rewards.push_back(g(rng));
      const double rho = p[c] / in.old_probs[c];
      near_kink |= std::abs(rho - 1 - eps) < 1e-3 || std::abs(rho - 1 + eps) < 1e-3;
    }
    in.batch.advantages = group_advantages(rewards);
    if (!near_kink) return in;
  }
}

TEST(GradientTest, MatchesCentralDifferences) {
  std::mt19937_64 rng(42);
  const double eps = 0.2, beta = 0.04, h = 1e-6;
  for (int trial = 0; trial < 100; ++trial) {
    const auto in = random_instance(rng, eps);
    const auto g = grpo_gradient(in.logits, in.old_probs, in.ref_probs, in.batch, eps, beta);
    double scale = 1e-8, err = 0.0;
    for (std::size_t j = 0; j < 5; ++j) {
      auto up = in.logits, dn = in.logits;
      up[j] += h;
      dn[j] -= h;
      const double fd = (grpo_objective(up, in.old_probs, in.ref_probs, in.batch, eps, beta).objective -
                         grpo_objective(dn, in.old_probs, in.ref_probs, in.batch, eps, beta).objective) /
                        (2 * h);
      err = std::max(err, std::abs(fd - g[j]));
      scale = std::max(scale, std::abs(g[j]));
    }
    EXPECT_LT(err / scale, 1e-5) << "trial " << trial;
  }
}

TEST(ObjectiveTest, RatioIdentityAtOldPolicy) {
  const std::vector<double> logits{0.1, -0.4, 0.7};
  const auto p = softmax(logits);
  const GroupBatch batch{{0, 2, 2, 1}, {1.0, -0.5, 0.25, -0.75}};
  const auto t = grpo_objective(logits, p, p, batch, 0.2, 0.5);
  EXPECT_EQ(t.clipped, 0u);
  EXPECT_NEAR(t.surrogate, 0.0, 1e-15);
  EXPECT_EQ(t.kl, 0.0);
}

TEST(ObjectiveTest, KlNonNegative) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g;
  for (int i = 0; i < 1000; ++i) {
    std::vector<double> a(6), b(6);
    for (auto& x : a) x = 3 * g(rng);
    for (auto& x : b) x = 3 * g(rng);
    EXPECT_GE(categorical_kl(softmax(a), softmax(b)), 0.0);
  }
  const auto p = softmax(std::vector<double>{1, 2, 3});
  EXPECT_EQ(categorical_kl(p, p), 0.0);
}

TEST(StepTest, EqualRewardsOnlyKlPull) {
  CategoricalPolicy policy({0.5, 0.0, -0.5}, {0.0, 0.0, 0.0});
  const std::vector<double> rewards{0.3, 0.3, 0.3};
  SimConfig cfg;
  cfg.reward.kl_beta = 0.5;
  Engine engine(0);
  const auto row = grpo_step(policy, rewards, cfg, engine);
  for (double a : row.advantages) EXPECT_EQ(a, 0.0);
  EXPECT_LT(policy.logits()[0] - policy.logits()[2], 1.0);
}

TEST(SimulationTest, ConvergesToExactRanking) {
  const auto reg = testing::ekman7_registry();
  const SimConfig cfg;
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const auto trace = run_simulation(ranking_pool(), reg, cfg, 5000, seed);
    EXPECT_EQ(trace.summary.best_index, 0u);
    EXPECT_TRUE(trace.summary.converged);
    ASSERT_TRUE(trace.summary.steps_to_target);
    for (const auto& r : trace.rows) EXPECT_GE(r.kl, 0.0);
  }
}

TEST(SimulationTest, BitReproducible) {
  const auto reg = testing::ekman7_registry();
  const auto a = run_simulation(ranking_pool(), reg, {}, 200, 9);
  const auto b = run_simulation(ranking_pool(), reg, {}, 200, 9);
  ASSERT_EQ(a.rows.size(), b.rows.size());
  for (std::size_t i = 0; i < a.rows.size(); ++i) {
    EXPECT_EQ(a.rows[i].group, b.rows[i].group);
    EXPECT_EQ(a.rows[i].best_probability, b.rows[i].best_probability);
  }
  EXPECT_EQ(a.final_probabilities, b.final_probabilities);
}

TEST(SimulationTest, OnlyCompliantCandidateWins) {
  CandidatePool pool;
  pool.ground_truth = GroundTruth{TaskKind::kRanking, {"joy", "surprise", "neutral"}};
  pool.candidates = {"joy", "task: ranking\n<think>t</think>\n<answer>anger, fear, sadness</answer>", "fear"};
  const auto trace = run_simulation(pool, testing::ekman7_registry(), {}, 3000, 4);
  EXPECT_EQ(trace.summary.best_index, 1u);
  EXPECT_TRUE(trace.summary.converged);
}

TEST(SimulationTest, HeavyKlStaysNearReference) {
  SimConfig cfg;
  cfg.reward.kl_beta = 1e3;
  cfg.learning_rate = 0.005;
  const auto trace = run_simulation(ranking_pool(), testing::ekman7_registry(), cfg, 2000, 5);
  double tv = 0.0;
  for (double p : trace.final_probabilities) tv += std::abs(p - 0.2);
  EXPECT_LE(0.5 * tv, 0.05);
}

TEST(SimulationTest, PoolValidation) {
  CandidatePool pool = ranking_pool();
  pool.candidates = {"a"};
  EXPECT_THROW(pool.validate(), Error);
  pool.candidates = {"a", "b"};
  EXPECT_THROW(pool.validate(), Error);
  EXPECT_THROW(run_simulation(ranking_pool(), testing::ekman7_registry(), {}, 0, 1), Error);
}

}  // namespace
}  // namespace eemo
