#pragma once

// Desk-scale GRPO: a categorical policy over a fixed pool of candidate
// responses, trained with the clipped group-relative objective and a KL pull
// toward the frozen reference policy.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "eemo/error.hpp"
#include "eemo/reward.hpp"
#include "eemo/rng.hpp"

namespace eemo {

struct CandidatePool {
  GroundTruth ground_truth;
  std::vector<std::string> candidates;

  void validate() const {
    ground_truth.validate();
    if (candidates.size() < 2) throw Error(ErrorKind::kValidation, "candidate pool needs at least 2 entries");
    const bool any_compliant = std::any_of(candidates.begin(), candidates.end(),
                                           [](const auto& c) { return parse_response(c).format_ok; });
    if (!any_compliant) throw Error(ErrorKind::kDegenerate, "candidate pool has no compliant response");
  }
};

inline std::vector<double> softmax(std::span<const double> logits) {
  if (logits.empty()) throw Error(ErrorKind::kValidation, "softmax of an empty vector");
  const double m = *std::max_element(logits.begin(), logits.end());
  std::vector<double> p(logits.size());
  double z = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) z += (p[i] = std::exp(logits[i] - m));
  for (auto& x : p) x /= z;
  return p;
}

// Exact KL(p || q) for categorical distributions.
inline double categorical_kl(std::span<const double> p, std::span<const double> q) {
  double kl = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] > 0.0) kl += p[i] * (std::log(p[i]) - std::log(q[i]));
  }
  return std::max(0.0, kl);
}

class CategoricalPolicy {
 public:
  explicit CategoricalPolicy(std::vector<double> logits) : logits_(logits), reference_(std::move(logits)) {
    check();
  }
  CategoricalPolicy(std::vector<double> logits, std::vector<double> reference)
      : logits_(std::move(logits)), reference_(std::move(reference)) {
    if (logits_.size() != reference_.size()) {
      throw Error(ErrorKind::kDimensionMismatch, "policy and reference logits differ in size");
    }
    check();
  }

  const std::vector<double>& logits() const { return logits_; }
  const std::vector<double>& reference_logits() const { return reference_; }
  std::vector<double> probabilities() const { return softmax(logits_); }
  std::vector<double> reference_probabilities() const { return softmax(reference_); }
  std::size_t size() const { return logits_.size(); }

  void set_logits(std::vector<double> logits) {
    logits_ = std::move(logits);
    check();
  }

 private:
  void check() const {
    for (double x : logits_) if (!std::isfinite(x)) throw Error(ErrorKind::kValidation, "non-finite logit");
    for (double x : reference_) if (!std::isfinite(x)) throw Error(ErrorKind::kValidation, "non-finite logit");
  }

  std::vector<double> logits_;
  std::vector<double> reference_;
};

// N i.i.d. draws by inverse CDF over the policy probabilities.
inline std::vector<std::size_t> sample_group(std::span<const double> probabilities, std::size_t n, Engine& engine) {
  if (n < 2) throw Error(ErrorKind::kValidation, "group size must be >= 2");
  std::vector<std::size_t> out;
  out.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double u = uniform01(engine);
    double acc = 0.0;
    std::size_t pick = probabilities.size() - 1;
    for (std::size_t i = 0; i < probabilities.size(); ++i) {
      acc += probabilities[i];
      if (u < acc) {
        pick = i;
        break;
      }
    }
    out.push_back(pick);
  }
  return out;
}

inline std::vector<std::size_t> sample_group(const CategoricalPolicy& policy, std::size_t n, std::uint64_t seed) {
  Engine engine(seed);
  const auto p = policy.probabilities();
  return sample_group(p, n, engine);
}

struct GroupBatch {
  std::vector<std::size_t> samples;
  std::vector<double> advantages;
};

struct ObjectiveTerms {
  double surrogate = 0.0;  // mean clipped surrogate over the group
  double kl = 0.0;         // KL(pi_theta || pi_ref)
  double objective = 0.0;  // surrogate - beta * kl
  std::size_t clipped = 0;  // samples on the constant (clipped) branch
};

// (1/N) sum_i min(rho_i A_i, clip(rho_i, 1-eps, 1+eps) A_i) - beta KL(pi_theta || pi_ref)
// with rho_i = pi_theta(c_i) / pi_old(c_i).
inline ObjectiveTerms grpo_objective(std::span<const double> logits, std::span<const double> old_probs,
                                     std::span<const double> ref_probs, const GroupBatch& batch,
                                     double clip_epsilon, double beta) {
  const auto p = softmax(logits);
  ObjectiveTerms t;
  for (std::size_t i = 0; i < batch.samples.size(); ++i) {
    const auto c = batch.samples[i];
    const double a = batch.advantages[i];
    const double rho = p[c] / old_probs[c];
    const double unclipped = rho * a;
    const double clipped = std::clamp(rho, 1.0 - clip_epsilon, 1.0 + clip_epsilon) * a;
    if (clipped < unclipped) ++t.clipped;
    t.surrogate += std::min(unclipped, clipped);
  }
  t.surrogate /= static_cast<double>(batch.samples.size());
  t.kl = categorical_kl(p, ref_probs);
  t.objective = t.surrogate - beta * t.kl;
  return t;
}

// Analytic gradient of grpo_objective with respect to the logits.
inline std::vector<double> grpo_gradient(std::span<const double> logits, std::span<const double> old_probs,
                                         std::span<const double> ref_probs, const GroupBatch& batch,
                                         double clip_epsilon, double beta) {
  const auto p = softmax(logits);
  const std::size_t k = p.size();
  std::vector<double> g(k, 0.0);
  const double inv_n = 1.0 / static_cast<double>(batch.samples.size());
  for (std::size_t i = 0; i < batch.samples.size(); ++i) {
    const auto c = batch.samples[i];
    const double a = batch.advantages[i];
    const double rho = p[c] / old_probs[c];
    const double clipped = std::clamp(rho, 1.0 - clip_epsilon, 1.0 + clip_epsilon) * a;
    if (clipped < rho * a) continue;  // constant branch
    // d rho / d theta_j = rho (1[j == c] - p_j)
    for (std::size_t j = 0; j < k; ++j) g[j] -= inv_n * a * rho * p[j];
    g[c] += inv_n * a * rho;
  }
  // d KL / d theta_j = p_j (log p_j - log q_j - KL)
  const double kl = categorical_kl(p, ref_probs);
  for (std::size_t j = 0; j < k; ++j) {
    if (p[j] > 0.0) g[j] -= beta * p[j] * (std::log(p[j]) - std::log(ref_probs[j]) - kl);
  }
  return g;
}

struct SimConfig {
  RewardConfig reward;
  double learning_rate = 0.1;
  double target_mass = 0.95;
};

struct SimTraceRow {
  std::size_t step = 0;
  std::vector<std::size_t> group;
  std::vector<double> rewards;
  std::vector<double> advantages;
  double surrogate = 0.0;
  double kl = 0.0;
  double best_probability = 0.0;
};

// Total reward of every pool candidate; scoring is pure, so it is done once.
inline std::vector<double> score_pool(const CandidatePool& pool, const SimilarityRegistry& matrices,
                                      const RewardConfig& config) {
  std::vector<double> rewards;
  rewards.reserve(pool.candidates.size());
  for (const auto& c : pool.candidates) rewards.push_back(total_reward(c, pool.ground_truth, matrices, config).total);
  return rewards;
}

inline std::size_t best_candidate(std::span<const double> rewards) {
  return static_cast<std::size_t>(std::max_element(rewards.begin(), rewards.end()) - rewards.begin());
}

// One sampled group, one ascent step; pi_old is the pre-step policy.
inline SimTraceRow grpo_step(CategoricalPolicy& policy, std::span<const double> candidate_rewards,
                             const SimConfig& config, Engine& engine) {
  if (candidate_rewards.size() != policy.size()) {
    throw Error(ErrorKind::kDimensionMismatch, "pool and policy sizes differ");
  }
  const auto old_probs = policy.probabilities();
  const auto ref_probs = policy.reference_probabilities();
  SimTraceRow row;
  row.group = sample_group(old_probs, config.reward.group_size, engine);
  for (auto c : row.group) row.rewards.push_back(candidate_rewards[c]);
  row.advantages = group_advantages(row.rewards);

  const GroupBatch batch{row.group, row.advantages};
  const auto grad = grpo_gradient(policy.logits(), old_probs, ref_probs, batch, config.reward.clip_epsilon,
                                  config.reward.kl_beta);
  auto logits = policy.logits();
  for (std::size_t j = 0; j < logits.size(); ++j) logits[j] += config.learning_rate * grad[j];
  policy.set_logits(std::move(logits));

  const auto terms = grpo_objective(policy.logits(), old_probs, ref_probs, batch, config.reward.clip_epsilon,
                                    config.reward.kl_beta);
  row.surrogate = terms.surrogate;
  row.kl = terms.kl;
  row.best_probability = policy.probabilities()[best_candidate(candidate_rewards)];
  return row;
}

struct SimSummary {
  std::size_t best_index = 0;
  bool converged = false;
  std::optional<std::size_t> steps_to_target;
  double final_best_probability = 0.0;
  double final_kl = 0.0;
};

struct SimTrace {
  std::vector<SimTraceRow> rows;
  std::vector<double> candidate_rewards;
  std::vector<double> final_probabilities;
  SimSummary summary;
};

// Starts from uniform logits (the reference policy) unless `initial` is given.
inline SimTrace run_simulation(const CandidatePool& pool, const SimilarityRegistry& matrices,
                               const SimConfig& config, std::size_t steps, std::uint64_t seed,
                               std::optional<CategoricalPolicy> initial = std::nullopt) {
  if (steps < 1) throw Error(ErrorKind::kValidation, "simulation needs at least one step");
  pool.validate();
  config.reward.validate();
  SimTrace trace;
  trace.candidate_rewards = score_pool(pool, matrices, config.reward);
  CategoricalPolicy policy = initial ? *initial : CategoricalPolicy(std::vector<double>(pool.candidates.size(), 0.0));
  Engine engine(seed);
  trace.summary.best_index = best_candidate(trace.candidate_rewards);
  trace.rows.reserve(steps);
  for (std::size_t s = 0; s < steps; ++s) {
    auto row = grpo_step(policy, trace.candidate_rewards, config, engine);
    row.step = s + 1;
    if (!trace.summary.steps_to_target && row.best_probability >= config.target_mass) {
      trace.summary.steps_to_target = row.step;
    }
    trace.rows.push_back(std::move(row));
  }
  trace.final_probabilities = policy.probabilities();
  trace.summary.final_best_probability = trace.final_probabilities[trace.summary.best_index];
  trace.summary.final_kl = categorical_kl(trace.final_probabilities, policy.reference_probabilities());
  trace.summary.converged = trace.summary.final_best_probability >= config.target_mass;
  return trace;
}

}  // namespace eemo
