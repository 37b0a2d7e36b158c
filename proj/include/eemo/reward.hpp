#pragma once

// GRPO reward system: format compliance, the ranking / regression /
// similarity task rewards, their gated composite and group advantages.

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "eemo/error.hpp"
#include "eemo/taxonomy.hpp"
#include "eemo/text.hpp"

namespace eemo {

struct RewardConfig {
  std::array<double, 3> positional_weights{5.0, 3.0, 2.0};
  double format_weight = 0.2;  // lambda_0
  double lambda_base = 0.4;
  double lambda_peak = 0.6;
  double sigma = 0.05;
  double lambda_sim = 0.6;
  int margin_power = 2;     // m
  int curvature_power = 3;  // p
  double clip_epsilon = 0.2;
  double kl_beta = 0.001;
  std::size_t group_size = 8;

  void validate() const {
    auto nonneg = [](double x) { return std::isfinite(x) && x >= 0.0; };
    for (double w : positional_weights) {
      if (!nonneg(w)) throw Error(ErrorKind::kValidation, "positional weights must be non-negative");
    }
    if (positional_weights[0] + positional_weights[1] + positional_weights[2] <= 0.0) {
      throw Error(ErrorKind::kValidation, "positional weights sum to zero");
    }
    if (!nonneg(format_weight) || !nonneg(lambda_base) || !nonneg(lambda_peak) || !nonneg(clip_epsilon) ||
        !nonneg(kl_beta)) {
      throw Error(ErrorKind::kValidation, "reward coefficients must be non-negative");
    }
    if (!nonneg(lambda_sim) || lambda_sim > 1.0) {
      throw Error(ErrorKind::kValidation, "lambda_sim must lie in [0,1]");
    }
    if (!(sigma > 0.0) || !std::isfinite(sigma)) throw Error(ErrorKind::kValidation, "sigma must be > 0");
    if (margin_power < 1 || curvature_power < 1) {
      throw Error(ErrorKind::kValidation, "similarity exponents m and p must be >= 1");
    }
    if (group_size < 2) throw Error(ErrorKind::kValidation, "group size must be >= 2");
  }

  double weight_sum() const {
    return positional_weights[0] + positional_weights[1] + positional_weights[2];
  }
};

enum class TaskKind { kRanking, kRegression, kClassification };

inline std::string_view task_tag(TaskKind kind) {
  switch (kind) {
    case TaskKind::kRanking: return "ranking";
    case TaskKind::kRegression: return "vad";
    case TaskKind::kClassification: return "dec";
  }
  return "";
}

inline std::optional<TaskKind> task_from_tag(std::string_view tag) {
  if (tag == "ranking") return TaskKind::kRanking;
  if (tag == "vad") return TaskKind::kRegression;
  if (tag == "dec") return TaskKind::kClassification;
  return std::nullopt;
}

struct GroundTruth {
  TaskKind task = TaskKind::kRanking;
  std::vector<std::string> ranking;  // kRanking: exactly 3 distinct labels
  std::optional<double> score;       // kRegression: in [0,1]
  std::string dimension;             // kRegression: valence / arousal / dominance
  std::string label;                 // kClassification
  std::string set;                   // kClassification: governing EmotionSet

  void validate() const {
    switch (task) {
      case TaskKind::kRanking: {
        if (ranking.size() != 3) throw Error(ErrorKind::kValidation, "ranking ground truth needs 3 labels");
        if (ranking[0] == ranking[1] || ranking[0] == ranking[2] || ranking[1] == ranking[2]) {
          throw Error(ErrorKind::kValidation, "ranking ground truth labels must be distinct");
        }
        if (score || !label.empty()) throw Error(ErrorKind::kValidation, "ranking ground truth has extra fields");
        break;
      }
      case TaskKind::kRegression:
        if (!score || !(*score >= 0.0 && *score <= 1.0)) {
          throw Error(ErrorKind::kValidation, "regression ground truth needs a score in [0,1]");
        }
        if (!ranking.empty() || !label.empty()) {
          throw Error(ErrorKind::kValidation, "regression ground truth has extra fields");
        }
        break;
      case TaskKind::kClassification:
        if (label.empty() || set.empty()) {
          throw Error(ErrorKind::kValidation, "classification ground truth needs a label and its set");
        }
        if (!ranking.empty() || score) throw Error(ErrorKind::kValidation, "classification ground truth has extra fields");
        break;
    }
  }
};

// ---------------------------------------------------------------------------
// Response parsing

struct RankingPayload {
  std::vector<std::string> labels;
};
struct ScorePayload {
  double value = 0.0;
};
struct LabelPayload {
  std::string label;
};
struct Unparsed {};

using AnswerPayload = std::variant<Unparsed, RankingPayload, ScorePayload, LabelPayload>;

struct ParsedResponse {
  bool format_ok = false;
  std::string task_tag;
  std::string thinking;
  std::string answer;
  AnswerPayload payload;
};

// Duplicates collapse to their first occurrence.
inline std::vector<std::string> dedup_labels(std::span<const std::string> labels) {
  std::vector<std::string> out;
  for (const auto& l : labels) {
    if (std::find(out.begin(), out.end(), l) == out.end()) out.push_back(l);
  }
  return out;
}

namespace detail {

inline bool is_label_token(std::string_view s) {
  if (s.empty()) return false;
  return std::all_of(s.begin(), s.end(), [](unsigned char c) {
    return std::isalnum(c) || c == '_' || c == '-' || c == '/';
  });
}

inline bool contains_tag(std::string_view s) {
  for (const auto* tag : {"<think>", "</think>", "<answer>", "</answer>"}) {
    if (s.find(tag) != std::string_view::npos) return true;
  }
  return false;
}

inline AnswerPayload parse_payload(TaskKind kind, std::string_view answer) {
  answer = text::trim(answer);
  switch (kind) {
    case TaskKind::kRanking: {
      std::vector<std::string> labels;
      for (const auto& part : text::split(answer, ',')) {
        const auto token = text::lower(text::trim(part));
        if (!is_label_token(token)) return Unparsed{};
        labels.push_back(token);
      }
      labels = dedup_labels(labels);
      if (labels.empty() || labels.size() > 3) return Unparsed{};
      return RankingPayload{std::move(labels)};
    }
    case TaskKind::kRegression: {
      // digits, optionally '.' and 1-4 fraction digits; value within [0,1]
      const auto dot = answer.find('.');
      const auto int_part = answer.substr(0, dot);
      const auto frac = dot == std::string_view::npos ? std::string_view{} : answer.substr(dot + 1);
      auto digits = [](std::string_view s) {
        return !s.empty() && std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isdigit(c); });
      };
      if (!digits(int_part)) return Unparsed{};
      if (dot != std::string_view::npos && (!digits(frac) || frac.size() > 4)) return Unparsed{};
      const double v = std::stod(std::string(answer));
      if (v < 0.0 || v > 1.0) return Unparsed{};
      return ScorePayload{v};
    }
    case TaskKind::kClassification: {
      const auto token = text::lower(answer);
      if (!is_label_token(token)) return Unparsed{};
      return LabelPayload{token};
    }
  }
  return Unparsed{};
}

}  // namespace detail

// Response grammar (bit-exact):
//   [ws] "task:" [sp] <ranking|vad|dec> [sp] "\n"
//   [ws] "<think>" body "</think>" [ws] "<answer>" payload "</answer>" [ws]
// Bodies are non-empty after trimming and contain none of the four tags.
inline ParsedResponse parse_response(std::string_view raw) {
  ParsedResponse out;
  auto rest = raw.substr(std::min(raw.size(), raw.find_first_not_of(" \t\r\n")));
  const auto eol = rest.find('\n');
  if (eol == std::string_view::npos) return out;
  const auto header = text::trim(rest.substr(0, eol));
  if (header.substr(0, 5) != "task:") return out;
  out.task_tag = std::string(text::trim(header.substr(5)));
  const auto kind = task_from_tag(out.task_tag);

  rest = text::trim(rest.substr(eol + 1));
  constexpr std::string_view kThinkOpen = "<think>", kThinkClose = "</think>";
  constexpr std::string_view kAnswerOpen = "<answer>", kAnswerClose = "</answer>";
  if (rest.substr(0, kThinkOpen.size()) != kThinkOpen) return out;
  rest.remove_prefix(kThinkOpen.size());
  const auto think_end = rest.find(kThinkClose);
  if (think_end == std::string_view::npos) return out;
  const auto thinking = rest.substr(0, think_end);
  rest = text::trim(rest.substr(think_end + kThinkClose.size()));
  if (rest.substr(0, kAnswerOpen.size()) != kAnswerOpen) return out;
  rest.remove_prefix(kAnswerOpen.size());
  if (rest.size() < kAnswerClose.size() || rest.substr(rest.size() - kAnswerClose.size()) != kAnswerClose) {
    return out;
  }
  const auto answer = rest.substr(0, rest.size() - kAnswerClose.size());
  if (detail::contains_tag(thinking) || detail::contains_tag(answer)) return out;
  if (text::trim(thinking).empty() || text::trim(answer).empty()) return out;

  out.thinking = std::string(text::trim(thinking));
  out.answer = std::string(text::trim(answer));
  if (!kind) return out;
  out.format_ok = true;
  out.payload = detail::parse_payload(*kind, out.answer);
  return out;
}

inline std::pair<ParsedResponse, double> format_reward(std::string_view raw) {
  auto parsed = parse_response(raw);
  const double r = parsed.format_ok ? 1.0 : 0.0;
  return {std::move(parsed), r};
}

// ---------------------------------------------------------------------------
// Ranking reward

inline double weighted_hit(std::span<const std::string> gt, std::span<const std::string> pred,
                           const std::array<double, 3>& weights = {5.0, 3.0, 2.0}) {
  const auto p = dedup_labels(pred);
  double sum = 0.0;
  for (std::size_t k = 0; k < gt.size() && k < 3; ++k) {
    if (std::find(p.begin(), p.end(), gt[k]) != p.end()) sum += weights[k];
  }
  return sum;
}

// Common labels, once in ground-truth order and once in prediction order.
inline std::pair<std::vector<std::string>, std::vector<std::string>> order_preserving_intersection(
    std::span<const std::string> gt, std::span<const std::string> pred) {
  const auto g = dedup_labels(gt);
  const auto p = dedup_labels(pred);
  std::pair<std::vector<std::string>, std::vector<std::string>> out;
  for (const auto& l : g) {
    if (std::find(p.begin(), p.end(), l) != p.end()) out.first.push_back(l);
  }
  for (const auto& l : p) {
    if (std::find(g.begin(), g.end(), l) != g.end()) out.second.push_back(l);
  }
  return out;
}

// Kendall tau between two orderings of one label set; nullopt below 2 items.
inline std::optional<double> kendall_tau(std::span<const std::string> a, std::span<const std::string> b) {
  if (a.size() != b.size()) {
    throw Error(ErrorKind::kValidation, "kendall_tau needs two orderings of the same labels");
  }
  const std::size_t n = a.size();
  std::vector<std::size_t> pos_in_b(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto it = std::find(b.begin(), b.end(), a[i]);
    if (it == b.end()) throw Error(ErrorKind::kValidation, "kendall_tau label sets differ");
    pos_in_b[i] = static_cast<std::size_t>(it - b.begin());
  }
  if (n < 2) return std::nullopt;
  long concordant = 0, discordant = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (pos_in_b[i] < pos_in_b[j]) ++concordant; else ++discordant;
    }
  }
  return static_cast<double>(concordant - discordant) / (static_cast<double>(n * (n - 1)) / 2.0);
}

// Length-discrepancy weight by number of correctly predicted labels.
inline double coverage_weight(std::size_t correct) {
  switch (correct) {
    case 3: return 1.0;
    case 2: return 1.0 / 3.0;
    default: return 0.0;
  }
}

// Shared hit / order machinery of the ranking reward and the ranking score.
struct RankingTerms {
  double hit_sum = 0.0;
  double hit_max = 10.0;
  std::size_t correct = 0;
  std::optional<double> tau;
  double coverage = 0.0;

  double hit_fraction() const { return hit_sum / hit_max; }
  // (tau + 1) / 2 in [0, 1]; zero when tau is undefined.
  double order_fraction() const { return tau ? (*tau + 1.0) / 2.0 : 0.0; }
};

inline RankingTerms ranking_terms(std::span<const std::string> gt, std::span<const std::string> pred,
                                  const std::array<double, 3>& weights = {5.0, 3.0, 2.0}) {
  RankingTerms t;
  t.hit_sum = weighted_hit(gt, pred, weights);
  t.hit_max = weights[0] + weights[1] + weights[2];
  const auto [g, p] = order_preserving_intersection(gt, pred);
  t.correct = g.size();
  t.tau = kendall_tau(g, p);
  t.coverage = coverage_weight(t.correct);
  return t;
}

// (hits / 20 + W * (tau + 1) / 4)^2 under the default weights.
inline double ranking_reward(std::span<const std::string> gt, std::span<const std::string> pred,
                             const RewardConfig& config = {}) {
  const auto t = ranking_terms(gt, pred, config.positional_weights);
  const double base = 0.5 * t.hit_fraction() + t.coverage * 0.5 * t.order_fraction();
  return base * base;
}

// ---------------------------------------------------------------------------
// Regression and similarity rewards

inline double regression_reward(double truth, double predicted, const RewardConfig& config = {}) {
  if (!std::isfinite(predicted)) return 0.0;
  const double delta = std::abs(truth - predicted);
  return config.lambda_base * std::max(0.0, 1.0 - delta) +
         config.lambda_peak * std::exp(-(delta * delta) / (2.0 * config.sigma * config.sigma));
}

inline double similarity_reward(std::string_view gt, std::string_view pred, const SimilarityMatrix& vad,
                                const SimilarityMatrix& emb, const RewardConfig& config = {}) {
  const std::size_t gv = vad.index(gt), pv = vad.index(pred);
  const std::size_t ge = emb.index(gt), pe = emb.index(pred);
  if (gt == pred) return 1.0;
  if (!emb.mu_max()) throw Error(ErrorKind::kValidation, "embedding matrix has no mu_max");
  const double s_vad = vad.at(gv, pv);
  const double ratio = std::min(1.0, emb.at(ge, pe) / *emb.mu_max());
  const double inner = config.lambda_sim * s_vad +
                       (1.0 - config.lambda_sim) * std::pow(ratio, config.margin_power);
  return std::pow(inner, config.curvature_power);
}

// VAD and embedding similarity matrices per emotion set name.
struct SimilarityRegistry {
  struct Entry {
    SimilarityMatrix vad;
    SimilarityMatrix embedding;
  };
  std::map<std::string, Entry> sets;

  void add(SimilarityMatrix vad, SimilarityMatrix embedding) {
    if (vad.set_name() != embedding.set_name() || vad.labels() != embedding.labels()) {
      throw Error(ErrorKind::kValidation, "VAD and embedding matrices index different label spaces");
    }
    auto name = vad.set_name();
    sets.insert_or_assign(std::move(name), Entry{std::move(vad), std::move(embedding)});
  }

  const Entry& at(const std::string& set) const {
    const auto it = sets.find(set);
    if (it == sets.end()) throw Error(ErrorKind::kNotFound, "no similarity matrices for set " + set);
    return it->second;
  }
};

struct RewardBreakdown {
  double format = 0.0;       // R_fmt in {0, 1}
  double task_reward = 0.0;  // gated task reward in [0, 1]
  double total = 0.0;        // lambda_0 * R_fmt + task_reward
  bool gate_open = false;
  std::map<std::string, double> diagnostics;
};

// The task gate opens only for a compliant response whose tag matches the
// ground-truth task and whose payload parsed into that task's shape.
inline RewardBreakdown total_reward(const ParsedResponse& parsed, const GroundTruth& gt,
                                    const SimilarityRegistry& matrices, const RewardConfig& config = {}) {
  RewardBreakdown out;
  out.format = parsed.format_ok ? 1.0 : 0.0;
  const auto kind = task_from_tag(parsed.task_tag);
  const bool tag_matches = parsed.format_ok && kind && *kind == gt.task;

  if (tag_matches) {
    switch (gt.task) {
      case TaskKind::kRanking:
        if (const auto* p = std::get_if<RankingPayload>(&parsed.payload)) {
          const auto t = ranking_terms(gt.ranking, p->labels, config.positional_weights);
          out.gate_open = true;
          out.task_reward = ranking_reward(gt.ranking, p->labels, config);
          out.diagnostics["hit_sum"] = t.hit_sum;
          out.diagnostics["correct"] = static_cast<double>(t.correct);
          out.diagnostics["coverage_weight"] = t.coverage;
          if (t.tau) out.diagnostics["tau"] = *t.tau;
        }
        break;
      case TaskKind::kRegression:
        if (const auto* p = std::get_if<ScorePayload>(&parsed.payload)) {
          out.gate_open = true;
          out.task_reward = regression_reward(*gt.score, p->value, config);
          out.diagnostics["delta"] = std::abs(*gt.score - p->value);
        }
        break;
      case TaskKind::kClassification:
        if (const auto* p = std::get_if<LabelPayload>(&parsed.payload)) {
          const auto& entry = matrices.at(gt.set);
          if (entry.vad.labels().end() !=
              std::find(entry.vad.labels().begin(), entry.vad.labels().end(), p->label)) {
            out.gate_open = true;
            out.task_reward = similarity_reward(gt.label, p->label, entry.vad, entry.embedding, config);
            out.diagnostics["s_vad"] = entry.vad.at(gt.label, p->label);
            out.diagnostics["s_emb_ratio"] =
                std::min(1.0, entry.embedding.at(gt.label, p->label) / *entry.embedding.mu_max());
          }
        }
        break;
    }
  }
  out.total = config.format_weight * out.format + out.task_reward;
  return out;
}

inline RewardBreakdown total_reward(std::string_view raw_response, const GroundTruth& gt,
                                    const SimilarityRegistry& matrices, const RewardConfig& config = {}) {
  return total_reward(parse_response(raw_response), gt, matrices, config);
}

// ---------------------------------------------------------------------------
// Group advantages

inline constexpr double kZeroVarianceGuard = 1e-12;

// (r_i - mean) / std with the population standard deviation.
inline std::vector<double> group_advantages(std::span<const double> rewards) {
  if (rewards.size() < 2) throw Error(ErrorKind::kValidation, "group advantages need at least 2 rewards");
  const double n = static_cast<double>(rewards.size());
  const double mean = std::accumulate(rewards.begin(), rewards.end(), 0.0) / n;
  double var = 0.0;
  for (double r : rewards) var += (r - mean) * (r - mean);
  const double sd = std::sqrt(var / n);
  std::vector<double> out(rewards.size(), 0.0);
  if (sd < kZeroVarianceGuard) return out;
  for (std::size_t i = 0; i < rewards.size(); ++i) out[i] = (rewards[i] - mean) / sd;
  return out;
}

}  // namespace eemo
