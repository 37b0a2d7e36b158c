#pragma once

// Benchmark-side measurements: ranking score, rank/linear correlation,
// probability-based VAD scoring, classification and description scores.

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <map>
#include <numeric>
#include <optional>
#include <regex>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "eemo/error.hpp"
#include "eemo/reward.hpp"
#include "eemo/text.hpp"

namespace eemo {

// Per-item emotion ranking score in [0, 100]: two components each scaled to 50.
inline double ranking_score(std::span<const std::string> gt, std::span<const std::string> pred,
                            const std::array<double, 3>& weights = {5.0, 3.0, 2.0}) {
  const auto t = ranking_terms(gt, pred, weights);
  return 50.0 * t.hit_fraction() + 50.0 * t.coverage * t.order_fraction();
}

// ---------------------------------------------------------------------------
// Correlation

inline double pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) {
    throw Error(ErrorKind::kValidation, "correlation needs two equal-length series of at least 2 values");
  }
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) throw Error(ErrorKind::kDegenerate, "correlation of a constant series");
  return sxy / std::sqrt(sxx * syy);
}

// 1-based ranks, ties receive the average of the positions they span.
inline std::vector<double> fractional_ranks(std::span<const double> v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
    i = j + 1;
  }
  return ranks;
}

inline double plcc(std::span<const double> x, std::span<const double> y) { return pearson(x, y); }

inline double srcc(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw Error(ErrorKind::kValidation, "srcc inputs differ in length");
  const auto rx = fractional_ranks(x);
  const auto ry = fractional_ranks(y);
  return pearson(rx, ry);
}

// ---------------------------------------------------------------------------
// Probability-based VAD scoring

struct LevelWeights {
  double high = 1.0;
  double medium = 0.5;
  double low = 0.0;
};

// Weighted mean of level probabilities ordered {high, medium, low}.
inline double probability_vad_score(const std::array<double, 3>& probabilities, const LevelWeights& w = {}) {
  return w.high * probabilities[0] + w.medium * probabilities[1] + w.low * probabilities[2];
}

inline std::array<double, 3> softmax3(const std::array<double, 3>& logits) {
  for (double x : logits) {
    if (!std::isfinite(x)) throw Error(ErrorKind::kValidation, "non-finite level logit");
  }
  const double m = std::max({logits[0], logits[1], logits[2]});
  std::array<double, 3> p{};
  double z = 0.0;
  for (std::size_t i = 0; i < 3; ++i) z += (p[i] = std::exp(logits[i] - m));
  for (auto& x : p) x /= z;
  return p;
}

inline double probability_vad_score_from_logits(const std::array<double, 3>& logits, const LevelWeights& w = {}) {
  return probability_vad_score(softmax3(logits), w);
}

// ---------------------------------------------------------------------------
// Classification

struct ClassificationResult {
  double macro_f1 = 0.0;
  double accuracy = 0.0;
  std::map<std::string, double> per_class_f1;
};

// Predictions outside `classes` (including unparsed, passed as "") count as a
// distinct wrong class. Macro F1 averages over classes that occur in the
// ground truth or the predictions.
inline ClassificationResult classification_metrics(std::span<const std::string> gt,
                                                   std::span<const std::string> pred,
                                                   std::span<const std::string> classes) {
  if (gt.empty()) throw Error(ErrorKind::kValidation, "classification metrics on empty input");
  if (gt.size() != pred.size()) throw Error(ErrorKind::kValidation, "gt and predictions differ in length");
  const std::set<std::string> known(classes.begin(), classes.end());
  std::map<std::string, std::array<std::size_t, 3>> counts;  // tp, fp, fn
  std::size_t correct = 0;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    if (!known.contains(gt[i])) {
      throw Error(ErrorKind::kUnknownLabel, "ground-truth label '" + gt[i] + "' not in class set");
    }
    if (gt[i] == pred[i]) {
      ++correct;
      ++counts[gt[i]][0];
    } else {
      ++counts[gt[i]][2];
      if (known.contains(pred[i])) ++counts[pred[i]][1];
    }
  }
  ClassificationResult out;
  out.accuracy = static_cast<double>(correct) / static_cast<double>(gt.size());
  double sum = 0.0;
  for (const auto& [label, c] : counts) {
    const double tp = static_cast<double>(c[0]);
    const double denom = 2.0 * tp + static_cast<double>(c[1]) + static_cast<double>(c[2]);
    const double f1 = denom > 0.0 ? 2.0 * tp / denom : 0.0;
    out.per_class_f1[label] = f1;
    sum += f1;
  }
  out.macro_f1 = sum / static_cast<double>(counts.size());
  return out;
}

// ---------------------------------------------------------------------------
// Description scoring

inline int conciseness_score(std::size_t generated_words, std::size_t reference_words) {
  if (reference_words < 1) throw Error(ErrorKind::kValidation, "reference length must be >= 1 word");
  // Integer form of the length bands: 3*gen against multiples of the reference.
  const auto g3 = 3 * generated_words;
  const auto r = reference_words;
  if (g3 >= 2 * r && generated_words <= 2 * r) return 2;
  if ((g3 >= r && g3 < 2 * r) || (generated_words > 2 * r && generated_words <= 4 * r)) return 1;
  return 0;
}

struct JudgeScores {
  std::vector<int> completeness;
  std::vector<int> precision;
  std::vector<int> relevance;

  void validate() const {
    if (completeness.empty() || precision.empty() || relevance.empty()) {
      throw Error(ErrorKind::kValidation, "judge scores need at least one round per dimension");
    }
    for (const auto* dim : {&completeness, &precision, &relevance}) {
      for (int s : *dim) {
        if (s < 0 || s > 2) throw Error(ErrorKind::kValidation, "judge score outside {0,1,2}");
      }
    }
  }

  static double mean(const std::vector<int>& v) {
    return static_cast<double>(std::accumulate(v.begin(), v.end(), 0)) / static_cast<double>(v.size());
  }
};

// (1/2)(1/4)(S_comp + S_prec + S_rele + S_conc), judge dimensions averaged over rounds.
inline double description_score(const JudgeScores& judge, int conciseness) {
  judge.validate();
  if (conciseness < 0 || conciseness > 2) throw Error(ErrorKind::kValidation, "conciseness outside {0,1,2}");
  const double sum = JudgeScores::mean(judge.completeness) + JudgeScores::mean(judge.precision) +
                     JudgeScores::mean(judge.relevance) + static_cast<double>(conciseness);
  return 0.5 * 0.25 * sum;
}

// ---------------------------------------------------------------------------
// Free-text benchmark response parsing. Never throws on garbage input.

enum class ResponseKind { kChoice, kRanking, kScore, kLabel };

using BenchmarkPayload = std::variant<Unparsed, std::string, std::vector<std::string>, double>;

// Grammar, first match wins:
//   choice  : "(X)"; then "answer/option [is|:] X"; then a line starting "X." "X)" "X:";
//             then a response that is a lone letter. X in A-H.
//   ranking : vocabulary labels in order of appearance, duplicates dropped, first 3
//   score   : first decimal number
//   label   : first vocabulary label
inline BenchmarkPayload parse_benchmark_response(std::string_view raw, ResponseKind kind,
                                                 std::span<const std::string> vocabulary = {}) {
  const std::string s(raw);
  std::smatch m;
  switch (kind) {
    case ResponseKind::kChoice: {
      static const std::regex kParen(R"(\(([A-H])\))");
      static const std::regex kAnswerIs(R"((?:[Aa]nswer|[Oo]ption)\s*(?:is|:)?\s*([A-H])\b)");
      static const std::regex kLineStart(R"((?:^|\n)\s*([A-H])[\.\):](?:\s|$))");
      static const std::regex kLone(R"(^\s*([A-H])\s*$)");
      for (const auto* re : {&kParen, &kAnswerIs, &kLineStart, &kLone}) {
        if (std::regex_search(s, m, *re)) return m[1].str();
      }
      return Unparsed{};
    }
    case ResponseKind::kScore: {
      static const std::regex kNumber(R"([-+]?(?:\d+\.?\d*|\.\d+))");
      if (std::regex_search(s, m, kNumber)) {
        const double v = std::stod(m[0].str());
        if (std::isfinite(v)) return v;
      }
      return Unparsed{};
    }
    case ResponseKind::kRanking:
    case ResponseKind::kLabel: {
      std::vector<std::string> found;
      for (const auto& tok : text::word_tokens(s)) {
        if (std::find(vocabulary.begin(), vocabulary.end(), tok) == vocabulary.end()) continue;
        if (kind == ResponseKind::kLabel) return tok;
        if (std::find(found.begin(), found.end(), tok) == found.end()) found.push_back(tok);
        if (found.size() == 3) break;
      }
      if (found.empty()) return Unparsed{};
      return found;
    }
  }
  return Unparsed{};
}

}  // namespace eemo
