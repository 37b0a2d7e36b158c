#pragma once

// Top-3 emotion ranking ground truths from label distributions or from
// multi-annotator unranked selections.

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <variant>
#include <vector>

#include "eemo/refine/annotation.hpp"

namespace eemo {

enum class RankingProvenance { kDistribution, kProgressive };

struct RankingLabel {
  std::string image_id;
  std::vector<std::string> top3;
  RankingProvenance provenance = RankingProvenance::kDistribution;
};

struct Rejection {
  std::string image_id;
  std::string stage;
  std::string reason;
};

using RankingResult = std::variant<RankingLabel, Rejection>;

// Accepts only when the top-3 probabilities are strictly decreasing by more
// than `gradient_threshold` and the third place is separated from the fourth.
inline RankingResult derive_ranking_distribution(const AnnotationRecord& record,
                                                 double gradient_threshold = 0.0) {
  constexpr auto kStage = "distribution";
  if (!record.distribution) return Rejection{record.image_id, kStage, "record carries no distribution"};
  std::vector<std::pair<std::string, double>> ranked;
  for (const auto& [label, p] : *record.distribution) {
    if (p > 0.0) ranked.emplace_back(label, p);
  }
  if (ranked.size() < 3) {
    return Rejection{record.image_id, kStage, "fewer than 3 categories with positive mass"};
  }
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  for (std::size_t i = 0; i + 1 < ranked.size() && i < 3; ++i) {
    if (ranked[i].second - ranked[i + 1].second <= gradient_threshold) {
      return Rejection{record.image_id, kStage,
                       "no distinct probability gradient between ranks " + std::to_string(i + 1) + " and " +
                           std::to_string(i + 2)};
    }
  }
  return RankingLabel{record.image_id, {ranked[0].first, ranked[1].first, ranked[2].first},
                      RankingProvenance::kDistribution};
}

struct ProgressiveScore {
  std::string label;
  int frequency = 0;         // annotators selecting the label
  double concentration = 0;  // sum of 1/n over those annotators
  double primacy = 0;        // sum of 1/(position+1) over those annotators
};

inline std::vector<ProgressiveScore> progressive_scores(const AnnotationRecord& record) {
  std::vector<ProgressiveScore> scores;
  auto find = [&](const std::string& l) -> ProgressiveScore& {
    for (auto& s : scores) if (s.label == l) return s;
    scores.push_back({l});
    return scores.back();
  };
  for (const auto& raw : record.selections) {
    std::vector<std::string> sel;
    for (const auto& l : raw) {
      if (std::find(sel.begin(), sel.end(), l) == sel.end()) sel.push_back(l);
    }
    if (sel.empty()) continue;
    const double share = 1.0 / static_cast<double>(sel.size());
    for (std::size_t pos = 0; pos < sel.size(); ++pos) {
      auto& s = find(sel[pos]);
      s.frequency += 1;
      s.concentration += share;
      s.primacy += 1.0 / static_cast<double>(pos + 1);
    }
  }
  return scores;
}

namespace detail {
inline constexpr double kScoreTieTolerance = 1e-12;

// -1: a ranks before b, +1: after, 0: tied on all three stages.
inline int progressive_compare(const ProgressiveScore& a, const ProgressiveScore& b) {
  if (a.frequency != b.frequency) return a.frequency > b.frequency ? -1 : 1;
  if (std::abs(a.concentration - b.concentration) > kScoreTieTolerance) {
    return a.concentration > b.concentration ? -1 : 1;
  }
  if (std::abs(a.primacy - b.primacy) > kScoreTieTolerance) return a.primacy > b.primacy ? -1 : 1;
  return 0;
}
}  // namespace detail

// Frequency, then concentration, then primacy of listing; residual ties
// anywhere that affects the top 3 reject the record.
inline RankingResult derive_ranking_progressive(const AnnotationRecord& record) {
  constexpr auto kStage = "progressive";
  auto scores = progressive_scores(record);
  if (scores.size() < 3) return Rejection{record.image_id, kStage, "fewer than 3 distinct labels selected"};
  std::stable_sort(scores.begin(), scores.end(), [](const auto& a, const auto& b) {
    return detail::progressive_compare(a, b) < 0;
  });
  for (std::size_t i = 0; i + 1 < scores.size() && i < 3; ++i) {
    if (detail::progressive_compare(scores[i], scores[i + 1]) == 0) {
      return Rejection{record.image_id, kStage,
                       "'" + scores[i].label + "' and '" + scores[i + 1].label + "' tied after all three stages"};
    }
  }
  return RankingLabel{record.image_id, {scores[0].label, scores[1].label, scores[2].label},
                      RankingProvenance::kProgressive};
}

}  // namespace eemo
