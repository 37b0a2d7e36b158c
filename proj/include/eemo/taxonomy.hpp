#pragma once

// Emotion label spaces, label mappings and intra-set similarity matrices.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "eemo/error.hpp"
#include "eemo/io/table.hpp"
#include "eemo/text.hpp"

namespace eemo {

struct VadVector {
  double valence = 0.0;
  double arousal = 0.0;
  double dominance = 0.0;

  double operator[](std::size_t i) const {
    return i == 0 ? valence : (i == 1 ? arousal : dominance);
  }
  double& operator[](std::size_t i) {
    return i == 0 ? valence : (i == 1 ? arousal : dominance);
  }

  bool is_finite() const {
    return std::isfinite(valence) && std::isfinite(arousal) && std::isfinite(dominance);
  }
  bool in_unit_cube() const {
    auto ok = [](double x) { return x >= 0.0 && x <= 1.0; };
    return is_finite() && ok(valence) && ok(arousal) && ok(dominance);
  }

  friend bool operator==(const VadVector&, const VadVector&) = default;
};

using DimensionWeights = std::array<double, 3>;

inline double weighted_distance(const VadVector& a, const VadVector& b,
                                const DimensionWeights& w = {1.0, 1.0, 1.0}) {
  double sum = 0.0;
  for (std::size_t d = 0; d < 3; ++d) {
    const double diff = a[d] - b[d];
    sum += w[d] * diff * diff;
  }
  return std::sqrt(sum);
}

struct EmotionLabel {
  std::string id;
  std::string display;
};

enum class AnchorPolicy { kRequired, kOptional };

// A closed, ordered label space. Label order is fixed at construction and
// defines the row/column order of every SimilarityMatrix built over the set.
class EmotionSet {
 public:
  EmotionSet() = default;

  EmotionSet(std::string name, std::vector<EmotionLabel> labels,
             std::vector<std::optional<VadVector>> anchors,
             std::vector<std::string> descriptions,
             AnchorPolicy policy = AnchorPolicy::kRequired)
      : name_(std::move(name)),
        labels_(std::move(labels)),
        anchors_(std::move(anchors)),
        descriptions_(std::move(descriptions)) {
    validate(policy);
  }

  const std::string& name() const { return name_; }
  const std::vector<EmotionLabel>& labels() const { return labels_; }
  std::size_t size() const { return labels_.size(); }

  std::optional<std::size_t> index_of(std::string_view id) const {
    const auto it = index_.find(std::string(id));
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }
  bool contains(std::string_view id) const { return index_of(id).has_value(); }

  std::size_t require_index(std::string_view id) const {
    const auto idx = index_of(id);
    if (!idx) {
      throw Error(ErrorKind::kUnknownLabel,
                  "label '" + std::string(id) + "' is not in set " + name_);
    }
    return *idx;
  }

  bool has_anchor(std::size_t i) const { return anchors_.at(i).has_value(); }
  bool has_all_anchors() const {
    return std::all_of(anchors_.begin(), anchors_.end(),
                       [](const auto& a) { return a.has_value(); });
  }
  const VadVector& anchor(std::size_t i) const {
    if (!anchors_.at(i)) {
      throw Error(ErrorKind::kMissingField,
                  "set " + name_ + " has no VAD anchor for '" + labels_[i].id + "'");
    }
    return *anchors_[i];
  }
  const VadVector& anchor(std::string_view id) const { return anchor(require_index(id)); }

  const std::string& description(std::size_t i) const { return descriptions_.at(i); }
  const std::string& description(std::string_view id) const {
    return descriptions_.at(require_index(id));
  }

  std::vector<std::string> ids() const {
    std::vector<std::string> out;
    out.reserve(labels_.size());
    for (const auto& l : labels_) out.push_back(l.id);
    return out;
  }

 private:
  void validate(AnchorPolicy policy) {
    if (name_.empty()) throw Error(ErrorKind::kValidation, "emotion set has no name");
    if (labels_.empty()) throw Error(ErrorKind::kValidation, "emotion set " + name_ + " has no labels");
    if (anchors_.size() != labels_.size() || descriptions_.size() != labels_.size()) {
      throw Error(ErrorKind::kValidation, "emotion set " + name_ + ": per-label field counts differ");
    }
    for (std::size_t i = 0; i < labels_.size(); ++i) {
      const auto& id = labels_[i].id;
      if (id.empty()) throw Error(ErrorKind::kValidation, "empty label id in set " + name_);
      if (id != text::lower(id) || id.find_first_of(" \t,") != std::string::npos) {
        throw Error(ErrorKind::kValidation, "label id '" + id + "' is not a lowercase token");
      }
      if (!index_.emplace(id, i).second) {
        throw Error(ErrorKind::kDuplicateLabel, "label '" + id + "' repeated in set " + name_);
      }
      if (!anchors_[i]) {
        if (policy == AnchorPolicy::kRequired) {
          throw Error(ErrorKind::kMissingField, "missing VAD anchor for '" + id + "' in set " + name_);
        }
      } else if (!anchors_[i]->in_unit_cube()) {
        throw Error(ErrorKind::kValidation, "anchor for '" + id + "' outside [0,1]^3");
      }
      if (descriptions_[i].empty()) {
        throw Error(ErrorKind::kMissingField, "missing description for '" + id + "' in set " + name_);
      }
    }
  }

  std::string name_;
  std::vector<EmotionLabel> labels_;
  std::vector<std::optional<VadVector>> anchors_;
  std::vector<std::string> descriptions_;
  std::unordered_map<std::string, std::size_t> index_;
};

inline constexpr std::string_view kEmotionSetSchema = "eemo.emotion_set/1";

// Definition file layout:
//   {"schema": "eemo.emotion_set/1", "name": "ekman7",
//    "labels": [{"id": "anger", "display": "Anger",
//                "anchor": [0.2160, 0.6575, 0.5032], "description": "..."}, ...]}
inline EmotionSet emotion_set_from_json(const nlohmann::json& j,
                                        AnchorPolicy policy = AnchorPolicy::kRequired) {
  try {
    if (j.contains("schema") && j.at("schema").get<std::string>() != kEmotionSetSchema) {
      throw Error(ErrorKind::kParse, "unsupported emotion set schema " + j.at("schema").dump());
    }
    std::vector<EmotionLabel> labels;
    std::vector<std::optional<VadVector>> anchors;
    std::vector<std::string> descriptions;
    for (const auto& entry : j.at("labels")) {
      EmotionLabel label;
      label.id = entry.at("id").get<std::string>();
      label.display = entry.value("display", label.id);
      labels.push_back(std::move(label));
      if (entry.contains("anchor") && !entry.at("anchor").is_null()) {
        const auto& a = entry.at("anchor");
        if (!a.is_array() || a.size() != 3) {
          throw Error(ErrorKind::kParse, "anchor must be a 3-element array");
        }
        anchors.emplace_back(VadVector{a[0].get<double>(), a[1].get<double>(), a[2].get<double>()});
      } else {
        anchors.emplace_back(std::nullopt);
      }
      descriptions.push_back(entry.value("description", std::string{}));
    }
    return EmotionSet(j.at("name").get<std::string>(), std::move(labels), std::move(anchors),
                      std::move(descriptions), policy);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kParse, std::string("emotion set: ") + e.what());
  }
}

inline nlohmann::json to_json(const EmotionSet& set) {
  nlohmann::json labels = nlohmann::json::array();
  for (std::size_t i = 0; i < set.size(); ++i) {
    nlohmann::json entry{{"id", set.labels()[i].id}, {"display", set.labels()[i].display}};
    if (set.has_anchor(i)) {
      const auto& a = set.anchor(i);
      entry["anchor"] = {a.valence, a.arousal, a.dominance};
    }
    entry["description"] = set.description(i);
    labels.push_back(std::move(entry));
  }
  return {{"schema", kEmotionSetSchema}, {"name", set.name()}, {"labels", std::move(labels)}};
}

inline EmotionSet load_emotion_set(const std::string& path,
                                   AnchorPolicy policy = AnchorPolicy::kRequired) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(io::read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kParse, path + ": " + e.what());
  }
  return emotion_set_from_json(j, policy);
}

// ---------------------------------------------------------------------------
// Mapping tables

class MappingTable {
 public:
  MappingTable(std::string source, std::string target,
               std::vector<std::pair<std::string, std::string>> entries)
      : source_(std::move(source)), target_(std::move(target)), entries_(std::move(entries)) {
    for (std::size_t i = 0; i < entries_.size(); ++i) {
      if (!lookup_.emplace(entries_[i].first, i).second) {
        throw Error(ErrorKind::kDuplicateLabel,
                    "mapping " + source_ + "->" + target_ + " lists '" + entries_[i].first + "' twice");
      }
    }
  }

  const std::string& source() const { return source_; }
  const std::string& target() const { return target_; }
  const std::vector<std::pair<std::string, std::string>>& entries() const { return entries_; }

  // Requires the table to be total over `source` and every target to exist.
  void validate(const EmotionSet& source, const EmotionSet& target) const {
    if (source.name() != source_ || target.name() != target_) {
      throw Error(ErrorKind::kValidation, "mapping " + source_ + "->" + target_ +
                                              " checked against " + source.name() + "->" + target.name());
    }
    for (const auto& label : source.labels()) {
      if (!lookup_.contains(label.id)) {
        throw Error(ErrorKind::kValidation, "mapping " + source_ + "->" + target_ +
                                                " is not total: missing '" + label.id + "'");
      }
    }
    for (const auto& [from, to] : entries_) {
      if (!source.contains(from)) {
        throw Error(ErrorKind::kUnknownLabel, "mapping source '" + from + "' not in " + source_);
      }
      if (!target.contains(to)) {
        throw Error(ErrorKind::kUnknownLabel, "mapping target '" + to + "' not in " + target_);
      }
    }
  }

  const std::string& map(std::string_view label) const {
    const auto it = lookup_.find(std::string(label));
    if (it == lookup_.end()) {
      throw Error(ErrorKind::kUnknownLabel,
                  "'" + std::string(label) + "' has no mapping in " + source_ + "->" + target_);
    }
    return entries_[it->second].second;
  }

  bool has(std::string_view label) const { return lookup_.contains(std::string(label)); }

 private:
  std::string source_;
  std::string target_;
  std::vector<std::pair<std::string, std::string>> entries_;
  std::unordered_map<std::string, std::size_t> lookup_;
};

inline const std::string& map_label(const MappingTable& table, std::string_view label) {
  return table.map(label);
}

// Two-column file with `# source: <set>` and `# target: <set>` directives.
inline MappingTable parse_mapping_table(std::string_view content) {
  const auto table = io::parse_delimited(content);
  const auto src = table.directives.find("source");
  const auto dst = table.directives.find("target");
  if (src == table.directives.end() || dst == table.directives.end()) {
    throw Error(ErrorKind::kParse, "mapping table needs '# source:' and '# target:' directives");
  }
  std::vector<std::pair<std::string, std::string>> entries;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    if (row.size() != 2) {
      throw Error(ErrorKind::kParse,
                  "mapping table line " + std::to_string(table.line_numbers[r]) + ": expected 2 columns");
    }
    entries.emplace_back(text::lower(row[0]), text::lower(row[1]));
  }
  return MappingTable(src->second, dst->second, std::move(entries));
}

inline MappingTable load_mapping_table(const std::string& path) {
  return parse_mapping_table(io::read_file(path));
}

// ---------------------------------------------------------------------------
// Similarity matrices

enum class SimilarityKind { kVad, kEmbedding };

class SimilarityMatrix {
 public:
  SimilarityMatrix(std::string set_name, SimilarityKind kind, std::vector<std::string> labels,
                   std::vector<double> values, std::optional<double> mu_max)
      : set_name_(std::move(set_name)),
        kind_(kind),
        labels_(std::move(labels)),
        values_(std::move(values)),
        mu_max_(mu_max) {
    for (std::size_t i = 0; i < labels_.size(); ++i) index_.emplace(labels_[i], i);
  }

  const std::string& set_name() const { return set_name_; }
  SimilarityKind kind() const { return kind_; }
  std::size_t size() const { return labels_.size(); }
  const std::vector<std::string>& labels() const { return labels_; }
  std::optional<double> mu_max() const { return mu_max_; }

  double at(std::size_t i, std::size_t j) const { return values_.at(i * labels_.size() + j); }

  double at(std::string_view a, std::string_view b) const { return at(index(a), index(b)); }

  std::size_t index(std::string_view label) const {
    const auto it = index_.find(std::string(label));
    if (it == index_.end()) {
      throw Error(ErrorKind::kUnknownLabel,
                  "label '" + std::string(label) + "' not in similarity matrix for " + set_name_);
    }
    return it->second;
  }

 private:
  std::string set_name_;
  SimilarityKind kind_;
  std::vector<std::string> labels_;
  std::vector<double> values_;
  std::optional<double> mu_max_;
  std::unordered_map<std::string, std::size_t> index_;
};

// sim(a, b) = 1 - d(a, b) / d_max with d the weighted Euclidean distance
// between anchors and d_max the largest pairwise distance in the set.
inline SimilarityMatrix build_vad_similarity(const EmotionSet& set,
                                             const DimensionWeights& weights = {1.0, 1.0, 1.0}) {
  if (std::any_of(weights.begin(), weights.end(), [](double w) { return !(w >= 0.0) || !std::isfinite(w); }) ||
      std::all_of(weights.begin(), weights.end(), [](double w) { return w == 0.0; })) {
    throw Error(ErrorKind::kValidation, "dimension weights must be non-negative and not all zero");
  }
  const std::size_t n = set.size();
  if (n < 2) throw Error(ErrorKind::kDegenerate, "set " + set.name() + " has a single label; d_max undefined");

  std::vector<double> dist(n * n, 0.0);
  double d_max = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double d = weighted_distance(set.anchor(i), set.anchor(j), weights);
      dist[i * n + j] = dist[j * n + i] = d;
      d_max = std::max(d_max, d);
    }
  }
  if (!(d_max > 0.0)) throw Error(ErrorKind::kDegenerate, "all anchors coincide in set " + set.name());

  std::vector<double> sim(n * n, 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i != j) sim[i * n + j] = 1.0 - dist[i * n + j] / d_max;
    }
  }
  return SimilarityMatrix(set.name(), SimilarityKind::kVad, set.ids(), std::move(sim), std::nullopt);
}

inline constexpr double kSymmetryTolerance = 1e-9;

// `values` is row-major n x n in set order.
inline SimilarityMatrix make_embedding_similarity(const EmotionSet& set, std::vector<double> values) {
  const std::size_t n = set.size();
  if (values.size() != n * n) {
    throw Error(ErrorKind::kDimensionMismatch, "embedding matrix has " + std::to_string(values.size()) +
                                                   " entries, expected " + std::to_string(n * n));
  }
  double mu_max = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double v = values[i * n + j];
      if (!std::isfinite(v) || v < 0.0 || v > 1.0) {
        throw Error(ErrorKind::kValidation, "embedding similarity outside [0,1] at (" +
                                                set.labels()[i].id + ", " + set.labels()[j].id + ")");
      }
      if (std::abs(v - values[j * n + i]) > kSymmetryTolerance) {
        throw Error(ErrorKind::kValidation, "embedding matrix is not symmetric at (" +
                                                set.labels()[i].id + ", " + set.labels()[j].id + ")");
      }
      if (i != j) mu_max = std::max(mu_max, v);
    }
  }
  // Tolerated asymmetry is folded away so the stored matrix is exactly symmetric.
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double avg = 0.5 * (values[i * n + j] + values[j * n + i]);
      values[i * n + j] = values[j * n + i] = avg;
    }
  }
  if (!(mu_max > 0.0)) {
    throw Error(ErrorKind::kDegenerate, "embedding matrix for " + set.name() +
                                            " has no positive inter-emotion similarity (mu_max <= 0)");
  }
  return SimilarityMatrix(set.name(), SimilarityKind::kEmbedding, set.ids(), std::move(values), mu_max);
}

// File layout: header row `label,<l1>,<l2>,...` (first cell ignored), then one
// row per label `<li>,<v_i1>,...`. Labels must appear in set order.
inline SimilarityMatrix parse_embedding_similarity(const EmotionSet& set, std::string_view content) {
  const auto table = io::parse_delimited(content);
  const std::size_t n = set.size();
  if (table.rows.empty()) throw Error(ErrorKind::kParse, "empty similarity matrix file");
  const auto& header = table.rows.front();
  if (header.size() != n + 1 || table.rows.size() != n + 1) {
    throw Error(ErrorKind::kDimensionMismatch, "similarity matrix is not " + std::to_string(n) + "x" +
                                                   std::to_string(n) + " for set " + set.name());
  }
  for (std::size_t j = 0; j < n; ++j) {
    if (text::lower(header[j + 1]) != set.labels()[j].id) {
      throw Error(ErrorKind::kValidation, "matrix column " + std::to_string(j) + " is '" + header[j + 1] +
                                              "', expected '" + set.labels()[j].id + "'");
    }
  }
  std::vector<double> values;
  values.reserve(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& row = table.rows[i + 1];
    if (row.size() != n + 1) {
      throw Error(ErrorKind::kDimensionMismatch, "matrix row " + std::to_string(i) + " has wrong width");
    }
    if (text::lower(row[0]) != set.labels()[i].id) {
      throw Error(ErrorKind::kValidation, "matrix row " + std::to_string(i) + " is '" + row[0] +
                                              "', expected '" + set.labels()[i].id + "'");
    }
    for (std::size_t j = 0; j < n; ++j) values.push_back(io::parse_real(row[j + 1], "similarity"));
  }
  return make_embedding_similarity(set, std::move(values));
}

inline SimilarityMatrix ingest_embedding_similarity(const EmotionSet& set, const std::string& path) {
  return parse_embedding_similarity(set, io::read_file(path));
}

}  // namespace eemo
