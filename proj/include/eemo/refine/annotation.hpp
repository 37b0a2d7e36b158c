#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "eemo/error.hpp"
#include "eemo/taxonomy.hpp"

namespace eemo {

inline constexpr std::string_view kAnnotationSchema = "eemo.annotation/1";
inline constexpr double kDistributionTolerance = 1e-6;

struct AnnotationRecord {
  std::string image_id;
  std::string set;                                  // label space of every label below
  std::vector<std::vector<std::string>> selections;  // one list per annotator, in listing order
  std::optional<std::map<std::string, double>> distribution;
  std::optional<VadVector> vad;
  std::vector<std::string> comments;
  std::optional<std::string> dec;                   // dominant emotion category
  std::vector<std::string> ranking;                 // top-3, when already derived
  std::optional<std::size_t> keyword_count;

  void validate() const {
    if (image_id.empty()) throw Error(ErrorKind::kValidation, "annotation record without image id");
    if (distribution) {
      double sum = 0.0;
      for (const auto& [label, p] : *distribution) {
        if (!std::isfinite(p) || p < 0.0) {
          throw Error(ErrorKind::kValidation, image_id + ": negative or non-finite probability for " + label);
        }
        sum += p;
      }
      if (std::abs(sum - 1.0) > kDistributionTolerance) {
        throw Error(ErrorKind::kValidation, image_id + ": distribution sums to " + std::to_string(sum));
      }
    }
  }

  // Every label must belong to `labels`.
  void validate_labels(const EmotionSet& labels) const {
    auto check = [&](const std::string& l) {
      if (!labels.contains(l)) {
        throw Error(ErrorKind::kUnknownLabel, image_id + ": label '" + l + "' not in " + labels.name());
      }
    };
    for (const auto& sel : selections) for (const auto& l : sel) check(l);
    if (distribution) for (const auto& [l, p] : *distribution) check(l);
    if (dec) check(*dec);
    for (const auto& l : ranking) check(l);
  }
};

inline AnnotationRecord annotation_from_json(const nlohmann::json& j) {
  try {
    if (j.value("schema", std::string(kAnnotationSchema)) != kAnnotationSchema) {
      throw Error(ErrorKind::kParse, "unsupported annotation schema " + j.at("schema").dump());
    }
    AnnotationRecord r;
    r.image_id = j.at("image_id").get<std::string>();
    r.set = j.value("set", std::string{});
    if (j.contains("selections")) r.selections = j.at("selections").get<std::vector<std::vector<std::string>>>();
    if (j.contains("distribution") && !j.at("distribution").is_null()) {
      r.distribution = j.at("distribution").get<std::map<std::string, double>>();
    }
    if (j.contains("vad") && !j.at("vad").is_null()) {
      const auto& v = j.at("vad");
      if (!v.is_array() || v.size() != 3) throw Error(ErrorKind::kParse, "vad must be [v, a, d]");
      r.vad = VadVector{v[0].get<double>(), v[1].get<double>(), v[2].get<double>()};
    }
    if (j.contains("comments")) r.comments = j.at("comments").get<std::vector<std::string>>();
    if (j.contains("dec") && !j.at("dec").is_null()) r.dec = j.at("dec").get<std::string>();
    if (j.contains("ranking")) r.ranking = j.at("ranking").get<std::vector<std::string>>();
    if (j.contains("keyword_count") && !j.at("keyword_count").is_null()) {
      r.keyword_count = j.at("keyword_count").get<std::size_t>();
    }
    r.validate();
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kParse, std::string("annotation record: ") + e.what());
  }
}

inline nlohmann::json to_json(const AnnotationRecord& r) {
  nlohmann::json j{{"schema", kAnnotationSchema}, {"image_id", r.image_id}};
  if (!r.set.empty()) j["set"] = r.set;
  if (!r.selections.empty()) j["selections"] = r.selections;
  if (r.distribution) j["distribution"] = *r.distribution;
  if (r.vad) j["vad"] = {r.vad->valence, r.vad->arousal, r.vad->dominance};
  if (!r.comments.empty()) j["comments"] = r.comments;
  if (r.dec) j["dec"] = *r.dec;
  if (!r.ranking.empty()) j["ranking"] = r.ranking;
  if (r.keyword_count) j["keyword_count"] = *r.keyword_count;
  return j;
}

// Rewrites every label through `table`; distribution mass of labels that
// merge into one target is summed.
inline AnnotationRecord map_record_labels(const AnnotationRecord& in, const MappingTable& table) {
  AnnotationRecord out = in;
  out.set = table.target();
  for (auto& sel : out.selections) {
    std::vector<std::string> mapped;
    for (const auto& l : sel) {
      const auto& t = table.map(l);
      if (std::find(mapped.begin(), mapped.end(), t) == mapped.end()) mapped.push_back(t);
    }
    sel = std::move(mapped);
  }
  if (in.distribution) {
    std::map<std::string, double> merged;
    for (const auto& [l, p] : *in.distribution) merged[table.map(l)] += p;
    out.distribution = std::move(merged);
  }
  if (in.dec) out.dec = table.map(*in.dec);
  for (auto& l : out.ranking) l = table.map(l);
  return out;
}

}  // namespace eemo
