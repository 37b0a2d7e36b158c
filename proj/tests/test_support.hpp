#pragma once

#include <algorithm>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "eemo/io/config.hpp"
#include "eemo/taxonomy.hpp"

namespace eemo::testing {

inline std::string data_path(const std::string& name) { return std::string(EEMO_TEST_DATA) + "/" + name; }
inline std::string asset_path(const std::string& name) { return std::string(EEMO_ASSET_DIR) + "/" + name; }

inline const EmotionSet& ekman7() {
  static const EmotionSet set = load_emotion_set(asset_path("sets/ekman7.json"));
  return set;
}

inline SimilarityRegistry ekman7_registry() {
  SimilarityRegistry r;
  r.add(build_vad_similarity(ekman7()), ingest_embedding_similarity(ekman7(), data_path("ekman7_embedding.tsv")));
  return r;
}

// Fresh scratch directory per call site.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("eemo_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

// Random scoring corpus: response records and eemo.gt/1 records sharing ids,
// mixing compliant, malformed and off-task responses over all three tasks.
struct ScoreCorpus {
  std::vector<nlohmann::json> responses;
  std::vector<nlohmann::json> truths;
};

inline ScoreCorpus random_score_corpus(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<std::string> labels;
  for (const auto& l : ekman7().labels()) labels.push_back(l.id);
  auto pick = [&] { return labels[rng() % labels.size()]; };
  auto triple = [&] {
    std::vector<std::string> t;
    while (t.size() < 3) {
      auto l = pick();
      if (std::find(t.begin(), t.end(), l) == t.end()) t.push_back(l);
    }
    return t;
  };
  ScoreCorpus c;
  for (std::size_t i = 0; i < n; ++i) {
    const auto id = "item-" + std::to_string(i);
    const auto task = rng() % 3;
    nlohmann::json gt{{"schema", "eemo.gt/1"}, {"id", id}};
    std::string tag, answer;
    if (task == 0) {
      gt["task"] = "ranking";
      gt["ranking"] = triple();
      tag = "ranking";
      const auto p = triple();
      answer = p[0] + ", " + p[1] + (rng() % 4 ? ", " + p[2] : "");
    } else if (task == 1) {
      gt["task"] = "regression";
      gt["score"] = static_cast<double>(rng() % 10001) / 10000.0;
      gt["dimension"] = "valence";
      tag = "vad";
      answer = std::to_string(static_cast<double>(rng() % 10001) / 10000.0).substr(0, 6);
    } else {
      gt["task"] = "classification";
      gt["label"] = pick();
      gt["set"] = "ekman7";
      tag = "dec";
      answer = pick();
    }
    if (rng() % 7 == 0) tag = "ranking";  // sometimes off-task
    std::string response = "task: " + tag + "\n<think>reasoning " + std::to_string(i) + "</think>\n<answer>" +
                           answer + "</answer>";
    if (rng() % 9 == 0) response = answer;  // non-compliant
    c.responses.push_back({{"schema", "eemo.response/1"}, {"id", id}, {"response", response}});
    if (rng() % 50 != 0) c.truths.push_back(gt);  // a few orphans
  }
  return c;
}

}  // namespace eemo::testing
