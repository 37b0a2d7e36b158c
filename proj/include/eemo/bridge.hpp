#pragma once

// In-process batch scoring for external training loops. Requests and results
// use the same record schemas as `eemo score`, so a binding only has to move
// JSON across its boundary.
//
// Request:
//   {"items": [{"id", "response", "ground_truth": {<eemo.gt/1 fields>}}, ...],
//    "group_size": 8,                      (optional)
//    "reward": {"format_weight": 0.3}}     (optional inline overrides)
// Result:
//   {"records": [<eemo.reward/1 rows, input order>], "errors": n}

#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "eemo/error.hpp"
#include "eemo/io/config.hpp"
#include "eemo/io/records.hpp"

namespace eemo {

class ScoringEngine {
 public:
  explicit ScoringEngine(io::PipelineConfig config)
      : config_(std::move(config)), registry_(io::build_registry(config_)) {}

  static ScoringEngine initialize(const std::string& config_path) {
    return ScoringEngine(io::load_config(config_path, {}));
  }

  const io::PipelineConfig& config() const { return config_; }

  nlohmann::json score_batch(const nlohmann::json& request) const {
    if (!request.is_object() || !request.contains("items") || !request.at("items").is_array()) {
      throw Error(ErrorKind::kParse, "batch request needs an 'items' array");
    }
    const auto& raw_items = request.at("items");
    if (raw_items.empty()) throw Error(ErrorKind::kValidation, "empty batch");

    io::ScoreOptions opts;
    opts.reward = request.contains("reward") ? io::reward_config_from_json(request.at("reward"), config_.reward)
                                             : config_.reward;
    if (request.contains("group_size")) opts.group_size = request.at("group_size").get<std::size_t>();

    std::vector<io::ScoreItem> items;
    std::set<std::string> ids;
    for (const auto& it : raw_items) {
      try {
        io::ScoreItem item{it.at("id").get<std::string>(), it.at("response").get<std::string>(), std::nullopt};
        if (!ids.insert(item.id).second) throw Error(ErrorKind::kValidation, "duplicate item id '" + item.id + "'");
        if (it.contains("ground_truth") && !it.at("ground_truth").is_null()) {
          auto gt = it.at("ground_truth");
          gt["schema"] = io::kGroundTruthSchema;
          item.ground_truth = io::ground_truth_from_json(gt);
        }
        items.push_back(std::move(item));
      } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::kParse, std::string("malformed batch item: ") + e.what());
      }
    }
    const auto result = io::score_items(items, registry_, opts);
    return {{"records", result.records}, {"errors", result.errors}};
  }

 private:
  io::PipelineConfig config_;
  SimilarityRegistry registry_;
};

}  // namespace eemo
