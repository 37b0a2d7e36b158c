#pragma once

// Line-delimited record schemas for reward scoring. The CLI and any
// in-process batch caller share these shapes and `score_items`.

#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "eemo/error.hpp"
#include "eemo/reward.hpp"

namespace eemo::io {

inline constexpr std::string_view kGroundTruthSchema = "eemo.gt/1";
inline constexpr std::string_view kResponseSchema = "eemo.response/1";
inline constexpr std::string_view kRewardSchema = "eemo.reward/1";

inline void require_schema(const nlohmann::json& j, std::string_view expected) {
  if (!j.contains("schema")) throw Error(ErrorKind::kMissingField, "record lacks a schema field");
  if (j.at("schema").get<std::string>() != expected) {
    throw Error(ErrorKind::kParse, "expected schema " + std::string(expected) + ", got " + j.at("schema").dump());
  }
}

inline GroundTruth ground_truth_from_json(const nlohmann::json& j) {
  try {
    require_schema(j, kGroundTruthSchema);
    GroundTruth gt;
    const auto task = j.at("task").get<std::string>();
    if (task == "ranking") {
      gt.task = TaskKind::kRanking;
      gt.ranking = j.at("ranking").get<std::vector<std::string>>();
    } else if (task == "regression") {
      gt.task = TaskKind::kRegression;
      gt.score = j.at("score").get<double>();
      gt.dimension = j.value("dimension", std::string{});
    } else if (task == "classification") {
      gt.task = TaskKind::kClassification;
      gt.label = j.at("label").get<std::string>();
      gt.set = j.at("set").get<std::string>();
    } else {
      throw Error(ErrorKind::kParse, "unknown task '" + task + "'");
    }
    gt.validate();
    return gt;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kParse, std::string("ground truth: ") + e.what());
  }
}

inline nlohmann::json to_json(const GroundTruth& gt, const std::string& id) {
  nlohmann::json j{{"schema", kGroundTruthSchema}, {"id", id}};
  switch (gt.task) {
    case TaskKind::kRanking:
      j["task"] = "ranking";
      j["ranking"] = gt.ranking;
      break;
    case TaskKind::kRegression:
      j["task"] = "regression";
      j["score"] = *gt.score;
      if (!gt.dimension.empty()) j["dimension"] = gt.dimension;
      break;
    case TaskKind::kClassification:
      j["task"] = "classification";
      j["label"] = gt.label;
      j["set"] = gt.set;
      break;
  }
  return j;
}

struct ScoreItem {
  std::string id;
  std::string response;
  std::optional<GroundTruth> ground_truth;  // nullopt: no ground truth for this id
};

struct ScoreOptions {
  RewardConfig reward;
  std::optional<std::size_t> group_size;  // append per-group advantages
  std::size_t jobs = 1;
};

struct ScoreResult {
  std::vector<nlohmann::json> records;  // one per item, in input order
  std::size_t errors = 0;
};

inline nlohmann::json breakdown_record(const std::string& id, const RewardBreakdown& b) {
  nlohmann::json diag = nlohmann::json::object();
  for (const auto& [k, v] : b.diagnostics) diag[k] = v;
  return {{"schema", kRewardSchema}, {"id", id},
          {"format", b.format},      {"task_reward", b.task_reward},
          {"total", b.total},        {"gate_open", b.gate_open},
          {"diagnostics", diag}};
}

// Scores every item; items fail individually into error rows. With a group
// size, consecutive items form groups and each row gains its group index and
// advantage (a group containing an error row gets no advantages).
inline ScoreResult score_items(const std::vector<ScoreItem>& items, const SimilarityRegistry& matrices,
                               const ScoreOptions& options) {
  options.reward.validate();
  if (options.group_size && *options.group_size < 2) {
    throw Error(ErrorKind::kValidation, "group size must be >= 2");
  }
  ScoreResult result;
  result.records.resize(items.size());
  std::vector<std::optional<double>> totals(items.size());

  auto work = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const auto& item = items[i];
      if (!item.ground_truth) {
        result.records[i] = {{"schema", kRewardSchema}, {"id", item.id}, {"error", "no ground truth for item"}};
        continue;
      }
      try {
        const auto b = total_reward(item.response, *item.ground_truth, matrices, options.reward);
        result.records[i] = breakdown_record(item.id, b);
        totals[i] = b.total;
      } catch (const Error& e) {
        result.records[i] = {{"schema", kRewardSchema}, {"id", item.id}, {"error", e.what()}};
      }
    }
  };
  const std::size_t jobs = std::max<std::size_t>(1, std::min(options.jobs, items.size()));
  if (jobs == 1) {
    work(0, items.size());
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < jobs; ++t) {
      pool.emplace_back(work, t * items.size() / jobs, (t + 1) * items.size() / jobs);
    }
    for (auto& th : pool) th.join();
  }
  for (const auto& t : totals) if (!t) ++result.errors;

  if (options.group_size) {
    const std::size_t g = *options.group_size;
    for (std::size_t start = 0; start < items.size(); start += g) {
      const std::size_t end = std::min(items.size(), start + g);
      std::vector<double> rewards;
      bool complete = end - start >= 2;
      for (std::size_t i = start; i < end && complete; ++i) {
        if (!totals[i]) complete = false; else rewards.push_back(*totals[i]);
      }
      const auto adv = complete ? group_advantages(rewards) : std::vector<double>{};
      for (std::size_t i = start; i < end; ++i) {
        result.records[i]["group"] = start / g;
        if (complete) result.records[i]["advantage"] = adv[i - start];
      }
    }
  }
  return result;
}

}  // namespace eemo::io
