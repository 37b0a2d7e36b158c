#include <fstream>

#include <gtest/gtest.h>

#include "eemo/bridge.hpp"
#include "eemo/cli/commands.hpp"
#include "test_support.hpp"

namespace eemo {
namespace {

nlohmann::json batch_from(const testing::ScoreCorpus& corpus) {
  std::map<std::string, nlohmann::json> gt;
  for (const auto& t : corpus.truths) gt[t.at("id")] = t;
  nlohmann::json items = nlohmann::json::array();
  for (const auto& r : corpus.responses) {
    nlohmann::json item{{"id", r.at("id")}, {"response", r.at("response")}};
    if (const auto it = gt.find(r.at("id")); it != gt.end()) {
      auto g = it->second;
      g.erase("schema");
      g.erase("id");
      item["ground_truth"] = g;
    }
    items.push_back(item);
  }
  return {{"items", items}};
}

TEST(BridgeTest, MatchesCliScoringBitForBit) {
  const auto corpus = testing::random_score_corpus(1000, 2024);
  const auto dir = testing::scratch_dir("bridge");
  std::ofstream(dir / "responses.jsonl") << io::to_jsonl(corpus.responses);
  std::ofstream(dir / "truths.jsonl") << io::to_jsonl(corpus.truths);

  cli::RunContext ctx;
  ctx.config = io::load_config(testing::data_path("config.json"), {});
  ctx.out = (dir / "scores.jsonl").string();
  ctx.jobs = 4;
  cli::cmd_score(ctx, (dir / "responses.jsonl").string(), (dir / "truths.jsonl").string(), std::nullopt);
  std::vector<nlohmann::json> cli_rows;
  for (auto& l : io::read_jsonl(ctx.out)) cli_rows.push_back(l.value);

  const auto engine = ScoringEngine::initialize(testing::data_path("config.json"));
  const auto result = engine.score_batch(batch_from(corpus));
  const auto& rows = result.at("records");
  ASSERT_EQ(rows.size(), cli_rows.size());
  std::size_t errors = 0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    EXPECT_EQ(rows[i], cli_rows[i]) << i;
    if (rows[i].contains("total")) {
      EXPECT_EQ(rows[i].at("total").get<double>(), cli_rows[i].at("total").get<double>());
    } else {
      ++errors;
    }
  }
  EXPECT_EQ(result.at("errors").get<std::size_t>(), errors);
  EXPECT_GT(errors, 0u);
}

TEST(BridgeTest, GroupsAndInlineRewardOverrides) {
  const auto engine = ScoringEngine::initialize(testing::data_path("config.json"));
  const nlohmann::json gt{{"task", "ranking"}, {"ranking", {"joy", "fear", "anger"}}};
  nlohmann::json req{{"items",
                      {{{"id", "a"}, {"response", "task: ranking\n<think>x</think>\n<answer>joy, fear, anger</answer>"},
                        {"ground_truth", gt}},
                       {{"id", "b"}, {"response", "nope"}, {"ground_truth", gt}}}},
                     {"group_size", 2},
                     {"reward", {{"format_weight", 0.5}}}};
  const auto out = engine.score_batch(req);
  EXPECT_DOUBLE_EQ(out.at("records")[0].at("total").get<double>(), 1.5);
  EXPECT_DOUBLE_EQ(out.at("records")[0].at("advantage").get<double>(), 1.0);
  EXPECT_DOUBLE_EQ(out.at("records")[1].at("advantage").get<double>(), -1.0);
}

TEST(BridgeTest, RejectsBadBatches) {
  const auto engine = ScoringEngine::initialize(testing::data_path("config.json"));
  auto expect_kind = [&](const nlohmann::json& req, ErrorKind kind) {
    try {
      engine.score_batch(req);
      ADD_FAILURE() << req.dump();
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), kind) << req.dump();
    }
  };
  expect_kind(nlohmann::json{{"items", nlohmann::json::array()}}, ErrorKind::kValidation);
  expect_kind(nlohmann::json{{"records", 1}}, ErrorKind::kParse);
  expect_kind(nlohmann::json{{"items", {{{"id", "a"}, {"response", "x"}}, {{"id", "a"}, {"response", "y"}}}}},
              ErrorKind::kValidation);
  expect_kind(nlohmann::json{{"items", {{{"response", "x"}}}}}, ErrorKind::kParse);
  EXPECT_THROW(ScoringEngine::initialize("/nonexistent/config.json"), Error);
}

}  // namespace
}  // namespace eemo
