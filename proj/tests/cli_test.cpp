#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <random>

#include <gtest/gtest.h>

#include "eemo/io/jsonl.hpp"
#include "test_support.hpp"

namespace eemo {
namespace {

namespace fs = std::filesystem;
using testing::data_path;

int run(const std::string& args) {
  const std::string cmd = "SOURCE_DATE_EPOCH=0 " + std::string(EEMO_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string config_arg() { return "--config " + data_path("config.json"); }

nlohmann::json read_json(const fs::path& p) { return nlohmann::json::parse(io::read_file(p.string())); }

void write(const fs::path& p, const std::string& s) { std::ofstream(p) << s; }

TEST(CliTest, MapLabelsEmptyInputSucceeds) {
  const auto dir = testing::scratch_dir("cli_empty");
  write(dir / "empty.jsonl", "");
  const auto out = dir / "mapped.jsonl";
  EXPECT_EQ(run("map-labels " + (dir / "empty.jsonl").string() + " --mapping " +
                testing::asset_path("mappings/mikels8_to_ekman7.tsv") + " " + config_arg() + " --out " + out.string()),
            0);
  EXPECT_EQ(io::read_file(out.string()), "");
  EXPECT_TRUE(fs::exists(out.string() + ".manifest.json"));
}

TEST(CliTest, MapLabelsRejectsUnknownLabel) {
  const auto dir = testing::scratch_dir("cli_map");
  const auto out = dir / "mapped.jsonl";
  const std::string args = "map-labels " + data_path("mikels8_annotations.jsonl") + " --mapping " +
                           testing::asset_path("mappings/mikels8_to_ekman7.tsv") + " " + config_arg() + " --out " +
                           out.string();
  EXPECT_EQ(run(args), 0);
  EXPECT_EQ(io::read_jsonl(out.string()).size(), 3u);
  EXPECT_EQ(io::read_jsonl(out.string() + ".rejects.jsonl").size(), 1u);
  EXPECT_EQ(run(args + " --strict"), 1);
}

TEST(CliTest, FitVadTooFewSamplesIsHardError) {
  const auto dir = testing::scratch_dir("cli_fit_small");
  write(dir / "s.jsonl",
        R"({"schema": "eemo.vad_sample/1", "id": "a", "set": "ekman7", "vad": [0.1, 0.2, 0.3], "labels": ["joy"]})"
        "\n");
  EXPECT_EQ(run("fit-vad " + (dir / "s.jsonl").string() + " " + config_arg() + " --folds 10 --out " +
                (dir / "fit.json").string()),
            2);
}

TEST(CliTest, FitVadRecoversKnownProjection) {
  const auto dir = testing::scratch_dir("cli_fit");
  const auto& set = testing::ekman7();
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> u;
  std::vector<std::array<double, 3>> w(set.size());
  for (auto& c : w) c = {u(rng), u(rng), u(rng)};
  std::vector<nlohmann::json> lines;
  for (int i = 0; i < 200; ++i) {
    std::vector<std::string> labels;
    const std::size_t n = 1 + rng() % 3;
    while (labels.size() < n) {
      const auto& id = set.labels()[rng() % set.size()].id;
      if (std::find(labels.begin(), labels.end(), id) == labels.end()) labels.push_back(id);
    }
    std::array<double, 3> t{};
    for (const auto& l : labels)
      for (std::size_t d = 0; d < 3; ++d) t[d] += w[set.require_index(l)][d] / static_cast<double>(n);
    lines.push_back({{"schema", "eemo.vad_sample/1"}, {"id", "s" + std::to_string(i)}, {"set", "ekman7"},
                     {"vad", t}, {"labels", labels}});
  }
  write(dir / "samples.jsonl", io::to_jsonl(lines));
  const auto out = dir / "fit.json";
  ASSERT_EQ(run("fit-vad " + (dir / "samples.jsonl").string() + " " + config_arg() + " --folds 10 --repeats 3 --out " +
                out.string()),
            0);
  const auto report = read_json(out);
  for (std::size_t j = 0; j < set.size(); ++j) {
    const auto col = report.at("projection").at(set.labels()[j].id);
    for (std::size_t d = 0; d < 3; ++d) EXPECT_NEAR(col[d].get<double>(), w[j][d], 1e-6);
  }
}

TEST(CliTest, ScoreStrictAndGroups) {
  const auto dir = testing::scratch_dir("cli_score");
  const auto out = dir / "scores.jsonl";
  const std::string base = "score " + data_path("responses.jsonl") + " " + data_path("ground_truth.jsonl") + " " +
                           config_arg() + " --out " + out.string();
  EXPECT_EQ(run(base), 0);
  const auto rows = io::read_jsonl(out.string());
  ASSERT_EQ(rows.size(), 5u);
  std::map<std::string, nlohmann::json> by_id;
  for (const auto& r : rows) by_id[r.value.at("id")] = r.value;
  EXPECT_NEAR(by_id.at("r-rank").at("total").get<double>(), 1.2, 1e-12);
  EXPECT_EQ(by_id.at("r-bad").at("total").get<double>(), 0.0);
  EXPECT_NEAR(by_id.at("r-vad").at("total").get<double>(), 0.4, 1e-12);
  EXPECT_TRUE(by_id.at("r-orphan").contains("error"));
  EXPECT_EQ(run(base + " --strict"), 1);

  EXPECT_EQ(run("score " + data_path("responses.jsonl") + " " + data_path("ground_truth.jsonl") + " " + config_arg() +
                " --group-size 2 --out " + out.string()),
            0);
  const auto grouped = io::read_jsonl(out.string());
  EXPECT_TRUE(grouped[0].value.contains("advantage"));
  EXPECT_TRUE(grouped[0].value.contains("group"));
}

TEST(CliTest, EvaluateSelfConsistency) {
  const auto dir = testing::scratch_dir("cli_eval_self");
  write(dir / "items.jsonl",
        R"({"schema": "eemo.eval_item/1", "id": "a", "kind": "ranking", "ranking": ["joy", "fear", "anger"]}
{"schema": "eemo.eval_item/1", "id": "b", "kind": "score", "score": 0.1, "dimension": "arousal"}
{"schema": "eemo.eval_item/1", "id": "c", "kind": "score", "score": 0.4, "dimension": "arousal"}
{"schema": "eemo.eval_item/1", "id": "d", "kind": "score", "score": 0.8, "dimension": "arousal"}
)");
  write(dir / "preds.jsonl",
        R"({"schema": "eemo.prediction/1", "id": "a", "response": "joy, fear, anger"}
{"schema": "eemo.prediction/1", "id": "b", "response": "0.1"}
{"schema": "eemo.prediction/1", "id": "c", "response": "0.4"}
{"schema": "eemo.prediction/1", "id": "d", "response": "0.8"}
)");
  const auto out = dir / "report.json";
  ASSERT_EQ(run("evaluate " + (dir / "preds.jsonl").string() + " " + (dir / "items.jsonl").string() + " " +
                config_arg() + " --out " + out.string()),
            0);
  const auto agg = read_json(out).at("aggregates");
  EXPECT_EQ(agg.at("ranking").at("mean_score").get<double>(), 100.0);
  EXPECT_NEAR(agg.at("score").at("arousal").at("srcc").get<double>(), 1.0, 1e-12);
  EXPECT_NEAR(agg.at("score").at("arousal").at("plcc").get<double>(), 1.0, 1e-12);
  EXPECT_TRUE(fs::exists(out.string() + ".txt"));
}

TEST(CliTest, EvaluateFixture) {
  const auto dir = testing::scratch_dir("cli_eval");
  const auto out = dir / "report.json";
  ASSERT_EQ(run("evaluate " + data_path("predictions.jsonl") + " " + data_path("eval_items.jsonl") + " " +
                config_arg() + " --judge " + data_path("judge.jsonl") + " --out " + out.string()),
            0);
  const auto report = read_json(out);
  for (const auto& row : report.at("rows")) {
    if (row.at("id") == "e-1") { EXPECT_NEAR(row.at("value").get<double>(), 250.0 / 3.0, 1e-9); }
  }
  EXPECT_NEAR(report.at("aggregates").at("ranking").at("mean_score").get<double>(), (250.0 / 3.0 + 100.0) / 2, 1e-9);
  EXPECT_EQ(report.at("aggregates").at("choice").at("accuracy").get<double>(), 1.0);
  // Without the judge file the description item becomes an error row.
  EXPECT_EQ(run("evaluate " + data_path("predictions.jsonl") + " " + data_path("eval_items.jsonl") + " " +
                config_arg() + " --strict --out " + out.string()),
            1);
}

TEST(CliTest, DeriveRankingsProgressiveExample) {
  const auto dir = testing::scratch_dir("cli_derive");
  const auto out = dir / "rank.jsonl";
  ASSERT_EQ(run("derive-rankings " + data_path("annotations.jsonl") + " --method progressive " + config_arg() +
                " --out " + out.string()),
            0);
  std::map<std::string, nlohmann::json> by_id;
  for (const auto& r : io::read_jsonl(out.string())) by_id[r.value.at("image_id")] = r.value;
  EXPECT_EQ(by_id.at("img-001").at("ranking"), (nlohmann::json{"joy", "surprise", "fear"}));
  EXPECT_FALSE(by_id.contains("img-002"));
  bool tie_rejected = false;
  for (const auto& r : io::read_jsonl(out.string() + ".rejects.jsonl")) {
    tie_rejected |= r.value.at("id") == "img-002";
  }
  EXPECT_TRUE(tie_rejected);
}

TEST(CliTest, UnknownSubcommandOrMissingInput) {
  EXPECT_NE(run("frobnicate"), 0);
  EXPECT_EQ(run("derive-rankings /nonexistent.jsonl " + config_arg() + " --out /tmp/eemo_never.jsonl"), 2);
}

TEST(CliTest, EveryCommandIsByteDeterministic) {
  const auto dir = testing::scratch_dir("cli_det");
  const auto cfg = config_arg();
  const std::vector<std::pair<std::string, std::string>> commands{
      {"map", "map-labels " + data_path("annotations.jsonl") + " --mapping " +
                  testing::asset_path("mappings/emotic26_to_ekman7.tsv")},
      {"fit", "fit-vad " + data_path("vad_samples.jsonl")},
      {"gen", "gen-vad " + data_path("annotations.jsonl")},
      {"dist", "derive-rankings " + data_path("annotations.jsonl") + " --method distribution"},
      {"prog", "derive-rankings " + data_path("annotations.jsonl") + " --method progressive"},
      {"bal", "balance " + data_path("annotations.jsonl") + " --mode class"},
      {"balv", "balance " + data_path("annotations.jsonl") + " --mode vad"},
      {"qa", "instantiate-qa " + data_path("annotations.jsonl") + " --templates " +
                 testing::asset_path("templates/qa_templates.jsonl")},
      {"score", "score " + data_path("responses.jsonl") + " " + data_path("ground_truth.jsonl") + " --jobs 3"},
      {"eval", "evaluate " + data_path("predictions.jsonl") + " " + data_path("eval_items.jsonl") + " --judge " +
                   data_path("judge.jsonl")},
      {"sim", "simulate " + data_path("pool_ranking.json") + " --steps 200"},
  };
  for (const auto& [name, args] : commands) {
    const auto out = (dir / (name + ".out")).string();
    std::vector<std::string> snapshots;
    for (int pass = 0; pass < 2; ++pass) {
      ASSERT_LE(run(args + " " + cfg + " --seed 5 --out " + out), 1) << name;
      std::string all;
      for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.path().filename().string().starts_with(name + ".out")) all += io::read_file(entry.path().string());
      }
      snapshots.push_back(all);
    }
    EXPECT_FALSE(snapshots[0].empty()) << name;
    EXPECT_EQ(snapshots[0], snapshots[1]) << name;
  }
}

}  // namespace
}  // namespace eemo
