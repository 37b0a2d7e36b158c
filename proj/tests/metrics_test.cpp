#include <random>

#include <gtest/gtest.h>

#include "eemo/judge.hpp"
#include "eemo/metrics.hpp"
#include "test_support.hpp"

namespace eemo {
namespace {

using Labels = std::vector<std::string>;

TEST(RankingScoreTest, Examples) {
  const Labels gt{"joy", "surprise", "neutral"};
  EXPECT_DOUBLE_EQ(ranking_score(gt, gt), 100.0);
  EXPECT_NEAR(ranking_score(gt, Labels{"surprise", "joy", "neutral"}), 50.0 + 50.0 * (4.0 / 3.0) / 2.0, 1e-12);
  EXPECT_NEAR(ranking_score(gt, Labels{"surprise", "joy", "neutral"}), 83.33, 0.01);
  EXPECT_EQ(ranking_score(gt, Labels{"anger", "fear", "sadness"}), 0.0);
}

TEST(RankingScoreTest, SameOrderAsReward) {
  const auto& labels = testing::ekman7().labels();
  std::vector<Labels> triples;
  for (const auto& a : labels)
    for (const auto& b : labels)
      for (const auto& c : labels)
        if (a.id != b.id && b.id != c.id && a.id != c.id) triples.push_back({a.id, b.id, c.id});
  const Labels& gt = triples[100];
  for (const auto& p : triples) {
    // Reward is the square of the score rescaled to [0, 1].
    EXPECT_NEAR(ranking_reward(gt, p), std::pow(ranking_score(gt, p) / 100.0, 2), 1e-12);
  }
}

// Independent oracle: O(n^2) ranks, then textbook Pearson.
std::vector<double> rank_oracle(const std::vector<double>& v) {
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    double less = 0, equal = 0;
    for (double x : v) {
      less += x < v[i];
      equal += x == v[i];
    }
    r[i] = less + (equal + 1) / 2;
  }
  return r;
}

double pearson_oracle(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) sx += x[i], sy += y[i];
  double c = 0, vx = 0, vy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    c += (x[i] - sx / n) * (y[i] - sy / n);
    vx += (x[i] - sx / n) * (x[i] - sx / n);
    vy += (y[i] - sy / n) * (y[i] - sy / n);
  }
  return c / std::sqrt(vx * vy);
}

TEST(CorrelationTest, MatchesOracle) {
  std::mt19937_64 rng(17);
  std::uniform_int_distribution<int> coarse(0, 9);  // forces ties
  std::normal_distribution<double> g;
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<double> x(20), y(20);
    for (std::size_t i = 0; i < 20; ++i) {
      x[i] = trial % 2 ? coarse(rng) : g(rng);
      y[i] = g(rng);
    }
    EXPECT_NEAR(srcc(x, y), pearson_oracle(rank_oracle(x), rank_oracle(y)), 1e-12);
    EXPECT_NEAR(plcc(x, y), pearson_oracle(x, y), 1e-12);
  }
}

TEST(CorrelationTest, Examples) {
  const std::vector<double> x{1, 2, 3, 4}, r{4, 3, 2, 1};
  EXPECT_DOUBLE_EQ(srcc(x, x), 1.0);
  EXPECT_DOUBLE_EQ(plcc(x, x), 1.0);
  EXPECT_DOUBLE_EQ(srcc(x, r), -1.0);
  EXPECT_EQ(fractional_ranks(std::vector<double>{3, 1, 3}), (std::vector<double>{2.5, 1, 2.5}));
  EXPECT_THROW(srcc(x, std::vector<double>{1, 1, 1, 1}), Error);
  EXPECT_THROW(plcc(x, std::vector<double>{1, 2}), Error);
}

TEST(CorrelationTest, Invariances) {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> g;
  std::vector<double> x(30), y(30);
  for (std::size_t i = 0; i < 30; ++i) x[i] = g(rng), y[i] = g(rng);
  std::vector<double> mono(30), affine(30);
  for (std::size_t i = 0; i < 30; ++i) {
    mono[i] = std::exp(3 * x[i]) + x[i];
    affine[i] = 2.5 * x[i] - 7.0;
  }
  EXPECT_NEAR(srcc(mono, y), srcc(x, y), 1e-12);
  EXPECT_NEAR(plcc(affine, y), plcc(x, y), 1e-12);
}

TEST(VadScoreTest, Examples) {
  EXPECT_EQ(probability_vad_score_from_logits({0.0, 0.0, 0.0}), 0.5);
  EXPECT_NEAR(probability_vad_score_from_logits({std::log(2.0), 0.0, 0.0}), 0.625, 1e-15);
  EXPECT_EQ(probability_vad_score({1.0, 0.0, 0.0}), 1.0);
  EXPECT_NEAR(probability_vad_score_from_logits({1.0, -2.0, 0.5}),
              probability_vad_score_from_logits({101.0, 98.0, 100.5}), 1e-12);
  EXPECT_THROW(probability_vad_score_from_logits({std::nan(""), 0, 0}), Error);
}

TEST(ClassificationTest, Examples) {
  const Labels classes{"pos", "neg"};
  const auto perfect = classification_metrics(Labels{"pos", "neg"}, Labels{"pos", "neg"}, classes);
  EXPECT_EQ(perfect.macro_f1, 1.0);
  EXPECT_EQ(perfect.accuracy, 1.0);
  const auto constant = classification_metrics(Labels{"pos", "neg", "pos", "neg"},
                                               Labels{"pos", "pos", "pos", "pos"}, classes);
  EXPECT_DOUBLE_EQ(constant.accuracy, 0.5);
  EXPECT_NEAR(constant.macro_f1, 1.0 / 3.0, 1e-12);
  const auto unparsed = classification_metrics(Labels{"pos", "neg"}, Labels{"", "neg"}, classes);
  EXPECT_DOUBLE_EQ(unparsed.accuracy, 0.5);
  EXPECT_THROW(classification_metrics(Labels{}, Labels{}, classes), Error);
  EXPECT_THROW(classification_metrics(Labels{"x"}, Labels{"x"}, classes), Error);
}

TEST(ConcisenessTest, Bands) {
  EXPECT_EQ(conciseness_score(30, 30), 2);
  EXPECT_EQ(conciseness_score(90, 30), 1);
  EXPECT_EQ(conciseness_score(150, 30), 0);
  EXPECT_EQ(conciseness_score(20, 30), 2);  // 2/3 boundary
  EXPECT_EQ(conciseness_score(60, 30), 2);
  EXPECT_EQ(conciseness_score(61, 30), 1);
  EXPECT_EQ(conciseness_score(10, 30), 1);
  EXPECT_EQ(conciseness_score(9, 30), 0);
  EXPECT_EQ(conciseness_score(120, 30), 1);
  EXPECT_EQ(conciseness_score(121, 30), 0);
  EXPECT_THROW(conciseness_score(5, 0), Error);
}

TEST(ConcisenessTest, ScaleConsistent) {
  for (std::size_t g = 0; g <= 60; ++g)
    for (std::size_t r = 1; r <= 20; ++r)
      for (std::size_t k : {2u, 3u, 7u}) ASSERT_EQ(conciseness_score(g, r), conciseness_score(k * g, k * r));
}

TEST(DescriptionTest, Examples) {
  EXPECT_DOUBLE_EQ(description_score({{2}, {2}, {2}}, 2), 1.0);
  EXPECT_DOUBLE_EQ(description_score({{0}, {0}, {0}}, 0), 0.0);
  EXPECT_DOUBLE_EQ(description_score({{2}, {1}, {2}}, 1), 0.75);
  EXPECT_THROW(description_score({{3}, {1}, {2}}, 1), Error);
  EXPECT_THROW(description_score({{}, {1}, {2}}, 1), Error);
}

TEST(BenchmarkParseTest, Grammar) {
  const Labels vocab{"joy", "surprise", "neutral", "fear"};
  EXPECT_EQ(std::get<std::string>(parse_benchmark_response("The answer is (B).", ResponseKind::kChoice)), "B");
  EXPECT_EQ(std::get<std::string>(parse_benchmark_response("Answer: C", ResponseKind::kChoice)), "C");
  EXPECT_EQ(std::get<std::string>(parse_benchmark_response("D", ResponseKind::kChoice)), "D");
  EXPECT_EQ(std::get<Labels>(parse_benchmark_response("joy, surprise, then neutral", ResponseKind::kRanking, vocab)),
            (Labels{"joy", "surprise", "neutral"}));
  EXPECT_DOUBLE_EQ(std::get<double>(parse_benchmark_response("about 0.75 overall", ResponseKind::kScore)), 0.75);
  EXPECT_EQ(std::get<std::string>(parse_benchmark_response("Mostly FEAR.", ResponseKind::kLabel, vocab)), "fear");
  for (auto kind : {ResponseKind::kChoice, ResponseKind::kRanking, ResponseKind::kScore, ResponseKind::kLabel}) {
    EXPECT_TRUE(std::holds_alternative<Unparsed>(parse_benchmark_response("", kind, vocab)));
  }
}

TEST(BenchmarkParseTest, NeverThrowsOnGarbage) {
  std::mt19937_64 rng(8);
  const Labels vocab{"joy"};
  for (int i = 0; i < 2000; ++i) {
    std::string s(rng() % 40, ' ');
    for (auto& c : s) c = static_cast<char>(rng() % 256);
    for (auto kind : {ResponseKind::kChoice, ResponseKind::kRanking, ResponseKind::kScore, ResponseKind::kLabel}) {
      EXPECT_NO_THROW(parse_benchmark_response(s, kind, vocab));
    }
  }
}

TEST(JudgeTest, ReplayFixture) {
  const auto judge = ReplayJudgeProvider::load(testing::data_path("judge.jsonl"));
  const auto s = judge.score({"e-9"});
  EXPECT_DOUBLE_EQ(JudgeScores::mean(s.completeness), 1.8);
  EXPECT_THROW(judge.score({"e-404"}), Error);
}

TEST(JudgeTest, SingleRoundAccepted) {
  const auto judge = ReplayJudgeProvider::parse(
      R"({"item_id": "a", "dimension": "completeness", "rounds": [1]}
{"item_id": "a", "dimension": "precision", "rounds": [2]}
{"item_id": "a", "dimension": "relevance", "rounds": [0]})");
  const auto s = judge.score({"a"});
  EXPECT_EQ(JudgeScores::mean(s.completeness), 1.0);
  EXPECT_THROW(ReplayJudgeProvider::parse(R"({"item_id": "a", "dimension": "style", "rounds": [1]})"), Error);
}

TEST(JudgeTest, TransportProvider) {
  const TransportJudgeProvider ok([](const std::string& req) {
    const auto j = nlohmann::json::parse(req);
    return nlohmann::json{{"item_id", j.at("item_id")}, {"completeness", {2}}, {"precision", {1}}, {"relevance", {2}}}
        .dump();
  });
  EXPECT_EQ(ok.score({"q"}).precision, std::vector<int>{1});
  const TransportJudgeProvider down([](const std::string&) -> std::string { throw std::runtime_error("offline"); });
  try {
    down.score({"q"});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kTransport);
  }
}

}  // namespace
}  // namespace eemo
