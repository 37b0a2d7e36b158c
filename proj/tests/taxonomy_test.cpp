#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "eemo/taxonomy.hpp"
#include "test_support.hpp"

namespace eemo {
namespace {

using testing::asset_path;
using testing::data_path;
using testing::ekman7;

nlohmann::json two_label_set() {
  return nlohmann::json::parse(R"({"schema": "eemo.emotion_set/1", "name": "pair",
    "labels": [{"id": "joy", "anchor": [0.6, 0.5, 0.6], "description": "d"},
               {"id": "anger", "anchor": [0.2, 0.7, 0.5], "description": "d"}]})");
}

TEST(EmotionSetTest, Ekman7AssetHasFearAnchor) {
  const auto& s = ekman7();
  EXPECT_EQ(s.size(), 7u);
  const auto& fear = s.anchor("fear");
  EXPECT_DOUBLE_EQ(fear.valence, 0.4093);
  EXPECT_DOUBLE_EQ(fear.arousal, 0.7010);
  EXPECT_DOUBLE_EQ(fear.dominance, 0.4415);
}

TEST(EmotionSetTest, DuplicateLabelRejected) {
  auto j = two_label_set();
  j["labels"][1]["id"] = "joy";
  try {
    emotion_set_from_json(j);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kDuplicateLabel);
  }
}

TEST(EmotionSetTest, EmptyLabelListRejected) {
  auto j = two_label_set();
  j["labels"] = nlohmann::json::array();
  EXPECT_THROW(emotion_set_from_json(j), Error);
}

TEST(EmotionSetTest, MissingAnchorOrDescription) {
  auto j = two_label_set();
  j["labels"][0].erase("anchor");
  try {
    emotion_set_from_json(j);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kMissingField);
  }
  EXPECT_NO_THROW(emotion_set_from_json(j, AnchorPolicy::kOptional));
  auto k = two_label_set();
  k["labels"][1]["description"] = "";
  EXPECT_THROW(emotion_set_from_json(k), Error);
}

TEST(EmotionSetTest, AnchorOutsideUnitCube) {
  auto j = two_label_set();
  j["labels"][0]["anchor"] = {1.2, 0.5, 0.5};
  EXPECT_THROW(emotion_set_from_json(j), Error);
}

TEST(EmotionSetTest, RoundTripPreservesOrderAndMatrix) {
  const auto reloaded = emotion_set_from_json(to_json(ekman7()));
  EXPECT_EQ(reloaded.ids(), ekman7().ids());
  const auto a = build_vad_similarity(ekman7());
  const auto b = build_vad_similarity(reloaded);
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < a.size(); ++j) EXPECT_EQ(a.at(i, j), b.at(i, j));
}

TEST(EmotionSetTest, AllShippedSetsLoad) {
  for (const char* name : {"ekman7", "emotic26", "mikels8", "plutchik24"}) {
    const auto s = load_emotion_set(asset_path(std::string("sets/") + name + ".json"), AnchorPolicy::kOptional);
    EXPECT_EQ(s.name(), name);
  }
  EXPECT_EQ(load_emotion_set(asset_path("sets/emotic26.json"), AnchorPolicy::kOptional).size(), 26u);
  EXPECT_EQ(load_emotion_set(asset_path("sets/plutchik24.json"), AnchorPolicy::kOptional).size(), 24u);
  EXPECT_EQ(load_emotion_set(asset_path("sets/mikels8.json"), AnchorPolicy::kOptional).size(), 8u);
}

TEST(MappingTest, ShippedTablesAreTotal) {
  const auto ekman = ekman7();
  for (const char* src : {"mikels8", "emotic26"}) {
    const auto source = load_emotion_set(asset_path(std::string("sets/") + src + ".json"), AnchorPolicy::kOptional);
    const auto table = load_mapping_table(asset_path(std::string("mappings/") + src + "_to_ekman7.tsv"));
    ASSERT_NO_THROW(table.validate(source, ekman));
    for (const auto& id : source.ids()) EXPECT_NO_THROW(map_label(table, id));
  }
}

TEST(MappingTest, Examples) {
  const auto mikels = load_mapping_table(asset_path("mappings/mikels8_to_ekman7.tsv"));
  EXPECT_EQ(map_label(mikels, "amusement"), "joy");
  const auto emotic = load_mapping_table(asset_path("mappings/emotic26_to_ekman7.tsv"));
  EXPECT_EQ(map_label(emotic, "pain"), "sadness");
  EXPECT_EQ(map_label(emotic, "suffering"), "sadness");
  try {
    map_label(mikels, "happiness");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kUnknownLabel);
  }
}

TEST(MappingTest, RequiresDirectives) {
  EXPECT_THROW(parse_mapping_table("a\tb\n"), Error);
  EXPECT_THROW(parse_mapping_table("# source: x\n# target: y\na\tb\na\tc\n"), Error);
}

TEST(VadSimilarityTest, DiagonalSymmetryRange) {
  const auto m = build_vad_similarity(ekman7());
  for (std::size_t i = 0; i < m.size(); ++i) {
    EXPECT_EQ(m.at(i, i), 1.0);
    for (std::size_t j = 0; j < m.size(); ++j) {
      EXPECT_EQ(m.at(i, j), m.at(j, i));
      EXPECT_GE(m.at(i, j), 0.0);
      EXPECT_LE(m.at(i, j), 1.0);
    }
  }
}

// Independent distance oracle over the anchor table.
TEST(VadSimilarityTest, AngerFearMatchesHandComputedDistance) {
  const double table[7][3] = {{0.2160, 0.6575, 0.5032}, {0.3651, 0.4591, 0.5024}, {0.4093, 0.7010, 0.4415},
                              {0.6605, 0.5017, 0.6320}, {0.5283, 0.3603, 0.6027}, {0.2098, 0.3250, 0.3707},
                              {0.5069, 0.5077, 0.5326}};
  auto dist = [&](int a, int b) {
    double s = 0;
    for (int d = 0; d < 3; ++d) s += (table[a][d] - table[b][d]) * (table[a][d] - table[b][d]);
    return std::sqrt(s);
  };
  double dmax = 0;
  for (int a = 0; a < 7; ++a)
    for (int b = 0; b < 7; ++b) dmax = std::max(dmax, dist(a, b));
  const double expected = 1.0 - dist(0, 2) / dmax;
  EXPECT_NEAR(build_vad_similarity(ekman7()).at("anger", "fear"), expected, 1e-12);
}

TEST(VadSimilarityTest, TwoLabelSetHasZeroOffDiagonal) {
  const auto s = emotion_set_from_json(two_label_set());
  const auto m = build_vad_similarity(s);
  EXPECT_EQ(m.at(0, 1), 0.0);
  EXPECT_EQ(m.at(1, 1), 1.0);
}

TEST(VadSimilarityTest, SingleLabelAndBadWeights) {
  auto j = two_label_set();
  j["labels"].erase(1);
  EXPECT_THROW(build_vad_similarity(emotion_set_from_json(j)), Error);
  EXPECT_THROW(build_vad_similarity(ekman7(), {0.0, 0.0, 0.0}), Error);
  EXPECT_THROW(build_vad_similarity(ekman7(), {-1.0, 1.0, 1.0}), Error);
}

TEST(VadSimilarityTest, WeightScalingInvariance) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.1, 3.0);
  for (int trial = 0; trial < 20; ++trial) {
    const DimensionWeights w{u(rng), u(rng), u(rng)};
    const double c = u(rng);
    const auto a = build_vad_similarity(ekman7(), w);
    const auto b = build_vad_similarity(ekman7(), {c * w[0], c * w[1], c * w[2]});
    for (std::size_t i = 0; i < 7; ++i)
      for (std::size_t k = 0; k < 7; ++k) EXPECT_NEAR(a.at(i, k), b.at(i, k), 1e-12);
  }
}

TEST(EmbeddingSimilarityTest, FixtureMuMax) {
  const auto m = ingest_embedding_similarity(ekman7(), data_path("ekman7_embedding.tsv"));
  ASSERT_TRUE(m.mu_max());
  EXPECT_DOUBLE_EQ(*m.mu_max(), 0.83);
}

TEST(EmbeddingSimilarityTest, IdentityMatrixRejected) {
  std::vector<double> v(49, 0.0);
  for (int i = 0; i < 7; ++i) v[i * 7 + i] = 1.0;
  try {
    make_embedding_similarity(ekman7(), v);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kDegenerate);
  }
}

TEST(EmbeddingSimilarityTest, AsymmetryAndShape) {
  std::vector<double> v(49, 0.5);
  v[1] = 0.6;
  EXPECT_THROW(make_embedding_similarity(ekman7(), v), Error);
  EXPECT_THROW(make_embedding_similarity(ekman7(), std::vector<double>(48, 0.5)), Error);
  std::string content = "label,joy,anger\njoy,1,0.2\nanger,0.2,1\n";
  try {
    parse_embedding_similarity(ekman7(), content);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kDimensionMismatch);
  }
}

}  // namespace
}  // namespace eemo
