#pragma once

// Pipeline configuration: one JSON document, paths relative to the file that
// declares them, with EEMO_* environment overrides applied before parsing.
//
//   EEMO_SEED=7                      -> seed
//   EEMO_REWARD__FORMAT_WEIGHT=0.3   -> reward.format_weight
//
// Values are parsed as JSON when possible and as strings otherwise. An
// override naming a key that does not exist is an error.

#include <cstdlib>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "eemo/error.hpp"
#include "eemo/io/table.hpp"
#include "eemo/reward.hpp"
#include "eemo/taxonomy.hpp"
#include "eemo/text.hpp"

extern char** environ;

namespace eemo::io {

inline constexpr std::string_view kConfigSchema = "eemo.config/1";
inline constexpr std::string_view kEnvPrefix = "EEMO_";

struct RefineSettings {
  double gradient_threshold = 0.0;  // distribution ranking: minimum gap between ranks
  double balance_factor = 1.0;
  std::size_t vad_bins = 10;
  std::string template_policy = "all";  // all | round-robin
};

struct FitSettings {
  std::size_t folds = 10;
  std::size_t repeats = 5;
  std::string anchors = "ekman7";
  std::optional<double> radius;  // nullopt: covering radius
  std::map<std::string, std::string> overrides;
};

struct SimulationSettings {
  double learning_rate = 0.1;
  double target_mass = 0.95;
  std::size_t steps = 5000;
};

struct PipelineConfig {
  std::filesystem::path base_dir;  // directory relative paths resolve against
  std::map<std::string, std::string> emotion_sets;
  std::map<std::string, std::string> embedding_matrices;
  std::optional<std::string> lexicon;
  DimensionWeights vad_weights{1.0, 1.0, 1.0};
  RewardConfig reward;
  RefineSettings refine;
  FitSettings fit;
  SimulationSettings simulation;
  std::uint64_t seed = 0;
  std::string output_dir = "out";

  std::string resolve(const std::string& path) const {
    const std::filesystem::path p(path);
    return (p.is_absolute() ? p : base_dir / p).lexically_normal().string();
  }

  std::string set_path(const std::string& name) const {
    const auto it = emotion_sets.find(name);
    if (it == emotion_sets.end()) throw Error(ErrorKind::kNotFound, "config has no emotion set '" + name + "'");
    return resolve(it->second);
  }

  void check_files() const {
    auto exists = [&](const std::string& what, const std::string& p) {
      if (!std::filesystem::is_regular_file(resolve(p))) {
        throw Error(ErrorKind::kIo, what + " not found: " + resolve(p));
      }
    };
    for (const auto& [n, p] : emotion_sets) exists("emotion set " + n, p);
    for (const auto& [n, p] : embedding_matrices) {
      if (!emotion_sets.contains(n)) throw Error(ErrorKind::kValidation, "embedding matrix for undeclared set " + n);
      exists("embedding matrix " + n, p);
    }
    if (lexicon) exists("lexicon", *lexicon);
  }
};

inline nlohmann::json to_json(const RewardConfig& c) {
  return {{"positional_weights", c.positional_weights},
          {"format_weight", c.format_weight},
          {"lambda_base", c.lambda_base},
          {"lambda_peak", c.lambda_peak},
          {"sigma", c.sigma},
          {"lambda_sim", c.lambda_sim},
          {"margin_power", c.margin_power},
          {"curvature_power", c.curvature_power},
          {"clip_epsilon", c.clip_epsilon},
          {"kl_beta", c.kl_beta},
          {"group_size", c.group_size}};
}

// Missing keys keep their defaults.
inline RewardConfig reward_config_from_json(const nlohmann::json& j, RewardConfig c = {}) {
  auto get = [&](const char* key, auto& field) {
    if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
  };
  for (const auto& [key, _] : j.items()) {
    if (!to_json(RewardConfig{}).contains(key)) throw Error(ErrorKind::kValidation, "unknown reward key '" + key + "'");
  }
  get("positional_weights", c.positional_weights);
  get("format_weight", c.format_weight);
  get("lambda_base", c.lambda_base);
  get("lambda_peak", c.lambda_peak);
  get("sigma", c.sigma);
  get("lambda_sim", c.lambda_sim);
  get("margin_power", c.margin_power);
  get("curvature_power", c.curvature_power);
  get("clip_epsilon", c.clip_epsilon);
  get("kl_beta", c.kl_beta);
  get("group_size", c.group_size);
  c.validate();
  return c;
}

inline nlohmann::json to_json(const PipelineConfig& c) {
  nlohmann::json fit{{"folds", c.fit.folds},
                     {"repeats", c.fit.repeats},
                     {"anchors", c.fit.anchors},
                     {"radius", c.fit.radius ? nlohmann::json(*c.fit.radius) : nlohmann::json()},
                     {"overrides", c.fit.overrides}};
  return {{"schema", kConfigSchema},
          {"emotion_sets", c.emotion_sets},
          {"embedding_matrices", c.embedding_matrices},
          {"lexicon", c.lexicon ? nlohmann::json(*c.lexicon) : nlohmann::json()},
          {"vad_weights", c.vad_weights},
          {"reward", to_json(c.reward)},
          {"refine",
           {{"gradient_threshold", c.refine.gradient_threshold},
            {"balance_factor", c.refine.balance_factor},
            {"vad_bins", c.refine.vad_bins},
            {"template_policy", c.refine.template_policy}}},
          {"fit", fit},
          {"simulation",
           {{"learning_rate", c.simulation.learning_rate},
            {"target_mass", c.simulation.target_mass},
            {"steps", c.simulation.steps}}},
          {"seed", c.seed},
          {"output_dir", c.output_dir}};
}

namespace detail {

inline void reject_unknown(const nlohmann::json& j, const nlohmann::json& known, const std::string& where) {
  for (const auto& [key, _] : j.items()) {
    if (!known.contains(key)) throw Error(ErrorKind::kValidation, "unknown config key '" + where + key + "'");
  }
}

}  // namespace detail

// Parses without touching the filesystem; see load_config for file checks.
inline PipelineConfig config_from_json(const nlohmann::json& j, std::filesystem::path base_dir = {}) {
  try {
    if (j.value("schema", std::string{}) != kConfigSchema) {
      throw Error(ErrorKind::kParse, "config schema must be " + std::string(kConfigSchema));
    }
    PipelineConfig c;
    c.base_dir = std::move(base_dir);
    const auto defaults = to_json(PipelineConfig{});
    detail::reject_unknown(j, defaults, "");
    if (j.contains("emotion_sets")) c.emotion_sets = j.at("emotion_sets").get<std::map<std::string, std::string>>();
    if (j.contains("embedding_matrices")) {
      c.embedding_matrices = j.at("embedding_matrices").get<std::map<std::string, std::string>>();
    }
    if (j.contains("lexicon") && !j.at("lexicon").is_null()) c.lexicon = j.at("lexicon").get<std::string>();
    if (j.contains("vad_weights")) c.vad_weights = j.at("vad_weights").get<DimensionWeights>();
    if (j.contains("reward")) c.reward = reward_config_from_json(j.at("reward"));
    if (j.contains("refine")) {
      const auto& r = j.at("refine");
      detail::reject_unknown(r, defaults.at("refine"), "refine.");
      c.refine.gradient_threshold = r.value("gradient_threshold", c.refine.gradient_threshold);
      c.refine.balance_factor = r.value("balance_factor", c.refine.balance_factor);
      c.refine.vad_bins = r.value("vad_bins", c.refine.vad_bins);
      c.refine.template_policy = r.value("template_policy", c.refine.template_policy);
    }
    if (j.contains("fit")) {
      const auto& f = j.at("fit");
      detail::reject_unknown(f, defaults.at("fit"), "fit.");
      c.fit.folds = f.value("folds", c.fit.folds);
      c.fit.repeats = f.value("repeats", c.fit.repeats);
      c.fit.anchors = f.value("anchors", c.fit.anchors);
      if (f.contains("radius") && !f.at("radius").is_null()) c.fit.radius = f.at("radius").get<double>();
      if (f.contains("overrides")) c.fit.overrides = f.at("overrides").get<std::map<std::string, std::string>>();
    }
    if (j.contains("simulation")) {
      const auto& s = j.at("simulation");
      detail::reject_unknown(s, defaults.at("simulation"), "simulation.");
      c.simulation.learning_rate = s.value("learning_rate", c.simulation.learning_rate);
      c.simulation.target_mass = s.value("target_mass", c.simulation.target_mass);
      c.simulation.steps = s.value("steps", c.simulation.steps);
    }
    c.seed = j.value("seed", c.seed);
    c.output_dir = j.value("output_dir", c.output_dir);

    for (double w : c.vad_weights) {
      if (!(w >= 0.0) || !std::isfinite(w)) throw Error(ErrorKind::kValidation, "vad_weights must be non-negative");
    }
    if (c.refine.template_policy != "all" && c.refine.template_policy != "round-robin") {
      throw Error(ErrorKind::kValidation, "template_policy must be 'all' or 'round-robin'");
    }
    if (!(c.refine.balance_factor > 0.0)) throw Error(ErrorKind::kValidation, "balance_factor must be > 0");
    if (c.refine.vad_bins < 1) throw Error(ErrorKind::kValidation, "vad_bins must be >= 1");
    if (!(c.refine.gradient_threshold >= 0.0)) throw Error(ErrorKind::kValidation, "gradient_threshold must be >= 0");
    if (!(c.simulation.learning_rate > 0.0)) throw Error(ErrorKind::kValidation, "learning_rate must be > 0");
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kParse, std::string("config: ") + e.what());
  }
}

// Applies NAME=VALUE overrides (prefix already stripped) to a config document.
inline void apply_overrides(nlohmann::json& doc, const std::map<std::string, std::string>& overrides) {
  for (const auto& [name, raw] : overrides) {
    nlohmann::json* node = &doc;
    const auto path = text::split(text::lower(name), '_');
    // Rejoin single underscores; "__" separates nesting levels.
    std::vector<std::string> keys{""};
    for (std::size_t i = 0; i < path.size(); ++i) {
      if (path[i].empty() && i + 1 < path.size()) {
        keys.emplace_back();
        continue;
      }
      if (!keys.back().empty()) keys.back() += '_';
      keys.back() += path[i];
    }
    for (std::size_t i = 0; i + 1 < keys.size(); ++i) {
      if (!node->is_object() || !node->contains(keys[i])) {
        throw Error(ErrorKind::kValidation, std::string(kEnvPrefix) + name + ": no such config section");
      }
      node = &(*node)[keys[i]];
    }
    if (!node->is_object() || !node->contains(keys.back())) {
      throw Error(ErrorKind::kValidation, std::string(kEnvPrefix) + name + ": no such config key");
    }
    auto value = nlohmann::json::parse(raw, nullptr, false);
    (*node)[keys.back()] = value.is_discarded() ? nlohmann::json(raw) : value;
  }
}

inline std::map<std::string, std::string> environment_overrides() {
  std::map<std::string, std::string> out;
  for (char** e = environ; e && *e; ++e) {
    const std::string_view kv(*e);
    if (!kv.starts_with(kEnvPrefix)) continue;
    const auto eq = kv.find('=');
    if (eq == std::string_view::npos) continue;
    out.emplace(std::string(kv.substr(kEnvPrefix.size(), eq - kEnvPrefix.size())), std::string(kv.substr(eq + 1)));
  }
  return out;
}

// Reads, overlays the environment, parses, and checks that referenced files exist.
inline PipelineConfig load_config(const std::string& path,
                                  const std::map<std::string, std::string>& overrides = environment_overrides()) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kParse, path + ": " + e.what());
  }
  // Fill defaults so overrides can address keys the file leaves implicit.
  auto full = to_json(config_from_json(doc));
  full.merge_patch(doc);
  apply_overrides(full, overrides);
  auto cfg = config_from_json(full, std::filesystem::path(path).parent_path());
  cfg.check_files();
  return cfg;
}

inline std::map<std::string, EmotionSet> load_emotion_sets(const PipelineConfig& c) {
  std::map<std::string, EmotionSet> out;
  for (const auto& [name, _] : c.emotion_sets) {
    auto set = load_emotion_set(c.set_path(name), AnchorPolicy::kOptional);
    if (set.name() != name) {
      throw Error(ErrorKind::kValidation, "config key '" + name + "' names set '" + set.name() + "'");
    }
    out.emplace(name, std::move(set));
  }
  return out;
}

// Every set with an embedding matrix gets a (VAD, embedding) pair.
inline SimilarityRegistry build_registry(const PipelineConfig& c) {
  SimilarityRegistry registry;
  for (const auto& [name, path] : c.embedding_matrices) {
    const auto set = load_emotion_set(c.set_path(name), AnchorPolicy::kRequired);
    registry.add(build_vad_similarity(set, c.vad_weights), ingest_embedding_similarity(set, c.resolve(path)));
  }
  return registry;
}

}  // namespace eemo::io
