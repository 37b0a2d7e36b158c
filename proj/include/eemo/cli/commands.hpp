#pragma once

// Pipeline commands. Each reads its inputs, writes its outputs atomically
// together with a RunManifest, and reports record-level rejections without
// aborting. Hard errors (unreadable input, invalid arguments) throw.

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "eemo/error.hpp"
#include "eemo/grpo_sim.hpp"
#include "eemo/io/config.hpp"
#include "eemo/io/jsonl.hpp"
#include "eemo/io/manifest.hpp"
#include "eemo/io/records.hpp"
#include "eemo/judge.hpp"
#include "eemo/metrics.hpp"
#include "eemo/refine/annotation.hpp"
#include "eemo/refine/balance.hpp"
#include "eemo/refine/lexicon.hpp"
#include "eemo/refine/ranking.hpp"
#include "eemo/refine/templates.hpp"
#include "eemo/reward.hpp"
#include "eemo/taxonomy.hpp"
#include "eemo/vad_clustering.hpp"

namespace eemo::cli {

inline constexpr std::string_view kRejectSchema = "eemo.reject/1";
inline constexpr std::string_view kVadSampleSchema = "eemo.vad_sample/1";
inline constexpr std::string_view kVadFitSchema = "eemo.vad_fit/1";
inline constexpr std::string_view kPoolSchema = "eemo.pool/1";
inline constexpr std::string_view kTraceSchema = "eemo.trace/1";
inline constexpr std::string_view kEvalItemSchema = "eemo.eval_item/1";
inline constexpr std::string_view kPredictionSchema = "eemo.prediction/1";
inline constexpr std::string_view kReportSchema = "eemo.report/1";

struct RunContext {
  io::PipelineConfig config;
  std::optional<std::string> config_path;
  std::uint64_t seed = 0;
  bool strict = false;
  std::size_t jobs = 1;
  std::string out;  // primary output path
};

struct CommandResult {
  std::size_t written = 0;
  std::size_t rejected = 0;
  std::size_t errors = 0;  // per-item error rows
  bool strict = false;
  std::vector<std::string> outputs;

  int exit_code() const { return strict && (rejected + errors) > 0 ? 1 : 0; }
  std::string summary(std::string_view command) const {
    return std::string(command) + ": written " + std::to_string(written) + ", rejected " + std::to_string(rejected) +
           ", errors " + std::to_string(errors);
  }
};

inline CommandResult counts(std::size_t written, std::size_t rejected, std::size_t errors = 0) {
  CommandResult r;
  r.written = written;
  r.rejected = rejected;
  r.errors = errors;
  return r;
}

namespace detail {

inline nlohmann::json reject_record(std::size_t line, const std::string& id, const std::string& stage,
                                    const std::string& reason) {
  return {{"schema", kRejectSchema}, {"line", line}, {"id", id}, {"stage", stage}, {"reason", reason}};
}

inline std::string id_of(const std::optional<nlohmann::json>& j) {
  if (!j || !j->is_object()) return {};
  for (const char* key : {"id", "image_id"}) {
    if (j->contains(key) && (*j)[key].is_string()) return (*j)[key].get<std::string>();
  }
  return {};
}

// Collects outputs, then writes them and the manifest in one go.
class Emitter {
 public:
  Emitter(const RunContext& ctx, std::string command) : ctx_(ctx) {
    manifest_.command = std::move(command);
    manifest_.seed = ctx.seed;
    manifest_.started = io::utc_timestamp();
    manifest_.config_sha256 = io::sha256_hex(io::to_json(ctx.config).dump());
    if (ctx.config_path) manifest_.add_input(*ctx.config_path);
  }

  void input(const std::string& path) { manifest_.add_input(path); }
  void output(const std::string& path, std::string content) { files_.emplace_back(path, std::move(content)); }

  CommandResult finish(CommandResult result) {
    for (const auto& [path, content] : files_) {
      io::write_file_atomic(path, content);
      manifest_.add_output(path, content);
      result.outputs.push_back(path);
    }
    manifest_.finished = io::utc_timestamp();
    const auto mpath = io::manifest_path(ctx_.out);
    io::write_file_atomic(mpath, manifest_.to_json().dump(2) + "\n");
    result.outputs.push_back(mpath);
    result.strict = ctx_.strict;
    return result;
  }

 private:
  const RunContext& ctx_;
  io::RunManifest manifest_;
  std::vector<std::pair<std::string, std::string>> files_;
};

inline std::string rejects_path(const std::string& out) { return out + ".rejects.jsonl"; }

inline std::vector<std::string> all_labels(const std::map<std::string, EmotionSet>& sets) {
  std::set<std::string> u;
  for (const auto& [_, s] : sets) for (const auto& id : s.ids()) u.insert(id);
  return {u.begin(), u.end()};
}

// Reads annotation records, rejecting malformed ones and labels outside a
// configured set (records naming an unconfigured set are accepted as-is).
struct AnnotationInput {
  std::vector<AnnotationRecord> records;
  std::vector<nlohmann::json> raw;
  std::vector<std::size_t> lines;
};

inline AnnotationInput read_annotations(const std::string& path, const std::map<std::string, EmotionSet>& sets,
                                        std::vector<nlohmann::json>& rejects, const std::string& stage) {
  AnnotationInput in;
  for (auto& l : io::read_jsonl_lenient(path)) {
    if (!l.value) {
      rejects.push_back(reject_record(l.line, "", stage, "malformed JSON: " + l.error));
      continue;
    }
    try {
      auto rec = annotation_from_json(*l.value);
      if (const auto it = sets.find(rec.set); it != sets.end()) rec.validate_labels(it->second);
      in.records.push_back(std::move(rec));
      in.raw.push_back(std::move(*l.value));
      in.lines.push_back(l.line);
    } catch (const Error& e) {
      rejects.push_back(reject_record(l.line, id_of(l.value), stage, e.what()));
    }
  }
  return in;
}

inline std::string ranking_provenance(RankingProvenance p) {
  return p == RankingProvenance::kDistribution ? "distribution" : "progressive";
}

}  // namespace detail

// ---------------------------------------------------------------------------

inline CommandResult cmd_map_labels(const RunContext& ctx, const std::string& input, const std::string& mapping) {
  detail::Emitter em(ctx, "map-labels");
  em.input(input);
  em.input(mapping);
  const auto table = load_mapping_table(mapping);
  const auto sets = io::load_emotion_sets(ctx.config);
  const auto src = sets.find(table.source());
  const auto dst = sets.find(table.target());
  if (src != sets.end() && dst != sets.end()) table.validate(src->second, dst->second);

  std::vector<nlohmann::json> rejects, mapped;
  for (auto& l : io::read_jsonl_lenient(input)) {
    if (!l.value) {
      rejects.push_back(detail::reject_record(l.line, "", "map-labels", "malformed JSON: " + l.error));
      continue;
    }
    try {
      const auto rec = annotation_from_json(*l.value);
      if (rec.set != table.source()) {
        throw Error(ErrorKind::kValidation, "record set '" + rec.set + "' is not the table source '" +
                                                table.source() + "'");
      }
      auto out = map_record_labels(rec, table);
      if (dst != sets.end()) out.validate_labels(dst->second);
      mapped.push_back(to_json(out));
    } catch (const Error& e) {
      rejects.push_back(detail::reject_record(l.line, detail::id_of(l.value), "map-labels", e.what()));
    }
  }
  const auto r = counts(mapped.size(), rejects.size());
  em.output(ctx.out, io::to_jsonl(mapped));
  em.output(detail::rejects_path(ctx.out), io::to_jsonl(rejects));
  return em.finish(r);
}

// Manual review results: two columns, category -> anchor label.
inline std::map<std::string, std::string> load_override_table(const std::string& path) {
  const auto table = io::load_delimited(path);
  std::map<std::string, std::string> out;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    if (row.size() != 2) {
      throw Error(ErrorKind::kParse, path + ":" + std::to_string(table.line_numbers[r]) + ": expected 2 columns");
    }
    out[row[0]] = row[1];
  }
  return out;
}

// Sample record: {"schema": "eemo.vad_sample/1", "id", "set", "vad": [v, a, d],
//                 "labels": [...] (uniform mass) | "probabilities": {label: p}}
inline CommandResult cmd_fit_vad(const RunContext& ctx, const std::string& samples_path,
                                 std::optional<std::size_t> folds = std::nullopt,
                                 std::optional<std::size_t> repeats = std::nullopt,
                                 std::optional<std::string> overrides_path = std::nullopt) {
  detail::Emitter em(ctx, "fit-vad");
  em.input(samples_path);
  auto overrides = ctx.config.fit.overrides;
  if (overrides_path) {
    em.input(*overrides_path);
    for (const auto& [category, anchor] : load_override_table(*overrides_path)) overrides[category] = anchor;
  }
  const auto sets = io::load_emotion_sets(ctx.config);
  const auto anchor_it = sets.find(ctx.config.fit.anchors);
  if (anchor_it == sets.end() || !anchor_it->second.has_all_anchors()) {
    throw Error(ErrorKind::kValidation, "anchor set '" + ctx.config.fit.anchors + "' is not configured with anchors");
  }
  const EmotionSet& anchors = anchor_it->second;

  std::vector<nlohmann::json> rejects;
  std::vector<RegressionSample> samples;
  const EmotionSet* source = nullptr;
  for (auto& l : io::read_jsonl_lenient(samples_path)) {
    const auto id = detail::id_of(l.value);
    try {
      if (!l.value) throw Error(ErrorKind::kParse, "malformed JSON: " + l.error);
      const auto& j = *l.value;
      io::require_schema(j, kVadSampleSchema);
      const auto set_name = j.at("set").get<std::string>();
      const auto it = sets.find(set_name);
      if (it == sets.end()) throw Error(ErrorKind::kNotFound, "set '" + set_name + "' not configured");
      if (source && source != &it->second) throw Error(ErrorKind::kValidation, "samples mix label sets");
      source = &it->second;
      const auto v = j.at("vad").get<std::array<double, 3>>();
      VadVector target{v[0], v[1], v[2]};
      if (!target.is_finite()) throw Error(ErrorKind::kValidation, "non-finite VAD target");
      if (j.contains("labels")) {
        const auto labels = j.at("labels").get<std::vector<std::string>>();
        samples.push_back({uniform_mass(labels, *source), target});
      } else {
        std::vector<double> p(source->size(), 0.0);
        for (const auto& [label, mass] : j.at("probabilities").items()) p[source->require_index(label)] = mass.get<double>();
        samples.push_back({ProbabilityVector(std::move(p)), target});
      }
    } catch (const nlohmann::json::exception& e) {
      rejects.push_back(detail::reject_record(l.line, id, "fit-vad", e.what()));
    } catch (const Error& e) {
      rejects.push_back(detail::reject_record(l.line, id, "fit-vad", e.what()));
    }
  }
  if (samples.empty()) throw Error(ErrorKind::kValidation, "no usable samples in " + samples_path);

  const auto centroids = repeated_kfold_centroids(samples, folds.value_or(ctx.config.fit.folds),
                                                  repeats.value_or(ctx.config.fit.repeats), ctx.seed, source->ids());
  auto assignment = cluster_to_anchors(centroids, anchors, ctx.config.fit.radius);
  apply_overrides(assignment, overrides, centroids, anchors);

  nlohmann::json projection = nlohmann::json::object();
  nlohmann::json entries = nlohmann::json::array();
  for (std::size_t j = 0; j < centroids.cols(); ++j) {
    const auto c = centroids.column(j);
    projection[centroids.categories[j]] = {c.valence, c.arousal, c.dominance};
  }
  for (const auto& e : assignment.entries) {
    entries.push_back({{"category", e.category}, {"anchor", e.anchor}, {"distance", e.distance},
                       {"outlier", e.outlier}, {"overridden", e.overridden}});
  }
  const nlohmann::json report{{"schema", kVadFitSchema},
                              {"set", source->name()},
                              {"anchors", anchors.name()},
                              {"samples", samples.size()},
                              {"folds", folds.value_or(ctx.config.fit.folds)},
                              {"repeats", repeats.value_or(ctx.config.fit.repeats)},
                              {"rank_deficient", centroids.rank_deficient},
                              {"projection", projection},
                              {"radius", assignment.radius},
                              {"assignment", entries},
                              {"outliers", assignment.outliers}};
  em.output(ctx.out, report.dump(2) + "\n");
  em.output(detail::rejects_path(ctx.out), io::to_jsonl(rejects));
  return em.finish(counts(samples.size(), rejects.size()));
}

// Synthesizes VAD from comment keywords, normalized over the accepted corpus.
inline CommandResult cmd_gen_vad(const RunContext& ctx, const std::string& input) {
  detail::Emitter em(ctx, "gen-vad");
  em.input(input);
  if (!ctx.config.lexicon) throw Error(ErrorKind::kMissingField, "config has no lexicon");
  const auto lexicon_path = ctx.config.resolve(*ctx.config.lexicon);
  em.input(lexicon_path);
  const auto lexicon = load_vad_lexicon(lexicon_path);
  const auto sets = io::load_emotion_sets(ctx.config);

  std::vector<nlohmann::json> rejects;
  auto in = detail::read_annotations(input, sets, rejects, "gen-vad");
  std::vector<AnnotationRecord> kept;
  std::vector<VadVector> raw;
  for (std::size_t i = 0; i < in.records.size(); ++i) {
    const auto syn = generate_vad_label(in.records[i].comments, lexicon);
    if (!syn) {
      rejects.push_back(detail::reject_record(in.lines[i], in.records[i].image_id, "gen-vad", "no VAD keywords in comments"));
      continue;
    }
    kept.push_back(in.records[i]);
    kept.back().keyword_count = syn->keyword_count;
    raw.push_back(syn->raw);
  }
  std::vector<nlohmann::json> out;
  if (!kept.empty()) {
    normalize_corpus_vad(raw);
    for (std::size_t i = 0; i < kept.size(); ++i) {
      kept[i].vad = raw[i];
      out.push_back(to_json(kept[i]));
    }
  }
  em.output(ctx.out, io::to_jsonl(out));
  em.output(detail::rejects_path(ctx.out), io::to_jsonl(rejects));
  return em.finish(counts(out.size(), rejects.size()));
}

enum class RankingMethod { kDistribution, kProgressive };

inline CommandResult cmd_derive_rankings(const RunContext& ctx, const std::string& input, RankingMethod method) {
  detail::Emitter em(ctx, "derive-rankings");
  em.input(input);
  const auto sets = io::load_emotion_sets(ctx.config);
  std::vector<nlohmann::json> rejects, out;
  auto in = detail::read_annotations(input, sets, rejects, "derive-rankings");
  for (std::size_t i = 0; i < in.records.size(); ++i) {
    const auto& rec = in.records[i];
    const auto result = method == RankingMethod::kDistribution
                            ? derive_ranking_distribution(rec, ctx.config.refine.gradient_threshold)
                            : derive_ranking_progressive(rec);
    if (const auto* rej = std::get_if<Rejection>(&result)) {
      rejects.push_back(detail::reject_record(in.lines[i], rej->image_id, rej->stage, rej->reason));
      continue;
    }
    const auto& label = std::get<RankingLabel>(result);
    auto updated = rec;
    updated.ranking = label.top3;
    auto j = to_json(updated);
    j["ranking_provenance"] = detail::ranking_provenance(label.provenance);
    out.push_back(std::move(j));
  }
  em.output(ctx.out, io::to_jsonl(out));
  em.output(detail::rejects_path(ctx.out), io::to_jsonl(rejects));
  return em.finish(counts(out.size(), rejects.size()));
}

enum class BalanceMode { kClass, kVad };

// Class mode balances on the dec label; VAD mode on one dimension.
inline CommandResult cmd_balance(const RunContext& ctx, const std::string& input, BalanceMode mode,
                                 const std::string& dimension = "valence") {
  detail::Emitter em(ctx, "balance");
  em.input(input);
  const auto sets = io::load_emotion_sets(ctx.config);
  std::vector<nlohmann::json> rejects;
  auto in = detail::read_annotations(input, sets, rejects, "balance");

  std::vector<std::size_t> usable;
  std::vector<std::string> classes;
  std::vector<double> values;
  std::vector<std::size_t> keywords;
  std::size_t dim = 0;
  if (mode == BalanceMode::kVad) {
    if (dimension == "valence") dim = 0;
    else if (dimension == "arousal") dim = 1;
    else if (dimension == "dominance") dim = 2;
    else throw Error(ErrorKind::kValidation, "unknown VAD dimension '" + dimension + "'");
  }
  for (std::size_t i = 0; i < in.records.size(); ++i) {
    const auto& r = in.records[i];
    if (mode == BalanceMode::kClass) {
      if (!r.dec) {
        rejects.push_back(detail::reject_record(in.lines[i], r.image_id, "balance", "record has no dec label"));
        continue;
      }
      classes.push_back(*r.dec);
    } else {
      if (!r.vad) {
        rejects.push_back(detail::reject_record(in.lines[i], r.image_id, "balance", "record has no VAD value"));
        continue;
      }
      values.push_back((*r.vad)[dim]);
      keywords.push_back(r.keyword_count.value_or(0));
    }
    usable.push_back(i);
  }
  std::vector<nlohmann::json> out;
  if (!usable.empty()) {
    std::vector<std::size_t> picked;
    if (mode == BalanceMode::kClass) {
      ClassBalanceOptions opts;
      opts.factor = ctx.config.refine.balance_factor;
      opts.seed = ctx.seed;
      picked = balance_classes(classes, opts);
    } else {
      VadBalanceOptions opts;
      opts.bins = ctx.config.refine.vad_bins;
      opts.factor = ctx.config.refine.balance_factor;
      picked = balance_vad(values, keywords, opts);
    }
    for (auto k : picked) out.push_back(to_json(in.records[usable[k]]));
  }
  em.output(ctx.out, io::to_jsonl(out));
  em.output(detail::rejects_path(ctx.out), io::to_jsonl(rejects));
  const auto r = counts(out.size(), rejects.size());
  return em.finish(r);
}

inline CommandResult cmd_instantiate_qa(const RunContext& ctx, const std::string& input,
                                        const std::string& templates_path) {
  detail::Emitter em(ctx, "instantiate-qa");
  em.input(input);
  em.input(templates_path);
  const auto sets = io::load_emotion_sets(ctx.config);
  std::vector<QaTemplate> templates;
  for (const auto& l : io::read_jsonl(templates_path)) {
    try {
      templates.push_back(template_from_json(l.value));
    } catch (const Error& e) {
      throw Error(e.kind(), templates_path + ":" + std::to_string(l.line) + ": " + e.what());
    }
  }
  std::vector<nlohmann::json> rejects;
  auto in = detail::read_annotations(input, sets, rejects, "instantiate-qa");
  TemplateOptions opts;
  opts.policy = ctx.config.refine.template_policy == "all" ? TemplatePolicy::kAll : TemplatePolicy::kRoundRobin;
  opts.seed = ctx.seed;
  for (const auto& [name, set] : sets) opts.label_domains[name] = set.ids();
  const auto result = instantiate_templates(in.records, templates, opts);
  std::vector<nlohmann::json> out;
  for (const auto& rec : result.records) out.push_back(to_json(rec));
  std::map<std::string, std::size_t> line_of;
  for (std::size_t i = 0; i < in.records.size(); ++i) line_of.emplace(in.records[i].image_id, in.lines[i]);
  for (const auto& s : result.skipped) {
    const auto it = line_of.find(s.image_id);
    rejects.push_back(detail::reject_record(it == line_of.end() ? 0 : it->second, s.image_id, s.stage, s.reason));
  }
  em.output(ctx.out, io::to_jsonl(out));
  em.output(detail::rejects_path(ctx.out), io::to_jsonl(rejects));
  return em.finish(counts(out.size(), rejects.size()));
}

// Joins responses to ground truth by id. Items whose ground truth is missing
// or invalid become error rows.
inline std::vector<io::ScoreItem> join_score_inputs(const std::string& responses, const std::string& truths,
                                                    std::vector<nlohmann::json>& rejects) {
  std::map<std::string, GroundTruth> gt;
  for (auto& l : io::read_jsonl_lenient(truths)) {
    const auto id = detail::id_of(l.value);
    try {
      if (!l.value) throw Error(ErrorKind::kParse, "malformed JSON: " + l.error);
      if (id.empty()) throw Error(ErrorKind::kMissingField, "ground truth without id");
      if (gt.contains(id)) throw Error(ErrorKind::kValidation, "duplicate ground truth id '" + id + "'");
      gt.emplace(id, io::ground_truth_from_json(*l.value));
    } catch (const Error& e) {
      rejects.push_back(detail::reject_record(l.line, id, "ground-truth", e.what()));
    }
  }
  std::vector<io::ScoreItem> items;
  for (auto& l : io::read_jsonl_lenient(responses)) {
    const auto id = detail::id_of(l.value);
    try {
      if (!l.value) throw Error(ErrorKind::kParse, "malformed JSON: " + l.error);
      io::require_schema(*l.value, io::kResponseSchema);
      if (id.empty()) throw Error(ErrorKind::kMissingField, "response without id");
      io::ScoreItem item{id, l.value->at("response").get<std::string>(), std::nullopt};
      if (const auto it = gt.find(id); it != gt.end()) item.ground_truth = it->second;
      items.push_back(std::move(item));
    } catch (const nlohmann::json::exception& e) {
      rejects.push_back(detail::reject_record(l.line, id, "response", e.what()));
    } catch (const Error& e) {
      rejects.push_back(detail::reject_record(l.line, id, "response", e.what()));
    }
  }
  return items;
}

inline CommandResult cmd_score(const RunContext& ctx, const std::string& responses, const std::string& truths,
                               std::optional<std::size_t> group_size = std::nullopt) {
  detail::Emitter em(ctx, "score");
  em.input(responses);
  em.input(truths);
  std::vector<nlohmann::json> rejects;
  const auto items = join_score_inputs(responses, truths, rejects);
  const auto registry = io::build_registry(ctx.config);
  io::ScoreOptions opts{ctx.config.reward, group_size, ctx.jobs};
  const auto scored = io::score_items(items, registry, opts);
  em.output(ctx.out, io::to_jsonl(scored.records));
  em.output(detail::rejects_path(ctx.out), io::to_jsonl(rejects));
  return em.finish(counts(scored.records.size() - scored.errors, rejects.size(), scored.errors));
}

// ---------------------------------------------------------------------------
// evaluate
//
// Item record: {"schema": "eemo.eval_item/1", "id", "kind", ...} with kind
//   ranking     : "ranking": [3 labels], optional "set"
//   score       : "score": real, optional "dimension"
//   label       : "label", "set"
//   choice      : "answer": letter
//   description : "reference": text, optional "question"
// Prediction record: {"schema": "eemo.prediction/1", "id", "response"}.

namespace detail {

struct EvalAccumulator {
  std::vector<double> ranking_scores;
  std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> scores;  // dim -> (gt, pred)
  std::map<std::string, std::pair<std::vector<std::string>, std::vector<std::string>>> labels;  // set -> (gt, pred)
  std::size_t choice_total = 0, choice_correct = 0;
  std::vector<double> description_scores;
  std::size_t parse_failures = 0;
};

inline double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

inline nlohmann::json correlation_or_null(const std::vector<double>& a, const std::vector<double>& b, bool rank) {
  try {
    return rank ? srcc(a, b) : plcc(a, b);
  } catch (const Error&) {
    return nullptr;  // fewer than 2 items or a constant series
  }
}

}  // namespace detail

inline CommandResult cmd_evaluate(const RunContext& ctx, const std::string& predictions, const std::string& truths,
                                  std::optional<std::string> judge_path = std::nullopt) {
  detail::Emitter em(ctx, "evaluate");
  em.input(predictions);
  em.input(truths);
  std::optional<ReplayJudgeProvider> judge;
  if (judge_path) {
    em.input(*judge_path);
    judge = ReplayJudgeProvider::load(*judge_path);
  }
  const auto sets = io::load_emotion_sets(ctx.config);
  const auto vocabulary = detail::all_labels(sets);

  std::vector<nlohmann::json> rejects;
  std::map<std::string, std::string> responses;
  for (auto& l : io::read_jsonl_lenient(predictions)) {
    const auto id = detail::id_of(l.value);
    try {
      if (!l.value) throw Error(ErrorKind::kParse, "malformed JSON: " + l.error);
      io::require_schema(*l.value, kPredictionSchema);
      if (!responses.emplace(id, l.value->at("response").get<std::string>()).second) {
        throw Error(ErrorKind::kValidation, "duplicate prediction id '" + id + "'");
      }
    } catch (const nlohmann::json::exception& e) {
      rejects.push_back(detail::reject_record(l.line, id, "prediction", e.what()));
    } catch (const Error& e) {
      rejects.push_back(detail::reject_record(l.line, id, "prediction", e.what()));
    }
  }

  detail::EvalAccumulator acc;
  std::vector<nlohmann::json> rows;
  std::size_t errors = 0;
  for (auto& l : io::read_jsonl_lenient(truths)) {
    const auto id = detail::id_of(l.value);
    nlohmann::json row{{"id", id}};
    try {
      if (!l.value) throw Error(ErrorKind::kParse, "malformed JSON: " + l.error);
      const auto& j = *l.value;
      io::require_schema(j, kEvalItemSchema);
      const auto kind = j.at("kind").get<std::string>();
      row["kind"] = kind;
      const auto rit = responses.find(id);
      const std::string response = rit == responses.end() ? std::string{} : rit->second;
      if (rit == responses.end()) row["missing_prediction"] = true;

      if (kind == "ranking") {
        const auto gt = j.at("ranking").get<std::vector<std::string>>();
        if (gt.size() != 3) throw Error(ErrorKind::kValidation, "ranking item needs 3 labels");
        std::vector<std::string> vocab = vocabulary;
        if (j.contains("set")) {
          const auto it = sets.find(j.at("set").get<std::string>());
          if (it == sets.end()) throw Error(ErrorKind::kNotFound, "set not configured");
          vocab = it->second.ids();
        }
        for (const auto& g : gt) if (std::find(vocab.begin(), vocab.end(), g) == vocab.end()) vocab.push_back(g);
        const auto parsed = parse_benchmark_response(response, ResponseKind::kRanking, vocab);
        const auto* pred = std::get_if<std::vector<std::string>>(&parsed);
        row["parsed"] = pred != nullptr;
        row["gt"] = gt;
        row["prediction"] = pred ? nlohmann::json(*pred) : nlohmann::json(nullptr);
        const double s = pred ? ranking_score(gt, *pred, ctx.config.reward.positional_weights) : 0.0;
        row["value"] = s;
        acc.ranking_scores.push_back(s);
        if (!pred) ++acc.parse_failures;
      } else if (kind == "score") {
        const double gt = j.at("score").get<double>();
        const auto dim = j.value("dimension", std::string{});
        const auto parsed = parse_benchmark_response(response, ResponseKind::kScore);
        const auto* pred = std::get_if<double>(&parsed);
        row["parsed"] = pred != nullptr;
        row["dimension"] = dim;
        row["gt"] = gt;
        row["value"] = pred ? *pred : 0.0;
        acc.scores[dim].first.push_back(gt);
        acc.scores[dim].second.push_back(pred ? *pred : 0.0);
        if (!pred) ++acc.parse_failures;
      } else if (kind == "label") {
        const auto gt = j.at("label").get<std::string>();
        const auto set_name = j.at("set").get<std::string>();
        const auto it = sets.find(set_name);
        if (it == sets.end()) throw Error(ErrorKind::kNotFound, "set '" + set_name + "' not configured");
        const auto ids = it->second.ids();
        const auto parsed = parse_benchmark_response(response, ResponseKind::kLabel, ids);
        const auto* pred = std::get_if<std::string>(&parsed);
        row["parsed"] = pred != nullptr;
        row["set"] = set_name;
        row["gt"] = gt;
        row["prediction"] = pred ? *pred : std::string{};
        row["value"] = pred && *pred == gt ? 1.0 : 0.0;
        if (!it->second.contains(gt)) throw Error(ErrorKind::kUnknownLabel, "label '" + gt + "' not in " + set_name);
        acc.labels[set_name].first.push_back(gt);
        acc.labels[set_name].second.push_back(pred ? *pred : std::string{});
        if (!pred) ++acc.parse_failures;
      } else if (kind == "choice") {
        const auto gt = j.at("answer").get<std::string>();
        const auto parsed = parse_benchmark_response(response, ResponseKind::kChoice);
        const auto* pred = std::get_if<std::string>(&parsed);
        row["parsed"] = pred != nullptr;
        row["gt"] = gt;
        row["prediction"] = pred ? *pred : std::string{};
        const bool ok = pred && *pred == gt;
        row["value"] = ok ? 1.0 : 0.0;
        ++acc.choice_total;
        if (ok) ++acc.choice_correct;
        if (!pred) ++acc.parse_failures;
      } else if (kind == "description") {
        if (!judge) throw Error(ErrorKind::kMissingField, "description items need a judge replay file");
        const auto reference = j.at("reference").get<std::string>();
        const auto scores = judge->score({id, j.value("question", std::string{}), response, reference});
        const int conc = conciseness_score(text::word_count(response), text::word_count(reference));
        const double s = description_score(scores, conc);
        row["parsed"] = true;
        row["conciseness"] = conc;
        row["judge"] = {{"completeness", JudgeScores::mean(scores.completeness)},
                        {"precision", JudgeScores::mean(scores.precision)},
                        {"relevance", JudgeScores::mean(scores.relevance)}};
        row["value"] = s;
        acc.description_scores.push_back(s);
      } else {
        throw Error(ErrorKind::kValidation, "unknown item kind '" + kind + "'");
      }
    } catch (const nlohmann::json::exception& e) {
      row["error"] = e.what();
    } catch (const Error& e) {
      row["error"] = e.what();
    }
    if (row.contains("error")) ++errors;
    rows.push_back(std::move(row));
  }

  nlohmann::json agg = nlohmann::json::object();
  if (!acc.ranking_scores.empty()) {
    agg["ranking"] = {{"count", acc.ranking_scores.size()}, {"mean_score", detail::mean(acc.ranking_scores)}};
  }
  for (const auto& [dim, series] : acc.scores) {
    agg["score"][dim.empty() ? "all" : dim] = {{"count", series.first.size()},
                                              {"srcc", detail::correlation_or_null(series.first, series.second, true)},
                                              {"plcc", detail::correlation_or_null(series.first, series.second, false)}};
  }
  for (const auto& [name, series] : acc.labels) {
    const auto m = classification_metrics(series.first, series.second, sets.at(name).ids());
    agg["label"][name] = {{"count", series.first.size()}, {"macro_f1", m.macro_f1}, {"accuracy", m.accuracy}};
  }
  if (acc.choice_total > 0) {
    agg["choice"] = {{"count", acc.choice_total},
                     {"accuracy", static_cast<double>(acc.choice_correct) / static_cast<double>(acc.choice_total)}};
  }
  if (!acc.description_scores.empty()) {
    agg["description"] = {{"count", acc.description_scores.size()},
                          {"mean_score", detail::mean(acc.description_scores)}};
  }
  agg["parse_failures"] = acc.parse_failures;
  agg["errors"] = errors;

  const nlohmann::json report{{"schema", kReportSchema},
                              {"rows", rows},
                              {"aggregates", agg},
                              {"metadata", {{"config_sha256", io::sha256_hex(io::to_json(ctx.config).dump())},
                                            {"inputs",
                                             {{predictions, io::file_sha256(predictions)},
                                              {truths, io::file_sha256(truths)}}}}}};

  // Human-readable companion table.
  std::ostringstream table;
  auto fmt = [](const nlohmann::json& v) {
    if (v.is_null()) return std::string("n/a");
    std::ostringstream s;
    s.setf(std::ios::fixed);
    s.precision(4);
    s << v.get<double>();
    return s.str();
  };
  table << "metric                          count  value\n";
  auto line = [&](const std::string& name, std::size_t count, const std::string& value) {
    std::string n = name;
    n.resize(32, ' ');
    std::string c = std::to_string(count);
    c.resize(7, ' ');
    table << n << c << value << "\n";
  };
  if (agg.contains("ranking")) line("ranking score", agg["ranking"]["count"], fmt(agg["ranking"]["mean_score"]));
  if (agg.contains("score")) {
    for (const auto& [dim, v] : agg["score"].items()) {
      line("srcc " + dim, v["count"], fmt(v["srcc"]));
      line("plcc " + dim, v["count"], fmt(v["plcc"]));
    }
  }
  if (agg.contains("label")) {
    for (const auto& [name, v] : agg["label"].items()) {
      line("macro f1 " + name, v["count"], fmt(v["macro_f1"]));
      line("accuracy " + name, v["count"], fmt(v["accuracy"]));
    }
  }
  if (agg.contains("choice")) line("choice accuracy", agg["choice"]["count"], fmt(agg["choice"]["accuracy"]));
  if (agg.contains("description")) {
    line("description score", agg["description"]["count"], fmt(agg["description"]["mean_score"]));
  }
  line("parse failures", acc.parse_failures, "-");

  em.output(ctx.out, report.dump(2) + "\n");
  em.output(ctx.out + ".txt", table.str());
  em.output(detail::rejects_path(ctx.out), io::to_jsonl(rejects));
  return em.finish(counts(rows.size() - errors, rejects.size(), errors));
}

// ---------------------------------------------------------------------------
// simulate
//
// Pool file: {"schema": "eemo.pool/1", "ground_truth": {<eemo.gt/1 fields>}, "candidates": [...]}

inline CandidatePool pool_from_json(const nlohmann::json& j) {
  try {
    io::require_schema(j, kPoolSchema);
    auto gt_json = j.at("ground_truth");
    gt_json["schema"] = io::kGroundTruthSchema;
    CandidatePool pool{io::ground_truth_from_json(gt_json), j.at("candidates").get<std::vector<std::string>>()};
    pool.validate();
    return pool;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kParse, std::string("pool: ") + e.what());
  }
}

inline CommandResult cmd_simulate(const RunContext& ctx, const std::string& pool_path,
                                  std::optional<std::size_t> steps = std::nullopt) {
  detail::Emitter em(ctx, "simulate");
  em.input(pool_path);
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(io::read_file(pool_path));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kParse, pool_path + ": " + e.what());
  }
  const auto pool = pool_from_json(doc);
  const auto registry = pool.ground_truth.task == TaskKind::kClassification ? io::build_registry(ctx.config)
                                                                            : SimilarityRegistry{};
  SimConfig cfg{ctx.config.reward, ctx.config.simulation.learning_rate, ctx.config.simulation.target_mass};
  const auto trace = run_simulation(pool, registry, cfg, steps.value_or(ctx.config.simulation.steps), ctx.seed);

  std::vector<nlohmann::json> rows;
  rows.reserve(trace.rows.size());
  for (const auto& r : trace.rows) {
    rows.push_back({{"schema", kTraceSchema}, {"step", r.step}, {"group", r.group}, {"rewards", r.rewards},
                    {"advantages", r.advantages}, {"surrogate", r.surrogate}, {"kl", r.kl},
                    {"best_probability", r.best_probability}});
  }
  const auto& s = trace.summary;
  const nlohmann::json summary{
      {"schema", "eemo.sim_summary/1"},
      {"candidate_rewards", trace.candidate_rewards},
      {"best_index", s.best_index},
      {"converged", s.converged},
      {"steps_to_target", s.steps_to_target ? nlohmann::json(*s.steps_to_target) : nlohmann::json(nullptr)},
      {"target_mass", cfg.target_mass},
      {"final_best_probability", s.final_best_probability},
      {"final_kl", s.final_kl},
      {"final_probabilities", trace.final_probabilities}};
  em.output(ctx.out, io::to_jsonl(rows));
  em.output(ctx.out + ".summary.json", summary.dump(2) + "\n");
  return em.finish(counts(rows.size(), 0));
}

}  // namespace eemo::cli
