#pragma once

// Rule-based instantiation of QA templates from refined labels.
//
// A template binds one label dimension (dec, valence, arousal, dominance or
// ranking) and has an answer form:
//   yesno   - single image; emits the true candidate ("yes") and one seeded
//             distractor ("no")
//   choice  - single image; `options` candidates, correct position rotates
//             round-robin per template
//   compare - image pair; "first"/"second", the answer position alternates
//   both    - image pair; yes/no on whether both share the first image's value
//   list    - single image; the top-3 ranking joined by ", "
//   open    - question only; the answer is generated elsewhere
// Placeholders: {candidate}, {options}, {dimension}.

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "eemo/error.hpp"
#include "eemo/refine/annotation.hpp"
#include "eemo/refine/lexicon.hpp"
#include "eemo/refine/ranking.hpp"
#include "eemo/rng.hpp"

namespace eemo {

enum class TemplateKind { kPerceptionSingle, kPerceptionPair, kRanking, kDescription };
enum class AnswerForm { kYesNo, kChoice, kCompare, kBoth, kList, kOpen };

inline constexpr std::string_view kTemplateSchema = "eemo.qa_template/1";
inline constexpr std::string_view kInstructionSchema = "eemo.instruction/1";

struct QaTemplate {
  std::string id;
  TemplateKind kind = TemplateKind::kPerceptionSingle;
  AnswerForm form = AnswerForm::kYesNo;
  std::string dimension;
  std::string text;
  std::size_t options = 2;      // choice form
  bool require_differ = false;  // pair forms: skip pairs sharing the value

  bool is_pair() const { return form == AnswerForm::kCompare || form == AnswerForm::kBoth; }

  void validate() const {
    static const std::set<std::string> kDimensions{"dec", "valence", "arousal", "dominance", "ranking"};
    if (id.empty()) throw Error(ErrorKind::kValidation, "template without id");
    if (!kDimensions.contains(dimension)) {
      throw Error(ErrorKind::kMissingField, "template " + id + " references unknown dimension '" + dimension + "'");
    }
    for (std::size_t pos = text.find('{'); pos != std::string::npos; pos = text.find('{', pos + 1)) {
      const auto end = text.find('}', pos);
      if (end == std::string::npos) throw Error(ErrorKind::kParse, "template " + id + ": unclosed placeholder");
      const auto name = text.substr(pos + 1, end - pos - 1);
      if (name != "candidate" && name != "options" && name != "dimension") {
        throw Error(ErrorKind::kValidation, "template " + id + ": no binding rule for {" + name + "}");
      }
    }
    const bool pair_kind = kind == TemplateKind::kPerceptionPair;
    if (pair_kind != is_pair() && kind != TemplateKind::kDescription) {
      throw Error(ErrorKind::kValidation, "template " + id + ": answer form does not fit its task kind");
    }
    if ((form == AnswerForm::kList) != (dimension == "ranking")) {
      throw Error(ErrorKind::kValidation, "template " + id + ": only the list form binds the ranking dimension");
    }
    if (form == AnswerForm::kChoice && options < 2) {
      throw Error(ErrorKind::kValidation, "template " + id + ": choice needs at least 2 options");
    }
  }
};

inline QaTemplate template_from_json(const nlohmann::json& j) {
  static const std::map<std::string, TemplateKind> kKinds{{"perception-single", TemplateKind::kPerceptionSingle},
                                                          {"perception-pair", TemplateKind::kPerceptionPair},
                                                          {"ranking", TemplateKind::kRanking},
                                                          {"description", TemplateKind::kDescription}};
  static const std::map<std::string, AnswerForm> kForms{{"yesno", AnswerForm::kYesNo},   {"choice", AnswerForm::kChoice},
                                                        {"compare", AnswerForm::kCompare}, {"both", AnswerForm::kBoth},
                                                        {"list", AnswerForm::kList},       {"open", AnswerForm::kOpen}};
  try {
    QaTemplate t;
    t.id = j.at("id").get<std::string>();
    const auto kind = kKinds.find(j.at("kind").get<std::string>());
    const auto form = kForms.find(j.at("form").get<std::string>());
    if (kind == kKinds.end() || form == kForms.end()) {
      throw Error(ErrorKind::kParse, "template " + t.id + ": unknown kind or form");
    }
    t.kind = kind->second;
    t.form = form->second;
    t.dimension = j.at("dimension").get<std::string>();
    t.text = j.at("text").get<std::string>();
    t.options = j.value("options", std::size_t{2});
    t.require_differ = j.value("require_differ", false);
    t.validate();
    return t;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kParse, std::string("template: ") + e.what());
  }
}

struct InstructionRecord {
  std::string id;
  std::string template_id;
  std::vector<std::string> image_ids;
  std::string dimension;
  std::string question;
  std::vector<std::string> options;
  std::optional<std::string> answer;
};

inline nlohmann::json to_json(const InstructionRecord& r) {
  nlohmann::json j{{"schema", kInstructionSchema}, {"id", r.id},           {"template", r.template_id},
                   {"images", r.image_ids},        {"dimension", r.dimension}, {"question", r.question}};
  if (!r.options.empty()) j["options"] = r.options;
  j["answer"] = r.answer ? nlohmann::json(*r.answer) : nlohmann::json(nullptr);
  return j;
}

enum class TemplatePolicy { kAll, kRoundRobin };

struct TemplateOptions {
  TemplatePolicy policy = TemplatePolicy::kRoundRobin;
  std::uint64_t seed = 0;
  // Candidate domain for the dec dimension, keyed by the record's set name.
  // Falls back to the dec labels observed in the corpus.
  std::map<std::string, std::vector<std::string>> label_domains;
};

struct TemplateOutput {
  std::vector<InstructionRecord> records;
  std::vector<Rejection> skipped;
};

namespace detail {

inline std::string replace_all(std::string s, std::string_view key, std::string_view value) {
  for (auto pos = s.find(key); pos != std::string::npos; pos = s.find(key, pos + value.size())) {
    s.replace(pos, key.size(), value);
  }
  return s;
}

inline std::string render(const QaTemplate& t, std::string_view candidate, std::string_view options) {
  auto s = replace_all(t.text, "{candidate}", candidate);
  s = replace_all(std::move(s), "{options}", options);
  return replace_all(std::move(s), "{dimension}", t.dimension);
}

inline std::string option_letter(std::size_t i) { return std::string(1, static_cast<char>('A' + i)); }

class DimensionView {
 public:
  DimensionView(std::span<const AnnotationRecord> records, const TemplateOptions& options)
      : records_(records), options_(options) {
    std::set<std::string> seen;
    for (const auto& r : records) if (r.dec) seen.insert(*r.dec);
    observed_dec_.assign(seen.begin(), seen.end());
    for (std::size_t d = 0; d < 3; ++d) {
      std::vector<double> v;
      for (const auto& r : records) if (r.vad) v.push_back((*r.vad)[d]);
      if (v.size() >= 3) {
        try {
          tertiles_[d] = tertile_boundaries(v);
        } catch (const Error&) {
          // constant dimension: no level information
        }
      }
    }
  }

  std::optional<std::string> value(const AnnotationRecord& r, const std::string& dim) const {
    if (dim == "dec") return r.dec;
    if (dim == "ranking") return std::nullopt;
    const std::size_t d = dim == "valence" ? 0 : (dim == "arousal" ? 1 : 2);
    if (!r.vad || !tertiles_[d]) return std::nullopt;
    return std::string(to_string(tertiles_[d]->level((*r.vad)[d])));
  }

  // Level rank for ordering comparisons; for dec it is meaningless.
  std::optional<double> magnitude(const AnnotationRecord& r, const std::string& dim) const {
    if (dim == "dec" || dim == "ranking" || !r.vad) return std::nullopt;
    const std::size_t d = dim == "valence" ? 0 : (dim == "arousal" ? 1 : 2);
    return (*r.vad)[d];
  }

  std::vector<std::string> domain(const AnnotationRecord& r, const std::string& dim) const {
    if (dim != "dec") return {"low", "medium", "high"};
    const auto it = options_.label_domains.find(r.set);
    return it != options_.label_domains.end() ? it->second : observed_dec_;
  }

 private:
  std::span<const AnnotationRecord> records_;
  const TemplateOptions& options_;
  std::vector<std::string> observed_dec_;
  std::array<std::optional<Tertiles>, 3> tertiles_{};
};

}  // namespace detail

inline TemplateOutput instantiate_templates(std::span<const AnnotationRecord> records,
                                            std::span<const QaTemplate> templates,
                                            const TemplateOptions& options = {}) {
  for (const auto& t : templates) t.validate();
  TemplateOutput out;
  Engine engine(options.seed);
  const detail::DimensionView view(records, options);
  std::map<std::string, std::size_t> rotation;  // per-template answer-position counter
  std::size_t next_id = 0;
  auto emit = [&](InstructionRecord rec) {
    rec.id = "qa-" + std::to_string(next_id++);
    out.records.push_back(std::move(rec));
  };

  auto applicable = [&](const QaTemplate& t, const AnnotationRecord& r) {
    if (t.form == AnswerForm::kList) return r.ranking.size() == 3;
    if (t.form == AnswerForm::kOpen) return true;
    return view.value(r, t.dimension).has_value();
  };

  auto instantiate_single = [&](const QaTemplate& t, const AnnotationRecord& r) {
    InstructionRecord base;
    base.template_id = t.id;
    base.image_ids = {r.image_id};
    base.dimension = t.dimension;
    switch (t.form) {
      case AnswerForm::kList: {
        base.question = detail::render(t, "", "");
        base.answer = r.ranking[0] + ", " + r.ranking[1] + ", " + r.ranking[2];
        emit(std::move(base));
        return;
      }
      case AnswerForm::kOpen: {
        base.question = detail::render(t, "", "");
        emit(std::move(base));
        return;
      }
      default: break;
    }
    const auto truth = *view.value(r, t.dimension);
    std::vector<std::string> distractors;
    for (const auto& c : view.domain(r, t.dimension)) if (c != truth) distractors.push_back(c);
    if (t.form == AnswerForm::kYesNo) {
      auto yes = base;
      yes.question = detail::render(t, truth, "");
      yes.answer = "yes";
      emit(std::move(yes));
      if (!distractors.empty()) {
        const auto& d = distractors[uniform_below(engine, distractors.size())];
        auto no = base;
        no.question = detail::render(t, d, "");
        no.answer = "no";
        emit(std::move(no));
      }
      return;
    }
    // choice
    const std::size_t n = std::min(t.options, distractors.size() + 1);
    if (n < 2) {
      out.skipped.push_back({r.image_id, t.id, "no distractor available"});
      return;
    }
    shuffle(std::span<std::string>(distractors), engine);
    const std::size_t correct = rotation[t.id]++ % n;
    std::vector<std::string> opts;
    for (std::size_t i = 0, d = 0; i < n; ++i) opts.push_back(i == correct ? truth : distractors[d++]);
    std::string listing;
    for (std::size_t i = 0; i < n; ++i) {
      if (i) listing += "\n";
      listing += detail::option_letter(i) + ". " + opts[i];
    }
    base.question = detail::render(t, "", listing);
    base.options = std::move(opts);
    base.answer = detail::option_letter(correct);
    emit(std::move(base));
  };

  // Single-image templates.
  std::vector<const QaTemplate*> singles;
  std::vector<const QaTemplate*> pairs;
  for (const auto& t : templates) (t.is_pair() ? pairs : singles).push_back(&t);
  std::size_t cursor = 0;
  for (const auto& r : records) {
    std::vector<const QaTemplate*> usable;
    for (const auto* t : singles) {
      if (applicable(*t, r)) {
        usable.push_back(t);
      } else {
        out.skipped.push_back({r.image_id, t->id, "record lacks dimension " + t->dimension});
      }
    }
    if (usable.empty()) continue;
    if (options.policy == TemplatePolicy::kAll) {
      for (const auto* t : usable) instantiate_single(*t, r);
    } else {
      instantiate_single(*usable[cursor++ % usable.size()], r);
    }
  }

  // Pair templates: consecutive records of a seeded shuffle form the pairs.
  for (const auto* t : pairs) {
    std::vector<std::size_t> eligible;
    for (std::size_t i = 0; i < records.size(); ++i) {
      if (applicable(*t, records[i])) eligible.push_back(i);
    }
    shuffle(std::span<std::size_t>(eligible), engine);
    for (std::size_t k = 0; k + 1 < eligible.size(); k += 2) {
      const auto& a = records[eligible[k]];
      const auto& b = records[eligible[k + 1]];
      const auto va = *view.value(a, t->dimension);
      const auto vb = *view.value(b, t->dimension);
      const bool differ = va != vb;
      if (t->require_differ && !differ) {
        out.skipped.push_back({a.image_id + "+" + b.image_id, t->id, "pair shares " + t->dimension + " value"});
        continue;
      }
      InstructionRecord rec;
      rec.template_id = t->id;
      rec.dimension = t->dimension;
      if (t->form == AnswerForm::kBoth) {
        rec.image_ids = {a.image_id, b.image_id};
        rec.question = detail::render(*t, va, "");
        rec.answer = differ ? "no" : "yes";
        emit(std::move(rec));
        continue;
      }
      if (!differ) {
        out.skipped.push_back({a.image_id + "+" + b.image_id, t->id, "compare needs differing values"});
        continue;
      }
      // "higher" for VAD levels; for dec the candidate is the answer image's label.
      const AnnotationRecord* answer_img = &a;
      const AnnotationRecord* other = &b;
      if (const auto ma = view.magnitude(a, t->dimension)) {
        if (*ma < *view.magnitude(b, t->dimension)) std::swap(answer_img, other);
      }
      const bool answer_first = rotation[t->id]++ % 2 == 0;
      rec.image_ids = answer_first ? std::vector<std::string>{answer_img->image_id, other->image_id}
                                   : std::vector<std::string>{other->image_id, answer_img->image_id};
      rec.question = detail::render(*t, *view.value(*answer_img, t->dimension), "");
      rec.options = {"first", "second"};
      rec.answer = answer_first ? "first" : "second";
      emit(std::move(rec));
    }
  }
  return out;
}

}  // namespace eemo
