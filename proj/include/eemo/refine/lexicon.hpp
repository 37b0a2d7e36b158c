#pragma once

// Lexicon-based VAD synthesis from free-text comments.

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "eemo/error.hpp"
#include "eemo/io/table.hpp"
#include "eemo/taxonomy.hpp"
#include "eemo/text.hpp"

namespace eemo {

struct ScaleRange {
  double min = 0.0;
  double max = 1.0;
};

// Lemma -> raw VAD norms. Values stay on the lexicon's own scale; corpus
// level min-max normalization happens after averaging.
class VadLexicon {
 public:
  VadLexicon() = default;
  VadLexicon(std::vector<std::pair<std::string, VadVector>> entries, std::array<ScaleRange, 3> scale)
      : scale_(scale) {
    for (auto& [lemma, vad] : entries) {
      if (lemma.empty() || lemma != text::lower(lemma)) {
        throw Error(ErrorKind::kValidation, "lexicon lemma '" + lemma + "' is not lowercase");
      }
      if (!vad.is_finite()) throw Error(ErrorKind::kValidation, "non-finite VAD for lemma '" + lemma + "'");
      if (!entries_.emplace(lemma, vad).second) {
        throw Error(ErrorKind::kDuplicateLabel, "lemma '" + lemma + "' repeated in lexicon");
      }
    }
  }

  const VadVector* find(std::string_view lemma) const {
    const auto it = entries_.find(std::string(lemma));
    return it == entries_.end() ? nullptr : &it->second;
  }
  std::size_t size() const { return entries_.size(); }
  const std::array<ScaleRange, 3>& scale() const { return scale_; }

 private:
  std::unordered_map<std::string, VadVector> entries_;
  std::array<ScaleRange, 3> scale_{};
};

// Tab or comma separated `lemma, V, A, D`. The raw scale is declared with
//   # scale: <min> <max>                      (all dimensions)
//   # scale: vmin vmax amin amax dmin dmax    (per dimension)
// An optional header row whose second cell is not numeric is skipped.
inline VadLexicon parse_vad_lexicon(std::string_view content) {
  const auto table = io::parse_delimited(content);
  const auto it = table.directives.find("scale");
  if (it == table.directives.end()) throw Error(ErrorKind::kParse, "lexicon lacks a '# scale:' directive");
  std::vector<double> bounds;
  for (const auto& part : text::split(it->second, ' ')) {
    if (!text::trim(part).empty()) bounds.push_back(io::parse_real(part, "scale"));
  }
  std::array<ScaleRange, 3> scale{};
  if (bounds.size() == 2) {
    scale.fill({bounds[0], bounds[1]});
  } else if (bounds.size() == 6) {
    for (std::size_t d = 0; d < 3; ++d) scale[d] = {bounds[2 * d], bounds[2 * d + 1]};
  } else {
    throw Error(ErrorKind::kParse, "scale directive needs 2 or 6 numbers");
  }
  for (const auto& s : scale) {
    if (!(s.max > s.min)) throw Error(ErrorKind::kParse, "scale max must exceed min");
  }

  std::vector<std::pair<std::string, VadVector>> entries;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    const auto where = "lexicon line " + std::to_string(table.line_numbers[r]);
    if (row.size() != 4) throw Error(ErrorKind::kParse, where + ": expected 4 columns");
    if (r == 0) {
      try {
        (void)io::parse_real(row[1]);
      } catch (const Error&) {
        continue;  // header row
      }
    }
    VadVector v{io::parse_real(row[1], where), io::parse_real(row[2], where), io::parse_real(row[3], where)};
    for (std::size_t d = 0; d < 3; ++d) {
      if (v[d] < scale[d].min || v[d] > scale[d].max) {
        throw Error(ErrorKind::kValidation, where + ": value outside declared scale");
      }
    }
    entries.emplace_back(text::lower(row[0]), v);
  }
  return VadLexicon(std::move(entries), scale);
}

inline VadLexicon load_vad_lexicon(const std::string& path) { return parse_vad_lexicon(io::read_file(path)); }

struct KeywordHit {
  std::string lemma;
  VadVector vad;
};

// Lowercase, strip punctuation, exact lemma lookup. Order of appearance is
// kept and every occurrence counts.
inline std::vector<KeywordHit> extract_vad_keywords(std::string_view comment, const VadLexicon& lexicon) {
  std::vector<KeywordHit> hits;
  for (auto& token : text::word_tokens(comment)) {
    if (const auto* vad = lexicon.find(token)) hits.push_back({std::move(token), *vad});
  }
  return hits;
}

struct VadSynthesis {
  VadVector raw;
  std::size_t keyword_count = 0;
};

// Mean over all keyword occurrences across comments; nullopt means no signal.
inline std::optional<VadSynthesis> generate_vad_label(std::span<const std::string> comments,
                                                      const VadLexicon& lexicon) {
  VadVector sum;
  std::size_t count = 0;
  for (const auto& c : comments) {
    for (const auto& hit : extract_vad_keywords(c, lexicon)) {
      for (std::size_t d = 0; d < 3; ++d) sum[d] += hit.vad[d];
      ++count;
    }
  }
  if (count == 0) return std::nullopt;
  for (std::size_t d = 0; d < 3; ++d) sum[d] /= static_cast<double>(count);
  return VadSynthesis{sum, count};
}

// Per-dimension min-max normalization over the corpus, in place. Returns the
// raw bounds used.
inline std::array<ScaleRange, 3> normalize_corpus_vad(std::span<VadVector> values) {
  std::array<ScaleRange, 3> bounds{};
  if (values.size() < 2) throw Error(ErrorKind::kDegenerate, "corpus normalization needs at least 2 records");
  for (std::size_t d = 0; d < 3; ++d) {
    double lo = values.front()[d], hi = values.front()[d];
    for (const auto& v : values) {
      if (!v.is_finite()) throw Error(ErrorKind::kValidation, "non-finite raw VAD value");
      lo = std::min(lo, v[d]);
      hi = std::max(hi, v[d]);
    }
    if (!(hi > lo)) {
      throw Error(ErrorKind::kDegenerate, "VAD dimension " + std::to_string(d) + " is constant across the corpus");
    }
    bounds[d] = {lo, hi};
  }
  for (auto& v : values) {
    for (std::size_t d = 0; d < 3; ++d) {
      v[d] = v[d] == bounds[d].max ? 1.0 : (v[d] - bounds[d].min) / (bounds[d].max - bounds[d].min);
    }
  }
  return bounds;
}

enum class Level { kLow, kMedium, kHigh };

inline std::string_view to_string(Level l) {
  switch (l) {
    case Level::kLow: return "low";
    case Level::kMedium: return "medium";
    case Level::kHigh: return "high";
  }
  return "";
}

// Linear-interpolation quantile of sorted data.
inline double quantile_sorted(std::span<const double> sorted, double q) {
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

struct Tertiles {
  double lower = 0.0;
  double upper = 0.0;

  Level level(double v) const {
    if (v < lower) return Level::kLow;
    if (v >= upper) return Level::kHigh;
    return Level::kMedium;
  }
};

inline Tertiles tertile_boundaries(std::span<const double> values) {
  if (values.size() < 3) throw Error(ErrorKind::kValidation, "tertiles need at least 3 values");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  if (sorted.front() == sorted.back()) throw Error(ErrorKind::kDegenerate, "all values identical");
  return {quantile_sorted(sorted, 1.0 / 3.0), quantile_sorted(sorted, 2.0 / 3.0)};
}

inline std::vector<Level> tertile_discretize(std::span<const double> values) {
  const auto t = tertile_boundaries(values);
  std::vector<Level> out;
  out.reserve(values.size());
  for (double v : values) out.push_back(t.level(v));
  return out;
}

}  // namespace eemo
