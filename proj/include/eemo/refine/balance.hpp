#pragma once

// Subset balancing: per-class caps for classification labels and greedy
// equal-width histogram filling for continuous VAD scores.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "eemo/error.hpp"
#include "eemo/rng.hpp"

namespace eemo {

struct ClassBalanceOptions {
  double factor = 1.0;                      // cap = floor(smallest class * factor)
  std::map<std::string, std::size_t> caps;  // explicit per-class caps override
  std::uint64_t seed = 0;
};

// Returns selected indices in input order. Within an over-full class the kept
// records are the first `cap` of a seeded shuffle.
inline std::vector<std::size_t> balance_classes(std::span<const std::string> classes,
                                                const ClassBalanceOptions& options = {}) {
  if (classes.empty()) throw Error(ErrorKind::kValidation, "nothing to balance");
  if (!(options.factor > 0.0)) throw Error(ErrorKind::kValidation, "balance factor must be positive");
  std::map<std::string, std::vector<std::size_t>> members;
  for (std::size_t i = 0; i < classes.size(); ++i) members[classes[i]].push_back(i);
  std::size_t smallest = classes.size();
  for (const auto& [c, idx] : members) smallest = std::min(smallest, idx.size());
  const auto default_cap = static_cast<std::size_t>(std::floor(static_cast<double>(smallest) * options.factor));

  Engine engine(options.seed);
  std::vector<char> keep(classes.size(), 0);
  for (auto& [c, idx] : members) {
    const auto it = options.caps.find(c);
    const std::size_t cap = it != options.caps.end() ? it->second : default_cap;
    if (idx.size() > cap) shuffle(std::span<std::size_t>(idx), engine);
    for (std::size_t k = 0; k < std::min(cap, idx.size()); ++k) keep[idx[k]] = 1;
  }
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < keep.size(); ++i) if (keep[i]) out.push_back(i);
  return out;
}

struct VadBalanceOptions {
  std::size_t bins = 10;
  double factor = 1.0;                    // per-bin cap = floor(smallest non-empty bin * factor)
  std::optional<std::size_t> per_bin_cap;  // explicit cap overrides the factor
};

inline std::size_t histogram_bin(double value, std::size_t bins) {
  const auto b = static_cast<std::size_t>(std::floor(std::clamp(value, 0.0, 1.0) * static_cast<double>(bins)));
  return std::min(b, bins - 1);
}

// `values` are normalized scores in [0,1]; `keyword_counts` rank records for
// admission (denser keyword evidence first, input order on ties). Returns
// selected indices in input order.
inline std::vector<std::size_t> balance_vad(std::span<const double> values,
                                            std::span<const std::size_t> keyword_counts,
                                            const VadBalanceOptions& options = {}) {
  if (values.empty()) throw Error(ErrorKind::kValidation, "nothing to balance");
  if (keyword_counts.size() != values.size()) {
    throw Error(ErrorKind::kDimensionMismatch, "keyword counts and values differ in length");
  }
  if (options.bins == 0) throw Error(ErrorKind::kValidation, "bin count must be positive");
  if (!(options.factor > 0.0)) throw Error(ErrorKind::kValidation, "balance factor must be positive");

  std::vector<std::size_t> occupancy(options.bins, 0);
  for (double v : values) {
    if (!std::isfinite(v)) throw Error(ErrorKind::kValidation, "non-finite VAD value");
    ++occupancy[histogram_bin(v, options.bins)];
  }
  std::size_t smallest = values.size();
  for (auto c : occupancy) if (c > 0) smallest = std::min(smallest, c);
  const std::size_t cap = options.per_bin_cap.value_or(
      static_cast<std::size_t>(std::floor(static_cast<double>(smallest) * options.factor)));

  std::vector<std::size_t> order(values.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return keyword_counts[a] > keyword_counts[b]; });
  std::vector<std::size_t> filled(options.bins, 0);
  std::vector<char> keep(values.size(), 0);
  for (auto i : order) {
    auto& f = filled[histogram_bin(values[i], options.bins)];
    if (f < cap) {
      ++f;
      keep[i] = 1;
    }
  }
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < keep.size(); ++i) if (keep[i]) out.push_back(i);
  return out;
}

}  // namespace eemo
