#pragma once

// Categorical -> VAD projection by intercept-free least squares, averaged
// over repeated k-fold training partitions, and nearest-anchor grouping.

#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "eemo/error.hpp"
#include "eemo/rng.hpp"
#include "eemo/taxonomy.hpp"

namespace eemo {

inline constexpr double kProbabilityTolerance = 1e-9;

class ProbabilityVector {
 public:
  ProbabilityVector() = default;
  explicit ProbabilityVector(std::vector<double> values) : values_(std::move(values)) {
    double sum = 0.0;
    for (double v : values_) {
      if (!std::isfinite(v) || v < 0.0) {
        throw Error(ErrorKind::kValidation, "probability entries must be finite and non-negative");
      }
      sum += v;
    }
    if (values_.empty() || std::abs(sum - 1.0) > kProbabilityTolerance) {
      throw Error(ErrorKind::kValidation, "probabilities sum to " + std::to_string(sum) + ", not 1");
    }
  }

  std::size_t size() const { return values_.size(); }
  double operator[](std::size_t i) const { return values_[i]; }
  const std::vector<double>& values() const { return values_; }

 private:
  std::vector<double> values_;
};

// Uniform contribution: an annotator choosing n labels gives each 1/n.
inline ProbabilityVector uniform_mass(std::span<const std::string> selected, const EmotionSet& set) {
  if (selected.empty()) throw Error(ErrorKind::kValidation, "empty label selection");
  std::vector<double> p(set.size(), 0.0);
  const double share = 1.0 / static_cast<double>(selected.size());
  for (const auto& label : selected) p[set.require_index(label)] += share;
  return ProbabilityVector(std::move(p));
}

struct RegressionSample {
  ProbabilityVector probabilities;
  VadVector target;
};

struct ProjectionMatrix {
  std::vector<std::string> categories;                // column names, may be empty
  Eigen::Matrix<double, 3, Eigen::Dynamic> values;    // rows V, A, D
  bool rank_deficient = false;                        // minimum-norm fallback used

  std::size_t cols() const { return static_cast<std::size_t>(values.cols()); }
  VadVector column(std::size_t j) const {
    const auto c = static_cast<Eigen::Index>(j);
    return {values(0, c), values(1, c), values(2, c)};
  }
};

namespace detail {

inline void check_samples(std::span<const RegressionSample> samples) {
  if (samples.empty()) throw Error(ErrorKind::kValidation, "no regression samples");
  const std::size_t k = samples.front().probabilities.size();
  for (const auto& s : samples) {
    if (s.probabilities.size() != k) {
      throw Error(ErrorKind::kDimensionMismatch, "regression samples disagree on category count");
    }
    if (!s.target.is_finite()) throw Error(ErrorKind::kValidation, "non-finite VAD target");
  }
}

inline ProjectionMatrix solve_projection(std::span<const RegressionSample> samples,
                                         std::span<const std::size_t> rows) {
  const auto k = static_cast<Eigen::Index>(samples.front().probabilities.size());
  const auto n = static_cast<Eigen::Index>(rows.size());
  Eigen::MatrixXd p(n, k);
  Eigen::MatrixXd t(n, 3);
  for (Eigen::Index r = 0; r < n; ++r) {
    const auto& s = samples[rows[static_cast<std::size_t>(r)]];
    for (Eigen::Index c = 0; c < k; ++c) p(r, c) = s.probabilities[static_cast<std::size_t>(c)];
    for (Eigen::Index d = 0; d < 3; ++d) t(r, d) = s.target[static_cast<std::size_t>(d)];
  }

  ProjectionMatrix out;
  Eigen::MatrixXd w_t;  // K x 3
  const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(p);
  if (qr.rank() == k) {
    const Eigen::MatrixXd gram = p.transpose() * p;
    w_t = gram.llt().solve(p.transpose() * t);
  } else {
    w_t = Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd>(p).solve(t);
    out.rank_deficient = true;
  }
  out.values = w_t.transpose();
  return out;
}

}  // namespace detail

// Minimizes sum ||target - W p||^2 over all samples, no intercept.
inline ProjectionMatrix fit_projection(std::span<const RegressionSample> samples,
                                       std::vector<std::string> categories = {}) {
  detail::check_samples(samples);
  std::vector<std::size_t> rows(samples.size());
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
  auto out = detail::solve_projection(samples, rows);
  out.categories = std::move(categories);
  return out;
}

// Averages W over every training partition of `repeats` seeded k-fold splits.
// Folds are contiguous near-equal blocks of a seeded shuffle of the indices.
inline ProjectionMatrix repeated_kfold_centroids(std::span<const RegressionSample> samples,
                                                 std::size_t k, std::size_t repeats, std::uint64_t seed,
                                                 std::vector<std::string> categories = {}) {
  detail::check_samples(samples);
  if (k < 2) throw Error(ErrorKind::kValidation, "k-fold needs k >= 2");
  if (repeats < 1) throw Error(ErrorKind::kValidation, "repeats must be >= 1");
  const std::size_t n = samples.size();
  if (n < k) {
    throw Error(ErrorKind::kValidation, "fewer samples (" + std::to_string(n) + ") than folds (" +
                                            std::to_string(k) + ")");
  }

  Engine engine(seed);
  const auto cols = static_cast<Eigen::Index>(samples.front().probabilities.size());
  ProjectionMatrix acc;
  acc.values = Eigen::Matrix<double, 3, Eigen::Dynamic>::Zero(3, cols);
  std::vector<std::size_t> train;
  train.reserve(n);
  for (std::size_t r = 0; r < repeats; ++r) {
    const auto order = shuffled_indices(n, engine);
    for (std::size_t f = 0; f < k; ++f) {
      const std::size_t lo = f * n / k;
      const std::size_t hi = (f + 1) * n / k;
      train.clear();
      for (std::size_t i = 0; i < n; ++i) {
        if (i < lo || i >= hi) train.push_back(order[i]);
      }
      const auto fit = detail::solve_projection(samples, train);
      acc.values += fit.values;
      acc.rank_deficient = acc.rank_deficient || fit.rank_deficient;
    }
  }
  acc.values /= static_cast<double>(k * repeats);
  acc.categories = std::move(categories);
  return acc;
}

// ---------------------------------------------------------------------------
// Anchor clustering

struct ClusterEntry {
  std::string category;
  std::string anchor;
  double distance = 0.0;
  bool outlier = false;
  bool overridden = false;
};

struct ClusterAssignment {
  std::vector<ClusterEntry> entries;
  double radius = 0.0;
  std::vector<std::string> outliers;
};

// Radius of std::nullopt means "auto": the minimal covering radius.
inline ClusterAssignment cluster_to_anchors(const ProjectionMatrix& centroids, const EmotionSet& anchors,
                                            std::optional<double> radius = std::nullopt) {
  if (centroids.cols() == 0) throw Error(ErrorKind::kValidation, "empty centroid matrix");
  if (anchors.size() == 0) throw Error(ErrorKind::kValidation, "no anchors");
  if (radius && !(*radius >= 0.0)) throw Error(ErrorKind::kValidation, "radius must be non-negative");

  ClusterAssignment out;
  double covering = 0.0;
  for (std::size_t j = 0; j < centroids.cols(); ++j) {
    const VadVector c = centroids.column(j);
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t a = 0; a < anchors.size(); ++a) {
      const double d = weighted_distance(c, anchors.anchor(a));
      if (d < best_d) {  // strict: equidistant anchors resolve to the earlier label
        best_d = d;
        best = a;
      }
    }
    ClusterEntry e;
    e.category = j < centroids.categories.size() ? centroids.categories[j] : "c" + std::to_string(j);
    e.anchor = anchors.labels()[best].id;
    e.distance = best_d;
    covering = std::max(covering, best_d);
    out.entries.push_back(std::move(e));
  }
  out.radius = radius.value_or(covering);
  for (auto& e : out.entries) {
    e.outlier = e.distance > out.radius;
    if (e.outlier) out.outliers.push_back(e.category);
  }
  return out;
}

// Manual review result: category -> anchor label, applied after clustering.
inline void apply_overrides(ClusterAssignment& assignment, const std::map<std::string, std::string>& overrides,
                            const ProjectionMatrix& centroids, const EmotionSet& anchors) {
  for (const auto& [category, anchor] : overrides) {
    bool found = false;
    for (std::size_t j = 0; j < assignment.entries.size(); ++j) {
      auto& e = assignment.entries[j];
      if (e.category != category) continue;
      found = true;
      e.anchor = anchors.labels()[anchors.require_index(anchor)].id;
      e.distance = weighted_distance(centroids.column(j), anchors.anchor(anchor));
      e.overridden = true;
      e.outlier = false;
    }
    if (!found) throw Error(ErrorKind::kUnknownLabel, "override for unknown category '" + category + "'");
  }
  assignment.outliers.clear();
  for (const auto& e : assignment.entries) {
    if (e.outlier) assignment.outliers.push_back(e.category);
  }
}

}  // namespace eemo
