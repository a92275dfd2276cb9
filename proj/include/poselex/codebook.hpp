#pragma once

// Visual pose candidates: k-means clustering of key-frame features and
// quantization of key-frame streams into candidate-index sequences.

#include <algorithm>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "poselex/error.hpp"
#include "poselex/keyframe.hpp"
#include "poselex/random.hpp"
#include "poselex/skeleton.hpp"

namespace poselex {

struct VisualCodebook {
  std::vector<std::vector<double>> centers;  // k vectors of dimension dim
  int k = 0;
  std::uint64_t seed = 0;
  FeatureMode feature_mode = FeatureMode::Positions;

  std::size_t dim() const { return centers.empty() ? 0 : centers.front().size(); }
};

// Quantized stream of visual pose candidates for one action instance.
struct VisualSentence {
  std::vector<int> ids;  // each in [0, k)
};

namespace detail {

inline double squared_distance(std::span<const double> a,
                               std::span<const double> b) {
  double d2 = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    d2 += d * d;
  }
  return d2;
}

inline std::size_t count_distinct(const std::vector<std::vector<double>>& pts) {
  std::vector<std::vector<double>> sorted = pts;
  std::sort(sorted.begin(), sorted.end());
  return std::unique(sorted.begin(), sorted.end()) - sorted.begin();
}

}  // namespace detail

/// Lloyd's k-means with k-means++ seeding from an explicit seed.
///
/// Deterministic given (point order, k, seed): assignment scans points in
/// order, reductions accumulate in point order, ties go to the smaller
/// center index. An empty cluster is re-seeded at the point farthest from
/// its assigned center. Terminates at an assignment fixpoint or max_iters;
/// inertia is non-increasing across iterations.
inline VisualCodebook fit_kmeans(const std::vector<FrameFeature>& points,
                                 int k, std::uint64_t seed, int max_iters = 100,
                                 FeatureMode mode = FeatureMode::Positions) {
  if (k < 1) throw ConfigError("k must be >= 1");
  if (points.empty()) throw ConfigError("no points to cluster");
  const std::size_t dim = points.front().values.size();
  std::vector<std::vector<double>> data;
  data.reserve(points.size());
  for (const FrameFeature& f : points) {
    if (f.values.size() != dim)
      throw SchemaError("feature dimension mismatch in clustering input");
    data.push_back(f.values);
  }
  if (detail::count_distinct(data) < static_cast<std::size_t>(k))
    throw ConfigError("infeasible k: " + std::to_string(k) +
                      " clusters requested but only " +
                      std::to_string(detail::count_distinct(data)) +
                      " distinct points");

  const std::size_t n = data.size();
  std::mt19937_64 rng(seed);

  // k-means++ seeding.
  std::vector<std::vector<double>> centers;
  centers.reserve(k);
  centers.push_back(data[rng() % n]);
  std::vector<double> min_d2(n);
  for (std::size_t i = 0; i < n; ++i)
    min_d2[i] = detail::squared_distance(data[i], centers[0]);
  while (centers.size() < static_cast<std::size_t>(k)) {
    double total = 0.0;
    for (double d : min_d2) total += d;
    const double r = detail::uniform01(rng) * total;
    double cum = 0.0;
    std::size_t chosen = n;
    for (std::size_t i = 0; i < n; ++i) {
      if (min_d2[i] <= 0.0) continue;
      cum += min_d2[i];
      if (cum > r) {
        chosen = i;
        break;
      }
    }
    if (chosen == n) {  // numerical edge: pick the farthest point
      chosen = 0;
      for (std::size_t i = 1; i < n; ++i)
        if (min_d2[i] > min_d2[chosen]) chosen = i;
    }
    centers.push_back(data[chosen]);
    for (std::size_t i = 0; i < n; ++i)
      min_d2[i] = std::min(min_d2[i],
                           detail::squared_distance(data[i], centers.back()));
  }

  // Lloyd iterations.
  std::vector<int> assign(n, -1);
  for (int iter = 0; iter < max_iters; ++iter) {
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      int best = 0;
      double best_d2 = detail::squared_distance(data[i], centers[0]);
      for (int c = 1; c < k; ++c) {
        const double d2 = detail::squared_distance(data[i], centers[c]);
        if (d2 < best_d2) {
          best_d2 = d2;
          best = c;
        }
      }
      if (assign[i] != best) {
        assign[i] = best;
        changed = true;
      }
    }
    if (!changed && iter > 0) break;

    std::vector<std::vector<double>> sums(k, std::vector<double>(dim, 0.0));
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<double>& s = sums[assign[i]];
      for (std::size_t d = 0; d < dim; ++d) s[d] += data[i][d];
      ++counts[assign[i]];
    }

    std::vector<bool> reseeded_point(n, false);
    for (int c = 0; c < k; ++c) {
      if (counts[c] > 0) {
        for (std::size_t d = 0; d < dim; ++d)
          centers[c][d] = sums[c][d] / static_cast<double>(counts[c]);
      } else {
        // Re-seed an empty cluster at the point farthest from its center.
        std::size_t far = n;
        double far_d2 = -1.0;
        for (std::size_t i = 0; i < n; ++i) {
          if (reseeded_point[i]) continue;
          const double d2 =
              detail::squared_distance(data[i], centers[assign[i]]);
          if (d2 > far_d2) {
            far_d2 = d2;
            far = i;
          }
        }
        centers[c] = data[far];
        reseeded_point[far] = true;
        changed = true;
      }
    }
  }

  VisualCodebook cb;
  cb.centers = std::move(centers);
  cb.k = k;
  cb.seed = seed;
  cb.feature_mode = mode;
  return cb;
}

/// Sum of squared distances from each point to its nearest center.
inline double inertia(const std::vector<FrameFeature>& points,
                      const VisualCodebook& cb) {
  double total = 0.0;
  for (const FrameFeature& f : points) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& c : cb.centers)
      best = std::min(best, detail::squared_distance(f.values, c));
    total += best;
  }
  return total;
}

/// Index of the nearest center by Euclidean distance; ties break to the
/// smallest index.
inline int quantize(const FrameFeature& feature, const VisualCodebook& cb) {
  if (feature.values.size() != cb.dim())
    throw SchemaError("feature dimension " +
                      std::to_string(feature.values.size()) +
                      " does not match codebook dimension " +
                      std::to_string(cb.dim()));
  int best = 0;
  double best_d2 = detail::squared_distance(feature.values, cb.centers[0]);
  for (int c = 1; c < cb.k; ++c) {
    const double d2 = detail::squared_distance(feature.values, cb.centers[c]);
    if (d2 < best_d2) {
      best_d2 = d2;
      best = c;
    }
  }
  return best;
}

/// Quantizes the key frames of a sequence, in frame order. frame_features
/// must hold one feature per frame of the sequence the key frames were
/// detected on.
inline VisualSentence quantize_sequence(
    const std::vector<FrameFeature>& frame_features, const KeyFrameSet& kf,
    const VisualCodebook& cb) {
  if (kf.empty())
    throw SchemaError("empty key-frame set: cannot build a visual sentence");
  VisualSentence s;
  s.ids.reserve(kf.size());
  for (std::size_t idx : kf.indices) {
    if (idx >= frame_features.size())
      throw SchemaError("key-frame index out of range");
    s.ids.push_back(quantize(frame_features[idx], cb));
  }
  return s;
}

inline nlohmann::json to_json(const VisualCodebook& cb) {
  nlohmann::json j;
  j["k"] = cb.k;
  j["dim"] = cb.dim();
  j["seed"] = cb.seed;
  j["feature_mode"] = to_string(cb.feature_mode);
  j["centers"] = cb.centers;
  return j;
}

inline VisualCodebook codebook_from_json(const nlohmann::json& j) {
  VisualCodebook cb;
  try {
    cb.k = j.at("k").get<int>();
    cb.seed = j.at("seed").get<std::uint64_t>();
    cb.feature_mode = feature_mode_from_string(j.at("feature_mode"));
    cb.centers = j.at("centers").get<std::vector<std::vector<double>>>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("codebook: ") + e.what());
  }
  if (cb.k < 1 || cb.centers.size() != static_cast<std::size_t>(cb.k))
    throw SchemaError("codebook: center count does not match k");
  const std::size_t dim = j.at("dim").get<std::size_t>();
  for (const auto& c : cb.centers)
    if (c.size() != dim) throw SchemaError("codebook: center dimension mismatch");
  return cb;
}

}  // namespace poselex
