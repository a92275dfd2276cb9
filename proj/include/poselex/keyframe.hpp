#pragma once

// Key-frame extraction: per-frame joint-position covariance, its largest
// eigenvalue profile, Gaussian smoothing, and strict local extrema.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <ostream>
#include <string>
#include <vector>

#include "poselex/error.hpp"
#include "poselex/skeleton.hpp"

namespace poselex {

struct CovarianceMatrix {
  // Symmetric 3x3, positive semi-definite for real joint data.
  std::array<std::array<double, 3>, 3> m{};

  double trace() const { return m[0][0] + m[1][1] + m[2][2]; }
};

struct EigenProfile {
  std::vector<double> raw;       // largest eigenvalue per frame
  std::vector<double> smoothed;  // same length, Gaussian-filtered
  int window = 5;
  double sigma = 1.0;
};

enum class ExtremumKind { Max, Min };

inline std::string to_string(ExtremumKind k) {
  return k == ExtremumKind::Max ? "max" : "min";
}

struct KeyFrameSet {
  std::vector<std::size_t> indices;  // strictly increasing, interior frames
  std::vector<ExtremumKind> kinds;   // parallel to indices

  bool empty() const { return indices.empty(); }
  std::size_t size() const { return indices.size(); }
};

/// Population covariance (divide by J) of the frame's joints treated as
/// J observations in 3-D space. Invariant to joint ordering.
inline CovarianceMatrix frame_covariance(const Frame& frame) {
  const std::size_t joints = frame.joints.size();
  if (joints < 2) throw SchemaError("frame covariance needs at least 2 joints");
  double mx = 0, my = 0, mz = 0;
  for (const Joint& j : frame.joints) {
    if (!is_finite(j)) throw NumericError("non-finite joint position");
    mx += j.x;
    my += j.y;
    mz += j.z;
  }
  mx /= static_cast<double>(joints);
  my /= static_cast<double>(joints);
  mz /= static_cast<double>(joints);

  CovarianceMatrix cov;
  for (const Joint& j : frame.joints) {
    const double dx = j.x - mx, dy = j.y - my, dz = j.z - mz;
    cov.m[0][0] += dx * dx;
    cov.m[0][1] += dx * dy;
    cov.m[0][2] += dx * dz;
    cov.m[1][1] += dy * dy;
    cov.m[1][2] += dy * dz;
    cov.m[2][2] += dz * dz;
  }
  const double inv = 1.0 / static_cast<double>(joints);
  cov.m[0][0] *= inv;
  cov.m[0][1] *= inv;
  cov.m[0][2] *= inv;
  cov.m[1][1] *= inv;
  cov.m[1][2] *= inv;
  cov.m[2][2] *= inv;
  cov.m[1][0] = cov.m[0][1];
  cov.m[2][0] = cov.m[0][2];
  cov.m[2][1] = cov.m[1][2];
  return cov;
}

/// Largest eigenvalue of a symmetric 3x3 matrix by cyclic Jacobi rotations.
/// Tiny negative results are clamped to zero.
inline double largest_eigenvalue(const CovarianceMatrix& c) {
  std::array<std::array<double, 3>, 3> a = c.m;
  for (int r = 0; r < 3; ++r)
    for (int col = 0; col < 3; ++col)
      if (!std::isfinite(a[r][col]))
        throw NumericError("non-finite covariance entry");

  double fro2 = 0.0;
  for (int r = 0; r < 3; ++r)
    for (int col = 0; col < 3; ++col) fro2 += a[r][col] * a[r][col];
  const double tol = 1e-30 * std::max(1.0, fro2);

  constexpr int kMaxSweeps = 50;
  for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
    const double off = a[0][1] * a[0][1] + a[0][2] * a[0][2] +
                       a[1][2] * a[1][2];
    if (off < tol) break;
    for (int p = 0; p < 2; ++p) {
      for (int q = p + 1; q < 3; ++q) {
        if (a[p][q] == 0.0) continue;
        const double theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
        const double t = (theta >= 0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double cs = 1.0 / std::sqrt(t * t + 1.0);
        const double sn = t * cs;
        for (int k = 0; k < 3; ++k) {
          const double akp = a[k][p], akq = a[k][q];
          a[k][p] = cs * akp - sn * akq;
          a[k][q] = sn * akp + cs * akq;
        }
        for (int k = 0; k < 3; ++k) {
          const double apk = a[p][k], aqk = a[q][k];
          a[p][k] = cs * apk - sn * aqk;
          a[q][k] = sn * apk + cs * aqk;
        }
      }
    }
  }
  const double lam = std::max({a[0][0], a[1][1], a[2][2]});
  return lam < 0.0 ? 0.0 : lam;
}

/// Discrete Gaussian filter. The kernel is truncated at the sequence
/// boundaries and renormalized over the valid taps, so a constant input
/// stays constant and the output length equals the input length.
inline std::vector<double> gaussian_smooth(const std::vector<double>& raw,
                                           int window = 5,
                                           double sigma = 1.0) {
  if (window < 1 || window % 2 == 0)
    throw ConfigError("smoothing window must be odd and >= 1, got " +
                      std::to_string(window));
  if (!(sigma > 0.0)) throw ConfigError("smoothing sigma must be > 0");
  if (raw.empty()) return {};

  const int half = window / 2;
  std::vector<double> kernel(window);
  for (int t = -half; t <= half; ++t)
    kernel[t + half] = std::exp(-(t * t) / (2.0 * sigma * sigma));

  const int n = static_cast<int>(raw.size());
  std::vector<double> out(raw.size());
  for (int i = 0; i < n; ++i) {
    double wsum = 0.0, acc = 0.0;
    for (int t = -half; t <= half; ++t) {
      const int src = i + t;
      if (src < 0 || src >= n) continue;
      acc += kernel[t + half] * raw[src];
      wsum += kernel[t + half];
    }
    out[i] = acc / wsum;
  }
  return out;
}

/// Raw + smoothed largest-eigenvalue profile of a sequence.
inline EigenProfile eigen_profile(const SkeletonSequence& seq, int window = 5,
                                  double sigma = 1.0) {
  validate(seq);
  EigenProfile profile;
  profile.window = window;
  profile.sigma = sigma;
  profile.raw.reserve(seq.frame_count());
  for (const Frame& frame : seq.frames)
    profile.raw.push_back(largest_eigenvalue(frame_covariance(frame)));
  profile.smoothed = gaussian_smooth(profile.raw, window, sigma);
  return profile;
}

/// Interior frame f is a key frame iff its smoothed eigenvalue is strictly
/// greater than both neighbours or strictly smaller than both neighbours.
/// Plateaus never qualify; the first and last frames never qualify.
inline KeyFrameSet detect_keyframes(const EigenProfile& profile) {
  const std::vector<double>& s = profile.smoothed;
  if (s.size() < 3)
    throw SchemaError("key-frame detection needs at least 3 frames");
  KeyFrameSet kf;
  for (std::size_t f = 1; f + 1 < s.size(); ++f) {
    if (s[f] > s[f - 1] && s[f] > s[f + 1]) {
      kf.indices.push_back(f);
      kf.kinds.push_back(ExtremumKind::Max);
    } else if (s[f] < s[f - 1] && s[f] < s[f + 1]) {
      kf.indices.push_back(f);
      kf.kinds.push_back(ExtremumKind::Min);
    }
  }
  return kf;
}

/// detect_keyframes, falling back to the interior argmax and argmin of the
/// smoothed profile when no strict extremum exists, so every sequence
/// yields a non-empty visual stream.
inline KeyFrameSet detect_keyframes_with_fallback(const EigenProfile& profile) {
  KeyFrameSet kf = detect_keyframes(profile);
  if (!kf.empty()) return kf;

  const std::vector<double>& s = profile.smoothed;
  std::size_t arg_max = 1, arg_min = 1;
  for (std::size_t f = 1; f + 1 < s.size(); ++f) {
    if (s[f] > s[arg_max]) arg_max = f;
    if (s[f] < s[arg_min]) arg_min = f;
  }
  if (arg_max == arg_min) {
    kf.indices.push_back(arg_max);
    kf.kinds.push_back(ExtremumKind::Max);
    return kf;
  }
  const std::size_t first = std::min(arg_max, arg_min);
  const std::size_t second = std::max(arg_max, arg_min);
  kf.indices = {first, second};
  kf.kinds = {first == arg_max ? ExtremumKind::Max : ExtremumKind::Min,
              second == arg_max ? ExtremumKind::Max : ExtremumKind::Min};
  return kf;
}

/// Debug dump, one row per frame:
/// frame,raw_lambda,smoothed_lambda,is_keyframe,kind
inline void write_profile_csv(const EigenProfile& profile,
                              const KeyFrameSet& kf, std::ostream& os) {
  os << "frame,raw_lambda,smoothed_lambda,is_keyframe,kind\n";
  std::size_t next = 0;
  for (std::size_t f = 0; f < profile.raw.size(); ++f) {
    const bool is_kf = next < kf.indices.size() && kf.indices[next] == f;
    os << f << ',' << profile.raw[f] << ',' << profile.smoothed[f] << ','
       << (is_kf ? 1 : 0) << ',' << (is_kf ? to_string(kf.kinds[next]) : "")
       << '\n';
    if (is_kf) ++next;
  }
}

}  // namespace poselex
