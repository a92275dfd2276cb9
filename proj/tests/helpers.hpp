#pragma once

// Shared fixture builders for the test suites.

#include <array>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "poselex/skeleton.hpp"

namespace testutil {

inline poselex::Frame make_frame(
    const std::vector<std::array<double, 3>>& coords, int timestamp = 0) {
  poselex::Frame f;
  f.timestamp_index = timestamp;
  for (const auto& c : coords)
    f.joints.push_back(poselex::Joint{c[0], c[1], c[2]});
  return f;
}

inline poselex::SkeletonSequence make_sequence(
    const std::vector<std::vector<std::array<double, 3>>>& frames,
    std::string subject = "s00", std::string cls = "c") {
  poselex::SkeletonSequence seq;
  seq.subject_id = std::move(subject);
  seq.class_label = std::move(cls);
  for (std::size_t f = 0; f < frames.size(); ++f)
    seq.frames.push_back(make_frame(frames[f], static_cast<int>(f)));
  return seq;
}

inline double uniform(std::mt19937_64& rng, double lo = 0.0, double hi = 1.0) {
  const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  return lo + u * (hi - lo);
}

inline poselex::SkeletonSequence random_sequence(std::mt19937_64& rng,
                                                 int frames, int joints) {
  poselex::SkeletonSequence seq;
  seq.subject_id = "s00";
  for (int f = 0; f < frames; ++f) {
    poselex::Frame frame;
    frame.timestamp_index = f;
    for (int j = 0; j < joints; ++j)
      frame.joints.push_back(poselex::Joint{uniform(rng, -1, 1),
                                            uniform(rng, -1, 1),
                                            uniform(rng, -1, 1)});
    seq.frames.push_back(std::move(frame));
  }
  return seq;
}

}  // namespace testutil
