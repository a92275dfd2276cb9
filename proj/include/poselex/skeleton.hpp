#pragma once

// Skeleton data types, manifest ingestion, normalization and per-frame
// feature vectors. The manifest is line-delimited JSON, one object per
// sequence: {"subject": str, "class": str|null, "fps": num,
// "joints": [[[x,y,z] x J] x F]}.

#include <cmath>
#include <cstddef>
#include <fstream>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "poselex/error.hpp"

namespace poselex {

struct Joint {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  friend bool operator==(const Joint&, const Joint&) = default;
};

inline bool is_finite(const Joint& j) {
  return std::isfinite(j.x) && std::isfinite(j.y) && std::isfinite(j.z);
}

struct Frame {
  std::vector<Joint> joints;  // fixed order per the dataset manifest
  int timestamp_index = 0;
};

struct SkeletonSequence {
  std::vector<Frame> frames;  // non-empty, identical J, increasing timestamps
  std::string subject_id;
  std::optional<std::string> class_label;
  double frame_rate = 30.0;

  std::size_t joint_count() const {
    return frames.empty() ? 0 : frames.front().joints.size();
  }
  std::size_t frame_count() const { return frames.size(); }
};

enum class FeatureMode {
  Positions,                       // root-centered scale-normalized joints
  PositionsVelocityAcceleration,   // plus weighted temporal differences
};

inline std::string to_string(FeatureMode m) {
  return m == FeatureMode::Positions ? "positions"
                                     : "positions+velocity+acceleration";
}

inline FeatureMode feature_mode_from_string(const std::string& s) {
  if (s == "positions") return FeatureMode::Positions;
  if (s == "positions+velocity+acceleration")
    return FeatureMode::PositionsVelocityAcceleration;
  throw ConfigError("unknown feature mode: '" + s + "'");
}

struct FrameFeature {
  std::vector<double> values;  // dimension D, constant per pipeline
  std::size_t source_frame = 0;
};

// Throws SchemaError unless the sequence satisfies its invariants.
inline void validate(const SkeletonSequence& seq) {
  if (seq.frames.empty()) throw SchemaError("sequence has no frames");
  const std::size_t joints = seq.frames.front().joints.size();
  if (joints < 2) throw SchemaError("sequence needs at least 2 joints");
  int prev_ts = -1;
  for (std::size_t f = 0; f < seq.frames.size(); ++f) {
    const Frame& frame = seq.frames[f];
    if (frame.joints.size() != joints)
      throw SchemaError("frame " + std::to_string(f) + " has " +
                        std::to_string(frame.joints.size()) +
                        " joints, expected " + std::to_string(joints));
    if (frame.timestamp_index <= prev_ts)
      throw SchemaError("timestamps not strictly increasing at frame " +
                        std::to_string(f));
    prev_ts = frame.timestamp_index;
    for (const Joint& j : frame.joints)
      if (!is_finite(j))
        throw NumericError("non-finite joint in frame " + std::to_string(f));
  }
}

/// Reads all sequences from a line-delimited JSON manifest, in file order.
/// Every sequence in a manifest must share one joint count; a malformed
/// line raises ParseError naming the line number.
inline std::vector<SkeletonSequence> load_sequences(
    const std::string& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) throw IoError("cannot open manifest: " + manifest_path);

  std::vector<SkeletonSequence> out;
  std::string line;
  std::size_t line_no = 0;
  std::size_t manifest_joints = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json rec;
    try {
      rec = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError("manifest line " + std::to_string(line_no) + ": " +
                       e.what());
    }
    if (!rec.is_object() || !rec.contains("subject") ||
        !rec.contains("fps") || !rec.contains("joints"))
      throw ParseError("manifest line " + std::to_string(line_no) +
                       ": record must have subject, class, fps, joints");

    SkeletonSequence seq;
    try {
      seq.subject_id = rec.at("subject").get<std::string>();
      seq.frame_rate = rec.at("fps").get<double>();
      if (rec.contains("class") && !rec.at("class").is_null())
        seq.class_label = rec.at("class").get<std::string>();
      for (const auto& jframe : rec.at("joints")) {
        Frame frame;
        frame.timestamp_index = static_cast<int>(seq.frames.size());
        for (const auto& jj : jframe) {
          if (!jj.is_array() || jj.size() != 3)
            throw ParseError("manifest line " + std::to_string(line_no) +
                             ": joint is not an [x,y,z] triple");
          frame.joints.push_back(Joint{jj[0].get<double>(),
                                       jj[1].get<double>(),
                                       jj[2].get<double>()});
        }
        seq.frames.push_back(std::move(frame));
      }
    } catch (const nlohmann::json::exception& e) {
      throw ParseError("manifest line " + std::to_string(line_no) + ": " +
                       e.what());
    }

    try {
      validate(seq);
    } catch (const Error& e) {
      throw SchemaError("manifest line " + std::to_string(line_no) + ": " +
                        e.what());
    }
    if (manifest_joints == 0) {
      manifest_joints = seq.joint_count();
    } else if (seq.joint_count() != manifest_joints) {
      throw SchemaError("manifest line " + std::to_string(line_no) +
                        ": sequence has " + std::to_string(seq.joint_count()) +
                        " joints, manifest uses " +
                        std::to_string(manifest_joints));
    }
    out.push_back(std::move(seq));
  }
  return out;
}

/// Writes sequences as line-delimited JSON in the manifest format.
inline void write_manifest(const std::vector<SkeletonSequence>& seqs,
                           std::ostream& os) {
  for (const SkeletonSequence& seq : seqs) {
    nlohmann::json rec;
    rec["subject"] = seq.subject_id;
    rec["class"] = seq.class_label ? nlohmann::json(*seq.class_label)
                                   : nlohmann::json(nullptr);
    rec["fps"] = seq.frame_rate;
    auto frames = nlohmann::json::array();
    for (const Frame& frame : seq.frames) {
      auto joints = nlohmann::json::array();
      for (const Joint& j : frame.joints)
        joints.push_back({j.x, j.y, j.z});
      frames.push_back(std::move(joints));
    }
    rec["joints"] = std::move(frames);
    os << rec.dump() << '\n';
  }
}

/// Root-centers every frame at root_joint and rescales so the distance
/// between the scale_pair joints is 1 in every frame. Idempotent, and
/// invariant to global translation and uniform scaling of the input.
inline SkeletonSequence normalize(const SkeletonSequence& seq, int root_joint,
                                  std::pair<int, int> scale_pair) {
  validate(seq);
  const int joints = static_cast<int>(seq.joint_count());
  if (root_joint < 0 || root_joint >= joints || scale_pair.first < 0 ||
      scale_pair.first >= joints || scale_pair.second < 0 ||
      scale_pair.second >= joints)
    throw ConfigError("normalization joint index out of range");

  SkeletonSequence out = seq;
  for (Frame& frame : out.frames) {
    const Joint root = frame.joints[root_joint];
    const Joint& a = frame.joints[scale_pair.first];
    const Joint& b = frame.joints[scale_pair.second];
    const double scale = std::sqrt((a.x - b.x) * (a.x - b.x) +
                                   (a.y - b.y) * (a.y - b.y) +
                                   (a.z - b.z) * (a.z - b.z));
    if (scale <= 0.0)
      throw NumericError("degenerate skeleton: zero scale distance in frame " +
                         std::to_string(frame.timestamp_index));
    for (Joint& j : frame.joints) {
      j.x = (j.x - root.x) / scale;
      j.y = (j.y - root.y) / scale;
      j.z = (j.z - root.z) / scale;
    }
  }
  return out;
}

namespace detail {

inline void push_joint_block(std::vector<double>& dst,
                             std::span<const Joint> joints, double weight) {
  for (const Joint& j : joints) {
    dst.push_back(weight * j.x);
    dst.push_back(weight * j.y);
    dst.push_back(weight * j.z);
  }
}

}  // namespace detail

/// Per-frame feature vectors for a normalized sequence.
///
/// Positions mode flattens the joints (D = 3J). The derivative mode appends
/// velocity and acceleration blocks weighted by alpha and beta: velocities
/// are central differences (x[t+1]-x[t-1])/2, accelerations central second
/// differences over a 5-frame window (x[t+2]-2x[t]+x[t-2])/4. Boundary
/// frames fall back to one-sided differences so every frame keeps a feature.
inline std::vector<FrameFeature> frame_features(const SkeletonSequence& seq,
                                                FeatureMode mode,
                                                double alpha = 0.75,
                                                double beta = 0.6) {
  validate(seq);
  const std::size_t frames = seq.frame_count();
  const bool derivatives = mode == FeatureMode::PositionsVelocityAcceleration;
  if (derivatives && frames < 5)
    throw SchemaError("insufficient frames for derivative features: need 5, have " +
                      std::to_string(frames));

  const std::size_t joints = seq.joint_count();
  std::vector<FrameFeature> out;
  out.reserve(frames);

  auto joint_at = [&](std::size_t f, std::size_t j) -> const Joint& {
    return seq.frames[f].joints[j];
  };
  auto diff = [](const Joint& a, const Joint& b, double s) {
    return Joint{(a.x - b.x) * s, (a.y - b.y) * s, (a.z - b.z) * s};
  };

  for (std::size_t f = 0; f < frames; ++f) {
    FrameFeature feat;
    feat.source_frame = f;
    feat.values.reserve(derivatives ? 9 * joints : 3 * joints);
    detail::push_joint_block(feat.values, seq.frames[f].joints, 1.0);
    if (derivatives) {
      std::vector<Joint> vel(joints), acc(joints);
      for (std::size_t j = 0; j < joints; ++j) {
        if (f == 0)
          vel[j] = diff(joint_at(1, j), joint_at(0, j), 1.0);
        else if (f == frames - 1)
          vel[j] = diff(joint_at(f, j), joint_at(f - 1, j), 1.0);
        else
          vel[j] = diff(joint_at(f + 1, j), joint_at(f - 1, j), 0.5);

        if (f < 2) {
          const Joint& a0 = joint_at(f, j);
          const Joint& a1 = joint_at(f + 1, j);
          const Joint& a2 = joint_at(f + 2, j);
          acc[j] = Joint{a2.x - 2 * a1.x + a0.x, a2.y - 2 * a1.y + a0.y,
                         a2.z - 2 * a1.z + a0.z};
        } else if (f > frames - 3) {
          const Joint& a0 = joint_at(f, j);
          const Joint& a1 = joint_at(f - 1, j);
          const Joint& a2 = joint_at(f - 2, j);
          acc[j] = Joint{a2.x - 2 * a1.x + a0.x, a2.y - 2 * a1.y + a0.y,
                         a2.z - 2 * a1.z + a0.z};
        } else {
          const Joint& lo = joint_at(f - 2, j);
          const Joint& mid = joint_at(f, j);
          const Joint& hi = joint_at(f + 2, j);
          acc[j] = Joint{(hi.x - 2 * mid.x + lo.x) * 0.25,
                         (hi.y - 2 * mid.y + lo.y) * 0.25,
                         (hi.z - 2 * mid.z + lo.z) * 0.25};
        }
      }
      detail::push_joint_block(feat.values, vel, alpha);
      detail::push_joint_block(feat.values, acc, beta);
    }
    out.push_back(std::move(feat));
  }
  return out;
}

}  // namespace poselex
