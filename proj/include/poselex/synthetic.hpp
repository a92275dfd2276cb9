#pragma once

// Synthetic skeleton dataset with planted ground truth: a small humanoid
// skeleton, a set of canonical body configurations acting as semantic
// poses, and action classes defined as pose sentences. Instances are
// linear interpolations between successive canonical poses with Gaussian
// joint noise and a per-subject skeletal scale factor, so the true pose
// lexicon is known by construction.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <map>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "poselex/error.hpp"
#include "poselex/random.hpp"
#include "poselex/skeleton.hpp"

namespace poselex {

// Joint order used by the synthetic skeleton (J = 16).
enum SyntheticJoint : int {
  kHipCenter = 0,
  kSpine,
  kNeck,
  kHead,
  kShoulderL,
  kElbowL,
  kWristL,
  kShoulderR,
  kElbowR,
  kWristR,
  kHipL,
  kKneeL,
  kAnkleL,
  kHipR,
  kKneeR,
  kAnkleR,
  kSyntheticJointCount
};

inline const std::vector<std::string>& synthetic_joint_names() {
  static const std::vector<std::string> names = {
      "hip_center", "spine",      "neck",    "head",       "shoulder_l",
      "elbow_l",    "wrist_l",    "shoulder_r", "elbow_r", "wrist_r",
      "hip_l",      "knee_l",     "ankle_l", "hip_r",      "knee_r",
      "ankle_r"};
  return names;
}

struct SyntheticPose {
  std::string symbol;       // e.g. "T1"
  std::string description;  // what the configuration depicts
  std::vector<Joint> joints;
};

struct SyntheticClass {
  std::string label;
  std::vector<int> pose_ids;  // indices into SyntheticSpec::poses
};

struct SyntheticSpec {
  std::vector<SyntheticPose> poses;  // index = semantic pose id
  int rest_pose = 0;                 // every sentence starts and ends here
  std::vector<SyntheticClass> classes;
  int subjects = 10;
  int instances_per_subject = 10;
  int interp_frames = 10;      // frames per elementary transition
  double noise_sigma = 0.007;  // i.i.d. per joint coordinate, sensor units
  std::uint64_t seed = 7;
  double fps = 30.0;
};

// Canonical hip_center -> spine distance; the normalization unit of the
// synthetic skeleton. noise_sigma defaults to 2% of this.
inline constexpr double kSyntheticScale = 0.35;

inline void validate(const SyntheticSpec& spec) {
  if (spec.poses.empty()) throw ConfigError("synthetic spec has no poses");
  if (spec.classes.empty()) throw ConfigError("synthetic spec has no classes");
  if (spec.rest_pose < 0 ||
      spec.rest_pose >= static_cast<int>(spec.poses.size()))
    throw ConfigError("rest pose id out of range");
  if (spec.subjects < 1 || spec.instances_per_subject < 1 ||
      spec.interp_frames < 1)
    throw ConfigError("synthetic counts must be >= 1");
  if (spec.noise_sigma < 0.0) throw ConfigError("noise sigma must be >= 0");
  for (const SyntheticPose& p : spec.poses)
    if (p.joints.size() != static_cast<std::size_t>(kSyntheticJointCount))
      throw SchemaError("canonical pose '" + p.symbol +
                        "' has the wrong joint count");
  for (const SyntheticClass& c : spec.classes) {
    if (c.pose_ids.size() < 2)
      throw ConfigError("class '" + c.label + "' needs at least 2 poses");
    for (int id : c.pose_ids)
      if (id < 0 || id >= static_cast<int>(spec.poses.size()))
        throw ConfigError("class '" + c.label + "' uses an unknown pose id");
    if (c.pose_ids.front() != spec.rest_pose ||
        c.pose_ids.back() != spec.rest_pose)
      throw ConfigError("class '" + c.label +
                        "' must start and end with the rest pose");
  }
}

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Box-Muller normal deviates from explicit 53-bit uniforms, so generated
// datasets are identical across standard libraries.
class GaussianSource {
 public:
  explicit GaussianSource(std::uint64_t seed) : rng_(seed) {}

  double next() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    const double u1 = 1.0 - uniform01(rng_);  // (0, 1]
    const double u2 = uniform01(rng_);
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * 3.141592653589793238462643 * u2;
    spare_ = r * std::sin(angle);
    have_spare_ = true;
    return r * std::cos(angle);
  }

 private:
  std::mt19937_64 rng_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

inline Joint lerp(const Joint& a, const Joint& b, double t) {
  return Joint{a.x + (b.x - a.x) * t, a.y + (b.y - a.y) * t,
               a.z + (b.z - a.z) * t};
}

}  // namespace detail

struct SyntheticInstanceInfo {
  std::size_t manifest_index = 0;
  std::string class_label;
  std::string subject;
};

struct SyntheticGroundTruth {
  std::vector<std::string> symbols;               // semantic pose symbols
  std::vector<std::string> descriptions;          // parallel to symbols
  std::vector<std::vector<Joint>> canonical;      // parallel to symbols
  std::map<std::string, std::vector<std::string>> class_sentences;
  std::vector<SyntheticInstanceInfo> instances;
  double scale = kSyntheticScale;
};

struct SyntheticDataset {
  std::vector<SkeletonSequence> sequences;
  SyntheticGroundTruth ground_truth;
};

/// Generates all instances: classes in spec order, subjects then repeats
/// within a class. Each instance interpolates through its class's pose
/// sentence (consecutive duplicate poses collapse into a single waypoint,
/// so a composite's back-to-back rest poses do not create a long dwell),
/// scaled by a fixed per-subject factor, with i.i.d. Gaussian noise on
/// every joint coordinate. Deterministic for a given spec: per-instance
/// RNG streams are derived from (seed, class, subject, repeat).
inline SyntheticDataset generate_dataset(const SyntheticSpec& spec) {
  validate(spec);
  SyntheticDataset out;
  for (const SyntheticPose& p : spec.poses) {
    out.ground_truth.symbols.push_back(p.symbol);
    out.ground_truth.descriptions.push_back(p.description);
    out.ground_truth.canonical.push_back(p.joints);
  }
  for (const SyntheticClass& c : spec.classes) {
    std::vector<std::string> sentence;
    for (int id : c.pose_ids) sentence.push_back(spec.poses[id].symbol);
    out.ground_truth.class_sentences[c.label] = std::move(sentence);
  }

  for (std::size_t ci = 0; ci < spec.classes.size(); ++ci) {
    const SyntheticClass& cls = spec.classes[ci];
    std::vector<int> waypoints;
    for (int id : cls.pose_ids)
      if (waypoints.empty() || waypoints.back() != id)
        waypoints.push_back(id);

    for (int subject = 0; subject < spec.subjects; ++subject) {
      const double scale =
          spec.subjects == 1
              ? 1.0
              : 0.85 + 0.30 * subject / static_cast<double>(spec.subjects - 1);
      char subject_name[16];
      std::snprintf(subject_name, sizeof subject_name, "s%02d", subject);

      for (int rep = 0; rep < spec.instances_per_subject; ++rep) {
        const std::uint64_t stream =
            detail::splitmix64(spec.seed ^ detail::splitmix64(
                (ci + 1) * 0x10001ULL + (subject + 1) * 0x101ULL + rep + 1));
        detail::GaussianSource noise(stream);

        SkeletonSequence seq;
        seq.subject_id = subject_name;
        seq.class_label = cls.label;
        seq.frame_rate = spec.fps;

        auto emit = [&](const std::vector<Joint>& pose) {
          Frame frame;
          frame.timestamp_index = static_cast<int>(seq.frames.size());
          frame.joints.reserve(pose.size());
          for (const Joint& j : pose)
            frame.joints.push_back(
                Joint{j.x * scale + spec.noise_sigma * noise.next(),
                      j.y * scale + spec.noise_sigma * noise.next(),
                      j.z * scale + spec.noise_sigma * noise.next()});
          seq.frames.push_back(std::move(frame));
        };

        emit(spec.poses[waypoints.front()].joints);
        for (std::size_t w = 0; w + 1 < waypoints.size(); ++w) {
          const std::vector<Joint>& from = spec.poses[waypoints[w]].joints;
          const std::vector<Joint>& to = spec.poses[waypoints[w + 1]].joints;
          for (int step = 1; step <= spec.interp_frames; ++step) {
            const double t = step / static_cast<double>(spec.interp_frames);
            std::vector<Joint> pose(from.size());
            for (std::size_t j = 0; j < from.size(); ++j)
              pose[j] = detail::lerp(from[j], to[j], t);
            emit(pose);
          }
        }

        out.ground_truth.instances.push_back(SyntheticInstanceInfo{
            out.sequences.size(), cls.label, subject_name});
        out.sequences.push_back(std::move(seq));
      }
    }
  }
  return out;
}

/// The instruction file content for a spec's classes:
/// {"classes": {"label": ["T1", ...], ...}}
inline nlohmann::json instructions_json(const SyntheticSpec& spec) {
  nlohmann::json classes = nlohmann::json::object();
  for (const SyntheticClass& c : spec.classes) {
    auto sentence = nlohmann::json::array();
    for (int id : c.pose_ids) sentence.push_back(spec.poses[id].symbol);
    classes[c.label] = std::move(sentence);
  }
  return nlohmann::json{{"classes", std::move(classes)}};
}

inline nlohmann::json to_json(const SyntheticGroundTruth& gt) {
  nlohmann::json j;
  j["scale"] = gt.scale;
  j["joint_order"] = synthetic_joint_names();
  j["semantic_poses"] = gt.symbols;
  j["descriptions"] = gt.descriptions;
  nlohmann::json canonical = nlohmann::json::object();
  for (std::size_t q = 0; q < gt.symbols.size(); ++q) {
    auto joints = nlohmann::json::array();
    for (const Joint& jt : gt.canonical[q])
      joints.push_back({jt.x, jt.y, jt.z});
    canonical[gt.symbols[q]] = std::move(joints);
  }
  j["canonical"] = std::move(canonical);
  j["classes"] = gt.class_sentences;
  auto instances = nlohmann::json::array();
  for (const SyntheticInstanceInfo& info : gt.instances)
    instances.push_back({{"index", info.manifest_index},
                         {"class", info.class_label},
                         {"subject", info.subject}});
  j["instances"] = std::move(instances);
  return j;
}

inline SyntheticGroundTruth ground_truth_from_json(const nlohmann::json& j) {
  SyntheticGroundTruth gt;
  try {
    gt.scale = j.at("scale").get<double>();
    gt.symbols = j.at("semantic_poses").get<std::vector<std::string>>();
    if (j.contains("descriptions"))
      gt.descriptions = j.at("descriptions").get<std::vector<std::string>>();
    for (const std::string& sym : gt.symbols) {
      std::vector<Joint> joints;
      for (const auto& triple : j.at("canonical").at(sym))
        joints.push_back(Joint{triple[0].get<double>(), triple[1].get<double>(),
                               triple[2].get<double>()});
      gt.canonical.push_back(std::move(joints));
    }
    gt.class_sentences =
        j.at("classes")
            .get<std::map<std::string, std::vector<std::string>>>();
    for (const auto& rec : j.at("instances"))
      gt.instances.push_back(SyntheticInstanceInfo{
          rec.at("index").get<std::size_t>(),
          rec.at("class").get<std::string>(),
          rec.at("subject").get<std::string>()});
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("ground truth: ") + e.what());
  }
  return gt;
}

/// The default synthetic world: a 16-joint humanoid, 12 semantic poses and
/// 8 action classes. Pose geometry is chosen so every non-rest pose moves
/// the largest covariance eigenvalue clearly away from its rest value and
/// every elementary action produces a strict extremum in the profile.
inline SyntheticSpec default_synthetic_spec() {
  using J = Joint;
  std::vector<J> rest(kSyntheticJointCount);
  rest[kHipCenter] = J{0.00, 1.00, 0.00};
  rest[kSpine] = J{0.00, 1.35, 0.00};
  rest[kNeck] = J{0.00, 1.55, 0.00};
  rest[kHead] = J{0.00, 1.75, 0.00};
  rest[kShoulderL] = J{-0.22, 1.50, 0.00};
  rest[kElbowL] = J{-0.26, 1.22, 0.00};
  rest[kWristL] = J{-0.28, 0.95, 0.00};
  rest[kShoulderR] = J{0.22, 1.50, 0.00};
  rest[kElbowR] = J{0.26, 1.22, 0.00};
  rest[kWristR] = J{0.28, 0.95, 0.00};
  rest[kHipL] = J{-0.13, 0.95, 0.00};
  rest[kKneeL] = J{-0.14, 0.52, 0.00};
  rest[kAnkleL] = J{-0.15, 0.08, 0.00};
  rest[kHipR] = J{0.13, 0.95, 0.00};
  rest[kKneeR] = J{0.14, 0.52, 0.00};
  rest[kAnkleR] = J{0.15, 0.08, 0.00};

  auto pose = [&](std::string symbol, std::string description,
                  auto&& edit) {
    SyntheticPose p{std::move(symbol), std::move(description), rest};
    edit(p.joints);
    return p;
  };

  SyntheticSpec spec;
  spec.poses.push_back(
      pose("T1", "standing, arms beside the body", [](auto&) {}));
  spec.poses.push_back(
      pose("T2", "both arms overhead", [](std::vector<J>& js) {
        js[kElbowL] = J{-0.24, 1.85, 0.00};
        js[kWristL] = J{-0.25, 2.15, 0.00};
        js[kElbowR] = J{0.24, 1.85, 0.00};
        js[kWristR] = J{0.25, 2.15, 0.00};
      }));
  spec.poses.push_back(
      pose("T3", "squat, thighs at an angle to the shins",
           [](std::vector<J>& js) {
             const double drop = 0.33;
             for (int idx : {kHipCenter, kSpine, kNeck, kHead, kShoulderL,
                             kElbowL, kWristL, kShoulderR, kElbowR, kWristR,
                             kHipL, kHipR})
               js[idx].y -= drop;
             js[kKneeL] = J{-0.14, 0.45, 0.18};
             js[kKneeR] = J{0.14, 0.45, 0.18};
           }));
  spec.poses.push_back(
      pose("T4", "right arm outstretched forward, raised above shoulder",
           [](std::vector<J>& js) {
             js[kElbowR] = J{0.22, 1.62, 0.28};
             js[kWristR] = J{0.20, 1.85, 0.55};
           }));
  spec.poses.push_back(
      pose("T5", "right arm outstretched to the right side, slightly raised",
           [](std::vector<J>& js) {
             js[kElbowR] = J{0.53, 1.58, 0.00};
             js[kWristR] = J{0.85, 1.68, 0.00};
           }));
  spec.poses.push_back(
      pose("T6", "both hands raised to eye level", [](std::vector<J>& js) {
        js[kElbowL] = J{-0.30, 1.34, 0.14};
        js[kWristL] = J{-0.11, 1.67, 0.16};
        js[kElbowR] = J{0.30, 1.34, 0.14};
        js[kWristR] = J{0.11, 1.67, 0.16};
      }));
  spec.poses.push_back(
      pose("T7", "right arm raised straight overhead", [](std::vector<J>& js) {
        js[kElbowR] = J{0.24, 1.84, 0.00};
        js[kWristR] = J{0.26, 2.14, 0.00};
      }));
  spec.poses.push_back(
      pose("T8", "both arms outstretched in front of the body",
           [](std::vector<J>& js) {
             js[kElbowL] = J{-0.21, 1.49, 0.32};
             js[kWristL] = J{-0.20, 1.48, 0.65};
             js[kElbowR] = J{0.21, 1.49, 0.32};
             js[kWristR] = J{0.20, 1.48, 0.65};
           }));
  spec.poses.push_back(
      pose("T9", "bowed, torso parallel to the floor", [](std::vector<J>& js) {
        js[kSpine] = J{0.00, 1.06, 0.34};
        js[kNeck] = J{0.00, 1.10, 0.54};
        js[kHead] = J{0.00, 1.13, 0.74};
        js[kShoulderL] = J{-0.22, 1.09, 0.52};
        js[kShoulderR] = J{0.22, 1.09, 0.52};
        js[kElbowL] = J{-0.25, 0.81, 0.50};
        js[kElbowR] = J{0.25, 0.81, 0.50};
        js[kWristL] = J{-0.27, 0.54, 0.48};
        js[kWristR] = J{0.27, 0.54, 0.48};
      }));
  spec.poses.push_back(
      pose("T10", "both hands on top of the head", [](std::vector<J>& js) {
        js[kElbowL] = J{-0.34, 1.56, 0.06};
        js[kWristL] = J{-0.12, 1.86, 0.07};
        js[kElbowR] = J{0.34, 1.56, 0.06};
        js[kWristR] = J{0.12, 1.86, 0.07};
      }));
  spec.poses.push_back(
      pose("T11", "both arms outstretched to the sides, slightly raised",
           [](std::vector<J>& js) {
             js[kElbowL] = J{-0.53, 1.58, 0.00};
             js[kWristL] = J{-0.85, 1.68, 0.00};
             js[kElbowR] = J{0.53, 1.58, 0.00};
             js[kWristR] = J{0.85, 1.68, 0.00};
           }));
  spec.poses.push_back(
      pose("T12", "right leg raised straight in front", [](std::vector<J>& js) {
        js[kKneeR] = J{0.14, 0.85, 0.38};
        js[kAnkleR] = J{0.15, 0.95, 0.78};
      }));

  // Every class sentence starts and ends at rest. Pose-class incidence
  // vectors are pairwise distinct and no class has more than one pose of
  // its own: semantic poses that only ever co-occur with each other are
  // not identifiable by a word-based translation model, so their rows
  // would converge to the same distribution.
  const int T1 = 0, T2 = 1, T3 = 2, T4 = 3, T5 = 4, T6 = 5, T7 = 6, T8 = 7,
            T9 = 8, T10 = 9, T11 = 10, T12 = 11;
  spec.classes = {
      {"LiftArms", {T1, T2, T1}},
      {"Squat", {T1, T3, T1}},
      {"WindUp", {T1, T7, T1, T2, T1}},
      {"PushRight", {T1, T4, T1, T5, T1}},
      {"ShootBow", {T1, T8, T1, T9, T1}},
      {"Goggles", {T1, T6, T1, T10, T1}},
      {"SideSweep", {T1, T5, T1, T10, T1, T11, T1}},
      {"SquatBowKick", {T1, T3, T1, T9, T1, T12, T1}},
  };
  spec.noise_sigma = 0.02 * kSyntheticScale;
  return spec;
}

}  // namespace poselex
