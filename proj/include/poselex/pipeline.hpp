#pragma once

// End-to-end pipeline: configuration, instruction files, corpus
// construction (skeleton -> key frames -> codebook -> parallel corpus),
// training, cross-subject evaluation, k-sweeps and artifact serialization.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "poselex/codebook.hpp"
#include "poselex/decoder.hpp"
#include "poselex/error.hpp"
#include "poselex/keyframe.hpp"
#include "poselex/lexicon.hpp"
#include "poselex/skeleton.hpp"
#include "poselex/synthetic.hpp"

namespace poselex {

struct PipelineConfig {
  FeatureMode feature_mode = FeatureMode::Positions;
  double alpha = 0.75;  // velocity weight
  double beta = 0.6;    // acceleration weight
  int smooth_window = 5;
  double smooth_sigma = 1.0;
  int k = 0;            // explicit codebook size; 0 means k_multiplier * |T|
  int k_multiplier = 5;
  std::uint64_t kmeans_seed = 23;
  int kmeans_max_iters = 100;
  double em_tol = 1e-6;
  int em_max_iters = 100;
  bool null_enabled = true;
  bool length_factor = true;
  bool decode_null_in_max = true;
  std::string split = "odd_even";
  int root_joint = 0;
  int scale_joint_a = 0;
  int scale_joint_b = 1;
  // synthetic generation knobs (cmd_synth)
  int synth_subjects = 10;
  int synth_instances = 10;
  int synth_interp_frames = 10;
  double synth_noise_sigma = -1.0;  // <0: keep the spec default
  std::uint64_t synth_seed = 7;

  DecodeOptions decode_options() const {
    return DecodeOptions{decode_null_in_max, length_factor};
  }
};

namespace detail {

inline bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  throw ConfigError("config key '" + key + "': expected true/false, got '" +
                    value + "'");
}

inline std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

}  // namespace detail

/// Parses a flat key = value config file. '#' starts a comment; unknown
/// keys are rejected so typos fail loudly.
inline PipelineConfig parse_config(std::istream& in) {
  PipelineConfig cfg;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ParseError("config line " + std::to_string(line_no) +
                       ": expected key = value");
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    try {
      if (key == "feature_mode") cfg.feature_mode = feature_mode_from_string(value);
      else if (key == "alpha") cfg.alpha = std::stod(value);
      else if (key == "beta") cfg.beta = std::stod(value);
      else if (key == "smooth_window") cfg.smooth_window = std::stoi(value);
      else if (key == "smooth_sigma") cfg.smooth_sigma = std::stod(value);
      else if (key == "k") cfg.k = std::stoi(value);
      else if (key == "k_multiplier") cfg.k_multiplier = std::stoi(value);
      else if (key == "kmeans_seed") cfg.kmeans_seed = std::stoull(value);
      else if (key == "kmeans_max_iters") cfg.kmeans_max_iters = std::stoi(value);
      else if (key == "em_tol") cfg.em_tol = std::stod(value);
      else if (key == "em_max_iters") cfg.em_max_iters = std::stoi(value);
      else if (key == "null_enabled") cfg.null_enabled = detail::parse_bool(key, value);
      else if (key == "length_factor") cfg.length_factor = detail::parse_bool(key, value);
      else if (key == "decode_null_in_max")
        cfg.decode_null_in_max = detail::parse_bool(key, value);
      else if (key == "split") cfg.split = value;
      else if (key == "root_joint") cfg.root_joint = std::stoi(value);
      else if (key == "scale_joint_a") cfg.scale_joint_a = std::stoi(value);
      else if (key == "scale_joint_b") cfg.scale_joint_b = std::stoi(value);
      else if (key == "synth_subjects") cfg.synth_subjects = std::stoi(value);
      else if (key == "synth_instances") cfg.synth_instances = std::stoi(value);
      else if (key == "synth_interp_frames")
        cfg.synth_interp_frames = std::stoi(value);
      else if (key == "synth_noise_sigma")
        cfg.synth_noise_sigma = std::stod(value);
      else if (key == "synth_seed") cfg.synth_seed = std::stoull(value);
      else
        throw ConfigError("config line " + std::to_string(line_no) +
                          ": unknown key '" + key + "'");
    } catch (const std::invalid_argument&) {
      throw ParseError("config line " + std::to_string(line_no) +
                       ": bad value '" + value + "' for key '" + key + "'");
    } catch (const std::out_of_range&) {
      throw ParseError("config line " + std::to_string(line_no) +
                       ": value out of range for key '" + key + "'");
    }
    if (key == "split" && value != "odd_even")
      throw ConfigError("unsupported split spec '" + value + "'");
  }
  if (cfg.alpha < 0 || cfg.beta < 0 || cfg.smooth_sigma <= 0 ||
      cfg.smooth_window < 1 || cfg.smooth_window % 2 == 0 ||
      cfg.k_multiplier < 1 || cfg.k < 0 || cfg.em_tol < 0 ||
      cfg.em_max_iters < 0 || cfg.kmeans_max_iters < 1)
    throw ConfigError("config value out of documented range");
  return cfg;
}

inline PipelineConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config: " + path);
  return parse_config(in);
}

/// Loads {"classes": {label: [symbols...]}}. With extend_alphabet the
/// alphabet grows to cover new symbols (training); otherwise an unknown
/// symbol raises UnknownSymbolError (decoding against a fixed table).
inline InstructionSet load_instructions(const nlohmann::json& j,
                                        SemanticAlphabet& alphabet,
                                        bool extend_alphabet) {
  InstructionSet set;
  if (!j.is_object() || !j.contains("classes") || !j.at("classes").is_object())
    throw ParseError("instruction file must be {\"classes\": {...}}");
  for (const auto& [label, sentence] : j.at("classes").items()) {
    SemanticInstruction instr;
    instr.class_label = label;
    for (const auto& sym : sentence) {
      const std::string name = sym.get<std::string>();
      instr.poses.push_back(extend_alphabet ? alphabet.add(name)
                                            : alphabet.id_of(name));
    }
    if (instr.poses.empty())
      throw SchemaError("instruction '" + label + "' has no poses");
    instr.elementary_count = std::max(1, instr.length() - 1);
    set.entries.emplace(label, std::move(instr));
  }
  if (set.entries.empty()) throw SchemaError("instruction file has no classes");
  return set;
}

inline InstructionSet load_instructions_file(const std::string& path,
                                             SemanticAlphabet& alphabet,
                                             bool extend_alphabet) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open instruction file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("instruction file " + path + ": " + e.what());
  }
  return load_instructions(j, alphabet, extend_alphabet);
}

/// Per-sequence analysis: quantization features from the normalized
/// sequence, the eigenvalue profile from the raw joints. The extremum
/// conditions are invariant to a uniform per-sequence scale, and per-frame
/// scale normalization re-estimates the scale bone from noisy joints,
/// which multiplies the whole profile by that noise and buries the
/// extrema.
struct SequenceAnalysis {
  std::vector<FrameFeature> features;
  EigenProfile profile;
  KeyFrameSet keyframes;
};

inline SequenceAnalysis analyze_sequence(const SkeletonSequence& seq,
                                         const PipelineConfig& cfg) {
  SequenceAnalysis a;
  const SkeletonSequence normalized = normalize(
      seq, cfg.root_joint, {cfg.scale_joint_a, cfg.scale_joint_b});
  a.features = frame_features(normalized, cfg.feature_mode, cfg.alpha, cfg.beta);
  a.profile = eigen_profile(seq, cfg.smooth_window, cfg.smooth_sigma);
  a.keyframes = detect_keyframes_with_fallback(a.profile);
  return a;
}

struct TrainArtifacts {
  SemanticAlphabet alphabet;
  InstructionSet instructions;
  VisualCodebook codebook;
  TranslationTable table;
  PoseLexicon lexicon;
  std::vector<double> trace;
  ParallelCorpus corpus;
};

/// Full training pipeline over already-loaded sequences: analyzes every
/// sequence, fits the codebook on all key-frame features, quantizes the
/// streams into a parallel corpus and runs EM. Every sequence must carry a
/// class label covered by the instruction file.
inline TrainArtifacts train_pipeline(
    const std::vector<SkeletonSequence>& sequences,
    const nlohmann::json& instruction_json, const PipelineConfig& cfg) {
  if (sequences.empty()) throw SchemaError("no training sequences");
  TrainArtifacts art;
  art.instructions = load_instructions(instruction_json, art.alphabet, true);

  for (const SkeletonSequence& seq : sequences) {
    if (!seq.class_label)
      throw ConfigError("training sequence without a class label");
    if (!art.instructions.entries.count(*seq.class_label))
      throw ConfigError("no instruction for class '" + *seq.class_label + "'");
  }

  const int t_count = art.alphabet.size();
  const int k = cfg.k > 0 ? cfg.k : cfg.k_multiplier * t_count;
  if (k < t_count)
    throw ConfigError("k = " + std::to_string(k) +
                      " is smaller than the semantic pose count " +
                      std::to_string(t_count));

  std::vector<SequenceAnalysis> analyses;
  analyses.reserve(sequences.size());
  std::vector<FrameFeature> keyframe_features;
  for (const SkeletonSequence& seq : sequences) {
    SequenceAnalysis a = analyze_sequence(seq, cfg);
    for (std::size_t idx : a.keyframes.indices)
      keyframe_features.push_back(a.features[idx]);
    analyses.push_back(std::move(a));
  }

  art.codebook = fit_kmeans(keyframe_features, k, cfg.kmeans_seed,
                            cfg.kmeans_max_iters, cfg.feature_mode);

  ParallelCorpus corpus;
  corpus.visual_alphabet_size = k;
  corpus.semantic_alphabet = art.alphabet;
  for (std::size_t i = 0; i < sequences.size(); ++i) {
    SentencePair pair;
    pair.source =
        quantize_sequence(analyses[i].features, analyses[i].keyframes,
                          art.codebook);
    pair.target = art.instructions.entries.at(*sequences[i].class_label);
    pair.instance_id = std::to_string(i);
    corpus.pairs.push_back(std::move(pair));
  }

  TrainResult result =
      train(corpus, cfg.em_max_iters, cfg.em_tol, cfg.null_enabled);
  art.table = std::move(result.table);
  art.trace = std::move(result.log_likelihood_trace);
  art.lexicon = extract_lexicon(art.table);
  art.corpus = std::move(corpus);
  return art;
}

/// Visual sentence of a single (test) sequence under trained artifacts.
inline VisualSentence quantize_instance(const SkeletonSequence& seq,
                                        const VisualCodebook& codebook,
                                        const PipelineConfig& cfg) {
  const SequenceAnalysis a = analyze_sequence(seq, cfg);
  return quantize_sequence(a.features, a.keyframes, codebook);
}

// ---------------------------------------------------------------------------
// Cross-subject evaluation

struct EvalReport {
  double accuracy = 0.0;
  std::map<std::string, double> per_class_accuracy;
  // confusion[true_label][predicted_label] = count
  std::map<std::string, std::map<std::string, int>> confusion;
  std::optional<double> lexicon_recovery;
  int k = 0;
  std::uint64_t kmeans_seed = 0;
  int test_instances = 0;
  std::vector<std::string> train_subjects;
  std::vector<std::string> test_subjects;
};

/// Sorted unique subjects split by index parity: even indices train, odd
/// indices test. Requires at least 2 subjects.
inline std::pair<std::vector<std::string>, std::vector<std::string>>
split_subjects(const std::vector<SkeletonSequence>& sequences,
               const std::string& split_spec) {
  if (split_spec != "odd_even")
    throw ConfigError("unsupported split spec '" + split_spec + "'");
  std::set<std::string> unique;
  for (const SkeletonSequence& s : sequences) unique.insert(s.subject_id);
  if (unique.size() < 2)
    throw ConfigError("cross-subject split needs at least 2 subjects, have " +
                      std::to_string(unique.size()));
  std::pair<std::vector<std::string>, std::vector<std::string>> out;
  std::size_t index = 0;
  for (const std::string& subject : unique) {
    (index % 2 == 0 ? out.first : out.second).push_back(subject);
    ++index;
  }
  return out;
}

/// Fraction of semantic poses whose argmax visual candidate is nearest, in
/// feature space, to that pose's planted canonical configuration.
inline double lexicon_recovery_rate(const TrainArtifacts& art,
                                    const SyntheticGroundTruth& gt,
                                    const PipelineConfig& cfg) {
  // Features of each canonical pose: a short constant sequence, so the
  // derivative blocks (if any) are zero, matching a dwell at the pose.
  std::vector<std::vector<double>> canonical_features;
  for (const std::vector<Joint>& joints : gt.canonical) {
    SkeletonSequence seq;
    seq.subject_id = "canonical";
    for (int f = 0; f < 5; ++f) {
      Frame frame;
      frame.timestamp_index = f;
      frame.joints = joints;
      seq.frames.push_back(std::move(frame));
    }
    const SkeletonSequence normalized = normalize(
        seq, cfg.root_joint, {cfg.scale_joint_a, cfg.scale_joint_b});
    std::vector<FrameFeature> feats =
        frame_features(normalized, cfg.feature_mode, cfg.alpha, cfg.beta);
    canonical_features.push_back(std::move(feats[2].values));
  }

  int recovered = 0;
  int total = 0;
  for (const LexiconEntry& entry : art.lexicon.entries) {
    const std::string& symbol = art.alphabet.name_of(entry.semantic_id);
    const auto gt_it =
        std::find(gt.symbols.begin(), gt.symbols.end(), symbol);
    if (gt_it == gt.symbols.end()) continue;  // symbol with no planted pose
    ++total;
    const std::vector<double>& center = art.codebook.centers[entry.visual_id];
    std::size_t nearest = 0;
    double nearest_d2 = detail::squared_distance(center, canonical_features[0]);
    for (std::size_t q = 1; q < canonical_features.size(); ++q) {
      const double d2 = detail::squared_distance(center, canonical_features[q]);
      if (d2 < nearest_d2) {
        nearest_d2 = d2;
        nearest = q;
      }
    }
    if (gt.symbols[nearest] == symbol) ++recovered;
  }
  if (total == 0) throw SchemaError("ground truth covers no trained symbols");
  return static_cast<double>(recovered) / total;
}

/// Cross-subject evaluation: trains on the train-split subjects only, then
/// classifies every test-split instance. When ground truth is supplied the
/// report also carries the lexicon recovery rate.
inline EvalReport evaluate(const std::vector<SkeletonSequence>& sequences,
                           const nlohmann::json& instruction_json,
                           const PipelineConfig& cfg,
                           const SyntheticGroundTruth* ground_truth = nullptr,
                           TrainArtifacts* artifacts_out = nullptr) {
  const auto [train_subjects, test_subjects] =
      split_subjects(sequences, cfg.split);
  const std::set<std::string> train_set(train_subjects.begin(),
                                        train_subjects.end());

  std::vector<SkeletonSequence> train_seqs;
  std::vector<const SkeletonSequence*> test_seqs;
  for (const SkeletonSequence& s : sequences) {
    if (train_set.count(s.subject_id))
      train_seqs.push_back(s);
    else
      test_seqs.push_back(&s);
  }
  if (train_seqs.empty() || test_seqs.empty())
    throw ConfigError("subject split left an empty train or test set");

  TrainArtifacts art = train_pipeline(train_seqs, instruction_json, cfg);

  EvalReport report;
  report.k = art.codebook.k;
  report.kmeans_seed = cfg.kmeans_seed;
  report.train_subjects = train_subjects;
  report.test_subjects = test_subjects;

  std::map<std::string, int> class_total, class_correct;
  const DecodeOptions opts = cfg.decode_options();
  for (const SkeletonSequence* seq : test_seqs) {
    if (!seq->class_label)
      throw ConfigError("test sequence without a class label");
    const VisualSentence s = quantize_instance(*seq, art.codebook, cfg);
    const ClassificationResult result =
        classify(s, art.instructions, art.table, opts);
    const std::string& truth = *seq->class_label;
    ++report.confusion[truth][result.label];
    ++class_total[truth];
    if (result.label == truth) ++class_correct[truth];
  }

  int total = 0, correct = 0;
  for (const auto& [label, count] : class_total) {
    total += count;
    correct += class_correct[label];
    report.per_class_accuracy[label] =
        static_cast<double>(class_correct[label]) / count;
  }
  report.test_instances = total;
  report.accuracy = total == 0 ? 0.0 : static_cast<double>(correct) / total;
  if (ground_truth)
    report.lexicon_recovery = lexicon_recovery_rate(art, *ground_truth, cfg);
  if (artifacts_out) *artifacts_out = std::move(art);
  return report;
}

struct SweepRow {
  int k = 0;
  double accuracy = 0.0;
  std::uint64_t seed = 0;
};

/// Repeats the cross-subject evaluation with k = multiplier * |T| for each
/// multiplier, with fixed seeds.
inline std::vector<SweepRow> sweep_k(
    const std::vector<SkeletonSequence>& sequences,
    const nlohmann::json& instruction_json, const PipelineConfig& cfg,
    const std::vector<int>& multipliers) {
  if (multipliers.empty()) throw ConfigError("k sweep needs multipliers");
  SemanticAlphabet alphabet;
  load_instructions(instruction_json, alphabet, true);
  std::vector<SweepRow> rows;
  for (int m : multipliers) {
    if (m < 1) throw ConfigError("k multiplier must be >= 1");
    PipelineConfig swept = cfg;
    swept.k = m * alphabet.size();
    const EvalReport report = evaluate(sequences, instruction_json, swept);
    rows.push_back(SweepRow{swept.k, report.accuracy, cfg.kmeans_seed});
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Serialization

inline nlohmann::json to_json(const EvalReport& r) {
  nlohmann::json j;
  j["accuracy"] = r.accuracy;
  j["per_class_accuracy"] = r.per_class_accuracy;
  j["confusion"] = r.confusion;
  j["lexicon_recovery"] = r.lexicon_recovery
                              ? nlohmann::json(*r.lexicon_recovery)
                              : nlohmann::json(nullptr);
  j["k"] = r.k;
  j["seeds"] = {{"kmeans", r.kmeans_seed}};
  j["test_instances"] = r.test_instances;
  j["train_subjects"] = r.train_subjects;
  j["test_subjects"] = r.test_subjects;
  return j;
}

/// Confusion CSV: header "true_class,<label>,..."; one row per true class
/// with counts per predicted label. Labels are the union of instruction
/// labels seen in the report, sorted.
inline void write_confusion_csv(const EvalReport& r, std::ostream& os) {
  std::set<std::string> labels;
  for (const auto& [truth, row] : r.confusion) {
    labels.insert(truth);
    for (const auto& [pred, count] : row) labels.insert(pred);
  }
  os << "true_class";
  for (const std::string& label : labels) os << ',' << label;
  os << '\n';
  for (const auto& [truth, row] : r.confusion) {
    os << truth;
    for (const std::string& label : labels) {
      const auto it = row.find(label);
      os << ',' << (it == row.end() ? 0 : it->second);
    }
    os << '\n';
  }
}

inline void write_trace_csv(const std::vector<double>& trace,
                            std::ostream& os) {
  os << "iteration,log_likelihood\n";
  os.precision(17);
  for (std::size_t i = 0; i < trace.size(); ++i)
    os << i << ',' << trace[i] << '\n';
}

inline void write_sweep_csv(const std::vector<SweepRow>& rows,
                            std::ostream& os) {
  os << "k,accuracy,seed\n";
  os.precision(17);
  for (const SweepRow& row : rows)
    os << row.k << ',' << row.accuracy << ',' << row.seed << '\n';
}

/// Writes content to path atomically (temp file + rename).
inline void write_file_atomic(const std::filesystem::path& path,
                              const std::string& content) {
  namespace fs = std::filesystem;
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
  }
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out << content;
    if (!out.flush()) throw IoError("failed writing " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw IoError("cannot rename " + tmp.string() + " -> " +
                        path.string() + ": " + ec.message());
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace poselex
