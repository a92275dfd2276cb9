#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "helpers.hpp"
#include "poselex/pipeline.hpp"

using namespace poselex;
namespace fs = std::filesystem;

namespace {

// Small synthetic world: first three classes of the default spec, two
// subjects, two instances each.
SyntheticSpec small_spec() {
  SyntheticSpec spec = default_synthetic_spec();
  spec.classes.resize(3);  // LiftArms, Squat, WindUp
  spec.subjects = 2;
  spec.instances_per_subject = 2;
  return spec;
}

PipelineConfig small_config() {
  PipelineConfig cfg;
  cfg.k_multiplier = 1;
  return cfg;
}

std::string manifest_string(const std::vector<SkeletonSequence>& seqs) {
  std::ostringstream os;
  write_manifest(seqs, os);
  return os.str();
}

}  // namespace

TEST_CASE("config parsing: defaults, comments, and errors") {
  std::istringstream in(
      "# pipeline settings\n"
      "feature_mode = positions\n"
      "alpha=0.5\n"
      "k_multiplier = 3   # codebook size\n"
      "null_enabled = false\n"
      "\n"
      "kmeans_seed = 99\n");
  const PipelineConfig cfg = parse_config(in);
  CHECK(cfg.alpha == 0.5);
  CHECK(cfg.k_multiplier == 3);
  CHECK(cfg.null_enabled == false);
  CHECK(cfg.kmeans_seed == 99);
  CHECK(cfg.beta == 0.6);  // untouched default

  std::istringstream unknown("bogus_key = 1\n");
  CHECK_THROWS_AS(parse_config(unknown), ConfigError);
  std::istringstream bad_value("alpha = banana\n");
  CHECK_THROWS_AS(parse_config(bad_value), ParseError);
  std::istringstream even_window("smooth_window = 4\n");
  CHECK_THROWS_AS(parse_config(even_window), ConfigError);
  std::istringstream bad_split("split = leave_one_out\n");
  CHECK_THROWS_AS(parse_config(bad_split), ConfigError);
}

TEST_CASE("load_instructions: alphabet handling") {
  const nlohmann::json j = {
      {"classes",
       {{"Wave", {"T1", "T2"}}, {"Bow", {"T1", "T3", "T1"}}}}};
  SemanticAlphabet alphabet;
  const InstructionSet set = load_instructions(j, alphabet, true);
  CHECK(set.entries.size() == 2);
  CHECK(alphabet.size() == 3);
  CHECK(set.entries.at("Bow").length() == 3);
  CHECK(set.entries.at("Bow").elementary_count == 2);

  // strict mode rejects unseen symbols
  SemanticAlphabet strict(std::vector<std::string>{"T1"});
  CHECK_THROWS_AS(load_instructions(j, strict, false), UnknownSymbolError);
}

TEST_CASE("synthetic generation is deterministic and respects sigma=0") {
  SyntheticSpec spec = small_spec();
  const SyntheticDataset a = generate_dataset(spec);
  const SyntheticDataset b = generate_dataset(spec);
  CHECK(manifest_string(a.sequences) == manifest_string(b.sequences));

  spec.noise_sigma = 0.0;
  spec.subjects = 1;
  const SyntheticDataset clean = generate_dataset(spec);
  // every instance of a class is identical
  const auto& seqs = clean.sequences;
  REQUIRE(seqs.size() == 6);
  for (std::size_t i = 0; i + 1 < seqs.size(); i += 2) {
    REQUIRE(seqs[i].class_label == seqs[i + 1].class_label);
    CHECK(manifest_string({seqs[i]}) ==
          manifest_string({SkeletonSequence{seqs[i + 1].frames,
                                            seqs[i].subject_id,
                                            seqs[i].class_label,
                                            seqs[i].frame_rate}}));
  }
}

TEST_CASE("synthetic sentences must start and end at rest") {
  SyntheticSpec spec = small_spec();
  spec.classes[0].pose_ids = {1, 0};  // does not start at rest
  CHECK_THROWS_AS(generate_dataset(spec), ConfigError);
}

TEST_CASE("each elementary action produces at least one extremum") {
  SyntheticSpec spec = default_synthetic_spec();
  spec.subjects = 1;
  spec.instances_per_subject = 1;
  spec.noise_sigma = 0.0;
  const SyntheticDataset data = generate_dataset(spec);
  const PipelineConfig cfg;
  for (std::size_t i = 0; i < data.sequences.size(); ++i) {
    const SequenceAnalysis a = analyze_sequence(data.sequences[i], cfg);
    const KeyFrameSet kf = detect_keyframes(a.profile);
    // at least one extremum per non-rest pose visited by the class
    int non_rest = 0;
    for (int id : spec.classes[i].pose_ids)
      if (id != spec.rest_pose) ++non_rest;
    CHECK(kf.size() >= static_cast<std::size_t>(non_rest));
  }
}

TEST_CASE("train_pipeline: deterministic artifacts and coverage errors") {
  const SyntheticSpec spec = small_spec();
  const SyntheticDataset data = generate_dataset(spec);
  const nlohmann::json instructions = instructions_json(spec);
  const PipelineConfig cfg = small_config();

  const TrainArtifacts a = train_pipeline(data.sequences, instructions, cfg);
  const TrainArtifacts b = train_pipeline(data.sequences, instructions, cfg);
  CHECK(to_json(a.codebook).dump() == to_json(b.codebook).dump());
  CHECK(to_json(a.table).dump() == to_json(b.table).dump());
  CHECK(a.trace == b.trace);

  // the EM trace never decreases
  for (std::size_t i = 1; i < a.trace.size(); ++i)
    CHECK(a.trace[i] >= a.trace[i - 1] - 1e-9);

  // a class without an instruction is a config error naming the class
  nlohmann::json missing = instructions;
  missing["classes"].erase("WindUp");
  CHECK_THROWS_WITH_AS(train_pipeline(data.sequences, missing, cfg),
                       doctest::Contains("WindUp"), ConfigError);
}

TEST_CASE("train_pipeline: k below the semantic pose count is rejected") {
  const SyntheticSpec spec = small_spec();
  const SyntheticDataset data = generate_dataset(spec);
  PipelineConfig cfg = small_config();
  cfg.k = 2;  // |T| is 4 for the three classes
  CHECK_THROWS_AS(
      train_pipeline(data.sequences, instructions_json(spec), cfg),
      ConfigError);
}

TEST_CASE("split_subjects: odd/even parity of the sorted subject list") {
  std::vector<SkeletonSequence> seqs;
  for (int s = 0; s < 10; ++s) {
    SkeletonSequence seq;
    char name[16];
    std::snprintf(name, sizeof name, "s%02d", s);
    seq.subject_id = name;
    seqs.push_back(seq);
  }
  const auto [train_subjects, test_subjects] = split_subjects(seqs, "odd_even");
  CHECK(train_subjects.size() == 5);
  CHECK(test_subjects.size() == 5);
  CHECK(train_subjects[0] == "s00");
  CHECK(test_subjects[0] == "s01");

  std::vector<SkeletonSequence> one(1);
  one[0].subject_id = "only";
  CHECK_THROWS_AS(split_subjects(one, "odd_even"), ConfigError);
}

TEST_CASE("evaluate: confusion bookkeeping and accuracy identity") {
  SyntheticSpec spec = small_spec();
  spec.subjects = 4;
  spec.instances_per_subject = 2;
  const SyntheticDataset data = generate_dataset(spec);
  const PipelineConfig cfg = small_config();
  const EvalReport report =
      evaluate(data.sequences, instructions_json(spec), cfg,
               &data.ground_truth);

  // row sums equal per-class test counts (2 test subjects x 2 instances)
  int total = 0, diagonal = 0;
  for (const auto& [truth, row] : report.confusion) {
    int row_sum = 0;
    for (const auto& [pred, count] : row) row_sum += count;
    CHECK(row_sum == 4);
    total += row_sum;
    const auto self = row.find(truth);
    if (self != row.end()) diagonal += self->second;
  }
  CHECK(total == report.test_instances);
  CHECK(report.accuracy ==
        doctest::Approx(static_cast<double>(diagonal) / total));
  CHECK(report.lexicon_recovery.has_value());
  CHECK(report.k == 4);  // |T| = 4, multiplier 1
  CHECK(report.train_subjects == std::vector<std::string>{"s00", "s02"});
  CHECK(report.test_subjects == std::vector<std::string>{"s01", "s03"});
}

TEST_CASE("eval report JSON and confusion CSV formats") {
  EvalReport r;
  r.accuracy = 0.75;
  r.per_class_accuracy = {{"A", 1.0}, {"B", 0.5}};
  r.confusion = {{"A", {{"A", 2}}}, {"B", {{"A", 1}, {"B", 1}}}};
  r.k = 10;
  r.kmeans_seed = 23;
  r.test_instances = 4;
  const nlohmann::json j = to_json(r);
  CHECK(j.at("accuracy") == 0.75);
  CHECK(j.at("lexicon_recovery").is_null());
  CHECK(j.at("seeds").at("kmeans") == 23);

  std::ostringstream os;
  write_confusion_csv(r, os);
  std::istringstream is(os.str());
  std::string line;
  std::getline(is, line);
  CHECK(line == "true_class,A,B");
  std::getline(is, line);
  CHECK(line == "A,2,0");
  std::getline(is, line);
  CHECK(line == "B,1,1");
}

TEST_CASE("sweep_k: one row per multiplier with the sweep header") {
  SyntheticSpec spec = small_spec();
  const SyntheticDataset data = generate_dataset(spec);
  const PipelineConfig cfg = small_config();
  const auto rows = sweep_k(data.sequences, instructions_json(spec), cfg, {1});
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].k == 4);
  CHECK(rows[0].seed == cfg.kmeans_seed);

  std::ostringstream os;
  write_sweep_csv(rows, os);
  CHECK(os.str().rfind("k,accuracy,seed\n", 0) == 0);
}

TEST_CASE("trace CSV format") {
  std::ostringstream os;
  write_trace_csv({-10.5, -9.25, -9.0}, os);
  std::istringstream is(os.str());
  std::string line;
  std::getline(is, line);
  CHECK(line == "iteration,log_likelihood");
  std::getline(is, line);
  CHECK(line == "0,-10.5");
}

TEST_CASE("write_file_atomic leaves no temp file behind") {
  const fs::path dir = fs::temp_directory_path() / "poselex_atomic";
  fs::remove_all(dir);
  const fs::path target = dir / "nested" / "file.txt";
  write_file_atomic(target, "payload");
  CHECK(read_file(target) == "payload");
  CHECK(!fs::exists(target.string() + ".tmp"));
  fs::remove_all(dir);
}

TEST_CASE("manifest round trip through the filesystem") {
  const SyntheticSpec spec = small_spec();
  const SyntheticDataset data = generate_dataset(spec);
  const fs::path path = fs::temp_directory_path() / "poselex_manifest.jsonl";
  write_file_atomic(path, manifest_string(data.sequences));
  const auto loaded = load_sequences(path.string());
  REQUIRE(loaded.size() == data.sequences.size());
  CHECK(manifest_string(loaded) == manifest_string(data.sequences));
  fs::remove(path);
}

TEST_CASE("ground truth JSON round trip") {
  const SyntheticSpec spec = small_spec();
  const SyntheticDataset data = generate_dataset(spec);
  const SyntheticGroundTruth back =
      ground_truth_from_json(to_json(data.ground_truth));
  CHECK(back.symbols == data.ground_truth.symbols);
  CHECK(back.class_sentences == data.ground_truth.class_sentences);
  CHECK(back.instances.size() == data.ground_truth.instances.size());
  CHECK(back.canonical.size() == data.ground_truth.canonical.size());
  for (std::size_t q = 0; q < back.canonical.size(); ++q)
    CHECK(back.canonical[q] == data.ground_truth.canonical[q]);
}

TEST_CASE("quantize_instance agrees with manual analysis") {
  const SyntheticSpec spec = small_spec();
  const SyntheticDataset data = generate_dataset(spec);
  const PipelineConfig cfg = small_config();
  const TrainArtifacts art =
      train_pipeline(data.sequences, instructions_json(spec), cfg);
  const SequenceAnalysis a = analyze_sequence(data.sequences[0], cfg);
  const VisualSentence manual =
      quantize_sequence(a.features, a.keyframes, art.codebook);
  const VisualSentence direct =
      quantize_instance(data.sequences[0], art.codebook, cfg);
  CHECK(manual.ids == direct.ids);
}
