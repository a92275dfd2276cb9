// poselex: synthetic data generation, pose-lexicon training, cross-subject
// evaluation, k-sweeps and classification over skeleton manifests.

#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "poselex/poselex.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

poselex::PipelineConfig config_or_default(const std::string& path) {
  if (path.empty()) return poselex::PipelineConfig{};
  return poselex::load_config(path);
}

json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw poselex::IoError("cannot open " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw poselex::ParseError(path + ": " + e.what());
  }
  return j;
}

void write_json(const fs::path& path, const json& j) {
  poselex::write_file_atomic(path, j.dump(2) + "\n");
}

int run_synth(const std::string& config_path, const std::string& out_dir) {
  const poselex::PipelineConfig cfg = config_or_default(config_path);
  poselex::SyntheticSpec spec = poselex::default_synthetic_spec();
  spec.subjects = cfg.synth_subjects;
  spec.instances_per_subject = cfg.synth_instances;
  spec.interp_frames = cfg.synth_interp_frames;
  spec.seed = cfg.synth_seed;
  if (cfg.synth_noise_sigma >= 0.0) spec.noise_sigma = cfg.synth_noise_sigma;

  const poselex::SyntheticDataset dataset = poselex::generate_dataset(spec);

  std::ostringstream manifest;
  poselex::write_manifest(dataset.sequences, manifest);
  poselex::write_file_atomic(fs::path(out_dir) / "manifest.jsonl",
                             manifest.str());

  json schema;
  schema["description"] =
      "line-delimited JSON; one object per sequence: "
      "{\"subject\": str, \"class\": str|null, \"fps\": num, "
      "\"joints\": [[[x,y,z] x J] x F]}";
  schema["joint_order"] = poselex::synthetic_joint_names();
  write_json(fs::path(out_dir) / "skeleton_schema.json", schema);
  write_json(fs::path(out_dir) / "instructions.json",
             poselex::instructions_json(spec));
  write_json(fs::path(out_dir) / "ground_truth.json",
             poselex::to_json(dataset.ground_truth));

  std::cout << "wrote " << dataset.sequences.size() << " instances to "
            << out_dir << "\n";
  return 0;
}

int run_train(const std::string& config_path, const std::string& manifest_path,
              const std::string& instructions_path, const std::string& out_dir,
              const std::string& dump_profiles) {
  const poselex::PipelineConfig cfg = config_or_default(config_path);
  const auto sequences = poselex::load_sequences(manifest_path);
  const json instructions = load_json_file(instructions_path);
  const poselex::TrainArtifacts art =
      poselex::train_pipeline(sequences, instructions, cfg);

  write_json(fs::path(out_dir) / "codebook.json", poselex::to_json(art.codebook));
  write_json(fs::path(out_dir) / "translation_table.json",
             poselex::to_json(art.table));
  std::ostringstream lexicon;
  poselex::write_lexicon_csv(art.lexicon, art.alphabet, lexicon);
  poselex::write_file_atomic(fs::path(out_dir) / "lexicon.csv", lexicon.str());
  std::ostringstream trace;
  poselex::write_trace_csv(art.trace, trace);
  poselex::write_file_atomic(fs::path(out_dir) / "em_trace.csv", trace.str());

  if (!dump_profiles.empty()) {
    for (std::size_t i = 0; i < sequences.size(); ++i) {
      const poselex::SequenceAnalysis a =
          poselex::analyze_sequence(sequences[i], cfg);
      std::ostringstream csv;
      poselex::write_profile_csv(a.profile, a.keyframes, csv);
      poselex::write_file_atomic(
          fs::path(dump_profiles) / ("profile_" + std::to_string(i) + ".csv"),
          csv.str());
    }
  }

  std::cout << "trained on " << sequences.size() << " instances, k = "
            << art.codebook.k << ", EM iterations = "
            << art.trace.size() - 1 << "\n";
  return 0;
}

int run_eval(const std::string& config_path, const std::string& manifest_path,
             const std::string& instructions_path,
             const std::string& ground_truth_path, const std::string& out_dir) {
  const poselex::PipelineConfig cfg = config_or_default(config_path);
  const auto sequences = poselex::load_sequences(manifest_path);
  const json instructions = load_json_file(instructions_path);

  poselex::SyntheticGroundTruth gt;
  const poselex::SyntheticGroundTruth* gt_ptr = nullptr;
  if (!ground_truth_path.empty()) {
    gt = poselex::ground_truth_from_json(load_json_file(ground_truth_path));
    gt_ptr = &gt;
  }

  const poselex::EvalReport report =
      poselex::evaluate(sequences, instructions, cfg, gt_ptr);
  write_json(fs::path(out_dir) / "eval_report.json", poselex::to_json(report));
  std::ostringstream confusion;
  poselex::write_confusion_csv(report, confusion);
  poselex::write_file_atomic(fs::path(out_dir) / "confusion.csv",
                             confusion.str());

  std::cout << "accuracy " << report.accuracy << " over "
            << report.test_instances << " test instances";
  if (report.lexicon_recovery)
    std::cout << ", lexicon recovery " << *report.lexicon_recovery;
  std::cout << "\n";
  return 0;
}

int run_sweep_k(const std::string& config_path,
                const std::string& manifest_path,
                const std::string& instructions_path,
                std::vector<int> multipliers, const std::string& out_dir) {
  const poselex::PipelineConfig cfg = config_or_default(config_path);
  const auto sequences = poselex::load_sequences(manifest_path);
  const json instructions = load_json_file(instructions_path);
  if (multipliers.empty()) multipliers = {1, 2, 3, 4, 5, 6, 7};

  const auto rows = poselex::sweep_k(sequences, instructions, cfg, multipliers);
  std::ostringstream csv;
  poselex::write_sweep_csv(rows, csv);
  poselex::write_file_atomic(fs::path(out_dir) / "sweep_k.csv", csv.str());
  for (const poselex::SweepRow& row : rows)
    std::cout << "k=" << row.k << " accuracy=" << row.accuracy << "\n";
  return 0;
}

int run_classify(const std::string& config_path,
                 const std::string& artifacts_dir,
                 const std::string& manifest_path,
                 const std::string& instructions_path,
                 const std::string& novel_path, const std::string& out_dir) {
  const poselex::PipelineConfig cfg = config_or_default(config_path);
  const poselex::VisualCodebook codebook = poselex::codebook_from_json(
      load_json_file((fs::path(artifacts_dir) / "codebook.json").string()));
  const poselex::TranslationTable table = poselex::table_from_json(
      load_json_file((fs::path(artifacts_dir) / "translation_table.json").string()));

  poselex::SemanticAlphabet alphabet = table.alphabet();
  const poselex::InstructionSet trained = poselex::load_instructions(
      load_json_file(instructions_path), alphabet, false);
  poselex::InstructionSet novel;
  if (!novel_path.empty())
    novel = poselex::load_instructions(load_json_file(novel_path), alphabet,
                                       false);

  const auto sequences = poselex::load_sequences(manifest_path);
  const poselex::DecodeOptions opts = cfg.decode_options();
  json report = json::array();
  int correct = 0, labeled = 0;
  for (std::size_t i = 0; i < sequences.size(); ++i) {
    const poselex::VisualSentence s =
        poselex::quantize_instance(sequences[i], codebook, cfg);
    const poselex::ClassificationResult result =
        poselex::classify_zero_shot(s, trained, novel, table, opts);
    if (result.null_dominated)
      std::cerr << "warning: instance " << i
                << ": NULL wins every alignment position; label chosen by "
                   "tie rule\n";
    report.push_back(poselex::classification_to_json(
        std::to_string(i), result, sequences[i].class_label));
    if (sequences[i].class_label) {
      ++labeled;
      if (*sequences[i].class_label == result.label) ++correct;
    }
  }
  write_json(fs::path(out_dir) / "classification_report.json", report);
  std::cout << "classified " << sequences.size() << " instances";
  if (labeled > 0)
    std::cout << ", accuracy " << static_cast<double>(correct) / labeled
              << " on " << labeled << " labeled";
  std::cout << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"pose lexicon learning and semantic action classification"};
  app.require_subcommand(1);

  std::string config, manifest, instructions, novel, out = ".", artifacts;
  std::string ground_truth, dump_profiles;
  std::vector<int> multipliers;

  CLI::App* synth = app.add_subcommand("synth", "generate a synthetic dataset");
  synth->add_option("--config", config, "pipeline config file");
  synth->add_option("--out", out, "output directory")->required();

  CLI::App* train = app.add_subcommand("train", "learn codebook, table and lexicon");
  train->add_option("--config", config, "pipeline config file");
  train->add_option("--manifest", manifest, "skeleton manifest")->required();
  train->add_option("--instructions", instructions, "instruction file")->required();
  train->add_option("--out", out, "output directory")->required();
  train->add_option("--dump-profiles", dump_profiles,
                    "directory for per-instance eigenvalue profile CSVs");

  CLI::App* eval = app.add_subcommand("eval", "cross-subject evaluation");
  eval->add_option("--config", config, "pipeline config file");
  eval->add_option("--manifest", manifest, "skeleton manifest")->required();
  eval->add_option("--instructions", instructions, "instruction file")->required();
  eval->add_option("--ground-truth", ground_truth,
                   "synthetic ground truth for lexicon recovery");
  eval->add_option("--out", out, "output directory")->required();

  CLI::App* sweep = app.add_subcommand("sweep-k", "accuracy versus codebook size");
  sweep->add_option("--config", config, "pipeline config file");
  sweep->add_option("--manifest", manifest, "skeleton manifest")->required();
  sweep->add_option("--instructions", instructions, "instruction file")->required();
  sweep->add_option("--multipliers", multipliers,
                    "k multipliers of |T| (default 1..7)");
  sweep->add_option("--out", out, "output directory")->required();

  CLI::App* classify = app.add_subcommand("classify", "classify a manifest");
  classify->add_option("--config", config, "pipeline config file");
  classify->add_option("--artifacts", artifacts,
                       "directory with codebook.json and translation_table.json")
      ->required();
  classify->add_option("--manifest", manifest, "skeleton manifest")->required();
  classify->add_option("--instructions", instructions, "instruction file")->required();
  classify->add_option("--novel", novel, "novel (zero-shot) instruction file");
  classify->add_option("--out", out, "output directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth->parsed()) return run_synth(config, out);
    if (train->parsed())
      return run_train(config, manifest, instructions, out, dump_profiles);
    if (eval->parsed())
      return run_eval(config, manifest, instructions, ground_truth, out);
    if (sweep->parsed())
      return run_sweep_k(config, manifest, instructions, multipliers, out);
    if (classify->parsed())
      return run_classify(config, artifacts, manifest, instructions, novel, out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
