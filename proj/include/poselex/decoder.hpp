#pragma once

// Classification by maximum translation probability: a test visual
// sentence is scored against every candidate instruction by its best
// alignment, and the argmax label wins.

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "poselex/error.hpp"
#include "poselex/lexicon.hpp"

namespace poselex {

// Candidate instructions, keyed by class label. std::map keeps evaluation
// and tie-breaking order deterministic (lexicographic).
struct InstructionSet {
  std::map<std::string, SemanticInstruction> entries;
};

struct DecodeOptions {
  // NULL competes in the per-position max. Disabling it restricts the
  // alignment search to real semantic poses; the alignment prior keeps its
  // 1/(L+1) value so per-class scores stay comparable.
  bool null_in_max = true;
  // Keep the (L+1)^-m alignment-prior factor in the score. It penalizes
  // longer instructions; dropping it is exposed for ablation only.
  bool length_factor = true;
};

struct AlignmentScore {
  double log_score = 0.0;
  std::vector<int> alignment;  // target position per source element, 0 = NULL
};

struct ClassificationResult {
  std::string label;
  double log_score = 0.0;
  std::vector<int> best_alignment;
  std::map<std::string, double> per_class_scores;
  // True when every position of the winning alignment is NULL; the label
  // then carries no semantic evidence and was chosen by the tie rule.
  bool null_dominated = false;
};

/// Best-alignment log score of s against t:
///   sum_j [ log max_i P(s_j | t_i) - log(L+1) ]
/// The per-position argmax records the alignment; ties go to the smallest
/// position (NULL first). Lookups are floored so the score stays finite.
inline AlignmentScore best_alignment_score(const VisualSentence& s,
                                           const SemanticInstruction& t,
                                           const TranslationTable& theta,
                                           const DecodeOptions& opts = {}) {
  validate(t, theta.semantic_count());
  const int len = t.length();
  const int first =
      (theta.has_null() && opts.null_in_max) ? 0 : 1;
  const double log_prior =
      opts.length_factor
          ? -std::log(static_cast<double>(theta.position_count(t)))
          : 0.0;

  AlignmentScore out;
  out.alignment.reserve(s.ids.size());
  for (int sym : s.ids) {
    if (sym < 0 || sym >= theta.k())
      throw SchemaError("visual id outside the codebook range");
    int best_i = first;
    double best_p = theta.floored(theta.row_for_position(t, first), sym);
    for (int i = first + 1; i <= len; ++i) {
      const double p = theta.floored(theta.row_for_position(t, i), sym);
      if (p > best_p) {
        best_p = p;
        best_i = i;
      }
    }
    out.log_score += std::log(best_p) + log_prior;
    out.alignment.push_back(best_i);
  }
  return out;
}

/// Scores s against every instruction and returns the argmax label; exact
/// log-score ties resolve to the lexicographically smallest label.
inline ClassificationResult classify(const VisualSentence& s,
                                     const InstructionSet& set,
                                     const TranslationTable& theta,
                                     const DecodeOptions& opts = {}) {
  if (set.entries.empty())
    throw ConfigError("classification needs a non-empty instruction set");
  ClassificationResult result;
  bool have_best = false;
  AlignmentScore best;
  for (const auto& [label, instruction] : set.entries) {
    const AlignmentScore score = best_alignment_score(s, instruction, theta, opts);
    result.per_class_scores[label] = score.log_score;
    if (!have_best || score.log_score > best.log_score) {
      have_best = true;
      best = score;
      result.label = label;
    }
  }
  result.log_score = best.log_score;
  result.best_alignment = best.alignment;
  result.null_dominated =
      !best.alignment.empty() &&
      std::all_of(best.alignment.begin(), best.alignment.end(),
                  [](int i) { return i == 0; });
  return result;
}

/// Concatenates two instructions into a composite activity "a then b".
inline SemanticInstruction compose_instruction(const SemanticInstruction& a,
                                               const SemanticInstruction& b,
                                               const std::string& label) {
  if (a.poses.empty() || b.poses.empty())
    throw SchemaError("cannot compose an empty instruction");
  SemanticInstruction out;
  out.class_label = label;
  out.poses = a.poses;
  out.poses.insert(out.poses.end(), b.poses.begin(), b.poses.end());
  out.elementary_count = a.elementary_count + b.elementary_count;
  return out;
}

/// classify over the union of trained and novel instructions. Novel
/// instructions may only use semantic poses already in theta's alphabet;
/// with an empty novel set this is exactly classify.
inline ClassificationResult classify_zero_shot(const VisualSentence& s,
                                               const InstructionSet& trained,
                                               const InstructionSet& novel,
                                               const TranslationTable& theta,
                                               const DecodeOptions& opts = {}) {
  for (const auto& [label, instruction] : novel.entries)
    validate(instruction, theta.semantic_count());
  InstructionSet merged = trained;
  for (const auto& [label, instruction] : novel.entries)
    merged.entries[label] = instruction;
  return classify(s, merged, theta, opts);
}

/// Per-instance report entry:
/// {"instance": id, "predicted": label, "true": label|null,
///  "log_scores": {...}, "alignment": [...]}
inline nlohmann::json classification_to_json(
    const std::string& instance_id, const ClassificationResult& result,
    const std::optional<std::string>& true_label) {
  nlohmann::json j;
  j["instance"] = instance_id;
  j["predicted"] = result.label;
  j["true"] = true_label ? nlohmann::json(*true_label) : nlohmann::json(nullptr);
  j["log_scores"] = result.per_class_scores;
  j["alignment"] = result.best_alignment;
  return j;
}

}  // namespace poselex
