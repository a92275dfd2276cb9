#pragma once

// The visual-pose-to-semantic-pose translation model: a word-based
// translation table P(S_p | T_q) with uniform alignment priors, learned
// from a parallel corpus of (visual sentence, semantic sentence) pairs by
// expectation maximization. Includes factored and enumerated sequence
// likelihoods and pose-lexicon extraction.

#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "poselex/codebook.hpp"
#include "poselex/error.hpp"

namespace poselex {

// Probability floor applied when a table lookup feeds a posterior or a
// log-domain score; keeps deserialized tables with hard zeros usable.
inline constexpr double kProbFloor = 1e-12;

class SemanticAlphabet {
 public:
  SemanticAlphabet() = default;
  explicit SemanticAlphabet(std::vector<std::string> symbols) {
    for (std::string& s : symbols) add(s);
  }

  int add(const std::string& symbol) {
    auto it = ids_.find(symbol);
    if (it != ids_.end()) return it->second;
    const int id = static_cast<int>(symbols_.size());
    symbols_.push_back(symbol);
    ids_.emplace(symbol, id);
    return id;
  }

  int id_of(const std::string& symbol) const {
    auto it = ids_.find(symbol);
    if (it == ids_.end())
      throw UnknownSymbolError("unknown semantic pose symbol: '" + symbol + "'");
    return it->second;
  }

  bool contains(const std::string& symbol) const {
    return ids_.count(symbol) > 0;
  }

  const std::string& name_of(int id) const { return symbols_.at(id); }
  int size() const { return static_cast<int>(symbols_.size()); }
  const std::vector<std::string>& symbols() const { return symbols_; }

 private:
  std::vector<std::string> symbols_;
  std::map<std::string, int> ids_;
};

struct SemanticInstruction {
  std::string class_label;
  std::vector<int> poses;    // alphabet ids, non-empty
  int elementary_count = 1;  // G

  int length() const { return static_cast<int>(poses.size()); }
};

inline void validate(const SemanticInstruction& t, int alphabet_size) {
  if (t.poses.empty())
    throw SchemaError("instruction '" + t.class_label + "' has no poses");
  for (int p : t.poses)
    if (p < 0 || p >= alphabet_size)
      throw UnknownSymbolError("instruction '" + t.class_label +
                               "' uses a pose id outside the alphabet");
}

struct SentencePair {
  VisualSentence source;        // s_n, length M_n
  SemanticInstruction target;   // t_n, length L_n
  std::string instance_id;
};

struct ParallelCorpus {
  std::vector<SentencePair> pairs;
  int visual_alphabet_size = 0;  // k
  SemanticAlphabet semantic_alphabet;
};

inline void validate(const ParallelCorpus& corpus) {
  if (corpus.pairs.empty()) throw SchemaError("corpus has no pairs");
  for (const SentencePair& pair : corpus.pairs) {
    if (pair.source.ids.empty())
      throw SchemaError("pair '" + pair.instance_id + "' has an empty source");
    for (int s : pair.source.ids)
      if (s < 0 || s >= corpus.visual_alphabet_size)
        throw SchemaError("pair '" + pair.instance_id +
                          "' has a visual id outside [0, k)");
    validate(pair.target, corpus.semantic_alphabet.size());
  }
}

/// Conditional distribution P(S_p | T_q), one row per semantic pose plus an
/// optional trailing NULL row for visual candidates with no semantic
/// counterpart. Every row sums to 1.
class TranslationTable {
 public:
  TranslationTable() = default;

  /// Every entry 1/k, including the NULL row when enabled.
  static TranslationTable uniform(int visual_k,
                                  const SemanticAlphabet& alphabet,
                                  bool with_null = true) {
    if (visual_k < 1) throw ConfigError("visual alphabet must have k >= 1");
    TranslationTable t;
    t.alphabet_ = alphabet;
    t.k_ = visual_k;
    t.with_null_ = with_null;
    t.rows_.assign(t.row_count(),
                   std::vector<double>(visual_k, 1.0 / visual_k));
    return t;
  }

  int k() const { return k_; }
  bool has_null() const { return with_null_; }
  int semantic_count() const { return alphabet_.size(); }
  int row_count() const { return semantic_count() + (with_null_ ? 1 : 0); }
  int null_row() const { return semantic_count(); }  // valid iff has_null()
  const SemanticAlphabet& alphabet() const { return alphabet_; }

  double prob(int row, int visual) const { return rows_.at(row).at(visual); }
  double& prob(int row, int visual) { return rows_.at(row).at(visual); }
  double floored(int row, int visual) const {
    return std::max(rows_[row][visual], kProbFloor);
  }
  const std::vector<double>& row(int r) const { return rows_.at(r); }
  std::vector<double>& row(int r) { return rows_.at(r); }

  /// Alignment positions run over i = 0..L with 0 = NULL when the table has
  /// a NULL row, otherwise i = 1..L. Returns the table row for position i.
  int row_for_position(const SemanticInstruction& t, int i) const {
    return i == 0 ? null_row() : t.poses[i - 1];
  }
  int first_position() const { return with_null_ ? 0 : 1; }
  /// Number of alignment choices per source element; the uniform alignment
  /// prior is 1/denominator.
  int position_count(const SemanticInstruction& t) const {
    return t.length() + (with_null_ ? 1 : 0);
  }

 private:
  SemanticAlphabet alphabet_;
  std::vector<std::vector<double>> rows_;
  int k_ = 0;
  bool with_null_ = true;
};

inline void validate(const TranslationTable& t, double tol = 1e-12) {
  for (int r = 0; r < t.row_count(); ++r) {
    double sum = 0.0;
    for (int p = 0; p < t.k(); ++p) {
      const double v = t.prob(r, p);
      if (v < 0.0 || !std::isfinite(v))
        throw NumericError("translation table entry out of range");
      sum += v;
    }
    if (std::abs(sum - 1.0) > tol)
      throw NumericError("translation table row " + std::to_string(r) +
                         " sums to " + std::to_string(sum));
  }
}

inline TranslationTable init_uniform(int visual_k,
                                     const SemanticAlphabet& alphabet,
                                     bool with_null = true) {
  return TranslationTable::uniform(visual_k, alphabet, with_null);
}

/// E-step posteriors for one pair: gamma[j][i] is the probability that
/// source element j aligns to target position i, for i in {0(NULL),1..L}.
/// Each gamma[j] row sums to 1; lookups are floored at kProbFloor so a
/// zeroed table cannot produce a 0/0. Column 0 is identically zero when
/// the table has no NULL row.
inline std::vector<std::vector<double>> pair_posteriors(
    const SentencePair& pair, const TranslationTable& theta) {
  const int len = pair.target.length();
  std::vector<std::vector<double>> gamma(
      pair.source.ids.size(), std::vector<double>(len + 1, 0.0));
  for (std::size_t j = 0; j < pair.source.ids.size(); ++j) {
    const int s = pair.source.ids[j];
    double denom = 0.0;
    for (int i = theta.first_position(); i <= len; ++i)
      denom += theta.floored(theta.row_for_position(pair.target, i), s);
    for (int i = theta.first_position(); i <= len; ++i)
      gamma[j][i] =
          theta.floored(theta.row_for_position(pair.target, i), s) / denom;
  }
  return gamma;
}

/// P(s_n | t_n) via the sum-product interchange: the product over source
/// positions of the prior-weighted sum of translation probabilities.
/// Unfloored, so a table of hard zeros yields exactly 0.
inline double likelihood_factored(const SentencePair& pair,
                                  const TranslationTable& theta) {
  const int len = pair.target.length();
  const double prior = 1.0 / theta.position_count(pair.target);
  double prob = 1.0;
  for (int s : pair.source.ids) {
    double sum = 0.0;
    for (int i = theta.first_position(); i <= len; ++i)
      sum += theta.prob(theta.row_for_position(pair.target, i), s);
    prob *= prior * sum;
  }
  return prob;
}

/// log P(s_n | t_n), evaluated position-wise to avoid linear-domain
/// underflow on long sentences.
inline double log_likelihood_factored(const SentencePair& pair,
                                      const TranslationTable& theta) {
  const int len = pair.target.length();
  const double log_prior =
      -std::log(static_cast<double>(theta.position_count(pair.target)));
  double log_prob = 0.0;
  for (int s : pair.source.ids) {
    double sum = 0.0;
    for (int i = theta.first_position(); i <= len; ++i)
      sum += theta.prob(theta.row_for_position(pair.target, i), s);
    log_prob += log_prior + std::log(sum);
  }
  return log_prob;
}

inline double corpus_log_likelihood(const ParallelCorpus& corpus,
                                    const TranslationTable& theta) {
  double total = 0.0;
  for (const SentencePair& pair : corpus.pairs)
    total += log_likelihood_factored(pair, theta);
  return total;
}

/// P(s_n | t_n) by explicit summation over every alignment vector in
/// {0..L}^M (or {1..L}^M without NULL). Guards the (L+1)^M blow-up with a
/// cap; the factored form is the production path, this one exists as an
/// independent cross-check.
inline double likelihood_enumerated(const SentencePair& pair,
                                    const TranslationTable& theta,
                                    std::int64_t cap = 1'000'000) {
  const int len = pair.target.length();
  const int choices = theta.position_count(pair.target);
  const std::size_t m = pair.source.ids.size();

  std::int64_t total_alignments = 1;
  for (std::size_t j = 0; j < m; ++j) {
    if (total_alignments > cap / choices)
      throw ConfigError("alignment enumeration too large: exceeds cap " +
                        std::to_string(cap));
    total_alignments *= choices;
  }

  const double prior = 1.0 / choices;
  const int first = theta.first_position();
  std::vector<int> a(m, first);
  double total = 0.0;
  while (true) {
    double prob = 1.0;
    for (std::size_t j = 0; j < m; ++j)
      prob *= prior *
              theta.prob(theta.row_for_position(pair.target, a[j]),
                         pair.source.ids[j]);
    total += prob;

    std::size_t j = 0;
    while (j < m && a[j] == len) {
      a[j] = first;
      ++j;
    }
    if (j == m) break;
    ++a[j];
  }
  return total;
}

/// One EM iteration: accumulates expected counts
/// c(S_p, T_q) = sum_n sum_j gamma_n[j][i] over positions i mapping to T_q,
/// then renormalizes each row. Pairs are processed in corpus order so the
/// reduction is bitwise reproducible. A target symbol with zero total count
/// gets a uniform row.
inline TranslationTable em_iteration(const ParallelCorpus& corpus,
                                     const TranslationTable& theta) {
  std::vector<std::vector<double>> counts(
      theta.row_count(), std::vector<double>(theta.k(), 0.0));
  for (const SentencePair& pair : corpus.pairs) {
    const std::vector<std::vector<double>> gamma =
        pair_posteriors(pair, theta);
    const int len = pair.target.length();
    for (std::size_t j = 0; j < pair.source.ids.size(); ++j) {
      const int s = pair.source.ids[j];
      for (int i = theta.first_position(); i <= len; ++i)
        counts[theta.row_for_position(pair.target, i)][s] += gamma[j][i];
    }
  }

  TranslationTable next = theta;
  for (int r = 0; r < theta.row_count(); ++r) {
    double total = 0.0;
    for (int p = 0; p < theta.k(); ++p) total += counts[r][p];
    if (total > 0.0) {
      for (int p = 0; p < theta.k(); ++p) next.prob(r, p) = counts[r][p] / total;
    } else {
      for (int p = 0; p < theta.k(); ++p) next.prob(r, p) = 1.0 / theta.k();
    }
  }
  return next;
}

struct TrainResult {
  TranslationTable table;
  std::vector<double> log_likelihood_trace;  // entry 0 is the initial table
};

/// Runs EM from a uniform table until the relative log-likelihood
/// improvement drops below tol or max_iters iterations have run. The trace
/// has one entry per evaluated table (at most max_iters + 1) and is
/// non-decreasing up to floating-point slack.
inline TrainResult train(const ParallelCorpus& corpus, int max_iters = 100,
                         double tol = 1e-6, bool with_null = true) {
  validate(corpus);
  TrainResult result;
  result.table = init_uniform(corpus.visual_alphabet_size,
                              corpus.semantic_alphabet, with_null);
  double ll = corpus_log_likelihood(corpus, result.table);
  result.log_likelihood_trace.push_back(ll);
  for (int iter = 0; iter < max_iters; ++iter) {
    result.table = em_iteration(corpus, result.table);
    const double next_ll = corpus_log_likelihood(corpus, result.table);
    result.log_likelihood_trace.push_back(next_ll);
    const double rel =
        (next_ll - ll) / std::max(std::abs(ll), 1e-300);
    ll = next_ll;
    if (rel < tol) break;
  }
  return result;
}

struct LexiconEntry {
  int semantic_id = 0;
  int visual_id = 0;
  double probability = 0.0;
};

// Learned mapping from each semantic pose to its most probable visual
// candidate.
struct PoseLexicon {
  std::vector<LexiconEntry> entries;  // one per semantic pose, in id order
};

/// Argmax visual candidate per non-NULL row; ties go to the smallest
/// visual index.
inline PoseLexicon extract_lexicon(const TranslationTable& theta) {
  PoseLexicon lex;
  for (int q = 0; q < theta.semantic_count(); ++q) {
    int best = 0;
    for (int p = 1; p < theta.k(); ++p)
      if (theta.prob(q, p) > theta.prob(q, best)) best = p;
    lex.entries.push_back(LexiconEntry{q, best, theta.prob(q, best)});
  }
  return lex;
}

inline nlohmann::json to_json(const TranslationTable& t) {
  nlohmann::json j;
  j["semantic"] = t.alphabet().symbols();
  j["null_row"] = t.has_null();
  j["k"] = t.k();
  auto rows = nlohmann::json::array();
  for (int r = 0; r < t.row_count(); ++r) rows.push_back(t.row(r));
  j["probs"] = std::move(rows);  // one row per symbol, NULL last
  return j;
}

inline TranslationTable table_from_json(const nlohmann::json& j) {
  try {
    const auto symbols = j.at("semantic").get<std::vector<std::string>>();
    const bool with_null = j.at("null_row").get<bool>();
    const int k = j.at("k").get<int>();
    TranslationTable t =
        TranslationTable::uniform(k, SemanticAlphabet(symbols), with_null);
    const auto& rows = j.at("probs");
    if (static_cast<int>(rows.size()) != t.row_count())
      throw SchemaError("translation table: row count mismatch");
    for (int r = 0; r < t.row_count(); ++r) {
      const auto row = rows[r].get<std::vector<double>>();
      if (static_cast<int>(row.size()) != k)
        throw SchemaError("translation table: row width mismatch");
      t.row(r) = row;
    }
    validate(t, 1e-9);
    return t;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("translation table: ") + e.what());
  }
}

/// CSV export: semantic_pose,visual_pose_id,probability
inline void write_lexicon_csv(const PoseLexicon& lex,
                              const SemanticAlphabet& alphabet,
                              std::ostream& os) {
  os << "semantic_pose,visual_pose_id,probability\n";
  for (const LexiconEntry& e : lex.entries)
    os << alphabet.name_of(e.semantic_id) << ',' << e.visual_id << ','
       << e.probability << '\n';
}

}  // namespace poselex
