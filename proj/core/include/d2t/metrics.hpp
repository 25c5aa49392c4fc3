#pragma once

#include <cstddef>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "d2t/triple.hpp"

namespace d2t {

using Tokens = std::vector<std::string>;

// Lowercases ASCII, splits on whitespace and makes every ASCII punctuation
// character its own token.
Tokens tokenize(std::string_view text);

struct BleuResult {
  double bleu = 0.0;  // [0, 100]
  std::vector<double> precisions;
  std::vector<std::size_t> matches;
  std::vector<std::size_t> totals;
  double brevity_penalty = 0.0;
  std::size_t hyp_length = 0;
  std::size_t ref_length = 0;  // sum of closest reference lengths
};

// Corpus BLEU without smoothing: clipped n-gram counts (clip = max count in
// any reference), geometric mean over orders 1..max_n, brevity penalty
// exp(1 - r/c) when c <= r with r the closest reference length (ties pick
// the shorter). Any zero corpus precision gives 0.
BleuResult corpus_bleu(const std::vector<Tokens>& hypotheses, const std::vector<std::vector<Tokens>>& references,
                       int max_n = 4);

struct EvalExample {
  Tokens hypothesis;
  std::vector<Tokens> references;
  // Subjects, objects and predicate words of the source triples.
  std::vector<Tokens> table_values;
};

EvalExample make_eval_example(std::string_view hypothesis, const DataInstance& instance);

inline constexpr double kParentSmoothing = 1e-5;

struct ParentScore {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

// PARENT with the word-overlap entailment model. An n-gram is entailed by
// the table with probability (tokens of it found in the table) / n.
// Precision per order: sum over hypothesis n-grams of
//   count * (p_ref + (1 - p_ref) * w),  p_ref = min(1, ref count / count)
// divided by the hypothesis n-gram count. Reference recall per order: sum
// over reference n-grams of count * w * min(1, hyp count / count) divided by
// the sum of count * w. Orders without hypothesis n-grams are left out of
// the precision mean; orders whose recall denominator is zero are left out
// of the recall mean (no orders at all: reference recall 1). Zero values of
// orders >= 2, a zero reference recall and a zero table recall are floored
// at kParentSmoothing; a zero unigram precision makes the precision 0.
// Table recall is the mean over table values of the fraction of their
// tokens that occur in the hypothesis.
// recall = ref_recall^(1 - lambda) * table_recall^lambda.
// With several references the one giving the highest F1 wins.
ParentScore parent_instance(const EvalExample& example, double lambda_weight = 0.5, int max_n = 4);

struct ParentResult {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::vector<ParentScore> per_instance;
};

// Corpus scores are the means of the per-instance scores.
ParentResult parent_scores(const std::vector<EvalExample>& examples, double lambda_weight = 0.5, int max_n = 4);

// Hook for metrics computed outside this library (METEOR, BERTScore,
// BLEURT). Hypotheses and references arrive detokenized.
class ExternalMetric {
 public:
  virtual ~ExternalMetric() = default;
  virtual std::string name() const = 0;
  virtual double score(const std::vector<std::string>& hypotheses,
                       const std::vector<std::vector<std::string>>& references) = 0;
};

// Shells out to a scorer. The command may use {hyp} for a file with one
// hypothesis per line and {refs} for a space-separated list of reference
// files (ref0, ref1, ... padded with the instance's first reference, as
// multi-reference scorers expect). The last number printed on stdout is the
// score.
class CommandMetric : public ExternalMetric {
 public:
  CommandMetric(std::string name, std::string command) : name_(std::move(name)), command_(std::move(command)) {}
  std::string name() const override { return name_; }
  double score(const std::vector<std::string>& hypotheses,
               const std::vector<std::vector<std::string>>& references) override;

 private:
  std::string name_;
  std::string command_;
};

struct Hypothesis {
  std::string id;
  std::string text;
};

struct EvalConfig {
  double parent_lambda = 0.5;
  int max_n = 4;
  std::vector<std::shared_ptr<ExternalMetric>> external;
};

struct InstanceScore {
  std::string id;
  ParentScore parent;
};

struct MetricReport {
  static constexpr int kSchemaVersion = 1;

  double bleu = 0.0;
  BleuResult bleu_detail;
  double parent_precision = 0.0;
  double parent_recall = 0.0;
  double parent_f1 = 0.0;
  double parent_lambda = 0.5;
  std::vector<InstanceScore> per_instance;  // sorted by id
  std::size_t instances = 0;
  std::size_t hyp_tokens = 0;
  std::size_t ref_tokens = 0;
  std::map<std::string, double> external;

  nlohmann::json to_json() const;
};

// Hypotheses are matched to instances by id; scores do not depend on the
// order of either list. Throws MetricError listing unmatched ids, and when
// an instance has no references.
MetricReport evaluate(const std::vector<Hypothesis>& hypotheses, const std::vector<DataInstance>& instances,
                      const EvalConfig& config = {});

// {id, text} per line.
std::vector<Hypothesis> read_hypotheses_jsonl(std::string_view jsonl);
// One hypothesis per line, paired with the instances in order.
std::vector<Hypothesis> read_hypotheses_text(std::string_view text, const std::vector<DataInstance>& instances);
std::string write_hypotheses_jsonl(const std::vector<Hypothesis>& hypotheses);

}  // namespace d2t
