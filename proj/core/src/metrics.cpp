#include "d2t/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <regex>
#include <set>
#include <unordered_map>
#include <unordered_set>

#include "d2t/corpus.hpp"
#include "d2t/error.hpp"
#include "text_util.hpp"

namespace d2t {

using nlohmann::json;

Tokens tokenize(std::string_view text) {
  Tokens tokens;
  std::string current;
  auto flush = [&] {
    if (!current.empty()) tokens.push_back(std::move(current));
    current.clear();
  };
  for (char c : text) {
    if (detail::is_space(c)) {
      flush();
    } else if (detail::is_punct(c)) {
      flush();
      tokens.emplace_back(1, c);
    } else {
      current += detail::to_lower(c);
    }
  }
  flush();
  return tokens;
}

namespace {

struct TokensHash {
  std::size_t operator()(const Tokens& t) const {
    std::size_t h = t.size();
    for (const auto& s : t) h ^= std::hash<std::string>{}(s) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    return h;
  }
};

using NgramCounts = std::unordered_map<Tokens, std::size_t, TokensHash>;

NgramCounts ngram_counts(const Tokens& tokens, std::size_t n) {
  NgramCounts counts;
  if (tokens.size() < n) return counts;
  for (std::size_t i = 0; i + n <= tokens.size(); ++i) ++counts[Tokens(tokens.begin() + i, tokens.begin() + i + n)];
  return counts;
}

}  // namespace

BleuResult corpus_bleu(const std::vector<Tokens>& hypotheses, const std::vector<std::vector<Tokens>>& references,
                       int max_n) {
  if (hypotheses.size() != references.size())
    throw MetricError("corpus_bleu: " + std::to_string(hypotheses.size()) + " hypotheses but " +
                      std::to_string(references.size()) + " reference sets");
  if (hypotheses.empty()) throw MetricError("corpus_bleu: empty corpus");
  if (max_n < 1) throw MetricError("corpus_bleu: max_n must be >= 1");

  const auto orders = static_cast<std::size_t>(max_n);
  BleuResult result;
  result.matches.assign(orders, 0);
  result.totals.assign(orders, 0);
  result.precisions.assign(orders, 0.0);

  for (std::size_t i = 0; i < hypotheses.size(); ++i) {
    const auto& hyp = hypotheses[i];
    const auto& refs = references[i];
    if (refs.empty()) throw MetricError("corpus_bleu: hypothesis " + std::to_string(i) + " has no references");

    result.hyp_length += hyp.size();
    std::size_t closest = refs.front().size();
    for (const auto& ref : refs) {
      auto diff = [&](std::size_t len) { return len > hyp.size() ? len - hyp.size() : hyp.size() - len; };
      if (diff(ref.size()) < diff(closest) || (diff(ref.size()) == diff(closest) && ref.size() < closest))
        closest = ref.size();
    }
    result.ref_length += closest;

    for (std::size_t n = 1; n <= orders; ++n) {
      auto hyp_counts = ngram_counts(hyp, n);
      NgramCounts max_ref;
      for (const auto& ref : refs) {
        for (const auto& [gram, count] : ngram_counts(ref, n)) {
          auto& slot = max_ref[gram];
          slot = std::max(slot, count);
        }
      }
      for (const auto& [gram, count] : hyp_counts) {
        auto it = max_ref.find(gram);
        if (it != max_ref.end()) result.matches[n - 1] += std::min(count, it->second);
      }
      if (hyp.size() >= n) result.totals[n - 1] += hyp.size() - n + 1;
    }
  }

  double log_sum = 0.0;
  bool zero = false;
  for (std::size_t n = 0; n < orders; ++n) {
    if (result.totals[n] == 0 || result.matches[n] == 0) {
      zero = true;
      continue;
    }
    result.precisions[n] = static_cast<double>(result.matches[n]) / static_cast<double>(result.totals[n]);
    log_sum += std::log(result.precisions[n]);
  }
  if (result.hyp_length == 0) {
    result.brevity_penalty = 0.0;
  } else if (result.hyp_length <= result.ref_length) {
    result.brevity_penalty =
        std::exp(1.0 - static_cast<double>(result.ref_length) / static_cast<double>(result.hyp_length));
  } else {
    result.brevity_penalty = 1.0;
  }
  result.bleu = zero ? 0.0 : 100.0 * result.brevity_penalty * std::exp(log_sum / static_cast<double>(orders));
  return result;
}

EvalExample make_eval_example(std::string_view hypothesis, const DataInstance& instance) {
  EvalExample ex;
  ex.hypothesis = tokenize(hypothesis);
  for (const auto& ref : instance.references) ex.references.push_back(tokenize(ref));
  for (const auto& t : instance.triples) {
    for (auto value : {tokenize(t.subject()), tokenize(t.object()), tokenize(predicate_words(t.predicate()))}) {
      if (!value.empty()) ex.table_values.push_back(std::move(value));
    }
  }
  return ex;
}

namespace {

double geometric_mean(const std::vector<double>& values) {
  double log_sum = 0.0;
  for (double v : values) {
    if (v <= 0.0) return 0.0;
    log_sum += std::log(v);
  }
  return std::exp(log_sum / static_cast<double>(values.size()));
}

ParentScore parent_single_reference(const Tokens& hyp, const Tokens& ref, const std::unordered_set<std::string>& table,
                                    const std::vector<Tokens>& table_values, double lambda_weight, int max_n) {
  ParentScore score;
  if (hyp.empty()) return score;

  auto entailment = [&](const Tokens& gram) {
    std::size_t hits = 0;
    for (const auto& tok : gram) hits += table.count(tok);
    return static_cast<double>(hits) / static_cast<double>(gram.size());
  };

  std::vector<double> precisions, recalls;
  for (std::size_t n = 1; n <= static_cast<std::size_t>(max_n); ++n) {
    auto hyp_counts = ngram_counts(hyp, n);
    auto ref_counts = ngram_counts(ref, n);

    double num = 0.0, den = 0.0;
    for (const auto& [gram, count] : hyp_counts) {
      auto it = ref_counts.find(gram);
      double in_ref = it == ref_counts.end() ? 0.0 : std::min(1.0, static_cast<double>(it->second) / static_cast<double>(count));
      num += static_cast<double>(count) * (in_ref + (1.0 - in_ref) * entailment(gram));
      den += static_cast<double>(count);
    }
    if (den > 0.0) precisions.push_back(num / den);

    num = 0.0;
    den = 0.0;
    for (const auto& [gram, count] : ref_counts) {
      auto it = hyp_counts.find(gram);
      double in_hyp = it == hyp_counts.end() ? 0.0 : std::min(1.0, static_cast<double>(it->second) / static_cast<double>(count));
      double w = entailment(gram);
      num += static_cast<double>(count) * w * in_hyp;
      den += static_cast<double>(count) * w;
    }
    if (den > 0.0) recalls.push_back(num / den);
  }

  // Zero values above order 1 are floored at kParentSmoothing; a zero
  // unigram precision keeps the precision at 0.
  for (std::size_t i = 1; i < precisions.size(); ++i)
    if (precisions[i] == 0.0) precisions[i] = kParentSmoothing;
  for (std::size_t i = 1; i < recalls.size(); ++i)
    if (recalls[i] == 0.0) recalls[i] = kParentSmoothing;
  score.precision = precisions.empty() ? 0.0 : geometric_mean(precisions);
  double ref_recall = recalls.empty() ? 1.0 : geometric_mean(recalls);
  if (ref_recall == 0.0) ref_recall = kParentSmoothing;

  std::unordered_set<std::string> hyp_tokens(hyp.begin(), hyp.end());
  double table_recall = 0.0;
  for (const auto& value : table_values) {
    std::size_t hits = 0;
    for (const auto& tok : value) hits += hyp_tokens.count(tok);
    table_recall += static_cast<double>(hits) / static_cast<double>(value.size());
  }
  if (!table_values.empty()) table_recall /= static_cast<double>(table_values.size());
  if (table_recall == 0.0) table_recall = kParentSmoothing;

  score.recall = std::pow(ref_recall, 1.0 - lambda_weight) * std::pow(table_recall, lambda_weight);
  double sum = score.precision + score.recall;
  score.f1 = sum > 0.0 ? 2.0 * score.precision * score.recall / sum : 0.0;
  return score;
}

}  // namespace

ParentScore parent_instance(const EvalExample& example, double lambda_weight, int max_n) {
  if (lambda_weight < 0.0 || lambda_weight > 1.0) throw MetricError("PARENT lambda must lie in [0, 1]");
  if (max_n < 1) throw MetricError("PARENT max_n must be >= 1");
  if (example.references.empty()) throw MetricError("PARENT needs at least one reference");

  std::unordered_set<std::string> table;
  for (const auto& value : example.table_values) table.insert(value.begin(), value.end());

  ParentScore best;
  bool first = true;
  for (const auto& ref : example.references) {
    auto s = parent_single_reference(example.hypothesis, ref, table, example.table_values, lambda_weight, max_n);
    if (first || s.f1 > best.f1) best = s;
    first = false;
  }
  return best;
}

ParentResult parent_scores(const std::vector<EvalExample>& examples, double lambda_weight, int max_n) {
  if (examples.empty()) throw MetricError("parent_scores: no examples");
  ParentResult result;
  result.per_instance.reserve(examples.size());
  for (const auto& ex : examples) {
    auto s = parent_instance(ex, lambda_weight, max_n);
    result.precision += s.precision;
    result.recall += s.recall;
    result.f1 += s.f1;
    result.per_instance.push_back(s);
  }
  auto n = static_cast<double>(examples.size());
  result.precision /= n;
  result.recall /= n;
  result.f1 /= n;
  return result;
}

namespace {

std::string shell_quote(const std::string& s) {
  std::string out = "'";
  for (char c : s) {
    if (c == '\'')
      out += "'\\''";
    else
      out += c;
  }
  return out + "'";
}

void replace_all(std::string& s, std::string_view what, const std::string& with) {
  for (auto pos = s.find(what); pos != std::string::npos; pos = s.find(what, pos + with.size())) s.replace(pos, what.size(), with);
}

}  // namespace

double CommandMetric::score(const std::vector<std::string>& hypotheses,
                            const std::vector<std::vector<std::string>>& references) {
  namespace fs = std::filesystem;
  if (hypotheses.size() != references.size()) throw MetricError(name_ + ": hypothesis/reference count mismatch");
  auto dir = fs::temp_directory_path() / ("d2t-metric-" + std::to_string(std::hash<std::string>{}(name_)) + "-" +
                                          std::to_string(reinterpret_cast<std::uintptr_t>(this)));
  fs::create_directories(dir);
  struct Cleanup {
    fs::path p;
    ~Cleanup() {
      std::error_code ec;
      fs::remove_all(p, ec);
    }
  } cleanup{dir};

  auto one_line = [](std::string s) {
    std::replace(s.begin(), s.end(), '\n', ' ');
    return s;
  };
  {
    std::ofstream hyp(dir / "hyp");
    for (const auto& h : hypotheses) hyp << one_line(h) << '\n';
  }
  std::size_t max_refs = 0;
  for (const auto& r : references) max_refs = std::max(max_refs, r.size());
  std::string ref_list;
  for (std::size_t k = 0; k < max_refs; ++k) {
    auto path = dir / ("ref" + std::to_string(k));
    std::ofstream ref(path);
    for (const auto& r : references) ref << one_line(k < r.size() ? r[k] : (r.empty() ? "" : r.front())) << '\n';
    if (!ref_list.empty()) ref_list += ' ';
    ref_list += shell_quote(path.string());
  }

  std::string command = command_;
  replace_all(command, "{hyp}", shell_quote((dir / "hyp").string()));
  replace_all(command, "{refs}", ref_list);

  FILE* pipe = popen(command.c_str(), "r");
  if (!pipe) throw MetricError(name_ + ": cannot run '" + command + "'");
  std::string output;
  char buf[4096];
  while (std::size_t n = std::fread(buf, 1, sizeof(buf), pipe)) output.append(buf, n);
  int status = pclose(pipe);
  if (status != 0) throw MetricError(name_ + ": command exited with status " + std::to_string(status));

  static const std::regex number(R"([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)");
  std::string last;
  for (auto it = std::sregex_iterator(output.begin(), output.end(), number); it != std::sregex_iterator(); ++it)
    last = it->str();
  if (last.empty()) throw MetricError(name_ + ": no number in command output");
  return std::stod(last);
}

json MetricReport::to_json() const {
  json per = json::array();
  for (const auto& s : per_instance)
    per.push_back({{"id", s.id}, {"precision", s.parent.precision}, {"recall", s.parent.recall}, {"f1", s.parent.f1}});
  return json{{"schema_version", kSchemaVersion},
              {"bleu", bleu},
              {"bleu_detail",
               {{"precisions", bleu_detail.precisions},
                {"brevity_penalty", bleu_detail.brevity_penalty},
                {"hyp_length", bleu_detail.hyp_length},
                {"ref_length", bleu_detail.ref_length}}},
              {"parent", {{"precision", parent_precision}, {"recall", parent_recall}, {"f1", parent_f1}, {"lambda", parent_lambda}}},
              {"counts", {{"instances", instances}, {"hyp_tokens", hyp_tokens}, {"ref_tokens", ref_tokens}}},
              {"per_instance", per},
              {"external", external}};
}

MetricReport evaluate(const std::vector<Hypothesis>& hypotheses, const std::vector<DataInstance>& instances,
                      const EvalConfig& config) {
  std::map<std::string, const DataInstance*> by_id;
  for (const auto& inst : instances) by_id[inst.id] = &inst;
  std::map<std::string, const Hypothesis*> hyp_by_id;
  for (const auto& h : hypotheses) hyp_by_id[h.id] = &h;

  std::vector<std::string> unmatched;
  for (const auto& [id, _] : hyp_by_id)
    if (!by_id.count(id)) unmatched.push_back("hypothesis " + id);
  for (const auto& [id, _] : by_id)
    if (!hyp_by_id.count(id)) unmatched.push_back("instance " + id);
  if (hyp_by_id.size() != hypotheses.size()) unmatched.push_back("duplicate hypothesis ids");
  if (!unmatched.empty()) throw MetricError("hypotheses and instances do not align: " + detail::join(unmatched, ", "));
  if (instances.empty()) throw MetricError("nothing to evaluate");

  // Fixed id order makes every reduction independent of input order.
  std::vector<Tokens> hyp_tokens;
  std::vector<std::vector<Tokens>> ref_tokens;
  std::vector<EvalExample> examples;
  std::vector<std::string> ids;
  std::vector<std::string> raw_hyps;
  std::vector<std::vector<std::string>> raw_refs;
  for (const auto& [id, inst] : by_id) {
    if (inst->references.empty()) throw MetricError("instance " + id + " has no references to evaluate against");
    const auto& text = hyp_by_id.at(id)->text;
    auto ex = make_eval_example(text, *inst);
    hyp_tokens.push_back(ex.hypothesis);
    ref_tokens.push_back(ex.references);
    examples.push_back(std::move(ex));
    ids.push_back(id);
    raw_hyps.push_back(text);
    raw_refs.push_back(inst->references);
  }

  MetricReport report;
  report.bleu_detail = corpus_bleu(hyp_tokens, ref_tokens, config.max_n);
  report.bleu = report.bleu_detail.bleu;
  auto parent = parent_scores(examples, config.parent_lambda, config.max_n);
  report.parent_precision = parent.precision;
  report.parent_recall = parent.recall;
  report.parent_f1 = parent.f1;
  report.parent_lambda = config.parent_lambda;
  for (std::size_t i = 0; i < ids.size(); ++i) report.per_instance.push_back({ids[i], parent.per_instance[i]});
  report.instances = ids.size();
  report.hyp_tokens = report.bleu_detail.hyp_length;
  report.ref_tokens = report.bleu_detail.ref_length;
  for (const auto& metric : config.external) report.external[metric->name()] = metric->score(raw_hyps, raw_refs);
  return report;
}

std::vector<Hypothesis> read_hypotheses_jsonl(std::string_view jsonl) {
  std::vector<Hypothesis> out;
  std::size_t line_no = 0, start = 0;
  while (start < jsonl.size()) {
    auto end = jsonl.find('\n', start);
    if (end == std::string_view::npos) end = jsonl.size();
    auto line = detail::trim(jsonl.substr(start, end - start));
    start = end + 1;
    ++line_no;
    if (line.empty()) continue;
    try {
      auto j = json::parse(line);
      out.push_back({j.at("id").get<std::string>(), j.at("text").get<std::string>()});
    } catch (const json::exception& e) {
      throw ParseError(std::string("bad hypothesis record: ") + e.what(), line_no);
    }
  }
  return out;
}

std::vector<Hypothesis> read_hypotheses_text(std::string_view text, const std::vector<DataInstance>& instances) {
  std::vector<std::string> lines = detail::split(text, '\n');
  if (!lines.empty() && lines.back().empty()) lines.pop_back();
  if (lines.size() != instances.size())
    throw MetricError("hypothesis file has " + std::to_string(lines.size()) + " lines for " +
                      std::to_string(instances.size()) + " instances");
  std::vector<Hypothesis> out;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    auto line = lines[i];
    if (!line.empty() && line.back() == '\r') line.pop_back();
    out.push_back({instances[i].id, line});
  }
  return out;
}

std::string write_hypotheses_jsonl(const std::vector<Hypothesis>& hypotheses) {
  std::string out;
  for (const auto& h : hypotheses) {
    nlohmann::ordered_json j;
    j["id"] = h.id;
    j["text"] = h.text;
    out += j.dump() + "\n";
  }
  return out;
}

}  // namespace d2t
