#include "d2t/disambiguation.hpp"

#include <atomic>
#include <ctime>
#include <optional>
#include <variant>

#include "d2t/error.hpp"
#include "text_util.hpp"

namespace d2t {

std::string_view default_prompt_prefix() {
  static constexpr std::string_view kPrefix =
      "Table: Michael | birth Place | USA\n"
      "Text: Michael was born in the USA.\n"
      "\n"
      "Table: First Clearing | location | On NYS 52 1 Mi. Youngsville\n"
      "Text: First Clearing is located at On NYS 52 1 Mi. Youngsville.\n"
      "\n"
      "Table: Abilene Regional Airport | city Served | Abilene Texas\n"
      "Text: Abilene Regional Airport serves Abilene Texas.\n"
      "\n"
      "Table: Alfred Moore Scales | active Years Start Date | 1875-03-04\n"
      "Text: Alfred Moore Scales started to be active on 1875-03-04.";
  return kPrefix;
}

std::string prompt_query(const Triple& triple) {
  for (const auto* field : {&triple.subject(), &triple.predicate(), &triple.object()}) {
    if (field->find('|') != std::string::npos)
      throw FieldError("triple field contains '|' and cannot be written as a table row: '" + *field + "'");
  }
  return "Table: " + triple.subject() + " | " + triple.predicate() + " | " + triple.object() + "\nText:";
}

std::string build_prompt(const Triple& triple, const PromptSpec& spec) {
  auto query = prompt_query(triple);
  if (spec.prefix.empty()) return query;
  return spec.prefix + "\n\n" + query;
}

std::string clean_completion(std::string_view raw, std::string_view stop_sequence) {
  // Leading whitespace goes first: the model answers " Michael was ..." and
  // may open with a newline before any text.
  raw = detail::trim_left(raw);
  if (!stop_sequence.empty()) {
    if (auto pos = raw.find(stop_sequence); pos != std::string_view::npos) raw = raw.substr(0, pos);
  }
  return std::string(detail::trim(raw));
}

namespace {

struct Span {
  std::size_t begin = 0;
  std::size_t end = 0;
  bool overlaps(const Span& other) const { return begin < other.end && other.begin < end; }
};

std::optional<Span> find_field(std::string_view sentence_lower, std::string_view field,
                               const std::optional<Span>& blocked) {
  std::string needle = detail::lower(field);
  bool check_left = detail::is_alnum(needle.front());
  bool check_right = detail::is_alnum(needle.back());
  for (auto pos = sentence_lower.find(needle); pos != std::string_view::npos;
       pos = sentence_lower.find(needle, pos + 1)) {
    Span span{pos, pos + needle.size()};
    if (check_left && pos > 0 && detail::is_alnum(sentence_lower[pos - 1])) continue;
    if (check_right && span.end < sentence_lower.size() && detail::is_alnum(sentence_lower[span.end])) continue;
    if (blocked && span.overlaps(*blocked)) continue;
    return span;
  }
  return std::nullopt;
}

bool has_terminal_punctuation(std::string_view s) {
  return !s.empty() && (s.back() == '.' || s.back() == '!' || s.back() == '?');
}

}  // namespace

Template mine_template(const Triple& triple, std::string_view llm_sentence) {
  std::string sentence(detail::trim(llm_sentence));
  if (sentence.empty()) throw TemplateExtractionFailure("LLM sentence is empty", std::string(llm_sentence));
  if (sentence.find(kSubjectSlot) != std::string::npos || sentence.find(kObjectSlot) != std::string::npos)
    throw TemplateExtractionFailure("LLM sentence already contains a slot literal", sentence);

  const std::string lowered = detail::lower(sentence);
  const bool subject_first = triple.subject().size() >= triple.object().size();
  const std::string& first_field = subject_first ? triple.subject() : triple.object();
  const std::string& second_field = subject_first ? triple.object() : triple.subject();

  auto first = find_field(lowered, first_field, std::nullopt);
  if (!first) {
    throw TemplateExtractionFailure(
        std::string(subject_first ? "subject" : "object") + " '" + first_field + "' not found in LLM sentence", sentence);
  }
  auto second = find_field(lowered, second_field, first);
  if (!second) {
    throw TemplateExtractionFailure(std::string(subject_first ? "object" : "subject") + " '" + second_field +
                                        "' not found apart from the " + (subject_first ? "subject" : "object"),
                                    sentence);
  }

  Span subject_span = subject_first ? *first : *second;
  Span object_span = subject_first ? *second : *first;
  bool subject_leads = subject_span.begin < object_span.begin;
  const Span& lead = subject_leads ? subject_span : object_span;
  const Span& tail = subject_leads ? object_span : subject_span;

  std::string pattern;
  pattern.reserve(sentence.size());
  pattern.append(sentence, 0, lead.begin);
  pattern.append(subject_leads ? kSubjectSlot : kObjectSlot);
  pattern.append(sentence, lead.end, tail.begin - lead.end);
  pattern.append(subject_leads ? kObjectSlot : kSubjectSlot);
  pattern.append(sentence, tail.end);
  if (!has_terminal_punctuation(pattern)) pattern += '.';

  return Template{triple.predicate(), std::move(pattern), triple, Provenance::kLlm};
}

std::string apply_template(const Template& tmpl, const Triple& triple) {
  if (tmpl.predicate != triple.predicate()) {
    throw TemplateError("template for predicate '" + tmpl.predicate + "' applied to a triple with predicate '" +
                        triple.predicate() + "'");
  }
  auto s = tmpl.pattern.find(kSubjectSlot);
  auto o = tmpl.pattern.find(kObjectSlot);
  if (s == std::string::npos || o == std::string::npos) validate_pattern(tmpl.pattern);

  bool subject_leads = s < o;
  auto lead = subject_leads ? s : o;
  auto tail = subject_leads ? o : s;
  auto lead_len = (subject_leads ? kSubjectSlot : kObjectSlot).size();
  auto tail_len = (subject_leads ? kObjectSlot : kSubjectSlot).size();

  std::string out;
  out.reserve(tmpl.pattern.size() + triple.subject().size() + triple.object().size());
  out.append(tmpl.pattern, 0, lead);
  out.append(subject_leads ? triple.subject() : triple.object());
  out.append(tmpl.pattern, lead + lead_len, tail - lead - lead_len);
  out.append(subject_leads ? triple.object() : triple.subject());
  out.append(tmpl.pattern, tail + tail_len);
  while (!out.empty() && detail::is_space(out.back())) out.pop_back();
  if (!has_terminal_punctuation(out)) out += '.';
  return out;
}

Template fallback_template(const Triple& sample) {
  return Template{sample.predicate(),
                  std::string(kSubjectSlot) + " " + predicate_words(sample.predicate()) + " " + std::string(kObjectSlot),
                  sample, Provenance::kFallback};
}

Template fallback_template(std::string_view predicate) {
  return fallback_template(Triple("subject", std::string(predicate), "object"));
}

std::string utc_timestamp() {
  auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

EnsureStats ensure_templates(const std::vector<DataInstance>& instances, TemplateStore& store,
                             CompletionBackend* backend, const PromptSpec& spec, const EnsureOptions& options) {
  auto clock = options.clock ? options.clock : utc_timestamp;

  // First triple of every missing predicate, in corpus order.
  std::vector<const Triple*> samples;
  {
    std::map<std::string, bool> queued;
    for (const auto& inst : instances) {
      for (const auto& t : inst.triples) {
        if (store.contains(t.predicate()) || queued.count(t.predicate())) continue;
        queued[t.predicate()] = true;
        samples.push_back(&t);
      }
    }
  }

  EnsureStats stats;
  stats.missing_predicates = samples.size();
  // Either a mined template or the warning that explains the fallback.
  std::vector<std::variant<std::string, Template>> results(samples.size());
  std::atomic<std::size_t> queries{0};

  if (backend == nullptr) {
    for (std::size_t i = 0; i < samples.size(); ++i)
      results[i] = "predicate '" + samples[i]->predicate() + "': offline, using fallback template";
  } else {
    run_bounded(samples.size(), options.parallelism, [&](std::size_t i) {
      const Triple& triple = *samples[i];
      std::string prompt;
      try {
        prompt = build_prompt(triple, spec);
      } catch (const Error& e) {
        results[i] = "predicate '" + triple.predicate() + "': " + e.what();
        return;
      }
      std::string sentence;
      try {
        ++queries;
        sentence = backend->complete(prompt, spec);
      } catch (const BackendError& e) {
        results[i] = "predicate '" + triple.predicate() + "': backend failed: " + e.what();
        return;
      }
      try {
        results[i] = mine_template(triple, sentence);
      } catch (const TemplateExtractionFailure& e) {
        results[i] = "predicate '" + triple.predicate() + "': " + e.what() + " (sentence: '" + e.sentence() + "')";
      }
    });
  }
  stats.backend_queries = queries.load();

  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (auto* mined = std::get_if<Template>(&results[i])) {
      store.insert(std::move(*mined), clock());
      ++stats.mined;
    } else {
      store.insert(fallback_template(*samples[i]), clock());
      ++stats.fallbacks;
      stats.warnings.push_back(std::get<std::string>(results[i]));
    }
  }
  return stats;
}

std::vector<DisambiguatedSentence> disambiguate(const DataInstance& instance, const TemplateStore& store) {
  std::vector<DisambiguatedSentence> out;
  out.reserve(instance.triples.size());
  for (std::size_t i = 0; i < instance.triples.size(); ++i) {
    const auto& triple = instance.triples[i];
    const Template* tmpl = store.find(triple.predicate());
    if (!tmpl) throw TemplateError("no template for predicate '" + triple.predicate() + "'");
    out.push_back({i, apply_template(*tmpl, triple), tmpl->provenance});
  }
  return out;
}

}  // namespace d2t
