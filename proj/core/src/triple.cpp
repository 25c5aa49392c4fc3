#include "d2t/triple.hpp"

#include <algorithm>

#include "d2t/error.hpp"
#include "text_util.hpp"

namespace d2t {

using detail::is_space;

std::string normalize_field(std::string_view raw) {
  std::string value;
  value.reserve(raw.size());
  bool pending_space = false;
  for (char c : raw) {
    if (c == '_' || is_space(c)) {
      pending_space = true;
      continue;
    }
    if (pending_space && !value.empty()) value += ' ';
    pending_space = false;
    value += c;
  }
  // Strip enclosing quotes until stable so the function stays idempotent on
  // values like "\"\"x\"\"" and "\" x \"".
  for (;;) {
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') {
      value = std::string(detail::trim(std::string_view(value).substr(1, value.size() - 2)));
      continue;
    }
    break;
  }
  if (value.empty()) throw FieldError("field is empty after normalization: '" + std::string(raw) + "'");
  return value;
}

namespace {

std::vector<std::string> camel_words(std::string_view chunk) {
  std::vector<std::string> words;
  std::string current;
  for (std::size_t i = 0; i < chunk.size(); ++i) {
    char c = chunk[i];
    if (!current.empty() && detail::is_upper(c)) {
      char prev = chunk[i - 1];
      bool next_lower = i + 1 < chunk.size() && detail::is_lower(chunk[i + 1]);
      // birthPlace | HTTPServer -> HTTP Server
      if (detail::is_lower(prev) || detail::is_digit(prev) || (detail::is_upper(prev) && next_lower)) {
        words.push_back(std::move(current));
        current.clear();
      }
    }
    current += c;
  }
  if (!current.empty()) words.push_back(std::move(current));
  return words;
}

bool is_acronym(std::string_view word) {
  int upper = 0;
  for (char c : word) {
    if (detail::is_lower(c)) return false;
    if (detail::is_upper(c)) ++upper;
  }
  return upper >= 2;
}

}  // namespace

std::string predicate_words(std::string_view predicate) {
  std::vector<std::string> words;
  std::string chunk;
  auto flush = [&] {
    for (auto& w : camel_words(chunk)) words.push_back(is_acronym(w) ? w : detail::lower(w));
    chunk.clear();
  };
  for (char c : predicate) {
    if (c == '_' || is_space(c)) {
      flush();
    } else {
      chunk += c;
    }
  }
  flush();
  if (words.empty()) return std::string(predicate);
  return detail::join(words, " ");
}

namespace {

void check_field(const std::string& value, const char* name) {
  if (detail::trim(value).empty()) throw FieldError(std::string("triple ") + name + " is empty");
  if (detail::trim(value).size() != value.size())
    throw FieldError(std::string("triple ") + name + " has surrounding whitespace: '" + value + "'");
  if (value.find_first_of("\r\n") != std::string::npos)
    throw FieldError(std::string("triple ") + name + " contains a newline");
  if (value.find(kSubjectSlot) != std::string::npos || value.find(kObjectSlot) != std::string::npos)
    throw FieldError(std::string("triple ") + name + " contains a slot literal: '" + value + "'");
}

}  // namespace

Triple::Triple(std::string subject, std::string predicate, std::string object)
    : subject_(std::move(subject)), predicate_(std::move(predicate)), object_(std::move(object)) {
  check_field(subject_, "subject");
  check_field(predicate_, "predicate");
  check_field(object_, "object");
}

Triple Triple::from_raw(std::string_view subject, std::string_view predicate, std::string_view object) {
  return Triple(normalize_field(subject), normalize_field(predicate), normalize_field(object));
}

std::string_view to_string(Split split) {
  switch (split) {
    case Split::kTrain: return "train";
    case Split::kValidation: return "validation";
    case Split::kTest: return "test";
    case Split::kTestSeen: return "test_seen";
    case Split::kTestUnseen: return "test_unseen";
  }
  return "test";
}

Split split_from_string(std::string_view name) {
  if (name == "train") return Split::kTrain;
  if (name == "validation" || name == "dev" || name == "val") return Split::kValidation;
  if (name == "test") return Split::kTest;
  if (name == "test_seen") return Split::kTestSeen;
  if (name == "test_unseen") return Split::kTestUnseen;
  throw ConfigError("unknown split name '" + std::string(name) + "'");
}

void validate(const DataInstance& instance) {
  if (instance.triples.empty()) throw CorpusError("instance '" + instance.id + "' has no triples");
  for (const auto& ref : instance.references) {
    if (detail::trim(ref).empty()) throw CorpusError("instance '" + instance.id + "' has an empty reference");
  }
}

std::string_view to_string(Provenance provenance) {
  switch (provenance) {
    case Provenance::kLlm: return "llm";
    case Provenance::kManual: return "manual";
    case Provenance::kFallback: return "fallback";
  }
  return "fallback";
}

Provenance provenance_from_string(std::string_view name) {
  if (name == "llm") return Provenance::kLlm;
  if (name == "manual") return Provenance::kManual;
  if (name == "fallback") return Provenance::kFallback;
  throw TemplateError("unknown template provenance '" + std::string(name) + "'");
}

std::size_t count_occurrences(std::string_view haystack, std::string_view needle) {
  if (needle.empty()) return 0;
  std::size_t count = 0;
  for (auto pos = haystack.find(needle); pos != std::string_view::npos;
       pos = haystack.find(needle, pos + needle.size())) {
    ++count;
  }
  return count;
}

void validate_pattern(std::string_view pattern) {
  auto subjects = count_occurrences(pattern, kSubjectSlot);
  auto objects = count_occurrences(pattern, kObjectSlot);
  if (subjects != 1 || objects != 1) {
    throw TemplateError("pattern must contain exactly one <subject> and one <object> (found " +
                        std::to_string(subjects) + " and " + std::to_string(objects) + "): '" +
                        std::string(pattern) + "'");
  }
}

void validate(const DecodeConfig& decode) {
  if (decode.beam_width < 1) throw ConfigError("beam_width must be >= 1");
  if (decode.max_new_tokens < 1) throw ConfigError("max_new_tokens must be >= 1");
  if (decode.temperature < 0.0) throw ConfigError("temperature must be non-negative");
}

}  // namespace d2t
