#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace d2t {

inline constexpr std::string_view kSubjectSlot = "<subject>";
inline constexpr std::string_view kObjectSlot = "<object>";

// Underscores become spaces, whitespace runs collapse to one space, the
// value is trimmed and enclosing straight double quotes are stripped.
// Throws FieldError when nothing is left.
std::string normalize_field(std::string_view raw);

// "birthPlace" -> "birth place", "active_Years_Start_Date" ->
// "active years start date". Runs of two or more capitals ("FASTEST", "HTTP")
// keep their case.
std::string predicate_words(std::string_view predicate);

// One subject/predicate/object fact. Fields are non-empty, trimmed, contain
// no newline and never contain a slot literal.
class Triple {
 public:
  // Validates the three fields as given; does not normalize.
  Triple(std::string subject, std::string predicate, std::string object);

  // Runs normalize_field over the raw values first.
  static Triple from_raw(std::string_view subject, std::string_view predicate,
                         std::string_view object);

  const std::string& subject() const { return subject_; }
  const std::string& predicate() const { return predicate_; }
  const std::string& object() const { return object_; }

  friend bool operator==(const Triple&, const Triple&) = default;

 private:
  std::string subject_;
  std::string predicate_;
  std::string object_;
};

enum class Split { kTrain, kValidation, kTest, kTestSeen, kTestUnseen };

std::string_view to_string(Split split);
// Accepts the canonical names plus "dev" and "val" for validation.
Split split_from_string(std::string_view name);

struct DataInstance {
  std::string id;
  std::vector<Triple> triples;
  std::vector<std::string> references;
  std::optional<std::string> category;
  Split split = Split::kTest;

  friend bool operator==(const DataInstance&, const DataInstance&) = default;
};

// Throws CorpusError if the instance has no triples or an empty reference.
void validate(const DataInstance& instance);

enum class Provenance { kLlm, kManual, kFallback };

std::string_view to_string(Provenance provenance);
Provenance provenance_from_string(std::string_view name);

// A per-predicate sentence pattern with exactly one <subject> and one
// <object> slot.
struct Template {
  std::string predicate;
  std::string pattern;
  Triple source_triple;
  Provenance provenance = Provenance::kFallback;

  friend bool operator==(const Template&, const Template&) = default;
};

// Number of non-overlapping occurrences of needle in haystack.
std::size_t count_occurrences(std::string_view haystack, std::string_view needle);

// Throws TemplateError unless the pattern holds each slot exactly once.
void validate_pattern(std::string_view pattern);

struct DisambiguatedSentence {
  std::size_t triple_index = 0;
  std::string text;
  Provenance template_provenance = Provenance::kFallback;

  friend bool operator==(const DisambiguatedSentence&, const DisambiguatedSentence&) = default;
};

struct DecodeConfig {
  int beam_width = 5;
  int max_new_tokens = 256;
  std::optional<std::string> stop_sequence;
  double temperature = 0.0;

  friend bool operator==(const DecodeConfig&, const DecodeConfig&) = default;
};

// Throws ConfigError on beam_width < 1, max_new_tokens < 1 or a negative
// temperature.
void validate(const DecodeConfig& decode);

}  // namespace d2t
