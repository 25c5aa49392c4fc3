#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "d2t/backend.hpp"
#include "d2t/prompt.hpp"
#include "d2t/triple.hpp"

namespace d2t {

// Finds the subject and the object in an LLM sentence and replaces them with
// slots. The longer field is located first (leftmost match, ASCII
// case-insensitive, on word boundaries); the other field takes its leftmost
// occurrence that does not overlap the first. Throws
// TemplateExtractionFailure when either field is missing.
Template mine_template(const Triple& triple, std::string_view llm_sentence);

// Fills the slots and makes sure the sentence ends in '.', '!' or '?'
// (appending '.' otherwise). Throws TemplateError on a predicate mismatch.
std::string apply_template(const Template& tmpl, const Triple& triple);

// "<subject> {predicate words} <object>". The sample triple becomes the
// template's source triple; the predicate-only overload uses a stand-in
// <subject, predicate, object> triple.
Template fallback_template(const Triple& sample);
Template fallback_template(std::string_view predicate);

class TemplateStore {
 public:
  struct Entry {
    Template tmpl;
    std::string created_at;  // ISO-8601 UTC
    friend bool operator==(const Entry&, const Entry&) = default;
  };

  bool contains(const std::string& predicate) const { return entries_.count(predicate) > 0; }
  const Template* find(const std::string& predicate) const;
  // Throws TemplateError if the predicate already has a template or the
  // pattern breaks the slot invariant.
  void insert(Template tmpl, std::string created_at);
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  const std::map<std::string, Entry>& entries() const { return entries_; }

  std::map<std::string, std::size_t> provenance_counts() const;

  // {predicate: {pattern, source_triple, provenance, created_at}} with sorted
  // keys.
  nlohmann::json to_json() const;
  static TemplateStore from_json(const nlohmann::json& j);

  // SHA-256 over the store without timestamps.
  std::string content_hash() const;

  friend bool operator==(const TemplateStore&, const TemplateStore&) = default;

 private:
  std::map<std::string, Entry> entries_;
};

TemplateStore load_template_store(const std::string& path);
// Missing file -> empty store.
TemplateStore load_template_store_or_empty(const std::string& path);
void save_template_store(const TemplateStore& store, const std::string& path);

// Flat JSON object {predicate: pattern}. Manual templates were never mined,
// so their source triple is the stand-in <subject, predicate, object>.
// Throws TemplateError listing every bad entry or duplicated key.
TemplateStore parse_manual_templates(std::string_view json_text);
TemplateStore load_manual_templates(const std::string& path);

struct EnsureOptions {
  int parallelism = 1;
  // Supplies created_at; defaults to the current UTC time.
  std::function<std::string()> clock;
};

struct EnsureStats {
  std::size_t missing_predicates = 0;
  std::size_t backend_queries = 0;
  std::size_t mined = 0;
  std::size_t fallbacks = 0;
  std::vector<std::string> warnings;
};

// For every predicate in corpus order that has no template: take its first
// triple, query the backend once, mine a template and insert it. Offline
// (backend == nullptr), backend failures and extraction failures all insert
// a fallback template and add a warning.
EnsureStats ensure_templates(const std::vector<DataInstance>& instances, TemplateStore& store,
                             CompletionBackend* backend, const PromptSpec& spec = {},
                             const EnsureOptions& options = {});

// One sentence per triple, in triple order. Throws TemplateError naming the
// predicate when the store lacks one.
std::vector<DisambiguatedSentence> disambiguate(const DataInstance& instance, const TemplateStore& store);

std::string utc_timestamp();

}  // namespace d2t
