#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "d2t/triple.hpp"

namespace d2t {

enum class CorpusFormat { kWebnlgXml, kDartJson, kE2eCsv, kCanonicalJsonl };

std::string_view to_string(CorpusFormat format);
// Accepts "webnlg", "dart", "e2e", "jsonl" and the long enum names.
CorpusFormat corpus_format_from_string(std::string_view name);

struct CorpusManifest {
  std::string name;
  std::map<std::string, std::string> splits;  // split name -> file path
  CorpusFormat format = CorpusFormat::kCanonicalJsonl;
};

struct ParseOptions {
  Split split = Split::kTest;
  // Prepended to every generated or source id.
  std::string id_prefix;
  // The whole file fails when bad records exceed this fraction of all records.
  double max_bad_fraction = 0.01;
};

struct ParseResult {
  std::vector<DataInstance> instances;
  std::size_t source_records = 0;
  std::size_t skipped = 0;  // dropped on purpose, e.g. empty DART triplesets
  std::size_t merged_rows = 0;  // E2E rows folded into an earlier instance
  std::vector<std::string> errors;    // one per bad record; those records are dropped
  std::vector<std::string> warnings;  // records kept with a caveat
};

// WebNLG challenge XML: one instance per <entry>, triples from
// <modifiedtripleset>, references from every <lex>.
ParseResult parse_webnlg(std::string_view xml, const ParseOptions& options = {});

// DART release JSON array. Ids are "<prefix><index>" and the first
// annotation source is kept as the category.
ParseResult parse_dart(std::string_view json, const ParseOptions& options = {});

// E2E CSV with an "mr" and optional "ref" column. Rows with an identical MR
// are merged into one instance.
ParseResult parse_e2e(std::string_view csv, const ParseOptions& options = {});

ParseResult parse_corpus(CorpusFormat format, std::string_view bytes, const ParseOptions& options = {});

// One JSON object per line, keys in the order id, triples, references,
// category, split.
std::string write_canonical(const std::vector<DataInstance>& instances);
std::vector<DataInstance> read_canonical(std::string_view jsonl);

std::string read_file(const std::string& path);
// Writes through a temporary file and renames it into place.
void write_file_atomic(const std::string& path, std::string_view bytes);

// Loads every split of a manifest, parsing with the manifest's format.
std::map<std::string, std::vector<DataInstance>> load_manifest(const CorpusManifest& manifest);

std::set<std::string> predicate_set(const std::vector<DataInstance>& instances);

// Test instances whose every predicate is absent from train and validation.
// Comparison is case-sensitive on normalized predicates.
std::vector<DataInstance> build_unseen_predicate_split(const std::vector<DataInstance>& train,
                                                       const std::vector<DataInstance>& validation,
                                                       const std::vector<DataInstance>& test);

// Uniform sample of k instances without replacement. Input is sorted by id
// before sampling and the sample is returned in id order, so the result
// depends only on the id set, k and seed.
std::vector<DataInstance> sample_few_shot(const std::vector<DataInstance>& train, std::size_t k,
                                          std::uint64_t seed);

// Drops instances whose category starts with any of the given source names
// (case-insensitive). Used to remove DART records derived from WebNLG/E2E
// before out-of-domain evaluation.
std::vector<DataInstance> remove_sources(const std::vector<DataInstance>& instances,
                                         const std::vector<std::string>& sources);

// Copy with references cleared; generation stages only ever see these.
std::vector<DataInstance> strip_references(const std::vector<DataInstance>& instances);

}  // namespace d2t
