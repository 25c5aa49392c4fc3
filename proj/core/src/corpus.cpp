#include "d2t/corpus.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>
#include <nlohmann/json.hpp>

#include "csv.hpp"
#include "d2t/error.hpp"
#include "text_util.hpp"

namespace d2t {

namespace pt = boost::property_tree;
using nlohmann::json;
using nlohmann::ordered_json;

std::string_view to_string(CorpusFormat format) {
  switch (format) {
    case CorpusFormat::kWebnlgXml: return "webnlg_xml";
    case CorpusFormat::kDartJson: return "dart_json";
    case CorpusFormat::kE2eCsv: return "e2e_csv";
    case CorpusFormat::kCanonicalJsonl: return "canonical_jsonl";
  }
  return "canonical_jsonl";
}

CorpusFormat corpus_format_from_string(std::string_view name) {
  if (name == "webnlg" || name == "webnlg_xml") return CorpusFormat::kWebnlgXml;
  if (name == "dart" || name == "dart_json") return CorpusFormat::kDartJson;
  if (name == "e2e" || name == "e2e_csv") return CorpusFormat::kE2eCsv;
  if (name == "jsonl" || name == "canonical" || name == "canonical_jsonl") return CorpusFormat::kCanonicalJsonl;
  throw ConfigError("unknown corpus format '" + std::string(name) + "'");
}

namespace {

std::size_t line_of_offset(std::string_view text, std::size_t offset) {
  offset = std::min(offset, text.size());
  return 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(offset), '\n'));
}

void enforce_error_budget(const ParseResult& result, const ParseOptions& options, std::string_view what) {
  if (result.errors.empty()) return;
  double bad = static_cast<double>(result.errors.size());
  double total = static_cast<double>(std::max<std::size_t>(result.source_records, 1));
  if (bad / total > options.max_bad_fraction) {
    std::ostringstream msg;
    msg << what << ": " << result.errors.size() << " of " << result.source_records
        << " records are malformed (budget " << options.max_bad_fraction * 100 << "%); first: "
        << result.errors.front();
    throw CorpusError(msg.str(), result.errors);
  }
}

std::optional<std::string> attribute(const pt::ptree& node, const std::string& name) {
  if (auto attrs = node.get_child_optional("<xmlattr>")) {
    if (auto v = attrs->get_optional<std::string>(name)) return *v;
  }
  return std::nullopt;
}

Triple parse_pipe_triple(std::string_view text) {
  auto parts = detail::split(text, '|');
  if (parts.size() != 3) {
    throw FieldError("triple '" + std::string(detail::trim(text)) + "' has " + std::to_string(parts.size() - 1) +
                     " pipe delimiters, expected 2");
  }
  return Triple::from_raw(parts[0], parts[1], parts[2]);
}

// <lex> either holds the text directly or, in the enriched releases, a
// <text> child next to <template>/<references>.
std::string lex_text(const pt::ptree& lex) {
  if (auto text = lex.get_child_optional("text")) return text->data();
  return lex.data();
}

}  // namespace

ParseResult parse_webnlg(std::string_view xml, const ParseOptions& options) {
  pt::ptree tree;
  {
    std::istringstream in{std::string(xml)};
    try {
      pt::read_xml(in, tree);
    } catch (const pt::xml_parser_error& e) {
      throw ParseError("malformed WebNLG XML: " + e.message(), e.line());
    }
  }
  auto entries = tree.get_child_optional("benchmark.entries");
  if (!entries) throw ParseError("WebNLG XML has no <benchmark><entries> element");

  ParseResult result;
  std::size_t index = 0;
  for (const auto& [tag, entry] : *entries) {
    if (tag != "entry") continue;
    ++result.source_records;
    std::string eid = attribute(entry, "eid").value_or("entry" + std::to_string(index));
    ++index;
    DataInstance instance;
    instance.id = options.id_prefix + eid;
    instance.category = attribute(entry, "category");
    instance.split = options.split;
    try {
      auto tripleset = entry.get_child_optional("modifiedtripleset");
      if (!tripleset) throw FieldError("missing <modifiedtripleset>");
      for (const auto& [ttag, mtriple] : *tripleset) {
        if (ttag == "mtriple") instance.triples.push_back(parse_pipe_triple(mtriple.data()));
      }
      if (instance.triples.empty()) throw FieldError("empty <modifiedtripleset>");
    } catch (const Error& e) {
      result.errors.push_back("entry " + instance.id + ": " + e.what());
      continue;
    }
    for (const auto& [ltag, lex] : entry) {
      if (ltag != "lex") continue;
      const std::string raw = lex_text(lex);
      auto text = detail::trim(raw);
      if (text.empty()) {
        result.warnings.push_back("entry " + instance.id + ": empty <lex> dropped");
        continue;
      }
      instance.references.emplace_back(text);
    }
    result.instances.push_back(std::move(instance));
  }
  enforce_error_budget(result, options, "WebNLG");
  return result;
}

ParseResult parse_dart(std::string_view bytes, const ParseOptions& options) {
  json doc;
  try {
    doc = json::parse(bytes);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("malformed DART JSON: ") + e.what(), line_of_offset(bytes, e.byte));
  }
  if (!doc.is_array()) throw ParseError("DART JSON must be a top-level array");

  ParseResult result;
  for (std::size_t i = 0; i < doc.size(); ++i) {
    ++result.source_records;
    const auto& record = doc[i];
    std::string id = options.id_prefix + "dart-" + std::to_string(i);
    try {
      if (!record.is_object() || !record.contains("tripleset")) throw FieldError("record has no tripleset");
      const auto& tripleset = record.at("tripleset");
      if (!tripleset.is_array()) throw FieldError("tripleset is not an array");
      if (tripleset.empty()) {
        ++result.skipped;
        result.warnings.push_back("record " + id + ": empty tripleset skipped");
        continue;
      }
      DataInstance instance;
      instance.id = id;
      instance.split = options.split;
      for (const auto& t : tripleset) {
        if (!t.is_array() || t.size() != 3)
          throw FieldError("triple has " + std::to_string(t.is_array() ? t.size() : 0) + " elements, expected 3");
        instance.triples.push_back(
            Triple::from_raw(t[0].get<std::string>(), t[1].get<std::string>(), t[2].get<std::string>()));
      }
      if (record.contains("annotations")) {
        for (const auto& a : record.at("annotations")) {
          if (!instance.category && a.contains("source")) instance.category = a.at("source").get<std::string>();
          const std::string raw = a.value("text", std::string());
          auto text = detail::trim(raw);
          if (text.empty()) {
            result.warnings.push_back("record " + id + ": empty annotation dropped");
            continue;
          }
          instance.references.emplace_back(text);
        }
      }
      result.instances.push_back(std::move(instance));
    } catch (const Error& e) {
      result.errors.push_back("record " + id + ": " + e.what());
    } catch (const json::exception& e) {
      result.errors.push_back("record " + id + ": " + e.what());
    }
  }
  enforce_error_budget(result, options, "DART");
  return result;
}

namespace {

struct MrAttribute {
  std::string name;
  std::string value;
};

// "name[The Vaults], eatType[pub]" -> {(name, The Vaults), (eatType, pub)}
std::vector<MrAttribute> parse_mr(std::string_view mr) {
  std::vector<MrAttribute> attrs;
  std::size_t i = 0;
  while (true) {
    while (i < mr.size() && (detail::is_space(mr[i]) || mr[i] == ',')) ++i;
    if (i >= mr.size()) break;
    auto open = mr.find('[', i);
    auto bad_close = mr.find(']', i);
    if (open == std::string_view::npos || (bad_close != std::string_view::npos && bad_close < open))
      throw FieldError("unbalanced brackets in MR '" + std::string(mr) + "'");
    auto close = mr.find(']', open + 1);
    auto nested = mr.find('[', open + 1);
    if (close == std::string_view::npos || (nested != std::string_view::npos && nested < close))
      throw FieldError("unbalanced brackets in MR '" + std::string(mr) + "'");
    attrs.push_back({std::string(detail::trim(mr.substr(i, open - i))),
                     std::string(mr.substr(open + 1, close - open - 1))});
    i = close + 1;
    while (i < mr.size() && detail::is_space(mr[i])) ++i;
    if (i < mr.size() && mr[i] != ',') throw FieldError("expected ',' after attribute in MR '" + std::string(mr) + "'");
  }
  return attrs;
}

}  // namespace

ParseResult parse_e2e(std::string_view csv, const ParseOptions& options) {
  auto rows = detail::read_csv(csv);
  if (rows.empty()) return {};
  const auto& header = rows.front().fields;
  std::optional<std::size_t> mr_col, ref_col;
  for (std::size_t c = 0; c < header.size(); ++c) {
    auto name = detail::lower(detail::trim(header[c]));
    if (name == "mr" || name == "meaning_representation") mr_col = c;
    if (name == "ref" || name == "human_reference") ref_col = c;
  }
  if (!mr_col) throw ParseError("E2E CSV header has no 'mr' column", rows.front().line);

  ParseResult result;
  std::unordered_map<std::string, std::size_t> by_mr;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    ++result.source_records;
    const auto& row = rows[r];
    std::string where = "row at line " + std::to_string(row.line);
    if (row.fields.size() <= *mr_col) {
      result.errors.push_back(where + ": missing mr field");
      continue;
    }
    std::string mr(detail::trim(row.fields[*mr_col]));
    std::string ref = ref_col && row.fields.size() > *ref_col ? std::string(detail::trim(row.fields[*ref_col])) : "";

    if (auto it = by_mr.find(mr); it != by_mr.end()) {
      if (!ref.empty()) result.instances[it->second].references.push_back(ref);
      ++result.merged_rows;
      continue;
    }
    DataInstance instance;
    instance.id = options.id_prefix + "e2e-" + std::to_string(result.instances.size());
    instance.split = options.split;
    try {
      auto attrs = parse_mr(mr);
      if (attrs.empty()) throw FieldError("empty MR");
      auto name_it = std::find_if(attrs.begin(), attrs.end(), [](const MrAttribute& a) { return a.name == "name"; });
      if (name_it == attrs.end()) {
        result.warnings.push_back(where + ": MR has no name attribute, using '" + attrs.front().name + "' as subject");
        name_it = attrs.begin();
      }
      std::string subject = normalize_field(name_it->value);
      for (auto it = attrs.begin(); it != attrs.end(); ++it) {
        if (it == name_it) continue;
        instance.triples.emplace_back(subject, normalize_field(it->name), normalize_field(it->value));
      }
      if (instance.triples.empty()) throw FieldError("MR has no attributes besides the subject");
    } catch (const Error& e) {
      result.errors.push_back(where + ": " + e.what());
      continue;
    }
    if (!ref.empty()) instance.references.push_back(ref);
    by_mr.emplace(mr, result.instances.size());
    result.instances.push_back(std::move(instance));
  }
  enforce_error_budget(result, options, "E2E");
  return result;
}

ParseResult parse_corpus(CorpusFormat format, std::string_view bytes, const ParseOptions& options) {
  switch (format) {
    case CorpusFormat::kWebnlgXml: return parse_webnlg(bytes, options);
    case CorpusFormat::kDartJson: return parse_dart(bytes, options);
    case CorpusFormat::kE2eCsv: return parse_e2e(bytes, options);
    case CorpusFormat::kCanonicalJsonl: {
      ParseResult result;
      result.instances = read_canonical(bytes);
      result.source_records = result.instances.size();
      return result;
    }
  }
  throw ConfigError("unsupported corpus format");
}

std::string write_canonical(const std::vector<DataInstance>& instances) {
  std::string out;
  for (const auto& inst : instances) {
    ordered_json line;
    line["id"] = inst.id;
    line["triples"] = ordered_json::array();
    for (const auto& t : inst.triples) line["triples"].push_back({t.subject(), t.predicate(), t.object()});
    line["references"] = inst.references;
    line["category"] = inst.category ? ordered_json(*inst.category) : ordered_json(nullptr);
    line["split"] = to_string(inst.split);
    out += line.dump();
    out += '\n';
  }
  return out;
}

std::vector<DataInstance> read_canonical(std::string_view jsonl) {
  std::vector<DataInstance> instances;
  std::unordered_set<std::string> seen;
  std::vector<std::string> duplicates;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start < jsonl.size()) {
    auto end = jsonl.find('\n', start);
    if (end == std::string_view::npos) end = jsonl.size();
    auto line = detail::trim(jsonl.substr(start, end - start));
    start = end + 1;
    ++line_no;
    if (line.empty()) continue;
    try {
      auto obj = json::parse(line);
      DataInstance inst;
      inst.id = obj.at("id").get<std::string>();
      for (const auto& t : obj.at("triples")) {
        if (!t.is_array() || t.size() != 3) throw ParseError("triple must be an array of 3 strings", line_no);
        inst.triples.emplace_back(t[0].get<std::string>(), t[1].get<std::string>(), t[2].get<std::string>());
      }
      inst.references = obj.value("references", std::vector<std::string>{});
      if (obj.contains("category") && !obj["category"].is_null()) inst.category = obj["category"].get<std::string>();
      inst.split = split_from_string(obj.value("split", std::string("test")));
      validate(inst);
      if (!seen.insert(inst.id).second) duplicates.push_back(inst.id);
      instances.push_back(std::move(inst));
    } catch (const ParseError&) {
      throw;
    } catch (const json::exception& e) {
      throw ParseError(std::string("bad canonical JSONL record: ") + e.what(), line_no);
    } catch (const Error& e) {
      throw ParseError(std::string("bad canonical JSONL record: ") + e.what(), line_no);
    }
  }
  if (!duplicates.empty()) {
    throw CorpusError("duplicate instance ids: " + detail::join(duplicates, ", "), duplicates);
  }
  return instances;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path + "' for reading");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file_atomic(const std::string& path, std::string_view bytes) {
  namespace fs = std::filesystem;
  fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  fs::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open '" + tmp.string() + "' for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) throw Error("write to '" + tmp.string() + "' failed");
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) throw Error("cannot move '" + tmp.string() + "' to '" + path + "': " + ec.message());
}

std::map<std::string, std::vector<DataInstance>> load_manifest(const CorpusManifest& manifest) {
  std::map<std::string, std::vector<DataInstance>> out;
  for (const auto& [split, path] : manifest.splits) {
    ParseOptions options;
    options.split = split_from_string(split);
    // Ids from generated schemes (dart-N, e2e-N) must stay unique across splits.
    if (manifest.format == CorpusFormat::kDartJson || manifest.format == CorpusFormat::kE2eCsv)
      options.id_prefix = split + "-";
    out[split] = parse_corpus(manifest.format, read_file(path), options).instances;
  }
  return out;
}

std::set<std::string> predicate_set(const std::vector<DataInstance>& instances) {
  std::set<std::string> out;
  for (const auto& inst : instances)
    for (const auto& t : inst.triples) out.insert(t.predicate());
  return out;
}

std::vector<DataInstance> build_unseen_predicate_split(const std::vector<DataInstance>& train,
                                                       const std::vector<DataInstance>& validation,
                                                       const std::vector<DataInstance>& test) {
  auto seen = predicate_set(train);
  seen.merge(predicate_set(validation));
  std::vector<DataInstance> out;
  for (const auto& inst : test) {
    bool all_unseen = std::none_of(inst.triples.begin(), inst.triples.end(),
                                   [&](const Triple& t) { return seen.count(t.predicate()) > 0; });
    if (all_unseen) out.push_back(inst);
  }
  return out;
}

namespace {

// Unbiased draw from [0, bound) on top of mt19937_64, whose output sequence
// is fixed by the standard (std::uniform_int_distribution is not).
std::uint64_t bounded(std::mt19937_64& rng, std::uint64_t bound) {
  std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % bound;
  for (;;) {
    std::uint64_t x = rng();
    if (x < limit) return x % bound;
  }
}

bool by_id(const DataInstance& a, const DataInstance& b) { return a.id < b.id; }

}  // namespace

std::vector<DataInstance> sample_few_shot(const std::vector<DataInstance>& train, std::size_t k, std::uint64_t seed) {
  if (k > train.size())
    throw ConfigError("cannot sample " + std::to_string(k) + " examples from " + std::to_string(train.size()));
  std::vector<DataInstance> pool = train;
  std::sort(pool.begin(), pool.end(), by_id);
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < k; ++i) {
    auto j = i + static_cast<std::size_t>(bounded(rng, pool.size() - i));
    std::swap(pool[i], pool[j]);
  }
  pool.resize(k);
  std::sort(pool.begin(), pool.end(), by_id);
  return pool;
}

std::vector<DataInstance> remove_sources(const std::vector<DataInstance>& instances,
                                         const std::vector<std::string>& sources) {
  std::vector<std::string> lowered;
  for (const auto& s : sources) lowered.push_back(detail::lower(s));
  std::vector<DataInstance> out;
  for (const auto& inst : instances) {
    bool drop = false;
    if (inst.category) {
      auto cat = detail::lower(*inst.category);
      drop = std::any_of(lowered.begin(), lowered.end(), [&](const std::string& s) { return detail::starts_with(cat, s); });
    }
    if (!drop) out.push_back(inst);
  }
  return out;
}

std::vector<DataInstance> strip_references(const std::vector<DataInstance>& instances) {
  std::vector<DataInstance> out = instances;
  for (auto& inst : out) inst.references.clear();
  return out;
}

}  // namespace d2t
