#include <filesystem>
#include <set>

#include "d2t/corpus.hpp"
#include "d2t/disambiguation.hpp"
#include "d2t/error.hpp"
#include "d2t/hash.hpp"

namespace d2t {

using nlohmann::json;

const Template* TemplateStore::find(const std::string& predicate) const {
  auto it = entries_.find(predicate);
  return it == entries_.end() ? nullptr : &it->second.tmpl;
}

void TemplateStore::insert(Template tmpl, std::string created_at) {
  validate_pattern(tmpl.pattern);
  if (tmpl.predicate != tmpl.source_triple.predicate())
    throw TemplateError("template predicate '" + tmpl.predicate + "' differs from its source triple");
  auto key = tmpl.predicate;
  if (entries_.count(key)) throw TemplateError("predicate '" + key + "' already has a template");
  entries_.emplace(std::move(key), Entry{std::move(tmpl), std::move(created_at)});
}

std::map<std::string, std::size_t> TemplateStore::provenance_counts() const {
  std::map<std::string, std::size_t> counts{{"llm", 0}, {"manual", 0}, {"fallback", 0}};
  for (const auto& [_, entry] : entries_) ++counts[std::string(to_string(entry.tmpl.provenance))];
  return counts;
}

json TemplateStore::to_json() const {
  json j = json::object();
  for (const auto& [predicate, entry] : entries_) {
    const auto& t = entry.tmpl;
    j[predicate] = json{{"pattern", t.pattern},
                        {"source_triple", {t.source_triple.subject(), t.source_triple.predicate(), t.source_triple.object()}},
                        {"provenance", to_string(t.provenance)},
                        {"created_at", entry.created_at}};
  }
  return j;
}

TemplateStore TemplateStore::from_json(const json& j) {
  if (!j.is_object()) throw TemplateError("template store must be a JSON object");
  TemplateStore store;
  for (const auto& [predicate, value] : j.items()) {
    try {
      const auto& st = value.at("source_triple");
      if (!st.is_array() || st.size() != 3) throw TemplateError("source_triple must have 3 elements");
      Template t{predicate, value.at("pattern").get<std::string>(),
                 Triple(st[0].get<std::string>(), st[1].get<std::string>(), st[2].get<std::string>()),
                 provenance_from_string(value.at("provenance").get<std::string>())};
      store.insert(std::move(t), value.value("created_at", std::string()));
    } catch (const json::exception& e) {
      throw TemplateError("bad template store entry '" + predicate + "': " + e.what());
    } catch (const FieldError& e) {
      throw TemplateError("bad template store entry '" + predicate + "': " + e.what());
    }
  }
  return store;
}

std::string TemplateStore::content_hash() const {
  json j = to_json();
  for (auto& [_, value] : j.items()) value.erase("created_at");
  return sha256_hex(j.dump());
}

TemplateStore load_template_store(const std::string& path) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw TemplateError("template store '" + path + "' is not valid JSON: " + e.what());
  }
  return TemplateStore::from_json(j);
}

TemplateStore load_template_store_or_empty(const std::string& path) {
  if (!std::filesystem::exists(path)) return {};
  return load_template_store(path);
}

void save_template_store(const TemplateStore& store, const std::string& path) {
  write_file_atomic(path, store.to_json().dump(2) + "\n");
}

TemplateStore parse_manual_templates(std::string_view json_text) {
  std::set<std::string> seen;
  std::vector<std::string> problems;
  // The DOM keeps only the last duplicate key, so duplicates are caught
  // while parsing.
  json::parser_callback_t on_event = [&](int depth, json::parse_event_t event, json& parsed) {
    if (event == json::parse_event_t::key && depth == 1) {
      auto key = parsed.get<std::string>();
      if (!seen.insert(key).second) problems.push_back("duplicate predicate '" + key + "'");
    }
    return true;
  };
  json j;
  try {
    if (json_text.find_first_not_of(" \t\r\n") == std::string_view::npos) return {};
    j = json::parse(json_text, on_event);
  } catch (const json::exception& e) {
    throw TemplateError(std::string("manual template file is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw TemplateError("manual template file must be a JSON object");

  TemplateStore store;
  for (const auto& [predicate, value] : j.items()) {
    try {
      if (!value.is_string()) throw TemplateError("pattern must be a string");
      Template t{predicate, value.get<std::string>(), Triple("subject", predicate, "object"), Provenance::kManual};
      store.insert(std::move(t), "");
    } catch (const Error& e) {
      problems.push_back("predicate '" + predicate + "': " + e.what());
    }
  }
  if (!problems.empty()) {
    std::string msg = "invalid manual templates:";
    for (const auto& p : problems) msg += "\n  " + p;
    throw TemplateError(msg);
  }
  return store;
}

TemplateStore load_manual_templates(const std::string& path) { return parse_manual_templates(read_file(path)); }

}  // namespace d2t
