#include "d2t/harness.hpp"

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <set>

#include "d2t/error.hpp"
#include "d2t/fusion.hpp"
#include "d2t/hash.hpp"
#include "text_util.hpp"

namespace d2t {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

std::string_view to_string(RunMode mode) {
  return mode == RunMode::kAsdot ? "asdot" : "baseline_linearized";
}

RunMode run_mode_from_string(std::string_view name) {
  if (name == "asdot") return RunMode::kAsdot;
  if (name == "baseline_linearized" || name == "baseline") return RunMode::kBaselineLinearized;
  throw ConfigError("unknown run mode '" + std::string(name) + "'");
}

namespace {

std::string resolve(const std::string& base_dir, const std::string& path) {
  if (path.empty()) return path;
  fs::path p(path);
  if (p.is_absolute()) return p.lexically_normal().string();
  return (fs::path(base_dir) / p).lexically_normal().string();
}

BackendSpec resolve_backend(BackendSpec spec, const std::string& base_dir) {
  if (spec.kind == "mock") spec.fixture = resolve(base_dir, spec.fixture);
  return spec;
}

json decode_to_json(const DecodeConfig& d) {
  return json{{"beam_width", d.beam_width},
              {"max_new_tokens", d.max_new_tokens},
              {"stop_sequence", d.stop_sequence ? json(*d.stop_sequence) : json(nullptr)},
              {"temperature", d.temperature}};
}

DecodeConfig decode_from_json(const json& j) {
  DecodeConfig d;
  d.beam_width = j.value("beam_width", d.beam_width);
  d.max_new_tokens = j.value("max_new_tokens", d.max_new_tokens);
  if (j.contains("stop_sequence") && !j["stop_sequence"].is_null()) d.stop_sequence = j["stop_sequence"].get<std::string>();
  d.temperature = j.value("temperature", d.temperature);
  validate(d);
  return d;
}

}  // namespace

RunConfig RunConfig::from_json(const json& j, const std::string& base_dir) {
  RunConfig c;
  try {
    if (!j.contains("seed")) throw ConfigError("run config must set 'seed'");
    c.seed = j.at("seed").get<std::uint64_t>();

    const auto& corpus = j.at("corpus");
    c.corpus.name = corpus.value("name", std::string("corpus"));
    c.corpus.format = corpus_format_from_string(corpus.value("format", std::string("jsonl")));
    for (const auto& [split, path] : corpus.at("splits").items())
      c.corpus.splits[split] = resolve(base_dir, path.get<std::string>());

    c.eval_split = j.value("eval_split", c.eval_split);
    if (j.contains("train_split") && !j["train_split"].is_null()) c.train_split = j["train_split"].get<std::string>();
    if (j.contains("shots")) {
      const auto& shots = j["shots"];
      if (shots.is_string()) {
        if (shots.get<std::string>() != "full") throw ConfigError("'shots' must be an integer or \"full\"");
        c.shots = std::nullopt;
      } else {
        auto k = shots.get<long long>();
        if (k < 0) throw ConfigError("'shots' must be non-negative");
        c.shots = static_cast<std::size_t>(k);
      }
    }
    c.output_dir = resolve(base_dir, j.at("output_dir").get<std::string>());
    c.template_store = j.contains("template_store") ? resolve(base_dir, j["template_store"].get<std::string>())
                                                    : (fs::path(c.output_dir) / "templates.json").string();
    if (j.contains("manual_templates") && !j["manual_templates"].is_null())
      c.manual_templates = resolve(base_dir, j["manual_templates"].get<std::string>());
    if (j.contains("disambiguation_backend") && !j["disambiguation_backend"].is_null())
      c.disambiguation_backend = resolve_backend(BackendSpec::from_json(j["disambiguation_backend"]), base_dir);
    c.fusion_backend = resolve_backend(BackendSpec::from_json(j.value("fusion_backend", json("identity"))), base_dir);
    if (j.contains("decode")) c.decode = decode_from_json(j["decode"]);
    if (j.contains("prompt")) {
      const auto& p = j["prompt"];
      if (p.contains("prefix_file")) c.prompt.prefix = read_file(resolve(base_dir, p["prefix_file"].get<std::string>()));
      c.prompt.max_new_tokens = p.value("max_new_tokens", c.prompt.max_new_tokens);
      c.prompt.temperature = p.value("temperature", c.prompt.temperature);
      c.prompt.stop_sequence = p.value("stop_sequence", c.prompt.stop_sequence);
    }
    c.mode = run_mode_from_string(j.value("mode", std::string("asdot")));
    c.exclude_sources = j.value("exclude_sources", std::vector<std::string>{});
    c.parent_lambda = j.value("parent_lambda", c.parent_lambda);
    c.parallelism = j.value("parallelism", c.parallelism);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad run config: ") + e.what());
  }
  if (c.parallelism < 1) throw ConfigError("'parallelism' must be >= 1");
  if (c.parent_lambda < 0.0 || c.parent_lambda > 1.0) throw ConfigError("'parent_lambda' must lie in [0, 1]");
  if (!c.corpus.splits.count(c.eval_split))
    throw ConfigError("corpus has no '" + c.eval_split + "' split to evaluate on");
  if (c.train_split && !c.corpus.splits.count(*c.train_split))
    throw ConfigError("corpus has no '" + *c.train_split + "' training split");
  return c;
}

json RunConfig::to_json() const {
  json splits = json::object();
  for (const auto& [k, v] : corpus.splits) splits[k] = v;
  json j{{"corpus", {{"name", corpus.name}, {"format", to_string(corpus.format)}, {"splits", splits}}},
         {"eval_split", eval_split},
         {"train_split", train_split ? json(*train_split) : json(nullptr)},
         {"shots", shots ? json(*shots) : json("full")},
         {"seed", seed},
         {"template_store", template_store},
         {"manual_templates", manual_templates ? json(*manual_templates) : json(nullptr)},
         {"disambiguation_backend", disambiguation_backend ? disambiguation_backend->to_json() : json(nullptr)},
         {"fusion_backend", fusion_backend.to_json()},
         {"decode", decode_to_json(decode)},
         {"prompt",
          {{"prefix_sha256", sha256_hex(prompt.prefix)},
           {"max_new_tokens", prompt.max_new_tokens},
           {"temperature", prompt.temperature},
           {"stop_sequence", prompt.stop_sequence}}},
         {"mode", to_string(mode)},
         {"output_dir", output_dir},
         {"exclude_sources", exclude_sources},
         {"parent_lambda", parent_lambda},
         {"parallelism", parallelism}};
  return j;
}

RunConfig load_run_config(const std::string& path) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw ConfigError("run config '" + path + "' is not valid JSON: " + e.what());
  }
  auto base = fs::path(path).parent_path().string();
  return RunConfig::from_json(j, base.empty() ? "." : base);
}

json RunManifest::to_json_without_timing() const {
  json access = json::array();
  for (const auto& a : file_access) access.push_back({{"phase", a.phase}, {"split", a.split}, {"fields", a.fields}});
  json per = json::array();
  for (const auto& s : instances) {
    json e{{"id", s.id}, {"status", s.ok ? "ok" : "failed"}};
    if (!s.ok) e["error"] = s.error;
    per.push_back(std::move(e));
  }
  return json{{"schema_version", kSchemaVersion},
              {"status", status},
              {"failed_stage", failed_stage ? json(*failed_stage) : json(nullptr)},
              {"error", error ? json(*error) : json(nullptr)},
              {"config", config},
              {"corpus_hashes", corpus_hashes},
              {"template_store_hash", template_store_hash},
              {"backends", backends},
              {"counters", counters},
              {"file_access", access},
              {"stages_completed", stages_completed},
              {"instances", per},
              {"warnings", warnings}};
}

json RunManifest::to_json() const {
  json j = to_json_without_timing();
  j["timing"] = {{"started_at", started_at}, {"finished_at", finished_at}, {"wall_seconds", wall_seconds}};
  return j;
}

namespace {

void write_pairs(const std::vector<std::pair<std::string, std::string>>& pairs, const std::string& out_path) {
  std::string out;
  for (const auto& [source, target] : pairs) {
    ordered_json j;
    j["source"] = source;
    j["target"] = target;
    out += j.dump() + "\n";
  }
  write_file_atomic(out_path, out);
}

}  // namespace

PairExportStats export_fusion_training_pairs(const std::vector<DataInstance>& instances, const TemplateStore& store,
                                             const std::string& out_path) {
  PairExportStats stats;
  std::vector<std::pair<std::string, std::string>> pairs;
  for (const auto& inst : instances) {
    if (inst.references.empty()) {
      ++stats.skipped_unlabeled;
      continue;
    }
    auto source = build_fusion_input(disambiguate(inst, store));
    for (const auto& ref : inst.references) pairs.emplace_back(source, ref);
  }
  write_pairs(pairs, out_path);
  stats.written = pairs.size();
  return stats;
}

PairExportStats export_linearized_training_pairs(const std::vector<DataInstance>& instances,
                                                 const std::string& out_path) {
  PairExportStats stats;
  std::vector<std::pair<std::string, std::string>> pairs;
  for (const auto& inst : instances) {
    if (inst.references.empty()) {
      ++stats.skipped_unlabeled;
      continue;
    }
    auto source = linearize_baseline(inst);
    for (const auto& ref : inst.references) pairs.emplace_back(source, ref);
  }
  write_pairs(pairs, out_path);
  stats.written = pairs.size();
  return stats;
}

std::size_t import_pair_file(const std::string& in_path, const std::string& out_path) {
  auto text = read_file(in_path);
  std::vector<std::pair<std::string, std::string>> pairs;
  std::size_t line_no = 0;
  for (const auto& raw : detail::split(text, '\n')) {
    ++line_no;
    auto line = detail::trim(raw);
    if (line.empty()) continue;
    try {
      auto j = json::parse(line);
      auto source = j.at("source").get<std::string>();
      auto target = j.at("target").get<std::string>();
      if (detail::trim(source).empty() || detail::trim(target).empty()) throw ParseError("empty source or target", line_no);
      if (!detail::starts_with(source, kFusionPrefix)) source = std::string(kFusionPrefix) + source;
      pairs.emplace_back(std::move(source), std::move(target));
    } catch (const json::exception& e) {
      throw ParseError(std::string("bad pair record: ") + e.what(), line_no);
    }
  }
  write_pairs(pairs, out_path);
  return pairs.size();
}

std::vector<RunConfig> make_experiment_grid(const RunConfig& base, const std::vector<std::size_t>& shots) {
  std::vector<RunConfig> grid;
  grid.reserve(shots.size());
  for (std::size_t i = 0; i < shots.size(); ++i) {
    RunConfig c = base;
    c.shots = shots[i];
    c.seed = base.seed + i;
    c.output_dir = (fs::path(base.output_dir) / ("shots-" + std::to_string(shots[i]))).string();
    if (shots[i] == 0) c.train_split.reset();
    grid.push_back(std::move(c));
  }
  return grid;
}

namespace {

// Verbalized record: {id, sentences:[{triple_index, text, provenance}], fusion_input}
std::string verbalized_line(const std::string& id, const std::vector<DisambiguatedSentence>& sentences,
                            const std::string& fusion_input) {
  ordered_json j;
  j["id"] = id;
  j["sentences"] = ordered_json::array();
  for (const auto& s : sentences) {
    ordered_json e;
    e["triple_index"] = s.triple_index;
    e["text"] = s.text;
    e["provenance"] = to_string(s.template_provenance);
    j["sentences"].push_back(std::move(e));
  }
  j["fusion_input"] = fusion_input;
  return j.dump() + "\n";
}

}  // namespace

RunManifest run_pipeline(const RunConfig& config) {
  const auto t0 = std::chrono::steady_clock::now();
  RunManifest manifest;
  manifest.started_at = utc_timestamp();
  manifest.config = config.to_json();
  const fs::path out_dir(config.output_dir);
  std::string stage = "setup";

  auto finish = [&] {
    manifest.finished_at = utc_timestamp();
    manifest.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    write_file_atomic((out_dir / "manifest.json").string(), manifest.to_json().dump(2) + "\n");
  };

  try {
    fs::create_directories(out_dir);

    stage = "ingest";
    for (const auto& [split, path] : config.corpus.splits) manifest.corpus_hashes[split] = sha256_hex(read_file(path));
    auto corpora = load_manifest(config.corpus);
    auto eval_labeled = corpora.at(config.eval_split);
    if (!config.exclude_sources.empty()) {
      auto before = eval_labeled.size();
      eval_labeled = remove_sources(eval_labeled, config.exclude_sources);
      manifest.counters["excluded_by_source"] = before - eval_labeled.size();
    }
    // Generation stages only ever see this reference-free copy.
    const auto eval_inputs = strip_references(eval_labeled);
    manifest.file_access.push_back({"generation", config.eval_split, {"id", "triples"}});
    manifest.counters["instances"] = eval_inputs.size();
    manifest.stages_completed.push_back(stage);

    stage = "sample";
    std::vector<DataInstance> train_sample;
    if (config.train_split && config.shots != std::optional<std::size_t>(0)) {
      const auto& train = corpora.at(*config.train_split);
      train_sample = sample_few_shot(train, config.shots.value_or(train.size()), config.seed);
      manifest.file_access.push_back({"training", *config.train_split, {"id", "triples", "references"}});
    }
    manifest.counters["train_examples"] = train_sample.size();
    manifest.stages_completed.push_back(stage);

    std::unique_ptr<CompletionBackend> llm;
    if (config.disambiguation_backend) llm = make_completion_backend(*config.disambiguation_backend);
    auto fusion_backend = make_generation_backend(config.fusion_backend);
    manifest.backends["disambiguation"] = llm ? llm->identity() : "offline";
    manifest.backends["fusion"] = fusion_backend->identity();

    TemplateStore store;
    if (config.mode == RunMode::kAsdot) {
      stage = "templates";
      if (config.manual_templates) {
        store = load_manual_templates(*config.manual_templates);
        for (const auto& [predicate, entry] : load_template_store_or_empty(config.template_store).entries())
          if (!store.contains(predicate)) store.insert(entry.tmpl, entry.created_at);
      } else {
        store = load_template_store_or_empty(config.template_store);
      }
      std::vector<DataInstance> needs_templates = eval_inputs;
      needs_templates.insert(needs_templates.end(), train_sample.begin(), train_sample.end());
      EnsureOptions ensure_options;
      ensure_options.parallelism = config.parallelism;
      auto stats = ensure_templates(needs_templates, store, llm.get(), config.prompt, ensure_options);
      save_template_store(store, config.template_store);
      manifest.counters["missing_predicates"] = stats.missing_predicates;
      manifest.counters["backend_queries"] = stats.backend_queries;
      manifest.counters["templates_mined"] = stats.mined;
      manifest.counters["templates_fallback"] = stats.fallbacks;
      for (const auto& [prov, n] : store.provenance_counts()) manifest.counters["store_" + prov] = n;
      manifest.warnings.insert(manifest.warnings.end(), stats.warnings.begin(), stats.warnings.end());
      manifest.template_store_hash = store.content_hash();
      manifest.stages_completed.push_back(stage);
    }

    if (!train_sample.empty()) {
      stage = "export_pairs";
      auto pairs_path = (out_dir / "fusion_train_pairs.jsonl").string();
      auto stats = config.mode == RunMode::kAsdot ? export_fusion_training_pairs(train_sample, store, pairs_path)
                                                  : export_linearized_training_pairs(train_sample, pairs_path);
      manifest.counters["train_pairs"] = stats.written;
      manifest.stages_completed.push_back(stage);
    }

    stage = "disambiguate";
    std::vector<std::string> ids;
    std::vector<FusionRequest> requests;
    std::string verbalized;
    for (const auto& inst : eval_inputs) {
      ids.push_back(inst.id);
      if (config.mode == RunMode::kAsdot) {
        auto sentences = disambiguate(inst, store);
        requests.push_back(make_fusion_request(sentences, config.decode));
        verbalized += verbalized_line(inst.id, sentences, requests.back().input_text);
      } else {
        requests.push_back(FusionRequest{linearize_baseline(inst), config.decode});
        verbalized += verbalized_line(inst.id, {}, requests.back().input_text);
      }
    }
    write_file_atomic((out_dir / "verbalized.jsonl").string(), verbalized);
    manifest.stages_completed.push_back(stage);

    stage = "fuse";
    auto outcomes = fuse_all(ids, requests, *fusion_backend, config.parallelism);
    std::vector<Hypothesis> hypotheses;
    std::size_t failures = 0;
    for (const auto& o : outcomes) {
      manifest.instances.push_back({o.id, o.ok(), o.error});
      if (!o.ok()) ++failures;
      hypotheses.push_back({o.id, o.text});
    }
    manifest.counters["fusion_calls"] = outcomes.size();
    manifest.counters["fusion_failures"] = failures;
    write_file_atomic((out_dir / "hypotheses.jsonl").string(), write_hypotheses_jsonl(hypotheses));
    manifest.stages_completed.push_back(stage);

    stage = "evaluate";
    bool labeled = std::all_of(eval_labeled.begin(), eval_labeled.end(),
                               [](const DataInstance& i) { return !i.references.empty(); });
    if (labeled && !eval_labeled.empty()) {
      manifest.file_access.push_back({"evaluation", config.eval_split, {"references"}});
      EvalConfig eval_config;
      eval_config.parent_lambda = config.parent_lambda;
      auto report = evaluate(hypotheses, eval_labeled, eval_config);
      write_file_atomic((out_dir / "report.json").string(), report.to_json().dump(2) + "\n");
      manifest.stages_completed.push_back(stage);
    } else {
      manifest.warnings.push_back("evaluation skipped: some instances have no references");
    }
  } catch (const std::exception& e) {
    manifest.status = "failed";
    manifest.failed_stage = stage;
    manifest.error = e.what();
  }
  finish();
  return manifest;
}

}  // namespace d2t
