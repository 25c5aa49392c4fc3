#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "d2t/backend.hpp"
#include "d2t/corpus.hpp"
#include "d2t/disambiguation.hpp"
#include "d2t/metrics.hpp"

namespace d2t {

enum class RunMode { kAsdot, kBaselineLinearized };

std::string_view to_string(RunMode mode);
RunMode run_mode_from_string(std::string_view name);

struct RunConfig {
  CorpusManifest corpus;
  std::string eval_split = "test";
  // Few-shot examples come from this split. Unset for zero-shot runs.
  std::optional<std::string> train_split;
  // Number of training examples; unset means the whole train split.
  std::optional<std::size_t> shots = 0;
  std::uint64_t seed = 0;
  std::string template_store;
  std::optional<std::string> manual_templates;
  // Unset: templates come only from the store, manual file and fallbacks.
  std::optional<BackendSpec> disambiguation_backend;
  BackendSpec fusion_backend;
  DecodeConfig decode;
  PromptSpec prompt;
  RunMode mode = RunMode::kAsdot;
  std::string output_dir;
  // Category prefixes dropped from the evaluation split (e.g. "webnlg",
  // "e2e" when evaluating out of domain on DART).
  std::vector<std::string> exclude_sources;
  double parent_lambda = 0.5;
  int parallelism = 1;

  // Relative paths are resolved against base_dir. "seed" is required.
  static RunConfig from_json(const nlohmann::json& j, const std::string& base_dir = ".");
  nlohmann::json to_json() const;
};

RunConfig load_run_config(const std::string& path);

struct InstanceStatus {
  std::string id;
  bool ok = true;
  std::string error;
};

struct FileAccess {
  std::string phase;  // "generation" | "evaluation" | "training"
  std::string split;
  std::vector<std::string> fields;
};

struct RunManifest {
  static constexpr int kSchemaVersion = 1;

  std::string status = "ok";  // "ok" | "failed"
  std::optional<std::string> failed_stage;
  std::optional<std::string> error;
  nlohmann::json config;
  std::map<std::string, std::string> corpus_hashes;
  std::string template_store_hash;
  std::map<std::string, std::string> backends;
  std::map<std::string, std::size_t> counters;
  std::vector<FileAccess> file_access;
  std::vector<InstanceStatus> instances;
  std::vector<std::string> warnings;
  std::vector<std::string> stages_completed;
  std::string started_at;
  std::string finished_at;
  double wall_seconds = 0.0;

  nlohmann::json to_json() const;
  // The same document without the "timing" block.
  nlohmann::json to_json_without_timing() const;
};

// ingest -> templates -> disambiguate -> fusion input -> fuse -> evaluate.
// Writes hypotheses.jsonl, verbalized.jsonl, report.json and manifest.json
// into the output directory (plus fusion_train_pairs.jsonl for few-shot
// runs). A failing stage is recorded in the manifest, which is still
// written together with whatever outputs exist; per-instance fusion failures
// never stop the run.
RunManifest run_pipeline(const RunConfig& config);

// One config per shot count; seeds are base.seed + index and each run gets
// "<output_dir>/shots-<k>". Zero-shot configs carry no training split.
std::vector<RunConfig> make_experiment_grid(const RunConfig& base,
                                            const std::vector<std::size_t>& shots = {0, 10, 20, 50, 100});

struct PairExportStats {
  std::size_t written = 0;
  std::size_t skipped_unlabeled = 0;
};

// One {source, target} line per reference; source is the fusion input built
// from the instance's disambiguated sentences.
PairExportStats export_fusion_training_pairs(const std::vector<DataInstance>& instances, const TemplateStore& store,
                                             const std::string& out_path);

// Same, with the linearized graph as source (baseline runs).
PairExportStats export_linearized_training_pairs(const std::vector<DataInstance>& instances,
                                                 const std::string& out_path);

// Copies a WikiFluent-style {source, target} pair file, validating each line
// and adding the "summarize: " prefix where missing. Returns the pair count.
std::size_t import_pair_file(const std::string& in_path, const std::string& out_path);

}  // namespace d2t
