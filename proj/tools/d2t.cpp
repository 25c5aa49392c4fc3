// Command line front end: corpus ingestion, template mining, verbalization,
// fusion, evaluation and experiment runs.

#include <filesystem>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "d2t/backend.hpp"
#include "d2t/corpus.hpp"
#include "d2t/disambiguation.hpp"
#include "d2t/error.hpp"
#include "d2t/fusion.hpp"
#include "d2t/harness.hpp"
#include "d2t/metrics.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

std::vector<d2t::DataInstance> load_corpus(const std::string& path) {
  return d2t::read_canonical(d2t::read_file(path));
}

void report_parse(const d2t::ParseResult& r) {
  std::cerr << "records: " << r.source_records << ", instances: " << r.instances.size() << ", skipped: " << r.skipped
            << ", merged rows: " << r.merged_rows << ", bad records: " << r.errors.size()
            << ", warnings: " << r.warnings.size() << "\n";
  for (const auto& e : r.errors) std::cerr << "  error: " << e << "\n";
}

struct VerbalizedRecord {
  std::string id;
  std::string fusion_input;
};

std::vector<VerbalizedRecord> read_verbalized(const std::string& path) {
  std::vector<VerbalizedRecord> out;
  std::istringstream in(d2t::read_file(path));
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      auto j = json::parse(line);
      VerbalizedRecord r{j.at("id").get<std::string>(), ""};
      if (j.contains("fusion_input")) {
        r.fusion_input = j["fusion_input"].get<std::string>();
      } else {
        std::vector<std::string> sentences;
        for (const auto& s : j.at("sentences")) sentences.push_back(s.is_string() ? s.get<std::string>() : s.at("text").get<std::string>());
        r.fusion_input = d2t::build_fusion_input(sentences);
      }
      out.push_back(std::move(r));
    } catch (const json::exception& e) {
      throw d2t::ParseError(std::string("bad verbalized record: ") + e.what(), line_no);
    }
  }
  return out;
}

std::vector<std::size_t> parse_shots(const std::string& text) {
  std::vector<std::size_t> shots;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    shots.push_back(static_cast<std::size_t>(std::stoull(item)));
  }
  return shots;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Two-stage data-to-text pipeline: triple disambiguation and sentence fusion"};
  app.require_subcommand(1);

  // ingest
  std::string ingest_format, ingest_in, ingest_out, ingest_split = "test", ingest_prefix;
  double max_bad = 0.01;
  auto* ingest = app.add_subcommand("ingest", "Parse a WebNLG/DART/E2E file into canonical JSONL");
  ingest->add_option("--format", ingest_format, "webnlg | dart | e2e")->required()->check(CLI::IsMember({"webnlg", "dart", "e2e"}));
  ingest->add_option("--in", ingest_in)->required()->check(CLI::ExistingFile);
  ingest->add_option("--out", ingest_out)->required();
  ingest->add_option("--split", ingest_split, "split tag written into every instance");
  ingest->add_option("--id-prefix", ingest_prefix);
  ingest->add_option("--max-bad-fraction", max_bad, "fail the file above this fraction of bad records");

  // split-unseen
  std::string su_train, su_dev, su_test, su_out;
  auto* split_unseen = app.add_subcommand("split-unseen", "Keep test instances whose predicates never occur in train/dev");
  split_unseen->add_option("--train", su_train)->required()->check(CLI::ExistingFile);
  split_unseen->add_option("--dev", su_dev)->required()->check(CLI::ExistingFile);
  split_unseen->add_option("--test", su_test)->required()->check(CLI::ExistingFile);
  split_unseen->add_option("--out", su_out)->required();

  // sample
  std::string sample_in, sample_out;
  std::size_t sample_k = 0;
  std::uint64_t sample_seed = 0;
  auto* sample = app.add_subcommand("sample", "Seeded uniform few-shot sample");
  sample->add_option("--in", sample_in)->required()->check(CLI::ExistingFile);
  sample->add_option("--k", sample_k)->required();
  sample->add_option("--seed", sample_seed)->required();
  sample->add_option("--out", sample_out)->required();

  // templates mine
  std::string tm_corpus, tm_store, tm_backend, tm_manual;
  bool tm_offline = false;
  int tm_parallelism = 1;
  auto* templates = app.add_subcommand("templates", "Template store maintenance");
  templates->require_subcommand(1);
  auto* mine = templates->add_subcommand("mine", "Query the LLM once per predicate missing from the store");
  mine->add_option("--corpus", tm_corpus)->required()->check(CLI::ExistingFile);
  mine->add_option("--store", tm_store)->required();
  mine->add_option("--backend", tm_backend, "http(s)://..., mock:<fixture.json> or mock+echo:<fixture.json>");
  mine->add_flag("--offline", tm_offline, "never query; missing predicates get fallback templates");
  mine->add_option("--manual", tm_manual, "manual template file merged in before mining")->check(CLI::ExistingFile);
  mine->add_option("--parallelism", tm_parallelism);

  // verbalize
  std::string vb_corpus, vb_store, vb_out;
  auto* verbalize = app.add_subcommand("verbalize", "Apply stored templates and build fusion inputs");
  verbalize->add_option("--corpus", vb_corpus)->required()->check(CLI::ExistingFile);
  verbalize->add_option("--store", vb_store)->required()->check(CLI::ExistingFile);
  verbalize->add_option("--out", vb_out)->required();

  // fuse
  std::string fu_in, fu_backend, fu_out;
  int fu_beam = 5, fu_max_tokens = 256, fu_parallelism = 1;
  auto* fuse = app.add_subcommand("fuse", "Send fusion inputs to a generation backend");
  fuse->add_option("--in", fu_in, "verbalized or linearized JSONL")->required()->check(CLI::ExistingFile);
  fuse->add_option("--backend", fu_backend, "http(s)://..., mock:<fixture.json> or identity")->required();
  fuse->add_option("--beam", fu_beam);
  fuse->add_option("--max-new-tokens", fu_max_tokens);
  fuse->add_option("--parallelism", fu_parallelism);
  fuse->add_option("--out", fu_out)->required();

  // linearize
  std::string ln_corpus, ln_out;
  auto* linearize = app.add_subcommand("linearize", "Baseline <H>/<R>/<T> linearization");
  linearize->add_option("--corpus", ln_corpus)->required()->check(CLI::ExistingFile);
  linearize->add_option("--out", ln_out)->required();

  // evaluate
  std::string ev_hyp, ev_corpus, ev_out;
  double ev_lambda = 0.5;
  std::vector<std::string> ev_external;
  auto* evaluate = app.add_subcommand("evaluate", "Corpus BLEU and PARENT");
  evaluate->add_option("--hyp", ev_hyp, "{id,text} JSONL or one hypothesis per line")->required()->check(CLI::ExistingFile);
  evaluate->add_option("--corpus", ev_corpus)->required()->check(CLI::ExistingFile);
  evaluate->add_option("--out", ev_out)->required();
  evaluate->add_option("--parent-lambda", ev_lambda)->check(CLI::Range(0.0, 1.0));
  evaluate->add_option("--external", ev_external, "name=command with {hyp} and {refs} placeholders");

  // export-pairs
  std::string ep_corpus, ep_store, ep_out, ep_passthrough;
  auto* export_pairs = app.add_subcommand("export-pairs", "Write fusion finetuning pairs");
  export_pairs->add_option("--corpus", ep_corpus)->check(CLI::ExistingFile);
  export_pairs->add_option("--store", ep_store)->check(CLI::ExistingFile);
  export_pairs->add_option("--pairs", ep_passthrough, "existing {source,target} file to pass through")->check(CLI::ExistingFile);
  export_pairs->add_option("--out", ep_out)->required();

  // run / grid
  std::string run_config;
  auto* run = app.add_subcommand("run", "Run one configured experiment");
  run->add_option("--config", run_config)->required()->check(CLI::ExistingFile);

  std::string grid_config, grid_shots = "0,10,20,50,100", grid_out;
  bool grid_run = false;
  auto* grid = app.add_subcommand("grid", "Expand a base config over shot counts");
  grid->add_option("--config", grid_config)->required()->check(CLI::ExistingFile);
  grid->add_option("--shots", grid_shots);
  grid->add_option("--out", grid_out, "directory for the generated configs (default: base output_dir)");
  grid->add_flag("--run", grid_run, "run every generated config");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*ingest) {
      d2t::ParseOptions options;
      options.split = d2t::split_from_string(ingest_split);
      options.id_prefix = ingest_prefix;
      options.max_bad_fraction = max_bad;
      auto result = d2t::parse_corpus(d2t::corpus_format_from_string(ingest_format), d2t::read_file(ingest_in), options);
      report_parse(result);
      d2t::write_file_atomic(ingest_out, d2t::write_canonical(result.instances));
    } else if (*split_unseen) {
      auto unseen = d2t::build_unseen_predicate_split(load_corpus(su_train), load_corpus(su_dev), load_corpus(su_test));
      for (auto& inst : unseen) inst.split = d2t::Split::kTestUnseen;
      d2t::write_file_atomic(su_out, d2t::write_canonical(unseen));
      std::cerr << "unseen-predicate instances: " << unseen.size() << "\n";
    } else if (*sample) {
      d2t::write_file_atomic(sample_out, d2t::write_canonical(d2t::sample_few_shot(load_corpus(sample_in), sample_k, sample_seed)));
    } else if (*mine) {
      if (tm_offline && !tm_backend.empty()) throw d2t::ConfigError("--offline and --backend are mutually exclusive");
      if (!tm_offline && tm_backend.empty()) throw d2t::ConfigError("pass --backend or --offline");
      auto store = d2t::load_template_store_or_empty(tm_store);
      if (!tm_manual.empty()) {
        for (const auto& [predicate, entry] : d2t::load_manual_templates(tm_manual).entries())
          if (!store.contains(predicate)) store.insert(entry.tmpl, d2t::utc_timestamp());
      }
      std::unique_ptr<d2t::CompletionBackend> backend;
      if (!tm_offline) {
        auto spec = d2t::BackendSpec::parse_uri(tm_backend);
        spec.api_key_env = "D2T_API_KEY";
        spec.http.parallelism = tm_parallelism;
        backend = d2t::make_completion_backend(spec);
      }
      d2t::EnsureOptions options;
      options.parallelism = tm_parallelism;
      auto stats = d2t::ensure_templates(load_corpus(tm_corpus), store, backend.get(), {}, options);
      d2t::save_template_store(store, tm_store);
      std::cerr << "missing predicates: " << stats.missing_predicates << ", backend queries: " << stats.backend_queries
                << ", mined: " << stats.mined << ", fallbacks: " << stats.fallbacks << "\n";
      for (const auto& w : stats.warnings) std::cerr << "  warning: " << w << "\n";
    } else if (*verbalize) {
      auto store = d2t::load_template_store(vb_store);
      std::string out;
      for (const auto& inst : load_corpus(vb_corpus)) {
        auto sentences = d2t::disambiguate(inst, store);
        ordered_json j;
        j["id"] = inst.id;
        j["sentences"] = ordered_json::array();
        for (const auto& s : sentences)
          j["sentences"].push_back({{"triple_index", s.triple_index}, {"text", s.text}, {"provenance", d2t::to_string(s.template_provenance)}});
        j["fusion_input"] = d2t::build_fusion_input(sentences);
        out += j.dump() + "\n";
      }
      d2t::write_file_atomic(vb_out, out);
    } else if (*fuse) {
      auto records = read_verbalized(fu_in);
      auto spec = d2t::BackendSpec::parse_uri(fu_backend);
      spec.api_key_env = "D2T_API_KEY";
      spec.http.parallelism = fu_parallelism;
      auto backend = d2t::make_generation_backend(spec);
      d2t::DecodeConfig decode;
      decode.beam_width = fu_beam;
      decode.max_new_tokens = fu_max_tokens;
      d2t::validate(decode);
      std::vector<std::string> ids;
      std::vector<d2t::FusionRequest> requests;
      for (const auto& r : records) {
        ids.push_back(r.id);
        requests.push_back({r.fusion_input, decode});
      }
      auto outcomes = d2t::fuse_all(ids, requests, *backend, fu_parallelism);
      std::vector<d2t::Hypothesis> hyps;
      std::size_t failed = 0;
      for (const auto& o : outcomes) {
        if (!o.ok()) {
          ++failed;
          std::cerr << "  failed " << o.id << ": " << o.error << "\n";
        }
        hyps.push_back({o.id, o.text});
      }
      d2t::write_file_atomic(fu_out, d2t::write_hypotheses_jsonl(hyps));
      std::cerr << "fused: " << outcomes.size() - failed << ", failed: " << failed << "\n";
    } else if (*linearize) {
      std::string out;
      for (const auto& inst : load_corpus(ln_corpus)) {
        ordered_json j;
        j["id"] = inst.id;
        j["fusion_input"] = d2t::linearize_baseline(inst);
        out += j.dump() + "\n";
      }
      d2t::write_file_atomic(ln_out, out);
    } else if (*evaluate) {
      auto instances = load_corpus(ev_corpus);
      auto text = d2t::read_file(ev_hyp);
      auto hyps = fs::path(ev_hyp).extension() == ".jsonl" ? d2t::read_hypotheses_jsonl(text)
                                                            : d2t::read_hypotheses_text(text, instances);
      d2t::EvalConfig config;
      config.parent_lambda = ev_lambda;
      for (const auto& spec : ev_external) {
        auto eq = spec.find('=');
        if (eq == std::string::npos) throw d2t::ConfigError("--external expects name=command");
        config.external.push_back(std::make_shared<d2t::CommandMetric>(spec.substr(0, eq), spec.substr(eq + 1)));
      }
      auto report = d2t::evaluate(hyps, instances, config);
      d2t::write_file_atomic(ev_out, report.to_json().dump(2) + "\n");
      std::cout << "BLEU " << report.bleu << "  PARENT P/R/F1 " << report.parent_precision << " / "
                << report.parent_recall << " / " << report.parent_f1 << "\n";
    } else if (*export_pairs) {
      if (!ep_passthrough.empty()) {
        std::cerr << "pairs: " << d2t::import_pair_file(ep_passthrough, ep_out) << "\n";
      } else {
        if (ep_corpus.empty() || ep_store.empty()) throw d2t::ConfigError("export-pairs needs --corpus and --store, or --pairs");
        auto stats = d2t::export_fusion_training_pairs(load_corpus(ep_corpus), d2t::load_template_store(ep_store), ep_out);
        std::cerr << "pairs: " << stats.written << ", unlabeled skipped: " << stats.skipped_unlabeled << "\n";
      }
    } else if (*run) {
      auto manifest = d2t::run_pipeline(d2t::load_run_config(run_config));
      std::cerr << "status: " << manifest.status;
      if (manifest.failed_stage) std::cerr << " at " << *manifest.failed_stage << ": " << manifest.error.value_or("");
      std::cerr << "\n";
      return manifest.status == "ok" ? 0 : 1;
    } else if (*grid) {
      auto base = d2t::load_run_config(grid_config);
      auto configs = d2t::make_experiment_grid(base, parse_shots(grid_shots));
      fs::path dir = grid_out.empty() ? fs::path(base.output_dir) : fs::path(grid_out);
      int status = 0;
      for (const auto& c : configs) {
        auto path = dir / ("config-shots-" + std::to_string(c.shots.value_or(0)) + ".json");
        d2t::write_file_atomic(path.string(), c.to_json().dump(2) + "\n");
        std::cout << path.string() << "\n";
        if (grid_run && d2t::run_pipeline(c).status != "ok") status = 1;
      }
      return status;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
