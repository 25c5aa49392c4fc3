#pragma once

#include <atomic>
#include <chrono>
#include <cstddef>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "d2t/prompt.hpp"
#include "d2t/triple.hpp"

namespace d2t {

struct BackoffPolicy {
  std::chrono::milliseconds initial{1000};
  double multiplier = 2.0;
};

struct BackendConfig {
  std::string base_url;
  std::optional<std::string> api_key;
  std::chrono::milliseconds timeout{60000};
  int max_retries = 3;
  BackoffPolicy backoff;
  int parallelism = 1;
  std::string completion_path = "/completions";
  std::string generation_path = "/generate";

  // Everything except the API key; safe to log or persist.
  nlohmann::json redacted() const;
};

void validate(const BackendConfig& config);

// Text completion for the disambiguation stage. Implementations are
// shareable across threads.
class CompletionBackend {
 public:
  virtual ~CompletionBackend() = default;
  // Returns the cleaned completion (stop sequence cut, whitespace trimmed).
  virtual std::string complete(const std::string& prompt, const PromptSpec& spec) = 0;
  // Human-readable identity for run manifests. Never contains secrets.
  virtual std::string identity() const = 0;
};

// Seq2seq generation for the fusion stage.
class GenerationBackend {
 public:
  virtual ~GenerationBackend() = default;
  virtual std::string generate(const std::string& input, const DecodeConfig& decode) = 0;
  virtual std::string identity() const = 0;
};

// Wire formats. nlohmann::json sorts keys, so dump() is byte-deterministic.
//   completion: {prompt, max_tokens, temperature, stop:[string]} -> {choices:[{text}]}
//   generation: {inputs:[string], num_beams, max_new_tokens, stop?} -> {outputs:[string]}
nlohmann::json completion_request(const std::string& prompt, const PromptSpec& spec);
nlohmann::json generation_request(const std::string& input, const DecodeConfig& decode);
std::string completion_text(const nlohmann::json& response);
std::string generation_text(const nlohmann::json& response);

// POSTs JSON with retries: 429, 5xx and transport failures back off
// exponentially with full jitter; any other non-2xx status is a config
// error. A counting semaphore caps in-flight requests at
// config.parallelism.
class HttpJsonClient {
 public:
  explicit HttpJsonClient(BackendConfig config);
  ~HttpJsonClient();
  HttpJsonClient(const HttpJsonClient&) = delete;
  HttpJsonClient& operator=(const HttpJsonClient&) = delete;

  nlohmann::json post(const std::string& path, const nlohmann::json& payload);

  const BackendConfig& config() const { return config_; }
  std::size_t attempts() const { return attempts_.load(); }
  std::size_t requests() const { return requests_.load(); }

 private:
  struct Gate;
  BackendConfig config_;
  std::string scheme_host_port_;
  std::string path_prefix_;
  std::unique_ptr<Gate> gate_;
  std::atomic<std::size_t> attempts_{0};
  std::atomic<std::size_t> requests_{0};
};

class HttpCompletionClient : public CompletionBackend {
 public:
  explicit HttpCompletionClient(BackendConfig config) : client_(std::move(config)) {}
  std::string complete(const std::string& prompt, const PromptSpec& spec) override;
  std::string identity() const override;
  const HttpJsonClient& http() const { return client_; }

 private:
  HttpJsonClient client_;
};

class HttpGenerationClient : public GenerationBackend {
 public:
  explicit HttpGenerationClient(BackendConfig config) : client_(std::move(config)) {}
  std::string generate(const std::string& input, const DecodeConfig& decode) override;
  std::string identity() const override;
  const HttpJsonClient& http() const { return client_; }

 private:
  HttpJsonClient client_;
};

enum class UnknownPolicy { kError, kEcho };

// Deterministic fixture lookup serving both stages. For completions a miss
// on the full prompt retries with the final query block (the text after the
// last blank line), so fixtures can be keyed by "Table: ...\nText:" alone.
class MockBackend : public CompletionBackend, public GenerationBackend {
 public:
  MockBackend(std::map<std::string, std::string> fixture, UnknownPolicy policy = UnknownPolicy::kError,
              std::string name = "mock");
  // Fixture file: a flat JSON object {request text: response text}.
  static std::unique_ptr<MockBackend> from_file(const std::string& path, UnknownPolicy policy = UnknownPolicy::kError);

  std::string complete(const std::string& prompt, const PromptSpec& spec) override;
  std::string generate(const std::string& input, const DecodeConfig& decode) override;
  std::string identity() const override { return name_; }

  std::size_t calls() const { return calls_.load(); }

 private:
  std::string lookup(const std::string& request, bool try_query_block) const;

  std::map<std::string, std::string> fixture_;
  UnknownPolicy policy_;
  std::string name_;
  std::atomic<std::size_t> calls_{0};
};

// Echoes its input with a leading "summarize: " removed.
class IdentityGenerationBackend : public GenerationBackend {
 public:
  std::string generate(const std::string& input, const DecodeConfig& decode) override;
  std::string identity() const override { return "identity"; }
};

// How to reach a backend, as written in run configs:
//   {"kind": "http", "base_url": ..., "api_key_env": ..., "timeout_ms": ...,
//    "max_retries": ..., "backoff_initial_ms": ..., "backoff_multiplier": ...,
//    "parallelism": ...}
//   {"kind": "mock", "fixture": path, "unknown": "error" | "echo"}
//   {"kind": "identity"}
struct BackendSpec {
  std::string kind = "identity";
  BackendConfig http;
  std::optional<std::string> api_key_env;
  std::string fixture;
  UnknownPolicy unknown = UnknownPolicy::kError;

  // Shorthand used on the command line: "http(s)://...", "mock:<path>",
  // "mock+echo:<path>" or "identity".
  static BackendSpec parse_uri(std::string_view uri);
  static BackendSpec from_json(const nlohmann::json& j);
  // Never includes the key itself, only the variable name.
  nlohmann::json to_json() const;
};

// The API key, when needed, is read from the environment variable named in
// the spec at construction time.
std::unique_ptr<CompletionBackend> make_completion_backend(const BackendSpec& spec);
std::unique_ptr<GenerationBackend> make_generation_backend(const BackendSpec& spec);

// Runs fn(i) for i in [0, count) on at most `parallelism` threads. The first
// exception thrown by any call is rethrown after all workers finish.
void run_bounded(std::size_t count, int parallelism, const std::function<void(std::size_t)>& fn);

struct GenerationOutcome {
  std::optional<std::string> text;
  std::string error;
};

// One generate() per input, at most `parallelism` in flight; outcome i
// belongs to input i regardless of completion order.
std::vector<GenerationOutcome> generate_batch(GenerationBackend& backend, const std::vector<std::string>& inputs,
                                              const DecodeConfig& decode, int parallelism);

}  // namespace d2t
