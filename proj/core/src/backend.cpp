#include "d2t/backend.hpp"

#include <cstdlib>
#include <exception>
#include <mutex>
#include <random>
#include <regex>
#include <semaphore>
#include <thread>

#include <httplib.h>

#include "d2t/corpus.hpp"
#include "d2t/error.hpp"
#include "text_util.hpp"

namespace d2t {

using nlohmann::json;

json BackendConfig::redacted() const {
  return json{{"base_url", base_url},
              {"timeout_ms", timeout.count()},
              {"max_retries", max_retries},
              {"backoff_initial_ms", backoff.initial.count()},
              {"backoff_multiplier", backoff.multiplier},
              {"parallelism", parallelism},
              {"completion_path", completion_path},
              {"generation_path", generation_path},
              {"api_key_set", api_key.has_value()}};
}

void validate(const BackendConfig& config) {
  if (config.parallelism < 1) throw ConfigError("backend parallelism must be >= 1");
  if (config.max_retries < 0) throw ConfigError("backend max_retries must be >= 0");
  if (config.backoff.multiplier < 1.0) throw ConfigError("backoff multiplier must be >= 1");
  if (config.timeout.count() <= 0) throw ConfigError("backend timeout must be positive");
}

json completion_request(const std::string& prompt, const PromptSpec& spec) {
  if (prompt.empty()) throw ConfigError("completion prompt is empty");
  return json{{"prompt", prompt},
              {"max_tokens", spec.max_new_tokens},
              {"temperature", spec.temperature},
              {"stop", json::array({spec.stop_sequence})}};
}

json generation_request(const std::string& input, const DecodeConfig& decode) {
  if (input.empty()) throw ConfigError("generation input is empty");
  json j{{"inputs", json::array({input})}, {"num_beams", decode.beam_width}, {"max_new_tokens", decode.max_new_tokens}};
  if (decode.stop_sequence) j["stop"] = *decode.stop_sequence;
  return j;
}

std::string completion_text(const json& response) {
  try {
    return response.at("choices").at(0).at("text").get<std::string>();
  } catch (const json::exception& e) {
    throw BackendError(BackendError::Kind::kResponse, std::string("completion response lacks choices[0].text: ") + e.what());
  }
}

std::string generation_text(const json& response) {
  try {
    return response.at("outputs").at(0).get<std::string>();
  } catch (const json::exception& e) {
    throw BackendError(BackendError::Kind::kResponse, std::string("generation response lacks outputs[0]: ") + e.what());
  }
}

struct HttpJsonClient::Gate {
  explicit Gate(int n) : slots(n) {}
  std::counting_semaphore<4096> slots;
};

HttpJsonClient::HttpJsonClient(BackendConfig config) : config_(std::move(config)) {
  validate(config_);
  static const std::regex url_re(R"(^(https?://[^/]+)(/.*)?$)");
  std::smatch m;
  if (!std::regex_match(config_.base_url, m, url_re)) throw ConfigError("invalid backend URL '" + config_.base_url + "'");
  scheme_host_port_ = m[1].str();
  path_prefix_ = m[2].str();
  while (!path_prefix_.empty() && path_prefix_.back() == '/') path_prefix_.pop_back();
  gate_ = std::make_unique<Gate>(std::min(config_.parallelism, 4096));
}

HttpJsonClient::~HttpJsonClient() = default;

namespace {

std::chrono::milliseconds full_jitter(const BackoffPolicy& policy, int attempt) {
  thread_local std::mt19937_64 rng{std::random_device{}()};
  double cap = static_cast<double>(policy.initial.count());
  for (int i = 0; i < attempt; ++i) cap *= policy.multiplier;
  std::uniform_real_distribution<double> dist(0.0, cap);
  return std::chrono::milliseconds(static_cast<long long>(dist(rng)));
}

}  // namespace

json HttpJsonClient::post(const std::string& path, const json& payload) {
  ++requests_;
  const std::string body = payload.dump();
  const std::string full_path = path_prefix_ + path;

  httplib::Headers headers;
  if (config_.api_key) headers.emplace("Authorization", "Bearer " + *config_.api_key);

  gate_->slots.acquire();
  struct Release {
    Gate* g;
    ~Release() { g->slots.release(); }
  } release{gate_.get()};

  std::string last_error;
  for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
    if (attempt > 0) std::this_thread::sleep_for(full_jitter(config_.backoff, attempt - 1));
    ++attempts_;
    httplib::Client cli(scheme_host_port_);
    cli.set_connection_timeout(config_.timeout);
    cli.set_read_timeout(config_.timeout);
    cli.set_write_timeout(config_.timeout);
    auto res = cli.Post(full_path, headers, body, "application/json");
    if (!res) {
      last_error = "transport failure: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status >= 200 && res->status < 300) {
      try {
        return json::parse(res->body);
      } catch (const json::exception& e) {
        throw BackendError(BackendError::Kind::kResponse, std::string("response is not JSON: ") + e.what());
      }
    }
    if (res->status == 429 || res->status >= 500) {
      last_error = "HTTP " + std::to_string(res->status);
      continue;
    }
    throw BackendError(BackendError::Kind::kConfig,
                       "HTTP " + std::to_string(res->status) + " from " + scheme_host_port_ + full_path + ": " + res->body);
  }
  throw BackendError(BackendError::Kind::kTransport, "request to " + scheme_host_port_ + full_path + " failed after " +
                                                         std::to_string(config_.max_retries + 1) + " attempts (" +
                                                         last_error + ")");
}

std::string HttpCompletionClient::complete(const std::string& prompt, const PromptSpec& spec) {
  auto response = client_.post(client_.config().completion_path, completion_request(prompt, spec));
  return clean_completion(completion_text(response), spec.stop_sequence);
}

std::string HttpCompletionClient::identity() const { return "http:" + client_.config().base_url; }

std::string HttpGenerationClient::generate(const std::string& input, const DecodeConfig& decode) {
  return generation_text(client_.post(client_.config().generation_path, generation_request(input, decode)));
}

std::string HttpGenerationClient::identity() const { return "http:" + client_.config().base_url; }

MockBackend::MockBackend(std::map<std::string, std::string> fixture, UnknownPolicy policy, std::string name)
    : fixture_(std::move(fixture)), policy_(policy), name_(std::move(name)) {}

std::unique_ptr<MockBackend> MockBackend::from_file(const std::string& path, UnknownPolicy policy) {
  std::map<std::string, std::string> fixture;
  try {
    auto doc = json::parse(read_file(path));
    fixture = doc.get<std::map<std::string, std::string>>();
  } catch (const json::exception& e) {
    throw ConfigError("mock fixture '" + path + "' is not a flat JSON string map: " + e.what());
  } catch (const Error& e) {
    throw ConfigError(std::string("cannot load mock fixture: ") + e.what());
  }
  return std::make_unique<MockBackend>(std::move(fixture), policy, "mock:" + path);
}

std::string MockBackend::lookup(const std::string& request, bool try_query_block) const {
  if (auto it = fixture_.find(request); it != fixture_.end()) return it->second;
  if (try_query_block) {
    auto pos = request.rfind("\n\n");
    if (pos != std::string::npos) {
      if (auto it = fixture_.find(request.substr(pos + 2)); it != fixture_.end()) return it->second;
    }
  }
  if (policy_ == UnknownPolicy::kEcho) return request;
  std::string shown = request.size() > 120 ? request.substr(request.size() - 120) : request;
  throw BackendError(BackendError::Kind::kLookup, "mock fixture has no entry for request '..." + shown + "'");
}

std::string MockBackend::complete(const std::string& prompt, const PromptSpec& spec) {
  ++calls_;
  completion_request(prompt, spec);  // same preconditions as the HTTP client
  return clean_completion(lookup(prompt, true), spec.stop_sequence);
}

std::string MockBackend::generate(const std::string& input, const DecodeConfig& decode) {
  ++calls_;
  generation_request(input, decode);
  return lookup(input, false);
}

std::string IdentityGenerationBackend::generate(const std::string& input, const DecodeConfig& decode) {
  generation_request(input, decode);
  constexpr std::string_view prefix = "summarize: ";
  if (detail::starts_with(input, prefix)) return input.substr(prefix.size());
  return input;
}

BackendSpec BackendSpec::parse_uri(std::string_view uri) {
  BackendSpec spec;
  if (detail::starts_with(uri, "http://") || detail::starts_with(uri, "https://")) {
    spec.kind = "http";
    spec.http.base_url = std::string(uri);
  } else if (detail::starts_with(uri, "mock+echo:")) {
    spec.kind = "mock";
    spec.fixture = std::string(uri.substr(10));
    spec.unknown = UnknownPolicy::kEcho;
  } else if (detail::starts_with(uri, "mock:")) {
    spec.kind = "mock";
    spec.fixture = std::string(uri.substr(5));
  } else if (uri == "identity") {
    spec.kind = "identity";
  } else {
    throw ConfigError("unrecognized backend '" + std::string(uri) + "'");
  }
  return spec;
}

BackendSpec BackendSpec::from_json(const json& j) {
  if (j.is_string()) return parse_uri(j.get<std::string>());
  BackendSpec spec;
  try {
    spec.kind = j.value("kind", std::string("identity"));
    if (spec.kind == "http") {
      spec.http.base_url = j.at("base_url").get<std::string>();
      spec.http.timeout = std::chrono::milliseconds(j.value("timeout_ms", 60000));
      spec.http.max_retries = j.value("max_retries", 3);
      spec.http.backoff.initial = std::chrono::milliseconds(j.value("backoff_initial_ms", 1000));
      spec.http.backoff.multiplier = j.value("backoff_multiplier", 2.0);
      spec.http.parallelism = j.value("parallelism", 1);
      spec.http.completion_path = j.value("completion_path", std::string("/completions"));
      spec.http.generation_path = j.value("generation_path", std::string("/generate"));
      if (j.contains("api_key_env")) spec.api_key_env = j.at("api_key_env").get<std::string>();
      validate(spec.http);
    } else if (spec.kind == "mock") {
      spec.fixture = j.at("fixture").get<std::string>();
      auto unknown = j.value("unknown", std::string("error"));
      if (unknown == "echo") {
        spec.unknown = UnknownPolicy::kEcho;
      } else if (unknown != "error") {
        throw ConfigError("mock 'unknown' policy must be 'error' or 'echo'");
      }
    } else if (spec.kind != "identity") {
      throw ConfigError("unknown backend kind '" + spec.kind + "'");
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad backend spec: ") + e.what());
  }
  return spec;
}

json BackendSpec::to_json() const {
  json j{{"kind", kind}};
  if (kind == "http") {
    j.update(http.redacted());
    j.erase("api_key_set");
    if (api_key_env) j["api_key_env"] = *api_key_env;
  } else if (kind == "mock") {
    j["fixture"] = fixture;
    j["unknown"] = unknown == UnknownPolicy::kEcho ? "echo" : "error";
  }
  return j;
}

namespace {

BackendConfig with_key(const BackendSpec& spec) {
  BackendConfig config = spec.http;
  if (spec.api_key_env) {
    if (const char* key = std::getenv(spec.api_key_env->c_str()); key && *key) config.api_key = std::string(key);
  }
  return config;
}

}  // namespace

std::unique_ptr<CompletionBackend> make_completion_backend(const BackendSpec& spec) {
  if (spec.kind == "http") return std::make_unique<HttpCompletionClient>(with_key(spec));
  if (spec.kind == "mock") return MockBackend::from_file(spec.fixture, spec.unknown);
  throw ConfigError("backend kind '" + spec.kind + "' cannot serve completions");
}

std::unique_ptr<GenerationBackend> make_generation_backend(const BackendSpec& spec) {
  if (spec.kind == "http") return std::make_unique<HttpGenerationClient>(with_key(spec));
  if (spec.kind == "mock") return MockBackend::from_file(spec.fixture, spec.unknown);
  if (spec.kind == "identity") return std::make_unique<IdentityGenerationBackend>();
  throw ConfigError("backend kind '" + spec.kind + "' cannot serve generation");
}

void run_bounded(std::size_t count, int parallelism, const std::function<void(std::size_t)>& fn) {
  if (count == 0) return;
  auto workers = static_cast<std::size_t>(std::max(parallelism, 1));
  workers = std::min(workers, count);
  if (workers == 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  {
    std::vector<std::jthread> threads;
    threads.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
      threads.emplace_back([&] {
        for (std::size_t i = next++; i < count; i = next++) {
          try {
            fn(i);
          } catch (...) {
            std::lock_guard lock(error_mutex);
            if (!first_error) first_error = std::current_exception();
          }
        }
      });
    }
  }
  if (first_error) std::rethrow_exception(first_error);
}

std::vector<GenerationOutcome> generate_batch(GenerationBackend& backend, const std::vector<std::string>& inputs,
                                              const DecodeConfig& decode, int parallelism) {
  std::vector<GenerationOutcome> outcomes(inputs.size());
  run_bounded(inputs.size(), parallelism, [&](std::size_t i) {
    try {
      outcomes[i].text = backend.generate(inputs[i], decode);
    } catch (const std::exception& e) {
      outcomes[i].error = e.what();
    }
  });
  return outcomes;
}

}  // namespace d2t
