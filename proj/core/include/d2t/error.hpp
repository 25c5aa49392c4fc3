#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace d2t {

// Base of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A triple field that is empty after normalization or otherwise unusable.
class FieldError : public Error {
 public:
  using Error::Error;
};

// Malformed input bytes (XML, JSON, CSV). line() is 1-based, 0 when unknown.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line = 0)
      : Error(line ? what + " (line " + std::to_string(line) + ")" : what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

// Too many bad records in one corpus file, duplicate ids, and similar
// corpus-level failures. record_errors() holds one message per bad record.
class CorpusError : public Error {
 public:
  CorpusError(const std::string& what, std::vector<std::string> record_errors = {})
      : Error(what), record_errors_(std::move(record_errors)) {}
  const std::vector<std::string>& record_errors() const { return record_errors_; }

 private:
  std::vector<std::string> record_errors_;
};

// Subject or object could not be located in an LLM sentence.
class TemplateExtractionFailure : public Error {
 public:
  TemplateExtractionFailure(const std::string& what, std::string sentence)
      : Error(what), sentence_(std::move(sentence)) {}
  const std::string& sentence() const { return sentence_; }

 private:
  std::string sentence_;
};

class TemplateError : public Error {
 public:
  using Error::Error;
};

class BackendError : public Error {
 public:
  enum class Kind {
    kTransport,  // retries exhausted, connection failure, 429/5xx
    kConfig,     // non-retryable 4xx, bad URL
    kLookup,     // mock fixture miss
    kResponse,   // response body does not match the wire format
  };
  BackendError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

class FusionError : public Error {
 public:
  using Error::Error;
};

class MetricError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace d2t
