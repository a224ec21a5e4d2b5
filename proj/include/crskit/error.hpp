#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace crskit {

// Root of every error the library raises on purpose. Anything else escaping
// a command is treated as an internal failure by the CLI.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class ConfigParseError : public ConfigError {
 public:
  ConfigParseError(const std::string& msg, int line)
      : ConfigError(msg + " (line " + std::to_string(line) + ")"), line_(line) {}
  int line() const noexcept { return line_; }

 private:
  int line_;
};

class MissingKeyError : public ConfigError {
 public:
  explicit MissingKeyError(const std::string& key)
      : ConfigError("missing config key: " + key), key_(key) {}
  const std::string& key() const noexcept { return key_; }

 private:
  std::string key_;
};

class UnknownKeyError : public ConfigError {
 public:
  explicit UnknownKeyError(const std::string& key)
      : ConfigError("unknown config key: " + key), key_(key) {}
  const std::string& key() const noexcept { return key_; }

 private:
  std::string key_;
};

class CorpusError : public Error {
 public:
  using Error::Error;
};

class IntegrityError : public CorpusError {
 public:
  using CorpusError::CorpusError;
};

class IngestError : public CorpusError {
 public:
  using CorpusError::CorpusError;
};

class BatchError : public Error {
 public:
  using Error::Error;
};

class ModelError : public Error {
 public:
  using Error::Error;
};

class TrainingError : public Error {
 public:
  using Error::Error;
};

class CheckpointError : public Error {
 public:
  using Error::Error;
};

class EvaluationError : public Error {
 public:
  using Error::Error;
};

// Errors surfaced by the interaction service. `code` is the machine-readable
// tag placed in the JSON error body.
class ServiceError : public Error {
 public:
  ServiceError(int status, std::string code, const std::string& msg,
               std::vector<std::string> details = {})
      : Error(msg), status_(status), code_(std::move(code)), details_(std::move(details)) {}
  int status() const noexcept { return status_; }
  const std::string& code() const noexcept { return code_; }
  const std::vector<std::string>& details() const noexcept { return details_; }

 private:
  int status_;
  std::string code_;
  std::vector<std::string> details_;
};

}  // namespace crskit
