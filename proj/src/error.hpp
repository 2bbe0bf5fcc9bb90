#pragma once

#include <stdexcept>
#include <string>

namespace coevo {

enum class ErrorCode {
  invalid_argument,
  config,
  model,
  invariant,
  nullcline_not_found,
  consensus_boundary,
  closure_singular,
  continuation_failed,
  integration,
};

/// Base exception for every failure raised by the toolkit. The code maps
/// one-to-one onto the C API status values and onto CLI exit codes.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what, std::string field = {})
      : std::runtime_error(what), code_(code), field_(std::move(field)) {}

  ErrorCode code() const noexcept { return code_; }
  /// Offending configuration field or parameter, empty when not applicable.
  const std::string& field() const noexcept { return field_; }

 private:
  ErrorCode code_;
  std::string field_;
};

class ConfigError : public Error {
 public:
  ConfigError(const std::string& what, std::string field = {})
      : Error(ErrorCode::config, what, std::move(field)) {}
};

class ModelError : public Error {
 public:
  ModelError(const std::string& what, std::string field = {})
      : Error(ErrorCode::model, what, std::move(field)) {}
};

class InvariantViolation : public Error {
 public:
  explicit InvariantViolation(const std::string& what)
      : Error(ErrorCode::invariant, what) {}
};

class NullclineNotFound : public Error {
 public:
  explicit NullclineNotFound(const std::string& what)
      : Error(ErrorCode::nullcline_not_found, what) {}
};

class ConsensusBoundary : public Error {
 public:
  explicit ConsensusBoundary(const std::string& what)
      : Error(ErrorCode::consensus_boundary, what) {}
};

class ClosureSingular : public Error {
 public:
  explicit ClosureSingular(const std::string& what)
      : Error(ErrorCode::closure_singular, what) {}
};

class ContinuationFailed : public Error {
 public:
  explicit ContinuationFailed(const std::string& what)
      : Error(ErrorCode::continuation_failed, what) {}
};

class IntegrationError : public Error {
 public:
  IntegrationError(const std::string& what, double last_valid_time)
      : Error(ErrorCode::integration, what), last_valid_time_(last_valid_time) {}
  double last_valid_time() const noexcept { return last_valid_time_; }

 private:
  double last_valid_time_;
};

inline void require(bool ok, const std::string& what, const std::string& field = {}) {
  if (!ok) throw Error(ErrorCode::invalid_argument, what, field);
}

}  // namespace coevo
