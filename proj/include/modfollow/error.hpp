#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace modfollow {

/// Invalid or inconsistent configuration (dataset config, mock params, analysis config).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Scene placement or file generation failed.
class GenerationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A caller broke a documented precondition (negative entropy, tier out of range, ...).
class ContractViolation : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// An analysis stage could not produce a result. `stage()` names the stage.
class AnalysisError : public std::runtime_error {
 public:
  AnalysisError(std::string stage, const std::string& message)
      : std::runtime_error(stage + ": " + message), stage_(std::move(stage)) {}

  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

}  // namespace modfollow
