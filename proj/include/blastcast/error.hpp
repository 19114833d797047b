#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace blastcast {

/// Failure categories. The CLI maps each one to a distinct exit status.
enum class ErrorKind {
  kConfig,
  kContract,
  kLayoutInfeasible,
  kSourceOccluded,
  kSolverFailure,
  kCorruptDataset,
  kMissingInput,
  kDiverged,
  kOutputExists,
};

std::string_view to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& m) : Error(ErrorKind::kConfig, m) {}
};

/// Shape or argument mismatch between caller and callee.
class ContractError : public Error {
 public:
  explicit ContractError(const std::string& m)
      : Error(ErrorKind::kContract, m) {}
};

class SolverError : public Error {
 public:
  explicit SolverError(const std::string& m)
      : Error(ErrorKind::kSolverFailure, m) {}
};

class CorruptDatasetError : public Error {
 public:
  explicit CorruptDatasetError(const std::string& m)
      : Error(ErrorKind::kCorruptDataset, m) {}
};

}  // namespace blastcast
