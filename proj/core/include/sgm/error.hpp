#pragma once

#include <stdexcept>
#include <string>

namespace sgm {

enum class ErrorKind {
  kInvalidInput,
  kDegenerateInput,
  kResourceLimit,
  kSolverFailure,
  kParse,
};

/// Base exception for everything thrown by the library. The kind drives the
/// CLI exit code.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

inline Error invalid_input(const std::string& what) { return {ErrorKind::kInvalidInput, what}; }
inline Error degenerate_input(const std::string& what) { return {ErrorKind::kDegenerateInput, what}; }
inline Error resource_limit(const std::string& what) { return {ErrorKind::kResourceLimit, what}; }
inline Error solver_failure(const std::string& what) { return {ErrorKind::kSolverFailure, what}; }
inline Error parse_error(const std::string& what) { return {ErrorKind::kParse, what}; }

}  // namespace sgm
