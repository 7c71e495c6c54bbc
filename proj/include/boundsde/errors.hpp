#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace boundsde {

/// Invalid argument to a public operation (out-of-range day number, bad quantile level, ...).
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Model parameters outside their admissible domain.
class ParameterError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A caller broke an operation's precondition on derived data (e.g. r outside [eps, 1-eps]).
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Malformed input file. Carries the 1-based row of the offending line when known.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& source, std::size_t row, const std::string& what)
      : std::runtime_error(source + ": row " + std::to_string(row) + ": " + what), row_(row) {}
  explicit ParseError(const std::string& what) : std::runtime_error(what), row_(0) {}

  std::size_t row() const noexcept { return row_; }

 private:
  std::size_t row_;
};

/// Input data are structurally valid but unusable (empty series, no daylight, ...).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Integration or estimation produced a nonfinite or otherwise unusable result.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Conditional moments cannot be matched by the requested surrogate family.
class MomentInfeasible : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// Missing or malformed configuration entry.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Nonfatal conditions collected by an operation (skipped days, clipped values, fallbacks).
struct Warnings {
  std::vector<std::string> messages;

  void add(std::string message) { messages.push_back(std::move(message)); }
  bool empty() const { return messages.empty(); }
};

inline void warn(Warnings* sink, std::string message) {
  if (sink) sink->add(std::move(message));
}

}  // namespace boundsde
