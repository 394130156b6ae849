#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace nex {

enum class ErrorKind {
  MalformedRecord,
  NegativeMass,
  DuplicateNeuronInToken,
  NonContiguousPositions,
  EmptyTrace,
  DegenerateSeries,
  MissingEntropy,
  MissingLogprob,
  EmptySet,
  MinisetOverlap,
  ConstantInput,
  InvalidConfig,
  InvalidArgument,
  Io,
};

constexpr std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::MalformedRecord: return "MalformedRecord";
    case ErrorKind::NegativeMass: return "NegativeMass";
    case ErrorKind::DuplicateNeuronInToken: return "DuplicateNeuronInToken";
    case ErrorKind::NonContiguousPositions: return "NonContiguousPositions";
    case ErrorKind::EmptyTrace: return "EmptyTrace";
    case ErrorKind::DegenerateSeries: return "DegenerateSeries";
    case ErrorKind::MissingEntropy: return "MissingEntropy";
    case ErrorKind::MissingLogprob: return "MissingLogprob";
    case ErrorKind::EmptySet: return "EmptySet";
    case ErrorKind::MinisetOverlap: return "MinisetOverlap";
    case ErrorKind::ConstantInput: return "ConstantInput";
    case ErrorKind::InvalidConfig: return "InvalidConfig";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::Io: return "Io";
  }
  return "Unknown";
}

// Input or usage error. `line` is 1-based when the error points into a
// line-delimited file, 0 otherwise.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message, std::size_t line = 0)
      : std::runtime_error(format(kind, message, line)), kind_(kind), line_(line), message_(message) {}

  ErrorKind kind() const noexcept { return kind_; }
  std::size_t line() const noexcept { return line_; }
  const std::string& message() const noexcept { return message_; }

 private:
  static std::string format(ErrorKind kind, const std::string& message, std::size_t line) {
    std::string out(to_string(kind));
    if (line > 0) out += " at line " + std::to_string(line);
    out += ": ";
    out += message;
    return out;
  }

  ErrorKind kind_;
  std::size_t line_;
  std::string message_;
};

// Internal consistency failure (a bug, not bad input).
class InvariantViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace nex
