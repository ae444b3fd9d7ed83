#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace ousym {

enum class ErrorKind {
  DimensionMismatch,
  NonPositiveFriction,
  ZeroNoise,
  EmptyProbeSet,
  NonFiniteEvaluation,
  NonFiniteResult,
  NotAnInvariant,
  UnclassifiableForce,
  NotDiagonalizable,
  WrongForceClass,
  InvalidGrid,
  NonFiniteState,
  DomainExit,
  SyntaxError,
  UnknownIdentifier,
  ArityMismatch,
  DomainError,
  InvalidArgument,
  DerivativeOrderExhausted,
};

std::string_view to_string(ErrorKind kind);

/// All validation failures raised by the library carry a kind.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// Parse failure; `offset` is the 1-based byte position of the offending token.
class SyntaxError : public Error {
 public:
  SyntaxError(std::size_t offset, const std::string& what)
      : Error(ErrorKind::SyntaxError, what + " at offset " + std::to_string(offset)),
        offset_(offset) {}

  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

}  // namespace ousym
