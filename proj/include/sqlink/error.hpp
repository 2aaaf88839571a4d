#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace sqlink {

// Base for every error raised by this library.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed input text. `offset` is the byte offset of the offending token
// (input size when the problem is an unexpected end of input).
class ParseError : public Error {
 public:
  ParseError(const std::string& msg, std::size_t offset)
      : Error(msg + " at offset " + std::to_string(offset)), offset_(offset) {}
  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_;
};

// Statement is syntactically valid but outside the supported SELECT dialect.
class UnsupportedStatementError : public Error {
 public:
  using Error::Error;
};

// Structural invariant breach (duplicate ids, dangling foreign keys, ...).
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Identifier does not resolve against the catalog.
class ResolutionError : public Error {
 public:
  explicit ResolutionError(const std::string& identifier)
      : Error("cannot resolve identifier '" + identifier + "'"),
        identifier_(identifier) {}
  const std::string& identifier() const { return identifier_; }

 private:
  std::string identifier_;
};

// Unqualified column owned by more than one table in scope.
class AmbiguityError : public Error {
 public:
  explicit AmbiguityError(const std::string& identifier)
      : Error("ambiguous identifier '" + identifier + "'"),
        identifier_(identifier) {}
  const std::string& identifier() const { return identifier_; }

 private:
  std::string identifier_;
};

// Input whose feature/embedding vector is identically zero.
class DegenerateInputError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Loss became non-finite during optimization.
class TrainingDivergedError : public Error {
 public:
  TrainingDivergedError(const std::string& msg, int epoch)
      : Error(msg + " (epoch " + std::to_string(epoch) + ")"), epoch_(epoch) {}
  int epoch() const { return epoch_; }

 private:
  int epoch_;
};

// Sequence-encoder provider failure. Remote providers mark retryable=true.
class EncoderError : public Error {
 public:
  EncoderError(const std::string& msg, bool retryable)
      : Error(msg), retryable_(retryable) {}
  bool retryable() const { return retryable_; }

 private:
  bool retryable_;
};

// No JSON object / SQL text could be extracted from an LLM response.
class UnparseableResponseError : public Error {
 public:
  using Error::Error;
};

// Transport-level failure talking to a remote endpoint, retries exhausted.
class ClientError : public Error {
 public:
  using Error::Error;
};

// A precondition of an operation was violated by the caller.
class PreconditionError : public Error {
 public:
  using Error::Error;
};

}  // namespace sqlink
