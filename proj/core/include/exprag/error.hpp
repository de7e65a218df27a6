#pragma once

#include <stdexcept>
#include <string>

namespace exprag {

// Root of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input text (store record, config file, wire reply).
class ParseError : public Error {
 public:
  ParseError(const std::string& field, const std::string& what)
      : Error("parse error at '" + field + "': " + what), field_(field) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

// Well-formed input that violates a domain invariant.
class ValidationError : public Error {
 public:
  using Error::Error;
};

class RangeError : public Error {
 public:
  using Error::Error;
};

class FormatError : public Error {
 public:
  using Error::Error;
};

class DimensionMismatch : public Error {
 public:
  DimensionMismatch(std::size_t expected, std::size_t actual)
      : Error("dimension mismatch: expected " + std::to_string(expected) +
              ", got " + std::to_string(actual)),
        expected_(expected),
        actual_(actual) {}
  std::size_t expected() const noexcept { return expected_; }
  std::size_t actual() const noexcept { return actual_; }

 private:
  std::size_t expected_;
  std::size_t actual_;
};

class DegenerateInput : public Error {
 public:
  using Error::Error;
};

// Remote endpoint failures.
class TransportError : public Error {
 public:
  using Error::Error;
};

class HttpStatusError : public Error {
 public:
  HttpStatusError(int status, const std::string& body)
      : Error("HTTP status " + std::to_string(status) + ": " + body),
        status_(status) {}
  int status() const noexcept { return status_; }

 private:
  int status_;
};

// Persisted index problems.
class IndexVersionError : public Error {
 public:
  using Error::Error;
};

class CorruptIndexError : public Error {
 public:
  using Error::Error;
};

// External environment adapter.
class HandshakeError : public Error {
 public:
  using Error::Error;
};

class ProtocolError : public Error {
 public:
  ProtocolError(const std::string& what, std::string raw_line)
      : Error(what + ": " + raw_line), raw_line_(std::move(raw_line)) {}
  const std::string& raw_line() const noexcept { return raw_line_; }

 private:
  std::string raw_line_;
};

class TimeoutError : public Error {
 public:
  using Error::Error;
};

// Step issued on a finished episode.
class ContractError : public Error {
 public:
  using Error::Error;
};

// Policy backend gave up after its retry budget; the step is recorded as invalid.
class PolicyUnavailable : public Error {
 public:
  using Error::Error;
};

// Non-retriable policy failure; the episode ends as a failure.
class PolicyError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace exprag
