#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace backstory {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A value violates a type invariant. field() names the offending field.
class ValidationError : public Error {
 public:
  ValidationError(std::string field, const std::string& what)
      : Error(field + ": " + what), field_(std::move(field)) {}

  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

// Malformed input text. line() is 1-based, 0 when not line oriented.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line = 0,
             std::string raw = {})
      : Error(line ? "line " + std::to_string(line) + ": " + what : what),
        line_(line),
        raw_(std::move(raw)) {}

  std::size_t line() const noexcept { return line_; }
  const std::string& raw() const noexcept { return raw_; }

 private:
  std::size_t line_;
  std::string raw_;
};

class PreconditionError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Transport or protocol failure talking to a model backend.
class BackendError : public Error {
 public:
  using Error::Error;
};

// The backend cannot perform the requested kind of scoring.
class CapabilityError : public Error {
 public:
  using Error::Error;
};

// A statistic is mathematically undefined for the given input.
class UndefinedStatisticError : public Error {
 public:
  using Error::Error;
};

}  // namespace backstory
