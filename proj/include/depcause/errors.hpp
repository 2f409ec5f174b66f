#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace depcause {

// Base for every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Tensor shapes that do not fit together.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// A caller broke an operation's documented precondition.
class PreconditionError : public Error {
 public:
  using Error::Error;
};

// Data that is well-formed but semantically invalid (spans, trees, labels).
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Malformed input text. Carries the 1-based line number.
class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

// A JSON record missing a field or carrying the wrong type.
class SchemaError : public ParseError {
 public:
  SchemaError(std::size_t line, std::string field, const std::string& what)
      : ParseError(line, "field '" + field + "': " + what), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

// Non-finite values encountered where they must not appear (e.g. in gradients).
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace depcause
