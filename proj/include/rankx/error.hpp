#pragma once

#include <stdexcept>
#include <string>

namespace rankx {

/// Base for all errors raised by the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input (bad JSON, bad line in a corpus file).
class ParseError : public Error {
 public:
  using Error::Error;
};

/// Well-formed input that violates a data invariant or a precondition.
class ValidationError : public Error {
 public:
  using Error::Error;
};

}  // namespace rankx
