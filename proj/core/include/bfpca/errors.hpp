#pragma once

#include <stdexcept>
#include <string>

namespace bfpca {

// Base for every error raised by the library. The CLI maps each subclass to a
// distinct exit code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid configuration, malformed input, or violated precondition.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// A natural-parameter vector that does not describe a proper density when one
// is required (singular precision, non-positive scale, ...).
class DegenerateError : public Error {
 public:
  using Error::Error;
};

// A read of a message that was never written to the store.
class UninitializedGraphError : public Error {
 public:
  using Error::Error;
};

// Fitted basis functions do not span L dimensions.
class RankError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace bfpca
