#ifndef DRL_ERROR_HPP_
#define DRL_ERROR_HPP_

#include <stdexcept>
#include <string>

namespace drl {

// Base of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed JSON or an unreadable file.
class ParseError : public Error {
 public:
  using Error::Error;
};

// Structurally valid input that violates the run-file schema.
class SchemaError : public Error {
 public:
  using Error::Error;
};

// Factory lookup with an unregistered key.
class UnknownKeyError : public Error {
 public:
  explicit UnknownKeyError(const std::string& key)
      : Error("Unknown key provided: " + key), key_(key) {}
  const std::string& key() const { return key_; }

 private:
  std::string key_;
};

// Dimension or shape mismatch between cooperating objects.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// NaN/inf in a loss, gradient or parameter.
class NumericError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace drl

#endif  // DRL_ERROR_HPP_
