#ifndef FIELDSPACE_ERRORS_HPP_
#define FIELDSPACE_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace fieldspace {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Matrix is asymmetric, not positive definite, or not finite.
class MatrixError : public Error {
 public:
  using Error::Error;
};

// Malformed JSON text.
class SyntaxError : public Error {
 public:
  using Error::Error;
};

// Well-formed JSON that does not describe a valid restriction document.
class SchemaError : public Error {
 public:
  using Error::Error;
};

class GeometryError : public Error {
 public:
  using Error::Error;
};

class RangeError : public Error {
 public:
  using Error::Error;
};

class DuplicateId : public Error {
 public:
  using Error::Error;
};

class UnknownCollection : public Error {
 public:
  using Error::Error;
};

class TtlRange : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Unreadable or invalid service configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

class NoRoute : public Error {
 public:
  using Error::Error;
};

// Start or goal lies in a blocked cell.
class OutOfBounds : public Error {
 public:
  using Error::Error;
};

class DegenerateRequest : public Error {
 public:
  using Error::Error;
};

}  // namespace fieldspace

#endif  // FIELDSPACE_ERRORS_HPP_
