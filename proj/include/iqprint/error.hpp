#pragma once

#include <stdexcept>
#include <string>

namespace iqprint {

// Base for every error raised by the library. Messages are meant to be
// printed verbatim on stderr by the CLI.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Caller supplied an argument outside the operation's domain.
class ParameterError : public Error {
 public:
  using Error::Error;
};

// Tensor or sequence dimensions do not agree.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// On-disk data is malformed, truncated or unsupported.
class FormatError : public Error {
 public:
  using Error::Error;
};

// Filesystem failures, always carrying the offending path.
class IoError : public Error {
 public:
  using Error::Error;
};

// Misuse of the differentiation graph (detached or already consumed).
class GraphError : public Error {
 public:
  using Error::Error;
};

// Invalid run configuration (unknown keys, bad values).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Training produced a non-finite loss or gradient.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

}  // namespace iqprint
