#ifndef WSR_ERROR_HPP
#define WSR_ERROR_HPP

#include <stdexcept>
#include <string>

namespace wsr {

/// Base class for every error raised by the engine.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input: bad magic, truncated file, CSV syntax, unsupported version.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Well-formed input that violates a data invariant (duplicate ids, empty
/// candidate pool, dimension mismatch, ...).
class DataError : public Error {
 public:
  using Error::Error;
};

}  // namespace wsr

#endif  // WSR_ERROR_HPP
