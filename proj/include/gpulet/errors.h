#ifndef GPULET_ERRORS_H_
#define GPULET_ERRORS_H_

#include <stdexcept>
#include <string>

namespace gpulet {

// Every failure raised by the library derives from Error so that callers
// (the CLI in particular) can map it to a nonzero exit code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input text (CSV/JSON). The message names the offending line.
class ParseError : public Error {
 public:
  using Error::Error;
};

// Well-formed input whose content violates a domain invariant.
class DataError : public Error {
 public:
  using Error::Error;
};

// Batch size beyond the largest tabulated batch.
class CapacityError : public Error {
 public:
  using Error::Error;
};

// Partition size that is not on a profile's grid.
class GridError : public Error {
 public:
  using Error::Error;
};

// Operation applied to a gpulet in the wrong allocation state.
class StateError : public Error {
 public:
  using Error::Error;
};

// Temporal merge attempted between gpulets that are not sharable.
class PredicateError : public Error {
 public:
  using Error::Error;
};

// Invalid or inconsistent configuration (missing profile, bad grid, ...).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Least-squares fit could not be computed.
class FitError : public Error {
 public:
  using Error::Error;
};

// Search budget exhausted.
class ResourceError : public Error {
 public:
  using Error::Error;
};

}  // namespace gpulet

#endif  // GPULET_ERRORS_H_
