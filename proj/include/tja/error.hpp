#pragma once

#include <stdexcept>
#include <string>

namespace tja {

// Base class for every failure raised by the library. The CLI maps the
// subclasses below onto exit statuses.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Input that does not describe a valid domain object.
class ValidationError : public Error {
public:
  using Error::Error;
};

class NotAGraph : public ValidationError {
public:
  using ValidationError::ValidationError;
};

class InvalidConnection : public ValidationError {
public:
  using ValidationError::ValidationError;
};

class KnotBudgetTooSmall : public ValidationError {
public:
  using ValidationError::ValidationError;
};

class GridMismatch : public ValidationError {
public:
  using ValidationError::ValidationError;
};

class EpsilonTooLarge : public ValidationError {
public:
  using ValidationError::ValidationError;
};

class ConfigError : public ValidationError {
public:
  using ValidationError::ValidationError;
};

class NonConvergence : public Error {
public:
  using Error::Error;
};

// Two jump segments meet at an angle >= pi; the verifier only builds the
// triangular junction cell.
class Case2NotSupported : public Error {
public:
  using Error::Error;
};

}  // namespace tja
