#pragma once

#include <stdexcept>
#include <string>

namespace vibtac {

// Base of every error thrown by the library. The CLI maps subclasses onto
// exit codes, so keep the hierarchy shallow.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Numerical failures (exit code 4).
class NumericalError : public Error {
 public:
  using Error::Error;
};

class NotPositiveDefinite : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class NoConvergence : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class RidgeTooSmall : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class UnstableMode : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class DegenerateVariance : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

// Contract violations on inputs (exit code 2 when they come from config).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class DimensionMismatch : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

class CutoffAboveNyquist : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

class BadTraceLength : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

class EmptyClass : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

class SingleClassInput : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

class ClassTooSmall : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

class ConfigError : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

// File and format problems (exit code 3).
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace vibtac
