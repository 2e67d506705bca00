#pragma once

#include <stdexcept>
#include <string>

namespace cyin {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

class DomainError : public Error {
 public:
  using Error::Error;
};

class ArityError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class ProtocolError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  using Error::Error;
};

class TaskMismatchError : public Error {
 public:
  using Error::Error;
};

class NumericalError : public Error {
 public:
  using Error::Error;
};

class IncompatibleCheckpointError : public Error {
 public:
  using Error::Error;
};

/// Raised when a training step produces a non-finite loss component.
class DivergenceError : public Error {
 public:
  DivergenceError(long step, std::string component)
      : Error("training diverged at step " + std::to_string(step) +
              ": non-finite " + component),
        step_(step),
        component_(std::move(component)) {}

  long step() const noexcept { return step_; }
  const std::string& component() const noexcept { return component_; }

 private:
  long step_;
  std::string component_;
};

}  // namespace cyin
