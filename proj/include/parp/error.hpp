#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace parp {

/// Base of every error raised by the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad configuration: shape mismatch, invalid hyperparameter, unknown id.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Caller-supplied data violates an operation's precondition.
class InputError : public Error {
 public:
  using Error::Error;
};

/// Non-finite values reached an optimizer or a kernel.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// CTC target cannot be aligned within the available frames.
class InfeasibleTargetError : public Error {
 public:
  InfeasibleTargetError(std::size_t frames, std::size_t required)
      : Error("ctc target needs " + std::to_string(required) + " frames, got " +
              std::to_string(frames)),
        frames_(frames),
        required_(required) {}

  std::size_t frames() const { return frames_; }
  std::size_t required() const { return required_; }

 private:
  std::size_t frames_;
  std::size_t required_;
};

/// A mask was used with a parameter layout it was not built for.
class BindingError : public Error {
 public:
  using Error::Error;
};

/// Malformed mask, checkpoint or dataset file.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Training failed mid-run.
class RunError : public Error {
 public:
  RunError(const std::string& what, std::int64_t step)
      : Error(what + " (step " + std::to_string(step) + ")"), step_(step) {}

  std::int64_t step() const { return step_; }

 private:
  std::int64_t step_;
};

/// Malformed run record or report input.
class ParseError : public Error {
 public:
  using Error::Error;
};

}  // namespace parp
