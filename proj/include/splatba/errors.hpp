#pragma once

#include <stdexcept>
#include <string>

namespace splatba {

/// Value outside the mathematical domain of an operation (fov, depth, ...).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Input vectors are (near-)parallel or (near-)zero.
class DegeneracyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ArgumentError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// API called in the wrong order, e.g. backward without a matching forward.
class UsageError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& file, std::size_t offset, const std::string& what)
      : std::runtime_error(file + " @ byte " + std::to_string(offset) + ": " + what),
        file_(file),
        offset_(offset) {}

  const std::string& file() const noexcept { return file_; }
  std::size_t offset() const noexcept { return offset_; }

 private:
  std::string file_;
  std::size_t offset_;
};

class SamplingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class GenerationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Optimization produced a non-finite loss or an undecodable parameter.
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(std::string parameter_class, const std::string& what)
      : std::runtime_error(what), parameter_class_(std::move(parameter_class)) {}
  const std::string& parameter_class() const noexcept { return parameter_class_; }

 private:
  std::string parameter_class_;
};

}  // namespace splatba
