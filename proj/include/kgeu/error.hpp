#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace kgeu {

/// Broad failure classes; each maps onto a process exit code in the CLI.
enum class ErrorKind {
  usage = 1,
  data = 2,
  numeric = 3,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }
  int exit_code() const noexcept { return static_cast<int>(kind_); }

 private:
  ErrorKind kind_;
};

/// Invalid configuration values (rates, dimensions, paths).
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(ErrorKind::usage, "config error: " + what) {}
};

class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error(ErrorKind::data, "parse error at line " + std::to_string(line) + ": " + what), line_(line) {}
  explicit ParseError(const std::string& what) : Error(ErrorKind::data, "parse error: " + what) {}

  /// 1-based line number, 0 when the error is not tied to a line.
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_ = 0;
};

/// Arguments outside an operation's domain (bad ids, empty sets).
class DomainError : public Error {
 public:
  explicit DomainError(const std::string& what) : Error(ErrorKind::data, "domain error: " + what) {}
};

class IoError : public Error {
 public:
  IoError(const std::string& path, const std::string& what)
      : Error(ErrorKind::data, "i/o error on '" + path + "': " + what), path_(path) {}

  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

class SamplingError : public Error {
 public:
  explicit SamplingError(const std::string& what) : Error(ErrorKind::data, "sampling error: " + what) {}
};

class ConstructionError : public Error {
 public:
  explicit ConstructionError(const std::string& what)
      : Error(ErrorKind::data, "construction error: " + what) {}
};

/// Non-finite values encountered in a loss or gradient.
class NumericError : public Error {
 public:
  explicit NumericError(const std::string& what) : Error(ErrorKind::numeric, "numeric error: " + what) {}
};

class TrainingError : public Error {
 public:
  TrainingError(std::size_t epoch, const std::string& what)
      : Error(ErrorKind::numeric, "training error at epoch " + std::to_string(epoch) + ": " + what),
        epoch_(epoch) {}

  std::size_t epoch() const noexcept { return epoch_; }

 private:
  std::size_t epoch_;
};

}  // namespace kgeu
