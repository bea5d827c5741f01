#pragma once

#include <stdexcept>
#include <string>

namespace citeie {

// Exit-code category carried by every library error; the CLI maps these
// directly onto its process exit status.
enum class ErrorKind { usage = 1, validation = 2, numerical = 3 };

class Error : public std::runtime_error {
public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

private:
  ErrorKind kind_;
};

class UsageError : public Error {
public:
  explicit UsageError(const std::string& what) : Error(ErrorKind::usage, what) {}
};

class ParseError : public Error {
public:
  ParseError(const std::string& what, std::size_t line)
      : Error(ErrorKind::validation, "line " + std::to_string(line) + ": " + what),
        line_(line) {}
  std::size_t line() const noexcept { return line_; }

private:
  std::size_t line_;
};

class ValidationError : public Error {
public:
  explicit ValidationError(const std::string& what)
      : Error(ErrorKind::validation, what) {}
};

class NumericalError : public Error {
public:
  explicit NumericalError(const std::string& what)
      : Error(ErrorKind::numerical, what) {}
};

}  // namespace citeie
