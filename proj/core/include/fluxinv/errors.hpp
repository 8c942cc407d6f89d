#pragma once

#include <stdexcept>
#include <string>

namespace fluxinv {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Argument outside the mathematical domain of a function (e.g. Box-Cox of y <= 0).
class DomainError : public Error {
 public:
  using Error::Error;
};

// Model parameter outside its admissible range (e.g. |a| >= 1).
class ParameterError : public Error {
 public:
  using Error::Error;
};

// A factorization failed even after jitter.
class ConditioningError : public Error {
 public:
  using Error::Error;
};

// Degenerate sum of squared residuals; the flux conditional is improper.
class ImproprietyError : public Error {
 public:
  using Error::Error;
};

class SamplerError : public Error {
 public:
  using Error::Error;
};

// Malformed input file. `row` is the 1-based physical line number, 0 if not
// attributable to a line.
class FormatError : public Error {
 public:
  FormatError(const std::string& source, std::size_t row, const std::string& what)
      : Error(row > 0 ? source + ":" + std::to_string(row) + ": " + what
                      : source + ": " + what),
        row_(row) {}

  std::size_t row() const noexcept { return row_; }

 private:
  std::size_t row_;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace fluxinv
