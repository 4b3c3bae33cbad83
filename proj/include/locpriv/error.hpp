#pragma once

#include <stdexcept>
#include <string>

namespace locpriv {

// Base of every error the library raises on its own. `kind()` is a short
// machine-readable tag used by the CLI error line.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& what)
      : std::runtime_error(what), kind_(std::move(kind)) {}

  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

// Configuration / input validation failure. Line is 0 when not tied to a
// source line.
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what, int line = 0)
      : Error("config", line > 0 ? "line " + std::to_string(line) + ": " + what : what),
        line_(line) {}

  int line() const noexcept { return line_; }

 private:
  int line_;
};

// The adversary observed a report that no real location could have produced.
class ImpossibleObservation : public Error {
 public:
  explicit ImpossibleObservation(const std::string& what) : Error("impossible-observation", what) {}
};

// Simplex failure: infeasible, unbounded, iteration limit, or a failed
// optimality certificate.
class SolverError : public Error {
 public:
  explicit SolverError(const std::string& what) : Error("solver", what) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error("io", what) {}
};

}  // namespace locpriv
