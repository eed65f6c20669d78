#pragma once

#include <stdexcept>
#include <string>

namespace shellflow {

// Every failure mode maps to a distinct process exit code in the CLI.
enum class ErrorKind {
  Usage = 2,
  Config = 3,
  Io = 4,
  Domain = 10,
  Degeneracy = 11,
  Shape = 12,
  Projection = 13,
  Convergence = 14,
  Decomposition = 15,
  MeshTangling = 16,
  GraphViolation = 17,
  LinearSolver = 18,
  PicardDivergence = 19,
  PicardNoContraction = 20,
  BallExceeded = 21,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const { return kind_; }
  int exit_code() const { return static_cast<int>(kind_); }

 private:
  ErrorKind kind_;
};

const char* error_kind_name(ErrorKind kind);

}  // namespace shellflow
