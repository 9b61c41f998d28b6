#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace lipfit {

enum class ErrorKind {
  Dimension,
  Convergence,
  Numeric,
  Domain,
  InfeasibleData,
  Argument,
  Contract,
  Divergence,
  Calibration,
  Config,
  Io,
};

std::string_view to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

// Power iteration ran out of iterations; carries the last estimate.
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, double last_iterate)
      : Error(ErrorKind::Convergence, what), last_iterate_(last_iterate) {}
  double last_iterate() const noexcept { return last_iterate_; }

 private:
  double last_iterate_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

inline void require(bool cond, ErrorKind kind, const std::string& what) {
  if (!cond) fail(kind, what);
}

}  // namespace lipfit
