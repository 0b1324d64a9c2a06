#pragma once

#include <stdexcept>
#include <string>

namespace gflm {

/// Broad failure classes; the CLI maps each to an exit status.
enum class ErrorKind { Usage, Data, Numerical };

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

struct InvalidInput : Error {
  explicit InvalidInput(const std::string& w) : Error(ErrorKind::Data, w) {}
};

struct GridMismatch : Error {
  explicit GridMismatch(const std::string& w) : Error(ErrorKind::Data, w) {}
};

/// Grid too coarse for the requested derivative order.
struct ResolutionError : Error {
  explicit ResolutionError(const std::string& w) : Error(ErrorKind::Data, w) {}
};

struct RankError : Error {
  explicit RankError(const std::string& w) : Error(ErrorKind::Numerical, w) {}
};

struct NumericalError : Error {
  explicit NumericalError(const std::string& w) : Error(ErrorKind::Numerical, w) {}
};

struct ConvergenceError : Error {
  explicit ConvergenceError(const std::string& w) : Error(ErrorKind::Numerical, w) {}
};

struct TruncationError : Error {
  explicit TruncationError(const std::string& w) : Error(ErrorKind::Numerical, w) {}
};

struct UsageError : Error {
  explicit UsageError(const std::string& w) : Error(ErrorKind::Usage, w) {}
};

}  // namespace gflm
