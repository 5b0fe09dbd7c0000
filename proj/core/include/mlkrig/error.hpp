#pragma once

#include <stdexcept>
#include <string>

namespace mlkrig {

// Invalid input or configuration. The CLI maps this to exit code 2.
class ConfigError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Factorization or iteration failure. The CLI maps this to exit code 3.
class NumericalError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Sparse Cholesky hit a non-positive pivot.
class NotSpdError : public NumericalError {
public:
  NotSpdError(const std::string &what, long column)
      : NumericalError(what), column_(column) {}
  long column() const { return column_; }

private:
  long column_;
};

} // namespace mlkrig
