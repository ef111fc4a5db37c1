#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace acde {

// Base of every error raised by the library. The CLI maps `usage` errors to
// exit code 1 and everything else to exit code 2.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual bool usage() const noexcept { return false; }
};

// Malformed input file (bad cell, missing column, ...).
class ParseError : public Error {
 public:
  ParseError(std::size_t row, std::string column, const std::string& what)
      : Error(what), row_(row), column_(std::move(column)) {}

  std::size_t row() const noexcept { return row_; }
  const std::string& column() const noexcept { return column_; }
  bool usage() const noexcept override { return true; }

 private:
  std::size_t row_;
  std::string column_;
};

// An argument outside an operation's precondition (eta <= 0, gamma < 1, ...).
class DomainError : public Error {
 public:
  using Error::Error;
  bool usage() const noexcept override { return true; }
};

class DatasetTooSmallError : public Error {
 public:
  using Error::Error;
  bool usage() const noexcept override { return true; }
};

// The data cannot support the requested computation.
class InfeasibleError : public Error {
 public:
  explicit InfeasibleError(const std::string& what,
                           std::vector<std::size_t> indices = {})
      : Error(what), indices_(std::move(indices)) {}

  // Individuals responsible for the failure, when applicable.
  const std::vector<std::size_t>& indices() const noexcept { return indices_; }

 private:
  std::vector<std::size_t> indices_;
};

// Statistic with zero variance (every slope zero).
class DegenerateError : public Error {
 public:
  using Error::Error;
};

// Exhaustive enumeration would exceed its budget; use Monte Carlo instead.
class BudgetError : public Error {
 public:
  using Error::Error;
};

}  // namespace acde
