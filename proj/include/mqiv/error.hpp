#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>

namespace mqiv {

/// Bad arguments: wrong dimensions, out-of-range hyperparameters, invalid modes.
class ArgumentError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Malformed or invalid input data. Carries the offending row (1-based data
/// row, header excluded) and column when known.
class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& what,
                     std::optional<std::size_t> row = std::nullopt,
                     std::string column = {})
      : std::runtime_error(what), row_(row), column_(std::move(column)) {}

  std::optional<std::size_t> row() const noexcept { return row_; }
  const std::string& column() const noexcept { return column_; }

 private:
  std::optional<std::size_t> row_;
  std::string column_;
};

/// Failure while fitting learners or computing an estimate.
class EstimationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A training cell needed for a nuisance regression was empty.
class EmptyCellError : public EstimationError {
 public:
  EmptyCellError(std::string cell, int fold)
      : EstimationError("empty training cell " + cell + " in complement of fold " +
                        std::to_string(fold)),
        cell_(std::move(cell)),
        fold_(fold) {}

  const std::string& cell() const noexcept { return cell_; }
  int fold() const noexcept { return fold_; }

 private:
  std::string cell_;
  int fold_;
};

}  // namespace mqiv
