#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace mqiv {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Observed data O = (Y, A, Z, X) for N units. Immutable once built; the
/// factory checks lengths, binary coding of A and Z, and finiteness of Y and X.
class Dataset {
 public:
  Dataset(std::vector<double> y, std::vector<std::uint8_t> a, std::vector<std::uint8_t> z,
          RowMatrix x, std::vector<std::string> covariate_names = {});

  std::size_t n() const noexcept { return y_.size(); }
  std::size_t d() const noexcept { return static_cast<std::size_t>(x_.cols()); }

  const std::vector<double>& y() const noexcept { return y_; }
  const std::vector<std::uint8_t>& a() const noexcept { return a_; }
  const std::vector<std::uint8_t>& z() const noexcept { return z_; }
  const RowMatrix& x() const noexcept { return x_; }
  std::span<const double> row(std::size_t i) const noexcept {
    return {x_.data() + i * d(), d()};
  }
  const std::vector<std::string>& covariate_names() const noexcept { return names_; }

  std::size_t n_treated() const noexcept;
  double treated_fraction() const noexcept;

  /// Rows `idx` as a new dataset (order preserved).
  Dataset subset(std::span<const std::size_t> idx) const;

 private:
  std::vector<double> y_;
  std::vector<std::uint8_t> a_;
  std::vector<std::uint8_t> z_;
  RowMatrix x_;
  std::vector<std::string> names_;
};

struct ColumnMapping {
  std::string outcome_column = "y";
  std::string treatment_column = "a";
  std::string instrument_column = "z";
  std::vector<std::string> covariate_columns;

  /// Throws ArgumentError on duplicate names or an empty covariate list.
  void check() const;
};

/// Reads a comma-separated file with a header row. Columns not named in the
/// mapping are ignored. Errors name the column or the 1-based data row.
Dataset load_csv(const std::filesystem::path& path, const ColumnMapping& mapping);

/// Extra numeric columns appended after the dataset columns (e.g. latents).
struct ExtraColumn {
  std::string name;
  std::vector<double> values;
};

/// Writes y,a,z,<covariates>[,extras]. Reals use 17 significant digits so a
/// load round-trips bit-for-bit.
void save_csv(const std::filesystem::path& path, const Dataset& ds,
              std::span<const ExtraColumn> extras = {});
void write_csv(std::ostream& os, const Dataset& ds, std::span<const ExtraColumn> extras = {});

struct ValidationReport {
  std::size_t n_total = 0;
  std::size_t n_treated = 0;
  /// n_by_cell[a][z]
  std::size_t n_by_cell[2][2] = {{0, 0}, {0, 0}};
  double marginal_relevance = 0.0;
  std::vector<std::string> warnings;
};

inline constexpr double kWeakRelevanceThreshold = 0.02;

ValidationReport validate(const Dataset& ds);

struct FoldAssignment {
  std::vector<int> fold_of;
  int k = 0;

  std::vector<std::size_t> members(int fold) const;
  std::vector<std::size_t> complement(int fold) const;
};

/// Balanced seeded partition of {0..n-1} into k folds. Requires 2 <= k <= n.
FoldAssignment split_folds(std::size_t n, int k, std::uint64_t seed);

}  // namespace mqiv
