#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "slo/metrics.hpp"

namespace slo {

/// Sparse nonnegative matrix mapping fluence values to voxel doses, stored
/// in compressed row form. Every forward or transpose product increments
/// the dose-multiplication counter of the supplied metrics object.
class DoseMatrix {
 public:
  struct Entry {
    int row = 0;
    int col = 0;
    double value = 0.0;
  };

  DoseMatrix() = default;  // empty placeholder; not usable until assigned
  DoseMatrix(int rows, int cols, std::vector<Entry> entries);

  static DoseMatrix identity(int n);

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  std::int64_t nonzeros() const { return static_cast<std::int64_t>(values_.size()); }
  bool empty() const { return rows_ == 0; }

  std::vector<double> apply(std::span<const double> x, RunMetrics& metrics) const;
  std::vector<double> apply_transpose(std::span<const double> v, RunMetrics& metrics) const;

  /// Visits entries in row-major order (row ascending, then column).
  template <typename F>
  void for_each_entry(F&& f) const {
    for (int r = 0; r < rows_; ++r)
      for (std::int64_t k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) f(r, col_idx_[k], values_[k]);
  }

  /// Number of nonzero entries in a given column.
  std::int64_t column_nonzeros(int col) const;

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<std::int64_t> row_ptr_;
  std::vector<int> col_idx_;
  std::vector<double> values_;
};

}  // namespace slo
