#include "slo/dose_matrix.hpp"

#include <algorithm>
#include <string>

#include "slo/errors.hpp"

namespace slo {

DoseMatrix::DoseMatrix(int rows, int cols, std::vector<Entry> entries)
    : rows_(rows), cols_(cols) {
  if (rows < 1 || cols < 1)
    throw InvalidInput("dose matrix dimensions must be positive, got " + std::to_string(rows) +
                       "x" + std::to_string(cols));
  for (const auto& e : entries) {
    if (e.row < 0 || e.row >= rows || e.col < 0 || e.col >= cols)
      throw InvalidInput("dose matrix entry (" + std::to_string(e.row) + "," +
                         std::to_string(e.col) + ") outside " + std::to_string(rows) + "x" +
                         std::to_string(cols));
    if (!(e.value >= 0.0))
      throw InvalidInput("dose matrix entries must be nonnegative finite, got " +
                         std::to_string(e.value) + " at (" + std::to_string(e.row) + "," +
                         std::to_string(e.col) + ")");
  }
  std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
    return a.row != b.row ? a.row < b.row : a.col < b.col;
  });
  // merge duplicate coordinates
  std::size_t w = 0;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (w > 0 && entries[w - 1].row == entries[i].row && entries[w - 1].col == entries[i].col)
      entries[w - 1].value += entries[i].value;
    else
      entries[w++] = entries[i];
  }
  entries.resize(w);

  row_ptr_.assign(rows + 1, 0);
  col_idx_.reserve(entries.size());
  values_.reserve(entries.size());
  for (const auto& e : entries) {
    col_idx_.push_back(e.col);
    values_.push_back(e.value);
    ++row_ptr_[e.row + 1];
  }
  for (int r = 0; r < rows; ++r) row_ptr_[r + 1] += row_ptr_[r];
}

DoseMatrix DoseMatrix::identity(int n) {
  std::vector<Entry> entries;
  entries.reserve(n);
  for (int i = 0; i < n; ++i) entries.push_back({i, i, 1.0});
  return DoseMatrix(n, n, std::move(entries));
}

std::vector<double> DoseMatrix::apply(std::span<const double> x, RunMetrics& metrics) const {
  if (static_cast<int>(x.size()) != cols_)
    throw InvalidInput("dose multiply: vector has " + std::to_string(x.size()) +
                       " entries, matrix has " + std::to_string(cols_) + " columns");
  metrics.add_dose_mult();
  std::vector<double> out(rows_, 0.0);
  for (int r = 0; r < rows_; ++r) {
    double acc = 0.0;
    for (std::int64_t k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k)
      acc += values_[k] * x[col_idx_[k]];
    out[r] = acc;
  }
  return out;
}

std::vector<double> DoseMatrix::apply_transpose(std::span<const double> v,
                                                RunMetrics& metrics) const {
  if (static_cast<int>(v.size()) != rows_)
    throw InvalidInput("transpose multiply: vector has " + std::to_string(v.size()) +
                       " entries, matrix has " + std::to_string(rows_) + " rows");
  metrics.add_dose_mult();
  std::vector<double> out(cols_, 0.0);
  for (int r = 0; r < rows_; ++r) {
    const double vr = v[r];
    if (vr == 0.0) continue;
    for (std::int64_t k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k)
      out[col_idx_[k]] += values_[k] * vr;
  }
  return out;
}

std::int64_t DoseMatrix::column_nonzeros(int col) const {
  std::int64_t n = 0;
  for (int c : col_idx_)
    if (c == col) ++n;
  return n;
}

}  // namespace slo
