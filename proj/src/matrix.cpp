#include "fusemean/matrix.hpp"

#include <algorithm>
#include <cmath>

namespace fusemean {

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> rows)
{
  rows_ = rows.size();
  cols_ = rows_ == 0 ? 0 : rows.begin()->size();
  data_.reserve(rows_ * cols_);
  for (const auto& r : rows) {
    if (r.size() != cols_)
      throw std::invalid_argument("Matrix: ragged initializer");
    data_.insert(data_.end(), r.begin(), r.end());
  }
}

Matrix
Matrix::from_rows(const std::vector<std::vector<double>>& rows,
                  std::size_t cols)
{
  Matrix out(0, cols);
  out.data_.reserve(rows.size() * cols);
  for (const auto& r : rows)
    out.append_row(r);
  return out;
}

void
Matrix::append_row(std::span<const double> values)
{
  if (rows_ == 0 && cols_ == 0)
    cols_ = values.size();
  if (values.size() != cols_)
    throw std::invalid_argument("Matrix::append_row: width mismatch");
  data_.insert(data_.end(), values.begin(), values.end());
  ++rows_;
}

Matrix
Matrix::select_rows(std::span<const std::size_t> indices) const
{
  Matrix out(indices.size(), cols_);
  for (std::size_t k = 0; k < indices.size(); ++k) {
    auto src = row(indices[k]);
    std::copy(src.begin(), src.end(), out.row(k).begin());
  }
  return out;
}

Matrix
Matrix::select_cols(std::span<const int> columns) const
{
  Matrix out(rows_, columns.size());
  for (std::size_t i = 0; i < rows_; ++i)
    for (std::size_t k = 0; k < columns.size(); ++k)
      out(i, k) = (*this)(i, static_cast<std::size_t>(columns[k]));
  return out;
}

double
sup_norm(std::span<const double> x)
{
  double m = 0.0;
  for (double v : x)
    m = std::max(m, std::abs(v));
  return m;
}

} // namespace fusemean
