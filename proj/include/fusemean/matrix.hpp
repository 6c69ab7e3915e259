#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <vector>

namespace fusemean {

//! Dense row-major matrix of doubles. Rows are exposed as spans so that
//! observations can be handed to kernels and functionals without copying.
class Matrix
{
public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
    : rows_(rows)
    , cols_(cols)
    , data_(rows * cols, fill)
  {
  }
  Matrix(std::initializer_list<std::initializer_list<double>> rows);

  static Matrix from_rows(const std::vector<std::vector<double>>& rows,
                          std::size_t cols);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool empty() const { return rows_ == 0; }

  std::span<const double> row(std::size_t i) const
  {
    return { data_.data() + i * cols_, cols_ };
  }
  std::span<double> row(std::size_t i)
  {
    return { data_.data() + i * cols_, cols_ };
  }

  double operator()(std::size_t i, std::size_t j) const
  {
    return data_[i * cols_ + j];
  }
  double& operator()(std::size_t i, std::size_t j)
  {
    return data_[i * cols_ + j];
  }

  void append_row(std::span<const double> values);

  //! Rows selected by index, in the given order.
  Matrix select_rows(std::span<const std::size_t> indices) const;

  //! Columns selected by index, in the given order.
  Matrix select_cols(std::span<const int> columns) const;

  const std::vector<double>& data() const { return data_; }

  friend bool operator==(const Matrix&, const Matrix&) = default;

private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

//! Sup-norm of a vector.
double sup_norm(std::span<const double> x);

} // namespace fusemean
