#pragma once

#include <cassert>
#include <cstddef>
#include <span>
#include <vector>

namespace rfcov {

/// Dense column-major matrix of doubles. Columns are contiguous, which is the
/// access pattern of split search and standardization.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t i, std::size_t j) noexcept {
    assert(i < rows_ && j < cols_);
    return data_[j * rows_ + i];
  }
  double operator()(std::size_t i, std::size_t j) const noexcept {
    assert(i < rows_ && j < cols_);
    return data_[j * rows_ + i];
  }

  std::span<double> col(std::size_t j) noexcept { return {data_.data() + j * rows_, rows_}; }
  std::span<const double> col(std::size_t j) const noexcept {
    return {data_.data() + j * rows_, rows_};
  }

  std::vector<double> row(std::size_t i) const {
    std::vector<double> out(cols_);
    for (std::size_t j = 0; j < cols_; ++j) out[j] = (*this)(i, j);
    return out;
  }

  /// Copy of the first `count` columns.
  Matrix leading_cols(std::size_t count) const {
    assert(count <= cols_);
    Matrix out;
    out.rows_ = rows_;
    out.cols_ = count;
    out.data_.assign(data_.begin(), data_.begin() + static_cast<std::ptrdiff_t>(rows_ * count));
    return out;
  }

  /// Row-major copy, used for fast point routing.
  std::vector<double> row_major() const {
    std::vector<double> out(rows_ * cols_);
    for (std::size_t j = 0; j < cols_; ++j)
      for (std::size_t i = 0; i < rows_; ++i) out[i * cols_ + j] = data_[j * rows_ + i];
    return out;
  }

  std::span<const double> data() const noexcept { return data_; }

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

}  // namespace rfcov
