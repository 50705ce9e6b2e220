#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace affect {

/// Dense row-major matrix of doubles. Rows are frames or samples.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  bool empty() const noexcept { return rows_ == 0; }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const {
    return {data_.data() + r * cols_, cols_};
  }

  /// Appends a row. The first append on an empty 0x0 matrix fixes cols().
  void append_row(std::span<const double> values);
  void reserve_rows(std::size_t rows) { data_.reserve(rows * cols_); }

  std::span<const double> data() const noexcept { return data_; }

  /// Rows [0, n) as a new matrix.
  Matrix head(std::size_t n) const;
  Matrix select_rows(std::span<const std::size_t> indices) const;

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

}  // namespace affect
