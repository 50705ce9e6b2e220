#include "affect/matrix.hpp"

#include <algorithm>

#include "affect/error.hpp"

namespace affect {

void Matrix::append_row(std::span<const double> values) {
  if (rows_ == 0 && cols_ == 0) {
    cols_ = values.size();
  }
  if (values.size() != cols_) {
    throw DataError("row width " + std::to_string(values.size()) +
                    " does not match matrix width " + std::to_string(cols_));
  }
  data_.insert(data_.end(), values.begin(), values.end());
  ++rows_;
}

Matrix Matrix::head(std::size_t n) const {
  n = std::min(n, rows_);
  Matrix out(n, cols_);
  std::copy_n(data_.begin(), n * cols_, out.data_.begin());
  return out;
}

Matrix Matrix::select_rows(std::span<const std::size_t> indices) const {
  Matrix out(indices.size(), cols_);
  for (std::size_t k = 0; k < indices.size(); ++k) {
    const auto src = row(indices[k]);
    std::copy(src.begin(), src.end(), out.row(k).begin());
  }
  return out;
}

}  // namespace affect
