#pragma once

#include <span>
#include <stdexcept>
#include <vector>

namespace chargegame {

// Dense row-major matrix of doubles. Shape is fixed at construction.
class Matrix {
 public:
  Matrix() = default;
  Matrix(int rows, int cols, double fill = 0.0)
      : rows_(rows), cols_(cols),
        data_(check_shape(rows, cols), fill) {}

  static Matrix from_rows(const std::vector<std::vector<double>>& rows) {
    if (rows.empty()) throw std::invalid_argument("Matrix: no rows");
    Matrix m(static_cast<int>(rows.size()), static_cast<int>(rows[0].size()));
    for (int r = 0; r < m.rows_; ++r) {
      if (static_cast<int>(rows[r].size()) != m.cols_)
        throw std::invalid_argument("Matrix: ragged rows");
      for (int c = 0; c < m.cols_; ++c) m(r, c) = rows[r][c];
    }
    return m;
  }

  int rows() const { return rows_; }
  int cols() const { return cols_; }

  double& operator()(int r, int c) { return data_[static_cast<size_t>(r) * cols_ + c]; }
  double operator()(int r, int c) const { return data_[static_cast<size_t>(r) * cols_ + c]; }

  std::span<double> row(int r) { return {data_.data() + static_cast<size_t>(r) * cols_, static_cast<size_t>(cols_)}; }
  std::span<const double> row(int r) const { return {data_.data() + static_cast<size_t>(r) * cols_, static_cast<size_t>(cols_)}; }

  const std::vector<double>& data() const { return data_; }

  bool operator==(const Matrix& o) const {
    return rows_ == o.rows_ && cols_ == o.cols_ && data_ == o.data_;
  }

 private:
  static size_t check_shape(int rows, int cols) {
    if (rows < 0 || cols < 0) throw std::invalid_argument("Matrix: negative shape");
    return static_cast<size_t>(rows) * static_cast<size_t>(cols);
  }

  int rows_ = 0;
  int cols_ = 0;
  std::vector<double> data_;
};

}  // namespace chargegame
