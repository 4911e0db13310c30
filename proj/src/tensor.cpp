// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The npnas Authors

#include "npnas/tensor.hpp"

#include <cmath>

namespace npnas {

Tensor2::Tensor2(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows * cols) {
    throw ShapeError("Tensor2: data length " + std::to_string(data_.size()) +
                     " does not match " + std::to_string(rows) + "x" + std::to_string(cols));
  }
}

Tensor2::Tensor2(std::initializer_list<std::initializer_list<double>> rows) {
  rows_ = rows.size();
  cols_ = rows_ == 0 ? 0 : rows.begin()->size();
  data_.reserve(rows_ * cols_);
  for (const auto& row : rows) {
    if (row.size() != cols_) throw ShapeError("Tensor2: ragged initializer");
    data_.insert(data_.end(), row.begin(), row.end());
  }
}

Tensor2 Tensor2::identity(std::size_t n) {
  Tensor2 t(n, n);
  for (std::size_t i = 0; i < n; ++i) t(i, i) = 1.0;
  return t;
}

Tensor2 Tensor2::transposed() const {
  Tensor2 t(cols_, rows_);
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
  return t;
}

double Tensor2::sum() const {
  double s = 0.0;
  for (double v : data_) s += v;
  return s;
}

void Tensor2::add_scaled(const Tensor2& other, double scale) {
  if (!same_shape(other)) {
    throw ShapeError("add_scaled: " + shape_string(*this) + " vs " + shape_string(other));
  }
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += scale * other.data_[i];
}

Tensor2 matmul(const Tensor2& a, const Tensor2& b) {
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: " + shape_string(a) + " * " + shape_string(b));
  }
  const std::size_t n = a.rows(), k = a.cols(), m = b.cols();
  Tensor2 c(n, m);
  const double* bp = b.data().data();
  double* cp = c.data().data();
  for (std::size_t i = 0; i < n; ++i) {
    double* crow = cp + i * m;
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = a(i, p);
      if (aip == 0.0) continue;
      const double* brow = bp + p * m;
      for (std::size_t j = 0; j < m; ++j) crow[j] += aip * brow[j];
    }
  }
  return c;
}

Tensor2 matmul_tn(const Tensor2& a, const Tensor2& b) {
  if (a.rows() != b.rows()) {
    throw ShapeError("matmul_tn: " + shape_string(a) + "^T * " + shape_string(b));
  }
  const std::size_t n = a.cols(), k = a.rows(), m = b.cols();
  Tensor2 c(n, m);
  const double* bp = b.data().data();
  double* cp = c.data().data();
  for (std::size_t p = 0; p < k; ++p) {
    const double* brow = bp + p * m;
    for (std::size_t i = 0; i < n; ++i) {
      const double api = a(p, i);
      if (api == 0.0) continue;
      double* crow = cp + i * m;
      for (std::size_t j = 0; j < m; ++j) crow[j] += api * brow[j];
    }
  }
  return c;
}

Tensor2 matmul_nt(const Tensor2& a, const Tensor2& b) {
  if (a.cols() != b.cols()) {
    throw ShapeError("matmul_nt: " + shape_string(a) + " * " + shape_string(b) + "^T");
  }
  const std::size_t n = a.rows(), k = a.cols(), m = b.rows();
  Tensor2 c(n, m);
  const double* ap = a.data().data();
  const double* bp = b.data().data();
  for (std::size_t i = 0; i < n; ++i) {
    const double* arow = ap + i * k;
    for (std::size_t j = 0; j < m; ++j) {
      const double* brow = bp + j * k;
      double s = 0.0;
      for (std::size_t p = 0; p < k; ++p) s += arow[p] * brow[p];
      c(i, j) = s;
    }
  }
  return c;
}

void require_finite(const Tensor2& t, std::string_view where) {
  for (double v : t.data()) {
    if (!std::isfinite(v)) throw NonFiniteError("non-finite value produced by " + std::string(where));
  }
}

std::string shape_string(const Tensor2& t) {
  return "[" + std::to_string(t.rows()) + "x" + std::to_string(t.cols()) + "]";
}

}  // namespace npnas
