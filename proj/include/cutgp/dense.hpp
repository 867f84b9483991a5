#pragma once

#include <cassert>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace cutgp
{
/// Small row-major dense matrix used for the 1D operators.
class Matrix
{
public:
  Matrix() = default;

  Matrix(std::size_t rows, std::size_t cols, double value = 0.0)
    : n_rows(rows)
    , n_cols(cols)
    , values(rows * cols, value)
  {}

  static Matrix
  identity(std::size_t n)
  {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i)
      m(i, i) = 1.0;
    return m;
  }

  std::size_t
  rows() const
  {
    return n_rows;
  }

  std::size_t
  cols() const
  {
    return n_cols;
  }

  double &
  operator()(std::size_t i, std::size_t j)
  {
    assert(i < n_rows && j < n_cols);
    return values[i * n_cols + j];
  }

  double
  operator()(std::size_t i, std::size_t j) const
  {
    assert(i < n_rows && j < n_cols);
    return values[i * n_cols + j];
  }

  std::span<const double>
  data() const
  {
    return values;
  }

  std::span<double>
  data()
  {
    return values;
  }

  Matrix
  transpose() const
  {
    Matrix t(n_cols, n_rows);
    for (std::size_t i = 0; i < n_rows; ++i)
      for (std::size_t j = 0; j < n_cols; ++j)
        t(j, i) = (*this)(i, j);
    return t;
  }

  Matrix &
  operator*=(double s)
  {
    for (auto &v : values)
      v *= s;
    return *this;
  }

  Matrix &
  operator+=(const Matrix &other)
  {
    if (other.n_rows != n_rows || other.n_cols != n_cols)
      throw std::invalid_argument("Matrix::operator+=: shape mismatch");
    for (std::size_t i = 0; i < values.size(); ++i)
      values[i] += other.values[i];
    return *this;
  }

  friend Matrix
  operator*(double s, Matrix m)
  {
    m *= s;
    return m;
  }

  friend Matrix
  operator*(const Matrix &a, const Matrix &b)
  {
    if (a.n_cols != b.n_rows)
      throw std::invalid_argument("Matrix product: shape mismatch");
    Matrix c(a.n_rows, b.n_cols);
    for (std::size_t i = 0; i < a.n_rows; ++i)
      for (std::size_t l = 0; l < a.n_cols; ++l)
        {
          const double ail = a(i, l);
          for (std::size_t j = 0; j < b.n_cols; ++j)
            c(i, j) += ail * b(l, j);
        }
    return c;
  }

  std::vector<double>
  apply(std::span<const double> x) const
  {
    if (x.size() != n_cols)
      throw std::invalid_argument("Matrix::apply: size mismatch");
    std::vector<double> y(n_rows, 0.0);
    for (std::size_t i = 0; i < n_rows; ++i)
      for (std::size_t j = 0; j < n_cols; ++j)
        y[i] += (*this)(i, j) * x[j];
    return y;
  }

private:
  std::size_t         n_rows = 0;
  std::size_t         n_cols = 0;
  std::vector<double> values;
};

} // namespace cutgp
