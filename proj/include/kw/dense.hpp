#pragma once

#include <cstddef>
#include <vector>

#include "kw/types.hpp"

namespace kw::dense {

/// Dense complex matrix, row major.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), a_(rows * cols) {}

  static Matrix identity(std::size_t n);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  cplx& operator()(std::size_t i, std::size_t j) { return a_[i * cols_ + j]; }
  const cplx& operator()(std::size_t i, std::size_t j) const { return a_[i * cols_ + j]; }
  cplx* data() { return a_.data(); }
  const cplx* data() const { return a_.data(); }

  Matrix& operator+=(const Matrix& o);
  Matrix& operator-=(const Matrix& o);
  Matrix& operator*=(cplx c);
  friend Matrix operator+(Matrix a, const Matrix& b) { return a += b; }
  friend Matrix operator-(Matrix a, const Matrix& b) { return a -= b; }
  friend Matrix operator*(Matrix a, cplx c) { return a *= c; }
  friend Matrix operator*(cplx c, Matrix a) { return a *= c; }

  Matrix adjoint() const;
  double max_abs() const;

 private:
  std::size_t rows_ = 0, cols_ = 0;
  std::vector<cplx> a_;
};

/// OpenMP-parallel product (falls back to the serial loop without OpenMP).
Matrix matmul(const Matrix& a, const Matrix& b);

/// Plain triple loop kept as the reference implementation for testing and
/// benchmarking against the parallel kernel.
Matrix matmul_serial(const Matrix& a, const Matrix& b);

std::vector<cplx> matvec(const Matrix& a, const std::vector<cplx>& x);
std::vector<cplx> matvec_serial(const Matrix& a, const std::vector<cplx>& x);

double max_abs_diff(const Matrix& a, const Matrix& b);

}  // namespace kw::dense
