#include "kw/dense.hpp"

#include <cassert>
#include <cmath>
#include <cstdint>

namespace kw::dense {

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix& Matrix::operator+=(const Matrix& o) {
  assert(rows_ == o.rows_ && cols_ == o.cols_);
  for (std::size_t i = 0; i < a_.size(); ++i) a_[i] += o.a_[i];
  return *this;
}

Matrix& Matrix::operator-=(const Matrix& o) {
  assert(rows_ == o.rows_ && cols_ == o.cols_);
  for (std::size_t i = 0; i < a_.size(); ++i) a_[i] -= o.a_[i];
  return *this;
}

Matrix& Matrix::operator*=(cplx c) {
  for (auto& v : a_) v *= c;
  return *this;
}

Matrix Matrix::adjoint() const {
  Matrix m(cols_, rows_);
  for (std::size_t i = 0; i < rows_; ++i)
    for (std::size_t j = 0; j < cols_; ++j) m(j, i) = std::conj((*this)(i, j));
  return m;
}

double Matrix::max_abs() const {
  double m = 0.0;
  for (const auto& v : a_) m = std::max(m, std::abs(v));
  return m;
}

Matrix matmul_serial(const Matrix& a, const Matrix& b) {
  assert(a.cols() == b.rows());
  Matrix c(a.rows(), b.cols());
  const std::size_t n = a.rows(), k = a.cols(), m = b.cols();
  for (std::size_t i = 0; i < n; ++i) {
    cplx* ci = c.data() + i * m;
    for (std::size_t l = 0; l < k; ++l) {
      const cplx ail = a(i, l);
      if (ail == 0.0) continue;
      const cplx* bl = b.data() + l * m;
      for (std::size_t j = 0; j < m; ++j) ci[j] += ail * bl[j];
    }
  }
  return c;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  assert(a.cols() == b.rows());
  Matrix c(a.rows(), b.cols());
  const std::int64_t n = static_cast<std::int64_t>(a.rows());
  const std::size_t k = a.cols(), m = b.cols();
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < n; ++i) {
    cplx* ci = c.data() + static_cast<std::size_t>(i) * m;
    for (std::size_t l = 0; l < k; ++l) {
      const cplx ail = a(static_cast<std::size_t>(i), l);
      if (ail == 0.0) continue;
      const cplx* bl = b.data() + l * m;
      for (std::size_t j = 0; j < m; ++j) ci[j] += ail * bl[j];
    }
  }
  return c;
}

std::vector<cplx> matvec_serial(const Matrix& a, const std::vector<cplx>& x) {
  assert(a.cols() == x.size());
  std::vector<cplx> y(a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    cplx s = 0.0;
    const cplx* ai = a.data() + i * a.cols();
    for (std::size_t j = 0; j < a.cols(); ++j) s += ai[j] * x[j];
    y[i] = s;
  }
  return y;
}

std::vector<cplx> matvec(const Matrix& a, const std::vector<cplx>& x) {
  assert(a.cols() == x.size());
  std::vector<cplx> y(a.rows());
  const std::int64_t n = static_cast<std::int64_t>(a.rows());
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < n; ++i) {
    cplx s = 0.0;
    const cplx* ai = a.data() + static_cast<std::size_t>(i) * a.cols();
    for (std::size_t j = 0; j < a.cols(); ++j) s += ai[j] * x[j];
    y[static_cast<std::size_t>(i)] = s;
  }
  return y;
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
  assert(a.rows() == b.rows() && a.cols() == b.cols());
  double m = 0.0;
  for (std::size_t i = 0; i < a.rows() * a.cols(); ++i)
    m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
  return m;
}

}  // namespace kw::dense
