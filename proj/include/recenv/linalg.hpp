#pragma once

#include <cstddef>
#include <span>
#include <vector>

// Dense row-major matrices sized for covariance work (up to a few thousand
// rows) and the PSD Cholesky used for Gaussian sampling.

namespace recenv {

struct Matrix {
  std::size_t rows = 0, cols = 0;
  std::vector<double> data;  // row-major

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

  double& at(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  double at(std::size_t i, std::size_t j) const { return data[i * cols + j]; }
  double* row(std::size_t i) { return data.data() + i * cols; }
  const double* row(std::size_t i) const { return data.data() + i * cols; }
};

struct CholeskyPsd {
  Matrix lower;        // L with sym + jitter*I_active = L*L^T on active rows
  double jitter = 0.0; // diagonal shift actually used (0 when none was needed)
  std::size_t pinned = 0;  // rows excluded because their variance is exactly 0
};

// Factor a symmetric positive semidefinite matrix. Rows whose diagonal is
// exactly 0 describe deterministic-zero variables (the pinned origin of the
// field); they are excluded from the factorization and never receive jitter,
// so anything sampled through them stays exactly 0. On a failed pivot the
// diagonal shift escalates from jitter0 by x10 up to jitter_max, then a
// NumericalError is thrown.
CholeskyPsd cholesky_psd(const Matrix& sym, double jitter0 = 1e-10,
                         double jitter_max = 1e-6);

// y = L z for a lower-triangular factor (rows above the diagonal ignored).
std::vector<double> lower_matvec(const Matrix& lower, std::span<const double> z);

}  // namespace recenv
