#include "recenv/linalg.hpp"

#include <cmath>
#include <string>

#include "recenv/common.hpp"
#include "recenv/simd/vecmath.hpp"

namespace recenv {
namespace {

// One factorization attempt at a fixed shift. Returns false on a bad pivot.
bool try_factor(const Matrix& a, double shift, const std::vector<bool>& active,
                Matrix& l) {
  const std::size_t n = a.rows;
  l = Matrix(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    if (!active[j]) continue;
    const double* lj = l.row(j);
    double diag = a.at(j, j) + shift - simd::dot(lj, lj, j);
    if (!(diag > 0.0) || !std::isfinite(diag)) return false;
    const double root = std::sqrt(diag);
    l.at(j, j) = root;
    for (std::size_t i = j + 1; i < n; ++i) {
      if (!active[i]) continue;
      l.at(i, j) = (a.at(i, j) - simd::dot(l.row(i), lj, j)) / root;
    }
  }
  return true;
}

}  // namespace

CholeskyPsd cholesky_psd(const Matrix& sym, double jitter0, double jitter_max) {
  if (sym.rows == 0 || sym.rows != sym.cols) {
    throw ArgumentError("cholesky_psd: matrix must be square and nonempty");
  }
  if (jitter0 < 0.0) throw ArgumentError("cholesky_psd: negative jitter");

  const std::size_t n = sym.rows;
  std::vector<bool> active(n);
  std::size_t pinned = 0;
  for (std::size_t i = 0; i < n; ++i) {
    active[i] = sym.at(i, i) != 0.0;
    if (!active[i]) ++pinned;
  }

  CholeskyPsd out;
  out.pinned = pinned;
  double shift = jitter0;
  while (true) {
    if (try_factor(sym, shift, active, out.lower)) {
      out.jitter = shift;
      return out;
    }
    shift = shift == 0.0 ? 1e-10 : shift * 10.0;
    if (shift > jitter_max) {
      throw NumericalError(
          "cholesky_psd: factorization failed with diagonal shift up to " +
          std::to_string(jitter_max));
    }
  }
}

std::vector<double> lower_matvec(const Matrix& lower, std::span<const double> z) {
  if (z.size() != lower.rows || lower.rows != lower.cols) {
    throw ArgumentError("lower_matvec: size mismatch");
  }
  std::vector<double> y(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) {
    y[i] = simd::dot(lower.row(i), z.data(), i + 1);
  }
  return y;
}

}  // namespace recenv
