#include <cmath>
#include <cstddef>

#include "recenv/simd/vecmath.hpp"

// Reference implementations. Plain sequential loops over libm calls; the
// AVX2 variants are tested against these.

namespace recenv::simd {
namespace {

void pow_nonneg_scalar(const double* x, double* out, std::size_t n, double p) {
  for (std::size_t i = 0; i < n; ++i) out[i] = std::pow(x[i], p);
}

void exp_scalar(const double* x, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = std::exp(x[i]);
}

double dot_scalar(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

double sum_scalar(const double* x, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += x[i];
  return s;
}

double max_scalar(const double* x, std::size_t n) {
  double m = x[0];
  for (std::size_t i = 1; i < n; ++i) m = x[i] > m ? x[i] : m;
  return m;
}

}  // namespace

const Ops& scalar_ops() {
  static const Ops table{pow_nonneg_scalar, exp_scalar, dot_scalar, sum_scalar,
                         max_scalar, "scalar"};
  return table;
}

}  // namespace recenv::simd
