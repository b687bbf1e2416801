#pragma once

#include <cstddef>

// Batched double-precision primitives behind a runtime ISA dispatch.
//
// Every function is elementwise-pure: out[i] depends only on in[i] and the
// scalar parameters, never on array length or position. Reductions (dot,
// sum, max) are deterministic for a fixed ISA but may differ in the last
// ulps between ISAs because the accumulation order differs.
//
// The scalar implementations are the reference semantics; the AVX2 variants
// must agree within the tolerances asserted by the equivalence tests.
// Selection happens once per process: AVX2+FMA when the CPU supports both,
// scalar otherwise. RECENV_SIMD=scalar|avx2 overrides the choice (an avx2
// request on unsupported hardware falls back to scalar).

namespace recenv::simd {

struct Ops {
  // out[i] = x[i]^p for x[i] >= 0 (0^p == 0 for p > 0). p in (0, 2] in this
  // codebase; the implementation is accurate to a few ulps for any p with
  // |p * ln x| < 700.
  void (*pow_nonneg)(const double* x, double* out, std::size_t n, double p);
  // out[i] = exp(x[i]), with IEEE overflow/underflow to inf/0.
  void (*exp)(const double* x, double* out, std::size_t n);
  double (*dot)(const double* a, const double* b, std::size_t n);
  double (*sum)(const double* x, std::size_t n);
  double (*max)(const double* x, std::size_t n);  // n >= 1
  const char* name;
};

// The dispatched operation table (resolved on first use, stable afterwards).
const Ops& ops();
const char* active_isa();

// Individual tables for equivalence testing.
const Ops& scalar_ops();
const Ops* avx2_ops();  // nullptr when the CPU lacks AVX2+FMA

inline void pow_nonneg(const double* x, double* out, std::size_t n, double p) {
  ops().pow_nonneg(x, out, n, p);
}
inline void vexp(const double* x, double* out, std::size_t n) { ops().exp(x, out, n); }
inline double dot(const double* a, const double* b, std::size_t n) { return ops().dot(a, b, n); }
inline double sum(const double* x, std::size_t n) { return ops().sum(x, n); }
inline double max(const double* x, std::size_t n) { return ops().max(x, n); }

}  // namespace recenv::simd
