#include "recenv/simd/vecmath.hpp"

// AVX2+FMA variants. ISA-specific opcodes are confined to functions carrying
// __attribute__((target("avx2,fma"))) so the translation unit builds without
// -mavx2 and the scalar path stays usable on older CPUs.
//
// exp: Cody-Waite argument reduction against ln2 split in two parts, then a
// degree-13 Taylor polynomial on |r| <= ln2/2, then exponent reconstruction
// in two steps so extreme n cannot overflow the scale factor.
//
// pow_nonneg: x^p = exp(p * ln x) with ln x carried in double-double
// (~107-bit) form until the final reduction, which keeps the relative error
// at a few ulps even when |p * ln x| is large. Mantissa reduced to
// [1/sqrt2, sqrt2), ln m = 2 atanh(s) with s = (m-1)/(m+1) divided in
// double-double; only the leading 2s term needs the extended precision, the
// s^3 series tail is ~7e-3 at most and plain double there is enough.

#if defined(__x86_64__) && (defined(__GNUC__) || defined(__clang__))

#include <immintrin.h>

#include <cmath>
#include <cstring>

#define RECENV_TARGET_AVX2 __attribute__((target("avx2,fma")))

namespace recenv::simd {
namespace {

struct Dd {
  __m256d hi, lo;
};

RECENV_TARGET_AVX2 inline __m256d splat(double v) { return _mm256_set1_pd(v); }

RECENV_TARGET_AVX2 inline Dd two_sum(__m256d a, __m256d b) {
  __m256d s = _mm256_add_pd(a, b);
  __m256d bb = _mm256_sub_pd(s, a);
  __m256d err = _mm256_add_pd(_mm256_sub_pd(a, _mm256_sub_pd(s, bb)), _mm256_sub_pd(b, bb));
  return {s, err};
}

// Requires |a| >= |b| lanewise (or a == 0).
RECENV_TARGET_AVX2 inline Dd fast_two_sum(__m256d a, __m256d b) {
  __m256d s = _mm256_add_pd(a, b);
  __m256d err = _mm256_sub_pd(b, _mm256_sub_pd(s, a));
  return {s, err};
}

RECENV_TARGET_AVX2 inline Dd two_prod(__m256d a, __m256d b) {
  __m256d p = _mm256_mul_pd(a, b);
  __m256d err = _mm256_fmsub_pd(a, b, p);
  return {p, err};
}

// Integer-valued doubles in [-2^31, 2^31) -> 2^n as a double.
RECENV_TARGET_AVX2 inline __m256d exp2_int(__m256d n) {
  const __m256d magic = splat(6755399441055744.0);  // 1.5 * 2^52
  __m256i k = _mm256_castpd_si256(_mm256_add_pd(n, magic));
  k = _mm256_add_epi64(k, _mm256_set1_epi64x(1023));
  k = _mm256_slli_epi64(k, 52);
  return _mm256_castsi256_pd(k);
}

// exp(r) for |r| <= ln2/2 + tiny, as 1 + r + r^2/2! + ... + r^13/13!.
RECENV_TARGET_AVX2 inline __m256d exp_poly(__m256d r) {
  __m256d p = splat(1.0 / 6227020800.0);
  p = _mm256_fmadd_pd(p, r, splat(1.0 / 479001600.0));
  p = _mm256_fmadd_pd(p, r, splat(1.0 / 39916800.0));
  p = _mm256_fmadd_pd(p, r, splat(1.0 / 3628800.0));
  p = _mm256_fmadd_pd(p, r, splat(1.0 / 362880.0));
  p = _mm256_fmadd_pd(p, r, splat(1.0 / 40320.0));
  p = _mm256_fmadd_pd(p, r, splat(1.0 / 5040.0));
  p = _mm256_fmadd_pd(p, r, splat(1.0 / 720.0));
  p = _mm256_fmadd_pd(p, r, splat(1.0 / 120.0));
  p = _mm256_fmadd_pd(p, r, splat(1.0 / 24.0));
  p = _mm256_fmadd_pd(p, r, splat(1.0 / 6.0));
  p = _mm256_fmadd_pd(p, r, splat(0.5));
  p = _mm256_fmadd_pd(p, r, splat(1.0));
  p = _mm256_fmadd_pd(p, r, splat(1.0));
  return p;
}

constexpr double kLn2Hi = 6.93147180369123816490e-01;   // ln2, 32 high bits
constexpr double kLn2Lo = 1.90821492927058770002e-10;   // ln2 - kLn2Hi
constexpr double kLog2E = 1.44269504088896340736;
constexpr double kExpOverflow = 709.782712893383996;
constexpr double kExpUnderflow = -745.133219101941108;

// Core exp on (hi, lo) double-double argument; lo may be zero.
RECENV_TARGET_AVX2 inline __m256d exp_dd(__m256d hi, __m256d lo) {
  __m256d n = _mm256_round_pd(_mm256_mul_pd(hi, splat(kLog2E)),
                              _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
  __m256d r = _mm256_fmadd_pd(n, splat(-kLn2Hi), hi);
  r = _mm256_fmadd_pd(n, splat(-kLn2Lo), r);
  r = _mm256_add_pd(r, lo);
  __m256d value = exp_poly(r);

  // 2^n in two steps keeps both factors inside the normal exponent range.
  __m256d n1 = _mm256_round_pd(_mm256_mul_pd(n, splat(0.5)),
                               _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
  __m256d n2 = _mm256_sub_pd(n, n1);
  value = _mm256_mul_pd(_mm256_mul_pd(value, exp2_int(n1)), exp2_int(n2));

  __m256d big = _mm256_cmp_pd(hi, splat(kExpOverflow), _CMP_GT_OQ);
  __m256d small = _mm256_cmp_pd(hi, splat(kExpUnderflow), _CMP_LT_OQ);
  value = _mm256_blendv_pd(value, splat(HUGE_VAL), big);
  value = _mm256_blendv_pd(value, _mm256_setzero_pd(), small);
  return value;
}

RECENV_TARGET_AVX2 inline __m256d exp_pd(__m256d x) { return exp_dd(x, _mm256_setzero_pd()); }

// ln x as a double-double for finite x > 0 (subnormals included).
RECENV_TARGET_AVX2 inline Dd log_dd(__m256d x) {
  const __m256d two108 = splat(3.245185536584267e+32);  // 2^108
  __m256d tiny = _mm256_cmp_pd(x, splat(2.2250738585072014e-308), _CMP_LT_OQ);
  __m256d xn = _mm256_blendv_pd(x, _mm256_mul_pd(x, two108), tiny);

  __m256i bits = _mm256_castpd_si256(xn);
  __m256i eraw = _mm256_srli_epi64(bits, 52);
  const __m256i mant_mask = _mm256_set1_epi64x(0x000FFFFFFFFFFFFFLL);
  const __m256i one_bits = _mm256_set1_epi64x(0x3FF0000000000000LL);
  __m256d m = _mm256_castsi256_pd(_mm256_or_si256(_mm256_and_si256(bits, mant_mask), one_bits));

  __m256d fold = _mm256_cmp_pd(m, splat(1.4142135623730951), _CMP_GT_OQ);
  m = _mm256_blendv_pd(m, _mm256_mul_pd(m, splat(0.5)), fold);
  __m256i e_i = _mm256_sub_epi64(eraw, _mm256_set1_epi64x(1023));
  e_i = _mm256_sub_epi64(e_i, _mm256_castpd_si256(fold));  // mask is -1 per lane

  // small int64 -> double
  const __m256i exp52 = _mm256_castpd_si256(splat(4503599627370496.0));  // 2^52
  __m256i eb = _mm256_add_epi64(e_i, _mm256_set1_epi64x(2048));
  __m256d e = _mm256_sub_pd(_mm256_castsi256_pd(_mm256_or_si256(eb, exp52)),
                            splat(4503599627370496.0 + 2048.0));
  e = _mm256_sub_pd(e, _mm256_and_pd(splat(108.0), tiny));

  // s = (m-1)/(m+1) in double-double; m-1 is exact by Sterbenz.
  __m256d z = _mm256_sub_pd(m, splat(1.0));
  Dd w = two_sum(m, splat(1.0));
  __m256d q0 = _mm256_div_pd(z, w.hi);
  __m256d rem = _mm256_fnmadd_pd(q0, w.hi, z);
  rem = _mm256_fnmadd_pd(q0, w.lo, rem);
  __m256d q1 = _mm256_div_pd(rem, w.hi);

  // ln m = 2 atanh(s) = 2s + s^3 * sum_j 2 t^j / (2j+3), t = s^2 <= 0.0295
  __m256d t = _mm256_mul_pd(q0, q0);
  __m256d c = splat(2.0 / 23.0);
  c = _mm256_fmadd_pd(c, t, splat(2.0 / 21.0));
  c = _mm256_fmadd_pd(c, t, splat(2.0 / 19.0));
  c = _mm256_fmadd_pd(c, t, splat(2.0 / 17.0));
  c = _mm256_fmadd_pd(c, t, splat(2.0 / 15.0));
  c = _mm256_fmadd_pd(c, t, splat(2.0 / 13.0));
  c = _mm256_fmadd_pd(c, t, splat(2.0 / 11.0));
  c = _mm256_fmadd_pd(c, t, splat(2.0 / 9.0));
  c = _mm256_fmadd_pd(c, t, splat(2.0 / 7.0));
  c = _mm256_fmadd_pd(c, t, splat(2.0 / 5.0));
  c = _mm256_fmadd_pd(c, t, splat(2.0 / 3.0));
  __m256d tail = _mm256_fmadd_pd(_mm256_mul_pd(q0, t), c,
                                 _mm256_add_pd(q1, q1));
  Dd lnm = fast_two_sum(_mm256_add_pd(q0, q0), tail);

  // ln x = e * ln2 + ln m
  constexpr double kLn2HiFull = 6.93147180559945309417e-01;
  constexpr double kLn2LoFull = 2.31904681384629956404e-17;
  Dd eln2 = two_prod(e, splat(kLn2HiFull));
  eln2.lo = _mm256_fmadd_pd(e, splat(kLn2LoFull), eln2.lo);
  Dd s = two_sum(eln2.hi, lnm.hi);
  __m256d lo = _mm256_add_pd(_mm256_add_pd(s.lo, eln2.lo), lnm.lo);
  return fast_two_sum(s.hi, lo);
}

RECENV_TARGET_AVX2 inline __m256d pow_nonneg_pd(__m256d x, __m256d p) {
  Dd lnx = log_dd(x);
  Dd a = two_prod(p, lnx.hi);
  a.lo = _mm256_fmadd_pd(p, lnx.lo, a.lo);
  __m256d value = exp_dd(a.hi, a.lo);

  __m256d zero = _mm256_cmp_pd(x, _mm256_setzero_pd(), _CMP_EQ_OQ);
  __m256d inf = _mm256_cmp_pd(x, splat(HUGE_VAL), _CMP_EQ_OQ);
  __m256d bad = _mm256_or_pd(_mm256_cmp_pd(x, _mm256_setzero_pd(), _CMP_LT_OQ),
                             _mm256_cmp_pd(x, x, _CMP_UNORD_Q));
  value = _mm256_blendv_pd(value, _mm256_setzero_pd(), zero);
  value = _mm256_blendv_pd(value, splat(HUGE_VAL), inf);
  value = _mm256_blendv_pd(value, splat(__builtin_nan("")), bad);
  return value;
}

RECENV_TARGET_AVX2 void pow_nonneg_avx2(const double* x, double* out, std::size_t n, double p) {
  const __m256d vp = splat(p);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(out + i, pow_nonneg_pd(_mm256_loadu_pd(x + i), vp));
  }
  if (i < n) {
    double buf[4] = {1.0, 1.0, 1.0, 1.0};
    std::memcpy(buf, x + i, (n - i) * sizeof(double));
    _mm256_storeu_pd(buf, pow_nonneg_pd(_mm256_loadu_pd(buf), vp));
    std::memcpy(out + i, buf, (n - i) * sizeof(double));
  }
}

RECENV_TARGET_AVX2 void exp_avx2(const double* x, double* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(out + i, exp_pd(_mm256_loadu_pd(x + i)));
  }
  if (i < n) {
    double buf[4] = {0.0, 0.0, 0.0, 0.0};
    std::memcpy(buf, x + i, (n - i) * sizeof(double));
    _mm256_storeu_pd(buf, exp_pd(_mm256_loadu_pd(buf)));
    std::memcpy(out + i, buf, (n - i) * sizeof(double));
  }
}

RECENV_TARGET_AVX2 double dot_avx2(const double* a, const double* b, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  __m256d acc2 = _mm256_setzero_pd();
  __m256d acc3 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 16 <= n; i += 16) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc1);
    acc2 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 8), _mm256_loadu_pd(b + i + 8), acc2);
    acc3 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 12), _mm256_loadu_pd(b + i + 12), acc3);
  }
  for (; i + 4 <= n; i += 4) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
  }
  if (i < n) {
    double ba[4] = {0, 0, 0, 0}, bb[4] = {0, 0, 0, 0};
    std::memcpy(ba, a + i, (n - i) * sizeof(double));
    std::memcpy(bb, b + i, (n - i) * sizeof(double));
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(ba), _mm256_loadu_pd(bb), acc1);
  }
  __m256d acc = _mm256_add_pd(_mm256_add_pd(acc0, acc1), _mm256_add_pd(acc2, acc3));
  __m128d lo = _mm256_castpd256_pd128(acc);
  __m128d hi = _mm256_extractf128_pd(acc, 1);
  __m128d s = _mm_add_pd(lo, hi);
  s = _mm_add_sd(s, _mm_unpackhi_pd(s, s));
  return _mm_cvtsd_f64(s);
}

RECENV_TARGET_AVX2 double sum_avx2(const double* x, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_add_pd(acc0, _mm256_loadu_pd(x + i));
    acc1 = _mm256_add_pd(acc1, _mm256_loadu_pd(x + i + 4));
  }
  for (; i + 4 <= n; i += 4) {
    acc0 = _mm256_add_pd(acc0, _mm256_loadu_pd(x + i));
  }
  if (i < n) {
    double buf[4] = {0, 0, 0, 0};
    std::memcpy(buf, x + i, (n - i) * sizeof(double));
    acc1 = _mm256_add_pd(acc1, _mm256_loadu_pd(buf));
  }
  __m256d acc = _mm256_add_pd(acc0, acc1);
  __m128d lo = _mm256_castpd256_pd128(acc);
  __m128d hi = _mm256_extractf128_pd(acc, 1);
  __m128d s = _mm_add_pd(lo, hi);
  s = _mm_add_sd(s, _mm_unpackhi_pd(s, s));
  return _mm_cvtsd_f64(s);
}

RECENV_TARGET_AVX2 double max_avx2(const double* x, std::size_t n) {
  __m256d acc = splat(-HUGE_VAL);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    acc = _mm256_max_pd(acc, _mm256_loadu_pd(x + i));
  }
  if (i < n) {
    double buf[4] = {-HUGE_VAL, -HUGE_VAL, -HUGE_VAL, -HUGE_VAL};
    std::memcpy(buf, x + i, (n - i) * sizeof(double));
    acc = _mm256_max_pd(acc, _mm256_loadu_pd(buf));
  }
  __m128d lo = _mm256_castpd256_pd128(acc);
  __m128d hi = _mm256_extractf128_pd(acc, 1);
  __m128d s = _mm_max_pd(lo, hi);
  s = _mm_max_sd(s, _mm_unpackhi_pd(s, s));
  return _mm_cvtsd_f64(s);
}

}  // namespace

const Ops* avx2_ops() {
  if (__builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma")) {
    static const Ops table{pow_nonneg_avx2, exp_avx2, dot_avx2, sum_avx2, max_avx2, "avx2"};
    return &table;
  }
  return nullptr;
}

}  // namespace recenv::simd

#else  // non-x86 or unsupported compiler: scalar only

namespace recenv::simd {
const Ops* avx2_ops() { return nullptr; }
}  // namespace recenv::simd

#endif
