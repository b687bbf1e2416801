#include <cmath>
#include <cstring>
#include <limits>
#include <vector>

#include "doctest.h"
#include "recenv/rng.hpp"
#include "recenv/simd/vecmath.hpp"

// The scalar table is the reference; the AVX2 table must reproduce it within
// a few ulps, and both must track an extended-precision (long double) oracle.
// On hardware without AVX2 the equivalence cases degenerate to checking the
// scalar path against the oracle alone.

namespace {

double rel_err(double got, long double want) {
  if (want == 0.0L) return got == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  return std::abs(static_cast<double>((static_cast<long double>(got) - want) / want));
}

std::vector<double> log_uniform_grid(double lo, double hi, std::size_t n, std::uint64_t seed) {
  recenv::PhiloxStream rng(seed, recenv::StreamPurpose::kMcTrial);
  std::vector<double> out(n);
  const double llo = std::log(lo), lhi = std::log(hi);
  for (auto& v : out) v = std::exp(llo + (lhi - llo) * rng.next_uniform());
  return out;
}

}  // namespace

TEST_CASE("pow_nonneg tracks long-double oracle on both tables") {
  const auto xs = log_uniform_grid(1e-80, 1e80, 4000, 11);
  const std::vector<double> ps = {0.1, 0.2, 0.5, 0.75, 1.0, 1.3, 1.7, 2.0};
  std::vector<double> got(xs.size());
  for (double p : ps) {
    recenv::simd::scalar_ops().pow_nonneg(xs.data(), got.data(), xs.size(), p);
    for (std::size_t i = 0; i < xs.size(); ++i) {
      long double want = std::pow(static_cast<long double>(xs[i]), static_cast<long double>(p));
      CAPTURE(xs[i]);
      CAPTURE(p);
      CHECK(rel_err(got[i], want) <= 5e-16);
    }
    if (const auto* avx2 = recenv::simd::avx2_ops()) {
      avx2->pow_nonneg(xs.data(), got.data(), xs.size(), p);
      for (std::size_t i = 0; i < xs.size(); ++i) {
        long double want = std::pow(static_cast<long double>(xs[i]), static_cast<long double>(p));
        CAPTURE(xs[i]);
        CAPTURE(p);
        CHECK(rel_err(got[i], want) <= 1e-15);
      }
    }
  }
}

TEST_CASE("pow_nonneg special values") {
  const double inf = std::numeric_limits<double>::infinity();
  const double nan = std::numeric_limits<double>::quiet_NaN();
  const std::vector<double> xs = {0.0, inf, nan, -1.5, 1.0, 4.9406564584124654e-324, 1e-310};
  for (const auto* t : {&recenv::simd::scalar_ops(), recenv::simd::avx2_ops()}) {
    if (!t) continue;
    std::vector<double> got(xs.size());
    t->pow_nonneg(xs.data(), got.data(), xs.size(), 0.5);
    INFO("table: " << std::string(t->name));
    CHECK(got[0] == 0.0);
    CHECK(got[1] == inf);
    CHECK(std::isnan(got[2]));
    CHECK(std::isnan(got[3]));
    CHECK(got[4] == 1.0);
    // oracle gets the rounded double the implementation saw, not the literal
    CHECK(rel_err(got[5], std::sqrt(static_cast<long double>(xs[5]))) <= 1e-15);
    CHECK(rel_err(got[6], std::sqrt(static_cast<long double>(xs[6]))) <= 1e-15);
  }
}

TEST_CASE("exp tracks long-double oracle on both tables") {
  recenv::PhiloxStream rng(12, recenv::StreamPurpose::kMcTrial);
  std::vector<double> xs = {0.0, 1.0, -1.0, 709.7, -745.0, 710.0, -746.0};
  for (int i = 0; i < 4000; ++i) xs.push_back(-708.0 + 1416.0 * rng.next_uniform());
  std::vector<double> got(xs.size());
  for (const auto* t : {&recenv::simd::scalar_ops(), recenv::simd::avx2_ops()}) {
    if (!t) continue;
    const double tol = std::strcmp(t->name, "scalar") == 0 ? 5e-16 : 1e-15;
    t->exp(xs.data(), got.data(), xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) {
      long double want = std::exp(static_cast<long double>(xs[i]));
      if (want > 1e-320L && want < 1e308L) {  // compare away from the IEEE edges
        INFO("table: " << std::string(t->name) << " x=" << xs[i]);
        CHECK(rel_err(got[i], want) <= tol);
      }
    }
    CHECK(got[5] == std::numeric_limits<double>::infinity());  // exp(710)
    CHECK(got[6] == 0.0);                                      // exp(-746)
  }
}

TEST_CASE("batch results are bitwise independent of array position and length") {
  // Elementwise purity: a value computed in a batch of 1000 must equal the
  // value computed alone. This is what makes single evaluations and matrix
  // fills bit-consistent.
  const auto xs = log_uniform_grid(1e-30, 1e30, 1000, 13);
  for (const auto* t : {&recenv::simd::scalar_ops(), recenv::simd::avx2_ops()}) {
    if (!t) continue;
    std::vector<double> batch(xs.size()), lone(1);
    t->pow_nonneg(xs.data(), batch.data(), xs.size(), 1.37);
    for (std::size_t i = 0; i < xs.size(); ++i) {
      t->pow_nonneg(xs.data() + i, lone.data(), 1, 1.37);
      REQUIRE(std::memcmp(&batch[i], &lone[0], sizeof(double)) == 0);
    }
    t->exp(xs.data(), batch.data(), xs.size());
    std::vector<double> prefix(xs.size());
    for (std::size_t cut : {1UL, 3UL, 4UL, 7UL, 997UL}) {
      t->exp(xs.data(), prefix.data(), cut);
      REQUIRE(std::memcmp(batch.data(), prefix.data(), cut * sizeof(double)) == 0);
    }
  }
}

TEST_CASE("dot and sum match a compensated oracle") {
  recenv::PhiloxStream rng(14, recenv::StreamPurpose::kMcTrial);
  for (std::size_t n : {1UL, 5UL, 16UL, 33UL, 1024UL, 1031UL}) {
    std::vector<double> a(n), b(n);
    for (std::size_t i = 0; i < n; ++i) {
      a[i] = 2.0 * rng.next_uniform() - 1.0;
      b[i] = 2.0 * rng.next_uniform() - 1.0;
    }
    long double dot_want = 0.0L, sum_want = 0.0L, mag = 0.0L;
    for (std::size_t i = 0; i < n; ++i) {
      dot_want += static_cast<long double>(a[i]) * b[i];
      sum_want += a[i];
      mag += std::abs(static_cast<long double>(a[i]) * b[i]);
    }
    for (const auto* t : {&recenv::simd::scalar_ops(), recenv::simd::avx2_ops()}) {
      if (!t) continue;
      INFO("table: " << std::string(t->name) << " n=" << n);
      const double slack = 1e-13 * static_cast<double>(mag) + 1e-300;
      CHECK(std::abs(t->dot(a.data(), b.data(), n) - static_cast<double>(dot_want)) <= slack);
      CHECK(std::abs(t->sum(a.data(), n) - static_cast<double>(sum_want)) <=
            1e-13 * static_cast<double>(n) + 1e-300);
    }
  }
}

TEST_CASE("max is exact") {
  recenv::PhiloxStream rng(15, recenv::StreamPurpose::kMcTrial);
  for (std::size_t n : {1UL, 4UL, 5UL, 128UL, 131UL}) {
    std::vector<double> x(n);
    for (auto& v : x) v = 100.0 * (rng.next_uniform() - 0.5);
    double want = x[0];
    for (double v : x) want = std::max(want, v);
    for (const auto* t : {&recenv::simd::scalar_ops(), recenv::simd::avx2_ops()}) {
      if (!t) continue;
      CHECK(t->max(x.data(), n) == want);
    }
  }
}

TEST_CASE("scalar and AVX2 tables agree within a few ulps") {
  const auto* avx2 = recenv::simd::avx2_ops();
  if (!avx2) {
    MESSAGE("AVX2 unavailable on this host; equivalence cases skipped");
    return;
  }
  const auto xs = log_uniform_grid(1e-12, 1e12, 2000, 16);
  std::vector<double> s(xs.size()), v(xs.size());
  recenv::simd::scalar_ops().pow_nonneg(xs.data(), s.data(), xs.size(), 0.43);
  avx2->pow_nonneg(xs.data(), v.data(), xs.size(), 0.43);
  for (std::size_t i = 0; i < xs.size(); ++i) {
    CHECK(rel_err(v[i], static_cast<long double>(s[i])) <= 2e-15);
  }
  std::vector<double> args(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    args[i] = std::fmod(std::log(xs[i]) * 25.0, 700.0);  // spread across [-700, 700]
  }
  recenv::simd::scalar_ops().exp(args.data(), s.data(), args.size());
  avx2->exp(args.data(), v.data(), args.size());
  for (std::size_t i = 0; i < args.size(); ++i) {
    CHECK(rel_err(v[i], static_cast<long double>(s[i])) <= 2e-15);
  }
}

TEST_CASE("dispatch reports a usable table") {
  const auto& t = recenv::simd::ops();
  CHECK(t.name == recenv::simd::active_isa());
  double x = 2.0, y = 0.0;
  t.pow_nonneg(&x, &y, 1, 2.0);
  CHECK(y == doctest::Approx(4.0).epsilon(1e-15));
}
