#include "recenv/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>

#include "recenv/common.hpp"
#include "recenv/simd/vecmath.hpp"

namespace recenv {
namespace {

void check_dimension(int d) {
  if (d < 2) throw ArgumentError("kernel dimension must be >= 2");
}

// Multilinear interpolation over the (x, y) grid; out-of-grid is a hard
// error because extrapolated covariance values can silently break PSD.
double interp_table(const TabulatedKernelData& t, std::span<const double> coords) {
  const std::size_t k = t.axes.size();
  std::vector<std::size_t> lo(k);
  std::vector<double> frac(k);
  for (std::size_t a = 0; a < k; ++a) {
    const auto& ax = t.axes[a];
    const double v = coords[a];
    if (v < ax.front() || v > ax.back()) {
      throw DomainError("tabulated kernel query outside grid on axis " +
                        std::to_string(a));
    }
    std::size_t hi = static_cast<std::size_t>(
        std::upper_bound(ax.begin(), ax.end(), v) - ax.begin());
    hi = std::clamp<std::size_t>(hi, 1, ax.size() - 1);
    lo[a] = hi - 1;
    frac[a] = (v - ax[lo[a]]) / (ax[hi] - ax[lo[a]]);
  }
  std::vector<std::size_t> stride(k, 1);
  for (std::size_t a = k; a-- > 1;) stride[a - 1] = stride[a] * t.axes[a].size();
  double acc = 0.0;
  for (std::size_t corner = 0; corner < (1ULL << k); ++corner) {
    double w = 1.0;
    std::size_t index = 0;
    for (std::size_t a = 0; a < k; ++a) {
      const bool up = (corner >> a) & 1U;
      w *= up ? frac[a] : 1.0 - frac[a];
      index += stride[a] * (lo[a] + (up ? 1 : 0));
    }
    acc += w * t.values[index];
  }
  return acc;
}

bool lex_less(std::span<const double> a, std::span<const double> b) {
  return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end());
}

}  // namespace

CovarianceKernel CovarianceKernel::fractional_brownian(double hurst, int dimension) {
  check_dimension(dimension);
  if (!(hurst > 0.0) || !(hurst < 1.0)) {
    throw ArgumentError("Hurst exponent must lie in (0, 1)");
  }
  CovarianceKernel k;
  k.kind_ = KernelKind::kFractionalBrownian;
  k.dimension_ = dimension;
  k.hurst_ = hurst;
  return k;
}

CovarianceKernel CovarianceKernel::zero(int dimension) {
  check_dimension(dimension);
  CovarianceKernel k;
  k.kind_ = KernelKind::kZero;
  k.dimension_ = dimension;
  return k;
}

std::string CovarianceKernel::id() const {
  char buf[128];
  switch (kind_) {
    case KernelKind::kFractionalBrownian:
      std::snprintf(buf, sizeof buf, "fractional_brownian(h=%g,d=%d)", hurst_, dimension_);
      break;
    case KernelKind::kZero:
      std::snprintf(buf, sizeof buf, "zero(d=%d)", dimension_);
      break;
    case KernelKind::kTabulated:
      std::snprintf(buf, sizeof buf, "tabulated(d=%d)", dimension_);
      break;
  }
  std::string out = buf;
  if (arg_scale_ != 1.0 || value_scale_ != 1.0) {
    std::snprintf(buf, sizeof buf, "@scale(arg=%.17g,value=%.17g)", arg_scale_, value_scale_);
    out += buf;
  }
  return out;
}

CovarianceKernel CovarianceKernel::tabulated(TabulatedKernelData data, int dimension) {
  check_dimension(dimension);
  if (data.axes.size() != static_cast<std::size_t>(2 * dimension)) {
    throw ArgumentError("tabulated kernel needs 2*d axes (x then y coordinates)");
  }
  std::size_t cells = 1;
  for (const auto& ax : data.axes) {
    if (ax.size() < 2 || !std::is_sorted(ax.begin(), ax.end()) ||
        std::adjacent_find(ax.begin(), ax.end()) != ax.end()) {
      throw ArgumentError("tabulated kernel axes must be strictly increasing, size >= 2");
    }
    cells *= ax.size();
  }
  if (data.values.size() != cells) {
    throw ArgumentError("tabulated kernel values must fill the full grid");
  }
  CovarianceKernel k;
  k.kind_ = KernelKind::kTabulated;
  k.dimension_ = dimension;
  k.table_ = std::move(data);
  return k;
}

double CovarianceKernel::eval_unscaled(std::span<const double> x,
                                       std::span<const double> y) const {
  switch (kind_) {
    case KernelKind::kZero:
      return 0.0;
    case KernelKind::kFractionalBrownian: {
      // (|x|^{2H} + |y|^{2H} - |x-y|^{2H}) / 2 via (r^2)^H, one batched call.
      double sq[3] = {squared_norm(x), squared_norm(y), squared_distance(x, y)};
      double p[3];
      simd::pow_nonneg(sq, p, 3, hurst_);
      return 0.5 * (p[0] + p[1] - p[2]);
    }
    case KernelKind::kTabulated: {
      // Arguments in canonical (lexicographic) order so symmetry is exact
      // even when the table itself is not perfectly symmetric.
      const bool swap = lex_less(y, x);
      std::span<const double> a = swap ? y : x;
      std::span<const double> b = swap ? x : y;
      std::vector<double> coords(a.begin(), a.end());
      coords.insert(coords.end(), b.begin(), b.end());
      return interp_table(table_, coords);
    }
  }
  return 0.0;
}

double CovarianceKernel::eval(std::span<const double> x,
                              std::span<const double> y) const {
  const auto d = static_cast<std::size_t>(dimension_);
  if (x.size() != d || y.size() != d) {
    throw ArgumentError("eval: point dimension does not match kernel dimension");
  }
  std::vector<double> sx(x.begin(), x.end());
  std::vector<double> sy(y.begin(), y.end());
  for (auto& v : sx) v *= arg_scale_;
  for (auto& v : sy) v *= arg_scale_;
  return value_scale_ * eval_unscaled(sx, sy);
}

void CovarianceKernel::eval_row(std::span<const double> x,
                                std::span<const double> points,
                                std::span<double> out) const {
  const auto d = static_cast<std::size_t>(dimension_);
  if (x.size() != d || points.size() % d != 0) {
    throw ArgumentError("eval_row: point dimension does not match kernel dimension");
  }
  const std::size_t n = points.size() / d;
  if (out.size() != n) throw ArgumentError("eval_row: output size mismatch");

  if (kind_ == KernelKind::kZero) {
    std::fill(out.begin(), out.end(), 0.0);
    return;
  }
  std::vector<double> sx(x.begin(), x.end());
  for (auto& v : sx) v *= arg_scale_;

  if (kind_ == KernelKind::kTabulated) {
    std::vector<double> sp(d);
    for (std::size_t j = 0; j < n; ++j) {
      for (std::size_t k = 0; k < d; ++k) sp[k] = arg_scale_ * points[j * d + k];
      out[j] = value_scale_ * eval_unscaled(sx, sp);
    }
    return;
  }

  // fBf: batch the three pow families. Elementwise purity makes each entry
  // bit-identical to a lone eval of the same pair.
  double a2 = squared_norm(sx);
  double pa;
  simd::pow_nonneg(&a2, &pa, 1, hurst_);
  std::vector<double> b2(n), c2(n), sp(d);
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t k = 0; k < d; ++k) sp[k] = arg_scale_ * points[j * d + k];
    b2[j] = squared_norm(sp);
    c2[j] = squared_distance(sx, sp);
  }
  std::vector<double> pb(n), pc(n);
  simd::pow_nonneg(b2.data(), pb.data(), n, hurst_);
  simd::pow_nonneg(c2.data(), pc.data(), n, hurst_);
  for (std::size_t j = 0; j < n; ++j) {
    out[j] = value_scale_ * (0.5 * (pa + pb[j] - pc[j]));
  }
}

CovarianceKernel pushforward_covariance(const CovarianceKernel& kernel,
                                        const ScalingSpec& scaling, double t) {
  if (!(scaling.alpha > 0.0)) throw ArgumentError("scaling alpha must be > 0");
  if (!(scaling.base > 1.0)) throw ArgumentError("scaling base must be > 1");
  CovarianceKernel out = kernel;
  out.arg_scale_ *= std::pow(scaling.base, t);
  out.value_scale_ *= std::pow(scaling.base, -2.0 * scaling.alpha * t);
  return out;
}

Matrix covariance_matrix(const CovarianceKernel& kernel,
                         std::span<const double> points) {
  const auto d = static_cast<std::size_t>(kernel.dimension());
  if (points.empty() || points.size() % d != 0) {
    throw ArgumentError("covariance_matrix: points must be a nonempty multiple of d");
  }
  const std::size_t n = points.size() / d;
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    kernel.eval_row(points.subspan(i * d, d), points.first((i + 1) * d),
                    std::span<double>(m.row(i), i + 1));
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) m.at(i, j) = m.at(j, i);
  }
  return m;
}

}  // namespace recenv
