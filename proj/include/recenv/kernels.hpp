#pragma once

#include <span>
#include <string>
#include <vector>

#include "recenv/linalg.hpp"

// Covariance kernels of centered Gaussian environments. The workhorse is the
// fractional Brownian field K(x,y) = (|x|^{2H} + |y|^{2H} - |x-y|^{2H}) / 2
// with Hurst exponent H in (0,1); a Zero kernel (deterministic environment)
// and a Tabulated kernel (multilinear interpolation over an (x,y) grid) round
// out the set. Kernels are immutable and safe to share across threads.
//
// All fBf powers go through the dispatched batch pow, which is elementwise-
// pure; a single eval, a row fill, and a full matrix fill therefore produce
// bit-identical values for the same point pair.

namespace recenv {

enum class KernelKind { kFractionalBrownian, kZero, kTabulated };

// Values of K over a rectangular grid of (x, y) pairs: axes holds the 2d
// coordinate vectors (x_1..x_d, then y_1..y_d), each strictly increasing;
// values is row-major with the last axis fastest. Queries outside the grid
// are domain errors, never extrapolated.
struct TabulatedKernelData {
  std::vector<std::vector<double>> axes;
  std::vector<double> values;
};

// Scaling family T_t f(x) = base^{-alpha t} f(base^t x).
struct ScalingSpec {
  double alpha = 0.0;
  double base = 2.0;
};

class CovarianceKernel {
 public:
  static CovarianceKernel fractional_brownian(double hurst, int dimension);
  static CovarianceKernel zero(int dimension);
  static CovarianceKernel tabulated(TabulatedKernelData data, int dimension);

  KernelKind kind() const { return kind_; }
  int dimension() const { return dimension_; }
  double hurst() const { return hurst_; }  // fBf only; 0 otherwise

  // Stable human-readable identifier, e.g. "fractional_brownian(h=0.5,d=2)",
  // with any pushforward scales appended. Used in serialized output.
  std::string id() const;

  // K(x, y). Throws ArgumentError on dimension mismatch, DomainError on
  // out-of-grid tabulated queries.
  double eval(std::span<const double> x, std::span<const double> y) const;

  // out[j] = K(x, points[j]) for points packed row-major with stride d.
  // Batched form of eval: identical bits, one call.
  void eval_row(std::span<const double> x, std::span<const double> points,
                std::span<double> out) const;

 private:
  CovarianceKernel() = default;

  double eval_unscaled(std::span<const double> x, std::span<const double> y) const;

  KernelKind kind_ = KernelKind::kZero;
  int dimension_ = 0;
  double hurst_ = 0.0;
  TabulatedKernelData table_;
  // Pushforward wrapper: eval = value_scale * K(arg_scale x, arg_scale y).
  double arg_scale_ = 1.0;
  double value_scale_ = 1.0;

  friend CovarianceKernel pushforward_covariance(const CovarianceKernel&,
                                                 const ScalingSpec&, double);
};

// Covariance of the rescaled field T_t W:
// K_t(x, y) = base^{-2 alpha t} K(base^t x, base^t y).
CovarianceKernel pushforward_covariance(const CovarianceKernel& kernel,
                                        const ScalingSpec& scaling, double t);

// M[i][j] = K(points[i], points[j]); points packed row-major with stride d.
Matrix covariance_matrix(const CovarianceKernel& kernel,
                         std::span<const double> points);

}  // namespace recenv
