#pragma once

#include <cstdint>
#include <span>
#include <vector>

// Quadrature geometry: shell sets between radii r^{n-1} and r^n (Euclidean
// ball or sup-norm box families), unit-sphere point sets, and log-spaced
// radial grids. Dimensions 2 and 3 get deterministic product rules; d >= 4
// falls back to seeded Monte Carlo placement with equal weights.
//
// Weights always carry the unnormalized measure: shell weights sum to the
// shell volume, sphere weights to the full surface area, radial weights form
// a trapezoid rule for integrals in s.

namespace recenv {

enum class ShellFamily { kBall, kBox };

struct ShellGeometry {
  ShellFamily family = ShellFamily::kBall;
  double r = 2.0;  // shell ratio, > 1
  int n = 1;       // shell index: radii span [r^{n-1}, r^n)
  int d = 2;       // ambient dimension, >= 2
};

enum class DomainTag { kShell, kSphere, kRadial };

struct WeightedPointSet {
  int dimension = 0;  // coordinates per point (1 for radial grids)
  DomainTag tag = DomainTag::kShell;
  std::vector<double> points;   // row-major, stride = dimension
  std::vector<double> weights;  // one positive weight per point

  std::size_t size() const { return weights.size(); }
  std::span<const double> point(std::size_t i) const {
    return {points.data() + i * static_cast<std::size_t>(dimension),
            static_cast<std::size_t>(dimension)};
  }
};

// Membership test for the half-open shell [r^{n-1}, r^n).
bool shell_contains(const ShellGeometry& geom, std::span<const double> x);

// Quadrature points covering the shell. resolution >= 4 is an approximate
// total point budget; the actual count may exceed it slightly. The seed only
// matters for d >= 4 (Monte Carlo placement).
WeightedPointSet shell_points(const ShellGeometry& geom, int resolution,
                              std::uint64_t seed = 0);

// Quadrature points on the unit sphere S^{d-1}: equally spaced angles (d=2),
// Fibonacci lattice (d=3), normalized Gaussian directions (d >= 4).
// resolution >= 8. Total weight is the surface area pi_d.
WeightedPointSet sphere_points(int d, int resolution, std::uint64_t seed = 0);

// Log-spaced nodes on [s_min, s_max] (1 <= s_min < s_max) with trapezoid
// weights for integrals in s. count >= 2.
WeightedPointSet radial_grid(double s_min, double s_max, int count);

}  // namespace recenv
