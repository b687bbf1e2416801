#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "recenv/kernels.hpp"
#include "recenv/linalg.hpp"

// Gaussian environment samples W on finite point sets: exact sampling through
// a Cholesky factor of the covariance matrix, empirical covariance checks,
// and multilinear interpolation / finite-difference gradients for samples
// living on a rectangular grid. Everything is deterministic in the seed, and
// points with zero marginal variance (the origin, for the fractional family)
// come out exactly 0 because their factor rows are structurally zero.

namespace recenv {

// Uniform rectangular grid over [-L, L]^d, m nodes per axis. Node coordinates
// are mirror-symmetric, and for odd m the center node is exactly 0, so the
// origin-pinning of sampled fields is exact there. The grid is a hard
// boundary: queries outside it are domain errors, never extrapolated.
class RectGrid {
 public:
  RectGrid(int dimension, double extent, int nodes_per_axis);

  int dimension() const { return dimension_; }
  double extent() const { return extent_; }
  int nodes_per_axis() const { return nodes_per_axis_; }
  const std::vector<double>& axis_nodes() const { return nodes_; }

  std::size_t size() const;  // nodes_per_axis^dimension

  // All grid nodes, row-major with the last axis fastest, stride = dimension.
  std::vector<double> flatten_points() const;

 private:
  int dimension_ = 0;
  double extent_ = 0.0;
  int nodes_per_axis_ = 0;
  std::vector<double> nodes_;
};

// One realization of the environment on a fixed point set. Immutable in
// spirit: fill it through sample_field and treat it as read-only after.
struct FieldSample {
  int dimension = 0;
  std::vector<double> points;  // row-major, stride = dimension
  std::vector<double> values;  // one per point, finite
  std::string kernel_id;
  std::uint64_t seed = 0;
  double jitter = 0.0;  // diagonal shift actually used by the factorization
  std::optional<RectGrid> grid;  // present when sampled on a RectGrid

  std::size_t size() const { return values.size(); }
};

// Factors the covariance once and hands out independent draws per (seed,
// trial) pair. Use this instead of repeated sample_field calls whenever many
// realizations on the same points are needed; the factorization dominates.
// Draws are independent of each other and of call order, so trials can be
// distributed across threads.
class GaussianSampler {
 public:
  GaussianSampler(const CovarianceKernel& kernel, std::vector<double> points,
                  double jitter = 1e-10);

  // Values L*xi with xi standard normals from the (seed, trial) stream.
  std::vector<double> draw(std::uint64_t seed, std::uint64_t trial = 0) const;
  FieldSample sample(std::uint64_t seed, std::uint64_t trial = 0) const;

  int dimension() const { return dimension_; }
  std::size_t num_points() const { return lower_.rows; }
  const std::vector<double>& points() const { return points_; }
  double jitter() const { return jitter_; }
  std::size_t pinned() const { return pinned_; }

 private:
  int dimension_ = 0;
  std::vector<double> points_;
  std::string kernel_id_;
  Matrix lower_;
  double jitter_ = 0.0;
  std::size_t pinned_ = 0;
};

// One draw of W on the given points (row-major, stride = kernel dimension).
FieldSample sample_field(const CovarianceKernel& kernel,
                         std::span<const double> points, std::uint64_t seed,
                         double jitter = 1e-10);

// One draw of W on all nodes of a rectangular grid.
FieldSample sample_field(const CovarianceKernel& kernel, const RectGrid& grid,
                         std::uint64_t seed, double jitter = 1e-10);

struct EmpiricalCovariance {
  Matrix covariance;              // (1/N) sum of outer products (mean is 0)
  double max_abs_deviation = 0.0; // max_ij |Chat_ij - C_ij|
  double band = 0.0;              // 4 sigma CLT band from the exact C
};

// Sample covariance of num_samples (>= 100) draws, against the exact matrix.
EmpiricalCovariance empirical_covariance(const CovarianceKernel& kernel,
                                         std::span<const double> points,
                                         int num_samples, std::uint64_t seed);

// Multilinear interpolation of a grid sample at x. Requires field.grid;
// x must lie inside the closed box [-L, L]^d (domain error otherwise).
// At a grid node the node's value is returned exactly.
double interpolate(const FieldSample& field, std::span<const double> x);

// Central differences of interpolate, step delta per coordinate. Every
// probe x_k +- delta must stay inside the box (domain error otherwise).
std::vector<double> gradient(const FieldSample& field,
                             std::span<const double> x, double delta);

// CSV with header x1,...,xd,value, one row per point, full precision.
void write_field_csv(const FieldSample& field, const std::string& path);

// JSON sidecar: kernel id, seed, jitter, and the grid or point-set shape.
void write_field_sidecar(const FieldSample& field, const std::string& path);

}  // namespace recenv
