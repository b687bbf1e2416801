#include "recenv/field.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "json.hpp"
#include "recenv/common.hpp"
#include "recenv/rng.hpp"

namespace recenv {

namespace {

// Corner loops visit 2^d cell vertices; past a handful of dimensions a dense
// grid is unusable anyway, so cap d instead of letting the loop explode.
constexpr int kMaxGridDim = 16;
constexpr std::size_t kMaxGridNodes = 10'000'000;

}  // namespace

RectGrid::RectGrid(int dimension, double extent, int nodes_per_axis)
    : dimension_(dimension), extent_(extent), nodes_per_axis_(nodes_per_axis) {
  if (dimension < 2 || dimension > kMaxGridDim) {
    throw ArgumentError("rect grid dimension must lie in [2, 16]");
  }
  if (!(extent > 0.0) || !std::isfinite(extent)) {
    throw ArgumentError("rect grid extent must be positive and finite");
  }
  if (nodes_per_axis < 2) {
    throw ArgumentError("rect grid needs at least 2 nodes per axis");
  }
  std::size_t total = 1;
  for (int k = 0; k < dimension; ++k) {
    total *= static_cast<std::size_t>(nodes_per_axis);
    if (total > kMaxGridNodes) {
      throw ArgumentError("rect grid would exceed 10^7 nodes");
    }
  }
  // Mirror-symmetric nodes: endpoints are exactly +-L and, for odd m, the
  // center node is exactly 0 so the origin really is a grid point.
  const int m = nodes_per_axis;
  const double h = 2.0 * extent / (m - 1);
  nodes_.resize(m);
  for (int j = 0; 2 * j <= m - 1; ++j) {
    const double v = (2 * j == m - 1) ? 0.0 : -extent + j * h;
    nodes_[j] = v;
    nodes_[m - 1 - j] = -v;
  }
}

std::size_t RectGrid::size() const {
  std::size_t total = 1;
  for (int k = 0; k < dimension_; ++k) {
    total *= static_cast<std::size_t>(nodes_per_axis_);
  }
  return total;
}

std::vector<double> RectGrid::flatten_points() const {
  const int d = dimension_;
  const std::size_t total = size();
  std::vector<double> pts(total * static_cast<std::size_t>(d));
  std::vector<int> idx(d, 0);
  for (std::size_t p = 0; p < total; ++p) {
    for (int k = 0; k < d; ++k) pts[p * d + k] = nodes_[idx[k]];
    for (int k = d - 1; k >= 0; --k) {  // last axis fastest
      if (++idx[k] < nodes_per_axis_) break;
      idx[k] = 0;
    }
  }
  return pts;
}

GaussianSampler::GaussianSampler(const CovarianceKernel& kernel,
                                 std::vector<double> points, double jitter)
    : dimension_(kernel.dimension()),
      points_(std::move(points)),
      kernel_id_(kernel.id()) {
  if (jitter < 0.0) throw ArgumentError("sample jitter must be nonnegative");
  Matrix cov = covariance_matrix(kernel, points_);
  CholeskyPsd chol = cholesky_psd(cov, jitter, 1e-6);
  lower_ = std::move(chol.lower);
  jitter_ = chol.jitter;
  pinned_ = chol.pinned;
}

std::vector<double> GaussianSampler::draw(std::uint64_t seed,
                                          std::uint64_t trial) const {
  std::vector<double> xi(lower_.rows);
  PhiloxStream stream(seed, StreamPurpose::kFieldDraw, trial);
  stream.fill_normals(xi);
  return lower_matvec(lower_, xi);
}

FieldSample GaussianSampler::sample(std::uint64_t seed,
                                    std::uint64_t trial) const {
  FieldSample out;
  out.dimension = dimension_;
  out.points = points_;
  out.values = draw(seed, trial);
  out.kernel_id = kernel_id_;
  out.seed = seed;
  out.jitter = jitter_;
  return out;
}

FieldSample sample_field(const CovarianceKernel& kernel,
                         std::span<const double> points, std::uint64_t seed,
                         double jitter) {
  GaussianSampler sampler(kernel, {points.begin(), points.end()}, jitter);
  return sampler.sample(seed);
}

FieldSample sample_field(const CovarianceKernel& kernel, const RectGrid& grid,
                         std::uint64_t seed, double jitter) {
  if (grid.dimension() != kernel.dimension()) {
    throw ArgumentError("grid dimension does not match the kernel");
  }
  GaussianSampler sampler(kernel, grid.flatten_points(), jitter);
  FieldSample out = sampler.sample(seed);
  out.grid = grid;
  return out;
}

EmpiricalCovariance empirical_covariance(const CovarianceKernel& kernel,
                                         std::span<const double> points,
                                         int num_samples, std::uint64_t seed) {
  if (num_samples < 100) {
    throw ArgumentError("empirical_covariance needs at least 100 samples");
  }
  GaussianSampler sampler(kernel, {points.begin(), points.end()});
  const std::size_t n = sampler.num_points();

  Matrix acc(n, n);
  for (int t = 0; t < num_samples; ++t) {
    std::vector<double> y = sampler.draw(seed, static_cast<std::uint64_t>(t));
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i; j < n; ++j) acc.at(i, j) += y[i] * y[j];
    }
  }

  const Matrix exact = covariance_matrix(kernel, points);
  EmpiricalCovariance out;
  out.covariance = Matrix(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) {
      const double c = acc.at(i, j) / num_samples;
      out.covariance.at(i, j) = c;
      out.covariance.at(j, i) = c;
      out.max_abs_deviation =
          std::max(out.max_abs_deviation, std::abs(c - exact.at(i, j)));
      const double var = std::abs(exact.at(i, i) * exact.at(j, j) +
                                  exact.at(i, j) * exact.at(i, j));
      out.band = std::max(out.band, std::sqrt(var));
    }
  }
  out.band *= 4.0 / std::sqrt(static_cast<double>(num_samples));
  return out;
}

double interpolate(const FieldSample& field, std::span<const double> x) {
  if (!field.grid) {
    throw ArgumentError("interpolation requires a rectangular-grid sample");
  }
  const RectGrid& grid = *field.grid;
  const int d = grid.dimension();
  if (x.size() != static_cast<std::size_t>(d)) {
    throw ArgumentError("query point dimension does not match the grid");
  }
  const std::vector<double>& nodes = grid.axis_nodes();
  const std::size_t m = nodes.size();

  std::array<std::size_t, kMaxGridDim> lo;
  std::array<double, kMaxGridDim> frac;
  for (int k = 0; k < d; ++k) {
    if (!(x[k] >= nodes.front() && x[k] <= nodes.back())) {
      throw DomainError("interpolation point lies outside the grid box");
    }
    std::size_t hi = static_cast<std::size_t>(
        std::upper_bound(nodes.begin(), nodes.end(), x[k]) - nodes.begin());
    hi = std::clamp<std::size_t>(hi, 1, m - 1);
    lo[k] = hi - 1;
    frac[k] = (x[k] - nodes[hi - 1]) / (nodes[hi] - nodes[hi - 1]);
  }

  // Strides of the row-major value array, last axis fastest.
  std::array<std::size_t, kMaxGridDim> stride;
  stride[d - 1] = 1;
  for (int k = d - 2; k >= 0; --k) stride[k] = stride[k + 1] * m;

  double acc = 0.0;
  for (std::size_t corner = 0; corner < (std::size_t{1} << d); ++corner) {
    double w = 1.0;
    std::size_t flat = 0;
    for (int k = 0; k < d; ++k) {
      const bool up = (corner >> k) & 1;
      w *= up ? frac[k] : 1.0 - frac[k];
      flat += (lo[k] + (up ? 1 : 0)) * stride[k];
    }
    acc += w * field.values[flat];
  }
  return acc;
}

std::vector<double> gradient(const FieldSample& field,
                             std::span<const double> x, double delta) {
  if (!field.grid) {
    throw ArgumentError("gradient requires a rectangular-grid sample");
  }
  if (!(delta > 0.0) || !std::isfinite(delta)) {
    throw ArgumentError("gradient step must be positive and finite");
  }
  const RectGrid& grid = *field.grid;
  const int d = grid.dimension();
  if (x.size() != static_cast<std::size_t>(d)) {
    throw ArgumentError("query point dimension does not match the grid");
  }
  const double lo = grid.axis_nodes().front();
  const double hi = grid.axis_nodes().back();
  for (int k = 0; k < d; ++k) {
    if (!(x[k] - delta >= lo && x[k] + delta <= hi)) {
      throw DomainError("gradient probe leaves the grid box");
    }
  }

  std::vector<double> probe(x.begin(), x.end());
  std::vector<double> g(d);
  for (int k = 0; k < d; ++k) {
    probe[k] = x[k] + delta;
    const double up = interpolate(field, probe);
    probe[k] = x[k] - delta;
    const double dn = interpolate(field, probe);
    probe[k] = x[k];
    g[k] = (up - dn) / (2.0 * delta);
  }
  return g;
}

void write_field_csv(const FieldSample& field, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ArgumentError("cannot open for writing: " + path);
  for (int k = 0; k < field.dimension; ++k) out << 'x' << k + 1 << ',';
  out << "value\n";
  char buf[32];
  for (std::size_t i = 0; i < field.size(); ++i) {
    for (int k = 0; k < field.dimension; ++k) {
      std::snprintf(buf, sizeof buf, "%.17g",
                    field.points[i * field.dimension + k]);
      out << buf << ',';
    }
    std::snprintf(buf, sizeof buf, "%.17g", field.values[i]);
    out << buf << '\n';
  }
  if (!out) throw ArgumentError("write failed: " + path);
}

void write_field_sidecar(const FieldSample& field, const std::string& path) {
  nlohmann::json meta;
  meta["kernel"] = field.kernel_id;
  meta["seed"] = field.seed;
  meta["jitter"] = field.jitter;
  if (field.grid) {
    meta["grid"] = {{"type", "rect"},
                    {"dimension", field.grid->dimension()},
                    {"extent", field.grid->extent()},
                    {"nodes_per_axis", field.grid->nodes_per_axis()}};
  } else {
    meta["grid"] = {{"type", "points"}, {"count", field.size()}};
  }
  std::ofstream out(path);
  if (!out) throw ArgumentError("cannot open for writing: " + path);
  out << meta.dump(2) << '\n';
  if (!out) throw ArgumentError("write failed: " + path);
}

}  // namespace recenv
