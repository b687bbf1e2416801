#include "recenv/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "recenv/common.hpp"
#include "recenv/rng.hpp"

namespace recenv {
namespace {

void validate(const ShellGeometry& g) {
  if (g.d < 2) throw ArgumentError("shell dimension must be >= 2");
  if (!(g.r > 1.0)) throw ArgumentError("shell ratio must be > 1");
}

double shell_norm(const ShellGeometry& g, std::span<const double> x) {
  if (g.family == ShellFamily::kBall) return std::sqrt(squared_norm(x));
  double m = 0.0;
  for (double v : x) m = std::max(m, std::abs(v));
  return m;
}

// Radial cell count grows like resolution^{2/3}: the radial midpoint error
// is the dominant O(h^2) term, so doubling the budget cuts it by 2^{4/3}.
int radial_cells(int resolution) {
  return std::max(4, static_cast<int>(std::ceil(0.5 * std::pow(resolution, 2.0 / 3.0))));
}

void push_point(WeightedPointSet& set, std::span<const double> x, double w) {
  set.points.insert(set.points.end(), x.begin(), x.end());
  set.weights.push_back(w);
}

// Covers one axis-aligned rectangle [lo, hi] with midpoint cells of target
// linear size h; weights are exact cell volumes.
void cover_rect(WeightedPointSet& set, std::span<const double> lo,
                std::span<const double> hi, double h) {
  const std::size_t d = lo.size();
  std::vector<int> counts(d);
  std::vector<double> step(d);
  for (std::size_t k = 0; k < d; ++k) {
    counts[k] = std::max(1, static_cast<int>(std::lround((hi[k] - lo[k]) / h)));
    step[k] = (hi[k] - lo[k]) / counts[k];
  }
  double cell = 1.0;
  for (std::size_t k = 0; k < d; ++k) cell *= step[k];
  std::vector<int> idx(d, 0);
  std::vector<double> x(d);
  while (true) {
    for (std::size_t k = 0; k < d; ++k) x[k] = lo[k] + (idx[k] + 0.5) * step[k];
    push_point(set, x, cell);
    std::size_t k = 0;
    while (k < d && ++idx[k] == counts[k]) idx[k++] = 0;
    if (k == d) break;
  }
}

WeightedPointSet ball_shell_low_dim(const ShellGeometry& g, int resolution,
                                    std::uint64_t seed) {
  const double r_in = std::pow(g.r, g.n - 1);
  const double r_out = std::pow(g.r, g.n);
  const int n_r = radial_cells(resolution);
  WeightedPointSet set;
  set.dimension = g.d;
  set.tag = DomainTag::kShell;

  if (g.d == 2) {
    const int n_a = std::max(8, (resolution + n_r - 1) / n_r);
    for (int i = 0; i < n_r; ++i) {
      const double e0 = r_in + (r_out - r_in) * i / n_r;
      const double e1 = r_in + (r_out - r_in) * (i + 1) / n_r;
      const double rm = 0.5 * (e0 + e1);
      const double w = (e1 * e1 - e0 * e0) * 0.5 * (kTwoPi / n_a);
      for (int j = 0; j < n_a; ++j) {
        const double a = kTwoPi * j / n_a;
        const double x[2] = {rm * std::cos(a), rm * std::sin(a)};
        push_point(set, x, w);
      }
    }
    return set;
  }

  // d == 3: radial midpoint cells times a Fibonacci sphere layer
  const int n_s = std::max(8, (resolution + n_r - 1) / n_r);
  WeightedPointSet sphere = sphere_points(3, n_s, seed);
  for (int i = 0; i < n_r; ++i) {
    const double e0 = r_in + (r_out - r_in) * i / n_r;
    const double e1 = r_in + (r_out - r_in) * (i + 1) / n_r;
    const double rm = 0.5 * (e0 + e1);
    const double radial_mass = (e1 * e1 * e1 - e0 * e0 * e0) / 3.0;
    for (std::size_t j = 0; j < sphere.size(); ++j) {
      auto dir = sphere.point(j);
      const double x[3] = {rm * dir[0], rm * dir[1], rm * dir[2]};
      push_point(set, x, radial_mass * sphere.weights[j]);
    }
  }
  return set;
}

WeightedPointSet box_shell_low_dim(const ShellGeometry& g, int resolution) {
  const double r_in = std::pow(g.r, g.n - 1);
  const double r_out = std::pow(g.r, g.n);
  WeightedPointSet set;
  set.dimension = g.d;
  set.tag = DomainTag::kShell;

  // Decompose the box shell into non-overlapping slabs: for axis k, the two
  // slabs where coordinate k exceeds r_in in magnitude and all later axes
  // stay inside [-r_in, r_in]; earlier axes run the full box.
  std::vector<std::pair<std::vector<double>, std::vector<double>>> slabs;
  for (int k = 0; k < g.d; ++k) {
    for (int sign : {-1, 1}) {
      std::vector<double> lo(g.d), hi(g.d);
      for (int a = 0; a < g.d; ++a) {
        if (a < k) {
          lo[a] = -r_out;
          hi[a] = r_out;
        } else if (a == k) {
          lo[a] = sign < 0 ? -r_out : r_in;
          hi[a] = sign < 0 ? -r_in : r_out;
        } else {
          lo[a] = -r_in;
          hi[a] = r_in;
        }
      }
      slabs.emplace_back(std::move(lo), std::move(hi));
    }
  }
  double total = std::pow(2.0 * r_out, g.d) - std::pow(2.0 * r_in, g.d);
  const double h = std::pow(total / resolution, 1.0 / g.d);
  for (auto& [lo, hi] : slabs) cover_rect(set, lo, hi, h);
  return set;
}

WeightedPointSet mc_shell(const ShellGeometry& g, int resolution,
                          std::uint64_t seed) {
  const double r_in = std::pow(g.r, g.n - 1);
  const double r_out = std::pow(g.r, g.n);
  const int d = g.d;
  const bool ball = g.family == ShellFamily::kBall;
  const double volume =
      ball ? sphere_surface_area(d) / d * (std::pow(r_out, d) - std::pow(r_in, d))
           : std::pow(2.0 * r_out, d) - std::pow(2.0 * r_in, d);

  WeightedPointSet set;
  set.dimension = d;
  set.tag = DomainTag::kShell;
  const double w = volume / resolution;

  // Equal-volume radial strata, equal draw counts up to remainder, one RNG
  // stream per stratum: placement is reproducible and order-independent.
  const int strata = std::max(1, static_cast<int>(std::sqrt(resolution)));
  const double pow_in = std::pow(r_in, d);
  const double pow_out = std::pow(r_out, d);
  std::vector<double> x(d);
  for (int k = 0; k < strata; ++k) {
    const int count = resolution / strata + (k < resolution % strata ? 1 : 0);
    PhiloxStream rng(seed, StreamPurpose::kGeometryMc, static_cast<std::uint64_t>(k));
    const double v0 = pow_in + (pow_out - pow_in) * k / strata;
    const double v1 = pow_in + (pow_out - pow_in) * (k + 1) / strata;
    for (int i = 0; i < count; ++i) {
      // u in (0,1] maps to [v0, v1): the inner edge is attainable, the outer
      // is not, matching the half-open shell membership.
      const double u = rng.next_uniform();
      const double s = std::pow(v0 + (1.0 - u) * (v1 - v0), 1.0 / d);
      double norm = 0.0;
      while (norm == 0.0) {
        if (ball) {
          for (auto& c : x) c = rng.next_normal();
          norm = std::sqrt(squared_norm(x));
        } else {
          for (auto& c : x) c = 2.0 * rng.next_uniform() - 1.0;
          norm = shell_norm(g, x);
        }
      }
      for (auto& c : x) c = c * (s / norm);
      // rounding can push a boundary-grazing point just outside; pull it back
      const double got = shell_norm(g, x);
      if (got < r_in || got >= r_out) {
        const double target =
            std::clamp(got, r_in * (1.0 + 1e-12), r_out * (1.0 - 1e-12));
        for (auto& c : x) c = c * (target / got);
      }
      push_point(set, x, w);
    }
  }
  return set;
}

}  // namespace

bool shell_contains(const ShellGeometry& geom, std::span<const double> x) {
  validate(geom);
  if (x.size() != static_cast<std::size_t>(geom.d)) {
    throw ArgumentError("shell_contains: dimension mismatch");
  }
  const double v = shell_norm(geom, x);
  return v >= std::pow(geom.r, geom.n - 1) && v < std::pow(geom.r, geom.n);
}

WeightedPointSet shell_points(const ShellGeometry& geom, int resolution,
                              std::uint64_t seed) {
  validate(geom);
  if (resolution < 4) throw ArgumentError("shell_points: resolution must be >= 4");
  if (geom.d >= 4) return mc_shell(geom, resolution, seed);
  if (geom.family == ShellFamily::kBall) {
    return ball_shell_low_dim(geom, resolution, seed);
  }
  return box_shell_low_dim(geom, resolution);
}

WeightedPointSet sphere_points(int d, int resolution, std::uint64_t seed) {
  if (d < 2) throw ArgumentError("sphere_points: dimension must be >= 2");
  if (resolution < 8) throw ArgumentError("sphere_points: resolution must be >= 8");
  WeightedPointSet set;
  set.dimension = d;
  set.tag = DomainTag::kSphere;
  set.points.reserve(static_cast<std::size_t>(resolution) * d);
  set.weights.assign(static_cast<std::size_t>(resolution),
                     sphere_surface_area(d) / resolution);

  if (d == 2) {
    for (int k = 0; k < resolution; ++k) {
      const double a = kTwoPi * k / resolution;
      const double x[2] = {std::cos(a), std::sin(a)};
      set.points.insert(set.points.end(), x, x + 2);
    }
    return set;
  }
  if (d == 3) {
    const double golden_angle = std::numbers::pi * (3.0 - std::sqrt(5.0));
    for (int k = 0; k < resolution; ++k) {
      const double z = 1.0 - (2.0 * k + 1.0) / resolution;
      const double rho = std::sqrt(std::max(0.0, 1.0 - z * z));
      const double a = golden_angle * k;
      const double x[3] = {rho * std::cos(a), rho * std::sin(a), z};
      set.points.insert(set.points.end(), x, x + 3);
    }
    return set;
  }
  // d >= 4: normalized Gaussian directions; index space offset so a shell
  // and a sphere built from the same seed do not share draws.
  std::vector<double> g(d);
  for (int k = 0; k < resolution; ++k) {
    PhiloxStream rng(seed, StreamPurpose::kGeometryMc,
                     (1ULL << 40) + static_cast<std::uint64_t>(k));
    double norm = 0.0;
    while (norm == 0.0) {
      for (auto& c : g) c = rng.next_normal();
      norm = std::sqrt(squared_norm(g));
    }
    for (auto& c : g) c /= norm;
    set.points.insert(set.points.end(), g.begin(), g.end());
  }
  return set;
}

WeightedPointSet radial_grid(double s_min, double s_max, int count) {
  if (!(s_min >= 1.0) || !(s_min < s_max)) {
    throw ArgumentError("radial_grid: need 1 <= s_min < s_max");
  }
  if (count < 2) throw ArgumentError("radial_grid: count must be >= 2");
  WeightedPointSet set;
  set.dimension = 1;
  set.tag = DomainTag::kRadial;
  set.points.resize(count);
  set.weights.resize(count);
  const double ratio = s_max / s_min;
  for (int i = 0; i < count; ++i) {
    set.points[i] = s_min * std::pow(ratio, static_cast<double>(i) / (count - 1));
  }
  set.points.front() = s_min;
  set.points.back() = s_max;
  for (int i = 0; i < count; ++i) {
    const double left = i == 0 ? set.points[0] : set.points[i - 1];
    const double right = i == count - 1 ? set.points[count - 1] : set.points[i + 1];
    set.weights[i] = 0.5 * (right - left);
  }
  return set;
}

}  // namespace recenv
