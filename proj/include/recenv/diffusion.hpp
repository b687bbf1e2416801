#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "recenv/criteria.hpp"
#include "recenv/field.hpp"
#include "recenv/kernels.hpp"

// Euler-Maruyama simulation of the environment diffusion: paths follow
// dY = dB - (1/2) grad W~ dt, where W~ is the multilinear interpolant of a
// sampled field. The true environment is non-differentiable, so the grid
// spacing is an explicit mollification knob, not a convergence parameter;
// it is echoed into every report. The time change tau_t = integral of
// exp(-W(Y_s)) ds and its inverse A turn Y into the target process X = Y(A).
//
// Paths that reach the sampling grid's boundary are censored, never
// reflected: extrapolating a Gaussian field sample would fabricate
// environment where none was drawn.

namespace recenv {

enum class ExitReason { kInnerHit, kOuterExit, kGridBoundary, kHorizon };

const char* exit_reason_name(ExitReason reason);

// Simulation parameters. The stopping radii are optional for plain path
// simulation (inner_radius = 0, outer_radius = infinity disables them);
// hitting estimates require 0 < inner_radius < |x0| < outer_radius.
struct SimConfig {
  double step = 1e-3;            // Euler-Maruyama step h; must be <= T/100
  double horizon = 1.0;          // time horizon T
  std::vector<double> x0;        // start point
  double gradient_delta = 0.0;   // drift mollification; 0 = grid spacing
  int trials = 1000;
  std::uint64_t seed = 0;
  double inner_radius = 0.0;
  double outer_radius = std::numeric_limits<double>::infinity();
};

struct DiffusionPath {
  int dimension = 0;
  std::vector<double> times;   // strictly increasing, uniform step
  std::vector<double> values;  // flat, dimension per time
  ExitReason exit = ExitReason::kHorizon;

  std::size_t size() const { return times.size(); }
  std::span<const double> point(std::size_t i) const {
    return {values.data() + i * dimension, static_cast<std::size_t>(dimension)};
  }
};

// Time change along one path: tau at every path node, the inverse map A by
// piecewise-linear inversion, and X = Y(A) resampled on a uniform grid over
// [0, tau_end].
struct TimeChange {
  int dimension = 0;
  std::vector<double> path_times;
  std::vector<double> tau;       // same length as path_times
  std::vector<double> x_times;   // uniform on [0, tau.back()]
  std::vector<double> x_values;  // flat, dimension per x_time

  double inverse(double s) const;  // A(s), clamped to the path's time span
  std::span<const double> x_point(std::size_t i) const {
    return {x_values.data() + i * dimension,
            static_cast<std::size_t>(dimension)};
  }
};

// One row of the per-environment table emitted by recurrence_mc.
struct EnvironmentRow {
  std::uint64_t env_seed = 0;
  double p_hat = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
  double censored_frac = 0.0;
};

struct RecurrenceStats {
  std::vector<EnvironmentRow> rows;
  CriterionReport pooled;
};

// One path in the sampled environment. The drift is -(1/2) grad of the
// field's interpolant; the path stops at the inner radius, the outer radius,
// the grid boundary (by the gradient probe margin), or the horizon. The RNG
// stream is keyed by (cfg.seed, env_index, trial), so any trial can be
// recomputed in isolation.
DiffusionPath simulate_Y(const FieldSample& field, const SimConfig& cfg,
                         std::uint64_t env_index = 0,
                         std::uint64_t trial = 0);

// Flat environment W = 0: pure Brownian motion, no grid, no censoring other
// than the horizon.
DiffusionPath simulate_Y(int dimension, const SimConfig& cfg,
                         std::uint64_t env_index = 0, std::uint64_t trial = 0);

TimeChange time_change(const DiffusionPath& path, const FieldSample& field);
TimeChange time_change(const DiffusionPath& path);  // W = 0: tau = t

// Monte Carlo estimate of P(hit inner ball before outer exit) over
// cfg.trials paths, with a Wilson interval over the decided (non-censored)
// trials and the censoring rate reported alongside. More than half the
// trials censored makes the estimate inconclusive. A start already inside
// the inner ball returns p = 1 by convention.
CriterionReport hitting_stats(const FieldSample& field, const SimConfig& cfg,
                              std::uint64_t env_index = 0, int threads = 1);
CriterionReport hitting_stats(int dimension, const SimConfig& cfg,
                              int threads = 1);

// Hitting statistics across independently sampled environments: one field
// per seed on the given grid, one hitting_stats row each, plus a pooled
// summary over all decided trials. Deterministic for fixed (cfg, seeds) at
// any thread count.
RecurrenceStats recurrence_mc(const CovarianceKernel& kernel,
                              const RectGrid& grid, const SimConfig& cfg,
                              std::span<const std::uint64_t> env_seeds,
                              int threads = 1);

void write_path_csv(const DiffusionPath& path, const std::string& path_name);
void write_environment_csv(std::span<const EnvironmentRow> rows,
                           const std::string& path_name);

}  // namespace recenv
