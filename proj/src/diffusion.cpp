#include "recenv/diffusion.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <thread>

#include "recenv/common.hpp"
#include "recenv/rng.hpp"

namespace recenv {

namespace {

// Trials are assigned to workers in fixed round-robin slots and each writes
// only its own result cells, so the outcome arrays are identical for every
// thread count; all reduction happens afterwards on one thread.
void parallel_for(std::size_t n, int threads,
                  const std::function<void(std::size_t)>& body) {
  const int workers =
      std::max(1, std::min<int>(threads, static_cast<int>(n)));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      for (std::size_t i = w; i < n; i += workers) body(i);
    });
  }
  for (auto& t : pool) t.join();
}

std::uint64_t stream_index(std::uint64_t env_index, std::uint64_t trial) {
  if (env_index >= (1ULL << 24) || trial >= (1ULL << 32)) {
    throw ArgumentError("stream index out of range: env < 2^24, trial < 2^32");
  }
  return (env_index << 32) | trial;
}

void validate_common(const SimConfig& cfg, int dimension) {
  if (dimension < 2) throw ArgumentError("dimension must be at least 2");
  if (static_cast<int>(cfg.x0.size()) != dimension) {
    throw ArgumentError("x0 dimension does not match the field");
  }
  if (!(cfg.step > 0.0) || !std::isfinite(cfg.step)) {
    throw ArgumentError("step must be positive and finite");
  }
  if (!(cfg.horizon > 0.0) || !std::isfinite(cfg.horizon)) {
    throw ArgumentError("horizon must be positive and finite");
  }
  if (cfg.step > 1e-2 * cfg.horizon) {
    throw ArgumentError("step too coarse: need h <= T/100");
  }
  if (cfg.inner_radius < 0.0 || cfg.outer_radius <= cfg.inner_radius) {
    throw ArgumentError("radii must satisfy 0 <= inner < outer");
  }
}

std::size_t step_count(const SimConfig& cfg) {
  return static_cast<std::size_t>(std::ceil(cfg.horizon / cfg.step - 1e-9));
}

// Mollification scale: the configured delta, or one grid spacing when the
// config leaves it at zero.
double resolve_delta(const SimConfig& cfg, const RectGrid& grid) {
  if (cfg.gradient_delta > 0.0) return cfg.gradient_delta;
  return 2.0 * grid.extent() / (grid.nodes_per_axis() - 1);
}

// With record = false only the endpoint is kept, so hitting sweeps with
// hundreds of thousands of steps per trial stay allocation-light.
DiffusionPath run_path(const FieldSample* field, int dimension,
                       const SimConfig& cfg, double delta, double margin,
                       std::uint64_t env_index, std::uint64_t trial,
                       bool record) {
  PhiloxStream rng(cfg.seed, StreamPurpose::kSimPath,
                   stream_index(env_index, trial));
  const double root_h = std::sqrt(cfg.step);
  const std::size_t steps = step_count(cfg);

  DiffusionPath path;
  path.dimension = dimension;
  path.exit = ExitReason::kHorizon;
  if (record) {
    path.times.reserve(steps + 1);
    path.values.reserve((steps + 1) * dimension);
    path.times.push_back(0.0);
    path.values.insert(path.values.end(), cfg.x0.begin(), cfg.x0.end());
  }

  std::vector<double> y = cfg.x0;
  std::vector<double> proposed(dimension);
  std::vector<double> noise(dimension);
  const double extent = field != nullptr ? field->grid->extent() : 0.0;
  double t = 0.0;
  for (std::size_t k = 0; k < steps; ++k) {
    rng.fill_normals(noise);
    if (field != nullptr) {
      const std::vector<double> g = gradient(*field, y, delta);
      for (int j = 0; j < dimension; ++j) {
        proposed[j] = y[j] + root_h * noise[j] - 0.5 * cfg.step * g[j];
      }
    } else {
      for (int j = 0; j < dimension; ++j) {
        proposed[j] = y[j] + root_h * noise[j];
      }
    }

    // A proposal outside the sampled box is never stored: the environment is
    // undefined there, so the path ends at its last evaluable state. Radius
    // events are still decided on the proposal (a metric fact needing no W).
    if (field != nullptr) {
      bool in_box = true;
      for (int j = 0; j < dimension; ++j) {
        if (std::abs(proposed[j]) > extent) in_box = false;
      }
      if (!in_box) {
        path.exit = std::sqrt(squared_norm(proposed)) >= cfg.outer_radius
                        ? ExitReason::kOuterExit
                        : ExitReason::kGridBoundary;
        break;
      }
    }

    y = proposed;
    t = (k + 1) * cfg.step;
    if (record) {
      path.times.push_back(t);
      path.values.insert(path.values.end(), y.begin(), y.end());
    }

    const double radius = std::sqrt(squared_norm(y));
    if (radius <= cfg.inner_radius) {
      path.exit = ExitReason::kInnerHit;
      break;
    }
    if (radius >= cfg.outer_radius) {
      path.exit = ExitReason::kOuterExit;
      break;
    }
    if (field != nullptr) {
      bool past_margin = false;
      for (int j = 0; j < dimension; ++j) {
        if (std::abs(y[j]) > margin) past_margin = true;
      }
      if (past_margin) {
        path.exit = ExitReason::kGridBoundary;
        break;
      }
    }
  }
  if (!record) {
    path.times.push_back(t);
    path.values.insert(path.values.end(), y.begin(), y.end());
  }
  return path;
}

TimeChange build_time_change(const DiffusionPath& path,
                             const FieldSample* field) {
  if (path.size() == 0) throw ArgumentError("time change of an empty path");
  const int d = path.dimension;

  TimeChange tc;
  tc.dimension = d;
  tc.path_times = path.times;
  tc.tau.resize(path.size());
  tc.tau[0] = 0.0;
  double prev = field ? std::exp(-interpolate(*field, path.point(0))) : 1.0;
  for (std::size_t k = 1; k < path.size(); ++k) {
    const double cur =
        field ? std::exp(-interpolate(*field, path.point(k))) : 1.0;
    const double dt = path.times[k] - path.times[k - 1];
    tc.tau[k] = tc.tau[k - 1] + 0.5 * dt * (prev + cur);
    prev = cur;
  }

  // X on a uniform grid over the changed clock, linearly interpolating Y
  // between path nodes through the inverse map.
  const std::size_t m = path.size();
  tc.x_times.resize(m);
  tc.x_values.resize(m * d);
  if (m == 1) {
    tc.x_times[0] = 0.0;
    const auto p = path.point(0);
    std::copy(p.begin(), p.end(), tc.x_values.begin());
    return tc;
  }
  const double tau_end = tc.tau.back();
  for (std::size_t i = 0; i < m; ++i) {
    const double s = m == 1 ? 0.0 : tau_end * i / (m - 1);
    tc.x_times[i] = s;
    const auto hi = std::upper_bound(tc.tau.begin(), tc.tau.end(), s);
    std::size_t k = std::clamp<std::size_t>(hi - tc.tau.begin(), 1, m - 1);
    const double span = tc.tau[k] - tc.tau[k - 1];
    const double frac = span > 0.0 ? (s - tc.tau[k - 1]) / span : 0.0;
    const auto a = path.point(k - 1);
    const auto b = path.point(k);
    for (int j = 0; j < d; ++j) {
      tc.x_values[i * d + j] = a[j] + frac * (b[j] - a[j]);
    }
  }
  return tc;
}

struct TrialOutcome {
  std::uint8_t kind = 2;  // 0 inner hit, 1 outer exit, 2 censored
  double hit_time = 0.0;
};

CriterionReport stats_from_outcomes(std::span<const TrialOutcome> outcomes,
                                    const SimConfig& cfg,
                                    nlohmann::json inputs) {
  std::size_t hits = 0, outs = 0, censored = 0;
  double hit_time_sum = 0.0;
  for (const auto& o : outcomes) {
    if (o.kind == 0) {
      ++hits;
      hit_time_sum += o.hit_time;
    } else if (o.kind == 1) {
      ++outs;
    } else {
      ++censored;
    }
  }
  const std::size_t decided = hits + outs;
  const double trials = static_cast<double>(outcomes.size());

  CriterionReport report;
  report.name = "hitting_stats";
  report.inputs = std::move(inputs);
  report.values["trials"] = trials;
  report.values["hits"] = static_cast<double>(hits);
  report.values["decided"] = static_cast<double>(decided);
  report.values["censored_frac"] = censored / trials;
  if (decided > 0) {
    const double n = static_cast<double>(decided);
    const double p = hits / n;
    const double z = 1.959963984540054;
    const double denom = 1.0 + z * z / n;
    const double center = (p + z * z / (2.0 * n)) / denom;
    const double half =
        z * std::sqrt(p * (1.0 - p) / n + z * z / (4.0 * n * n)) / denom;
    report.values["p_hat"] = p;
    report.values["ci_lo"] = hits == 0 ? 0.0 : std::max(0.0, center - half);
    report.values["ci_hi"] =
        hits == decided ? 1.0 : std::min(1.0, center + half);
    report.error_estimates["p_hat"] = half;
  }
  if (hits > 0) {
    report.values["mean_hit_time"] = hit_time_sum / static_cast<double>(hits);
  }
  report.notes.push_back(
      "finite-window hitting estimate over horizon T = " +
      std::to_string(cfg.horizon) +
      "; the censoring rate bounds how much the window truncates");
  if (2 * censored > outcomes.size() || decided == 0) {
    report.verdict = Verdict::kInconclusive;
    report.notes.push_back(
        "most trials were censored before deciding; grow the horizon or the "
        "grid");
  } else {
    report.verdict = Verdict::kSatisfied;
  }
  return report;
}

CriterionReport hitting_core(const FieldSample* field, int dimension,
                             const SimConfig& cfg, double delta, double margin,
                             std::uint64_t env_index, int threads,
                             nlohmann::json inputs) {
  if (cfg.trials < 1) throw ArgumentError("trials must be positive");
  if (!(cfg.inner_radius > 0.0)) {
    throw ArgumentError("hitting estimate needs a positive inner radius");
  }
  if (!std::isfinite(cfg.outer_radius)) {
    throw ArgumentError("hitting estimate needs a finite outer radius");
  }

  const double start_radius = std::sqrt(squared_norm(cfg.x0));
  if (start_radius <= cfg.inner_radius) {
    // Already inside the target ball: certain hit at time zero.
    CriterionReport report;
    report.name = "hitting_stats";
    report.inputs = std::move(inputs);
    report.values["trials"] = static_cast<double>(cfg.trials);
    report.values["hits"] = static_cast<double>(cfg.trials);
    report.values["decided"] = static_cast<double>(cfg.trials);
    report.values["censored_frac"] = 0.0;
    report.values["p_hat"] = 1.0;
    report.values["ci_lo"] = 1.0;
    report.values["ci_hi"] = 1.0;
    report.values["mean_hit_time"] = 0.0;
    report.error_estimates["p_hat"] = 0.0;
    report.verdict = Verdict::kSatisfied;
    report.notes.push_back("start point already inside the inner ball");
    return report;
  }
  if (start_radius >= cfg.outer_radius) {
    throw ArgumentError("start point lies outside the outer radius");
  }

  std::vector<TrialOutcome> outcomes(cfg.trials);
  parallel_for(outcomes.size(), threads, [&](std::size_t i) {
    DiffusionPath p = run_path(field, dimension, cfg, delta, margin,
                               env_index, static_cast<std::uint64_t>(i),
                               false);
    TrialOutcome& o = outcomes[i];
    switch (p.exit) {
      case ExitReason::kInnerHit:
        o.kind = 0;
        o.hit_time = p.times.back();
        break;
      case ExitReason::kOuterExit: o.kind = 1; break;
      default: o.kind = 2; break;
    }
  });
  return stats_from_outcomes(outcomes, cfg, std::move(inputs));
}

}  // namespace

const char* exit_reason_name(ExitReason reason) {
  switch (reason) {
    case ExitReason::kInnerHit: return "inner_hit";
    case ExitReason::kOuterExit: return "outer_exit";
    case ExitReason::kGridBoundary: return "grid_boundary";
    case ExitReason::kHorizon: return "horizon";
  }
  return "unknown";
}

double TimeChange::inverse(double s) const {
  if (tau.empty()) throw ArgumentError("empty time change");
  if (s <= tau.front()) return path_times.front();
  if (s >= tau.back()) return path_times.back();
  const auto hi = std::upper_bound(tau.begin(), tau.end(), s);
  const std::size_t k = std::clamp<std::size_t>(hi - tau.begin(), 1,
                                                tau.size() - 1);
  const double span = tau[k] - tau[k - 1];
  const double frac = span > 0.0 ? (s - tau[k - 1]) / span : 0.0;
  return path_times[k - 1] + frac * (path_times[k] - path_times[k - 1]);
}

DiffusionPath simulate_Y(const FieldSample& field, const SimConfig& cfg,
                         std::uint64_t env_index, std::uint64_t trial) {
  if (!field.grid.has_value()) {
    throw ArgumentError("simulation needs a field sampled on a RectGrid");
  }
  validate_common(cfg, field.dimension);
  const RectGrid& grid = *field.grid;
  const double delta = resolve_delta(cfg, grid);
  const double margin = grid.extent() - delta;
  for (double c : cfg.x0) {
    if (std::abs(c) > margin) {
      throw ArgumentError(
          "start too close to boundary: need |x0_k| <= extent - delta");
    }
  }
  return run_path(&field, field.dimension, cfg, delta, margin, env_index,
                  trial, true);
}

DiffusionPath simulate_Y(int dimension, const SimConfig& cfg,
                         std::uint64_t env_index, std::uint64_t trial) {
  validate_common(cfg, dimension);
  return run_path(nullptr, dimension, cfg, 0.0, 0.0, env_index, trial, true);
}

TimeChange time_change(const DiffusionPath& path, const FieldSample& field) {
  if (!field.grid.has_value()) {
    throw ArgumentError("time change needs a field sampled on a RectGrid");
  }
  if (field.dimension != path.dimension) {
    throw ArgumentError("path and field dimensions differ");
  }
  return build_time_change(path, &field);
}

TimeChange time_change(const DiffusionPath& path) {
  return build_time_change(path, nullptr);
}

CriterionReport hitting_stats(const FieldSample& field, const SimConfig& cfg,
                              std::uint64_t env_index, int threads) {
  if (!field.grid.has_value()) {
    throw ArgumentError("simulation needs a field sampled on a RectGrid");
  }
  validate_common(cfg, field.dimension);
  const RectGrid& grid = *field.grid;
  if (cfg.outer_radius > grid.extent()) {
    throw ArgumentError("outer radius exceeds the sampled grid");
  }
  const double delta = resolve_delta(cfg, grid);
  const double margin = grid.extent() - delta;
  for (double c : cfg.x0) {
    if (std::abs(c) > margin) {
      throw ArgumentError(
          "start too close to boundary: need |x0_k| <= extent - delta");
    }
  }
  nlohmann::json inputs = {{"kernel", field.kernel_id},
                           {"environment_seed", field.seed},
                           {"dimension", field.dimension},
                           {"inner_radius", cfg.inner_radius},
                           {"outer_radius", cfg.outer_radius},
                           {"step", cfg.step},
                           {"horizon", cfg.horizon},
                           {"gradient_delta", delta},
                           {"trials", cfg.trials},
                           {"seed", cfg.seed}};
  return hitting_core(&field, field.dimension, cfg, delta, margin, env_index,
                      threads, std::move(inputs));
}

CriterionReport hitting_stats(int dimension, const SimConfig& cfg,
                              int threads) {
  validate_common(cfg, dimension);
  nlohmann::json inputs = {{"kernel", "flat"},
                           {"dimension", dimension},
                           {"inner_radius", cfg.inner_radius},
                           {"outer_radius", cfg.outer_radius},
                           {"step", cfg.step},
                           {"horizon", cfg.horizon},
                           {"trials", cfg.trials},
                           {"seed", cfg.seed}};
  return hitting_core(nullptr, dimension, cfg, 0.0, 0.0, 0, threads,
                      std::move(inputs));
}

RecurrenceStats recurrence_mc(const CovarianceKernel& kernel,
                              const RectGrid& grid, const SimConfig& cfg,
                              std::span<const std::uint64_t> env_seeds,
                              int threads) {
  if (env_seeds.empty()) {
    throw ArgumentError("need at least one environment seed");
  }
  if (kernel.dimension() != grid.dimension()) {
    throw ArgumentError("kernel and grid dimensions differ");
  }

  // One factorization serves every environment; only the draw seed changes.
  GaussianSampler sampler(kernel, grid.flatten_points());

  RecurrenceStats stats;
  stats.rows.reserve(env_seeds.size());
  std::size_t pool_hits = 0, pool_outs = 0, pool_censored = 0, pool_trials = 0;
  for (std::size_t e = 0; e < env_seeds.size(); ++e) {
    FieldSample field = sampler.sample(env_seeds[e]);
    field.grid = grid;
    CriterionReport one = hitting_stats(field, cfg, e, threads);
    EnvironmentRow row;
    row.env_seed = env_seeds[e];
    row.p_hat = one.values.count("p_hat") ? one.values.at("p_hat") : 0.0;
    row.ci_lo = one.values.count("ci_lo") ? one.values.at("ci_lo") : 0.0;
    row.ci_hi = one.values.count("ci_hi") ? one.values.at("ci_hi") : 1.0;
    row.censored_frac = one.values.at("censored_frac");
    stats.rows.push_back(row);

    const auto decided = static_cast<std::size_t>(one.values.at("decided"));
    const auto hits = static_cast<std::size_t>(one.values.at("hits"));
    pool_hits += hits;
    pool_outs += decided - hits;
    pool_trials += static_cast<std::size_t>(one.values.at("trials"));
    pool_censored +=
        static_cast<std::size_t>(one.values.at("trials")) - decided;
  }

  std::vector<TrialOutcome> pooled(pool_trials);
  std::size_t at = 0;
  for (std::size_t i = 0; i < pool_hits; ++i) pooled[at++].kind = 0;
  for (std::size_t i = 0; i < pool_outs; ++i) pooled[at++].kind = 1;
  for (std::size_t i = 0; i < pool_censored; ++i) pooled[at++].kind = 2;
  nlohmann::json inputs = {{"kernel", kernel.id()},
                           {"environments", env_seeds.size()},
                           {"grid_extent", grid.extent()},
                           {"grid_nodes_per_axis", grid.nodes_per_axis()},
                           {"inner_radius", cfg.inner_radius},
                           {"outer_radius", cfg.outer_radius},
                           {"step", cfg.step},
                           {"horizon", cfg.horizon},
                           {"trials_per_environment", cfg.trials},
                           {"seed", cfg.seed}};
  stats.pooled = stats_from_outcomes(pooled, cfg, std::move(inputs));
  stats.pooled.name = "recurrence_mc";
  stats.pooled.values.erase("mean_hit_time");  // times were not pooled
  stats.pooled.notes.push_back(
      "pooled hitting fractions are an exploratory recurrence proxy on a "
      "finite box, not a test of the limit statement");
  return stats;
}

void write_path_csv(const DiffusionPath& path, const std::string& path_name) {
  std::ofstream out(path_name);
  if (!out) throw ArgumentError("cannot open " + path_name);
  out << "t";
  for (int j = 1; j <= path.dimension; ++j) out << ",x" << j;
  out << "\n";
  char buf[32];
  for (std::size_t i = 0; i < path.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g", path.times[i]);
    out << buf;
    for (double v : path.point(i)) {
      std::snprintf(buf, sizeof buf, "%.17g", v);
      out << ',' << buf;
    }
    out << "\n";
  }
}

void write_environment_csv(std::span<const EnvironmentRow> rows,
                           const std::string& path_name) {
  std::ofstream out(path_name);
  if (!out) throw ArgumentError("cannot open " + path_name);
  out << "env_seed,p_hat,ci_lo,ci_hi,censored_frac\n";
  char buf[32];
  for (const auto& r : rows) {
    out << r.env_seed;
    for (double v : {r.p_hat, r.ci_lo, r.ci_hi, r.censored_frac}) {
      std::snprintf(buf, sizeof buf, "%.17g", v);
      out << ',' << buf;
    }
    out << "\n";
  }
}

}  // namespace recenv
