// recenv: batch front-end for the recurrence-criteria library. One command
// per invocation; inputs come from a JSON config with strict key checking,
// outputs are report.json plus CSV curves under an output directory.
//
// Exit codes: 0 all verdicts satisfied (or plain completion), 2 at least one
// violated, 3 at least one inconclusive (and none violated), 1 any error.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "recenv/common.hpp"
#include "recenv/criteria.hpp"
#include "recenv/diffusion.hpp"
#include "recenv/field.hpp"
#include "recenv/geometry.hpp"
#include "recenv/kernels.hpp"
#include "recenv/rng.hpp"

namespace {

using nlohmann::json;
using recenv::CovarianceKernel;
using recenv::CriterionReport;
using recenv::FieldSample;
using recenv::RectGrid;
using recenv::ShellFamily;
using recenv::ShellGeometry;
using recenv::SimConfig;
using recenv::Verdict;

constexpr const char* kVersion = "0.1.0";

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

[[noreturn]] void fail(const std::string& where, const std::string& what) {
  throw ConfigError("config field " + where + ": " + what);
}

// A view of one config object that names every field in diagnostics and
// rejects keys it was never asked about.
struct Section {
  const json* obj = nullptr;  // null when the section is absent
  std::string path;

  bool present() const { return obj != nullptr; }

  const json* find(const char* key) const {
    if (!present()) return nullptr;
    auto it = obj->find(key);
    return it == obj->end() ? nullptr : &*it;
  }

  void allow(std::initializer_list<const char*> keys) const {
    if (!present()) return;
    for (auto it = obj->begin(); it != obj->end(); ++it) {
      bool known = false;
      for (const char* k : keys) {
        if (it.key() == k) known = true;
      }
      if (!known) {
        fail(path.empty() ? it.key() : path + "." + it.key(),
             "unknown key (typo?)");
      }
    }
  }

  std::string where(const char* key) const {
    return path.empty() ? key : path + "." + key;
  }

  Section child(const char* key) const {
    const json* v = find(key);
    if (v != nullptr && !v->is_object()) {
      fail(where(key), "expected an object");
    }
    return Section{v, where(key)};
  }

  double real(const char* key, std::optional<double> fallback = {}) const {
    const json* v = find(key);
    if (v == nullptr) {
      if (fallback) return *fallback;
      fail(where(key), "missing required real number");
    }
    if (!v->is_number()) fail(where(key), "expected a real number");
    return v->get<double>();
  }

  std::int64_t integer(const char* key,
                       std::optional<std::int64_t> fallback = {}) const {
    const json* v = find(key);
    if (v == nullptr) {
      if (fallback) return *fallback;
      fail(where(key), "missing required integer");
    }
    if (!v->is_number_integer()) fail(where(key), "expected an integer");
    return v->get<std::int64_t>();
  }

  std::string str(const char* key,
                  std::optional<std::string> fallback = {}) const {
    const json* v = find(key);
    if (v == nullptr) {
      if (fallback) return *fallback;
      fail(where(key), "missing required string");
    }
    if (!v->is_string()) fail(where(key), "expected a string");
    return v->get<std::string>();
  }

  bool flag(const char* key, bool fallback) const {
    const json* v = find(key);
    if (v == nullptr) return fallback;
    if (!v->is_boolean()) fail(where(key), "expected a boolean");
    return v->get<bool>();
  }

  std::vector<double> reals(const char* key) const {
    const json* v = find(key);
    if (v == nullptr) fail(where(key), "missing required array of reals");
    if (!v->is_array()) fail(where(key), "expected an array of reals");
    std::vector<double> out;
    for (const auto& e : *v) {
      if (!e.is_number()) fail(where(key), "expected an array of reals");
      out.push_back(e.get<double>());
    }
    return out;
  }

  std::vector<std::uint64_t> seeds_list(const char* key) const {
    const json* v = find(key);
    if (v == nullptr) fail(where(key), "missing required array of seeds");
    if (!v->is_array()) fail(where(key), "expected an array of seeds");
    std::vector<std::uint64_t> out;
    for (const auto& e : *v) {
      if (!e.is_number_unsigned() && !e.is_number_integer()) {
        fail(where(key), "expected an array of seeds");
      }
      out.push_back(e.get<std::uint64_t>());
    }
    return out;
  }
};

// Everything a command handler needs; overrides are already merged.
struct Context {
  Section root;
  std::string out_dir;
  std::uint64_t master_seed = 0;
  std::vector<std::uint64_t> env_seeds;
  int threads = 1;
};

struct RunResult {
  json resolved = json::object();
  std::map<std::string, CriterionReport> reports;
};

CovarianceKernel make_kernel(const Section& root, json& resolved) {
  Section k = root.child("kernel");
  if (!k.present()) fail("kernel", "missing required section");
  k.allow({"type", "hurst", "dimension"});
  const std::string type = k.str("type");
  const int d = static_cast<int>(k.integer("dimension"));
  if (type == "fractional_brownian") {
    const double hurst = k.real("hurst");
    resolved["kernel"] = {{"type", type}, {"hurst", hurst}, {"dimension", d}};
    return CovarianceKernel::fractional_brownian(hurst, d);
  }
  if (type == "zero") {
    resolved["kernel"] = {{"type", type}, {"dimension", d}};
    return CovarianceKernel::zero(d);
  }
  fail("kernel.type", "expected \"fractional_brownian\" or \"zero\"");
}

ShellGeometry make_geometry(const Section& root, json& resolved) {
  Section g = root.child("geometry");
  if (!g.present()) fail("geometry", "missing required section");
  g.allow({"family", "r", "n", "resolution"});
  const std::string family = g.str("family");
  ShellGeometry geom;
  if (family == "ball") {
    geom.family = ShellFamily::kBall;
  } else if (family == "box") {
    geom.family = ShellFamily::kBox;
  } else {
    fail("geometry.family", "expected \"ball\" or \"box\"");
  }
  geom.r = g.real("r");
  geom.n = static_cast<int>(g.integer("n", 1));
  resolved["geometry"] = {{"family", family},
                          {"r", geom.r},
                          {"n", geom.n},
                          {"resolution", g.integer("resolution", 200)}};
  return geom;
}

RectGrid make_grid(const Section& root, int dimension, json& resolved) {
  Section g = root.child("grid");
  if (!g.present()) fail("grid", "missing required section");
  g.allow({"extent", "nodes_per_axis"});
  const double extent = g.real("extent");
  const int nodes = static_cast<int>(g.integer("nodes_per_axis"));
  resolved["grid"] = {{"extent", extent}, {"nodes_per_axis", nodes}};
  return RectGrid(dimension, extent, nodes);
}

SimConfig make_sim(const Section& root, json& resolved,
                   std::uint64_t master_seed) {
  Section s = root.child("sim");
  if (!s.present()) fail("sim", "missing required section");
  s.allow({"step", "horizon", "x0", "gradient_delta", "trials",
           "inner_radius", "outer_radius"});
  SimConfig cfg;
  cfg.step = s.real("step");
  cfg.horizon = s.real("horizon");
  cfg.x0 = s.reals("x0");
  cfg.gradient_delta = s.real("gradient_delta", 0.0);
  cfg.trials = static_cast<int>(s.integer("trials", 1000));
  cfg.inner_radius = s.real("inner_radius", 0.0);
  cfg.outer_radius =
      s.real("outer_radius", std::numeric_limits<double>::infinity());
  cfg.seed = master_seed;
  resolved["sim"] = {{"step", cfg.step},
                     {"horizon", cfg.horizon},
                     {"x0", cfg.x0},
                     {"gradient_delta", cfg.gradient_delta},
                     {"trials", cfg.trials},
                     {"inner_radius", cfg.inner_radius},
                     {"outer_radius", cfg.outer_radius}};
  return cfg;
}

std::vector<double> make_t_grid(const Section& root, json& resolved) {
  Section t = root.child("t_grid");
  double start = 0.0, stop = 20.0;
  std::int64_t count = 9;
  if (t.present()) {
    t.allow({"start", "stop", "count"});
    start = t.real("start", 0.0);
    stop = t.real("stop", 20.0);
    count = t.integer("count", 9);
  }
  if (count < 2 || stop <= start) {
    fail("t_grid", "need count >= 2 and stop > start");
  }
  std::vector<double> grid(count);
  for (std::int64_t i = 0; i < count; ++i) {
    grid[i] = start + (stop - start) * static_cast<double>(i) /
                          static_cast<double>(count - 1);
  }
  resolved["t_grid"] = {{"start", start}, {"stop", stop}, {"count", count}};
  return grid;
}

// ---------------------------------------------------------------------------
// Command handlers
// ---------------------------------------------------------------------------

RunResult run_kernel_check(const Context& ctx) {
  RunResult out;
  auto kernel = make_kernel(ctx.root, out.resolved);
  const int d = kernel.dimension();
  const auto pairs = ctx.root.integer("trials", 1000);
  out.resolved["trials"] = pairs;

  recenv::PhiloxStream rng(ctx.master_seed, recenv::StreamPurpose::kMcTrial);
  std::vector<double> x(d), y(d), lx(d), ly(d), zero(d, 0.0);
  double sym = 0.0, hom = 0.0, pin = 0.0;
  for (std::int64_t i = 0; i < pairs; ++i) {
    for (int j = 0; j < d; ++j) {
      x[j] = 4.0 * rng.next_uniform() - 2.0;
      y[j] = 4.0 * rng.next_uniform() - 2.0;
    }
    const double lambda = 0.25 + 4.0 * rng.next_uniform();
    for (int j = 0; j < d; ++j) {
      lx[j] = lambda * x[j];
      ly[j] = lambda * y[j];
    }
    sym = std::max(sym, std::abs(kernel.eval(x, y) - kernel.eval(y, x)));
    pin = std::max(pin, std::abs(kernel.eval(x, zero)));
    if (kernel.kind() == recenv::KernelKind::kFractionalBrownian) {
      const double scale = std::pow(lambda, 2.0 * kernel.hurst());
      const double base = kernel.eval(x, y);
      const double rel = std::abs(kernel.eval(lx, ly) - scale * base) /
                         std::max(1.0, std::abs(scale * base));
      hom = std::max(hom, rel);
    }
  }

  CriterionReport rep;
  rep.name = "kernel_check";
  rep.inputs = {{"kernel", kernel.id()},
                {"pairs", pairs},
                {"seed", ctx.master_seed}};
  rep.values["max_symmetry_error"] = sym;
  rep.values["max_zero_pinning_error"] = pin;
  rep.values["max_homogeneity_rel_error"] = hom;
  rep.verdict = (sym == 0.0 && pin == 0.0 && hom <= 1e-12)
                    ? Verdict::kSatisfied
                    : Verdict::kViolated;
  out.reports["kernel_check"] = std::move(rep);
  return out;
}

RunResult run_sample(const Context& ctx) {
  RunResult out;
  auto kernel = make_kernel(ctx.root, out.resolved);
  RectGrid grid = make_grid(ctx.root, kernel.dimension(), out.resolved);
  Section field_cfg = ctx.root.child("field");
  field_cfg.allow({"jitter"});
  const double jitter = field_cfg.real("jitter", 1e-10);
  out.resolved["field"] = {{"jitter", jitter}};

  recenv::GaussianSampler sampler(kernel, grid.flatten_points(), jitter);
  FieldSample field = sampler.sample(ctx.master_seed);
  field.grid = grid;
  recenv::write_field_csv(field, ctx.out_dir + "/field.csv");
  recenv::write_field_sidecar(field, ctx.out_dir + "/field.json");

  CriterionReport rep;
  rep.name = "sample";
  rep.inputs = {{"kernel", kernel.id()}, {"seed", ctx.master_seed}};
  rep.values["nodes"] = static_cast<double>(grid.size());
  rep.values["jitter_used"] = sampler.jitter();
  rep.values["pinned_nodes"] = static_cast<double>(sampler.pinned());
  rep.verdict = Verdict::kSatisfied;
  rep.notes.push_back("field written to field.csv with sidecar field.json");
  out.reports["sample"] = std::move(rep);
  return out;
}

RunResult run_conditions(const Context& ctx) {
  RunResult out;
  auto kernel = make_kernel(ctx.root, out.resolved);
  const int d = kernel.dimension();

  Section thresholds = ctx.root.child("thresholds");
  thresholds.allow({"a", "epsilon", "c", "tail_tol", "match_tol"});
  const double a = thresholds.real("a", 0.0);
  const double epsilon = thresholds.real("epsilon", 1.0);
  const double tail_tol = thresholds.real("tail_tol", 0.01);
  out.resolved["thresholds"] = {
      {"a", a}, {"epsilon", epsilon}, {"tail_tol", tail_tol}};

  Section scaling = ctx.root.child("scaling");
  scaling.allow({"alpha", "base"});
  const double alpha = scaling.real(
      "alpha", kernel.kind() == recenv::KernelKind::kFractionalBrownian
                   ? kernel.hurst()
                   : 1.0);
  const double base = scaling.real("base", 2.0);
  out.resolved["scaling"] = {{"alpha", alpha}, {"base", base}};

  Section sphere = ctx.root.child("sphere");
  sphere.allow({"resolution"});
  const int sphere_res = static_cast<int>(sphere.integer("resolution", 512));
  out.resolved["sphere"] = {{"resolution", sphere_res}};

  // Condition (i) over the unit sphere, always.
  out.reports["condition_i_sphere"] =
      recenv::condition_i_sphere(kernel, d, sphere_res, epsilon);

  // Condition (i) over the first shell, when a geometry is configured.
  if (ctx.root.child("geometry").present()) {
    ShellGeometry geom = make_geometry(ctx.root, out.resolved);
    geom.d = d;
    const int res =
        static_cast<int>(out.resolved["geometry"]["resolution"].get<int>());
    out.reports["condition_i_shell"] = recenv::condition_i_shell(
        kernel, geom, res, epsilon, ctx.master_seed);
  }

  // Covariance decay along the scaling flow (condition (ii) surrogate).
  const std::vector<double> t_grid = make_t_grid(ctx.root, out.resolved);
  out.reports["mixing_decay"] = recenv::mixing_decay_curve(
      kernel, {alpha, base}, recenv::sphere_points(d, sphere_res), t_grid,
      tail_tol);

  // The angular integral and the eventual-positivity time are specific to
  // the fractional kernel's closed forms.
  if (kernel.kind() == recenv::KernelKind::kFractionalBrownian) {
    Section ang = ctx.root.child("angular");
    ang.allow({"resolution"});
    const int ang_res = static_cast<int>(ang.integer("resolution", 100000));
    out.resolved["angular"] = {{"resolution", ang_res}};
    auto angular = recenv::angular_kernel_integral(kernel.hurst(), d, ang_res);
    CriterionReport rep;
    rep.name = "angular_integral";
    rep.inputs = {{"hurst", angular.hurst},
                  {"dimension", angular.dimension},
                  {"resolution", ang_res}};
    rep.values["integral"] = angular.integral;
    rep.values["theta0"] = angular.theta0;
    rep.verdict = angular.positive ? Verdict::kSatisfied : Verdict::kViolated;
    out.reports["angular_integral"] = std::move(rep);
  }

  // The eventual-positivity time is undefined for a <= 0, so the report is
  // emitted only when a positive level is configured.
  if (a > 0.0) {
    CriterionReport rep;
    rep.name = "t0";
    rep.inputs = {{"a", a}, {"alpha", alpha}, {"dimension", d}};
    try {
      rep.values["t0"] = recenv::t0_compute(a, alpha, d);
      rep.verdict = Verdict::kSatisfied;
    } catch (const recenv::NumericalError& e) {
      rep.verdict = Verdict::kInconclusive;
      rep.notes.push_back(e.what());
    }
    out.reports["t0"] = std::move(rep);
  }
  return out;
}

RunResult run_shell_integral(const Context& ctx) {
  RunResult out;
  auto kernel = make_kernel(ctx.root, out.resolved);
  const int d = kernel.dimension();
  RectGrid grid = make_grid(ctx.root, d, out.resolved);
  const double big_r = ctx.root.real("shell_R");
  out.resolved["shell_R"] = big_r;
  if (big_r > grid.extent()) {
    fail("shell_R", "exceeds grid.extent; the sampled field cannot reach it");
  }

  Section radial = ctx.root.child("radial");
  radial.allow({"resolution"});
  Section sphere = ctx.root.child("sphere");
  sphere.allow({"resolution"});
  const int radial_res = static_cast<int>(radial.integer("resolution", 2000));
  const int sphere_res = static_cast<int>(sphere.integer("resolution", 256));
  out.resolved["radial"] = {{"resolution", radial_res}};
  out.resolved["sphere"] = {{"resolution", sphere_res}};

  FieldSample field = recenv::sample_field(kernel, grid, ctx.master_seed);
  auto environment = [&field](std::span<const double> x) {
    return recenv::interpolate(field, x);
  };
  out.reports["shell_integral"] = recenv::shell_integral(
      environment, d, big_r, radial_res, sphere_res);
  return out;
}

RunResult run_lemma11(const Context& ctx) {
  RunResult out;
  auto kernel = make_kernel(ctx.root, out.resolved);
  const int d = kernel.dimension();
  ShellGeometry geom = make_geometry(ctx.root, out.resolved);
  geom.d = d;
  const int res =
      static_cast<int>(out.resolved["geometry"]["resolution"].get<int>());
  const auto n_max = ctx.root.integer("n_max", 8);
  out.resolved["n_max"] = n_max;

  Section thresholds = ctx.root.child("thresholds");
  thresholds.allow({"a", "epsilon", "c", "tail_tol", "match_tol"});
  const double c = thresholds.real("c", 0.0);
  out.resolved["thresholds"] = {{"c", c}};

  // One Gaussian draw over the union of all shells, so neighboring shells
  // stay correlated exactly as the kernel dictates.
  std::vector<double> points;
  for (int n = 1; n <= n_max; ++n) {
    ShellGeometry shell = geom;
    shell.n = n;
    auto set = recenv::shell_points(shell, res, ctx.master_seed);
    points.insert(points.end(), set.points.begin(), set.points.end());
  }
  recenv::GaussianSampler sampler(kernel, points);
  FieldSample field = sampler.sample(ctx.master_seed);

  out.reports["lemma11"] = recenv::lemma11_occurrences(
      field, geom.family, geom.r, d, c, static_cast<int>(n_max));
  return out;
}

RunResult run_ergodic(const Context& ctx) {
  RunResult out;
  auto kernel = make_kernel(ctx.root, out.resolved);
  const int d = kernel.dimension();

  Section thresholds = ctx.root.child("thresholds");
  thresholds.allow({"a", "epsilon", "c", "tail_tol", "match_tol"});
  const double a = thresholds.real("a", 0.0);
  const double match_tol = thresholds.real("match_tol", 0.1);
  out.resolved["thresholds"] = {{"a", a}, {"match_tol", match_tol}};

  Section scaling = ctx.root.child("scaling");
  scaling.allow({"alpha", "base"});
  const double alpha = scaling.real(
      "alpha", kernel.kind() == recenv::KernelKind::kFractionalBrownian
                   ? kernel.hurst()
                   : 1.0);
  out.resolved["scaling"] = {{"alpha", alpha}, {"base", 2.0}};

  Section sphere = ctx.root.child("sphere");
  sphere.allow({"resolution"});
  const int directions = static_cast<int>(sphere.integer("resolution", 32));
  out.resolved["sphere"] = {{"resolution", directions}};

  const std::vector<double> t_grid = make_t_grid(ctx.root, out.resolved);
  const auto trials = ctx.root.integer("trials", 10000);
  out.resolved["trials"] = trials;

  if (ctx.env_seeds.empty()) {
    fail("seeds.environments", "ergodic needs at least one environment seed");
  }

  // Shared direction set blown up to every radius 2^t on the grid; one
  // factorization serves all environment draws.
  auto dirs = recenv::sphere_points(d, directions);
  std::vector<double> points;
  for (double t : t_grid) {
    const double radius = std::exp2(t);
    for (std::size_t j = 0; j < dirs.size(); ++j) {
      for (double coord : dirs.point(j)) points.push_back(radius * coord);
    }
  }
  recenv::GaussianSampler sampler(kernel, points);

  std::vector<double> mean_m(t_grid.size(), 0.0);
  double indicator_mean = 0.0;
  double t0 = 0.0;
  for (std::uint64_t seed : ctx.env_seeds) {
    FieldSample field = sampler.sample(seed);
    auto series = recenv::scaled_infimum_process(field, alpha, t_grid, a);
    indicator_mean += series.time_average;
    t0 = series.t0;
    for (std::size_t k = 0; k < t_grid.size(); ++k) {
      mean_m[k] += series.m_values[k];
    }
  }
  indicator_mean /= static_cast<double>(ctx.env_seeds.size());
  for (double& v : mean_m) v /= static_cast<double>(ctx.env_seeds.size());

  auto mc = recenv::min_probability_mc(kernel, dirs, a,
                                       static_cast<int>(trials),
                                       ctx.master_seed);
  const double p_hat = mc.values.at("p_hat");

  CriterionReport rep;
  rep.name = "ergodic";
  rep.inputs = {{"kernel", kernel.id()},
                {"alpha", alpha},
                {"a", a},
                {"environments", ctx.env_seeds.size()},
                {"directions", directions},
                {"trials", trials},
                {"seed", ctx.master_seed}};
  rep.values["indicator_mean"] = indicator_mean;
  rep.values["p_hat"] = p_hat;
  rep.values["difference"] = std::abs(indicator_mean - p_hat);
  rep.values["t0"] = t0;
  rep.error_estimates["p_hat"] = mc.error_estimates.at("p_hat");
  recenv::Curve curve{"mean_scaled_infimum", {}};
  for (std::size_t k = 0; k < t_grid.size(); ++k) {
    curve.points.push_back({t_grid[k], mean_m[k]});
  }
  rep.curves.push_back(std::move(curve));
  rep.notes.push_back(
      "compares the time average of the indicator {M(t) >= a} with the "
      "spatial probability P(inf W >= a); agreement is evidence of the "
      "ergodic link, not a proof");
  rep.verdict = rep.values["difference"] <= match_tol
                    ? Verdict::kSatisfied
                    : Verdict::kInconclusive;
  out.reports["ergodic"] = std::move(rep);
  out.reports["min_probability"] = std::move(mc);
  return out;
}

RunResult run_simulate(const Context& ctx) {
  RunResult out;
  auto kernel = make_kernel(ctx.root, out.resolved);
  RectGrid grid = make_grid(ctx.root, kernel.dimension(), out.resolved);
  SimConfig cfg = make_sim(ctx.root, out.resolved, ctx.master_seed);

  Section output = ctx.root.child("output");
  output.allow({"paths", "max_paths"});
  const bool dump_paths = output.flag("paths", false);
  const auto max_paths = output.integer("max_paths", 4);
  out.resolved["output"] = {{"paths", dump_paths}, {"max_paths", max_paths}};

  const std::uint64_t env_seed =
      ctx.env_seeds.empty() ? ctx.master_seed : ctx.env_seeds.front();
  out.resolved["seeds"]["environments"] = {env_seed};
  FieldSample field = recenv::sample_field(kernel, grid, env_seed);

  if (dump_paths) {
    std::filesystem::create_directories(ctx.out_dir + "/paths");
  }

  double msd = 0.0;
  std::map<std::string, int> exits;
  for (int i = 0; i < cfg.trials; ++i) {
    recenv::DiffusionPath path = recenv::simulate_Y(field, cfg, 0, i);
    const auto last = path.point(path.size() - 1);
    double acc = 0.0;
    for (int j = 0; j < field.dimension; ++j) {
      const double diff = last[j] - cfg.x0[j];
      acc += diff * diff;
    }
    msd += acc;
    exits[recenv::exit_reason_name(path.exit)] += 1;
    if (dump_paths && i < max_paths) {
      recenv::write_path_csv(
          path, ctx.out_dir + "/paths/trial_" + std::to_string(i) + ".csv");
    }
    if (i == 0) {
      auto tc = recenv::time_change(path, field);
      recenv::Curve curve{"time_change", {}};
      for (std::size_t k = 0; k < tc.tau.size(); ++k) {
        curve.points.push_back({tc.path_times[k], tc.tau[k]});
      }
      CriterionReport& rep = out.reports["simulate"];
      rep.curves.push_back(std::move(curve));
    }
  }
  msd /= cfg.trials;

  CriterionReport& rep = out.reports["simulate"];
  rep.name = "simulate";
  rep.inputs = {{"kernel", kernel.id()},
                {"environment_seed", env_seed},
                {"trials", cfg.trials},
                {"seed", ctx.master_seed}};
  rep.values["mean_squared_displacement"] = msd;
  for (const auto& [name, count] : exits) {
    rep.values["exit_" + name] = count;
  }
  rep.values["censored_frac"] =
      static_cast<double>(exits["grid_boundary"]) / cfg.trials;
  rep.notes.push_back(
      "drift uses the grid interpolant with mollification step " +
      std::to_string(cfg.gradient_delta > 0.0
                         ? cfg.gradient_delta
                         : 2.0 * grid.extent() / (grid.nodes_per_axis() - 1)));
  rep.verdict = 2 * exits["grid_boundary"] > cfg.trials
                    ? Verdict::kInconclusive
                    : Verdict::kSatisfied;
  return out;
}

RunResult run_recurrence_mc(const Context& ctx) {
  RunResult out;
  auto kernel = make_kernel(ctx.root, out.resolved);
  RectGrid grid = make_grid(ctx.root, kernel.dimension(), out.resolved);
  SimConfig cfg = make_sim(ctx.root, out.resolved, ctx.master_seed);
  if (ctx.env_seeds.empty()) {
    fail("seeds.environments",
         "recurrence-mc needs at least one environment seed");
  }

  auto stats =
      recenv::recurrence_mc(kernel, grid, cfg, ctx.env_seeds, ctx.threads);
  recenv::write_environment_csv(stats.rows, ctx.out_dir + "/environments.csv");
  stats.pooled.notes.push_back(
      "per-environment rows written to environments.csv");
  out.reports["recurrence_mc"] = std::move(stats.pooled);
  return out;
}

// ---------------------------------------------------------------------------
// Output assembly
// ---------------------------------------------------------------------------

int verdict_rank(Verdict v) {
  switch (v) {
    case Verdict::kViolated: return 2;
    case Verdict::kInconclusive: return 1;
    case Verdict::kSatisfied: return 0;
  }
  return 1;
}

std::string utc_timestamp() {
  std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

int write_outputs(const std::string& command, const Context& ctx,
                  RunResult& result) {
  namespace fs = std::filesystem;
  fs::create_directories(ctx.out_dir);
  fs::create_directories(ctx.out_dir + "/curves");

  result.resolved["out_dir"] = ctx.out_dir;
  result.resolved["threads"] = ctx.threads;
  result.resolved["seeds"]["master"] = ctx.master_seed;
  if (!ctx.env_seeds.empty()) {
    result.resolved["seeds"]["environments"] = ctx.env_seeds;
  }

  json reports = json::object();
  int worst = 0;
  for (auto& [key, rep] : result.reports) {
    reports[key] = recenv::report_to_json(rep);
    worst = std::max(worst, verdict_rank(rep.verdict));
    for (const auto& curve : rep.curves) {
      recenv::write_curve_csv(
          curve, ctx.out_dir + "/curves/" + key + "." + curve.name + ".csv");
    }
  }

  json report = {{"command", command},
                 {"config", result.resolved},
                 {"reports", reports},
                 {"timestamp", utc_timestamp()},
                 {"version", kVersion}};
  std::ofstream file(ctx.out_dir + "/report.json");
  if (!file) throw ConfigError("cannot write to " + ctx.out_dir);
  file << report.dump(2) << "\n";

  // Exit contract: 0 all satisfied, 2 any violated, 3 any inconclusive.
  if (worst == 2) return 2;
  if (worst == 1) return 3;
  return 0;
}

json load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "recenv: numerical experiments on recurrence criteria for diffusions "
      "in random environments"};
  app.require_subcommand(1);

  struct Options {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<int> threads;
    std::optional<std::string> out_dir;
  } opt;

  const std::vector<std::pair<std::string, RunResult (*)(const Context&)>>
      commands = {{"kernel-check", run_kernel_check},
                  {"sample", run_sample},
                  {"conditions", run_conditions},
                  {"shell-integral", run_shell_integral},
                  {"lemma11", run_lemma11},
                  {"ergodic", run_ergodic},
                  {"simulate", run_simulate},
                  {"recurrence-mc", run_recurrence_mc}};

  for (const auto& [name, fn] : commands) {
    auto* sub = app.add_subcommand(name);
    sub->add_option("--config", opt.config_path, "JSON config file")
        ->required();
    sub->add_option("--seed", opt.seed, "override seeds.master");
    sub->add_option("--threads", opt.threads,
                    "worker threads (or RECENV_THREADS)");
    sub->add_option("--out", opt.out_dir, "override the output directory");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    CLI::App* sub = app.get_subcommands().front();
    const std::string command = sub->get_name();

    json cfg = load_config(opt.config_path);
    Section root{&cfg, ""};
    root.allow({"command", "out_dir", "threads", "kernel", "geometry",
                "sphere", "radial", "angular", "thresholds", "scaling",
                "t_grid", "grid", "field", "n_max", "shell_R", "trials",
                "sim", "seeds", "output"});
    const std::string cfg_command = root.str("command", command);
    if (cfg_command != command) {
      fail("command", "config says \"" + cfg_command +
                          "\" but the command line says \"" + command + "\"");
    }

    Section seeds = root.child("seeds");
    seeds.allow({"master", "environments"});

    Context ctx;
    ctx.root = root;
    ctx.master_seed = opt.seed.value_or(
        static_cast<std::uint64_t>(seeds.integer("master", 0)));
    if (seeds.find("environments") != nullptr) {
      ctx.env_seeds = seeds.seeds_list("environments");
    }
    ctx.out_dir = opt.out_dir.value_or(root.str("out_dir", "out"));
    std::filesystem::create_directories(ctx.out_dir);
    if (opt.threads) {
      ctx.threads = *opt.threads;
    } else if (const char* env = std::getenv("RECENV_THREADS")) {
      ctx.threads = std::max(1, std::atoi(env));
    } else {
      ctx.threads = static_cast<int>(root.integer("threads", 1));
    }

    RunResult result;
    for (const auto& [name, fn] : commands) {
      if (name == command) result = fn(ctx);
    }
    const int code = write_outputs(command, ctx, result);
    std::fprintf(stderr, "recenv %s: report written to %s/report.json\n",
                 command.c_str(), ctx.out_dir.c_str());
    return code;
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
