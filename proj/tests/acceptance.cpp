// Acceptance gate: one pass/fail line per criterion, exit 0 only if all
// pass. Criteria 1-8 drive the library against closed-form and Monte Carlo
// oracles; criterion 9 runs the CLI binary (argv[1]) and byte-compares its
// reports. Tolerances are pinned here, not configurable.
//
// Usage: acceptance <path-to-recenv-binary> [workdir]

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "recenv/criteria.hpp"
#include "recenv/diffusion.hpp"
#include "recenv/field.hpp"
#include "recenv/geometry.hpp"
#include "recenv/kernels.hpp"
#include "recenv/linalg.hpp"
#include "recenv/rng.hpp"

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

std::string g_recenv;   // path to the CLI binary
std::string g_workdir;  // scratch directory for CLI runs

struct Problems {
  std::vector<std::string> items;

  template <typename... Args>
  void fail(const char* fmt, Args... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, fmt, args...);
    items.push_back(buf);
  }
  void expect(bool ok, const std::string& msg) {
    if (!ok) items.push_back(msg);
  }
};

// --------------------------------------------------------------------------
// 1. Kernel laws: symmetry and zero pinning exact, homogeneity to 1e-12.
// --------------------------------------------------------------------------
void criterion_kernel_laws(Problems& p) {
  recenv::PhiloxStream rng(17, recenv::StreamPurpose::kMcTrial);
  for (int d : {2, 3}) {
    std::vector<double> x(d), y(d), lx(d), ly(d), zero(d, 0.0);
    for (int hi = 1; hi <= 9; ++hi) {
      const double hurst = 0.1 * hi;
      auto kernel = recenv::CovarianceKernel::fractional_brownian(hurst, d);
      for (int trial = 0; trial < 1000; ++trial) {
        const double lambda = 0.25 + 4.0 * rng.next_uniform();
        for (int j = 0; j < d; ++j) {
          x[j] = 4.0 * rng.next_uniform() - 2.0;
          y[j] = 4.0 * rng.next_uniform() - 2.0;
          lx[j] = lambda * x[j];
          ly[j] = lambda * y[j];
        }
        const double k_xy = kernel.eval(x, y);
        if (k_xy != kernel.eval(y, x)) {
          p.fail("symmetry broken at H=%.1f d=%d", hurst, d);
          return;
        }
        if (kernel.eval(x, zero) != 0.0) {
          p.fail("zero pinning broken at H=%.1f d=%d", hurst, d);
          return;
        }
        const double scaled = std::pow(lambda, 2.0 * hurst) * k_xy;
        const double rel = std::abs(kernel.eval(lx, ly) - scaled) /
                           std::max(1.0, std::abs(scaled));
        if (rel > 1e-12) {
          p.fail("homogeneity off by %.3e at H=%.1f d=%d", rel, hurst, d);
          return;
        }
      }
    }
  }
}

// --------------------------------------------------------------------------
// 2. Angular integral: closed form at H=1/2, positivity on (1/2, 1), theta0.
// --------------------------------------------------------------------------
void criterion_angular(Problems& p) {
  const auto half = recenv::angular_kernel_integral(0.5, 2, 100000);
  const double want = 2.0 * std::numbers::pi - 4.0;
  if (std::abs(half.integral - want) > 1e-6) {
    p.fail("H=0.5 integral %.9f vs 2pi-4=%.9f", half.integral, want);
  }
  for (int i = 0; i <= 8; ++i) {
    const double hurst = 0.55 + 0.05 * i;
    const auto rep = recenv::angular_kernel_integral(hurst, 2, 20000);
    if (!rep.positive || rep.integral <= 0.0) {
      p.fail("integral not positive at H=%.2f (value %.6f)", hurst,
             rep.integral);
    }
  }
  const auto rep = recenv::angular_kernel_integral(0.75, 2, 1000);
  const double theta_want = std::acos(1.0 - std::cbrt(2.0));
  if (std::abs(rep.theta0 - theta_want) > 1e-10) {
    p.fail("theta0(0.75) = %.12f vs %.12f", rep.theta0, theta_want);
  }
}

// --------------------------------------------------------------------------
// 3. Covariance decay along the scaling flow, alpha = H. The curve value
//    must fall below 0.01 at the stated times and below the mean-value
//    bound 2^(-Ht-1) + H 2^((H-1)t) + 1e-3 from t = 10 on.
// --------------------------------------------------------------------------
void criterion_decay(Problems& p) {
  const auto domain = recenv::sphere_points(2, 64);
  auto run = [&](double hurst, double t_end, int count) {
    auto kernel = recenv::CovarianceKernel::fractional_brownian(hurst, 2);
    std::vector<double> t_grid(count);
    for (int i = 0; i < count; ++i) {
      t_grid[i] = t_end * static_cast<double>(i) / (count - 1);
    }
    auto rep = recenv::mixing_decay_curve(kernel, {hurst, 2.0}, domain,
                                          t_grid, 0.01);
    const auto& curve = rep.curves.at(0).points;
    const double final_value = curve.back()[1];
    if (!(final_value < 0.01)) {
      p.fail("H=%.1f t=%g value %.5f exceeds 0.01 (its 2^(-Ht-1) term alone "
             "is %.5f)",
             hurst, t_end, final_value, std::exp2(-hurst * t_end - 1.0));
    }
    for (const auto& pt : curve) {
      if (pt[0] < 10.0) continue;
      const double bound = std::exp2(-hurst * pt[0] - 1.0) +
                           hurst * std::exp2((hurst - 1.0) * pt[0]) + 1e-3;
      if (!(pt[1] <= bound)) {
        p.fail("H=%.1f t=%g value %.6f above bound %.6f", hurst, pt[0],
               pt[1], bound);
      }
    }
  };
  for (int hi = 1; hi <= 5; ++hi) run(0.1 * hi, 20.0, 21);
  for (int hi = 1; hi <= 9; ++hi) run(0.1 * hi, 100.0, 11);
}

// --------------------------------------------------------------------------
// 4. Shell integral against closed forms for flat and borderline fields.
// --------------------------------------------------------------------------
void criterion_shell_integral(Problems& p) {
  const double big_r = 100.0;
  const double pi = std::numbers::pi;
  auto value = [&](const recenv::Environment& env, int d) {
    return recenv::shell_integral(env, d, big_r, 4000, 512)
        .values.at("integral");
  };
  auto flat = [](std::span<const double>) { return 0.0; };
  auto borderline = [](std::span<const double> x) {
    double sq = 0.0;
    for (double c : x) sq += c * c;
    return 0.5 * std::log(sq);  // (d-2) log|x| in d = 3
  };

  const double flat2 = value(flat, 2);
  const double want2 = std::log(big_r) / (2.0 * pi);
  if (std::abs(flat2 - want2) > 1e-3) {
    p.fail("flat d=2: %.6f vs (log R)/(2pi)=%.6f", flat2, want2);
  }
  const double flat3 = value(flat, 3);
  const double want3 = (1.0 - 1.0 / big_r) / (4.0 * pi);
  if (std::abs(flat3 - want3) > 1e-3) {
    p.fail("flat d=3: %.6f vs (1-1/R)/(4pi)=%.6f", flat3, want3);
  }
  const double line3 = value(borderline, 3);
  const double want_line = std::log(big_r) / (4.0 * pi);
  if (std::abs(line3 - want_line) > 1e-3) {
    p.fail("borderline d=3: %.6f vs (log R)/(4pi)=%.6f", line3, want_line);
  }
}

// --------------------------------------------------------------------------
// 5. Sampler statistics: empirical covariance of 8 annulus points over 5000
//    draws stays inside the per-entry 4 sigma CLT band in >= 99 of 100
//    seeded repetitions.
// --------------------------------------------------------------------------
void criterion_sampler(Problems& p) {
  auto kernel = recenv::CovarianceKernel::fractional_brownian(0.5, 2);
  std::vector<double> pts;
  for (int k = 0; k < 8; ++k) {
    const double radius = 1.0 + static_cast<double>(k) / 7.0;
    const double angle = 2.0 * std::numbers::pi * k / 8.0 + 0.37;
    pts.push_back(radius * std::cos(angle));
    pts.push_back(radius * std::sin(angle));
  }
  const recenv::Matrix exact = recenv::covariance_matrix(kernel, pts);
  const int draws = 5000;

  int good = 0;
  for (int rep = 0; rep < 100; ++rep) {
    auto emp = recenv::empirical_covariance(kernel, pts, draws, 500 + rep);
    bool inside = true;
    for (std::size_t i = 0; i < 8 && inside; ++i) {
      for (std::size_t j = i; j < 8 && inside; ++j) {
        const double sigma =
            std::sqrt((exact.at(i, i) * exact.at(j, j) +
                       exact.at(i, j) * exact.at(i, j)) / draws);
        inside = std::abs(emp.covariance.at(i, j) - exact.at(i, j)) <=
                 4.0 * sigma;
      }
    }
    good += inside ? 1 : 0;
  }
  if (good < 99) p.fail("only %d/100 repetitions inside the 4 sigma band", good);
}

// --------------------------------------------------------------------------
// 6. Diffusion oracles in the flat environment: annulus hitting
//    probabilities, quadratic displacement, strict monotonicity of tau.
// --------------------------------------------------------------------------
void criterion_diffusion(Problems& p) {
  recenv::SimConfig hit;
  hit.step = 5e-4;
  hit.horizon = 300.0;
  hit.trials = 4000;
  hit.inner_radius = 1.0;
  hit.outer_radius = 10.0;
  hit.seed = 2026;

  hit.x0 = {3.0, 0.0};
  auto rep2 = recenv::hitting_stats(2, hit, 4);
  const double want2 = std::log(10.0 / 3.0) / std::log(10.0);
  if (!(rep2.values.at("ci_lo") <= want2 && want2 <= rep2.values.at("ci_hi"))) {
    p.fail("d=2 interval [%.4f, %.4f] misses %.4f",
           rep2.values.at("ci_lo"), rep2.values.at("ci_hi"), want2);
  }

  hit.x0 = {3.0, 0.0, 0.0};
  auto rep3 = recenv::hitting_stats(3, hit, 4);
  const double want3 = (1.0 / 3.0 - 1.0 / 10.0) / (1.0 - 1.0 / 10.0);
  if (!(rep3.values.at("ci_lo") <= want3 && want3 <= rep3.values.at("ci_hi"))) {
    p.fail("d=3 interval [%.4f, %.4f] misses %.4f",
           rep3.values.at("ci_lo"), rep3.values.at("ci_hi"), want3);
  }

  recenv::SimConfig walk;
  walk.step = 1e-3;
  walk.horizon = 1.0;
  walk.x0 = {0.0, 0.0};
  walk.seed = 99;
  double msd = 0.0;
  int monotone = 0;
  const int trials = 2000;
  for (int i = 0; i < trials; ++i) {
    auto path = recenv::simulate_Y(2, walk, 0, i);
    const auto last = path.point(path.size() - 1);
    msd += last[0] * last[0] + last[1] * last[1];
    auto tc = recenv::time_change(path);
    bool increasing = true;
    for (std::size_t k = 1; k < tc.tau.size(); ++k) {
      increasing = increasing && tc.tau[k] > tc.tau[k - 1];
    }
    monotone += increasing ? 1 : 0;
  }
  msd /= trials;
  if (std::abs(msd - 2.0) > 0.05 * 2.0) {
    p.fail("E|Y_T - x0|^2 = %.4f vs dT = 2 (5%% allowed)", msd);
  }
  if (monotone != trials) {
    p.fail("tau strictly increasing on %d/%d flat paths", monotone, trials);
  }

  // Same monotonicity through a sampled environment.
  auto kernel = recenv::CovarianceKernel::fractional_brownian(0.5, 2);
  recenv::RectGrid grid(2, 6.0, 13);
  auto field = recenv::sample_field(kernel, grid, 31);
  walk.x0 = {0.5, 0.0};
  for (int i = 0; i < 50; ++i) {
    auto path = recenv::simulate_Y(field, walk, 0, i);
    auto tc = recenv::time_change(path, field);
    for (std::size_t k = 1; k < tc.tau.size(); ++k) {
      if (!(tc.tau[k] > tc.tau[k - 1])) {
        p.fail("tau not strictly increasing on sampled-field path %d", i);
        return;
      }
    }
  }
}

// --------------------------------------------------------------------------
// 7. Eventual-positivity time: exactly 0 in d=2; the d=10 benchmark value
//    lands in (150, 200) and inside an independent coarse-scan bracket.
// --------------------------------------------------------------------------
void criterion_t0(Problems& p) {
  recenv::PhiloxStream rng(23, recenv::StreamPurpose::kMcTrial);
  for (int trial = 0; trial < 100; ++trial) {
    const double a = std::exp(std::log(1e-4) +
                              std::log(1e5) * rng.next_uniform());
    const double alpha = 0.01 + 0.99 * rng.next_uniform();
    const double t0 = recenv::t0_compute(a, alpha, 2);
    if (t0 != 0.0) {
      p.fail("d=2 t0(a=%.3g, alpha=%.3f) = %.3g, want exactly 0", a, alpha,
             t0);
      return;
    }
  }

  const double t0 = recenv::t0_compute(0.01, 0.1, 10);
  if (!(150.0 < t0 && t0 < 200.0)) {
    p.fail("d=10 t0 = %.4f outside (150, 200)", t0);
  }
  // Independent coarse scan for the last nonpositive point of
  // f(s) = 2^(alpha s) a + (2 - d) s log 2.
  double last_nonpositive = 0.0;
  for (double s = 0.0; s <= 1000.0; s += 0.5) {
    const double f = std::exp2(0.1 * s) * 0.01 - 8.0 * s * std::numbers::ln2;
    if (f <= 0.0) last_nonpositive = s;
  }
  if (!(last_nonpositive <= t0 && t0 <= last_nonpositive + 0.5)) {
    p.fail("d=10 t0 = %.4f outside scan bracket (%.1f, %.1f]", t0,
           last_nonpositive, last_nonpositive + 0.5);
  }
}

// --------------------------------------------------------------------------
// 8. Ergodic consistency: the time average of the indicator {M(t) > a}
//    over T=30, averaged across 200 environments, matches the Monte Carlo
//    estimate of P(inf W >= a) within 0.1.
// --------------------------------------------------------------------------
void criterion_ergodic(Problems& p) {
  auto kernel = recenv::CovarianceKernel::fractional_brownian(0.5, 2);
  const auto dirs = recenv::sphere_points(2, 32);
  std::vector<double> t_grid;
  for (double t = 0.0; t <= 30.0 + 1e-9; t += 0.5) t_grid.push_back(t);

  std::vector<double> points;
  for (double t : t_grid) {
    const double radius = std::exp2(t);
    for (std::size_t j = 0; j < dirs.size(); ++j) {
      for (double coord : dirs.point(j)) points.push_back(radius * coord);
    }
  }
  recenv::GaussianSampler sampler(kernel, points);

  double indicator_mean = 0.0;
  const int envs = 200;
  for (int e = 0; e < envs; ++e) {
    auto field = sampler.sample(3000 + e);
    auto series = recenv::scaled_infimum_process(field, 0.5, t_grid, 0.0);
    indicator_mean += series.time_average;
  }
  indicator_mean /= envs;

  auto mc = recenv::min_probability_mc(kernel, dirs, 0.0, 20000, 777);
  const double p_hat = mc.values.at("p_hat");
  if (std::abs(indicator_mean - p_hat) > 0.1) {
    p.fail("time average %.4f vs spatial probability %.4f (tolerance 0.1)",
           indicator_mean, p_hat);
  }
}

// --------------------------------------------------------------------------
// 9. CLI determinism and contract: identical config + seeds give
//    byte-identical reports (modulo timestamp) at thread counts 1 and 4;
//    results agree across thread counts; exit codes follow the contract.
// --------------------------------------------------------------------------
int run_cli(const std::string& args) {
  const std::string cmd =
      g_recenv + " " + args + " > /dev/null 2> /dev/null";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string drop_timestamp(std::string text) {
  const auto pos = text.find("\"timestamp\":");
  if (pos == std::string::npos) return text;
  const auto line_start = text.rfind('\n', pos);
  const auto line_end = text.find('\n', pos);
  text.erase(line_start, line_end - line_start);
  return text;
}

void criterion_determinism(Problems& p) {
  const std::string dir = g_workdir;
  std::ofstream(dir + "/rmc.json") << R"({
    "kernel": {"type": "zero", "dimension": 2},
    "grid": {"extent": 8.0, "nodes_per_axis": 9},
    "sim": {"step": 0.001, "horizon": 20.0, "x0": [2.0, 0.0], "trials": 50,
            "inner_radius": 0.5, "outer_radius": 6.0},
    "seeds": {"master": 1, "environments": [11, 22]}
  })";
  std::ofstream(dir + "/cond.json") << R"({
    "kernel": {"type": "fractional_brownian", "hurst": 0.5, "dimension": 2},
    "thresholds": {"epsilon": 1.0},
    "seeds": {"master": 3}
  })";
  std::ofstream(dir + "/violated.json") << R"({
    "kernel": {"type": "zero", "dimension": 2},
    "thresholds": {"epsilon": 1.0},
    "seeds": {"master": 3}
  })";
  std::ofstream(dir + "/bad.json") << R"({
    "kernel": {"type": "fractional_brownian", "hurst": "half", "dimension": 2}
  })";

  // Same command, same config, run twice per thread count.
  std::vector<std::string> snapshots;
  std::vector<std::string> env_tables;
  for (int threads : {1, 4}) {
    const std::string out = dir + "/rmc_t" + std::to_string(threads);
    for (int run = 0; run < 2; ++run) {
      const int code = run_cli("recurrence-mc --config " + dir +
                               "/rmc.json --threads " +
                               std::to_string(threads) + " --out " + out);
      p.expect(code == 0, "recurrence-mc exit " + std::to_string(code));
      snapshots.push_back(drop_timestamp(slurp(out + "/report.json")));
      env_tables.push_back(slurp(out + "/environments.csv"));
    }
  }
  p.expect(!snapshots[0].empty(), "empty report from recurrence-mc");
  p.expect(snapshots[0] == snapshots[1],
           "threads=1 reruns differ beyond the timestamp");
  p.expect(snapshots[2] == snapshots[3],
           "threads=4 reruns differ beyond the timestamp");
  p.expect(env_tables[0] == env_tables[2],
           "per-environment results differ between thread counts");
  const json j1 = json::parse(snapshots[0]);
  const json j4 = json::parse(snapshots[2]);
  p.expect(j1.at("reports") == j4.at("reports"),
           "report payloads differ between thread counts");

  // A second command for the same rerun property, plus its documented value.
  const std::string cond_out = dir + "/cond";
  int code = run_cli("conditions --config " + dir + "/cond.json --out " +
                     cond_out);
  p.expect(code == 0, "conditions exit " + std::to_string(code) +
                          ", expected 0 (all satisfied)");
  const std::string cond_a = drop_timestamp(slurp(cond_out + "/report.json"));
  run_cli("conditions --config " + dir + "/cond.json --out " + cond_out);
  const std::string cond_b = drop_timestamp(slurp(cond_out + "/report.json"));
  p.expect(!cond_a.empty() && cond_a == cond_b,
           "conditions reruns differ beyond the timestamp");
  const json cond = json::parse(cond_a);
  const double inf_value =
      cond.at("reports").at("condition_i_sphere").at("values").at("inf");
  p.expect(std::abs(inf_value - 2.28319) < 1e-3,
           "condition (i) value " + std::to_string(inf_value) +
               " not near 2.28319");

  // Exit-code contract: violated -> 2, error -> 1.
  code = run_cli("conditions --config " + dir + "/violated.json --out " +
                 dir + "/violated");
  p.expect(code == 2, "zero-kernel conditions exit " + std::to_string(code) +
                          ", expected 2 (violated)");
  code = run_cli("kernel-check --config " + dir + "/bad.json --out " + dir +
                 "/bad");
  p.expect(code == 1, "malformed config exit " + std::to_string(code) +
                          ", expected 1");
  std::ofstream(dir + "/typo.json") << R"({
    "kernel": {"type": "zero", "dimension": 2}, "trails": 10
  })";
  code = run_cli("kernel-check --config " + dir + "/typo.json --out " + dir +
                 "/typo");
  p.expect(code == 1, "unknown-key config exit " + std::to_string(code) +
                          ", expected 1");
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) {
    std::fprintf(stderr, "usage: acceptance <recenv-binary> [workdir]\n");
    return 2;
  }
  g_recenv = argv[1];
  g_workdir = argc > 2 ? argv[2] : "acceptance_work";
  fs::create_directories(g_workdir);

  struct Criterion {
    const char* label;
    double limit_s;  // 0 = no limit
    std::function<void(Problems&)> body;
  };
  const std::vector<Criterion> criteria = {
      {"kernel laws", 1.0, criterion_kernel_laws},
      {"angular integral", 1.0, criterion_angular},
      {"covariance decay", 5.0, criterion_decay},
      {"shell integral", 5.0, criterion_shell_integral},
      {"sampler covariance", 60.0, criterion_sampler},
      {"diffusion oracles", 600.0, criterion_diffusion},
      {"eventual positivity time", 1.0, criterion_t0},
      {"ergodic consistency", 600.0, criterion_ergodic},
      {"determinism", 0.0, criterion_determinism},
  };

  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto& c = criteria[i];
    Problems problems;
    const auto start = std::chrono::steady_clock::now();
    try {
      c.body(problems);
    } catch (const std::exception& e) {
      problems.items.push_back(std::string("exception: ") + e.what());
    }
    const double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                      start)
            .count();
    if (c.limit_s > 0.0 && elapsed > c.limit_s) {
      problems.fail("runtime %.2f s exceeds limit %.0f s", elapsed,
                    c.limit_s);
    }
    if (problems.items.empty()) {
      std::printf("[%zu/9] %-26s PASS  (%.2f s)\n", i + 1, c.label, elapsed);
    } else {
      ++failures;
      std::string joined;
      for (const auto& item : problems.items) {
        if (!joined.empty()) joined += "; ";
        joined += item;
      }
      std::printf("[%zu/9] %-26s FAIL  (%.2f s): %s\n", i + 1, c.label,
                  elapsed, joined.c_str());
    }
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
