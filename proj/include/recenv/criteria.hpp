#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "recenv/field.hpp"
#include "recenv/geometry.hpp"
#include "recenv/kernels.hpp"

// Numeric evaluation of the recurrence criteria: kernel-integral lower
// bounds over shells and spheres, angular integrals of the fractional
// kernel, covariance-decay curves of the rescaling family, the shell
// integral I(R) whose divergence characterizes recurrence, shell-infimum
// occurrence counts, the eventual-positivity time t0, the scaled infimum
// process M(t), and Monte Carlo estimates of infimum probabilities.
//
// Every operation returns a CriterionReport (or a small result struct) that
// echoes its inputs, carries the computed scalars and curves, and grades the
// outcome as satisfied / violated / inconclusive. "Violated" is only claimed
// when the value misses its threshold by more than 3x the numerical-error
// estimate; anything closer is inconclusive.

namespace recenv {

struct CriterionThresholds {
  double a = 0.0;        // infimum level
  double epsilon = 1.0;  // kernel-integral level, must be > 0
  double c = 0.0;        // shell-criterion slack
};

enum class Verdict { kViolated = 0, kInconclusive = 1, kSatisfied = 2 };

const char* verdict_name(Verdict v);

// Three-way comparison of value >= threshold with error awareness: pass is
// satisfied; a miss larger than 3x the error estimate is violated; a miss
// within error bars is inconclusive. Monotone in the threshold.
Verdict classify_lower_bound(double value, double threshold, double error);

struct Curve {
  std::string name;
  std::vector<std::array<double, 2>> points;  // (abscissa, value) pairs
};

struct CriterionReport {
  std::string name;
  nlohmann::json inputs = nlohmann::json::object();
  std::map<std::string, double> values;
  std::vector<Curve> curves;
  Verdict verdict = Verdict::kInconclusive;
  std::map<std::string, double> error_estimates;
  std::vector<std::string> notes;
};

// JSON form: {name, inputs, values, curves: {name: [[t,v],...]}, verdict,
// error_estimates, notes}. Keys are emitted sorted, so output is stable.
nlohmann::json report_to_json(const CriterionReport& report);

// Two-column CSV (abscissa named by the curve, then "value").
void write_curve_csv(const Curve& curve, const std::string& path);

// A1(x) = sum_j w_j K(x, y_j) at every node x of the domain, the quadrature
// form of the mean-shift integral. The condition (i) checks take their
// infimum from exactly this computation, bit for bit.
std::vector<double> mean_shift_profile(const CovarianceKernel& kernel,
                                       const WeightedPointSet& domain);

// Condition (i) over the first shell D_1: inf_x of the quadrature integral
// g(x) = int_{D_1} K(x,y) dy, compared against epsilon. The error estimate
// is the shift of the infimum under a halved quadrature budget.
CriterionReport condition_i_shell(const CovarianceKernel& kernel,
                                  const ShellGeometry& geom, int resolution,
                                  double epsilon, std::uint64_t seed = 0);

// Condition (i) over the unit sphere.
CriterionReport condition_i_sphere(const CovarianceKernel& kernel, int d,
                                   int resolution, double epsilon,
                                   std::uint64_t seed = 0);

struct AngularIntegralReport {
  double hurst = 0.0;
  int dimension = 0;
  double theta0 = 0.0;    // in [0, pi]; pi when H <= 1/2
  double integral = 0.0;  // int_{-pi}^{pi} K(e1, v_theta) dtheta
  bool positive = false;
};

// Angular integral of the fractional kernel between e1 and the rotated unit
// vector v_theta, plus the sign-change angle theta0 with
// cos(theta0) = 1 - 2^{1/H - 1} for H > 1/2. resolution counts trapezoid
// subintervals on [0, pi].
AngularIntegralReport angular_kernel_integral(double hurst, int d,
                                              int resolution);

// Covariance-decay curve of the rescaling family: for each t in t_grid,
//   v(t) = base^{-alpha t} * sup_{x,y in domain} K(base^t x, y).
// Satisfied iff the final value is below tail_tol and the last three values
// are nonincreasing. The fractional kernel is evaluated in a cancellation-
// free form, so the curve stays accurate for large t.
CriterionReport mixing_decay_curve(const CovarianceKernel& kernel,
                                   const ScalingSpec& scaling,
                                   const WeightedPointSet& domain,
                                   const std::vector<double>& t_grid,
                                   double tail_tol = 0.01);

// Environment callable: W at a point. Wraps closed forms or interpolate.
using Environment = std::function<double(std::span<const double>)>;

// The recurrence integral
//   I(R) = int_1^R [ int_{S^{d-1}} e^{-W(s theta)} dtheta ]^{-1} s^{-d+1} ds
// by nested quadrature; the inner integral is computed by log-sum-exp so
// large |W| cannot overflow. The curve holds the running value I(R') on the
// log-spaced radial grid. Divergence as R grows signals recurrence, but a
// finite R cannot certify it, so the verdict is always inconclusive; the
// final value, the curve, and the final slope d I / d log R are reported.
CriterionReport shell_integral(const Environment& environment, int d, double R,
                               int radial_resolution, int sphere_resolution);

// Occurrence set of the shell-infimum criterion: for each n <= n_max,
// checks inf over the field's nodes in shell D_n of W against
// n (d-2) log r - c. Nodes are assigned to shells by their norm (family
// picks the Euclidean or max norm); every shell must contain at least one
// node. Satisfied iff occurrences persist into the last quarter of shells;
// a finite node set can never prove the infimum condition fails forever,
// so the verdict is never violated.
CriterionReport lemma11_occurrences(const FieldSample& field,
                                    ShellFamily family, double r, int d,
                                    double c, int n_max);

// Smallest t >= 0 with f(s) = 2^{alpha s} a + (2-d) s log 2 > 0 for all
// s >= t. f is strictly convex, so a scan (step 1e-3, horizon 1e4) for the
// last sign change plus bisection pins the answer; d = 2 returns exactly 0.
// Throws NumericalError when positivity is not reached within the horizon.
double t0_compute(double a, double alpha, int d);

struct ScaledInfimumSeries {
  std::vector<double> t_grid;
  std::vector<double> m_values;  // M(t) = inf over directions of 2^{-alpha t} W(2^t theta)
  double time_average = 0.0;     // trapezoid average of 1_{(a, inf)}(M(t))
  double t0 = 0.0;               // eventual-positivity time for (a, alpha, d)
};

// Scaled infimum process of a field sampled on radii 2^t times a shared set
// of directions. Field nodes are matched to each radius by their norm
// (relative tolerance 1e-9); a radius with no nodes is an argument error.
ScaledInfimumSeries scaled_infimum_process(const FieldSample& field,
                                           double alpha,
                                           const std::vector<double>& t_grid,
                                           double a);

// Monte Carlo estimate of P(inf over domain nodes of W >= a) with a 95%
// Wilson interval. Positivity below Monte Carlo resolution is reported as
// inconclusive, never violated.
CriterionReport min_probability_mc(const CovarianceKernel& kernel,
                                   const WeightedPointSet& domain, double a,
                                   int trials, std::uint64_t seed);

}  // namespace recenv
