#include "hetbounds/pointwise.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "hetbounds/error.hpp"
#include "hetbounds/math.hpp"

namespace hb::pointwise {

using hb::math::norm_cdf;
using hb::math::norm_quantile;

namespace {
const char* kModule = "pointwise_inference";

// Standard normal pairs shared by every evaluation; the Cholesky map to
// correlation rho happens per point at evaluation time.
const std::vector<double>& qmc_points(int log2_points) {
  static std::mutex m;
  static std::map<int, std::vector<double>> cache;
  std::lock_guard<std::mutex> lock(m);
  auto it = cache.find(log2_points);
  if (it != cache.end()) return it->second;
  const std::size_t n = 1ull << log2_points;
  std::vector<double> pts(2 * n);
  hb::math::Sobol2D sobol;
  for (std::size_t i = 0; i < n; ++i) {
    double u0, u1;
    sobol.next(u0, u1);
    pts[2 * i] = norm_quantile(u0);
    pts[2 * i + 1] = norm_quantile(u1);
  }
  return cache.emplace(log2_points, std::move(pts)).first->second;
}

struct EventParams {
  double c;
  double rho;
  double radius;      // sqrt(2(1+rho)) * z_{1-alpha/2}
  bool symmetric;     // second comparison 0 <= u2 + c vs 0 <= u2
};

double qmc_prob(const EventParams& ev, double delta, int log2_points) {
  const auto& pts = qmc_points(log2_points);
  const std::size_t n = pts.size() / 2;
  const double cr = std::sqrt(1.0 - ev.rho * ev.rho);
  const double u2_floor = ev.symmetric ? -ev.c : 0.0;
  std::size_t hit = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double u1 = pts[2 * i];
    const double u2 = ev.rho * u1 + cr * pts[2 * i + 1];
    const bool a = (u1 - delta - ev.c <= 0.0) && (u2 >= u2_floor);
    if (a || std::fabs(u1 + u2 - delta) <= ev.radius) ++hit;
  }
  return static_cast<double>(hit) / static_cast<double>(n);
}

// Recursive adaptive Simpson; handles the sharp conditional-density ridge
// the A-and-B integrand develops as |rho| -> 1.
double adaptive_simpson(const std::function<double(double)>& f, double a, double b, double fa,
                        double fm, double fb, double whole, double tol, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m);
  const double rm = 0.5 * (m + b);
  const double flm = f(lm);
  const double frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  if (depth <= 0 || std::fabs(left + right - whole) < 15.0 * tol) {
    return left + right + (left + right - whole) / 15.0;
  }
  return adaptive_simpson(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
         adaptive_simpson(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

double integrate(const std::function<double(double)>& f, double a, double b, double tol) {
  if (!(b > a)) return 0.0;
  const double m = 0.5 * (a + b);
  const double fa = f(a), fm = f(m), fb = f(b);
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  return adaptive_simpson(f, a, b, fa, fm, fb, whole, tol, 28);
}

// Closed-form route: P(A) from the bivariate normal cdf, P(B) univariate,
// P(A and B) by adaptive quadrature over u1 with the conditional normal in
// u2, split at the integrand's kinks.
double closed_form_prob(const EventParams& ev, double delta) {
  const double a_hi = delta + ev.c;               // u1 <= a_hi
  const double b_lo = ev.symmetric ? -ev.c : 0.0; // u2 >= b_lo
  const double s = std::sqrt(2.0 * (1.0 + ev.rho));
  const double pa = norm_cdf(a_hi) - hb::math::bvn_cdf(a_hi, b_lo, ev.rho);
  const double pb = norm_cdf((delta + ev.radius) / s) - norm_cdf((delta - ev.radius) / s);
  const double cr = std::sqrt(std::max(1.0 - ev.rho * ev.rho, 1e-12));
  auto integrand = [&](double u1) {
    const double lb = std::max(b_lo, delta - ev.radius - u1);
    const double ub = delta + ev.radius - u1;
    if (ub <= lb) return 0.0;
    const double m = ev.rho * u1;
    const double cond = norm_cdf((ub - m) / cr) - norm_cdf((lb - m) / cr);
    return hb::math::norm_pdf(u1) * cond;
  };
  // integrand vanishes above k2 (band fully below the u2 floor) and has a
  // derivative kink at k1 (floor becomes binding)
  const double k1 = delta - ev.radius - b_lo;
  const double k2 = delta + ev.radius - b_lo;
  const double lo = -9.0;
  const double hi = std::min(a_hi, k2);
  double pab = 0.0;
  if (hi > lo) {
    const double split = std::clamp(k1, lo, hi);
    pab = integrate(integrand, lo, split, 1e-10) + integrate(integrand, split, hi, 1e-10);
  }
  return pa + pb - pab;
}

double eval_prob(const EventParams& ev, double delta, const CoverageConfig& config) {
  return config.evaluator == ProbEvaluator::kQmc ? qmc_prob(ev, delta, config.qmc_log2_points)
                                                 : closed_form_prob(ev, delta);
}

// One QMC pass evaluating the event probability on a whole Delta grid via a
// difference array: per point, the event holds on a union of at most two
// Delta intervals (a ray from the A side and a band from the B side).
void qmc_prob_grid(const EventParams& ev, const std::vector<double>& deltas,
                   std::vector<double>& probs, int log2_points) {
  const auto& pts = qmc_points(log2_points);
  const std::size_t n = pts.size() / 2;
  const std::size_t g = deltas.size();
  const double step = g > 1 ? deltas[1] - deltas[0] : 1.0;
  const double cr = std::sqrt(1.0 - ev.rho * ev.rho);
  const double u2_floor = ev.symmetric ? -ev.c : 0.0;
  std::vector<long long> diff(g + 1, 0);
  auto add_range = [&](double lo, double hi) {
    // indices j with deltas[j] in [lo, hi]
    long long jlo = lo <= deltas.front() ? 0
                                         : static_cast<long long>(std::ceil((lo - deltas.front()) / step - 1e-12));
    long long jhi = hi >= deltas.back()
                        ? static_cast<long long>(g) - 1
                        : static_cast<long long>(std::floor((hi - deltas.front()) / step + 1e-12));
    jlo = std::max<long long>(jlo, 0);
    jhi = std::min<long long>(jhi, static_cast<long long>(g) - 1);
    if (jlo > jhi) return;
    diff[static_cast<std::size_t>(jlo)] += 1;
    diff[static_cast<std::size_t>(jhi) + 1] -= 1;
  };
  const double dmax = deltas.back();
  for (std::size_t i = 0; i < n; ++i) {
    const double u1 = pts[2 * i];
    const double u2 = ev.rho * u1 + cr * pts[2 * i + 1];
    const double v = u1 + u2;
    const double band_lo = v - ev.radius;
    const double band_hi = v + ev.radius;
    if (u2 >= u2_floor) {
      const double ray_lo = u1 - ev.c;  // A holds for Delta >= ray_lo
      if (band_hi >= ray_lo && band_lo <= dmax) {
        add_range(std::min(band_lo, ray_lo), dmax);
      } else {
        add_range(ray_lo, dmax);
        add_range(band_lo, band_hi);
      }
    } else {
      add_range(band_lo, band_hi);
    }
  }
  probs.assign(g, 0.0);
  long long run = 0;
  for (std::size_t j = 0; j < g; ++j) {
    run += diff[j];
    probs[j] = static_cast<double>(run) / static_cast<double>(n);
  }
}

struct InnerInf {
  double value;
  double argmin;
};

InnerInf inf_over_delta(const EventParams& ev, double alpha, const CoverageConfig& config) {
  const double z2 = norm_quantile(1.0 - alpha / 2.0);
  const double delta_max = 2.0 * (z2 + ev.c) * (1.0 + std::sqrt(2.0 * (1.0 + ev.rho)));
  const int grid_n = 64;
  std::vector<double> deltas(grid_n);
  for (int j = 0; j < grid_n; ++j) deltas[static_cast<std::size_t>(j)] = delta_max * j / (grid_n - 1);
  std::vector<double> probs(grid_n);
  if (config.evaluator == ProbEvaluator::kQmc) {
    qmc_prob_grid(ev, deltas, probs, config.qmc_log2_points);
  } else {
    for (int j = 0; j < grid_n; ++j) {
      probs[static_cast<std::size_t>(j)] = closed_form_prob(ev, deltas[static_cast<std::size_t>(j)]);
    }
  }
  int best = 0;
  for (int j = 1; j < grid_n; ++j) {
    if (probs[static_cast<std::size_t>(j)] < probs[static_cast<std::size_t>(best)]) best = j;
  }
  // golden-section refinement around the best grid cell
  double lo = deltas[static_cast<std::size_t>(std::max(0, best - 1))];
  double hi = deltas[static_cast<std::size_t>(std::min(grid_n - 1, best + 1))];
  const double gr = 0.6180339887498949;
  double x1 = hi - gr * (hi - lo);
  double x2 = lo + gr * (hi - lo);
  double f1 = eval_prob(ev, x1, config);
  double f2 = eval_prob(ev, x2, config);
  // P is locally quadratic in Delta, so 5e-3 argument precision puts the
  // value error well under the outer bisection tolerance
  for (int it = 0; it < 24 && (hi - lo) > 5e-3; ++it) {
    if (f1 <= f2) {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - gr * (hi - lo);
      f1 = eval_prob(ev, x1, config);
    } else {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + gr * (hi - lo);
      f2 = eval_prob(ev, x2, config);
    }
  }
  InnerInf out;
  out.argmin = 0.5 * (lo + hi);
  out.value = std::min({probs[static_cast<std::size_t>(best)], f1, f2});
  return out;
}

}  // namespace

PseudoTrue pseudo_true(double theta_L, double theta_U, double sigma_L, double sigma_U,
                       double rho) {
  if (!(sigma_L > 0.0) || !(sigma_U > 0.0)) {
    throw Error(kModule, "pseudo_true requires positive sigmas");
  }
  PseudoTrue out;
  out.theta_star = (sigma_U * theta_L + sigma_L * theta_U) / (sigma_L + sigma_U);
  out.sigma_star = sigma_L * sigma_U * std::sqrt(2.0 * (1.0 + rho)) / (sigma_L + sigma_U);
  return out;
}

double coverage_prob(double c, double delta, double rho, double alpha,
                     const CoverageConfig& config) {
  if (!(std::fabs(rho) < 1.0)) throw Error(kModule, "|rho| >= 1 in coverage_prob");
  if (delta < 0.0) throw Error(kModule, "delta must be >= 0");
  EventParams ev;
  ev.c = c;
  ev.rho = rho;
  ev.radius = std::sqrt(2.0 * (1.0 + rho)) * norm_quantile(1.0 - alpha / 2.0);
  ev.symmetric = config.event == EventForm::kSymmetric;
  return eval_prob(ev, delta, config);
}

CriticalValue critical_value(double rho, double alpha, const CoverageConfig& config_in) {
  if (!(std::fabs(rho) < 1.0)) throw Error(kModule, "|rho| >= 1 in critical_value");
  if (!(alpha > 0.0 && alpha < 0.5)) throw Error(kModule, "alpha outside (0, 0.5)");
  CoverageConfig config = config_in;
  config.evaluator = config_in.solver_evaluator;
  const double target = 1.0 - alpha;
  const double c_lo = norm_quantile(1.0 - alpha);
  const double c_hi = norm_quantile(1.0 - alpha / 2.0);
  EventParams ev;
  ev.rho = rho;
  ev.radius = std::sqrt(2.0 * (1.0 + rho)) * norm_quantile(1.0 - alpha / 2.0);
  ev.symmetric = config.event == EventForm::kSymmetric;

  CriticalValue out;
  out.alpha = alpha;
  out.rho = rho;

  ev.c = c_hi;
  InnerInf at_hi = inf_over_delta(ev, alpha, config);
  const double kernel_tol = 2e-3;
  if (at_hi.value < target - kernel_tol) {
    throw Error(kModule, "f(z_{1-alpha/2}) = " + std::to_string(at_hi.value) +
                             " < 1-alpha; probability kernel inconsistent");
  }
  double lo = c_lo, hi = c_hi;
  double f_hi = at_hi.value;
  double argmin = at_hi.argmin;
  ev.c = c_lo;
  InnerInf at_lo = inf_over_delta(ev, alpha, config);
  int iters = 2;
  if (at_lo.value >= target) {
    out.c_hat = c_lo;
    out.argmin_delta = at_lo.argmin;
    out.iterations = iters;
    out.achieved_tolerance = at_lo.value - target;
    return out;
  }
  while (hi - lo > 1e-3) {
    const double mid = 0.5 * (lo + hi);
    ev.c = mid;
    InnerInf at_mid = inf_over_delta(ev, alpha, config);
    ++iters;
    if (at_mid.value >= target) {
      hi = mid;
      f_hi = at_mid.value;
      argmin = at_mid.argmin;
    } else {
      lo = mid;
    }
  }
  out.c_hat = hi;
  out.iterations = iters;
  out.achieved_tolerance = f_hi - target;
  out.argmin_delta = argmin;
  return out;
}

CriticalValueTable::CriticalValueTable(double alpha, CoverageConfig config)
    : alpha_(alpha), config_(config) {}

double CriticalValueTable::node_value(int idx) {
  {
    std::lock_guard<std::mutex> lock(mutex_);
    auto it = nodes_.find(idx);
    if (it != nodes_.end()) return it->second;
  }
  double rho = std::clamp(idx * 0.01, -0.9999, 0.9999);
  double value = critical_value(rho, alpha_, config_).c_hat;
  std::lock_guard<std::mutex> lock(mutex_);
  nodes_[idx] = value;
  return value;
}

double CriticalValueTable::lookup(double rho) {
  rho = std::clamp(rho, -0.9999, 0.9999);
  const double pos = rho / 0.01;
  const int lo = static_cast<int>(std::floor(pos));
  const int hi = lo + 1;
  const double w = pos - lo;
  if (w < 1e-12) return node_value(lo);
  return (1.0 - w) * node_value(lo) + w * node_value(hi);
}

Interval confidence_interval(double theta_L, double theta_U, double sigma_L, double sigma_U,
                             double rho, double n, double alpha, double c_hat) {
  const double root_n = std::sqrt(n);
  Interval bounds_piece{theta_L - sigma_L * c_hat / root_n, theta_U + sigma_U * c_hat / root_n};
  PseudoTrue ps = pseudo_true(theta_L, theta_U, std::max(sigma_L, 1e-300),
                              std::max(sigma_U, 1e-300), rho);
  const double z2 = norm_quantile(1.0 - alpha / 2.0);
  Interval star_piece{ps.theta_star - ps.sigma_star * z2 / root_n,
                      ps.theta_star + ps.sigma_star * z2 / root_n};
  return Interval{std::min(bounds_piece.lo, star_piece.lo),
                  std::max(bounds_piece.hi, star_piece.hi)};
}

}  // namespace hb::pointwise
