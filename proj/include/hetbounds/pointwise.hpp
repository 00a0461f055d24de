#pragma once

#include <map>
#include <mutex>
#include <vector>

namespace hb::pointwise {

struct PseudoTrue {
  double theta_star = 0.0;
  double sigma_star = 0.0;
};

// theta* = (sigma_U theta_L + sigma_L theta_U)/(sigma_L + sigma_U),
// sigma* = sigma_L sigma_U sqrt(2(1+rho))/(sigma_L + sigma_U)
PseudoTrue pseudo_true(double theta_L, double theta_U, double sigma_L, double sigma_U,
                       double rho);

enum class ProbEvaluator { kQmc, kClosedForm };
// Default event relaxes the second comparison to 0 <= u2 + c, which
// reproduces the two-sided limit at rho -> 1; the verbatim printed event
// (0 <= u2) is available for comparison.
enum class EventForm { kSymmetric, kVerbatim };

struct CoverageConfig {
  ProbEvaluator evaluator = ProbEvaluator::kQmc;
  // The critical-value solver needs probabilities sharper than the QMC
  // kernel's ~5e-4: the inf-over-Delta dip it inverts is quadratically
  // shallow near |rho| -> 1, so the solver defaults to the deterministic
  // quadrature kernel.
  ProbEvaluator solver_evaluator = ProbEvaluator::kClosedForm;
  EventForm event = EventForm::kSymmetric;
  int qmc_log2_points = 20;
};

// P(u1 - Delta - c <= 0 <= u2 + c  or  |u1 + u2 - Delta| <= sqrt(2(1+rho)) z_{1-a/2})
// under (u1,u2) bivariate normal, unit variances, correlation rho.
double coverage_prob(double c, double delta, double rho, double alpha,
                     const CoverageConfig& config = {});

struct CriticalValue {
  double c_hat = 0.0;
  double alpha = 0.0;
  double rho = 0.0;
  int iterations = 0;
  double achieved_tolerance = 0.0;
  double argmin_delta = 0.0;
};

// Solves inf_{Delta >= 0} coverage_prob = 1 - alpha by bisection in c over
// [z_{1-alpha}, z_{1-alpha/2}]; the inner infimum uses a 64-point grid plus
// golden-section refinement over [0, Delta_max].
CriticalValue critical_value(double rho, double alpha, const CoverageConfig& config = {});

// Memoized solver on a rho lattice (step 0.01) with linear interpolation.
class CriticalValueTable {
 public:
  explicit CriticalValueTable(double alpha, CoverageConfig config = {});
  double lookup(double rho);

 private:
  double node_value(int idx);
  double alpha_;
  CoverageConfig config_;
  std::map<int, double> nodes_;
  std::mutex mutex_;
};

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

// Eq.-13-style union interval, returned as the hull of the two pieces; never
// empty even when the bound estimates are reversed.
Interval confidence_interval(double theta_L, double theta_U, double sigma_L, double sigma_U,
                             double rho, double n, double alpha, double c_hat);

}  // namespace hb::pointwise
