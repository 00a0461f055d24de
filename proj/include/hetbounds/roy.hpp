#pragma once

#include <cstdint>
#include <vector>

#include "hetbounds/data.hpp"
#include "hetbounds/scores.hpp"

namespace hb::roy {

// Generalized Roy model with treatment-dependent selection:
//   S = 1(X'gamma + D - v >= 0), Y(0) = eps0, Y(1) = mu1(X_1) + eps1,
//   (eps1, eps0, v) trivariate normal with cov(eps1, v) = rho_cov * sigma1.
struct RoyConfig {
  Eigen::Index n = 2000;
  int p = 10;
  double gamma1 = 0.0;  // 0 -> default Phi^{-1}(0.99) - 1; remaining gammas are 0
  double sigma1 = 0.2;
  double sigma0 = 0.2;
  double rho_cov = 0.5;
  double treat_prob = 0.5;
  std::uint64_t seed = 1;

  double gamma() const;
};

double mu1(double z);

data::ObservationTable simulate(const RoyConfig& config);

// P(S=1 | D=d, Z=z) = Phi(z*gamma + d)
double true_selection(const RoyConfig& config, int d, double z);
// s(0,z)/s(1,z); < 1 everywhere in this model
double true_p0(const RoyConfig& config, double z);
// Always-taker effect: mu1(z) - rho_cov*sigma1*phi(z*gamma)/Phi(z*gamma)
double true_theta(double z, const RoyConfig& config);
// u-quantile of Y | D=1, S=1, Z=z (root of the truncated bivariate cdf)
double true_quantile(const RoyConfig& config, double u, double z);

struct OracleBounds {
  std::vector<double> z;
  std::vector<double> lower;
  std::vector<double> upper;
};

// True nuisances evaluated at the sample, in the shape the score engine
// consumes. Quantiles are tabulated over the selection threshold and
// interpolated, which keeps n x |levels| evaluation cheap.
scores::NuisanceView analytic_nuisances(const RoyConfig& config,
                                        const data::ObservationTable& table,
                                        const std::vector<double>& levels);

// Brute-force trimmed conditional means: for each grid z, simulate draws in
// the z-stratum of width `stratum_width` and trim by the analytic p0.
OracleBounds oracle_bounds(const std::vector<double>& z_grid, const RoyConfig& config,
                           long long draws = 10'000'000, double stratum_width = 0.02,
                           std::uint64_t seed = 7151);

}  // namespace hb::roy
