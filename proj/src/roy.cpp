#include "hetbounds/roy.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>
#include <numeric>

#include "hetbounds/error.hpp"
#include "hetbounds/math.hpp"

namespace hb::roy {

using hb::math::norm_cdf;
using hb::math::norm_pdf;
using hb::math::norm_quantile;

double RoyConfig::gamma() const {
  return gamma1 != 0.0 ? gamma1 : norm_quantile(0.99) - 1.0;
}

double mu1(double z) { return 0.35 - 4.0 * z * z + 4.0 * z * z * z; }

data::ObservationTable simulate(const RoyConfig& config) {
  if (config.n < 1 || config.p < 1) throw Error("roy_simulator", "invalid n or p");
  const double g = config.gamma();
  const double rho = config.rho_cov;
  data::ObservationTable t;
  t.x.resize(config.n, config.p);
  t.d_treat.resize(config.n);
  t.s_select.resize(config.n);
  t.y_obs.resize(config.n);
  t.propensity = Eigen::VectorXd::Constant(config.n, config.treat_prob);
  t.column_names.resize(static_cast<std::size_t>(config.p));
  for (int j = 0; j < config.p; ++j) {
    t.column_names[static_cast<std::size_t>(j)] = "x" + std::to_string(j + 1);
  }
  hb::math::Rng rng(config.seed, /*stream=*/0x307);
  for (Eigen::Index i = 0; i < config.n; ++i) {
    for (int j = 0; j < config.p; ++j) t.x(i, j) = rng.uniform();
    const int d = rng.uniform() < config.treat_prob ? 1 : 0;
    const double v = rng.normal();
    const double eps1 = config.sigma1 * (rho * v + std::sqrt(1.0 - rho * rho) * rng.normal());
    const double eps0 = config.sigma0 * rng.normal();
    const int s = (t.x(i, 0) * g + d - v >= 0.0) ? 1 : 0;
    t.d_treat[i] = d;
    t.s_select[i] = s;
    if (s == 1) {
      t.y_obs[i] = d == 1 ? mu1(t.x(i, 0)) + eps1 : eps0;
    } else {
      t.y_obs[i] = std::numeric_limits<double>::quiet_NaN();
    }
  }
  return t;
}

double true_selection(const RoyConfig& config, int d, double z) {
  return norm_cdf(z * config.gamma() + d);
}

double true_p0(const RoyConfig& config, double z) {
  return true_selection(config, 0, z) / true_selection(config, 1, z);
}

double true_theta(double z, const RoyConfig& config) {
  const double a = z * config.gamma();
  return mu1(z) - config.rho_cov * config.sigma1 * norm_pdf(a) / norm_cdf(a);
}

double true_quantile(const RoyConfig& config, double u, double z) {
  if (!(u > 0.0 && u < 1.0)) throw Error("roy_simulator", "quantile level outside (0,1)");
  const double a = z * config.gamma() + 1.0;  // treated selection threshold
  const double pa = norm_cdf(a);
  const double rho = config.rho_cov;
  // F(t) = P(eps1/sigma1 <= t, v <= a) / Phi(a), quantile by bisection
  auto cdf = [&](double t) { return hb::math::bvn_cdf(t, a, rho) / pa; };
  double lo = -9.0, hi = 9.0;
  for (int it = 0; it < 200; ++it) {
    double mid = 0.5 * (lo + hi);
    if (cdf(mid) < u) {
      lo = mid;
    } else {
      hi = mid;
    }
    if (hi - lo < 1e-12) break;
  }
  return mu1(z) + config.sigma1 * 0.5 * (lo + hi);
}

scores::NuisanceView analytic_nuisances(const RoyConfig& config,
                                        const data::ObservationTable& table,
                                        const std::vector<double>& levels) {
  const Eigen::Index n = table.n();
  const double g = config.gamma();
  const double rho = config.rho_cov;
  scores::NuisanceView v;
  v.levels = levels;
  v.s0.resize(n);
  v.s1.resize(n);
  v.q.resize(n, static_cast<Eigen::Index>(levels.size()));

  // standardized quantile t(u, a) of eps1/sigma1 | v <= a on an a-grid
  const double a_lo = 1.0, a_hi = g + 1.0;
  const int na = 201;
  Eigen::MatrixXd tab(na, static_cast<Eigen::Index>(levels.size()));
  for (int ai = 0; ai < na; ++ai) {
    const double a = a_lo + (a_hi - a_lo) * ai / (na - 1);
    const double pa = norm_cdf(a);
    for (std::size_t k = 0; k < levels.size(); ++k) {
      const double u = levels[k];
      double lo = -9.0, hi = 9.0;
      for (int it = 0; it < 60; ++it) {
        double mid = 0.5 * (lo + hi);
        if (hb::math::bvn_cdf(mid, a, rho) / pa < u) {
          lo = mid;
        } else {
          hi = mid;
        }
      }
      tab(ai, static_cast<Eigen::Index>(k)) = 0.5 * (lo + hi);
    }
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    const double z = table.x(i, 0);
    v.s0[i] = norm_cdf(z * g);
    v.s1[i] = norm_cdf(z * g + 1.0);
    const double a = std::clamp(z * g + 1.0, a_lo, a_hi);
    const double pos = (a - a_lo) / (a_hi - a_lo) * (na - 1);
    const auto i0 = static_cast<int>(std::min(static_cast<double>(na - 2), std::floor(pos)));
    const double w = pos - i0;
    const double m = mu1(z);
    for (std::size_t k = 0; k < levels.size(); ++k) {
      const double t = (1.0 - w) * tab(i0, static_cast<Eigen::Index>(k)) +
                       w * tab(i0 + 1, static_cast<Eigen::Index>(k));
      v.q(i, static_cast<Eigen::Index>(k)) = m + config.sigma1 * t;
    }
  }
  return v;
}

OracleBounds oracle_bounds(const std::vector<double>& z_grid, const RoyConfig& config,
                           long long draws, double stratum_width, std::uint64_t seed) {
  if (z_grid.empty()) throw Error("roy_simulator", "empty z grid");
  const double g = config.gamma();
  const double rho = config.rho_cov;
  OracleBounds out;
  out.z = z_grid;
  out.lower.resize(z_grid.size());
  out.upper.resize(z_grid.size());
  const long long per_stratum = std::max<long long>(draws / static_cast<long long>(z_grid.size()), 10000);
  for (std::size_t k = 0; k < z_grid.size(); ++k) {
    const double zc = z_grid[k];
    double width = stratum_width;
    std::vector<double> y_t, y_c;
    for (int attempt = 0; attempt < 6; ++attempt) {
      y_t.clear();
      y_c.clear();
      const double zlo = std::max(0.0, zc - width / 2.0);
      const double zhi = std::min(1.0, zc + width / 2.0);
      hb::math::Rng rng(seed, 1000 + k * 7 + static_cast<std::uint64_t>(attempt));
      for (long long i = 0; i < per_stratum; ++i) {
        const double z = zlo + (zhi - zlo) * rng.uniform();
        const double v = rng.normal();
        const int d = rng.uniform() < config.treat_prob ? 1 : 0;
        if (d == 1) {
          if (v <= z * g + 1.0) {
            const double eps1 =
                config.sigma1 * (rho * v + std::sqrt(1.0 - rho * rho) * rng.normal());
            y_t.push_back(mu1(z) + eps1);
          }
        } else {
          if (v <= z * g) {
            y_c.push_back(config.sigma0 * rng.normal());
          }
        }
      }
      if (y_t.size() > 100 && y_c.size() > 100) break;
      width *= 2.0;
      std::cerr << "[roy_simulator] warning: widening stratum at z=" << zc << " to " << width
                << "\n";
    }
    if (y_t.empty() || y_c.empty()) {
      throw Error("roy_simulator", "empty stratum at z=" + std::to_string(zc));
    }
    std::sort(y_t.begin(), y_t.end());
    const double p0 = true_p0(config, zc);
    const double control_mean =
        std::accumulate(y_c.begin(), y_c.end(), 0.0) / static_cast<double>(y_c.size());
    // lower: mean of treated-selected Y below its p0 quantile
    const auto m = static_cast<long long>(y_t.size());
    auto cut_lo = static_cast<long long>(std::ceil(p0 * static_cast<double>(m)));
    cut_lo = std::clamp<long long>(cut_lo, 1, m);
    double acc = 0.0;
    for (long long i = 0; i < cut_lo; ++i) acc += y_t[static_cast<std::size_t>(i)];
    const double trimmed_lo = acc / static_cast<double>(cut_lo);
    // upper: mean of treated-selected Y above its (1-p0) quantile
    auto cut_hi = static_cast<long long>(std::floor((1.0 - p0) * static_cast<double>(m)));
    cut_hi = std::clamp<long long>(cut_hi, 0, m - 1);
    acc = 0.0;
    for (long long i = cut_hi; i < m; ++i) acc += y_t[static_cast<std::size_t>(i)];
    const double trimmed_hi = acc / static_cast<double>(m - cut_hi);
    out.lower[k] = trimmed_lo - control_mean;
    out.upper[k] = trimmed_hi - control_mean;
  }
  return out;
}

}  // namespace hb::roy
