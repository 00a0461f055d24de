#include "hetbounds/bands.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>

#include "hetbounds/error.hpp"
#include "hetbounds/math.hpp"
#include "hetbounds/parallel.hpp"

namespace hb::bands {

namespace {
const char* kModule = "uniform_bands";

struct RepStats {
  double inf_L = std::numeric_limits<double>::quiet_NaN();
  double sup_U = std::numeric_limits<double>::quiet_NaN();
  bool ok = false;
};

struct SideData {
  Eigen::MatrixXd design;   // n x k, sample
  Eigen::MatrixXd grid;     // g x k, evaluation grid
  Eigen::VectorXd psi;
  Eigen::VectorXd beta_hat;
};

// One weighted fit plus sup/inf of the t-process on the grid.
bool rep_side(const SideData& sd, const Eigen::VectorXd& h, bool upper, double& extreme) {
  const double n = static_cast<double>(sd.design.rows());
  Eigen::MatrixXd a = sd.design.transpose() * h.asDiagonal() * sd.design;
  Eigen::LDLT<Eigen::MatrixXd> ldlt(a);
  if (ldlt.info() != Eigen::Success) return false;
  Eigen::VectorXd d = ldlt.vectorD();
  if (d.minCoeff() < 1e-10 * std::max(1.0, d.maxCoeff())) return false;
  Eigen::VectorXd beta_b = ldlt.solve(sd.design.transpose() * (h.asDiagonal() * sd.psi));
  Eigen::VectorXd resid_b = sd.psi - sd.design * beta_b;
  Eigen::MatrixXd q_inv = ldlt.solve(Eigen::MatrixXd::Identity(a.rows(), a.cols())) * n;
  Eigen::VectorXd w2 = (h.array() * resid_b.array().square()).matrix();
  Eigen::MatrixXd meat = sd.design.transpose() * w2.asDiagonal() * sd.design / n;
  Eigen::MatrixXd v = q_inv * meat * q_inv;
  Eigen::VectorXd diff = beta_b - sd.beta_hat;
  bool any = false;
  double best = 0.0;
  for (Eigen::Index gidx = 0; gidx < sd.grid.rows(); ++gidx) {
    const Eigen::RowVectorXd b = sd.grid.row(gidx);
    double var = b * v * b.transpose();
    if (var <= 1e-14) continue;  // degenerate point skipped
    double t = b.dot(diff) / std::sqrt(var);
    if (!any) {
      best = t;
      any = true;
    } else {
      best = upper ? std::max(best, t) : std::min(best, t);
    }
  }
  if (!any) return false;
  extreme = best;
  return true;
}

}  // namespace

BootstrapFit bootstrap_fit(const scores::ScoreVector& psi, const Eigen::MatrixXd& design_L,
                           const Eigen::MatrixXd& design_U, const Eigen::VectorXd& h) {
  BootstrapFit out;
  out.beta_L = series::weighted_ls(design_L, psi.psi_L, h);
  out.beta_U = series::weighted_ls(design_U, psi.psi_U, h);
  out.resid_L = psi.psi_L - design_L * out.beta_L;
  out.resid_U = psi.psi_U - design_U * out.beta_U;
  return out;
}

Eigen::MatrixXd refine_grid(const Eigen::MatrixXd& z_grid, int min_points) {
  if (z_grid.cols() != 1 || z_grid.rows() >= min_points) return z_grid;
  double lo = z_grid.col(0).minCoeff();
  double hi = z_grid.col(0).maxCoeff();
  Eigen::MatrixXd out(min_points, 1);
  for (int i = 0; i < min_points; ++i) {
    out(i, 0) = lo + (hi - lo) * i / (min_points - 1);
  }
  return out;
}

UniformBand confidence_band(const series::BoundsCurve& curve, const Eigen::MatrixXd& z_sample,
                            const scores::ScoreVector& psi, const Eigen::MatrixXd& z_grid,
                            double alpha, const BootstrapConfig& config) {
  if (config.reps < 1) throw Error(kModule, "bootstrap reps must be >= 1");
  if (z_grid.rows() == 0) throw Error(kModule, "empty evaluation grid");
  const Eigen::Index n = z_sample.rows();

  SideData lower{curve.basis_L().design(z_sample), curve.basis_L().design(z_grid), psi.psi_L,
                 curve.beta_L()};
  SideData upper{curve.basis_U().design(z_sample), curve.basis_U().design(z_grid), psi.psi_U,
                 curve.beta_U()};

  std::vector<RepStats> stats(static_cast<std::size_t>(config.reps));
  const int max_attempts_per_rep = 8;
  hb::util::parallel_for(config.reps, config.threads, [&](std::int64_t rep) {
    Eigen::VectorXd h(n);
    for (int attempt = 0; attempt < max_attempts_per_rep; ++attempt) {
      hb::math::Rng rng(config.seed,
                        static_cast<std::uint64_t>(rep) + 1000003ULL * static_cast<std::uint64_t>(attempt));
      for (Eigen::Index i = 0; i < n; ++i) h[i] = rng.exponential();
      RepStats rs;
      double lo_t, up_t;
      // identical weight vector h for both bounds within a rep
      if (rep_side(lower, h, /*upper=*/false, lo_t) && rep_side(upper, h, /*upper=*/true, up_t)) {
        rs.inf_L = lo_t;
        rs.sup_U = up_t;
        rs.ok = true;
        stats[static_cast<std::size_t>(rep)] = rs;
        return;
      }
      stats[static_cast<std::size_t>(rep)].ok = false;
    }
  });

  UniformBand band;
  for (const auto& rs : stats) {
    if (rs.ok) {
      band.run.inf_t_L.push_back(rs.inf_L);
      band.run.sup_t_U.push_back(rs.sup_U);
    } else {
      ++band.run.discarded;
    }
  }
  if (band.run.discarded > std::max(1, config.reps / 100)) {
    throw Error(kModule, std::to_string(band.run.discarded) +
                             " bootstrap reps discarded (cap is 1%)");
  }
  std::vector<double> inf_sorted = band.run.inf_t_L;
  std::vector<double> sup_sorted = band.run.sup_t_U;
  std::sort(inf_sorted.begin(), inf_sorted.end());
  std::sort(sup_sorted.begin(), sup_sorted.end());
  band.run.quantile_inf_L = hb::math::empirical_quantile_sorted(inf_sorted, alpha / 2.0);
  band.run.quantile_sup_U = hb::math::empirical_quantile_sorted(sup_sorted, 1.0 - alpha / 2.0);

  const double root_n = std::sqrt(static_cast<double>(n));
  band.points.resize(static_cast<std::size_t>(z_grid.rows()));
  for (Eigen::Index gidx = 0; gidx < z_grid.rows(); ++gidx) {
    const Eigen::RowVectorXd z = z_grid.row(gidx);
    auto& pt = band.points[static_cast<std::size_t>(gidx)];
    series::VarianceField f = curve.variance(z);
    if (f.sigma_L <= 1.5e-6 && f.sigma_U <= 1.5e-6) {
      pt.skipped = true;  // zero-variance degenerate point
      continue;
    }
    // the alpha/2 quantile of the inf process is negative, shifting the
    // lower edge down; equivalently subtracting the 1-alpha/2 quantile of
    // the sup process by symmetry
    pt.lo = curve.theta_L(z) + band.run.quantile_inf_L * f.sigma_L / root_n;
    pt.hi = curve.theta_U(z) + band.run.quantile_sup_U * f.sigma_U / root_n;
  }
  return band;
}

}  // namespace hb::bands
