#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "hetbounds/series.hpp"

namespace hb::bands {

struct BootstrapConfig {
  int reps = 1000;
  std::uint64_t seed = 42;
  int threads = 0;  // 0 = hardware concurrency
};

struct BootstrapRun {
  std::vector<double> inf_t_L;  // per accepted rep
  std::vector<double> sup_t_U;
  int discarded = 0;
  double quantile_inf_L = 0.0;  // c_{alpha/2}(inf t_L)
  double quantile_sup_U = 0.0;  // c_{1-alpha/2}(sup t_U)
};

struct BandPoint {
  double lo = 0.0;
  double hi = 0.0;
  bool skipped = false;
};

struct UniformBand {
  std::vector<BandPoint> points;  // parallel to the evaluation grid
  BootstrapRun run;
};

struct BootstrapFit {
  Eigen::VectorXd beta_L, beta_U;
  Eigen::VectorXd resid_L, resid_U;
};

// One weighted-least-squares pass with shared weights h for both bounds.
BootstrapFit bootstrap_fit(const scores::ScoreVector& psi, const Eigen::MatrixXd& design_L,
                           const Eigen::MatrixXd& design_U, const Eigen::VectorXd& h);

// Exponential-multiplier bootstrap: one weight vector h per rep, shared by
// both weighted regressions; nuisances are never refit.
UniformBand confidence_band(const series::BoundsCurve& curve, const Eigen::MatrixXd& z_sample,
                            const scores::ScoreVector& psi, const Eigen::MatrixXd& z_grid,
                            double alpha, const BootstrapConfig& config);

// Refines a 1-d grid to at least `min_points` per continuous dimension.
Eigen::MatrixXd refine_grid(const Eigen::MatrixXd& z_grid, int min_points = 101);

}  // namespace hb::bands
