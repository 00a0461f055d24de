#pragma once

#include <memory>
#include <optional>
#include <vector>

#include "hetbounds/bands.hpp"
#include "hetbounds/data.hpp"
#include "hetbounds/nuisance.hpp"
#include "hetbounds/pointwise.hpp"
#include "hetbounds/roy.hpp"
#include "hetbounds/scores.hpp"
#include "hetbounds/series.hpp"

namespace hb::pipeline {

std::vector<series::BasisSpec> default_basis_candidates();

struct BasisConfig {
  std::vector<series::BasisSpec> candidates = default_basis_candidates();
  bool share = false;  // force the same selected basis for both bounds
};

struct EstimateConfig {
  nuisance::LearnerConfig learner;
  scores::ScoreConfig score;
  BasisConfig basis;
  double alpha = 0.05;
  int folds = 10;
  std::uint64_t seed = 17;
  int grid_points = 101;           // auto grid size over the z range
  std::vector<double> z_eval;      // explicit evaluation points (optional)
  int bootstrap_reps = 0;          // 0 disables uniform bands
  int threads = 0;
  // shared critical-value cache for repeated runs (studies); optional
  pointwise::CriticalValueTable* critical_table = nullptr;
  pointwise::CoverageConfig coverage;
};

struct GridRow {
  double z = 0.0;
  double theta_L = 0.0, theta_U = 0.0;
  double sigma_L = 0.0, sigma_U = 0.0, rho = 0.0;
  double theta_star = 0.0, sigma_star = 0.0;
  double c_hat = 0.0;
  double ci_lo = 0.0, ci_hi = 0.0;
};

struct BandRow {
  double z = 0.0;
  double lo = 0.0, hi = 0.0;
  bool skipped = false;
};

struct EstimateResult {
  Eigen::Index n = 0;
  scores::ScoreVector scores;
  scores::CellClassification cells;
  scores::TrimmingLevels levels;
  series::BasisSpec basis_L, basis_U;
  std::optional<series::BoundsCurve> curve;
  std::vector<GridRow> rows;
  std::vector<BandRow> band_rows;
  int bootstrap_discarded = 0;
  std::string learner_tag;
};

// Heterogeneity values as a matrix plus a flag for indicator treatment; the
// HeterogeneitySpec overloads derive this from table columns.
struct ZData {
  Eigen::MatrixXd z;
  bool categorical = false;
};

// Full path: folds -> crossfit -> scores -> basis selection -> projection ->
// pointwise CIs -> optional uniform bands.
EstimateResult estimate(const data::ObservationTable& table,
                        const data::HeterogeneitySpec& het, const EstimateConfig& config);
EstimateResult estimate(const data::ObservationTable& table, const ZData& zdata,
                        const EstimateConfig& config);

// Same pipeline with externally supplied nuisances (oracle runs, tests).
EstimateResult estimate_with_nuisance(const data::ObservationTable& table,
                                      const data::HeterogeneitySpec& het,
                                      const scores::NuisanceView& nu,
                                      const EstimateConfig& config);
EstimateResult estimate_with_nuisance(const data::ObservationTable& table, const ZData& zdata,
                                      const scores::NuisanceView& nu,
                                      const EstimateConfig& config);

}  // namespace hb::pipeline
