#pragma once

#include <cstdint>
#include <vector>

#include "hetbounds/pipeline.hpp"
#include "hetbounds/roy.hpp"

namespace hb::studies {

struct StudyConfig {
  roy::RoyConfig roy;
  pipeline::EstimateConfig estimate;
  int reps = 500;
  std::uint64_t seed = 2024;
  int threads = 0;
  double rep_failure_cap = 0.02;
};

struct CoverageRow {
  double z = 0.0;
  double coverage = 0.0;
  double mc_se = 0.0;
  int reps = 0;
};

struct CoverageResult {
  std::vector<CoverageRow> rows;
  int failures = 0;
};

// Per-grid-z empirical coverage of the true theta(z) by the pointwise CIs.
CoverageResult run_coverage_study(const StudyConfig& config, const std::vector<double>& z_eval);

struct PowerRow {
  double deviation = 0.0;
  double reject_z0 = 0.0;  // stratum [0, 0.5]
  double reject_z1 = 0.0;  // stratum [0.5, 1]
};

struct PowerResult {
  std::vector<PowerRow> rows;
  double theta_z0 = 0.0;  // true integrated parameters
  double theta_z1 = 0.0;
  int failures = 0;
};

// Rejection frequency of H0: theta(strata_j) = truth + deviation, via the
// indicator-basis pipeline on the two z strata.
PowerResult run_power_study(const StudyConfig& config, const std::vector<double>& deviations);

struct UniformCoverageResult {
  double simultaneous_coverage = 0.0;
  int reps = 0;
  int failures = 0;
};

// Fraction of replications where theta(z) lies inside the multiplier
// bootstrap band at every (non-skipped) grid point.
UniformCoverageResult run_uniform_coverage_study(const StudyConfig& config);

}  // namespace hb::studies
