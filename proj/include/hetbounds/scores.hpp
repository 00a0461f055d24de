#pragma once

#include <Eigen/Dense>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "hetbounds/data.hpp"
#include "hetbounds/nuisance.hpp"

namespace hb::scores {

enum class Sign { kPlus, kMinus };

// Which moment-function variant drives the pseudo-outcomes.
//  kPointwise: cell terms normalized by the unit's own AT share
//              (s0 in PLUS cells, s1 in MINUS cells) with bias corrections
//              derived so the score is first-order insensitive to all three
//              nuisance directions. Signals the bound curves theta_B(z)
//              directly; pipeline default.
//  kAppendix:  the global-mean normalization mu10+/mu11- with the printed
//              correction terms; signals the AT-share-weighted unconditional
//              bounds.
//  kStarOnly:  psi* without any bias correction (negative control).
enum class ScoreForm { kPointwise, kAppendix, kStarOnly };

// alpha_U first terms as printed divide (1-D)S by e(x); the symmetric form
// uses 1-e(x), which is the conditionally mean-zero centering for e != 1/2.
enum class AlphaUDenominator { kSymmetric, kAsPrinted };

struct ScoreConfig {
  ScoreForm form = ScoreForm::kPointwise;
  AlphaUDenominator alpha_u = AlphaUDenominator::kSymmetric;
  bool round_levels = true;  // round trimming levels to the quantile grid
  double tie_tolerance = 1e-12;
};

// Minimal nuisance interface the score engine consumes: per-unit selection
// probabilities plus a quantile curve sampled on a grid of levels. Both the
// cross-fitted estimates and analytic (simulation) nuisances fit this shape.
struct NuisanceView {
  Eigen::VectorXd s0;
  Eigen::VectorXd s1;
  std::vector<double> levels;  // strictly increasing inside (0,1)
  Eigen::MatrixXd q;           // n x |levels|, nondecreasing per row

  static NuisanceView from_fit(const nuisance::NuisanceFit& fit);

  // linear interpolation in u, flat beyond the grid ends
  double quantile(Eigen::Index i, double u) const;
  // grid-cell Riemann approximations of int_0^u q and int_u^1 q
  double integral_below(Eigen::Index i, double u) const;
  double integral_above(Eigen::Index i, double u) const;
  // nearest grid level (the spec's rounding rule), clamped into the grid
  double round_level(double u) const;
};

struct CellClassification {
  Eigen::VectorXd p0_hat;
  std::vector<Sign> sign;
  std::optional<double> mu10_plus;   // mean s0 over PLUS units
  std::optional<double> mu11_minus;  // mean s1 over MINUS units
  Eigen::Index n_plus = 0;
  Eigen::Index n_minus = 0;
  Eigen::Index ties = 0;
};

CellClassification classify_cells(const NuisanceView& nu, double tie_tolerance = 1e-12);

struct TrimmingLevels {
  Eigen::VectorXd lower;  // quantile level used by the lower-bound score
  Eigen::VectorXd upper;
};

TrimmingLevels trimming_levels(const CellClassification& cells, const NuisanceView& nu,
                               const ScoreConfig& config);

struct ScoreVector {
  Eigen::VectorXd psi_L;
  Eigen::VectorXd psi_U;
};

ScoreVector compute_scores(const data::ObservationTable& table, const NuisanceView& nu,
                           const CellClassification& cells, const TrimmingLevels& levels,
                           const ScoreConfig& config);

Eigen::VectorXd score_lower(const data::ObservationTable& table, const NuisanceView& nu,
                            const CellClassification& cells, const TrimmingLevels& levels,
                            const ScoreConfig& config);
Eigen::VectorXd score_upper(const data::ObservationTable& table, const NuisanceView& nu,
                            const CellClassification& cells, const TrimmingLevels& levels,
                            const ScoreConfig& config);

// CSV export: unit id, psi_L, psi_U, cell sign, trimming levels.
void export_scores_csv(const std::string& path, const ScoreVector& scores,
                       const CellClassification& cells, const TrimmingLevels& levels);

// Finite-difference probe used by tests: [E_n psi_B(eta0 + t*delta) -
// E_n psi_B(eta0)] / t for an additive direction on one nuisance component.
enum class PerturbTarget { kS0, kS1, kQ };

struct OrthogonalityResult {
  double derivative_L = 0.0;
  double derivative_U = 0.0;
};

OrthogonalityResult orthogonality_check(const data::ObservationTable& table,
                                        const NuisanceView& base, PerturbTarget target,
                                        double direction_size, double t,
                                        const ScoreConfig& config);

}  // namespace hb::scores
