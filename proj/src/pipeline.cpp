#include "hetbounds/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "hetbounds/error.hpp"

namespace hb::pipeline {

std::vector<series::BasisSpec> default_basis_candidates() {
  using series::BasisSpec;
  std::vector<BasisSpec> out;
  BasisSpec constant;
  constant.kind = BasisSpec::Kind::kConstant;
  out.push_back(constant);
  BasisSpec linear;
  linear.kind = BasisSpec::Kind::kBSpline;
  linear.order = 2;
  linear.interior_knots = 0;
  out.push_back(linear);
  for (int knots : {0, 1, 2, 3, 5}) {
    BasisSpec cubic;
    cubic.kind = BasisSpec::Kind::kBSpline;
    cubic.order = 4;
    cubic.interior_knots = knots;
    out.push_back(cubic);
  }
  return out;
}

namespace {

std::vector<double> evaluation_grid(const Eigen::MatrixXd& z, const EstimateConfig& config,
                                    bool categorical) {
  if (!config.z_eval.empty()) return config.z_eval;
  if (categorical) {
    std::set<double> cats(z.col(0).data(), z.col(0).data() + z.rows());
    return {cats.begin(), cats.end()};
  }
  const double lo = z.col(0).minCoeff();
  const double hi = z.col(0).maxCoeff();
  const int g = std::max(2, config.grid_points);
  std::vector<double> out(static_cast<std::size_t>(g));
  for (int i = 0; i < g; ++i) {
    out[static_cast<std::size_t>(i)] = lo + (hi - lo) * i / (g - 1);
  }
  return out;
}

EstimateResult run_from_scores(const data::ObservationTable& table, const Eigen::MatrixXd& z,
                               bool categorical, EstimateResult&& result,
                               const EstimateConfig& config) {
  // basis selection on estimated pseudo-outcomes, separately per bound
  std::vector<series::BasisSpec> candidates = config.basis.candidates;
  if (categorical) {
    candidates.clear();
    series::BasisSpec ind;
    ind.kind = series::BasisSpec::Kind::kIndicator;
    candidates.push_back(ind);
  }
  std::size_t sel_L, sel_U;
  if (candidates.size() == 1) {
    sel_L = sel_U = 0;
  } else {
    sel_L = series::loocv_select(z, result.scores.psi_L, candidates).selected;
    sel_U = series::loocv_select(z, result.scores.psi_U, candidates).selected;
    if (config.basis.share && sel_L != sel_U) {
      // pooled rule: pick the richer of the two
      auto dim = [&](std::size_t c) {
        return series::ResolvedBasis::resolve(z, candidates[c]).dimension();
      };
      std::size_t shared = dim(sel_L) >= dim(sel_U) ? sel_L : sel_U;
      sel_L = sel_U = shared;
    }
  }
  result.basis_L = candidates[sel_L];
  result.basis_U = candidates[sel_U];
  series::ResolvedBasis basis_L = series::build_basis(z, result.basis_L);
  series::ResolvedBasis basis_U = series::build_basis(z, result.basis_U);
  result.curve.emplace(basis_L, basis_U, z, result.scores.psi_L, result.scores.psi_U);
  const auto& curve = *result.curve;

  std::vector<double> grid = evaluation_grid(z, config, categorical);
  std::unique_ptr<pointwise::CriticalValueTable> local_table;
  pointwise::CriticalValueTable* table_ptr = config.critical_table;
  if (table_ptr == nullptr) {
    local_table =
        std::make_unique<pointwise::CriticalValueTable>(config.alpha, config.coverage);
    table_ptr = local_table.get();
  }
  const double n = static_cast<double>(result.n);
  result.rows.reserve(grid.size());
  for (double zv : grid) {
    Eigen::RowVectorXd zrow(1);
    zrow[0] = zv;
    GridRow row;
    row.z = zv;
    row.theta_L = curve.theta_L(zrow);
    row.theta_U = curve.theta_U(zrow);
    auto f = curve.variance(zrow);
    row.sigma_L = f.sigma_L;
    row.sigma_U = f.sigma_U;
    row.rho = f.rho;
    auto ps = pointwise::pseudo_true(row.theta_L, row.theta_U, row.sigma_L, row.sigma_U, row.rho);
    row.theta_star = ps.theta_star;
    row.sigma_star = ps.sigma_star;
    row.c_hat = table_ptr->lookup(row.rho);
    auto ci = pointwise::confidence_interval(row.theta_L, row.theta_U, row.sigma_L, row.sigma_U,
                                             row.rho, n, config.alpha, row.c_hat);
    row.ci_lo = ci.lo;
    row.ci_hi = ci.hi;
    result.rows.push_back(row);
  }

  if (config.bootstrap_reps > 0) {
    Eigen::MatrixXd user_grid(static_cast<Eigen::Index>(grid.size()), 1);
    for (std::size_t i = 0; i < grid.size(); ++i) {
      user_grid(static_cast<Eigen::Index>(i), 0) = grid[i];
    }
    Eigen::MatrixXd band_grid = categorical ? user_grid : bands::refine_grid(user_grid, 101);
    bands::BootstrapConfig bc;
    bc.reps = config.bootstrap_reps;
    bc.seed = config.seed ^ 0xb00157ULL;
    bc.threads = config.threads;
    auto band = bands::confidence_band(curve, z, result.scores, band_grid, config.alpha, bc);
    result.bootstrap_discarded = band.run.discarded;
    result.band_rows.reserve(static_cast<std::size_t>(band_grid.rows()));
    for (Eigen::Index i = 0; i < band_grid.rows(); ++i) {
      BandRow br;
      br.z = band_grid(i, 0);
      br.lo = band.points[static_cast<std::size_t>(i)].lo;
      br.hi = band.points[static_cast<std::size_t>(i)].hi;
      br.skipped = band.points[static_cast<std::size_t>(i)].skipped;
      result.band_rows.push_back(br);
    }
  }
  return std::move(result);
}

EstimateResult scores_common(const data::ObservationTable& table,
                             const scores::NuisanceView& nu, const EstimateConfig& config,
                             std::string learner_tag) {
  EstimateResult result;
  result.n = table.n();
  result.learner_tag = std::move(learner_tag);
  result.cells = scores::classify_cells(nu, config.score.tie_tolerance);
  result.levels = scores::trimming_levels(result.cells, nu, config.score);
  result.scores = scores::compute_scores(table, nu, result.cells, result.levels, config.score);
  return result;
}

}  // namespace

namespace {
ZData zdata_from_spec(const data::ObservationTable& table, const data::HeterogeneitySpec& het) {
  het.validate(table.dim());
  ZData zd;
  zd.z = het.extract(table);
  zd.categorical = het.kinds.size() == 1 && het.kinds[0] == data::ColumnKind::kCategorical;
  return zd;
}
}  // namespace

EstimateResult estimate(const data::ObservationTable& table, const ZData& zdata,
                        const EstimateConfig& config) {
  auto folds = data::make_folds(table.n(), config.folds, config.seed);
  auto fit = nuisance::crossfit(table, folds, config.learner);
  auto nu = scores::NuisanceView::from_fit(fit);
  EstimateResult result = scores_common(table, nu, config, fit.learner_tag);
  return run_from_scores(table, zdata.z, zdata.categorical, std::move(result), config);
}

EstimateResult estimate(const data::ObservationTable& table, const data::HeterogeneitySpec& het,
                        const EstimateConfig& config) {
  return estimate(table, zdata_from_spec(table, het), config);
}

EstimateResult estimate_with_nuisance(const data::ObservationTable& table, const ZData& zdata,
                                      const scores::NuisanceView& nu,
                                      const EstimateConfig& config) {
  EstimateResult result = scores_common(table, nu, config, "injected");
  return run_from_scores(table, zdata.z, zdata.categorical, std::move(result), config);
}

EstimateResult estimate_with_nuisance(const data::ObservationTable& table,
                                      const data::HeterogeneitySpec& het,
                                      const scores::NuisanceView& nu,
                                      const EstimateConfig& config) {
  return estimate_with_nuisance(table, zdata_from_spec(table, het), nu, config);
}

}  // namespace hb::pipeline
