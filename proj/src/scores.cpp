#include "hetbounds/scores.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "hetbounds/error.hpp"

namespace hb::scores {

namespace {
const char* kModule = "orthogonal_scores";
}

NuisanceView NuisanceView::from_fit(const nuisance::NuisanceFit& fit) {
  NuisanceView v;
  v.s0 = fit.s0_hat;
  v.s1 = fit.s1_hat;
  v.levels = fit.grid;
  v.q = fit.q_grid;
  return v;
}

double NuisanceView::quantile(Eigen::Index i, double u) const {
  const auto G = static_cast<Eigen::Index>(levels.size());
  if (u <= levels.front()) return q(i, 0);
  if (u >= levels.back()) return q(i, G - 1);
  auto it = std::upper_bound(levels.begin(), levels.end(), u);
  auto hi = static_cast<Eigen::Index>(it - levels.begin());
  auto lo = hi - 1;
  const double w = (u - levels[static_cast<std::size_t>(lo)]) /
                   (levels[static_cast<std::size_t>(hi)] - levels[static_cast<std::size_t>(lo)]);
  return (1.0 - w) * q(i, lo) + w * q(i, hi);
}

namespace {
// Mass cell of grid level g: midpoints to the neighbors, extended to 0 and 1
// at the ends. Integration treats q as constant on each cell.
inline void cell_bounds(const std::vector<double>& levels, std::size_t g, double& lo, double& hi) {
  lo = g == 0 ? 0.0 : 0.5 * (levels[g - 1] + levels[g]);
  hi = g + 1 == levels.size() ? 1.0 : 0.5 * (levels[g] + levels[g + 1]);
}
}  // namespace

double NuisanceView::integral_below(Eigen::Index i, double u) const {
  double acc = 0.0;
  for (std::size_t g = 0; g < levels.size(); ++g) {
    double lo, hi;
    cell_bounds(levels, g, lo, hi);
    const double overlap = std::max(0.0, std::min(hi, u) - lo);
    if (overlap <= 0.0 && lo >= u) break;
    acc += overlap * q(i, static_cast<Eigen::Index>(g));
  }
  return acc;
}

double NuisanceView::integral_above(Eigen::Index i, double u) const {
  double acc = 0.0;
  for (std::size_t g = 0; g < levels.size(); ++g) {
    double lo, hi;
    cell_bounds(levels, g, lo, hi);
    const double overlap = std::max(0.0, hi - std::max(lo, u));
    if (overlap > 0.0) acc += overlap * q(i, static_cast<Eigen::Index>(g));
  }
  return acc;
}

double NuisanceView::round_level(double u) const {
  auto it = std::lower_bound(levels.begin(), levels.end(), u);
  if (it == levels.begin()) return levels.front();
  if (it == levels.end()) return levels.back();
  const double above = *it;
  const double below = *(it - 1);
  return (u - below) <= (above - u) ? below : above;
}

CellClassification classify_cells(const NuisanceView& nu, double tie_tolerance) {
  const Eigen::Index n = nu.s0.size();
  CellClassification cells;
  cells.p0_hat.resize(n);
  cells.sign.resize(static_cast<std::size_t>(n));
  double sum_s0_plus = 0.0, sum_s1_minus = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double p0 = nu.s0[i] / nu.s1[i];
    if (!std::isfinite(p0) || p0 <= 0.0) {
      throw Error(kModule, "non-finite trimming share at unit " + std::to_string(i));
    }
    cells.p0_hat[i] = p0;
    const bool tie = std::fabs(p0 - 1.0) < tie_tolerance;
    if (tie) ++cells.ties;
    if (p0 < 1.0 || tie) {
      cells.sign[static_cast<std::size_t>(i)] = Sign::kPlus;
      ++cells.n_plus;
      sum_s0_plus += nu.s0[i];
    } else {
      cells.sign[static_cast<std::size_t>(i)] = Sign::kMinus;
      ++cells.n_minus;
      sum_s1_minus += nu.s1[i];
    }
  }
  if (cells.n_plus > 0) cells.mu10_plus = sum_s0_plus / static_cast<double>(cells.n_plus);
  if (cells.n_minus > 0) cells.mu11_minus = sum_s1_minus / static_cast<double>(cells.n_minus);
  return cells;
}

TrimmingLevels trimming_levels(const CellClassification& cells, const NuisanceView& nu,
                               const ScoreConfig& config) {
  const Eigen::Index n = cells.p0_hat.size();
  TrimmingLevels lv;
  lv.lower.resize(n);
  lv.upper.resize(n);
  const double lo = nu.levels.front();
  const double hi = nu.levels.back();
  for (Eigen::Index i = 0; i < n; ++i) {
    const double p0 = cells.p0_hat[i];
    double l, u;
    if (cells.sign[static_cast<std::size_t>(i)] == Sign::kPlus) {
      l = p0;
      u = 1.0 - p0;
    } else {
      l = 1.0 - 1.0 / p0;
      u = 1.0 / p0;
    }
    if (config.round_levels) {
      lv.lower[i] = nu.round_level(l);
      lv.upper[i] = nu.round_level(u);
    } else {
      lv.lower[i] = std::clamp(l, lo, hi);
      lv.upper[i] = std::clamp(u, lo, hi);
    }
  }
  return lv;
}

namespace {

struct UnitScore {
  double psi_L;
  double psi_U;
};

UnitScore score_unit(const data::ObservationTable& table, const NuisanceView& nu,
                     const CellClassification& cells, const TrimmingLevels& levels,
                     const ScoreConfig& config, Eigen::Index i) {
  const double e = table.propensity[i];
  const double d = static_cast<double>(table.d_treat[i]);
  const double s = static_cast<double>(table.s_select[i]);
  const double ds = d * s;
  const double cs = (1.0 - d) * s;  // control & selected
  const double y = s > 0.0 ? table.y_obs[i] : 0.0;
  const double s0 = nu.s0[i];
  const double s1 = nu.s1[i];
  const double p0 = cells.p0_hat[i];
  const double uL = levels.lower[i];
  const double uU = levels.upper[i];
  const double qL = nu.quantile(i, uL);
  const double qU = nu.quantile(i, uU);
  const bool plus = cells.sign[static_cast<std::size_t>(i)] == Sign::kPlus;

  const double ind_le_qL = (s > 0.0 && y <= qL) ? 1.0 : 0.0;
  const double ind_ge_qL = (s > 0.0 && y >= qL) ? 1.0 : 0.0;
  const double ind_le_qU = (s > 0.0 && y <= qU) ? 1.0 : 0.0;
  const double ind_ge_qU = (s > 0.0 && y >= qU) ? 1.0 : 0.0;

  const double u0 = cs / (1.0 - e) - s0;
  const double u1 = ds / e - s1;

  UnitScore out{0.0, 0.0};
  switch (config.form) {
    case ScoreForm::kPointwise: {
      if (plus) {
        const double core_L = ds * y * ind_le_qL / e - cs * y / (1.0 - e);
        const double core_U = ds * y * ind_ge_qU / e - cs * y / (1.0 - e);
        const double tm_L = nu.integral_below(i, uL) / uL;
        const double tm_U = nu.integral_above(i, uU) / (1.0 - uU);
        const double uq_L = ds * ind_le_qL / e - s1 * uL;
        const double uq_U = ds * ind_le_qU / e - s1 * uU;
        out.psi_L = (core_L + (qL - tm_L) * u0 - qL * uq_L) / s0;
        out.psi_U = (core_U + (qU - tm_U) * u0 - qU * u1 + qU * uq_U) / s0;
      } else {
        const double core_L = ds * y / e - cs * y * ind_ge_qL / (1.0 - e);
        const double core_U = ds * y / e - cs * y * ind_le_qU / (1.0 - e);
        const double mean1 = nu.integral_below(i, 1.0);  // untrimmed treated mean proxy
        const double tt_U = nu.integral_above(i, uL) / (1.0 - uL);
        const double tt_L = nu.integral_below(i, uU) / uU;
        const double uq_L = cs * ind_le_qL / (1.0 - e) - s0 * uL;
        const double uq_U = cs * ind_le_qU / (1.0 - e) - s0 * uU;
        out.psi_L = (core_L + qL * u0 - (qL + mean1 - tt_U) * u1 - qL * uq_L) / s1;
        out.psi_U = (core_U - (qU + mean1 - tt_L) * u1 + qU * uq_U) / s1;
      }
      break;
    }
    case ScoreForm::kAppendix:
    case ScoreForm::kStarOnly: {
      const bool star_only = config.form == ScoreForm::kStarOnly;
      if (plus) {
        if (!cells.mu10_plus) throw Error(kModule, "mu10_plus required but unset");
        const double mu = *cells.mu10_plus;
        const double core_L = ds * y * ind_le_qL / e - cs * y / (1.0 - e);
        const double core_U = ds * y * ind_ge_qU / e - cs * y / (1.0 - e);
        double alpha_L = 0.0, alpha_U = 0.0;
        if (!star_only) {
          alpha_L = qL * u0 - qL * p0 * u1 - qL * (ds * ind_le_qL / e - s0);
          const double denom_u =
              config.alpha_u == AlphaUDenominator::kAsPrinted ? e : (1.0 - e);
          alpha_U = qU * (cs / denom_u - s0) - qU * p0 * u1 +
                    qU * (ds * ind_le_qU / e - s1 * (1.0 - p0));
        }
        out.psi_L = (core_L + alpha_L) / mu;
        out.psi_U = (core_U + alpha_U) / mu;
      } else {
        if (!cells.mu11_minus) throw Error(kModule, "mu11_minus required but unset");
        const double mu = *cells.mu11_minus;
        const double core_L = ds * y / e - cs * y * ind_ge_qL / (1.0 - e);
        const double core_U = ds * y / e - cs * y * ind_le_qU / (1.0 - e);
        double alpha_L = 0.0, alpha_U = 0.0;
        if (!star_only) {
          alpha_L = -qL * (1.0 / p0) * u0 + qL * u1 +
                    qL * (ds * ind_le_qL / e + s0 * (1.0 - 1.0 / p0));
          const double denom_u =
              config.alpha_u == AlphaUDenominator::kAsPrinted ? e : (1.0 - e);
          alpha_U = qU * (1.0 / p0) * (cs / denom_u - s0) + qU * u1 +
                    qU * (ds * ind_le_qU / e - s0 / p0);
        }
        out.psi_L = (core_L + alpha_L) / mu;
        out.psi_U = (core_U + alpha_U) / mu;
      }
      break;
    }
  }
  if (!std::isfinite(out.psi_L) || !std::isfinite(out.psi_U)) {
    char buf[256];
    std::snprintf(buf, sizeof(buf),
                  "non-finite score at unit %lld (d=%g s=%g e=%g s0=%g s1=%g p0=%g qL=%g qU=%g)",
                  static_cast<long long>(i), d, s, e, s0, s1, p0, qL, qU);
    throw Error(kModule, buf);
  }
  return out;
}

}  // namespace

ScoreVector compute_scores(const data::ObservationTable& table, const NuisanceView& nu,
                           const CellClassification& cells, const TrimmingLevels& levels,
                           const ScoreConfig& config) {
  const Eigen::Index n = table.n();
  ScoreVector out;
  out.psi_L.resize(n);
  out.psi_U.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    UnitScore u = score_unit(table, nu, cells, levels, config, i);
    out.psi_L[i] = u.psi_L;
    out.psi_U[i] = u.psi_U;
  }
  return out;
}

Eigen::VectorXd score_lower(const data::ObservationTable& table, const NuisanceView& nu,
                            const CellClassification& cells, const TrimmingLevels& levels,
                            const ScoreConfig& config) {
  return compute_scores(table, nu, cells, levels, config).psi_L;
}

Eigen::VectorXd score_upper(const data::ObservationTable& table, const NuisanceView& nu,
                            const CellClassification& cells, const TrimmingLevels& levels,
                            const ScoreConfig& config) {
  return compute_scores(table, nu, cells, levels, config).psi_U;
}

void export_scores_csv(const std::string& path, const ScoreVector& scores,
                       const CellClassification& cells, const TrimmingLevels& levels) {
  std::ofstream out(path);
  if (!out) throw Error(kModule, "cannot write " + path);
  out << "unit,psi_L,psi_U,cell,level_lower,level_upper\n";
  char buf[64];
  auto emit = [&](double v) {
    std::snprintf(buf, sizeof(buf), "%.10g", v);
    out << buf;
  };
  for (Eigen::Index i = 0; i < scores.psi_L.size(); ++i) {
    out << i << ',';
    emit(scores.psi_L[i]);
    out << ',';
    emit(scores.psi_U[i]);
    out << ',' << (cells.sign[static_cast<std::size_t>(i)] == Sign::kPlus ? "plus" : "minus")
        << ',';
    emit(levels.lower[i]);
    out << ',';
    emit(levels.upper[i]);
    out << '\n';
  }
}

OrthogonalityResult orthogonality_check(const data::ObservationTable& table,
                                        const NuisanceView& base, PerturbTarget target,
                                        double direction_size, double t,
                                        const ScoreConfig& config) {
  auto mean_scores = [&](const NuisanceView& nu) {
    auto cells = classify_cells(nu, config.tie_tolerance);
    auto levels = trimming_levels(cells, nu, config);
    auto sv = compute_scores(table, nu, cells, levels, config);
    return std::pair<double, double>{sv.psi_L.mean(), sv.psi_U.mean()};
  };
  auto [base_L, base_U] = mean_scores(base);
  OrthogonalityResult out;
  if (t == 0.0) return out;
  NuisanceView pert = base;
  const double shift = t * direction_size;
  switch (target) {
    case PerturbTarget::kS0:
      pert.s0 = (base.s0.array() + shift).cwiseMax(1e-6).cwiseMin(1.0 - 1e-6);
      break;
    case PerturbTarget::kS1:
      pert.s1 = (base.s1.array() + shift).cwiseMax(1e-6).cwiseMin(1.0 - 1e-6);
      break;
    case PerturbTarget::kQ:
      pert.q.array() += shift;
      break;
  }
  auto [pert_L, pert_U] = mean_scores(pert);
  out.derivative_L = (pert_L - base_L) / t;
  out.derivative_U = (pert_U - base_U) / t;
  return out;
}

}  // namespace hb::scores
