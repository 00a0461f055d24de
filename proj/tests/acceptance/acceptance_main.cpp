// Acceptance suite: one line per criterion, nonzero exit on any failure.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "hetbounds/io.hpp"
#include "hetbounds/math.hpp"
#include "hetbounds/pipeline.hpp"
#include "hetbounds/pointwise.hpp"
#include "hetbounds/roy.hpp"
#include "hetbounds/scores.hpp"
#include "hetbounds/studies.hpp"

using namespace hb;

namespace {

int failures = 0;

struct Timer {
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }
};

void report(int criterion, const char* name, bool pass, const std::string& detail,
            double seconds) {
  std::printf("[%s] criterion %d (%s): %s  [%.1fs]\n", pass ? "PASS" : "FAIL", criterion, name,
              detail.c_str(), seconds);
  std::fflush(stdout);
  if (!pass) ++failures;
}

data::HeterogeneitySpec first_column_het() {
  data::HeterogeneitySpec het;
  het.columns = {0};
  het.kinds = {data::ColumnKind::kContinuous};
  return het;
}

// 1. Collapse identity: constant bases reproduce the unconditional means.
void criterion_collapse() {
  Timer timer;
  roy::RoyConfig rc;
  rc.n = 2000;
  rc.p = 5;
  rc.seed = 1001;
  auto table = roy::simulate(rc);
  pipeline::EstimateConfig ec;
  ec.folds = 2;
  ec.seed = 4;
  series::BasisSpec constant;
  constant.kind = series::BasisSpec::Kind::kConstant;
  ec.basis.candidates = {constant};
  ec.z_eval = {0.05, 0.3, 0.55, 0.8};
  auto res = pipeline::estimate(table, first_column_het(), ec);
  const double mean_L = res.scores.psi_L.mean();
  const double mean_U = res.scores.psi_U.mean();
  double worst = 0.0;
  for (const auto& row : res.rows) {
    worst = std::max(worst, std::fabs(row.theta_L - mean_L) / std::max(1.0, std::fabs(mean_L)));
    worst = std::max(worst, std::fabs(row.theta_U - mean_U) / std::max(1.0, std::fabs(mean_U)));
  }
  std::ostringstream ss;
  ss << "max relative deviation from unconditional means = " << worst;
  report(1, "collapse identity", worst <= 1e-10, ss.str(), timer.seconds());
}

// 2. Orthogonality at n = 50000 with analytic nuisances.
void criterion_orthogonality() {
  Timer timer;
  roy::RoyConfig rc;
  rc.n = 50000;
  rc.p = 10;
  rc.seed = 99;
  auto table = roy::simulate(rc);
  auto nu = roy::analytic_nuisances(rc, table, nuisance::default_quantile_grid());
  scores::ScoreConfig orth;
  orth.round_levels = false;
  scores::ScoreConfig naive;
  naive.form = scores::ScoreForm::kStarOnly;
  naive.round_levels = false;

  bool pass = true;
  std::ostringstream ss;
  // the derivative noise floor comes from indicator flips at the trimming
  // threshold; the halving check is applied above it
  const double floor = 1.5e-3;
  for (auto target : {scores::PerturbTarget::kS0, scores::PerturbTarget::kS1,
                      scores::PerturbTarget::kQ}) {
    auto full = scores::orthogonality_check(table, nu, target, 0.05, 1.0, orth);
    auto half = scores::orthogonality_check(table, nu, target, 0.05, 0.5, orth);
    const char* tag = target == scores::PerturbTarget::kS0   ? "s0"
                      : target == scores::PerturbTarget::kS1 ? "s1"
                                                             : "q";
    for (auto side : {0, 1}) {
      const double d1 = side == 0 ? full.derivative_L : full.derivative_U;
      const double d2 = side == 0 ? half.derivative_L : half.derivative_U;
      const bool ok = std::fabs(d2) <= std::max(0.65 * std::fabs(d1), floor);
      if (!ok) pass = false;
      ss << tag << (side == 0 ? "/L" : "/U") << ": " << d1 << " -> " << d2 << "; ";
    }
  }
  // negative control: psi* alone keeps a first-order term
  auto ctrl_full = scores::orthogonality_check(table, nu, scores::PerturbTarget::kS0, 0.05,
                                               1.0, naive);
  auto ctrl_half = scores::orthogonality_check(table, nu, scores::PerturbTarget::kS0, 0.05,
                                               0.5, naive);
  const bool ctrl_fails_halving =
      std::fabs(ctrl_half.derivative_L) > 0.008 &&
      std::fabs(ctrl_half.derivative_L) > 0.65 * std::fabs(ctrl_full.derivative_L);
  if (!ctrl_fails_halving) pass = false;
  ss << "control s0/L: " << ctrl_full.derivative_L << " -> " << ctrl_half.derivative_L;
  report(2, "orthogonality", pass, ss.str(), timer.seconds());
}

// 3. Oracle bracketing + true-nuisance pipeline against the oracle curves.
void criterion_oracle() {
  Timer timer;
  roy::RoyConfig rc;
  rc.p = 10;
  std::vector<double> grid;
  for (int i = 0; i < 50; ++i) grid.push_back(0.01 + 0.98 * i / 49.0);
  auto oracle = roy::oracle_bounds(grid, rc, 10'000'000);
  bool brackets = true;
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const double truth = roy::true_theta(grid[k], rc);
    if (!(oracle.lower[k] <= truth && truth <= oracle.upper[k])) brackets = false;
  }

  rc.n = 20000;
  rc.seed = 2024;
  auto table = roy::simulate(rc);
  auto nu = roy::analytic_nuisances(rc, table, nuisance::default_quantile_grid());
  pipeline::EstimateConfig ec;
  ec.seed = 7;
  ec.z_eval = grid;
  auto res = pipeline::estimate_with_nuisance(table, first_column_het(), nu, ec);
  double sup_err = 0.0;
  for (std::size_t k = 0; k < grid.size(); ++k) {
    sup_err = std::max(sup_err, std::fabs(res.rows[k].theta_L - oracle.lower[k]));
    sup_err = std::max(sup_err, std::fabs(res.rows[k].theta_U - oracle.upper[k]));
  }
  std::ostringstream ss;
  ss << "oracle brackets truth at all 50 grid points = " << (brackets ? "yes" : "NO")
     << ", pipeline sup error = " << sup_err;
  report(3, "oracle bracketing", brackets && sup_err < 0.05, ss.str(), timer.seconds());
}

// 4. Critical-value limits (first limb implemented as stated; it fails for
// the faithful Eq. 15 construction, see the printed note).
void criterion_critical_values() {
  Timer timer;
  auto c999 = pointwise::critical_value(0.999, 0.05);
  const bool limb1 = std::fabs(c999.c_hat - 1.960) <= 0.015;

  // Delta-dominant regime: solve P(c, large Delta, rho=0) = 0.95 in c
  pointwise::CoverageConfig closed;
  closed.evaluator = pointwise::ProbEvaluator::kClosedForm;
  double lo = 1.2, hi = 2.2;
  for (int it = 0; it < 40; ++it) {
    const double c = 0.5 * (lo + hi);
    (pointwise::coverage_prob(c, 25.0, 0.0, 0.05, closed) < 0.95 ? lo : hi) = c;
  }
  const double one_sided = 0.5 * (lo + hi);
  const bool limb2 = std::fabs(one_sided - 1.645) <= 0.015;

  const double z_lo = hb::math::norm_quantile(0.95);
  const double z_hi = hb::math::norm_quantile(0.975);
  bool bracket = true;
  for (int k = 0; k < 21; ++k) {
    const double rho = -0.99 + 1.98 * k / 20.0;
    auto cv = pointwise::critical_value(rho, 0.05);
    if (cv.c_hat < z_lo - 2e-3 || cv.c_hat > z_hi + 2e-3) bracket = false;
  }
  std::ostringstream ss;
  ss << "c_hat(0.999) = " << c999.c_hat << " (criterion expects 1.960 +- 0.015)"
     << ", one-sided solve = " << one_sided << ", bracket on 21-point lattice = "
     << (bracket ? "holds" : "VIOLATED");
  report(4, "critical-value limits", limb1 && limb2 && bracket, ss.str(), timer.seconds());
  if (!limb1 && limb2 && bracket) {
    std::printf(
        "       note: the exact solution of the printed calibration gives c*(rho): "
        "0.99->1.809, 0.999->1.901, 0.9999->1.939, 0.99999->1.952; the pseudo-true band "
        "holds probability 1-alpha at Delta=0 for every rho, so the two-sided limit is "
        "approached only as rho -> 1 exactly. The interval itself still collapses to the "
        "two-sided one under point identification (unit-tested). See the decisions ledger.\n");
  }
}

// 5. Pointwise coverage at n=2000 (all z in [0.92, 1]) and n=400 (min >= 0.88).
void criterion_coverage() {
  Timer timer;
  std::vector<double> z_eval;
  for (int i = 1; i <= 9; ++i) z_eval.push_back(i / 10.0);

  studies::StudyConfig sc;
  sc.roy.p = 10;
  sc.roy.n = 2000;
  sc.reps = 500;
  sc.seed = 31415;
  sc.estimate.folds = 2;
  sc.estimate.alpha = 0.05;
  auto big = studies::run_coverage_study(sc, z_eval);
  double min_cov_2000 = 1.0;
  for (const auto& row : big.rows) min_cov_2000 = std::min(min_cov_2000, row.coverage);

  sc.roy.n = 400;
  sc.seed = 27182;
  auto small = studies::run_coverage_study(sc, z_eval);
  double min_cov_400 = 1.0;
  for (const auto& row : small.rows) min_cov_400 = std::min(min_cov_400, row.coverage);

  std::ostringstream ss;
  ss << "min coverage n=2000: " << min_cov_2000 << " (need >= 0.92), n=400: " << min_cov_400
     << " (need >= 0.88)";
  report(5, "pointwise coverage", min_cov_2000 >= 0.92 && min_cov_400 >= 0.88, ss.str(),
         timer.seconds());
}

// 6. Power: size at truth <= 0.08, power >= 0.95 at +-0.5, z1 >= z0 at 0.2.
void criterion_power() {
  Timer timer;
  studies::StudyConfig sc;
  sc.roy.p = 10;
  sc.roy.n = 2000;
  sc.reps = 400;
  sc.seed = 161803;
  sc.estimate.folds = 2;
  sc.estimate.alpha = 0.05;
  auto res = studies::run_power_study(sc, {-0.5, -0.2, 0.0, 0.2, 0.5});
  auto find = [&](double dev) {
    for (const auto& row : res.rows) {
      if (std::fabs(row.deviation - dev) < 1e-9) return row;
    }
    return studies::PowerRow{};
  };
  const auto at0 = find(0.0);
  const auto at_neg = find(-0.5);
  const auto at_pos = find(0.5);
  const auto at_02 = find(0.2);
  const bool size_ok = at0.reject_z0 <= 0.08 && at0.reject_z1 <= 0.08;
  const bool power_ok = std::min({at_neg.reject_z0, at_neg.reject_z1, at_pos.reject_z0,
                                  at_pos.reject_z1}) >= 0.95;
  const bool order_ok = at_02.reject_z1 >= at_02.reject_z0;
  std::ostringstream ss;
  ss << "size (z0, z1) = (" << at0.reject_z0 << ", " << at0.reject_z1 << "), power at +-0.5 >= "
     << std::min({at_neg.reject_z0, at_neg.reject_z1, at_pos.reject_z0, at_pos.reject_z1})
     << ", at dev 0.2: z1 " << at_02.reject_z1 << " vs z0 " << at_02.reject_z0;
  report(6, "power", size_ok && power_ok && order_ok, ss.str(), timer.seconds());
}

// 7. Uniform bands: simultaneous coverage >= 0.86 at nominal 0.90 plus the
// h == 1 reproduction identity.
void criterion_uniform_bands() {
  Timer timer;
  studies::StudyConfig sc;
  sc.roy.p = 10;
  sc.roy.n = 2000;
  sc.reps = 300;
  sc.seed = 571428;
  sc.estimate.folds = 2;
  sc.estimate.alpha = 0.10;
  sc.estimate.bootstrap_reps = 1000;
  sc.estimate.grid_points = 101;
  auto res = studies::run_uniform_coverage_study(sc);

  // h == 1 reproduces the point estimates exactly
  roy::RoyConfig rc;
  rc.n = 1500;
  rc.p = 4;
  rc.seed = 12;
  auto table = roy::simulate(rc);
  auto nu = roy::analytic_nuisances(rc, table, nuisance::default_quantile_grid());
  scores::ScoreConfig scfg;
  auto cells = scores::classify_cells(nu);
  auto lv = scores::trimming_levels(cells, nu, scfg);
  auto psi = scores::compute_scores(table, nu, cells, lv, scfg);
  Eigen::MatrixXd z = table.x.col(0);
  series::BasisSpec cubic;
  cubic.kind = series::BasisSpec::Kind::kBSpline;
  cubic.order = 4;
  cubic.interior_knots = 2;
  auto basis = series::build_basis(z, cubic);
  auto curve = series::project(z, psi, basis, basis);
  auto fit = bands::bootstrap_fit(psi, basis.design(z), basis.design(z),
                                  Eigen::VectorXd::Ones(table.n()));
  const double unit_dev = std::max((fit.beta_L - curve.beta_L()).lpNorm<Eigen::Infinity>(),
                                   (fit.beta_U - curve.beta_U()).lpNorm<Eigen::Infinity>());

  std::ostringstream ss;
  ss << "simultaneous coverage = " << res.simultaneous_coverage << " (need >= 0.86), h=1 max "
     << "coefficient deviation = " << unit_dev;
  report(7, "uniform bands", res.simultaneous_coverage >= 0.86 && unit_dev < 1e-10, ss.str(),
         timer.seconds());
}

// 8. Determinism: identical runs produce byte-identical CSV outputs.
std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void criterion_determinism() {
  Timer timer;
  roy::RoyConfig rc;
  rc.n = 1200;
  rc.p = 4;
  rc.seed = 321;
  auto table = roy::simulate(rc);
  pipeline::EstimateConfig ec;
  ec.folds = 2;
  ec.seed = 99;
  ec.grid_points = 25;
  ec.bootstrap_reps = 200;
  bool same = true;
  std::string first_curves, first_intervals, first_bands;
  for (int run = 0; run < 2; ++run) {
    auto res = pipeline::estimate(table, first_column_het(), ec);
    const std::string dir = "/tmp/hb_accept_run" + std::to_string(run);
    std::string c = dir + "_curves.csv";
    std::string i = dir + "_intervals.csv";
    std::string b = dir + "_bands.csv";
    io::write_curves_csv(c, res);
    io::write_intervals_csv(i, res);
    io::write_bands_csv(b, res);
    if (run == 0) {
      first_curves = slurp(c);
      first_intervals = slurp(i);
      first_bands = slurp(b);
    } else {
      same = slurp(c) == first_curves && slurp(i) == first_intervals && slurp(b) == first_bands;
    }
  }
  // a fresh simulation from the same config is also identical
  auto table2 = roy::simulate(rc);
  bool sim_same = (table2.x - table.x).lpNorm<Eigen::Infinity>() == 0.0 &&
                  (table2.d_treat - table.d_treat).lpNorm<Eigen::Infinity>() == 0;
  std::ostringstream ss;
  ss << "estimate outputs byte-identical = " << (same ? "yes" : "NO")
     << ", resimulation identical = " << (sim_same ? "yes" : "NO");
  report(8, "determinism", same && sim_same, ss.str(), timer.seconds());
}

}  // namespace

int main(int argc, char** argv) {
  // run everything by default; a single numeric argument selects one
  // criterion so ctest can report them separately
  int which = 0;
  if (argc > 1) which = std::atoi(argv[1]);
  auto want = [&](int k) { return which == 0 || which == k; };
  if (want(1)) criterion_collapse();
  if (want(2)) criterion_orthogonality();
  if (want(3)) criterion_oracle();
  if (want(4)) criterion_critical_values();
  if (want(5)) criterion_coverage();
  if (want(6)) criterion_power();
  if (want(7)) criterion_uniform_bands();
  if (want(8)) criterion_determinism();
  if (failures > 0) {
    std::printf("%d criterion(s) failed\n", failures);
    return 1;
  }
  std::printf("all selected criteria passed\n");
  return 0;
}
