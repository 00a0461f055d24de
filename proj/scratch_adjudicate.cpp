// Scratch adjudication of score forms, not part of the build.
#include <cstdio>

#include "hetbounds/roy.hpp"
#include "hetbounds/scores.hpp"

using namespace hb;

int main() {
  roy::RoyConfig cfg;
  cfg.n = 50000;
  cfg.p = 3;
  cfg.seed = 99;

  for (double e : {0.5, 0.3}) {
    cfg.treat_prob = e;
    auto table = roy::simulate(cfg);
    auto nu = roy::analytic_nuisances(cfg, table, nuisance::default_quantile_grid());

    std::printf("==== e = %.2f ====\n", e);
    for (auto form : {scores::ScoreForm::kPointwise, scores::ScoreForm::kAppendix,
                      scores::ScoreForm::kStarOnly}) {
      for (auto alpha_u : {scores::AlphaUDenominator::kSymmetric,
                           scores::AlphaUDenominator::kAsPrinted}) {
        if (form != scores::ScoreForm::kAppendix &&
            alpha_u == scores::AlphaUDenominator::kAsPrinted)
          continue;
        scores::ScoreConfig sc;
        sc.form = form;
        sc.alpha_u = alpha_u;
        sc.round_levels = false;
        const char* fname = form == scores::ScoreForm::kPointwise  ? "pointwise"
                            : form == scores::ScoreForm::kAppendix ? "appendix "
                                                                   : "star-only";
        const char* aname = alpha_u == scores::AlphaUDenominator::kSymmetric ? "sym" : "prt";
        for (auto target :
             {scores::PerturbTarget::kS0, scores::PerturbTarget::kS1, scores::PerturbTarget::kQ}) {
          const char* tname = target == scores::PerturbTarget::kS0   ? "s0"
                              : target == scores::PerturbTarget::kS1 ? "s1"
                                                                     : "q ";
          std::printf("%s/%s d%s: ", fname, aname, tname);
          for (double t : {1.0, 0.5, 0.25}) {
            auto r = scores::orthogonality_check(table, nu, target, 0.05, t, sc);
            std::printf(" t=%.2f L=%+.5f U=%+.5f |", t, r.derivative_L, r.derivative_U);
          }
          std::printf("\n");
        }
      }
    }
  }

  // estimand check: true-eta scores binned on z vs oracle bounds
  cfg.treat_prob = 0.5;
  cfg.n = 400000;
  auto table = roy::simulate(cfg);
  auto nu = roy::analytic_nuisances(cfg, table, nuisance::default_quantile_grid());
  std::vector<double> zg{0.05, 0.25, 0.5, 0.75, 0.95};
  auto oracle = roy::oracle_bounds(zg, cfg, 4000000);
  for (auto form : {scores::ScoreForm::kPointwise, scores::ScoreForm::kAppendix}) {
    scores::ScoreConfig sc;
    sc.form = form;
    auto cells = scores::classify_cells(nu);
    auto levels = scores::trimming_levels(cells, nu, sc);
    auto sv = scores::compute_scores(table, nu, cells, levels, sc);
    std::printf("==== estimand, %s ====\n",
                form == scores::ScoreForm::kPointwise ? "pointwise" : "appendix");
    for (std::size_t k = 0; k < zg.size(); ++k) {
      double lo = zg[k] - 0.02, hi = zg[k] + 0.02;
      double accL = 0, accU = 0;
      int cnt = 0;
      for (Eigen::Index i = 0; i < table.n(); ++i) {
        double z = table.x(i, 0);
        if (z >= lo && z <= hi) {
          accL += sv.psi_L[i];
          accU += sv.psi_U[i];
          ++cnt;
        }
      }
      std::printf(
          "z=%.2f  E_n[psi]=[%+.4f,%+.4f]  oracle=[%+.4f,%+.4f]  theta=%+.4f  (bin n=%d)\n",
          zg[k], accL / cnt, accU / cnt, oracle.lower[k], oracle.upper[k],
          roy::true_theta(zg[k], cfg), cnt);
    }
  }
  return 0;
}
