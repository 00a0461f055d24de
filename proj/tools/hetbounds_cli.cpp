#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "hetbounds/error.hpp"
#include "hetbounds/pipeline.hpp"
#include "hetbounds/io.hpp"
#include "hetbounds/studies.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

hb::data::CsvSchema parse_schema(const json& j) {
  hb::data::CsvSchema schema;
  schema.treatment = j.at("treatment").get<std::string>();
  schema.selection = j.at("selection").get<std::string>();
  schema.outcome = j.at("outcome").get<std::string>();
  if (j.contains("propensity")) schema.propensity_column = j["propensity"].get<std::string>();
  if (j.contains("propensity_value")) schema.propensity_value = j["propensity_value"].get<double>();
  if (j.contains("delimiter")) schema.delimiter = j["delimiter"].get<std::string>().at(0);
  for (const auto& cov : j.at("covariates")) {
    schema.covariates.push_back(cov.at("name").get<std::string>());
    const std::string kind = cov.value("kind", "continuous");
    schema.covariate_kinds.push_back(kind == "categorical"
                                         ? hb::data::ColumnKind::kCategorical
                                         : hb::data::ColumnKind::kContinuous);
  }
  return schema;
}

hb::series::BasisSpec parse_basis(const json& j) {
  hb::series::BasisSpec spec;
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "constant") {
    spec.kind = hb::series::BasisSpec::Kind::kConstant;
  } else if (kind == "bspline") {
    spec.kind = hb::series::BasisSpec::Kind::kBSpline;
    spec.order = j.value("order", 4);
    spec.interior_knots = j.value("interior_knots", 0);
  } else if (kind == "indicator") {
    spec.kind = hb::series::BasisSpec::Kind::kIndicator;
  } else if (kind == "bins") {
    spec.kind = hb::series::BasisSpec::Kind::kIndicatorBins;
    spec.bin_edges = j.at("edges").get<std::vector<double>>();
  } else {
    throw hb::Error("cli", "unknown basis kind '" + kind + "'");
  }
  return spec;
}

json basis_to_json(const hb::series::BasisSpec& spec) {
  json j;
  switch (spec.kind) {
    case hb::series::BasisSpec::Kind::kConstant:
      j["kind"] = "constant";
      break;
    case hb::series::BasisSpec::Kind::kBSpline:
      j["kind"] = "bspline";
      j["order"] = spec.order;
      j["interior_knots"] = spec.interior_knots;
      break;
    case hb::series::BasisSpec::Kind::kIndicator:
      j["kind"] = "indicator";
      break;
    case hb::series::BasisSpec::Kind::kIndicatorBins:
      j["kind"] = "bins";
      j["edges"] = spec.bin_edges;
      break;
  }
  return j;
}

void parse_learners(const json& j, hb::nuisance::LearnerConfig& lc) {
  if (j.contains("selection")) {
    const std::string s = j["selection"].get<std::string>();
    if (s == "logistic") {
      lc.selection = hb::nuisance::SelectionLearner::kLogistic;
    } else if (s == "probability_forest") {
      lc.selection = hb::nuisance::SelectionLearner::kProbabilityForest;
    } else {
      throw hb::Error("cli", "unknown selection learner '" + s + "'");
    }
  }
  if (j.contains("quantile")) {
    const std::string s = j["quantile"].get<std::string>();
    if (s == "linear_quantile") {
      lc.quantile = hb::nuisance::QuantileLearner::kLinear;
    } else if (s == "quantile_forest") {
      lc.quantile = hb::nuisance::QuantileLearner::kQuantileForest;
    } else {
      throw hb::Error("cli", "unknown quantile learner '" + s + "'");
    }
  }
  if (j.contains("forest")) {
    const auto& f = j["forest"];
    lc.forest.trees = f.value("trees", lc.forest.trees);
    lc.forest.honesty = f.value("honesty", lc.forest.honesty);
    lc.forest.honesty_fraction = f.value("honesty_fraction", lc.forest.honesty_fraction);
    lc.forest.subsample_fraction = f.value("subsample_fraction", lc.forest.subsample_fraction);
    lc.forest.min_leaf = f.value("min_leaf", lc.forest.min_leaf);
    lc.forest.mtry = f.value("mtry", lc.forest.mtry);
    lc.forest.seed = f.value("seed", lc.forest.seed);
  }
  lc.logistic_ridge_scale = j.value("logistic_ridge_scale", lc.logistic_ridge_scale);
  lc.eps_s = j.value("eps_s", lc.eps_s);
}

void parse_score(const json& j, hb::scores::ScoreConfig& sc) {
  if (j.contains("form")) {
    const std::string s = j["form"].get<std::string>();
    if (s == "pointwise") {
      sc.form = hb::scores::ScoreForm::kPointwise;
    } else if (s == "appendix") {
      sc.form = hb::scores::ScoreForm::kAppendix;
    } else if (s == "star_only") {
      sc.form = hb::scores::ScoreForm::kStarOnly;
    } else {
      throw hb::Error("cli", "unknown score form '" + s + "'");
    }
  }
  if (j.contains("alpha_u_denominator")) {
    const std::string s = j["alpha_u_denominator"].get<std::string>();
    sc.alpha_u = s == "as_printed" ? hb::scores::AlphaUDenominator::kAsPrinted
                                   : hb::scores::AlphaUDenominator::kSymmetric;
  }
  sc.round_levels = j.value("round_levels", sc.round_levels);
}

void parse_inference(const json& j, hb::pipeline::EstimateConfig& ec) {
  ec.alpha = j.value("alpha", ec.alpha);
  if (j.contains("event_form")) {
    ec.coverage.event = j["event_form"].get<std::string>() == "verbatim"
                            ? hb::pointwise::EventForm::kVerbatim
                            : hb::pointwise::EventForm::kSymmetric;
  }
  if (j.contains("evaluator")) {
    ec.coverage.evaluator = j["evaluator"].get<std::string>() == "closed_form"
                                ? hb::pointwise::ProbEvaluator::kClosedForm
                                : hb::pointwise::ProbEvaluator::kQmc;
  }
}

struct CliOverrides {
  std::optional<double> alpha;
  std::optional<int> folds;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::optional<int> grid;
  std::optional<int> bootstrap_reps;
  std::optional<std::string> out;
};

struct LoadedConfig {
  json raw;
  hb::pipeline::EstimateConfig estimate;
  hb::roy::RoyConfig roy;
  int study_reps = 500;
  std::vector<double> study_z_eval;
  std::vector<double> study_deviations;
  double rep_failure_cap = 0.02;
  std::uint64_t study_seed = 2024;
  std::string out_dir = "out";
  int threads = 0;
};

LoadedConfig load_config(const std::string& path, const CliOverrides& ov) {
  LoadedConfig lc;
  if (!path.empty()) {
    std::ifstream in(path);
    if (!in) throw hb::Error("cli", "cannot open config " + path);
    in >> lc.raw;
  }
  const json& j = lc.raw;
  if (j.contains("learners")) parse_learners(j["learners"], lc.estimate.learner);
  if (j.contains("score")) parse_score(j["score"], lc.estimate.score);
  if (j.contains("inference")) parse_inference(j["inference"], lc.estimate);
  if (j.contains("basis")) {
    const auto& b = j["basis"];
    lc.estimate.basis.share = b.value("share", false);
    if (b.contains("candidates")) {
      lc.estimate.basis.candidates.clear();
      for (const auto& c : b["candidates"]) lc.estimate.basis.candidates.push_back(parse_basis(c));
    }
  }
  lc.estimate.folds = j.value("folds", lc.estimate.folds);
  lc.estimate.seed = j.value("seed", lc.estimate.seed);
  lc.estimate.bootstrap_reps = j.value("bootstrap_reps", lc.estimate.bootstrap_reps);
  lc.threads = j.value("threads", 0);
  if (j.contains("grid")) {
    lc.estimate.grid_points = j["grid"].value("points", lc.estimate.grid_points);
    if (j["grid"].contains("z_eval")) {
      lc.estimate.z_eval = j["grid"]["z_eval"].get<std::vector<double>>();
    }
  }
  lc.out_dir = j.value("out", lc.out_dir);
  if (j.contains("roy")) {
    const auto& r = j["roy"];
    lc.roy.n = r.value("n", static_cast<long long>(lc.roy.n));
    lc.roy.p = r.value("p", lc.roy.p);
    lc.roy.sigma1 = r.value("sigma1", lc.roy.sigma1);
    lc.roy.sigma0 = r.value("sigma0", lc.roy.sigma0);
    lc.roy.rho_cov = r.value("rho_cov", lc.roy.rho_cov);
    lc.roy.treat_prob = r.value("treat_prob", lc.roy.treat_prob);
    lc.roy.gamma1 = r.value("gamma1", lc.roy.gamma1);
    lc.roy.seed = r.value("seed", lc.roy.seed);
  }
  if (j.contains("study")) {
    const auto& s = j["study"];
    lc.study_reps = s.value("reps", lc.study_reps);
    lc.rep_failure_cap = s.value("rep_failure_cap", lc.rep_failure_cap);
    lc.study_seed = s.value("seed", lc.study_seed);
    if (s.contains("z_eval")) lc.study_z_eval = s["z_eval"].get<std::vector<double>>();
    if (s.contains("deviations")) lc.study_deviations = s["deviations"].get<std::vector<double>>();
  }
  if (ov.alpha) lc.estimate.alpha = *ov.alpha;
  if (ov.folds) lc.estimate.folds = *ov.folds;
  if (ov.seed) {
    lc.estimate.seed = *ov.seed;
    lc.roy.seed = *ov.seed;
    lc.study_seed = *ov.seed;
  }
  if (ov.threads) lc.threads = *ov.threads;
  if (ov.grid) lc.estimate.grid_points = *ov.grid;
  if (ov.bootstrap_reps) lc.estimate.bootstrap_reps = *ov.bootstrap_reps;
  if (ov.out) lc.out_dir = *ov.out;
  lc.estimate.threads = lc.threads;
  return lc;
}

json resolved_config_json(const LoadedConfig& lc) {
  json j;
  j["alpha"] = lc.estimate.alpha;
  j["folds"] = lc.estimate.folds;
  j["seed"] = lc.estimate.seed;
  j["threads"] = lc.threads;
  j["bootstrap_reps"] = lc.estimate.bootstrap_reps;
  j["grid_points"] = lc.estimate.grid_points;
  if (!lc.estimate.z_eval.empty()) j["z_eval"] = lc.estimate.z_eval;
  j["score"] = {
      {"form", lc.estimate.score.form == hb::scores::ScoreForm::kPointwise    ? "pointwise"
               : lc.estimate.score.form == hb::scores::ScoreForm::kAppendix ? "appendix"
                                                                            : "star_only"},
      {"alpha_u_denominator",
       lc.estimate.score.alpha_u == hb::scores::AlphaUDenominator::kSymmetric ? "symmetric"
                                                                              : "as_printed"},
      {"round_levels", lc.estimate.score.round_levels}};
  j["learners"] = {
      {"selection",
       lc.estimate.learner.selection == hb::nuisance::SelectionLearner::kLogistic
           ? "logistic"
           : "probability_forest"},
      {"quantile", lc.estimate.learner.quantile == hb::nuisance::QuantileLearner::kLinear
                       ? "linear_quantile"
                       : "quantile_forest"},
      {"logistic_ridge_scale", lc.estimate.learner.logistic_ridge_scale},
      {"eps_s", lc.estimate.learner.eps_s},
      {"forest",
       {{"trees", lc.estimate.learner.forest.trees},
        {"honesty", lc.estimate.learner.forest.honesty},
        {"honesty_fraction", lc.estimate.learner.forest.honesty_fraction},
        {"subsample_fraction", lc.estimate.learner.forest.subsample_fraction},
        {"min_leaf", lc.estimate.learner.forest.min_leaf},
        {"mtry", lc.estimate.learner.forest.mtry},
        {"seed", lc.estimate.learner.forest.seed}}}};
  json cands = json::array();
  for (const auto& c : lc.estimate.basis.candidates) cands.push_back(basis_to_json(c));
  j["basis"] = {{"share", lc.estimate.basis.share}, {"candidates", cands}};
  j["inference"] = {
      {"event_form", lc.estimate.coverage.event == hb::pointwise::EventForm::kSymmetric
                         ? "symmetric"
                         : "verbatim"},
      {"evaluator", lc.estimate.coverage.evaluator == hb::pointwise::ProbEvaluator::kQmc
                        ? "qmc"
                        : "closed_form"}};
  j["roy"] = {{"n", static_cast<long long>(lc.roy.n)},
              {"p", lc.roy.p},
              {"sigma1", lc.roy.sigma1},
              {"sigma0", lc.roy.sigma0},
              {"rho_cov", lc.roy.rho_cov},
              {"treat_prob", lc.roy.treat_prob},
              {"gamma1", lc.roy.gamma()},
              {"seed", lc.roy.seed}};
  j["study"] = {{"reps", lc.study_reps},
                {"seed", lc.study_seed},
                {"rep_failure_cap", lc.rep_failure_cap}};
  j["out"] = lc.out_dir;
  return j;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw hb::Error("cli", "cannot write " + path.string());
  out << text;
}

void write_manifest(const fs::path& dir, const std::string& command, const LoadedConfig& lc,
                    const std::vector<std::string>& outputs, const json& extra) {
  json m;
  m["command"] = command;
  m["config"] = resolved_config_json(lc);
  m["outputs"] = outputs;
  if (!extra.is_null()) m["diagnostics"] = extra;
  write_text(dir / "manifest.json", m.dump(2) + "\n");
}

int cmd_estimate(const LoadedConfig& lc) {
  const json& j = lc.raw;
  if (!j.contains("data")) throw hb::Error("cli", "estimate requires a 'data' config block");
  const auto& dj = j["data"];
  auto schema = parse_schema(dj.at("schema"));
  auto table = hb::data::load_csv(dj.at("path").get<std::string>(), schema);

  if (!j.contains("heterogeneity")) {
    throw hb::Error("cli", "estimate requires a 'heterogeneity' config block");
  }
  hb::pipeline::ZData zd;
  const auto& hj = j["heterogeneity"];
  std::vector<std::string> names;
  std::vector<bool> cat;
  for (const auto& h : hj) {
    names.push_back(h.at("name").get<std::string>());
    cat.push_back(h.value("kind", "continuous") == "categorical");
  }
  zd.categorical = names.size() == 1 && cat[0];
  zd.z.resize(table.n(), static_cast<Eigen::Index>(names.size()));
  for (std::size_t c = 0; c < names.size(); ++c) {
    // continuous: the expanded column of the same name; categorical: code
    // from the dummy block emitted by the loader
    if (!cat[c]) {
      auto it = std::find(table.column_names.begin(), table.column_names.end(), names[c]);
      if (it == table.column_names.end()) {
        throw hb::Error("cli", "heterogeneity column '" + names[c] + "' not found");
      }
      zd.z.col(static_cast<Eigen::Index>(c)) =
          table.x.col(it - table.column_names.begin());
    } else {
      const std::string prefix = names[c] + "=";
      std::vector<Eigen::Index> block;
      for (std::size_t k = 0; k < table.column_names.size(); ++k) {
        if (table.column_names[k].rfind(prefix, 0) == 0) {
          block.push_back(static_cast<Eigen::Index>(k));
        }
      }
      if (block.empty()) {
        throw hb::Error("cli", "no dummy columns found for categorical '" + names[c] + "'");
      }
      for (Eigen::Index i = 0; i < table.n(); ++i) {
        double code = 0.0;
        for (std::size_t b = 0; b < block.size(); ++b) {
          if (table.x(i, block[b]) > 0.5) code = static_cast<double>(b);
        }
        zd.z(i, static_cast<Eigen::Index>(c)) = code;
      }
    }
  }

  auto res = hb::pipeline::estimate(table, zd, lc.estimate);

  fs::create_directories(lc.out_dir);
  const fs::path dir(lc.out_dir);
  hb::io::write_curves_csv((dir / "curves.csv").string(), res);
  hb::io::write_intervals_csv((dir / "intervals.csv").string(), res);
  std::vector<std::string> outputs{"curves.csv", "intervals.csv", "scores.csv"};
  hb::scores::export_scores_csv((dir / "scores.csv").string(), res.scores, res.cells, res.levels);
  if (!res.band_rows.empty()) {
    hb::io::write_bands_csv((dir / "bands.csv").string(), res);
    outputs.push_back("bands.csv");
  }
  json diag;
  diag["n"] = static_cast<long long>(res.n);
  diag["learner_tag"] = res.learner_tag;
  diag["basis_L"] = basis_to_json(res.basis_L);
  diag["basis_U"] = basis_to_json(res.basis_U);
  diag["cells"] = {{"n_plus", static_cast<long long>(res.cells.n_plus)},
                   {"n_minus", static_cast<long long>(res.cells.n_minus)},
                   {"ties", static_cast<long long>(res.cells.ties)}};
  diag["bootstrap_discarded"] = res.bootstrap_discarded;
  // unconditional one-row summary (constant-basis collapse)
  diag["unconditional"] = {{"psi_L_mean", res.scores.psi_L.mean()},
                           {"psi_U_mean", res.scores.psi_U.mean()}};
  write_manifest(dir, "estimate", lc, outputs, diag);
  std::cout << "estimate: wrote " << outputs.size() + 1 << " files to " << lc.out_dir << "\n";
  return 0;
}

int cmd_simulate(const LoadedConfig& lc) {
  auto table = hb::roy::simulate(lc.roy);
  fs::create_directories(lc.out_dir);
  const fs::path dir(lc.out_dir);
  hb::data::write_csv((dir / "data.csv").string(), table);
  {
    std::ofstream out(dir / "truth.csv");
    out << "z,theta,s0,s1,p0\n";
    for (int i = 0; i <= 100; ++i) {
      const double z = i / 100.0;
      out << fmt(z) << ',' << fmt(hb::roy::true_theta(z, lc.roy)) << ','
          << fmt(hb::roy::true_selection(lc.roy, 0, z)) << ','
          << fmt(hb::roy::true_selection(lc.roy, 1, z)) << ','
          << fmt(hb::roy::true_p0(lc.roy, z)) << '\n';
    }
  }
  write_manifest(dir, "simulate", lc, {"data.csv", "truth.csv"}, json());
  std::cout << "simulate: wrote data.csv (n=" << table.n() << ") to " << lc.out_dir << "\n";
  return 0;
}

hb::studies::StudyConfig study_config(const LoadedConfig& lc) {
  hb::studies::StudyConfig sc;
  sc.roy = lc.roy;
  sc.estimate = lc.estimate;
  sc.reps = lc.study_reps;
  sc.seed = lc.study_seed;
  sc.threads = lc.threads;
  sc.rep_failure_cap = lc.rep_failure_cap;
  if (sc.reps <= 0) throw hb::Error("cli", "study reps must be positive");
  return sc;
}

int cmd_coverage(const LoadedConfig& lc) {
  auto sc = study_config(lc);
  std::vector<double> z_eval = lc.study_z_eval;
  if (z_eval.empty()) {
    for (int i = 1; i <= 9; ++i) z_eval.push_back(i / 10.0);
  }
  auto res = hb::studies::run_coverage_study(sc, z_eval);
  fs::create_directories(lc.out_dir);
  const fs::path dir(lc.out_dir);
  hb::io::write_coverage_csv((dir / "coverage.csv").string(), res);
  json diag;
  diag["failures"] = res.failures;
  write_manifest(dir, "coverage", lc, {"coverage.csv"}, diag);
  std::cout << "coverage: wrote coverage.csv (" << res.rows.size() << " rows) to " << lc.out_dir
            << "\n";
  return 0;
}

int cmd_power(const LoadedConfig& lc) {
  auto sc = study_config(lc);
  std::vector<double> deviations = lc.study_deviations;
  if (deviations.empty()) {
    for (int i = -10; i <= 10; ++i) deviations.push_back(i * 0.05);
  }
  auto res = hb::studies::run_power_study(sc, deviations);
  fs::create_directories(lc.out_dir);
  const fs::path dir(lc.out_dir);
  hb::io::write_power_csv((dir / "power.csv").string(), res);
  json diag;
  diag["failures"] = res.failures;
  diag["theta_z0"] = res.theta_z0;
  diag["theta_z1"] = res.theta_z1;
  write_manifest(dir, "power", lc, {"power.csv"}, diag);
  std::cout << "power: wrote power.csv (" << res.rows.size() << " rows) to " << lc.out_dir
            << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Heterogeneous treatment-effect bounds under sample selection"};
  app.require_subcommand(1);

  std::string config_path;
  CliOverrides ov;
  app.add_option("--config", config_path, "JSON config file");
  double alpha;
  auto* alpha_opt = app.add_option("--alpha", alpha, "confidence level alpha");
  int folds;
  auto* folds_opt = app.add_option("--folds", folds, "cross-fitting fold count");
  std::uint64_t seed;
  auto* seed_opt = app.add_option("--seed", seed, "master RNG seed");
  int threads;
  auto* threads_opt = app.add_option("--threads", threads, "worker thread cap");
  int grid;
  auto* grid_opt = app.add_option("--grid", grid, "evaluation grid points");
  int breps;
  auto* breps_opt = app.add_option("--bootstrap-reps", breps, "multiplier bootstrap reps");
  std::string out_dir;
  auto* out_opt = app.add_option("--out", out_dir, "output directory");

  auto* est = app.add_subcommand("estimate", "estimate bounds from a CSV");
  auto* sim = app.add_subcommand("simulate", "simulate the generalized Roy model");
  auto* cov = app.add_subcommand("coverage", "pointwise coverage study");
  auto* pow = app.add_subcommand("power", "power study on two z strata");

  CLI11_PARSE(app, argc, argv);
  if (*alpha_opt) ov.alpha = alpha;
  if (*folds_opt) ov.folds = folds;
  if (*seed_opt) ov.seed = seed;
  if (*threads_opt) ov.threads = threads;
  if (*grid_opt) ov.grid = grid;
  if (*breps_opt) ov.bootstrap_reps = breps;
  if (*out_opt) ov.out = out_dir;

  try {
    LoadedConfig lc = load_config(config_path, ov);
    if (est->parsed()) return cmd_estimate(lc);
    if (sim->parsed()) return cmd_simulate(lc);
    if (cov->parsed()) return cmd_coverage(lc);
    if (pow->parsed()) return cmd_power(lc);
  } catch (const hb::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: cli: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
