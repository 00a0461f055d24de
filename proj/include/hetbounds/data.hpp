#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "hetbounds/error.hpp"

namespace hb::data {

enum class ColumnKind { kContinuous, kCategorical };

// The sample {(X_i, D_i, S_i, Y_i*S_i)} with known design propensities.
// Immutable after construction; shared freely across workers.
struct ObservationTable {
  Eigen::MatrixXd x;          // n x d, dummy-coded categoricals
  Eigen::VectorXi d_treat;    // {0,1}
  Eigen::VectorXi s_select;   // {0,1}
  Eigen::VectorXd y_obs;      // meaningful only where s_select == 1
  Eigen::VectorXd propensity; // e(X_i), inside [eps_e, 1-eps_e]
  std::vector<std::string> column_names;

  Eigen::Index n() const { return d_treat.size(); }
  Eigen::Index dim() const { return x.cols(); }

  // Throws hb::Error("core_data", ...) on any invariant violation.
  void validate(double eps_e = 0.01) const;
};

// Column indices of X defining Z_i = f(X_i).
struct HeterogeneitySpec {
  std::vector<int> columns;
  std::vector<ColumnKind> kinds;

  void validate(Eigen::Index d) const;
  Eigen::MatrixXd extract(const ObservationTable& table) const;
};

struct FoldAssignment {
  int k = 0;
  std::vector<int> fold_of;  // values in [0, k)
  std::uint64_t seed = 0;

  std::vector<std::vector<int>> fold_indices() const;
  std::vector<int> complement_of(int fold) const;
};

// Deterministic balanced folds: a function of (seed, n, k) only.
FoldAssignment make_folds(Eigen::Index n, int k, std::uint64_t seed);

struct CsvSchema {
  std::string treatment;
  std::string selection;
  std::string outcome;
  // exactly one of the two propensity sources must be set
  std::optional<std::string> propensity_column;
  std::optional<double> propensity_value;
  std::vector<std::string> covariates;
  std::vector<ColumnKind> covariate_kinds;
  char delimiter = ',';
};

// Reads a headered CSV, expands categoricals into one dummy column per
// observed level (levels sorted lexicographically), and validates.
// Rows with missing covariates are rejected with the row index reported.
ObservationTable load_csv(const std::string& path, const CsvSchema& schema,
                          double eps_e = 0.01);

// Canonical emission; reloading the output round-trips bit-identically.
void write_csv(const std::string& path, const ObservationTable& table);
ObservationTable read_emitted_csv(const std::string& path, double eps_e = 0.01);

}  // namespace hb::data
