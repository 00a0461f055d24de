#include "hetbounds/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include "hetbounds/math.hpp"

namespace hb::data {

namespace {
const char* kModule = "core_data";
}

void ObservationTable::validate(double eps_e) const {
  const Eigen::Index nn = d_treat.size();
  if (s_select.size() != nn || y_obs.size() != nn || propensity.size() != nn ||
      x.rows() != nn) {
    throw Error(kModule, "inconsistent column lengths");
  }
  if (static_cast<Eigen::Index>(column_names.size()) != x.cols()) {
    throw Error(kModule, "column name count does not match covariate count");
  }
  for (Eigen::Index i = 0; i < nn; ++i) {
    if (d_treat[i] != 0 && d_treat[i] != 1) {
      throw Error(kModule, "treatment outside {0,1} at row " + std::to_string(i));
    }
    if (s_select[i] != 0 && s_select[i] != 1) {
      throw Error(kModule, "selection outside {0,1} at row " + std::to_string(i));
    }
    double e = propensity[i];
    if (!(e >= eps_e && e <= 1.0 - eps_e)) {
      throw Error(kModule, "propensity " + std::to_string(e) + " at row " +
                               std::to_string(i) + " violates overlap floor " +
                               std::to_string(eps_e));
    }
    if (s_select[i] == 1 && !std::isfinite(y_obs[i])) {
      throw Error(kModule, "non-finite outcome for selected row " + std::to_string(i));
    }
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      if (!std::isfinite(x(i, j))) {
        throw Error(kModule, "non-finite covariate at row " + std::to_string(i));
      }
    }
  }
}

void HeterogeneitySpec::validate(Eigen::Index d) const {
  if (columns.empty()) throw Error(kModule, "heterogeneity spec needs at least one column");
  if (kinds.size() != columns.size()) {
    throw Error(kModule, "heterogeneity spec kinds/columns length mismatch");
  }
  for (int c : columns) {
    if (c < 0 || c >= d) {
      throw Error(kModule, "heterogeneity column index " + std::to_string(c) +
                               " out of range for d=" + std::to_string(d));
    }
  }
}

Eigen::MatrixXd HeterogeneitySpec::extract(const ObservationTable& table) const {
  validate(table.dim());
  Eigen::MatrixXd z(table.n(), static_cast<Eigen::Index>(columns.size()));
  for (std::size_t j = 0; j < columns.size(); ++j) {
    z.col(static_cast<Eigen::Index>(j)) = table.x.col(columns[j]);
  }
  return z;
}

std::vector<std::vector<int>> FoldAssignment::fold_indices() const {
  std::vector<std::vector<int>> out(static_cast<std::size_t>(k));
  for (std::size_t i = 0; i < fold_of.size(); ++i) {
    out[static_cast<std::size_t>(fold_of[i])].push_back(static_cast<int>(i));
  }
  return out;
}

std::vector<int> FoldAssignment::complement_of(int fold) const {
  std::vector<int> out;
  out.reserve(fold_of.size());
  for (std::size_t i = 0; i < fold_of.size(); ++i) {
    if (fold_of[i] != fold) out.push_back(static_cast<int>(i));
  }
  return out;
}

FoldAssignment make_folds(Eigen::Index n, int k, std::uint64_t seed) {
  if (k < 2) throw Error(kModule, "fold count must be >= 2");
  if (n < 2 * static_cast<Eigen::Index>(k)) {
    throw Error(kModule, "n=" + std::to_string(n) + " too small for k=" +
                             std::to_string(k) + " folds (need n >= 2k)");
  }
  std::vector<int> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), 0);
  hb::math::Rng rng(seed, /*stream=*/0xf01d5);
  hb::math::shuffle(perm, rng);
  FoldAssignment fa;
  fa.k = k;
  fa.seed = seed;
  fa.fold_of.assign(static_cast<std::size_t>(n), 0);
  for (std::size_t pos = 0; pos < perm.size(); ++pos) {
    fa.fold_of[static_cast<std::size_t>(perm[pos])] = static_cast<int>(pos % k);
  }
  return fa;
}

namespace {

std::vector<std::string> split_line(const std::string& line, char delim) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == delim) {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

bool parse_double(const std::string& s, double& out) {
  if (s.empty()) return false;
  const char* begin = s.data();
  const char* end = begin + s.size();
  auto [ptr, ec] = std::from_chars(begin, end, out);
  return ec == std::errc() && ptr == end;
}

bool is_missing(const std::string& s) {
  return s.empty() || s == "NA" || s == "na" || s == "NaN" || s == "nan" || s == ".";
}

}  // namespace

ObservationTable load_csv(const std::string& path, const CsvSchema& schema, double eps_e) {
  std::ifstream in(path);
  if (!in) throw Error(kModule, "cannot open " + path);
  if (schema.propensity_column.has_value() == schema.propensity_value.has_value()) {
    throw Error(kModule, "schema must name exactly one propensity source");
  }
  if (schema.covariates.size() != schema.covariate_kinds.size()) {
    throw Error(kModule, "schema covariates/kinds length mismatch");
  }
  std::string line;
  if (!std::getline(in, line)) throw Error(kModule, "empty file " + path);
  auto header = split_line(line, schema.delimiter);
  auto col_index = [&](const std::string& name) -> int {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) {
      throw Error(kModule, "schema column '" + name + "' not found in header");
    }
    return static_cast<int>(it - header.begin());
  };
  const int ci_d = col_index(schema.treatment);
  const int ci_s = col_index(schema.selection);
  const int ci_y = col_index(schema.outcome);
  const int ci_e = schema.propensity_column ? col_index(*schema.propensity_column) : -1;
  std::vector<int> ci_x;
  for (const auto& c : schema.covariates) ci_x.push_back(col_index(c));

  std::vector<std::vector<std::string>> rows;
  std::size_t row_no = 0;
  while (std::getline(in, line)) {
    ++row_no;
    if (line.empty()) continue;
    auto fields = split_line(line, schema.delimiter);
    if (fields.size() != header.size()) {
      throw Error(kModule, "row " + std::to_string(row_no) + " has " +
                               std::to_string(fields.size()) + " fields, expected " +
                               std::to_string(header.size()));
    }
    rows.push_back(std::move(fields));
  }
  const auto n = static_cast<Eigen::Index>(rows.size());
  if (n == 0) throw Error(kModule, "no data rows in " + path);

  // Collect category levels first so dummy columns are stable.
  std::vector<std::vector<std::string>> levels(schema.covariates.size());
  for (std::size_t j = 0; j < schema.covariates.size(); ++j) {
    if (schema.covariate_kinds[j] != ColumnKind::kCategorical) continue;
    std::set<std::string> seen;
    for (const auto& r : rows) seen.insert(r[static_cast<std::size_t>(ci_x[j])]);
    levels[j].assign(seen.begin(), seen.end());
  }
  Eigen::Index d = 0;
  std::vector<std::string> names;
  for (std::size_t j = 0; j < schema.covariates.size(); ++j) {
    if (schema.covariate_kinds[j] == ColumnKind::kContinuous) {
      names.push_back(schema.covariates[j]);
      ++d;
    } else {
      for (const auto& lv : levels[j]) {
        names.push_back(schema.covariates[j] + "=" + lv);
        ++d;
      }
    }
  }

  ObservationTable t;
  t.x.resize(n, d);
  t.d_treat.resize(n);
  t.s_select.resize(n);
  t.y_obs.resize(n);
  t.propensity.resize(n);
  t.column_names = std::move(names);

  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& r = rows[static_cast<std::size_t>(i)];
    const std::string row_tag = "row " + std::to_string(i + 1);
    double dv;
    if (!parse_double(r[static_cast<std::size_t>(ci_d)], dv) || (dv != 0.0 && dv != 1.0)) {
      throw Error(kModule, "treatment value '" + r[static_cast<std::size_t>(ci_d)] +
                               "' rejected at " + row_tag);
    }
    t.d_treat[i] = static_cast<int>(dv);
    double sv;
    if (!parse_double(r[static_cast<std::size_t>(ci_s)], sv) || (sv != 0.0 && sv != 1.0)) {
      throw Error(kModule, "selection value '" + r[static_cast<std::size_t>(ci_s)] +
                               "' rejected at " + row_tag);
    }
    t.s_select[i] = static_cast<int>(sv);
    const std::string& ys = r[static_cast<std::size_t>(ci_y)];
    if (t.s_select[i] == 1) {
      double yv;
      if (!parse_double(ys, yv)) {
        throw Error(kModule, "missing outcome for selected unit at " + row_tag);
      }
      t.y_obs[i] = yv;
    } else {
      // outcome present where S=0 is accepted but ignored
      t.y_obs[i] = std::numeric_limits<double>::quiet_NaN();
    }
    double ev = schema.propensity_value.value_or(0.0);
    if (ci_e >= 0 && !parse_double(r[static_cast<std::size_t>(ci_e)], ev)) {
      throw Error(kModule, "unparseable propensity at " + row_tag);
    }
    if (!(ev >= eps_e && ev <= 1.0 - eps_e)) {
      throw Error(kModule, "propensity " + std::to_string(ev) + " outside [" +
                               std::to_string(eps_e) + ", " + std::to_string(1.0 - eps_e) +
                               "] at " + row_tag);
    }
    t.propensity[i] = ev;
    Eigen::Index col = 0;
    for (std::size_t j = 0; j < schema.covariates.size(); ++j) {
      const std::string& cell = r[static_cast<std::size_t>(ci_x[j])];
      if (schema.covariate_kinds[j] == ColumnKind::kContinuous) {
        double xv;
        if (is_missing(cell) || !parse_double(cell, xv)) {
          throw Error(kModule, "missing covariate '" + schema.covariates[j] + "' at " + row_tag);
        }
        t.x(i, col++) = xv;
      } else {
        if (is_missing(cell)) {
          throw Error(kModule, "missing covariate '" + schema.covariates[j] + "' at " + row_tag);
        }
        for (const auto& lv : levels[j]) t.x(i, col++) = (cell == lv) ? 1.0 : 0.0;
      }
    }
  }
  t.validate(eps_e);
  return t;
}

void write_csv(const std::string& path, const ObservationTable& table) {
  std::ofstream out(path);
  if (!out) throw Error(kModule, "cannot write " + path);
  out << "d,s,y,e";
  for (const auto& c : table.column_names) out << ',' << c;
  out << '\n';
  char buf[64];
  auto emit = [&](double v) {
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    out << buf;
  };
  for (Eigen::Index i = 0; i < table.n(); ++i) {
    out << table.d_treat[i] << ',' << table.s_select[i] << ',';
    if (table.s_select[i] == 1) emit(table.y_obs[i]);
    out << ',';
    emit(table.propensity[i]);
    for (Eigen::Index j = 0; j < table.dim(); ++j) {
      out << ',';
      emit(table.x(i, j));
    }
    out << '\n';
  }
}

ObservationTable read_emitted_csv(const std::string& path, double eps_e) {
  std::ifstream probe(path);
  if (!probe) throw Error(kModule, "cannot open " + path);
  std::string header;
  std::getline(probe, header);
  auto cols = split_line(header, ',');
  CsvSchema schema;
  schema.treatment = "d";
  schema.selection = "s";
  schema.outcome = "y";
  schema.propensity_column = "e";
  for (std::size_t j = 4; j < cols.size(); ++j) {
    schema.covariates.push_back(cols[j]);
    schema.covariate_kinds.push_back(ColumnKind::kContinuous);
  }
  return load_csv(path, schema, eps_e);
}

}  // namespace hb::data
