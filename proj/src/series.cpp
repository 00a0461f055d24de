#include "hetbounds/series.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>
#include <set>

#include "hetbounds/error.hpp"
#include "hetbounds/math.hpp"

namespace hb::series {

namespace {
const char* kModule = "series_projection";

std::vector<double> quantile_knots(std::vector<double> col, int count) {
  std::sort(col.begin(), col.end());
  std::vector<double> knots;
  for (int j = 1; j <= count; ++j) {
    double u = static_cast<double>(j) / (count + 1);
    knots.push_back(hb::math::empirical_quantile_sorted(col, u));
  }
  return knots;
}

// All basis values of a clamped b-spline at x. knots has size nbasis + order.
Eigen::RowVectorXd bspline_row(const std::vector<double>& knots, int order, double x) {
  const auto nbasis = static_cast<Eigen::Index>(knots.size()) - order;
  Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(nbasis);
  const double lo = knots[static_cast<std::size_t>(order - 1)];
  const double hi = knots[knots.size() - static_cast<std::size_t>(order)];
  double xv = std::clamp(x, lo, hi);
  // knot span index j with knots[j] <= xv < knots[j+1]
  int j = order - 1;
  int jmax = static_cast<int>(knots.size()) - order - 1;
  while (j < jmax && xv >= knots[static_cast<std::size_t>(j + 1)]) ++j;
  // de Boor-Cox recursion over the active window
  std::vector<double> vals(static_cast<std::size_t>(order), 0.0);
  vals[0] = 1.0;
  for (int deg = 1; deg < order; ++deg) {
    double saved = 0.0;
    for (int r = 0; r < deg; ++r) {
      int left_idx = j - deg + 1 + r;
      double left = knots[static_cast<std::size_t>(left_idx)];
      double right = knots[static_cast<std::size_t>(left_idx + deg)];
      double denom = right - left;
      double term = denom > 0.0 ? vals[static_cast<std::size_t>(r)] / denom : 0.0;
      vals[static_cast<std::size_t>(r)] = saved + (right - xv) * term;
      saved = (xv - left) * term;
    }
    vals[static_cast<std::size_t>(deg)] = saved;
  }
  for (int r = 0; r < order; ++r) {
    int idx = j - order + 1 + r;
    if (idx >= 0 && idx < nbasis) row[idx] = vals[static_cast<std::size_t>(r)];
  }
  return row;
}

}  // namespace

std::string BasisSpec::describe() const {
  switch (kind) {
    case Kind::kConstant:
      return "constant";
    case Kind::kBSpline:
      return "bspline(order=" + std::to_string(order) +
             ",interior=" + std::to_string(interior_knots) + ")";
    case Kind::kIndicator:
      return "indicator";
    case Kind::kIndicatorBins: {
      std::string s = "bins(";
      for (std::size_t i = 0; i < bin_edges.size(); ++i) {
        if (i) s += ",";
        s += std::to_string(bin_edges[i]);
      }
      return s + ")";
    }
  }
  return "?";
}

ResolvedBasis ResolvedBasis::resolve(const Eigen::MatrixXd& z, const BasisSpec& spec) {
  if (z.rows() == 0 || z.cols() == 0) throw Error(kModule, "empty heterogeneity matrix");
  ResolvedBasis rb;
  rb.spec_ = spec;
  switch (spec.kind) {
    case BasisSpec::Kind::kConstant:
      rb.raw_k_ = 1;
      break;
    case BasisSpec::Kind::kBSpline: {
      if (spec.order < 1) throw Error(kModule, "b-spline order must be >= 1");
      rb.raw_k_ = 1;
      for (Eigen::Index c = 0; c < z.cols(); ++c) {
        std::vector<double> col(z.col(c).data(), z.col(c).data() + z.rows());
        double lo = *std::min_element(col.begin(), col.end());
        double hi = *std::max_element(col.begin(), col.end());
        if (!(hi > lo)) throw Error(kModule, "degenerate continuous z column");
        std::vector<double> interior = quantile_knots(col, spec.interior_knots);
        std::vector<double> knots;
        for (int j = 0; j < spec.order; ++j) knots.push_back(lo);
        for (double t : interior) knots.push_back(std::clamp(t, lo, hi));
        for (int j = 0; j < spec.order; ++j) knots.push_back(hi);
        std::sort(knots.begin(), knots.end());
        rb.knots_.push_back(std::move(knots));
        rb.raw_k_ *= spec.order + spec.interior_knots;
      }
      break;
    }
    case BasisSpec::Kind::kIndicator: {
      if (z.cols() != 1) throw Error(kModule, "indicator basis expects a single z column");
      std::set<double> cats(z.col(0).data(), z.col(0).data() + z.rows());
      rb.categories_.assign(cats.begin(), cats.end());
      rb.raw_k_ = static_cast<Eigen::Index>(rb.categories_.size());
      break;
    }
    case BasisSpec::Kind::kIndicatorBins: {
      if (z.cols() != 1) throw Error(kModule, "bin basis expects a single z column");
      if (spec.bin_edges.size() < 2) throw Error(kModule, "bin basis needs >= 2 edges");
      rb.edges_ = spec.bin_edges;
      if (!std::is_sorted(rb.edges_.begin(), rb.edges_.end())) {
        throw Error(kModule, "bin edges must be sorted");
      }
      rb.raw_k_ = static_cast<Eigen::Index>(rb.edges_.size()) - 1;
      break;
    }
  }
  rb.k_ = rb.raw_k_;
  rb.keep_.resize(static_cast<std::size_t>(rb.raw_k_));
  for (Eigen::Index j = 0; j < rb.raw_k_; ++j) rb.keep_[static_cast<std::size_t>(j)] = j;
  return rb;
}

Eigen::RowVectorXd ResolvedBasis::evaluate_raw(const Eigen::RowVectorXd& z) const {
  switch (spec_.kind) {
    case BasisSpec::Kind::kConstant:
      return Eigen::RowVectorXd::Ones(1);
    case BasisSpec::Kind::kBSpline: {
      Eigen::RowVectorXd row = Eigen::RowVectorXd::Ones(1);
      for (std::size_t c = 0; c < knots_.size(); ++c) {
        Eigen::RowVectorXd colrow =
            bspline_row(knots_[c], spec_.order, z[static_cast<Eigen::Index>(c)]);
        Eigen::RowVectorXd next(row.size() * colrow.size());
        Eigen::Index pos = 0;
        for (Eigen::Index a = 0; a < row.size(); ++a) {
          for (Eigen::Index b = 0; b < colrow.size(); ++b) next[pos++] = row[a] * colrow[b];
        }
        row = std::move(next);
      }
      return row;
    }
    case BasisSpec::Kind::kIndicator: {
      Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(raw_k_);
      const double v = z[0];
      for (std::size_t j = 0; j < categories_.size(); ++j) {
        if (std::fabs(v - categories_[j]) < 1e-9) {
          row[static_cast<Eigen::Index>(j)] = 1.0;
          return row;
        }
      }
      throw Error(kModule, "categorical z value " + std::to_string(v) +
                               " outside declared categories");
    }
    case BasisSpec::Kind::kIndicatorBins: {
      Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(raw_k_);
      const double v = z[0];
      for (std::size_t j = 0; j + 1 < edges_.size(); ++j) {
        const bool last = (j + 2 == edges_.size());
        if (v >= edges_[j] && (v < edges_[j + 1] || (last && v <= edges_[j + 1]))) {
          row[static_cast<Eigen::Index>(j)] = 1.0;
          return row;
        }
      }
      return row;  // outside all bins: zero row
    }
  }
  throw Error(kModule, "unreachable basis kind");
}

Eigen::RowVectorXd ResolvedBasis::evaluate(const Eigen::RowVectorXd& z) const {
  Eigen::RowVectorXd raw = evaluate_raw(z);
  if (static_cast<Eigen::Index>(keep_.size()) == raw_k_ && k_ == raw_k_) return raw;
  Eigen::RowVectorXd out(k_);
  for (Eigen::Index j = 0; j < k_; ++j) out[j] = raw[keep_[static_cast<std::size_t>(j)]];
  return out;
}

Eigen::MatrixXd ResolvedBasis::design(const Eigen::MatrixXd& z) const {
  Eigen::MatrixXd out(z.rows(), k_);
  for (Eigen::Index i = 0; i < z.rows(); ++i) out.row(i) = evaluate(z.row(i));
  return out;
}

void ResolvedBasis::drop_columns(const std::vector<Eigen::Index>& cols) {
  if (cols.empty()) return;
  std::set<Eigen::Index> drop(cols.begin(), cols.end());
  std::vector<Eigen::Index> keep;
  for (Eigen::Index j = 0; j < k_; ++j) {
    if (!drop.count(j)) {
      keep.push_back(keep_[static_cast<std::size_t>(j)]);
    } else {
      dropped_.push_back(keep_[static_cast<std::size_t>(j)]);
    }
  }
  keep_ = std::move(keep);
  k_ = static_cast<Eigen::Index>(keep_.size());
}

ResolvedBasis build_basis(const Eigen::MatrixXd& z, const BasisSpec& spec) {
  ResolvedBasis rb = ResolvedBasis::resolve(z, spec);
  Eigen::MatrixXd design = rb.design(z);
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  qr.setThreshold(1e-10);
  const Eigen::Index rank = qr.rank();
  if (rank < rb.dimension()) {
    auto perm = qr.colsPermutation().indices();
    std::vector<Eigen::Index> drop;
    for (Eigen::Index j = rank; j < rb.dimension(); ++j) {
      drop.push_back(static_cast<Eigen::Index>(perm[j]));
    }
    std::cerr << "[series_projection] warning: design rank " << rank << " < " << rb.dimension()
              << " for basis " << spec.describe() << ", dropping " << drop.size()
              << " column(s)\n";
    rb.drop_columns(drop);
  }
  return rb;
}

LoocvResult loocv_select(const Eigen::MatrixXd& z, const Eigen::VectorXd& psi,
                         const std::vector<BasisSpec>& candidates) {
  if (candidates.empty()) throw Error(kModule, "no basis candidates");
  const Eigen::Index n = z.rows();
  LoocvResult res;
  res.scores.assign(candidates.size(), std::numeric_limits<double>::infinity());
  std::vector<Eigen::Index> dims(candidates.size(), 0);
  for (std::size_t c = 0; c < candidates.size(); ++c) {
    ResolvedBasis rb = ResolvedBasis::resolve(z, candidates[c]);
    dims[c] = rb.dimension();
    if (rb.dimension() >= n) continue;  // n < k_B disqualifies
    Eigen::MatrixXd design = rb.design(z);
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> piv(design);
    piv.setThreshold(1e-10);
    if (piv.rank() < design.cols()) continue;  // rank-deficient candidate
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(design);
    Eigen::MatrixXd thin_q =
        qr.householderQ() * Eigen::MatrixXd::Identity(n, design.cols());
    Eigen::VectorXd beta = qr.solve(psi);
    Eigen::VectorXd resid = psi - design * beta;
    double score = 0.0;
    bool ok = true;
    for (Eigen::Index i = 0; i < n; ++i) {
      double h = thin_q.row(i).squaredNorm();
      if (h >= 1.0 - 1e-10) {
        ok = false;  // leverage-one observation
        break;
      }
      double e = resid[i] / (1.0 - h);
      score += e * e;
    }
    if (ok) res.scores[c] = score;
  }
  std::size_t best = candidates.size();
  for (std::size_t c = 0; c < candidates.size(); ++c) {
    if (!std::isfinite(res.scores[c])) continue;
    if (best == candidates.size()) {
      best = c;
      continue;
    }
    const double cur = res.scores[best];
    const double cand = res.scores[c];
    if (cand < cur - 1e-12 * (1.0 + std::fabs(cur))) {
      best = c;
    } else if (std::fabs(cand - cur) <= 1e-12 * (1.0 + std::fabs(cur)) && dims[c] < dims[best]) {
      best = c;
    }
  }
  if (best == candidates.size()) throw Error(kModule, "all basis candidates disqualified");
  res.selected = best;
  return res;
}

namespace {

Eigen::VectorXd solve_ls(const Eigen::MatrixXd& design, const Eigen::VectorXd& y,
                         const std::vector<std::string>* names) {
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  qr.setThreshold(1e-10);
  if (qr.rank() < design.cols()) {
    auto perm = qr.colsPermutation().indices();
    std::string cols;
    for (Eigen::Index j = qr.rank(); j < design.cols(); ++j) {
      if (!cols.empty()) cols += ", ";
      cols += std::to_string(perm[j]);
    }
    (void)names;
    throw Error(kModule, "singular normal equations; collinear columns: " + cols);
  }
  return qr.solve(y);
}

}  // namespace

BoundsCurve::BoundsCurve(ResolvedBasis basis_L, ResolvedBasis basis_U, const Eigen::MatrixXd& z,
                         const Eigen::VectorXd& psi_L, const Eigen::VectorXd& psi_U)
    : basis_L_(std::move(basis_L)), basis_U_(std::move(basis_U)), n_(z.rows()) {
  Eigen::MatrixXd bl = basis_L_.design(z);
  Eigen::MatrixXd bu = basis_U_.design(z);
  beta_L_ = solve_ls(bl, psi_L, nullptr);
  beta_U_ = solve_ls(bu, psi_U, nullptr);
  resid_L_ = psi_L - bl * beta_L_;
  resid_U_ = psi_U - bu * beta_U_;
  const double n = static_cast<double>(n_);
  Eigen::MatrixXd q_L = bl.transpose() * bl / n;
  Eigen::MatrixXd q_U = bu.transpose() * bu / n;
  Eigen::MatrixXd m_LL = bl.transpose() * resid_L_.array().square().matrix().asDiagonal() * bl / n;
  Eigen::MatrixXd m_UU = bu.transpose() * resid_U_.array().square().matrix().asDiagonal() * bu / n;
  Eigen::MatrixXd m_LU =
      bl.transpose() * (resid_L_.array() * resid_U_.array()).matrix().asDiagonal() * bu / n;
  Eigen::LDLT<Eigen::MatrixXd> ql(q_L), qu(q_U);
  Eigen::MatrixXd qli = ql.solve(Eigen::MatrixXd::Identity(q_L.rows(), q_L.cols()));
  Eigen::MatrixXd qui = qu.solve(Eigen::MatrixXd::Identity(q_U.rows(), q_U.cols()));
  v_LL_ = qli * m_LL * qli;
  v_UU_ = qui * m_UU * qui;
  v_LU_ = qli * m_LU * qui;
}

double BoundsCurve::theta_L(const Eigen::RowVectorXd& z) const {
  return basis_L_.evaluate(z).dot(beta_L_);
}

double BoundsCurve::theta_U(const Eigen::RowVectorXd& z) const {
  return basis_U_.evaluate(z).dot(beta_U_);
}

VarianceField BoundsCurve::variance(const Eigen::RowVectorXd& z) const {
  Eigen::RowVectorXd bl = basis_L_.evaluate(z);
  Eigen::RowVectorXd bu = basis_U_.evaluate(z);
  double var_L = bl * v_LL_ * bl.transpose();
  double var_U = bu * v_UU_ * bu.transpose();
  double cov = bl * v_LU_ * bu.transpose();
  VarianceField f;
  if (var_L < 1e-12 || var_U < 1e-12) {
    std::cerr << "[series_projection] warning: variance floored at z\n";
    var_L = std::max(var_L, 1e-12);
    var_U = std::max(var_U, 1e-12);
  }
  f.sigma_L = std::sqrt(var_L);
  f.sigma_U = std::sqrt(var_U);
  f.rho = std::clamp(cov / (f.sigma_L * f.sigma_U), -1.0 + 1e-10, 1.0 - 1e-10);
  f.omega << var_L, f.rho * f.sigma_L * f.sigma_U, f.rho * f.sigma_L * f.sigma_U, var_U;
  return f;
}

BoundsCurve project(const Eigen::MatrixXd& z, const scores::ScoreVector& psi,
                    const ResolvedBasis& basis_L, const ResolvedBasis& basis_U) {
  return BoundsCurve(basis_L, basis_U, z, psi.psi_L, psi.psi_U);
}

Eigen::VectorXd weighted_ls(const Eigen::MatrixXd& design, const Eigen::VectorXd& y,
                            const Eigen::VectorXd& weights) {
  Eigen::MatrixXd wd = weights.array().sqrt().matrix().asDiagonal() * design;
  Eigen::VectorXd wy = weights.array().sqrt().matrix().asDiagonal() * y;
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(wd);
  qr.setThreshold(1e-10);
  if (qr.rank() < design.cols()) {
    throw Error("uniform_bands", "singular weighted design");
  }
  return qr.solve(wy);
}

}  // namespace hb::series
