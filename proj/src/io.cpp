#include "hetbounds/io.hpp"

#include <cstdio>
#include <fstream>

#include "hetbounds/error.hpp"

namespace hb::io {

namespace {
std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cli", "cannot write " + path);
  return out;
}
}  // namespace

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

void write_curves_csv(const std::string& path, const pipeline::EstimateResult& result) {
  auto out = open_out(path);
  out << "z,theta_L,theta_U,sigma_L,sigma_U,rho\n";
  for (const auto& r : result.rows) {
    out << format_double(r.z) << ',' << format_double(r.theta_L) << ','
        << format_double(r.theta_U) << ',' << format_double(r.sigma_L) << ','
        << format_double(r.sigma_U) << ',' << format_double(r.rho) << '\n';
  }
}

void write_intervals_csv(const std::string& path, const pipeline::EstimateResult& result) {
  auto out = open_out(path);
  out << "z,theta_L,theta_U,theta_star,ci_lo,ci_hi,c_hat,rho\n";
  for (const auto& r : result.rows) {
    out << format_double(r.z) << ',' << format_double(r.theta_L) << ','
        << format_double(r.theta_U) << ',' << format_double(r.theta_star) << ','
        << format_double(r.ci_lo) << ',' << format_double(r.ci_hi) << ','
        << format_double(r.c_hat) << ',' << format_double(r.rho) << '\n';
  }
}

void write_bands_csv(const std::string& path, const pipeline::EstimateResult& result) {
  auto out = open_out(path);
  out << "z,band_lo,band_hi\n";
  for (const auto& b : result.band_rows) {
    if (b.skipped) continue;
    out << format_double(b.z) << ',' << format_double(b.lo) << ',' << format_double(b.hi)
        << '\n';
  }
}

void write_coverage_csv(const std::string& path, const studies::CoverageResult& result) {
  auto out = open_out(path);
  out << "z,coverage,mc_se,reps\n";
  for (const auto& r : result.rows) {
    out << format_double(r.z) << ',' << format_double(r.coverage) << ','
        << format_double(r.mc_se) << ',' << r.reps << '\n';
  }
}

void write_power_csv(const std::string& path, const studies::PowerResult& result) {
  auto out = open_out(path);
  out << "deviation,reject_z0,reject_z1\n";
  for (const auto& r : result.rows) {
    out << format_double(r.deviation) << ',' << format_double(r.reject_z0) << ','
        << format_double(r.reject_z1) << '\n';
  }
}

}  // namespace hb::io
