#include "hetbounds/studies.hpp"

#include <atomic>
#include <cmath>
#include <iostream>

#include "hetbounds/error.hpp"
#include "hetbounds/math.hpp"
#include "hetbounds/parallel.hpp"

namespace hb::studies {

namespace {
const char* kModule = "roy_simulator";

// integral of theta over [lo, hi] / (hi - lo), z uniform
double integrated_theta(const roy::RoyConfig& cfg, double lo, double hi) {
  const int nodes = 2000;
  double acc = 0.0;
  for (int i = 0; i < nodes; ++i) {
    const double z = lo + (hi - lo) * (i + 0.5) / nodes;
    acc += roy::true_theta(z, cfg);
  }
  return acc / nodes;
}

void check_failures(int failures, int reps, double cap) {
  if (failures > std::max(1, static_cast<int>(cap * reps))) {
    throw Error(kModule, std::to_string(failures) + " of " + std::to_string(reps) +
                             " replications failed (cap " + std::to_string(cap) + ")");
  }
}

}  // namespace

CoverageResult run_coverage_study(const StudyConfig& config, const std::vector<double>& z_eval) {
  if (config.reps < 100) throw Error(kModule, "coverage study needs reps >= 100");
  if (z_eval.empty()) throw Error(kModule, "coverage study needs a z grid");
  const auto reps = static_cast<std::size_t>(config.reps);
  const std::size_t nz = z_eval.size();

  pointwise::CriticalValueTable shared_table(config.estimate.alpha, config.estimate.coverage);
  std::vector<std::uint8_t> covered(reps * nz, 0);
  std::vector<std::uint8_t> ok(reps, 0);

  hb::util::parallel_for(config.reps, config.threads, [&](std::int64_t rep) {
    roy::RoyConfig rc = config.roy;
    rc.seed = hb::math::Rng(config.seed, static_cast<std::uint64_t>(rep)).next_u64();
    pipeline::EstimateConfig ec = config.estimate;
    ec.seed = rc.seed ^ 0x5eedULL;
    ec.z_eval = z_eval;
    ec.bootstrap_reps = 0;
    ec.critical_table = &shared_table;
    try {
      auto table = roy::simulate(rc);
      data::HeterogeneitySpec het;
      het.columns = {0};
      het.kinds = {data::ColumnKind::kContinuous};
      auto res = pipeline::estimate(table, het, ec);
      for (std::size_t k = 0; k < nz; ++k) {
        const double truth = roy::true_theta(z_eval[k], config.roy);
        const auto& row = res.rows[k];
        covered[static_cast<std::size_t>(rep) * nz + k] =
            (truth >= row.ci_lo && truth <= row.ci_hi) ? 1 : 0;
      }
      ok[static_cast<std::size_t>(rep)] = 1;
    } catch (const std::exception& e) {
      std::cerr << "[roy_simulator] replication " << rep << " failed: " << e.what() << "\n";
    }
  });

  CoverageResult out;
  int effective = 0;
  for (std::size_t r = 0; r < reps; ++r) effective += ok[r];
  out.failures = config.reps - effective;
  check_failures(out.failures, config.reps, config.rep_failure_cap);
  out.rows.resize(nz);
  for (std::size_t k = 0; k < nz; ++k) {
    int hits = 0;
    for (std::size_t r = 0; r < reps; ++r) {
      if (ok[r]) hits += covered[r * nz + k];
    }
    CoverageRow row;
    row.z = z_eval[k];
    row.reps = effective;
    row.coverage = effective > 0 ? static_cast<double>(hits) / effective : 0.0;
    row.mc_se = effective > 0
                    ? std::sqrt(std::max(row.coverage * (1.0 - row.coverage), 1e-12) / effective)
                    : 0.0;
    out.rows[k] = row;
  }
  return out;
}

PowerResult run_power_study(const StudyConfig& config, const std::vector<double>& deviations) {
  if (config.reps < 100) throw Error(kModule, "power study needs reps >= 100");
  if (deviations.empty()) throw Error(kModule, "power study needs deviations");
  const auto reps = static_cast<std::size_t>(config.reps);

  PowerResult out;
  out.theta_z0 = integrated_theta(config.roy, 0.0, 0.5);
  out.theta_z1 = integrated_theta(config.roy, 0.5, 1.0);

  pointwise::CriticalValueTable shared_table(config.estimate.alpha, config.estimate.coverage);
  // CI per stratum per rep
  std::vector<double> ci(reps * 4, 0.0);
  std::vector<std::uint8_t> ok(reps, 0);

  hb::util::parallel_for(config.reps, config.threads, [&](std::int64_t rep) {
    roy::RoyConfig rc = config.roy;
    rc.seed = hb::math::Rng(config.seed ^ 0x70a3ULL, static_cast<std::uint64_t>(rep)).next_u64();
    pipeline::EstimateConfig ec = config.estimate;
    ec.seed = rc.seed ^ 0x5eedULL;
    ec.z_eval = {0.25, 0.75};  // bin representatives
    ec.bootstrap_reps = 0;
    ec.critical_table = &shared_table;
    series::BasisSpec bins;
    bins.kind = series::BasisSpec::Kind::kIndicatorBins;
    bins.bin_edges = {0.0, 0.5, 1.0};
    ec.basis.candidates = {bins};
    try {
      auto table = roy::simulate(rc);
      data::HeterogeneitySpec het;
      het.columns = {0};
      het.kinds = {data::ColumnKind::kContinuous};
      auto res = pipeline::estimate(table, het, ec);
      ci[static_cast<std::size_t>(rep) * 4 + 0] = res.rows[0].ci_lo;
      ci[static_cast<std::size_t>(rep) * 4 + 1] = res.rows[0].ci_hi;
      ci[static_cast<std::size_t>(rep) * 4 + 2] = res.rows[1].ci_lo;
      ci[static_cast<std::size_t>(rep) * 4 + 3] = res.rows[1].ci_hi;
      ok[static_cast<std::size_t>(rep)] = 1;
    } catch (const std::exception& e) {
      std::cerr << "[roy_simulator] replication " << rep << " failed: " << e.what() << "\n";
    }
  });

  int effective = 0;
  for (std::size_t r = 0; r < reps; ++r) effective += ok[r];
  out.failures = config.reps - effective;
  check_failures(out.failures, config.reps, config.rep_failure_cap);

  out.rows.reserve(deviations.size());
  for (double dev : deviations) {
    PowerRow row;
    row.deviation = dev;
    int rej0 = 0, rej1 = 0;
    const double h0 = out.theta_z0 + dev;
    const double h1 = out.theta_z1 + dev;
    for (std::size_t r = 0; r < reps; ++r) {
      if (!ok[r]) continue;
      if (h0 < ci[r * 4 + 0] || h0 > ci[r * 4 + 1]) ++rej0;
      if (h1 < ci[r * 4 + 2] || h1 > ci[r * 4 + 3]) ++rej1;
    }
    row.reject_z0 = effective > 0 ? static_cast<double>(rej0) / effective : 0.0;
    row.reject_z1 = effective > 0 ? static_cast<double>(rej1) / effective : 0.0;
    out.rows.push_back(row);
  }
  return out;
}

UniformCoverageResult run_uniform_coverage_study(const StudyConfig& config) {
  if (config.reps < 50) throw Error(kModule, "uniform coverage study needs reps >= 50");
  const auto reps = static_cast<std::size_t>(config.reps);
  std::vector<std::uint8_t> covered(reps, 0);
  std::vector<std::uint8_t> ok(reps, 0);

  pointwise::CriticalValueTable shared_table(config.estimate.alpha, config.estimate.coverage);
  hb::util::parallel_for(config.reps, config.threads, [&](std::int64_t rep) {
    roy::RoyConfig rc = config.roy;
    rc.seed = hb::math::Rng(config.seed ^ 0xba2dULL, static_cast<std::uint64_t>(rep)).next_u64();
    pipeline::EstimateConfig ec = config.estimate;
    ec.seed = rc.seed ^ 0x5eedULL;
    ec.critical_table = &shared_table;
    try {
      auto table = roy::simulate(rc);
      data::HeterogeneitySpec het;
      het.columns = {0};
      het.kinds = {data::ColumnKind::kContinuous};
      auto res = pipeline::estimate(table, het, ec);
      bool everywhere = true;
      for (const auto& br : res.band_rows) {
        if (br.skipped) continue;
        const double truth = roy::true_theta(br.z, config.roy);
        if (truth < br.lo || truth > br.hi) {
          everywhere = false;
          break;
        }
      }
      covered[static_cast<std::size_t>(rep)] = everywhere ? 1 : 0;
      ok[static_cast<std::size_t>(rep)] = 1;
    } catch (const std::exception& e) {
      std::cerr << "[roy_simulator] replication " << rep << " failed: " << e.what() << "\n";
    }
  });

  UniformCoverageResult out;
  int effective = 0, hits = 0;
  for (std::size_t r = 0; r < reps; ++r) {
    if (ok[r]) {
      ++effective;
      hits += covered[r];
    }
  }
  out.failures = config.reps - effective;
  check_failures(out.failures, config.reps, config.rep_failure_cap);
  out.reps = effective;
  out.simultaneous_coverage = effective > 0 ? static_cast<double>(hits) / effective : 0.0;
  return out;
}

}  // namespace hb::studies
