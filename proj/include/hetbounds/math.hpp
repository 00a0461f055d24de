#pragma once

#include <cstdint>
#include <cmath>
#include <vector>

namespace hb::math {

double norm_pdf(double x);
double norm_cdf(double x);
// Inverse standard normal cdf (Wichura's AS241, double precision).
double norm_quantile(double p);

// P(X <= a, Y <= b) for standard bivariate normal with correlation rho.
// Port of the Drezner-Genz algorithm used in TVPACK/BVND.
double bvn_cdf(double a, double b, double rho);

// Deterministic counter/stream RNG built on splitmix64. Streams derived
// from (seed, stream) are independent for distinct stream ids, which keeps
// per-replication and per-tree draws reproducible under any scheduling.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}
  Rng(std::uint64_t seed, std::uint64_t stream);

  std::uint64_t next_u64();
  // uniform on (0,1), never returns 0 or 1
  double uniform();
  double normal();
  double exponential();  // mean 1
  // uniform integer in [0, n)
  std::uint64_t uniform_int(std::uint64_t n);

 private:
  std::uint64_t state_;
};

// In-place Fisher-Yates with hb::math::Rng; deterministic given rng state.
template <typename T>
void shuffle(std::vector<T>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    std::size_t j = static_cast<std::size_t>(rng.uniform_int(i));
    std::swap(v[i - 1], v[j]);
  }
}

// Two-dimensional Sobol sequence (Gray-code construction). Point 0 is the
// origin and is skipped by next().
class Sobol2D {
 public:
  Sobol2D();
  // fills (u0, u1) in (0,1)^2
  void next(double& u0, double& u1);
  void reset();

 private:
  std::uint32_t index_ = 0;
  std::uint32_t x0_ = 0, x1_ = 0;
  std::uint32_t v0_[32];
  std::uint32_t v1_[32];
};

// Quantile of a sorted vector at level u via the left-continuous inverse
// of the empirical cdf: smallest y with F(y) >= u.
double empirical_quantile_sorted(const std::vector<double>& sorted, double u);

}  // namespace hb::math
