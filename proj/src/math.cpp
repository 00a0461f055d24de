#include "hetbounds/math.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace hb::math {

double norm_pdf(double x) {
  static const double inv_sqrt_2pi = 0.3989422804014326779;
  return inv_sqrt_2pi * std::exp(-0.5 * x * x);
}

double norm_cdf(double x) { return 0.5 * std::erfc(-x * 0.7071067811865475244); }

double norm_quantile(double p) {
  // AS241 PPND16
  if (!(p > 0.0 && p < 1.0)) {
    if (p == 0.0) return -std::numeric_limits<double>::infinity();
    if (p == 1.0) return std::numeric_limits<double>::infinity();
    throw std::domain_error("norm_quantile: p outside [0,1]");
  }
  const double q = p - 0.5;
  double r;
  if (std::fabs(q) <= 0.425) {
    r = 0.180625 - q * q;
    return q *
           (((((((2.5090809287301226727e+3 * r + 3.3430575583588128105e+4) * r +
                 6.7265770927008700853e+4) * r + 4.5921953931549871457e+4) * r +
               1.3731693765509461125e+4) * r + 1.9715909503065514427e+3) * r +
             1.3314166789178437745e+2) * r + 3.3871328727963666080e+0) /
           (((((((5.2264952788528545610e+3 * r + 2.8729085735721942674e+4) * r +
                 3.9307895800092710610e+4) * r + 2.1213794301586595867e+4) * r +
               5.3941960214247511077e+3) * r + 6.8718700749205790830e+2) * r +
             4.2313330701600911252e+1) * r + 1.0);
  }
  r = q < 0.0 ? p : 1.0 - p;
  r = std::sqrt(-std::log(r));
  double val;
  if (r <= 5.0) {
    r -= 1.6;
    val = (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r +
                2.41780725177450611770e-1) * r + 1.27045825245236838258e+0) * r +
              3.64784832476320460504e+0) * r + 5.76949722146069140550e+0) * r +
            4.63033784615654529590e+0) * r + 1.42343711074968357734e+0) /
          (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r +
                1.51986665636164571966e-2) * r + 1.48103976427480074590e-1) * r +
              6.89767334985100004550e-1) * r + 1.67638483018380384940e+0) * r +
            2.05319162663775882187e+0) * r + 1.0);
  } else {
    r -= 5.0;
    val = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r +
                1.24266094738807843860e-3) * r + 2.65321895265761230930e-2) * r +
              2.96560571828504891230e-1) * r + 1.78482653991729133580e+0) * r +
            5.46378491116411436990e+0) * r + 6.65790464350110377720e+0) /
          (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r +
                1.84631831751005468180e-5) * r + 7.86869131145613259100e-4) * r +
              1.48753612908506148525e-2) * r + 1.36929880922735805310e-1) * r +
            5.99832206555887937690e-1) * r + 1.0);
  }
  return q < 0.0 ? -val : val;
}

namespace {

// Drezner-Genz: P(X > h, Y > k) building block on the transformed integrand.
double bvnu(double h, double k, double r) {
  static const double w6[] = {0.1713244923791705, 0.3607615730481384, 0.4679139345726904};
  static const double x6[] = {0.9324695142031522, 0.6612093864662647, 0.2386191860831970};
  static const double w12[] = {0.04717533638651177, 0.1069393259953183, 0.1600783285433464,
                               0.2031674267230659,  0.2334925365383547, 0.2491470458134029};
  static const double x12[] = {0.9815606342467191, 0.9041172563704750, 0.7699026741943050,
                               0.5873179542866171, 0.3678314989981802, 0.1252334085114692};
  static const double w20[] = {0.01761400713915212, 0.04060142980038694, 0.06267204833410906,
                               0.08327674157670475, 0.1019301198172404,  0.1181945319615184,
                               0.1316886384491766,  0.1420961093183821,  0.1491729864726037,
                               0.1527533871307259};
  static const double x20[] = {0.9931285991850949, 0.9639719272779138, 0.9122344282513259,
                               0.8391169718222188, 0.7463319064601508, 0.6360536807265150,
                               0.5108670019508271, 0.3737060887154196, 0.2277858511416451,
                               0.07652652113349733};
  const double* w;
  const double* x;
  int ng;
  if (std::fabs(r) < 0.3) {
    ng = 3; w = w6; x = x6;
  } else if (std::fabs(r) < 0.75) {
    ng = 6; w = w12; x = x12;
  } else {
    ng = 10; w = w20; x = x20;
  }
  double bvn = 0.0;
  const double twopi = 6.283185307179586477;
  if (std::fabs(r) < 0.925) {
    double hs = (h * h + k * k) / 2.0;
    double asr = std::asin(r);
    for (int i = 0; i < ng; ++i) {
      for (int is = -1; is <= 1; is += 2) {
        double sn = std::sin(asr * (is * x[i] + 1.0) / 2.0);
        bvn += w[i] * std::exp((sn * h * k - hs) / (1.0 - sn * sn));
      }
    }
    bvn = bvn * asr / (2.0 * twopi) + norm_cdf(-h) * norm_cdf(-k);
  } else {
    double hh = h, kk = k;
    if (r < 0.0) { kk = -kk; }
    if (std::fabs(r) < 1.0) {
      double as = (1.0 - r) * (1.0 + r);
      double a = std::sqrt(as);
      double bs = (hh - kk) * (hh - kk);
      double c = (4.0 - hh * kk) / 8.0;
      double d = (12.0 - hh * kk) / 16.0;
      double asr = -(bs / as + hh * kk) / 2.0;
      if (asr > -100.0) {
        bvn = a * std::exp(asr) *
              (1.0 - c * (bs - as) * (1.0 - d * bs / 5.0) / 3.0 + c * d * as * as / 5.0);
      }
      if (-hh * kk < 100.0) {
        double b = std::sqrt(bs);
        bvn -= std::exp(-hh * kk / 2.0) * std::sqrt(twopi) * norm_cdf(-b / a) * b *
               (1.0 - c * bs * (1.0 - d * bs / 5.0) / 3.0);
      }
      a /= 2.0;
      for (int i = 0; i < ng; ++i) {
        for (int is = -1; is <= 1; is += 2) {
          double xs = a * (is * x[i] + 1.0);
          xs = xs * xs;
          double rs = std::sqrt(1.0 - xs);
          double asr2 = -(bs / xs + hh * kk) / 2.0;
          if (asr2 > -100.0) {
            bvn += a * w[i] * std::exp(asr2) *
                   (std::exp(-hh * kk * (1.0 - rs) / (2.0 * (1.0 + rs))) / rs -
                    (1.0 + c * xs * (1.0 + d * xs)));
          }
        }
      }
      bvn = -bvn / twopi;
    }
    if (r > 0.0) {
      bvn += norm_cdf(-std::max(hh, kk));
    } else {
      bvn = -bvn;
      if (kk > hh) bvn += norm_cdf(kk) - norm_cdf(hh);
    }
  }
  return bvn;
}

}  // namespace

double bvn_cdf(double a, double b, double rho) {
  if (rho > 1.0) rho = 1.0;
  if (rho < -1.0) rho = -1.0;
  if (rho == 1.0) return norm_cdf(std::min(a, b));
  if (rho == -1.0) {
    double v = norm_cdf(a) + norm_cdf(b) - 1.0;
    return v > 0.0 ? v : 0.0;
  }
  // P(X<=a, Y<=b) = P(X>-a, Y>-b) under symmetry
  return bvnu(-a, -b, rho);
}

namespace {
inline std::uint64_t splitmix64(std::uint64_t& x) {
  x += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = x;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}
}  // namespace

Rng::Rng(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t s = seed;
  std::uint64_t a = splitmix64(s);
  s = seed ^ (0x6a09e667f3bcc909ULL + stream * 0x9e3779b97f4a7c15ULL);
  std::uint64_t b = splitmix64(s);
  state_ = a ^ (b + 0x2545f4914f6cdd1dULL + (stream << 1));
  // burn-in decorrelates nearby (seed, stream) pairs
  next_u64();
  next_u64();
}

std::uint64_t Rng::next_u64() { return splitmix64(state_); }

double Rng::uniform() {
  // 53-bit mantissa, shifted into (0,1)
  double u = (static_cast<double>(next_u64() >> 11) + 0.5) * (1.0 / 9007199254740992.0);
  return u;
}

double Rng::normal() { return norm_quantile(uniform()); }

double Rng::exponential() { return -std::log(uniform()); }

std::uint64_t Rng::uniform_int(std::uint64_t n) {
  if (n == 0) return 0;
  // rejection sampling avoids modulo bias
  std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                        std::numeric_limits<std::uint64_t>::max() % n;
  std::uint64_t v;
  do {
    v = next_u64();
  } while (v >= limit);
  return v % n;
}

Sobol2D::Sobol2D() { reset(); }

void Sobol2D::reset() {
  index_ = 0;
  x0_ = x1_ = 0;
  // dimension 1: van der Corput in base 2
  for (int k = 0; k < 32; ++k) v0_[k] = 1u << (31 - k);
  // dimension 2: primitive polynomial x+1, m-sequence 1,3,5,15,17,...
  std::uint32_t m = 1;
  for (int k = 0; k < 32; ++k) {
    v1_[k] = m << (31 - k);
    m = (m << 1) ^ m;
    m &= (k + 2 < 32) ? ((1u << (k + 2)) - 1u) : 0xffffffffu;
  }
}

void Sobol2D::next(double& u0, double& u1) {
  // Gray-code order: flip the direction number of the lowest zero bit
  std::uint32_t c = 0;
  std::uint32_t value = index_;
  while (value & 1u) {
    value >>= 1;
    ++c;
  }
  x0_ ^= v0_[c];
  x1_ ^= v1_[c];
  ++index_;
  u0 = (static_cast<double>(x0_) + 0.5) * (1.0 / 4294967296.0);
  u1 = (static_cast<double>(x1_) + 0.5) * (1.0 / 4294967296.0);
}

double empirical_quantile_sorted(const std::vector<double>& sorted, double u) {
  if (sorted.empty()) throw std::invalid_argument("empirical_quantile_sorted: empty sample");
  if (u <= 0.0) return sorted.front();
  if (u >= 1.0) return sorted.back();
  double pos = u * static_cast<double>(sorted.size());
  auto idx = static_cast<std::size_t>(std::ceil(pos)) - 1;
  if (idx >= sorted.size()) idx = sorted.size() - 1;
  return sorted[idx];
}

}  // namespace hb::math
