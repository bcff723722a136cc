#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "d2epm/rng.hpp"

namespace d2epm {

inline constexpr double kAlphaFloor = 1e-12;

namespace detail {

inline void require(bool ok, const std::string& msg) {
  if (!ok) throw std::invalid_argument(msg);
}

// Marsaglia-Tsang squeeze, shape >= 1
inline double gamma_mt(double shape, RngStream& rng) {
  double d = shape - 1.0 / 3.0;
  double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x, v;
    do {
      x = rng.normal();
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    double u = rng.uniform();
    double x2 = x * x;
    if (u < 1.0 - 0.0331 * x2 * x2) return d * v;
    if (std::log(u) < 0.5 * x2 + d * (1.0 - v + std::log(v))) return d * v;
  }
}

}  // namespace detail

inline double sample_gamma(double shape, double scale, RngStream& rng) {
  detail::require(shape > 0.0 && std::isfinite(shape), "gamma shape must be positive");
  detail::require(scale > 0.0 && std::isfinite(scale), "gamma scale must be positive");
  if (shape >= 1.0) return scale * detail::gamma_mt(shape, rng);
  double g = detail::gamma_mt(shape + 1.0, rng);
  return scale * g * std::pow(rng.uniform(), 1.0 / shape);
}

// log of a Gamma(shape, 1) draw; stays finite for arbitrarily small shapes
inline double sample_log_gamma(double shape, RngStream& rng) {
  detail::require(shape > 0.0 && std::isfinite(shape), "gamma shape must be positive");
  if (shape >= 0.1) {
    double g = (shape >= 1.0) ? detail::gamma_mt(shape, rng)
                              : detail::gamma_mt(shape + 1.0, rng) *
                                    std::pow(rng.uniform(), 1.0 / shape);
    return std::log(g);
  }
  double g = detail::gamma_mt(shape + 1.0, rng);
  return std::log(g) + std::log(rng.uniform()) / shape;
}

inline double sample_beta(double a, double b, RngStream& rng) {
  detail::require(a >= 0.0 && b >= 0.0 && std::isfinite(a) && std::isfinite(b),
                  "beta parameters must be nonnegative finite");
  detail::require(a > 0.0 || b > 0.0, "beta parameters cannot both be zero");
  if (a < kAlphaFloor) a = kAlphaFloor;
  if (b < kAlphaFloor) b = kAlphaFloor;
  double la = sample_log_gamma(a, rng);
  double lb = sample_log_gamma(b, rng);
  double x = 1.0 / (1.0 + std::exp(lb - la));
  const double lo = 1e-300, hi = 1.0 - 1e-16;
  if (x < lo) x = lo;
  if (x > hi) x = hi;
  return x;
}

// alphas floored at kAlphaFloor; drawn in log space so tiny shapes stay exact
inline std::vector<double> sample_dirichlet(const std::vector<double>& alphas,
                                            RngStream& rng) {
  detail::require(!alphas.empty(), "dirichlet needs at least one alpha");
  bool any_positive = false;
  for (double a : alphas) {
    detail::require(a >= 0.0 && std::isfinite(a), "dirichlet alphas must be nonnegative finite");
    if (a > 0.0) any_positive = true;
  }
  detail::require(any_positive, "dirichlet alphas cannot all be zero");
  const std::size_t n = alphas.size();
  std::vector<double> logs(n);
  double lmax = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    double a = alphas[i] < kAlphaFloor ? kAlphaFloor : alphas[i];
    logs[i] = sample_log_gamma(a, rng);
    if (logs[i] > lmax) lmax = logs[i];
  }
  std::vector<double> out(n);
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = std::exp(logs[i] - lmax);
    sum += out[i];
  }
  for (std::size_t i = 0; i < n; ++i) out[i] /= sum;
  return out;
}

inline std::uint64_t sample_poisson(double rate, RngStream& rng) {
  detail::require(rate >= 0.0 && std::isfinite(rate), "poisson rate must be nonnegative finite");
  if (rate == 0.0) return 0;
  if (rate < 10.0) {
    double limit = std::exp(-rate);
    double prod = rng.uniform();
    std::uint64_t k = 0;
    while (prod > limit) {
      ++k;
      prod *= rng.uniform();
    }
    return k;
  }
  // Hormann's PTRS transformed rejection
  double slam = std::sqrt(rate);
  double loglam = std::log(rate);
  double b = 0.931 + 2.53 * slam;
  double a = -0.059 + 0.02483 * b;
  double invalpha = 1.1239 + 1.1328 / (b - 3.4);
  double vr = 0.9277 - 3.6224 / (b - 2.0);
  for (;;) {
    double u = rng.uniform() - 0.5;
    double v = rng.uniform();
    double us = 0.5 - std::fabs(u);
    double kf = std::floor((2.0 * a / us + b) * u + rate + 0.43);
    if (us >= 0.07 && v <= vr) return static_cast<std::uint64_t>(kf);
    if (kf < 0.0 || (us < 0.013 && v > us)) continue;
    if (std::log(v) + std::log(invalpha) - std::log(a / (us * us) + b) <=
        -rate + kf * loglam - std::lgamma(kf + 1.0)) {
      return static_cast<std::uint64_t>(kf);
    }
  }
}

inline std::vector<std::uint64_t> sample_multinomial(std::uint64_t total,
                                                     const std::vector<double>& probs,
                                                     RngStream& rng) {
  detail::require(!probs.empty(), "multinomial needs at least one category");
  double sum = 0.0;
  for (double p : probs) {
    detail::require(p >= 0.0 && std::isfinite(p), "multinomial probs must be nonnegative finite");
    sum += p;
  }
  detail::require(sum > 0.0, "multinomial probs cannot all be zero");
  std::vector<std::uint64_t> counts(probs.size(), 0);
  for (std::uint64_t n = 0; n < total; ++n) {
    double u = rng.uniform() * sum;
    double acc = 0.0;
    std::size_t pick = probs.size() - 1;
    for (std::size_t i = 0; i < probs.size(); ++i) {
      acc += probs[i];
      if (u <= acc) {
        pick = i;
        break;
      }
    }
    ++counts[pick];
  }
  return counts;
}

// negative binomial with success probability p: mean r*p/(1-p)
inline std::uint64_t sample_nb(double r, double p, RngStream& rng) {
  detail::require(r > 0.0 && std::isfinite(r), "nb shape must be positive");
  detail::require(p > 0.0 && p < 1.0, "nb probability must lie in (0,1)");
  double lambda = sample_gamma(r, p / (1.0 - p), rng);
  return sample_poisson(lambda, rng);
}

// logarithmic series on {1,2,...}: f(k) = -p^k / (k log(1-p))
inline std::uint64_t sample_logarithmic(double p, RngStream& rng) {
  detail::require(p > 0.0 && p < 1.0, "logarithmic parameter must lie in (0,1)");
  double u = rng.uniform();
  double f = -p / std::log1p(-p);
  double cdf = f;
  std::uint64_t k = 1;
  while (u > cdf) {
    f *= p * static_cast<double>(k) / static_cast<double>(k + 1);
    ++k;
    cdf += f;
    if (f <= 0.0) break;  // exhausted double precision far in the tail
  }
  return k;
}

inline std::uint64_t sample_sumlog(std::uint64_t l, double p, RngStream& rng) {
  if (l == 0) return 0;
  std::uint64_t sum = 0;
  for (std::uint64_t i = 0; i < l; ++i) sum += sample_logarithmic(p, rng);
  return sum;
}

// Chinese restaurant table count: sum of Bernoulli(r/(r+i-1)), i = 1..x
inline std::uint64_t sample_crt(std::uint64_t count, double concentration, RngStream& rng) {
  detail::require(concentration > 0.0 && std::isfinite(concentration),
                  "crt concentration must be positive");
  std::uint64_t tables = 0;
  for (std::uint64_t i = 1; i <= count; ++i) {
    double prob = concentration / (concentration + static_cast<double>(i) - 1.0);
    if (rng.uniform() < prob) ++tables;
  }
  return tables;
}

struct CrtParams {
  std::uint64_t count = 0;
  double concentration = 1.0;
};

inline std::uint64_t sample_crt(const CrtParams& params, RngStream& rng) {
  return sample_crt(params.count, params.concentration, rng);
}

// zero-truncated Poisson: inversion below rate 5, rejection above
inline std::uint64_t sample_ztp(double rate, RngStream& rng) {
  detail::require(rate > 0.0 && std::isfinite(rate), "ztp rate must be positive");
  if (rate < 5.0) {
    double u = rng.uniform();
    double f = rate / std::expm1(rate);  // P(1)
    double cdf = f;
    std::uint64_t k = 1;
    while (u > cdf) {
      f *= rate / static_cast<double>(k + 1);
      ++k;
      cdf += f;
      if (f <= 0.0) break;
    }
    return k;
  }
  for (;;) {
    std::uint64_t k = sample_poisson(rate, rng);
    if (k >= 1) return k;
  }
}

}  // namespace d2epm
