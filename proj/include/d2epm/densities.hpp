#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "d2epm/samplers.hpp"

namespace d2epm {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

inline double log_gamma_pdf(double x, double shape, double scale) {
  detail::require(shape > 0.0 && scale > 0.0, "gamma density needs positive shape and scale");
  if (!(x > 0.0)) return kNegInf;
  return (shape - 1.0) * std::log(x) - x / scale - shape * std::log(scale) -
         std::lgamma(shape);
}

inline double log_beta_pdf(double x, double a, double b) {
  if (a < kAlphaFloor) a = kAlphaFloor;
  if (b < kAlphaFloor) b = kAlphaFloor;
  if (!(x > 0.0) || !(x < 1.0)) return kNegInf;
  return (a - 1.0) * std::log(x) + (b - 1.0) * std::log1p(-x) +
         std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b);
}

inline double log_dirichlet_pdf(const std::vector<double>& x,
                                const std::vector<double>& alphas) {
  detail::require(x.size() == alphas.size() && !x.empty(),
                  "dirichlet density needs matching nonempty dimensions");
  double asum = 0.0, lp = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    double a = alphas[i] < kAlphaFloor ? kAlphaFloor : alphas[i];
    asum += a;
    if (!(x[i] >= 0.0)) return kNegInf;
    if (x[i] == 0.0 && a > 1.0) return kNegInf;
    lp += (a - 1.0) * std::log(x[i] > 0.0 ? x[i] : kAlphaFloor) - std::lgamma(a);
  }
  return lp + std::lgamma(asum);
}

inline double log_poisson_pmf(std::uint64_t k, double rate) {
  detail::require(rate >= 0.0 && std::isfinite(rate), "poisson rate must be nonnegative finite");
  if (rate == 0.0) return k == 0 ? 0.0 : kNegInf;
  double kd = static_cast<double>(k);
  return kd * std::log(rate) - rate - std::lgamma(kd + 1.0);
}

inline double log_ztp_pmf(std::uint64_t k, double rate) {
  detail::require(rate > 0.0 && std::isfinite(rate), "ztp rate must be positive");
  if (k == 0) return kNegInf;
  double kd = static_cast<double>(k);
  return kd * std::log(rate) - std::lgamma(kd + 1.0) - std::log(std::expm1(rate));
}

// log PMF of counts given category probabilities (total implied by the counts)
inline double log_multinomial_pmf(const std::vector<std::uint64_t>& counts,
                                  const std::vector<double>& probs) {
  detail::require(counts.size() == probs.size() && !counts.empty(),
                  "multinomial density needs matching nonempty dimensions");
  double psum = 0.0;
  std::uint64_t total = 0;
  for (double p : probs) psum += p;
  detail::require(psum > 0.0, "multinomial probs cannot all be zero");
  double lp = 0.0;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    total += counts[i];
    if (counts[i] == 0) continue;
    double p = probs[i] / psum;
    if (p <= 0.0) return kNegInf;
    lp += static_cast<double>(counts[i]) * std::log(p) -
          std::lgamma(static_cast<double>(counts[i]) + 1.0);
  }
  lp += std::lgamma(static_cast<double>(total) + 1.0);
  return lp;
}

}  // namespace d2epm
