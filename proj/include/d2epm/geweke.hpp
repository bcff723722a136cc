#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "d2epm/gibbs.hpp"
#include "d2epm/model.hpp"
#include "d2epm/rng.hpp"
#include "d2epm/samplers.hpp"

namespace d2epm {

struct GewekeDims {
  std::uint32_t N = 4;
  std::uint32_t T = 3;
  std::uint32_t K = 2;
};

// deliberate single-site bugs injected by the harness to prove the test has
// power; the library updates themselves stay untouched
enum class GewekeMutation {
  none,
  weight_scale,            // doubles every weight after its draw, capped to stay finite
  membership_prior_shift,  // forward pass reads the stale same-step memberships as prior
  stick_swap,              // flips each stick variable to its mirrored draw
};

struct GewekeStat {
  std::string name;
  double mean_forward = 0.0;
  double se_forward = 0.0;
  double mean_sampler = 0.0;
  double se_sampler = 0.0;
  double z = 0.0;
};

struct GewekeReport {
  std::vector<GewekeStat> stats;

  double max_abs_z() const {
    double m = 0.0;
    for (const auto& s : stats) m = std::max(m, std::abs(s.z));
    return m;
  }
};

namespace detail {

inline ModelState geweke_prior_draw(const Hyperparams& hyper, const GewekeDims& dims,
                                    RngStream& rng) {
  ModelState s;
  s.N = dims.N;
  s.T = dims.T;
  s.K = dims.K;
  s.eta = sample_gamma(hyper.a0, 1.0 / hyper.b0, rng);
  s.lambda.resize(dims.K);
  s.p.resize(dims.K);
  const double alpha = hyper.alpha_value() > 0 ? hyper.alpha_value()
                                               : 1.0 / static_cast<double>(dims.K);
  for (std::uint32_t k = 0; k < dims.K; ++k) {
    s.p[k] = sample_beta(hyper.c0 * alpha, hyper.c0 * (1.0 - alpha), rng);
    s.lambda[k] = sample_gamma(hyper.g_k, s.p[k] / (1.0 - s.p[k]), rng);
  }
  s.phi.resize(static_cast<std::size_t>(dims.T) * dims.K);
  std::vector<double> alphas(dims.N);
  for (std::uint32_t t = 0; t < dims.T; ++t) {
    for (std::uint32_t k = 0; k < dims.K; ++k) {
      for (std::uint32_t i = 0; i < dims.N; ++i) {
        alphas[i] = (t == 0) ? s.eta : s.eta * dims.N * s.phi_at(t - 1, k)[i];
      }
      s.phi_at(t, k) = sample_dirichlet(alphas, rng);
    }
  }
  return s;
}

// aggregate counts drawn straight from the state: per (t,k) a Poisson total
// split multinomially across vertices
inline Aggregates geweke_data_draw(const ModelState& s, RngStream& rng) {
  Aggregates agg;
  agg.resize(s.N, s.T, s.K);
  for (std::uint32_t t = 0; t < s.T; ++t) {
    for (std::uint32_t k = 0; k < s.K; ++k) {
      std::uint64_t total = sample_poisson(s.lambda[k], rng);
      agg.m_k_t[t * s.K + k] = static_cast<double>(total);
      agg.m_k[k] += static_cast<double>(total);
      if (total == 0) continue;
      auto parts = sample_multinomial(total, s.phi_at(t, k), rng);
      for (std::uint32_t i = 0; i < s.N; ++i) {
        agg.at_ik(t, i, k) = static_cast<double>(parts[i]);
      }
    }
  }
  return agg;
}

inline void geweke_record(const ModelState& s, const Aggregates& agg, double* out) {
  double sum_lambda = 0.0;
  for (double l : s.lambda) sum_lambda += l;
  std::uint32_t t_mid = s.T > 1 ? 1u : 0u;
  double phi_probe = s.phi_at(t_mid, 0)[0];
  double m0 = agg.m_k[0];
  out[0] = s.eta;
  out[1] = sum_lambda;
  out[2] = phi_probe;
  out[3] = m0;
  out[4] = s.eta * s.eta;
  out[5] = sum_lambda * sum_lambda;
  out[6] = phi_probe * phi_probe;
  out[7] = m0 * m0;
}

inline void mean_se_iid(const std::vector<double>& xs, double& mean, double& se) {
  double n = static_cast<double>(xs.size());
  mean = 0.0;
  for (double x : xs) mean += x;
  mean /= n;
  double var = 0.0;
  for (double x : xs) var += (x - mean) * (x - mean);
  var /= (n - 1.0);
  se = std::sqrt(var / n);
}

inline void mean_se_batch(const std::vector<double>& xs, double& mean, double& se) {
  std::size_t n = xs.size();
  std::size_t batches = n >= 2000 ? 100 : std::max<std::size_t>(10, n / 20);
  std::size_t len = n / batches;
  mean = 0.0;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(n);
  std::vector<double> bm(batches);
  for (std::size_t b = 0; b < batches; ++b) {
    double s = 0.0;
    for (std::size_t i = b * len; i < (b + 1) * len; ++i) s += xs[i];
    bm[b] = s / static_cast<double>(len);
  }
  double grand = 0.0;
  for (double v : bm) grand += v;
  grand /= static_cast<double>(batches);
  double var = 0.0;
  for (double v : bm) var += (v - grand) * (v - grand);
  var /= static_cast<double>(batches - 1);
  se = std::sqrt(var / static_cast<double>(batches));
}

inline void geweke_mutated_memberships(ModelState& state, const Aggregates& agg,
                                       const AuxiliaryVars& aux, RngStream& rng) {
  const std::uint32_t N = state.N, T = state.T, K = state.K;
  std::vector<double> alphas(N), stale(N);
  for (std::uint32_t t = 0; t < T; ++t) {
    for (std::uint32_t k = 0; k < K; ++k) {
      stale = state.phi_at(t, k);
      for (std::uint32_t i = 0; i < N; ++i) {
        double a = (t > 0) ? state.eta * N * stale[i] : state.eta;
        if (t + 1 < T) a += aux.xi_at(t + 1, i, k);
        a += agg.at_ik(t, i, k);
        alphas[i] = a;
      }
      state.phi_at(t, k) = sample_dirichlet(alphas, rng);
    }
  }
}

}  // namespace detail

// joint-distribution consistency check: a forward chain of iid prior+data
// draws against a chain that alternates one sampler sweep with a fresh data
// draw from the current state; matching moments give z-scores near zero
inline GewekeReport geweke_test(const Hyperparams& hyper, const GewekeDims& dims,
                                std::uint64_t samples, std::uint64_t seed,
                                GewekeMutation mutation = GewekeMutation::none,
                                const SweepOptions& opts = {}) {
  hyper.validate();
  detail::require(samples > 0, "geweke_test needs a positive sample count");
  detail::require(dims.N >= 2 && dims.T >= 1 && dims.K >= 1, "degenerate geweke dimensions");

  constexpr std::size_t kStats = 8;
  static const char* kNames[kStats] = {"eta",        "sum_lambda",  "phi_probe",  "m_total_0",
                                       "eta_sq",     "sum_lambda_sq", "phi_probe_sq", "m_total_0_sq"};

  RngStream forward_rng(seed, 1);
  RngStream sampler_rng(seed, 2);

  std::vector<std::vector<double>> fwd(kStats), smp(kStats);
  for (auto& v : fwd) v.reserve(samples);
  for (auto& v : smp) v.reserve(samples);
  double rec[kStats];

  for (std::uint64_t it = 0; it < samples; ++it) {
    ModelState s = detail::geweke_prior_draw(hyper, dims, forward_rng);
    Aggregates agg = detail::geweke_data_draw(s, forward_rng);
    detail::geweke_record(s, agg, rec);
    for (std::size_t j = 0; j < kStats; ++j) fwd[j].push_back(rec[j]);
  }

  ModelState state = detail::geweke_prior_draw(hyper, dims, sampler_rng);
  Aggregates data = detail::geweke_data_draw(state, sampler_rng);
  std::uint64_t burn = samples / 10;
  for (std::uint64_t it = 0; it < samples + burn; ++it) {
    AuxiliaryVars aux = backward_pass(state, data, sampler_rng, opts);
    if (mutation == GewekeMutation::stick_swap) {
      std::uint32_t t0 = opts.augment_first_step ? 0u : 1u;
      for (std::uint32_t t = t0; t < dims.T; ++t) {
        for (std::uint32_t k = 0; k < dims.K; ++k) {
          double z = 1.0 - aux.zeta[t * dims.K + k];
          aux.zeta[t * dims.K + k] = std::min(1.0 - 1e-12, std::max(1e-12, z));
        }
      }
    }
    resample_weights(data, hyper, state, sampler_rng, opts);
    if (mutation == GewekeMutation::weight_scale) {
      // the doubled weights feed back through the resimulated data, so an
      // uncapped chain diverges; the cap keeps the (wrong) chain stationary
      for (auto& l : state.lambda) l = std::min(2.0 * l, 50.0);
    }
    state.eta = resample_eta(state, aux, hyper, sampler_rng);
    if (mutation == GewekeMutation::membership_prior_shift) {
      detail::geweke_mutated_memberships(state, data, aux, sampler_rng);
    } else {
      resample_memberships(state, data, aux, sampler_rng);
    }
    data = detail::geweke_data_draw(state, sampler_rng);
    if (it >= burn) {
      detail::geweke_record(state, data, rec);
      for (std::size_t j = 0; j < kStats; ++j) smp[j].push_back(rec[j]);
    }
  }

  GewekeReport report;
  report.stats.resize(kStats);
  for (std::size_t j = 0; j < kStats; ++j) {
    GewekeStat& st = report.stats[j];
    st.name = kNames[j];
    detail::mean_se_iid(fwd[j], st.mean_forward, st.se_forward);
    detail::mean_se_batch(smp[j], st.mean_sampler, st.se_sampler);
    double denom = std::sqrt(st.se_forward * st.se_forward + st.se_sampler * st.se_sampler);
    st.z = denom > 0 ? (st.mean_forward - st.mean_sampler) / denom : 0.0;
  }
  return report;
}

}  // namespace d2epm
