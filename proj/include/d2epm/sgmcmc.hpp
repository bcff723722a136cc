#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "d2epm/gibbs.hpp"
#include "d2epm/graph.hpp"
#include "d2epm/model.hpp"
#include "d2epm/rng.hpp"
#include "d2epm/samplers.hpp"

namespace d2epm {

enum class SgmcmcVariant { expanded_mean, reduced_mean };

struct SgmcmcConfig {
  SgmcmcVariant variant = SgmcmcVariant::expanded_mean;
  std::uint64_t iterations = 20000;
  std::uint64_t burn_in = 10000;
  std::uint64_t collect_every = 10;
  double minibatch_fraction = 0.1;
  double step_a = 10.0;
  double step_b = 1000.0;
  double step_c = 0.6;
  double scale_ema_decay = 0.9;
  std::uint64_t seed = 0;
  bool trace_auroc = false;
  bool lint_stepsize = true;
  SweepOptions sweep;

  void validate() const {
    detail::require(iterations >= 1, "iterations must be positive");
    detail::require(burn_in < iterations, "burn_in must be smaller than iterations");
    detail::require(collect_every >= 1, "collect_every must be positive");
    detail::require(minibatch_fraction > 0.0 && minibatch_fraction <= 1.0,
                    "minibatch_fraction must lie in (0,1]");
    detail::require(step_a > 0.0 && step_b > 0.0 && step_c > 0.0, "step parameters must be positive");
    detail::require(scale_ema_decay >= 0.0 && scale_ema_decay < 1.0,
                    "scale_ema_decay must lie in [0,1)");
    if (lint_stepsize) {
      detail::require(step_c > 0.5 && step_c <= 1.0,
                      "step_c outside (0.5, 1]; disable lint_stepsize to allow it");
    }
  }
};

inline double stepsize(std::uint64_t l, const SgmcmcConfig& cfg) {
  return std::pow(cfg.step_a * (1.0 + static_cast<double>(l) / cfg.step_b), -cfg.step_c);
}

struct Minibatch {
  std::vector<std::pair<std::uint32_t, std::uint32_t>> picks;  // (t, edge index)
  double rho = 1.0;
};

inline Minibatch draw_minibatch(const TemporalGraph& train, double fraction, RngStream& rng) {
  detail::require(fraction > 0.0 && fraction <= 1.0, "fraction must lie in (0,1]");
  std::size_t total = train.edge_count();
  detail::require(total > 0, "cannot draw a minibatch from an empty graph");
  std::size_t count = static_cast<std::size_t>(
      std::ceil(fraction * static_cast<double>(total)));
  count = std::min(count, total);

  std::vector<std::pair<std::uint32_t, std::uint32_t>> all;
  all.reserve(total);
  for (std::uint32_t t = 0; t < train.num_steps; ++t) {
    for (std::uint32_t e = 0; e < train.snapshots[t].size(); ++e) all.emplace_back(t, e);
  }
  for (std::size_t i = 0; i < count; ++i) {
    std::size_t j = i + static_cast<std::size_t>(rng.below(all.size() - i));
    std::swap(all[i], all[j]);
  }
  Minibatch mb;
  mb.picks.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(count));
  std::sort(mb.picks.begin(), mb.picks.end());
  mb.rho = static_cast<double>(total) / static_cast<double>(count);
  return mb;
}

// latent counts for the selected edges only, aggregated without scaling
inline Aggregates resample_minibatch_counts(const ModelState& state, const TemporalGraph& train,
                                            const Minibatch& mb, RngStream& rng) {
  Aggregates agg;
  agg.resize(state.N, state.T, state.K);
  std::vector<double> rates(state.K);
  for (auto [t, e] : mb.picks) {
    auto [i, j] = train.snapshots[t][e];
    double total = 0.0;
    for (std::uint32_t k = 0; k < state.K; ++k) {
      const auto& col = state.phi_at(t, k);
      rates[k] = col[i] * state.lambda[k] * col[j];
      total += rates[k];
    }
    if (!(total > 0.0)) {
      throw std::runtime_error("observed edge has zero intensity at t=" + std::to_string(t));
    }
    std::uint64_t m = sample_ztp(total, rng);
    auto parts = sample_multinomial(m, rates, rng);
    for (std::uint32_t k = 0; k < state.K; ++k) {
      double c = static_cast<double>(parts[k]);
      if (c == 0.0) continue;
      agg.at_ik(t, i, k) += c;
      agg.at_ik(t, j, k) += c;
      agg.m_k_t[t * state.K + k] += c;
      agg.m_k[k] += c;
    }
  }
  return agg;
}

// ---- per-column geometry -------------------------------------------------

// gradient of the unnormalized-membership log posterior:
//   d/d phi_hat_i  [ sum_j ((a_j - 1) log phi_hat_j - phi_hat_j)
//                    + rho sum_j m_j (log phi_hat_j - log phi_hat_sum) ]
inline std::vector<double> grad_expanded(const std::vector<double>& phi_hat,
                                         const std::vector<double>& prior_alpha,
                                         const std::vector<double>& m_tilde, double rho) {
  std::size_t n = phi_hat.size();
  double hat_sum = 0.0, m_sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    hat_sum += phi_hat[i];
    m_sum += m_tilde[i];
  }
  std::vector<double> g(n);
  for (std::size_t i = 0; i < n; ++i) {
    double denom = std::max(phi_hat[i], 1e-10);
    g[i] = (rho * m_tilde[i] + prior_alpha[i] - 1.0) / denom -
           rho * m_sum / std::max(hat_sum, 1e-10) - 1.0;
  }
  return g;
}

// gradient in the simplex coordinates (first N-1 free, the last implied)
inline std::vector<double> grad_reduced(const std::vector<double>& phi,
                                        const std::vector<double>& prior_alpha,
                                        const std::vector<double>& m_tilde, double rho) {
  std::size_t n = phi.size();
  std::vector<double> g(n - 1);
  double last = std::max(phi[n - 1], 1e-10);
  double pull = (rho * m_tilde[n - 1] + prior_alpha[n - 1] - 1.0) / last;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    g[i] = (rho * m_tilde[i] + prior_alpha[i] - 1.0) / std::max(phi[i], 1e-10) - pull;
  }
  return g;
}

// expanded-mean preconditioner: G = diag(1/phi_hat), so G^{-1} = diag(phi_hat)
// and the curvature correction is identically one
inline std::vector<double> metric_inv_expanded(const std::vector<double>& phi_hat) {
  return phi_hat;
}

inline std::vector<double> gamma_expanded(std::size_t n) {
  return std::vector<double>(n, 1.0);
}

// reduced-mean Fisher metric of a multinomial with total mass m_scale over the
// first N-1 coordinates
inline std::vector<std::vector<double>> fisher_reduced(const std::vector<double>& psi_head,
                                                       double m_scale) {
  std::size_t n = psi_head.size();
  double tail = 1.0;
  for (double v : psi_head) tail -= v;
  std::vector<std::vector<double>> f(n, std::vector<double>(n, m_scale / tail));
  for (std::size_t i = 0; i < n; ++i) f[i][i] += m_scale / psi_head[i];
  return f;
}

inline std::vector<std::vector<double>> metric_inv_reduced(const std::vector<double>& psi_head,
                                                           double m_scale) {
  std::size_t n = psi_head.size();
  std::vector<std::vector<double>> g(n, std::vector<double>(n));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      g[i][j] = ((i == j ? psi_head[i] : 0.0) - psi_head[i] * psi_head[j]) / m_scale;
    }
  }
  return g;
}

inline std::vector<double> gamma_reduced(const std::vector<double>& psi_head, double m_scale) {
  std::size_t n = psi_head.size();
  std::vector<double> g(n);
  for (std::size_t i = 0; i < n; ++i) {
    g[i] = (1.0 - static_cast<double>(n + 1) * psi_head[i]) / m_scale;
  }
  return g;
}

// ---- column updates --------------------------------------------------------

// mirrored Langevin step on the unnormalized memberships
inline void step_expanded(std::vector<double>& phi_hat, const std::vector<double>& prior_alpha,
                          const std::vector<double>& m_tilde, double rho, double eps,
                          RngStream& rng) {
  std::size_t n = phi_hat.size();
  double hat_sum = 0.0, m_sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    hat_sum += phi_hat[i];
    m_sum += m_tilde[i];
  }
  for (std::size_t i = 0; i < n; ++i) {
    double phi = phi_hat[i] / hat_sum;
    double drift = (rho * m_tilde[i] + prior_alpha[i]) - (rho * m_sum + hat_sum) * phi;
    double noise = std::sqrt(2.0 * eps * phi_hat[i]) * rng.normal();
    phi_hat[i] = std::abs(phi_hat[i] + eps * drift + noise);
    if (phi_hat[i] < 1e-12) phi_hat[i] = 1e-12;
  }
}

// mirrored Langevin step directly on the simplex, renormalized to absorb the
// drift of the implied last coordinate
inline void step_reduced(std::vector<double>& phi, const std::vector<double>& prior_alpha,
                         const std::vector<double>& m_tilde, double rho, double eps,
                         double m_scale, RngStream& rng) {
  std::size_t n = phi.size();
  double m_sum = 0.0, a_sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    m_sum += m_tilde[i];
    a_sum += prior_alpha[i];
  }
  double scale = eps / m_scale;
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double drift = (rho * m_tilde[i] + prior_alpha[i]) - (m_sum + a_sum) * phi[i];
    double noise = std::sqrt(2.0 * scale * phi[i]) * rng.normal();
    double v = std::abs(phi[i] + scale * drift + noise);
    phi[i] = std::max(v, 1e-12);
    total += phi[i];
  }
  for (auto& v : phi) v /= total;
}

// ---- driver ----------------------------------------------------------------

inline InferenceResult run_sgmcmc(const TemporalGraph& graph, const HeldOutMask& mask,
                                  const Hyperparams& hyper, const SgmcmcConfig& config,
                                  RngStream& rng) {
  hyper.validate();
  config.validate();
  TemporalGraph train = training_view(graph, mask);
  detail::require(train.edge_count() > 0, "no training edges remain after masking");

  const std::uint32_t N = graph.num_vertices, T = graph.num_steps;
  ModelState state = init_state(hyper, N, T, rng);
  const std::uint32_t K = state.K;

  // unnormalized memberships carried by the expanded variant
  std::vector<std::vector<double>> phi_hat;
  if (config.variant == SgmcmcVariant::expanded_mean) {
    phi_hat.assign(state.phi.size(), {});
    for (std::size_t c = 0; c < state.phi.size(); ++c) {
      phi_hat[c].resize(N);
      for (std::uint32_t i = 0; i < N; ++i) phi_hat[c][i] = state.phi[c][i] * N;
    }
  }

  std::vector<double> col_scale(static_cast<std::size_t>(T) * K, 1.0);
  bool scale_init = false;

  detail::Collector collector;
  collector.init(state, mask);
  InferenceResult result;
  result.trace.reserve(config.iterations);

  std::vector<double> m_col(N), prior(N);
  for (std::uint64_t iter = 1; iter <= config.iterations; ++iter) {
    try {
      Minibatch mb = draw_minibatch(train, config.minibatch_fraction, rng);
      Aggregates agg = resample_minibatch_counts(state, train, mb, rng);
      for (auto& v : agg.m_ik) v *= mb.rho;
      for (auto& v : agg.m_k_t) v *= mb.rho;
      for (auto& v : agg.m_k) v *= mb.rho;

      AuxiliaryVars aux = backward_pass(state, agg, rng, config.sweep);
      resample_weights(agg, hyper, state, rng, config.sweep);
      state.eta = resample_eta(state, aux, hyper, rng);

      double eps = stepsize(iter - 1, config);
      for (std::uint32_t t = 0; t < T; ++t) {
        for (std::uint32_t k = 0; k < K; ++k) {
          for (std::uint32_t i = 0; i < N; ++i) {
            m_col[i] = agg.at_ik(t, i, k);
            if (t + 1 < T) m_col[i] += aux.xi_at(t + 1, i, k);
            prior[i] = (t == 0) ? state.eta : state.eta * N * state.phi_at(t - 1, k)[i];
          }
          if (config.variant == SgmcmcVariant::expanded_mean) {
            auto& hat = phi_hat[t * K + k];
            step_expanded(hat, prior, m_col, 1.0, eps, rng);
            double sum = 0.0;
            for (double v : hat) sum += v;
            auto& col = state.phi_at(t, k);
            for (std::uint32_t i = 0; i < N; ++i) col[i] = hat[i] / sum;
          } else {
            double observed = state.eta * N;
            for (std::uint32_t i = 0; i < N; ++i) observed += m_col[i];
            auto& sc = col_scale[t * K + k];
            if (!scale_init) {
              sc = std::max(observed, 1.0);
            } else {
              sc = std::max(config.scale_ema_decay * sc +
                                (1.0 - config.scale_ema_decay) * observed,
                            1.0);
            }
            step_reduced(state.phi_at(t, k), prior, m_col, 1.0, eps, sc, rng);
          }
        }
      }
      scale_init = true;

      bool collect = iter > config.burn_in && (iter - config.burn_in - 1) % config.collect_every == 0;
      if (collect) collector.add(state);

      TraceRow row;
      row.iter = iter;
      row.log_joint = log_joint(hyper, state, agg);
      row.eta = state.eta;
      row.lambda_max = *std::max_element(state.lambda.begin(), state.lambda.end());
      row.active_k = count_active(state.lambda);
      if (config.trace_auroc && collector.sum.samples > 0) {
        row.auroc = running_auroc(collector.sum, mask);
      }
      result.trace.push_back(row);
    } catch (const std::exception& ex) {
      throw std::runtime_error("sgmcmc iteration " + std::to_string(iter) + ": " + ex.what());
    }
  }
  result.summary = collector.finalize();
  return result;
}

}  // namespace d2epm
