#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "d2epm/densities.hpp"
#include "d2epm/graph.hpp"
#include "d2epm/rng.hpp"
#include "d2epm/samplers.hpp"

namespace d2epm {

struct Hyperparams {
  std::uint32_t k_init = 50;
  double g_k = 0.1;
  double c0 = 1.0;
  double alpha = 0.0;  // 0 requests the 1/K default
  double a0 = 0.01;
  double b0 = 0.01;

  double alpha_value() const { return alpha > 0.0 ? alpha : 1.0 / k_init; }

  void validate() const {
    detail::require(k_init >= 1, "k_init must be at least 1");
    detail::require(g_k > 0.0 && c0 > 0.0 && a0 > 0.0 && b0 > 0.0,
                    "hyperparameters must be positive");
    detail::require(alpha >= 0.0 && alpha < 1.0, "alpha must lie in [0,1)");
  }
};

struct ModelState {
  std::uint32_t N = 0, T = 0, K = 0;
  double eta = 1.0;
  std::vector<double> lambda;              // K
  std::vector<double> p;                   // K
  std::vector<std::vector<double>> phi;    // [t*K + k] -> N-vector simplex

  std::vector<double>& phi_at(std::uint32_t t, std::uint32_t k) { return phi[t * K + k]; }
  const std::vector<double>& phi_at(std::uint32_t t, std::uint32_t k) const {
    return phi[t * K + k];
  }
};

// real-valued so that minibatch-scaled counts reuse the same conditionals
struct Aggregates {
  std::uint32_t N = 0, T = 0, K = 0;
  std::vector<double> m_ik;   // [(t*N + i)*K + k]
  std::vector<double> m_k_t;  // [t*K + k]
  std::vector<double> m_k;    // [k]

  void resize(std::uint32_t n, std::uint32_t t, std::uint32_t k) {
    N = n;
    T = t;
    K = k;
    m_ik.assign(static_cast<std::size_t>(t) * n * k, 0.0);
    m_k_t.assign(static_cast<std::size_t>(t) * k, 0.0);
    m_k.assign(k, 0.0);
  }

  double& at_ik(std::uint32_t t, std::uint32_t i, std::uint32_t k) {
    return m_ik[(static_cast<std::size_t>(t) * N + i) * K + k];
  }
  double at_ik(std::uint32_t t, std::uint32_t i, std::uint32_t k) const {
    return m_ik[(static_cast<std::size_t>(t) * N + i) * K + k];
  }
};

struct LatentCounts {
  // per-edge totals and per-community splits, aligned with training snapshot edge order
  std::vector<std::vector<std::uint32_t>> m_edge;    // [t][e]
  std::vector<std::vector<std::uint32_t>> m_edge_k;  // [t][e*K + k]
  Aggregates agg;
};

inline double intensity(const ModelState& state, std::uint32_t t, std::uint32_t i,
                        std::uint32_t j) {
  detail::require(i != j, "intensity undefined for self pairs");
  detail::require(t < state.T && i < state.N && j < state.N, "intensity index out of range");
  double sum = 0.0;
  for (std::uint32_t k = 0; k < state.K; ++k) {
    const auto& col = state.phi_at(t, k);
    sum += col[i] * state.lambda[k] * col[j];
  }
  return sum;
}

inline double link_probability(const ModelState& state, std::uint32_t t, std::uint32_t i,
                               std::uint32_t j) {
  return -std::expm1(-intensity(state, t, i, j));
}

// substream tags used by simulate; the phi tag is part of the contract so a
// chain step can be regenerated from its predecessor
inline constexpr std::uint64_t kSimulatePhiStream = 1000;
inline constexpr std::uint64_t kSimulateEdgeStream = 2000000;

inline ModelState simulate_state(const Hyperparams& hyper, std::uint32_t N, std::uint32_t T,
                                 const RngStream& root) {
  hyper.validate();
  detail::require(N >= 2 && T >= 1, "simulate needs N >= 2 and T >= 1");
  ModelState state;
  state.N = N;
  state.T = T;
  state.K = hyper.k_init;
  const double alpha = hyper.alpha_value();

  RngStream scalar_rng = root.substream(0, 0);
  state.eta = sample_gamma(hyper.a0, 1.0 / hyper.b0, scalar_rng);
  state.p.resize(state.K);
  state.lambda.resize(state.K);
  for (std::uint32_t k = 0; k < state.K; ++k) {
    state.p[k] = sample_beta(hyper.c0 * alpha, hyper.c0 * (1.0 - alpha), scalar_rng);
    state.lambda[k] = sample_gamma(hyper.g_k, state.p[k] / (1.0 - state.p[k]), scalar_rng);
  }

  state.phi.resize(static_cast<std::size_t>(T) * state.K);
  for (std::uint32_t t = 0; t < T; ++t) {
    for (std::uint32_t k = 0; k < state.K; ++k) {
      RngStream phi_rng = root.substream(kSimulatePhiStream + t, k);
      std::vector<double> alphas(N);
      if (t == 0) {
        for (auto& a : alphas) a = state.eta;
      } else {
        const auto& prev = state.phi_at(t - 1, k);
        for (std::uint32_t i = 0; i < N; ++i) alphas[i] = state.eta * N * prev[i];
      }
      state.phi_at(t, k) = sample_dirichlet(alphas, phi_rng);
    }
  }
  return state;
}

inline TemporalGraph simulate_graph(const ModelState& state, const RngStream& root) {
  TemporalGraph graph;
  graph.num_vertices = state.N;
  graph.num_steps = state.T;
  graph.snapshots.resize(state.T);
  for (std::uint32_t t = 0; t < state.T; ++t) {
    RngStream edge_rng = root.substream(kSimulateEdgeStream + t, 0);
    for (std::uint32_t i = 0; i < state.N; ++i) {
      for (std::uint32_t j = i + 1; j < state.N; ++j) {
        if (edge_rng.uniform() < link_probability(state, t, i, j)) {
          graph.snapshots[t].emplace_back(i, j);
        }
      }
    }
  }
  return graph;
}

inline std::pair<ModelState, TemporalGraph> simulate(const Hyperparams& hyper, std::uint32_t N,
                                                     std::uint32_t T, const RngStream& root) {
  ModelState state = simulate_state(hyper, N, T, root);
  TemporalGraph graph = simulate_graph(state, root);
  return {std::move(state), std::move(graph)};
}

namespace detail {

// lgamma(x+1) extension lets minibatch-scaled (non-integer) counts share the formula
inline double log_joint_impl(const Hyperparams& hyper, const ModelState& state,
                             const Aggregates& agg) {
  hyper.validate();
  require(agg.N == state.N && agg.T == state.T && agg.K == state.K,
          "aggregate dimensions must match the state");
  const double alpha = hyper.alpha_value();
  const std::uint32_t N = state.N, T = state.T, K = state.K;

  double lp = log_gamma_pdf(state.eta, hyper.a0, 1.0 / hyper.b0);
  for (std::uint32_t k = 0; k < K; ++k) {
    lp += log_beta_pdf(state.p[k], hyper.c0 * alpha, hyper.c0 * (1.0 - alpha));
    lp += log_gamma_pdf(state.lambda[k], hyper.g_k, state.p[k] / (1.0 - state.p[k]));
  }

  std::vector<double> alphas(N);
  for (std::uint32_t t = 0; t < T; ++t) {
    for (std::uint32_t k = 0; k < K; ++k) {
      if (t == 0) {
        for (auto& a : alphas) a = state.eta;
      } else {
        const auto& prev = state.phi_at(t - 1, k);
        for (std::uint32_t i = 0; i < N; ++i) alphas[i] = state.eta * N * prev[i];
      }
      lp += log_dirichlet_pdf(state.phi_at(t, k), alphas);
    }
  }

  for (std::uint32_t t = 0; t < T; ++t) {
    for (std::uint32_t k = 0; k < K; ++k) {
      double mk = agg.m_k_t[t * K + k];
      if (state.lambda[k] <= 0.0) {
        if (mk > 0.0) return kNegInf;
      } else {
        lp += mk * std::log(state.lambda[k]) - state.lambda[k] - std::lgamma(mk + 1.0);
      }
      const auto& col = state.phi_at(t, k);
      double total = 0.0;
      for (std::uint32_t i = 0; i < N; ++i) {
        double c = agg.at_ik(t, i, k);
        if (c == 0.0) continue;
        total += c;
        if (col[i] <= 0.0) return kNegInf;
        lp += c * std::log(col[i]) - std::lgamma(c + 1.0);
      }
      lp += std::lgamma(total + 1.0);
    }
  }
  return lp;
}

}  // namespace detail

inline double log_joint(const Hyperparams& hyper, const ModelState& state,
                        const Aggregates& agg) {
  return detail::log_joint_impl(hyper, state, agg);
}

inline double log_joint(const Hyperparams& hyper, const ModelState& state,
                        const LatentCounts& counts) {
  return detail::log_joint_impl(hyper, state, counts.agg);
}

}  // namespace d2epm
