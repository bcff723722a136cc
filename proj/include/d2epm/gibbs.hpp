#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "d2epm/graph.hpp"
#include "d2epm/metrics.hpp"
#include "d2epm/model.hpp"
#include "d2epm/rng.hpp"
#include "d2epm/samplers.hpp"

namespace d2epm {

struct AuxiliaryVars {
  std::uint32_t N = 0, T = 0, K = 0;
  std::vector<double> zeta;        // [t*K + k], rows 1..T-1 populated
  std::vector<std::uint32_t> xi;   // [(t*N + i)*K + k], rows 1..T-1 populated

  void resize(std::uint32_t n, std::uint32_t t, std::uint32_t k) {
    N = n;
    T = t;
    K = k;
    zeta.assign(static_cast<std::size_t>(t) * k, 0.0);
    xi.assign(static_cast<std::size_t>(t) * n * k, 0);
  }

  std::uint32_t& xi_at(std::uint32_t t, std::uint32_t i, std::uint32_t k) {
    return xi[(static_cast<std::size_t>(t) * N + i) * K + k];
  }
  std::uint32_t xi_at(std::uint32_t t, std::uint32_t i, std::uint32_t k) const {
    return xi[(static_cast<std::size_t>(t) * N + i) * K + k];
  }
};

struct SweepOptions {
  // fold the tables passed back from t+1 into the customer counts at t
  // (the fully collapsed backward recursion)
  bool accumulate_backward = true;
  // run the table pass on the first snapshot too, against its flat prior, so
  // the concentration update sees the whole chain
  bool augment_first_step = true;
  // slice-sample the weight probability from its exact conditional instead of
  // the moment-matched beta
  bool exact_weight_update = true;
};

// t runs from the last snapshot down to the second (plus the first-snapshot
// row when enabled); the pass at t conditions on the previous step's
// memberships
inline AuxiliaryVars backward_pass(const ModelState& state, const Aggregates& agg,
                                   RngStream& rng, const SweepOptions& opts = {}) {
  AuxiliaryVars aux;
  aux.resize(state.N, state.T, state.K);
  const std::uint32_t N = state.N, T = state.T, K = state.K;
  for (std::uint32_t t = T; t-- > 1;) {
    for (std::uint32_t k = 0; k < K; ++k) {
      double zeta_count = agg.m_k_t[t * K + k];
      if (opts.accumulate_backward && t + 1 < T) {
        for (std::uint32_t i = 0; i < N; ++i) zeta_count += aux.xi_at(t + 1, i, k);
      }
      aux.zeta[t * K + k] = sample_beta(zeta_count, state.eta * N, rng);
      const auto& prev = state.phi_at(t - 1, k);
      for (std::uint32_t i = 0; i < N; ++i) {
        double customers = agg.at_ik(t, i, k);
        if (opts.accumulate_backward && t + 1 < T) customers += aux.xi_at(t + 1, i, k);
        double conc = state.eta * N * prev[i];
        if (conc < kAlphaFloor) conc = kAlphaFloor;
        aux.xi_at(t, i, k) = static_cast<std::uint32_t>(
            sample_crt(static_cast<std::uint64_t>(std::llround(customers)), conc, rng));
      }
    }
  }
  if (opts.augment_first_step) {
    for (std::uint32_t k = 0; k < K; ++k) {
      double zeta_count = agg.m_k_t[k];
      std::vector<double> customers(N);
      for (std::uint32_t i = 0; i < N; ++i) {
        customers[i] = agg.at_ik(0, i, k);
        if (opts.accumulate_backward && T > 1) customers[i] += aux.xi_at(1, i, k);
      }
      if (opts.accumulate_backward && T > 1) {
        zeta_count = 0.0;
        for (std::uint32_t i = 0; i < N; ++i) zeta_count += customers[i];
      }
      aux.zeta[k] = sample_beta(zeta_count, state.eta * N, rng);
      for (std::uint32_t i = 0; i < N; ++i) {
        aux.xi_at(0, i, k) = static_cast<std::uint32_t>(sample_crt(
            static_cast<std::uint64_t>(std::llround(customers[i])), state.eta, rng));
      }
    }
  }
  return aux;
}

// forward Dirichlet-conjugate pass over all snapshots
inline void resample_memberships(ModelState& state, const Aggregates& agg,
                                 const AuxiliaryVars& aux, RngStream& rng) {
  const std::uint32_t N = state.N, T = state.T, K = state.K;
  std::vector<double> alphas(N);
  for (std::uint32_t t = 0; t < T; ++t) {
    for (std::uint32_t k = 0; k < K; ++k) {
      const double* prev = (t > 0) ? state.phi_at(t - 1, k).data() : nullptr;
      for (std::uint32_t i = 0; i < N; ++i) {
        double a = (t > 0) ? state.eta * N * prev[i] : state.eta;
        if (t + 1 < T) a += aux.xi_at(t + 1, i, k);
        a += agg.at_ik(t, i, k);
        alphas[i] = a;
      }
      state.phi_at(t, k) = sample_dirichlet(alphas, rng);
    }
  }
}

namespace detail {

// shrinkage slice sampler over (0,1) for the exact weight-probability
// conditional, with the gamma weight integrated out:
//   f(p) = p^(a-1) (1-p)^(b-1) / (1 + (T-1) p)^(m+g)
inline double slice_weight_probability(double a, double b, double mg, double tm1,
                                       double current, RngStream& rng) {
  auto logf = [&](double p) {
    return (a - 1.0) * std::log(p) + (b - 1.0) * std::log1p(-p) - mg * std::log1p(tm1 * p);
  };
  double level = logf(current) + std::log(rng.uniform());
  double lo = 0.0, hi = 1.0;
  for (int step = 0; step < 200; ++step) {
    double cand = lo + (hi - lo) * rng.uniform();
    if (logf(cand) >= level) return cand;
    if (cand < current) {
      lo = cand;
    } else {
      hi = cand;
    }
  }
  return current;
}

}  // namespace detail

// p is drawn with lambda marginalized out, then lambda given the fresh p
inline void resample_weights(const Aggregates& agg, const Hyperparams& hyper,
                             ModelState& state, RngStream& rng,
                             const SweepOptions& opts = {}) {
  const double alpha = hyper.alpha_value();
  const double T = static_cast<double>(state.T);
  for (std::uint32_t k = 0; k < state.K; ++k) {
    double mk = agg.m_k[k];
    if (opts.exact_weight_update) {
      state.p[k] = detail::slice_weight_probability(
          hyper.c0 * alpha + mk, hyper.c0 * (1.0 - alpha) + hyper.g_k, mk + hyper.g_k,
          T - 1.0, state.p[k], rng);
    } else {
      state.p[k] =
          sample_beta(hyper.c0 * alpha + mk / T, hyper.c0 * (1.0 - alpha) + hyper.g_k, rng);
    }
    double scale = state.p[k] / (1.0 + (T - 1.0) * state.p[k]);
    state.lambda[k] = sample_gamma(hyper.g_k + mk, scale, rng);
  }
}

inline double resample_eta(const ModelState& state, const AuxiliaryVars& aux,
                           const Hyperparams& hyper, RngStream& rng) {
  double shape = hyper.a0;
  double rate = hyper.b0;
  const std::uint32_t N = state.N, T = state.T, K = state.K;
  for (std::uint32_t t = 0; t < T; ++t) {
    for (std::uint32_t k = 0; k < K; ++k) {
      rate -= N * std::log1p(-aux.zeta[t * K + k]);
      for (std::uint32_t i = 0; i < N; ++i) shape += aux.xi_at(t, i, k);
    }
  }
  detail::require(rate > 0.0, "eta posterior rate must stay positive");
  return sample_gamma(shape, 1.0 / rate, rng);
}

// ZTP + multinomial partition on every observed training edge
inline LatentCounts resample_edge_counts(const ModelState& state, const TemporalGraph& train,
                                         RngStream& rng) {
  const std::uint32_t T = state.T, K = state.K;
  detail::require(train.num_steps == T && train.num_vertices == state.N,
                  "training graph dimensions must match the state");
  LatentCounts counts;
  counts.m_edge.resize(T);
  counts.m_edge_k.resize(T);
  counts.agg.resize(state.N, T, K);
  std::vector<double> rates(K);
  for (std::uint32_t t = 0; t < T; ++t) {
    const auto& snap = train.snapshots[t];
    counts.m_edge[t].resize(snap.size());
    counts.m_edge_k[t].assign(snap.size() * K, 0);
    for (std::size_t e = 0; e < snap.size(); ++e) {
      auto [i, j] = snap[e];
      double total = 0.0;
      for (std::uint32_t k = 0; k < K; ++k) {
        const auto& col = state.phi_at(t, k);
        rates[k] = col[i] * state.lambda[k] * col[j];
        total += rates[k];
      }
      if (!(total > 0.0)) {
        throw std::runtime_error("observed edge has zero intensity at t=" + std::to_string(t));
      }
      std::uint64_t m = sample_ztp(total, rng);
      auto parts = sample_multinomial(m, rates, rng);
      counts.m_edge[t][e] = static_cast<std::uint32_t>(m);
      for (std::uint32_t k = 0; k < K; ++k) {
        std::uint32_t c = static_cast<std::uint32_t>(parts[k]);
        counts.m_edge_k[t][e * K + k] = c;
        if (c == 0) continue;
        counts.agg.at_ik(t, i, k) += c;
        counts.agg.at_ik(t, j, k) += c;
        counts.agg.m_k_t[t * K + k] += c;
        counts.agg.m_k[k] += c;
      }
    }
  }
  return counts;
}

inline LatentCounts resample_edge_counts(const ModelState& state, const TemporalGraph& graph,
                                         const HeldOutMask& mask, RngStream& rng) {
  TemporalGraph train = training_view(graph, mask);
  return resample_edge_counts(state, train, rng);
}

struct GibbsConfig {
  std::uint64_t iterations = 3000;
  std::uint64_t burn_in = 2000;
  std::uint64_t collect_every = 1;
  std::uint64_t seed = 0;
  bool trace_auroc = false;
  SweepOptions sweep;

  void validate() const {
    detail::require(iterations >= 1, "iterations must be positive");
    detail::require(burn_in < iterations, "burn_in must be smaller than iterations");
    detail::require(collect_every >= 1, "collect_every must be positive");
  }
};

struct TraceRow {
  std::uint64_t iter = 0;
  double log_joint = 0.0;
  double eta = 0.0;
  double lambda_max = 0.0;
  std::uint32_t active_k = 0;
  double auroc = std::numeric_limits<double>::quiet_NaN();
};

struct PosteriorSummary {
  std::uint32_t N = 0, T = 0, K = 0;
  double eta_mean = 0.0;
  std::vector<double> lambda_mean;
  std::vector<double> p_mean;
  std::vector<std::vector<double>> phi_mean;  // [t*K + k] -> N
  std::vector<double> heldout_score;          // aligned with mask entries
  std::uint64_t samples = 0;

  const std::vector<double>& phi_mean_at(std::uint32_t t, std::uint32_t k) const {
    return phi_mean[t * K + k];
  }
};

struct InferenceResult {
  PosteriorSummary summary;
  std::vector<TraceRow> trace;
};

inline ModelState init_state(const Hyperparams& hyper, std::uint32_t N, std::uint32_t T,
                             RngStream& rng) {
  ModelState state;
  state.N = N;
  state.T = T;
  state.K = hyper.k_init;
  state.eta = 1.0;
  state.lambda.assign(state.K, 1.0);
  state.p.assign(state.K, 0.5);
  state.phi.resize(static_cast<std::size_t>(T) * state.K);
  std::vector<double> ones(N, 1.0);
  for (auto& col : state.phi) col = sample_dirichlet(ones, rng);
  return state;
}

inline std::uint32_t count_active(const std::vector<double>& lambda) {
  double mx = 0.0;
  for (double l : lambda) mx = std::max(mx, l);
  if (mx <= 0.0) return 0;
  std::uint32_t n = 0;
  for (double l : lambda) {
    if (l > 0.01 * mx) ++n;
  }
  return n;
}

namespace detail {

struct Collector {
  PosteriorSummary sum;
  const HeldOutMask* mask;

  void init(const ModelState& state, const HeldOutMask& m) {
    mask = &m;
    sum.N = state.N;
    sum.T = state.T;
    sum.K = state.K;
    sum.lambda_mean.assign(state.K, 0.0);
    sum.p_mean.assign(state.K, 0.0);
    sum.phi_mean.assign(state.phi.size(), std::vector<double>(state.N, 0.0));
    sum.heldout_score.assign(m.entries.size(), 0.0);
  }

  void add(const ModelState& state) {
    ++sum.samples;
    sum.eta_mean += state.eta;
    for (std::uint32_t k = 0; k < state.K; ++k) {
      sum.lambda_mean[k] += state.lambda[k];
      sum.p_mean[k] += state.p[k];
    }
    for (std::size_t c = 0; c < state.phi.size(); ++c) {
      const auto& src = state.phi[c];
      auto& dst = sum.phi_mean[c];
      for (std::uint32_t i = 0; i < state.N; ++i) dst[i] += src[i];
    }
    for (std::size_t e = 0; e < mask->entries.size(); ++e) {
      const auto& entry = mask->entries[e];
      sum.heldout_score[e] += link_probability(state, entry.t, entry.i, entry.j);
    }
  }

  PosteriorSummary finalize() {
    PosteriorSummary out = sum;
    if (out.samples == 0) return out;
    double inv = 1.0 / static_cast<double>(out.samples);
    out.eta_mean *= inv;
    for (auto& v : out.lambda_mean) v *= inv;
    for (auto& v : out.p_mean) v *= inv;
    for (auto& col : out.phi_mean)
      for (auto& v : col) v *= inv;
    for (auto& v : out.heldout_score) v *= inv;
    return out;
  }
};

}  // namespace detail

// AUROC of the running posterior-mean link probabilities on the masked grid;
// NaN while only one class is present
inline double running_auroc(const PosteriorSummary& partial, const HeldOutMask& mask) {
  if (partial.samples == 0 || mask.entries.empty()) {
    return std::numeric_limits<double>::quiet_NaN();
  }
  std::vector<ScoredEntry> scored(mask.entries.size());
  for (std::size_t e = 0; e < mask.entries.size(); ++e) {
    scored[e] = {partial.heldout_score[e], mask.entries[e].label != 0};
  }
  try {
    return auroc(scored);
  } catch (const std::invalid_argument&) {
    return std::numeric_limits<double>::quiet_NaN();
  }
}

inline InferenceResult run_gibbs(const TemporalGraph& graph, const HeldOutMask& mask,
                                 const Hyperparams& hyper, const GibbsConfig& config,
                                 RngStream& rng) {
  hyper.validate();
  config.validate();
  TemporalGraph train = training_view(graph, mask);
  detail::require(train.edge_count() > 0, "no training edges remain after masking");

  ModelState state = init_state(hyper, graph.num_vertices, graph.num_steps, rng);
  detail::Collector collector;
  collector.init(state, mask);
  InferenceResult result;
  result.trace.reserve(config.iterations);

  for (std::uint64_t iter = 1; iter <= config.iterations; ++iter) {
    try {
      LatentCounts counts = resample_edge_counts(state, train, rng);
      AuxiliaryVars aux = backward_pass(state, counts.agg, rng, config.sweep);
      resample_weights(counts.agg, hyper, state, rng, config.sweep);
      state.eta = resample_eta(state, aux, hyper, rng);
      resample_memberships(state, counts.agg, aux, rng);

      bool collect = iter > config.burn_in && (iter - config.burn_in - 1) % config.collect_every == 0;
      if (collect) collector.add(state);

      TraceRow row;
      row.iter = iter;
      row.log_joint = log_joint(hyper, state, counts);
      row.eta = state.eta;
      row.lambda_max = *std::max_element(state.lambda.begin(), state.lambda.end());
      row.active_k = count_active(state.lambda);
      if (config.trace_auroc && collector.sum.samples > 0) {
        row.auroc = running_auroc(collector.sum, mask);
      }
      result.trace.push_back(row);
    } catch (const std::exception& ex) {
      throw std::runtime_error("gibbs iteration " + std::to_string(iter) + ": " + ex.what());
    }
  }
  result.summary = collector.finalize();
  return result;
}

}  // namespace d2epm
