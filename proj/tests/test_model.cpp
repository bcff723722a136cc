#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdint>
#include <vector>

#include "d2epm/model.hpp"

using namespace d2epm;

namespace {

Hyperparams tame_hypers(std::uint32_t k) {
  Hyperparams h;
  h.k_init = k;
  h.g_k = 2.0;
  h.c0 = 8.0;
  h.alpha = 0.25;
  h.a0 = 1.0;
  h.b0 = 1.0;
  return h;
}

ModelState small_state() {
  ModelState s;
  s.N = 3;
  s.T = 2;
  s.K = 2;
  s.eta = 0.8;
  s.lambda = {3.0, 0.5};
  s.p = {0.4, 0.2};
  s.phi = {
      {0.5, 0.3, 0.2}, {0.1, 0.6, 0.3},  // t = 0, k = 0..1
      {0.2, 0.2, 0.6}, {0.7, 0.1, 0.2},  // t = 1
  };
  return s;
}

}  // namespace

TEST_CASE("intensity is the membership-weighted sum of community rates") {
  ModelState s = small_state();
  for (std::uint32_t t = 0; t < 2; ++t) {
    for (std::uint32_t i = 0; i < 3; ++i) {
      for (std::uint32_t j = 0; j < 3; ++j) {
        if (i == j) continue;
        double expect = 0.0;
        for (std::uint32_t k = 0; k < 2; ++k) {
          expect += s.phi[t * 2 + k][i] * s.lambda[k] * s.phi[t * 2 + k][j];
        }
        REQUIRE(intensity(s, t, i, j) == Catch::Approx(expect).margin(1e-12));
      }
    }
  }
  CHECK_THROWS_AS(intensity(s, 0, 1, 1), std::invalid_argument);
  CHECK_THROWS_AS(intensity(s, 2, 0, 1), std::invalid_argument);
  CHECK_THROWS_AS(intensity(s, 0, 0, 3), std::invalid_argument);
}

TEST_CASE("link probability complements the no-event chance") {
  ModelState s;
  s.N = 2;
  s.T = 1;
  s.K = 1;
  s.lambda = {4.0 * std::log(2.0)};
  s.p = {0.5};
  s.phi = {{0.5, 0.5}};
  CHECK(intensity(s, 0, 0, 1) == Catch::Approx(std::log(2.0)).margin(1e-12));
  CHECK(link_probability(s, 0, 0, 1) == Catch::Approx(0.5).margin(1e-12));

  s.lambda = {4.0};
  CHECK(intensity(s, 0, 0, 1) == Catch::Approx(1.0).margin(1e-12));
  CHECK(link_probability(s, 0, 0, 1) == Catch::Approx(-std::expm1(-1.0)).margin(1e-12));
}

TEST_CASE("simulate produces a consistent state and graph") {
  Hyperparams h = tame_hypers(3);
  RngStream root(77, 0);
  auto [state, graph] = simulate(h, 30, 4, root);

  REQUIRE(state.N == 30);
  REQUIRE(state.T == 4);
  REQUIRE(state.K == 3);
  REQUIRE(graph.num_vertices == 30);
  REQUIRE(graph.num_steps == 4);
  CHECK(state.eta > 0.0);
  for (std::uint32_t k = 0; k < 3; ++k) {
    CHECK(state.lambda[k] >= 0.0);
    CHECK(state.p[k] > 0.0);
    CHECK(state.p[k] < 1.0);
  }
  for (const auto& col : state.phi) {
    double sum = 0.0;
    for (double v : col) {
      REQUIRE(v >= 0.0);
      sum += v;
    }
    REQUIRE(std::abs(sum - 1.0) < 1e-9);
  }
  for (std::uint32_t t = 0; t < 4; ++t) {
    for (auto [i, j] : graph.snapshots[t]) {
      REQUIRE(i < j);
      REQUIRE(j < 30);
    }
  }
}

TEST_CASE("simulate replays exactly and regenerates steps from predecessors") {
  Hyperparams h = tame_hypers(2);
  RngStream root(123, 0);
  auto [s1, g1] = simulate(h, 12, 3, root);
  auto [s2, g2] = simulate(h, 12, 3, root);
  REQUIRE(s1.eta == s2.eta);
  REQUIRE(s1.phi == s2.phi);
  REQUIRE(g1.snapshots == g2.snapshots);

  // a step's memberships are a function of (seed, t, k, previous step) alone
  for (std::uint32_t t = 1; t < 3; ++t) {
    for (std::uint32_t k = 0; k < 2; ++k) {
      RngStream phi_rng = root.substream(kSimulatePhiStream + t, k);
      std::vector<double> alphas(12);
      for (std::uint32_t i = 0; i < 12; ++i) {
        alphas[i] = s1.eta * 12 * s1.phi_at(t - 1, k)[i];
      }
      auto regen = sample_dirichlet(alphas, phi_rng);
      REQUIRE(regen == s1.phi_at(t, k));
    }
  }
}

TEST_CASE("snapshot edge totals track the summed link probabilities") {
  Hyperparams h = tame_hypers(3);
  RngStream root(2024, 0);
  auto [state, graph] = simulate(h, 40, 3, root);
  for (std::uint32_t t = 0; t < 3; ++t) {
    double mean = 0.0, var = 0.0;
    for (std::uint32_t i = 0; i < 40; ++i) {
      for (std::uint32_t j = i + 1; j < 40; ++j) {
        double p = link_probability(state, t, i, j);
        mean += p;
        var += p * (1.0 - p);
      }
    }
    double got = static_cast<double>(graph.snapshots[t].size());
    CHECK(std::abs(got - mean) < 4.0 * std::sqrt(var) + 1.0);
  }
}

TEST_CASE("zero weights give an empty graph and scaling raises density") {
  Hyperparams h = tame_hypers(2);
  RngStream root(5, 0);
  ModelState state = simulate_state(h, 20, 2, root);
  ModelState dead = state;
  dead.lambda.assign(dead.K, 0.0);
  TemporalGraph empty = simulate_graph(dead, root);
  CHECK(empty.edge_count() == 0);

  ModelState hot = state;
  for (auto& l : hot.lambda) l *= 10.0;
  double base = 0.0, boosted = 0.0;
  for (std::uint32_t i = 0; i < 20; ++i) {
    for (std::uint32_t j = i + 1; j < 20; ++j) {
      base += link_probability(state, 0, i, j);
      boosted += link_probability(hot, 0, i, j);
    }
  }
  CHECK(boosted > base);
}

TEST_CASE("log joint matches a scalar re-derivation") {
  Hyperparams h = tame_hypers(2);
  ModelState s = small_state();
  Aggregates agg;
  agg.resize(3, 2, 2);
  // arbitrary consistent counts: per (t,k) the vertex counts sum to the total
  double m_ik[2][2][3] = {{{2, 1, 0}, {0, 3, 1}}, {{1, 1, 1}, {0, 0, 0}}};
  for (std::uint32_t t = 0; t < 2; ++t) {
    for (std::uint32_t k = 0; k < 2; ++k) {
      double tot = 0.0;
      for (std::uint32_t i = 0; i < 3; ++i) {
        agg.at_ik(t, i, k) = m_ik[t][k][i];
        tot += m_ik[t][k][i];
      }
      agg.m_k_t[t * 2 + k] = tot;
      agg.m_k[k] += tot;
    }
  }

  double expect = 0.0;
  // concentration prior
  expect += h.a0 * std::log(h.b0) - std::lgamma(h.a0) + (h.a0 - 1.0) * std::log(s.eta) -
            h.b0 * s.eta;
  for (std::uint32_t k = 0; k < 2; ++k) {
    double a = h.c0 * h.alpha, b = h.c0 * (1.0 - h.alpha);
    expect += std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
              (a - 1.0) * std::log(s.p[k]) + (b - 1.0) * std::log1p(-s.p[k]);
    double scale = s.p[k] / (1.0 - s.p[k]);
    expect += -h.g_k * std::log(scale) - std::lgamma(h.g_k) +
              (h.g_k - 1.0) * std::log(s.lambda[k]) - s.lambda[k] / scale;
  }
  for (std::uint32_t t = 0; t < 2; ++t) {
    for (std::uint32_t k = 0; k < 2; ++k) {
      double asum = 0.0, lognorm = 0.0;
      for (std::uint32_t i = 0; i < 3; ++i) {
        double a = t == 0 ? s.eta : s.eta * 3.0 * s.phi[(t - 1) * 2 + k][i];
        asum += a;
        lognorm += std::lgamma(a);
        expect += (a - 1.0) * std::log(s.phi[t * 2 + k][i]);
      }
      expect += std::lgamma(asum) - lognorm;
    }
  }
  for (std::uint32_t t = 0; t < 2; ++t) {
    for (std::uint32_t k = 0; k < 2; ++k) {
      double tot = agg.m_k_t[t * 2 + k];
      expect += tot * std::log(s.lambda[k]) - s.lambda[k] - std::lgamma(tot + 1.0);
      expect += std::lgamma(tot + 1.0);
      for (std::uint32_t i = 0; i < 3; ++i) {
        double c = m_ik[t][k][i];
        if (c > 0) {
          expect += c * std::log(s.phi[t * 2 + k][i]) - std::lgamma(c + 1.0);
        }
      }
    }
  }

  double got = log_joint(h, s, agg);
  REQUIRE(std::isfinite(got));
  REQUIRE(got == Catch::Approx(expect).epsilon(1e-10));
}

TEST_CASE("log joint walls off impossible states") {
  Hyperparams h = tame_hypers(2);
  ModelState s = small_state();
  Aggregates agg;
  agg.resize(3, 2, 2);
  agg.at_ik(0, 0, 0) = 2.0;
  agg.m_k_t[0] = 2.0;
  agg.m_k[0] = 2.0;

  ModelState z = s;
  z.lambda[0] = 0.0;
  CHECK(log_joint(h, z, agg) == kNegInf);

  ModelState q = s;
  q.phi[0][0] = 0.0;
  CHECK(log_joint(h, q, agg) == kNegInf);

  // scaled non-integer counts still evaluate finitely
  Aggregates frac = agg;
  frac.at_ik(0, 0, 0) = 2.5;
  frac.m_k_t[0] = 2.5;
  frac.m_k[0] = 2.5;
  CHECK(std::isfinite(log_joint(h, s, frac)));
}

TEST_CASE("shrinkage keeps most communities inactive under the sparse prior") {
  Hyperparams h;  // defaults: g 0.1, c0 1, alpha 1/K, K 50
  double total_active = 0.0;
  for (int rep = 0; rep < 100; ++rep) {
    RngStream root(4000 + rep, 0);
    ModelState s = simulate_state(h, 10, 1, root);
    double mx = 0.0;
    for (double l : s.lambda) mx = std::max(mx, l);
    int active = 0;
    for (double l : s.lambda) {
      if (mx > 0.0 && l > 0.01 * mx) ++active;
    }
    total_active += active;
  }
  CHECK(total_active / 100.0 < 25.0);
}

TEST_CASE("hyperparameter validation") {
  Hyperparams h;
  CHECK_NOTHROW(h.validate());
  CHECK(h.alpha_value() == Catch::Approx(1.0 / 50.0));
  h.alpha = 0.3;
  CHECK(h.alpha_value() == Catch::Approx(0.3));

  Hyperparams bad = h;
  bad.k_init = 0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = h;
  bad.g_k = 0.0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = h;
  bad.c0 = -1.0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = h;
  bad.a0 = 0.0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = h;
  bad.alpha = 1.0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("graph containers and the training view") {
  TemporalGraph g;
  g.num_vertices = 5;
  g.num_steps = 2;
  g.snapshots = {{{0, 1}, {1, 2}, {3, 4}}, {{0, 4}}};
  g.sort_edges();
  CHECK(g.pair_count() == 10);
  CHECK(g.grid_size() == 20);
  CHECK(g.edge_count() == 4);
  CHECK(g.has_edge(0, 1, 0));
  CHECK(g.has_edge(0, 3, 4));
  CHECK_FALSE(g.has_edge(0, 0, 4));
  CHECK_FALSE(g.has_edge(1, 1, 2));
  CHECK_FALSE(g.has_edge(0, 2, 2));

  HeldOutMask mask;
  mask.entries = {{0, 1, 2, 1}, {1, 0, 4, 1}, {1, 2, 3, 0}};
  mask.fraction = 0.15;
  CHECK(mask.contains(0, 1, 2));
  CHECK(mask.contains(0, 2, 1));
  CHECK(mask.contains(1, 2, 3));
  CHECK_FALSE(mask.contains(0, 3, 4));

  TemporalGraph train = training_view(g, mask);
  CHECK(train.edge_count() == 2);
  CHECK(train.has_edge(0, 0, 1));
  CHECK(train.has_edge(0, 3, 4));
  CHECK_FALSE(train.has_edge(0, 1, 2));
  CHECK_FALSE(train.has_edge(1, 0, 4));
}
