#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdint>
#include <map>
#include <vector>

#include "d2epm/rng.hpp"
#include "d2epm/samplers.hpp"

using namespace d2epm;

namespace {

std::vector<std::vector<double>> stirling_first_kind(std::size_t n_max) {
  std::vector<std::vector<double>> s(n_max + 1);
  s[0] = {1.0};
  for (std::size_t n = 1; n <= n_max; ++n) {
    s[n].assign(n + 1, 0.0);
    for (std::size_t j = 1; j <= n; ++j) {
      s[n][j] = s[n - 1][j - 1] +
                (j < n ? static_cast<double>(n - 1) * s[n - 1][j] : 0.0);
    }
  }
  return s;
}

// P(tables = j | count, r) = |s(count, j)| r^j / (r)_count
std::vector<double> crt_pmf(std::uint64_t count, double r) {
  auto s = stirling_first_kind(count);
  double rising = 1.0;
  for (std::uint64_t i = 0; i < count; ++i) rising *= r + static_cast<double>(i);
  std::vector<double> pmf(count + 1, 0.0);
  if (count == 0) {
    pmf[0] = 1.0;
    return pmf;
  }
  for (std::uint64_t j = 1; j <= count; ++j) {
    pmf[j] = s[count][j] * std::pow(r, static_cast<double>(j)) / rising;
  }
  return pmf;
}

std::vector<double> logarithmic_pmf(double p, std::size_t cap) {
  std::vector<double> pmf(cap + 1, 0.0);
  double c = -1.0 / std::log1p(-p);
  double pk = p;
  for (std::size_t k = 1; k <= cap; ++k) {
    pmf[k] = c * pk / static_cast<double>(k);
    pk *= p;
  }
  return pmf;
}

std::vector<double> poisson_pmf(double rate, std::size_t cap) {
  std::vector<double> pmf(cap + 1, 0.0);
  for (std::size_t k = 0; k <= cap; ++k) {
    pmf[k] = std::exp(-rate + static_cast<double>(k) * std::log(rate) -
                      std::lgamma(static_cast<double>(k) + 1.0));
  }
  return pmf;
}

std::vector<double> ztp_pmf(double rate, std::size_t cap) {
  auto pmf = poisson_pmf(rate, cap);
  double scale = 1.0 / -std::expm1(-rate);
  pmf[0] = 0.0;
  for (auto& v : pmf) v *= scale;
  return pmf;
}

// total variation against an exact pmf; mass beyond the table goes to a tail
// bucket on both sides
double tv_exact(const std::vector<std::uint64_t>& draws, const std::vector<double>& pmf) {
  std::vector<double> emp(pmf.size(), 0.0);
  double emp_tail = 0.0;
  double inv = 1.0 / static_cast<double>(draws.size());
  for (auto d : draws) {
    if (d < pmf.size()) {
      emp[d] += inv;
    } else {
      emp_tail += inv;
    }
  }
  double exact_mass = 0.0;
  double tv = 0.0;
  for (std::size_t k = 0; k < pmf.size(); ++k) {
    tv += std::abs(emp[k] - pmf[k]);
    exact_mass += pmf[k];
  }
  tv += std::abs(emp_tail - (1.0 - exact_mass));
  return 0.5 * tv;
}

double tv_between(const std::map<std::pair<std::uint64_t, std::uint64_t>, double>& a,
                  const std::map<std::pair<std::uint64_t, std::uint64_t>, double>& b) {
  double tv = 0.0;
  for (const auto& [k, v] : a) {
    auto it = b.find(k);
    tv += std::abs(v - (it == b.end() ? 0.0 : it->second));
  }
  for (const auto& [k, v] : b) {
    if (a.find(k) == a.end()) tv += v;
  }
  return 0.5 * tv;
}

template <typename F>
std::pair<double, double> mean_se(std::uint64_t n, F&& draw) {
  double sum = 0.0, sumsq = 0.0;
  for (std::uint64_t i = 0; i < n; ++i) {
    double x = draw();
    sum += x;
    sumsq += x * x;
  }
  double mean = sum / static_cast<double>(n);
  double var = sumsq / static_cast<double>(n) - mean * mean;
  return {mean, std::sqrt(std::max(var, 0.0) / static_cast<double>(n))};
}

}  // namespace

TEST_CASE("rng streams are deterministic and distinct") {
  RngStream a(42, 7), b(42, 7), c(42, 8);
  bool same = true, diff = false;
  for (int i = 0; i < 64; ++i) {
    auto x = a.next_u64(), y = b.next_u64(), z = c.next_u64();
    same = same && (x == y);
    diff = diff || (x != z);
  }
  CHECK(same);
  CHECK(diff);

  RngStream root(9, 0);
  RngStream s1 = root.substream(5, 9), s2 = root.substream(5, 9), s3 = root.substream(5, 10);
  CHECK(s1.next_u64() == s2.next_u64());
  CHECK(s1.next_u64() != s3.next_u64());
}

TEST_CASE("uniform stays inside the open unit interval") {
  RngStream rng(1, 1);
  for (int i = 0; i < 2000000; ++i) {
    double u = rng.uniform();
    REQUIRE(u > 0.0);
    REQUIRE(u < 1.0);
  }
}

TEST_CASE("normal moments") {
  RngStream rng(2, 1);
  double sum = 0.0, sumsq = 0.0, inside = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    double x = rng.normal();
    sum += x;
    sumsq += x * x;
    if (std::abs(x) < 1.959964) inside += 1.0;
  }
  CHECK(std::abs(sum / n) < 4.0 / std::sqrt(static_cast<double>(n)));
  CHECK(std::abs(sumsq / n - 1.0) < 4.0 * std::sqrt(2.0 / n));
  CHECK(std::abs(inside / n - 0.95) < 4.0 * std::sqrt(0.95 * 0.05 / n));
}

TEST_CASE("gamma sampler matches moments across shape regimes") {
  RngStream rng(3, 1);
  auto [m1, se1] = mean_se(100000, [&] { return sample_gamma(1.0, 2.0, rng); });
  CHECK(std::abs(m1 - 2.0) < 4.0 * se1);

  auto [m2, se2] = mean_se(100000, [&] { return sample_gamma(0.05, 1.0, rng); });
  CHECK(std::abs(m2 - 0.05) < 4.0 * se2);

  auto [m3, se3] = mean_se(100000, [&] { return sample_gamma(7.5, 0.4, rng); });
  CHECK(std::abs(m3 - 3.0) < 4.0 * se3);

  auto [lg, selg] = mean_se(100000, [&] { return std::exp(sample_log_gamma(0.02, rng)); });
  CHECK(std::abs(lg - 0.02) < 4.0 * selg);

  CHECK_THROWS_AS(sample_gamma(0.0, 1.0, rng), std::invalid_argument);
  CHECK_THROWS_AS(sample_gamma(-1.0, 1.0, rng), std::invalid_argument);
  CHECK_THROWS_AS(sample_gamma(1.0, -2.0, rng), std::invalid_argument);
}

TEST_CASE("beta sampler") {
  RngStream rng(4, 1);
  auto [m, se] = mean_se(100000, [&] { return sample_beta(2.0, 2.0, rng); });
  CHECK(std::abs(m - 0.5) < 4.0 * se);

  auto [m2, se2] = mean_se(100000, [&] { return sample_beta(2.0, 6.0, rng); });
  CHECK(std::abs(m2 - 0.25) < 4.0 * se2);

  for (int i = 0; i < 10000; ++i) {
    double x = sample_beta(0.01, 0.01, rng);
    REQUIRE(x > 0.0);
    REQUIRE(x < 1.0);
  }
  CHECK_THROWS_AS(sample_beta(0.0, 0.0, rng), std::invalid_argument);
  CHECK_THROWS_AS(sample_beta(-1.0, 1.0, rng), std::invalid_argument);
}

TEST_CASE("dirichlet sampler stays on the simplex with the right means") {
  RngStream rng(5, 1);
  std::vector<double> alphas{2.0, 6.0};
  double sum0 = 0.0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    auto x = sample_dirichlet(alphas, rng);
    REQUIRE(x.size() == 2);
    REQUIRE(std::abs(x[0] + x[1] - 1.0) < 1e-12);
    REQUIRE(x[0] > 0.0);
    sum0 += x[0];
  }
  double se = std::sqrt(2.0 * 6.0 / (64.0 * 9.0) / n);
  CHECK(std::abs(sum0 / n - 0.25) < 4.0 * se);

  std::vector<double> tiny{1e-12, 1e-12, 1e-12};
  auto x = sample_dirichlet(tiny, rng);
  double s = 0.0;
  for (double v : x) {
    REQUIRE(v >= 0.0);
    s += v;
  }
  CHECK(std::abs(s - 1.0) < 1e-9);

  CHECK_THROWS_AS(sample_dirichlet({}, rng), std::invalid_argument);
  CHECK_THROWS_AS(sample_dirichlet({1.0, -1.0}, rng), std::invalid_argument);
}

TEST_CASE("poisson sampler in both regimes") {
  RngStream rng(6, 1);
  std::vector<std::uint64_t> lo(50000);
  for (auto& d : lo) d = sample_poisson(3.0, rng);
  CHECK(tv_exact(lo, poisson_pmf(3.0, 40)) < 0.02);

  double sum = 0.0, sumsq = 0.0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    double x = static_cast<double>(sample_poisson(40.0, rng));
    sum += x;
    sumsq += x * x;
  }
  double mean = sum / n, var = sumsq / n - mean * mean;
  CHECK(std::abs(mean - 40.0) < 4.0 * std::sqrt(40.0 / n));
  CHECK(std::abs(var - 40.0) < 4.0 * std::sqrt((40.0 * 121.0 - 1600.0) / n));

  std::vector<std::uint64_t> edge(50000);
  for (auto& d : edge) d = sample_poisson(9.99, rng);
  CHECK(tv_exact(edge, poisson_pmf(9.99, 60)) < 0.02);
  for (auto& d : edge) d = sample_poisson(10.01, rng);
  CHECK(tv_exact(edge, poisson_pmf(10.01, 60)) < 0.02);

  CHECK(sample_poisson(0.0, rng) == 0);
}

TEST_CASE("multinomial conserves totals and matches marginal means") {
  RngStream rng(7, 1);
  std::vector<double> probs{0.2, 0.8};
  double sum0 = 0.0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    auto parts = sample_multinomial(100, probs, rng);
    REQUIRE(parts[0] + parts[1] == 100);
    sum0 += static_cast<double>(parts[0]);
  }
  double se = std::sqrt(100.0 * 0.2 * 0.8 / n);
  CHECK(std::abs(sum0 / n - 20.0) < 4.0 * se);

  auto zero = sample_multinomial(0, probs, rng);
  CHECK(zero[0] + zero[1] == 0);
  CHECK_THROWS_AS(sample_multinomial(5, std::vector<double>{0.0, 0.0}, rng),
                  std::invalid_argument);
  CHECK_THROWS_AS(sample_multinomial(5, std::vector<double>{0.5, -0.5}, rng),
                  std::invalid_argument);
}

TEST_CASE("negative binomial moments") {
  RngStream rng(8, 1);
  auto [m, se] = mean_se(100000, [&] { return static_cast<double>(sample_nb(3.0, 0.5, rng)); });
  CHECK(std::abs(m - 3.0) < 4.0 * se);
}

TEST_CASE("logarithmic sampler against the truncated pmf") {
  RngStream rng(9, 1);
  auto [m, se] = mean_se(100000, [&] { return static_cast<double>(sample_logarithmic(0.5, rng)); });
  double exact = -0.5 / (0.5 * std::log(0.5));
  CHECK(std::abs(exact - 1.4427) < 1e-4);
  CHECK(std::abs(m - exact) < 4.0 * se);

  std::vector<std::uint64_t> draws(50000);
  for (auto& d : draws) d = sample_logarithmic(0.9, rng);
  CHECK(tv_exact(draws, logarithmic_pmf(0.9, 1000)) < 0.01);

  CHECK_THROWS_AS(sample_logarithmic(0.0, rng), std::invalid_argument);
  CHECK_THROWS_AS(sample_logarithmic(1.0, rng), std::invalid_argument);
}

TEST_CASE("sum of logarithmic draws") {
  RngStream rng(10, 1);
  auto [m, se] = mean_se(100000, [&] { return static_cast<double>(sample_sumlog(5, 0.5, rng)); });
  double exact = 5.0 * (-0.5 / (0.5 * std::log(0.5)));
  CHECK(std::abs(m - exact) < 4.0 * se);
  CHECK(sample_sumlog(0, 0.5, rng) == 0);
}

TEST_CASE("table count sampler matches the enumeration pmf") {
  RngStream rng(11, 1);
  std::uint64_t count = 10;
  for (double r : {1.0, 2.5, 0.7}) {
    std::vector<std::uint64_t> draws(30000);
    for (auto& d : draws) d = sample_crt(count, r, rng);
    auto pmf = crt_pmf(count, r);
    double mass = 0.0;
    for (double v : pmf) mass += v;
    REQUIRE(std::abs(mass - 1.0) < 1e-12);
    CHECK(tv_exact(draws, pmf) < 0.02);
  }

  double h10 = 0.0;
  for (int i = 1; i <= 10; ++i) h10 += 1.0 / i;
  CHECK(std::abs(h10 - 2.9290) < 1e-4);
  auto [m, se] = mean_se(100000, [&] { return static_cast<double>(sample_crt(10, 1.0, rng)); });
  CHECK(std::abs(m - h10) < 4.0 * se);

  CHECK(sample_crt(0, 1.0, rng) == 0);
  CHECK(sample_crt(CrtParams{4, 2.0}, rng) <= 4);
  CHECK_THROWS_AS(sample_crt(3, 0.0, rng), std::invalid_argument);
}

TEST_CASE("zero-truncated poisson in both regimes") {
  RngStream rng(12, 1);
  auto [m, se] = mean_se(100000, [&] { return static_cast<double>(sample_ztp(2.0, rng)); });
  double exact = 2.0 / -std::expm1(-2.0);
  CHECK(std::abs(exact - 2.3130) < 1e-4);
  CHECK(std::abs(m - exact) < 4.0 * se);

  std::vector<std::uint64_t> draws(50000);
  for (auto& d : draws) d = sample_ztp(3.0, rng);
  CHECK(tv_exact(draws, ztp_pmf(3.0, 40)) < 0.02);
  for (auto& d : draws) d = sample_ztp(12.0, rng);
  CHECK(tv_exact(draws, ztp_pmf(12.0, 60)) < 0.02);

  int ones = 0;
  for (int i = 0; i < 20000; ++i) ones += sample_ztp(1e-6, rng) == 1 ? 1 : 0;
  CHECK(static_cast<double>(ones) / 20000.0 > 0.999);

  CHECK_THROWS_AS(sample_ztp(0.0, rng), std::invalid_argument);
}

TEST_CASE("negative binomial augmentation identity holds jointly") {
  RngStream rng(13, 1);
  const double r = 2.0, p = 0.4;
  const int n = 50000;
  std::map<std::pair<std::uint64_t, std::uint64_t>, double> joint_a, joint_b;
  double inv = 1.0 / n;
  for (int i = 0; i < n; ++i) {
    std::uint64_t m = sample_nb(r, p, rng);
    std::uint64_t l = sample_crt(m, r, rng);
    joint_a[{m, l}] += inv;
  }
  for (int i = 0; i < n; ++i) {
    std::uint64_t l = sample_poisson(-r * std::log1p(-p), rng);
    std::uint64_t m = sample_sumlog(l, p, rng);
    joint_b[{m, l}] += inv;
  }
  CHECK(tv_between(joint_a, joint_b) < 0.03);
}

TEST_CASE("samplers replay bitwise under the same seed") {
  RngStream a(99, 3), b(99, 3);
  for (int i = 0; i < 200; ++i) {
    REQUIRE(sample_gamma(0.7, 1.3, a) == sample_gamma(0.7, 1.3, b));
    REQUIRE(sample_poisson(4.2, a) == sample_poisson(4.2, b));
    REQUIRE(sample_crt(6, 1.5, a) == sample_crt(6, 1.5, b));
    REQUIRE(sample_ztp(2.5, a) == sample_ztp(2.5, b));
  }
}
