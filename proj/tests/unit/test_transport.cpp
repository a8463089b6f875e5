#include <doctest.h>

#include <algorithm>
#include <random>

#include "fairkit/error.hpp"
#include "fairkit/transport.hpp"
#include "oracles.hpp"

using namespace fairkit;

namespace {

ScoreSet scores_of(const std::vector<std::vector<double>>& groups) {
  ScoreSet s;
  for (std::size_t a = 0; a < groups.size(); ++a) {
    for (double v : groups[a]) {
      s.scores.push_back(v);
      s.group.push_back(static_cast<int>(a));
    }
  }
  return s;
}

std::vector<double> uniform(std::mt19937_64& rng, int n, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v;
  for (int i = 0; i < n; ++i) v.push_back(u(rng));
  return v;
}

}  // namespace

TEST_CASE("quantile table follows the rank formula") {
  EmpiricalDistribution two({0.0, 1.0}, 2);
  CHECK(two.quantile(1) == 0.0);
  CHECK(two.quantile(2) == 1.0);
  EmpiricalDistribution c({0.3, 0.3, 0.3}, 3);
  for (int i = 1; i <= 3; ++i) CHECK(c.quantile(i) == 0.3);
  std::vector<double> grid;
  for (int i = 1; i <= 10; ++i) grid.push_back(i / 10.0);
  EmpiricalDistribution g(grid, 10);
  for (int i = 1; i <= 10; ++i) CHECK(g.quantile(i) == grid[static_cast<std::size_t>(i - 1)]);
  std::mt19937_64 rng(1);
  const auto v = uniform(rng, 137, 0, 1);
  CHECK(EmpiricalDistribution(v, 17).quantiles() == oracle::quantile_table(v, 17));
}

TEST_CASE("inverse quantile") {
  EmpiricalDistribution d({0.2, 0.4, 0.6}, 3);
  CHECK(d.inverse_quantile(0.6) == 3);
  CHECK(d.inverse_quantile(0.5) == 2);
  CHECK(d.inverse_quantile(0.0) == 1);
  CHECK(d.inverse_quantile(0.2) == 1);
}

TEST_CASE("wasserstein costs") {
  EmpiricalDistribution a({0.2, 0.4}, 2), b({0.3, 0.5}, 2);
  CHECK(wasserstein(a, a, 1) == 0.0);
  CHECK(wasserstein(a, b, 1) == doctest::Approx(0.1));
  CHECK(wasserstein(EmpiricalDistribution({0.0}, 1), EmpiricalDistribution({1.0}, 1), 1) == 1.0);
  // Sorted matching is no worse than the crossed coupling.
  CHECK(wasserstein(a, b, 1) <= (std::abs(0.2 - 0.5) + std::abs(0.4 - 0.3)) / 2);
  CHECK_THROWS_AS(wasserstein(a, b, 3), UsageError);
}

TEST_CASE("barycenters") {
  EmpiricalDistribution a({0.1, 0.5, 0.9, 0.95}, 4);
  const std::vector<EmpiricalDistribution> self{a, a};
  const std::vector<double> half{0.5, 0.5};
  CHECK(barycenter(self, half, 2).quantiles() == a.quantiles());
  const std::vector<EmpiricalDistribution> ends{EmpiricalDistribution({0.0}, 1), EmpiricalDistribution({1.0}, 1)};
  CHECK(barycenter(ends, half, 2).quantile(1) == doctest::Approx(0.5));

  std::mt19937_64 rng(4);
  std::vector<EmpiricalDistribution> three;
  std::vector<std::vector<double>> tables;
  for (int k = 0; k < 3; ++k) {
    three.emplace_back(uniform(rng, 40, 0.1 * k, 0.5 + 0.2 * k), 4);
    tables.push_back(three.back().quantiles());
  }
  const std::vector<double> w{0.2, 0.5, 0.3};
  const auto c2 = barycenter(three, w, 2).quantiles();
  const auto s2 = oracle::barycenter_search(tables, w, 2);
  for (std::size_t i = 0; i < 4; ++i) CHECK(c2[i] == doctest::Approx(s2[i]).epsilon(1e-3));
  const auto c1 = barycenter(three, w, 1).quantiles();
  const auto s1 = oracle::barycenter_search(tables, w, 1);
  auto cost1 = [&](std::size_t i, double c) {
    double s = 0.0;
    for (std::size_t a = 0; a < 3; ++a) s += w[a] * std::abs(tables[a][i] - c);
    return s;
  };
  for (std::size_t i = 0; i < 4; ++i) CHECK(cost1(i, c1[i]) <= cost1(i, s1[i]) + 1e-12);
}

TEST_CASE("repair maps onto barycenter quantiles at t = 1") {
  auto s = scores_of({{0.0, 1.0}, {0.4, 0.6}});
  RepairOptions o;
  o.bins = 2;
  o.weights = WeightScheme::uniform;
  const auto r = geodesic_repair(s, o);
  CHECK(r[0] == doctest::Approx(0.2));
  CHECK(r[1] == doctest::Approx(0.8));
  CHECK(r[2] == doctest::Approx(0.2));
  CHECK(r[3] == doctest::Approx(0.8));
}

TEST_CASE("t = 0 is the identity when every score has its own bin") {
  std::mt19937_64 rng(8);
  auto a = uniform(rng, 30, 0, 1), b = uniform(rng, 30, 0.2, 0.9);
  auto s = scores_of({a, b});
  RepairOptions o;
  o.t = 0.0;
  o.bins = 30;
  const auto r = geodesic_repair(s, o);
  for (std::size_t i = 0; i < r.size(); ++i) CHECK(r[i] == s.scores[i]);
}

TEST_CASE("pairwise W1 after repair is non-increasing in t") {
  std::mt19937_64 rng(2);
  auto s = scores_of({uniform(rng, 300, 0, 0.7), uniform(rng, 200, 0.3, 1.0), uniform(rng, 250, 0.1, 0.6)});
  double prev = 1e9;
  for (double t : {0.0, 0.25, 0.5, 0.75, 1.0}) {
    RepairOptions o;
    o.t = t;
    o.bins = 50;
    const auto r = geodesic_repair(s, o);
    std::vector<std::vector<double>> g(3);
    for (std::size_t i = 0; i < r.size(); ++i) g[static_cast<std::size_t>(s.group[i])].push_back(r[i]);
    double worst = 0.0;
    for (int p = 0; p < 3; ++p)
      for (int q = p + 1; q < 3; ++q) worst = std::max(worst, oracle::w1_exact(g[p], g[q]));
    CHECK(worst <= prev + 1e-12);
    prev = worst;
  }
}

TEST_CASE("expected prediction changes") {
  EmpiricalDistribution d({0.1, 0.3, 0.5}, 3);
  CHECK(expected_prediction_changes(d, [](double x) { return x; }) == 0.0);
  CHECK(expected_prediction_changes(EmpiricalDistribution({0.3}, 1), [](double) { return 0.7; }) ==
        doctest::Approx(0.4));
  CHECK_THROWS_AS(expected_prediction_changes(d, [](double x) { return x + 1.0; }), DataError);

  std::mt19937_64 rng(9);
  const auto a = uniform(rng, 50, 0, 0.6), b = uniform(rng, 50, 0.4, 1);
  auto s = scores_of({a, b});
  RepairOptions o;
  o.bins = 10;
  const auto plan = make_repair_plan(s, o);
  const auto map = [&](double v) { return plan.map(0, v); };
  std::vector<double> moved;
  for (double v : a) moved.push_back(map(v));
  const double changes = expected_prediction_changes(plan.groups[0], map);
  CHECK(changes == doctest::Approx(oracle::prediction_flip_rate(a, moved)).epsilon(1e-12));
  CHECK(std::abs(changes - oracle::w1_exact(a, plan.center.quantiles())) <= 2.0 / o.bins);
}
