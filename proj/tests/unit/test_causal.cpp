#include <doctest.h>

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>

#include "fairkit/causal.hpp"
#include "fairkit/error.hpp"
#include "oracles.hpp"

using namespace fairkit;

namespace {

// College graph with A->Y = 2, D->Y = 0.5, A->D = 3.
LinearSEM college_custom(double noise = 1.0) {
  LinearSEM sem = scenario("college");
  for (auto& e : sem.edges) {
    if (e.from == "A" && e.to == "Y") e.coef = 2.0;
    if (e.from == "D" && e.to == "Y") e.coef = 0.5;
    if (e.from == "A" && e.to == "D") e.coef = 3.0;
  }
  for (auto& v : sem.variables) v.noise_std = noise;
  return sem;
}

const PathSelection kDirect{{"A", "Y"}};
const PathSelection kBoth{{"A", "Y"}, {"A", "D", "Y"}};
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

}  // namespace

TEST_CASE("scenarios") {
  const auto music = scenario("music");
  REQUIRE(music.variables.size() == 4);
  CHECK(music.variables[0].name == "S");
  CHECK(music.variables[1].name == "M");
  CHECK_FALSE(music.variables[1].observed);
  CHECK(music.find_edge("S", "X")->label == EdgeLabel::unfair);

  const auto college = scenario("college");
  CHECK(enumerate_paths(college, "A", "Y").size() == 3);
  auto unfair = unfair_paths(college);
  std::sort(unfair.begin(), unfair.end());
  CHECK(unfair == PathSelection{{"A", "D", "Y"}, {"A", "Y"}});
  CHECK(college.find_edge("A", "Q")->label == EdgeLabel::fair);

  CHECK(scenario("police-a").find_edge("A", "Y") == nullptr);
  CHECK(scenario("police-b").find_edge("A", "Search")->label == EdgeLabel::unfair);
  CHECK(scenario("police-c").find_edge("A", "Y")->label == EdgeLabel::unfair);
  CHECK_THROWS_AS(scenario("unknown"), UsageError);
}

TEST_CASE("path parsing") {
  const auto sem = scenario("college");
  auto p = parse_paths(sem, "A>D,A>Y");
  std::sort(p.begin(), p.end());
  CHECK(p == PathSelection{{"A", "D", "Y"}, {"A", "Y"}});
  CHECK(parse_paths(sem, "").empty());
  CHECK_THROWS_AS(parse_paths(sem, "Q>Y"), UsageError);
  CHECK_THROWS_AS(parse_paths(sem, "A>X"), UsageError);
  CHECK(format_path({"A", "D", "Y"}) == "A>D>Y");
}

TEST_CASE("closed-form path-specific effects") {
  const auto sem = college_custom();
  CHECK(pse(sem, kDirect, 0, 1) == 2.0);
  CHECK(pse(sem, kBoth, 0, 1) == 3.5);
  CHECK(pse(sem, {}, 0, 1) == 0.0);
  CHECK(pse(sem, kBoth, 1, 1) == 0.0);
  const PathSelection indirect{{"A", "D", "Y"}};
  CHECK(pse(sem, kBoth, 0, 1) == pse(sem, kDirect, 0, 1) + pse(sem, indirect, 0, 1));
}

TEST_CASE("Monte-Carlo effects") {
  const auto sem = college_custom();
  const auto mc = pse_monte_carlo(sem, kBoth, 0, 1, 100000, 3);
  CHECK(std::abs(mc.value - 3.5) <= 4 * mc.std_error);
  const auto quiet = pse_monte_carlo(college_custom(1e-12), kBoth, 0, 1, 10, 1);
  CHECK(quiet.value == doctest::Approx(3.5).epsilon(1e-9));
  const auto null = pse_monte_carlo(sem, kBoth, 0.0, 0.0, 100000, 2);
  CHECK(std::abs(null.value) <= 4 * null.std_error);
  CHECK_THROWS_AS(pse_monte_carlo(sem, kBoth, 0, 1, 1, 0), UsageError);
}

TEST_CASE("sampling") {
  auto sem = college_custom(1e-12);
  const auto data = sample(sem, 500, 4);
  const auto q = std::find(data.feature_names.begin(), data.feature_names.end(), "Q") - data.feature_names.begin();
  for (std::size_t i = 0; i < data.size(); ++i) {
    CHECK(std::abs(data.features(static_cast<Eigen::Index>(i), q) - data.sensitive[i]) <= 1e-9);
  }
  sem.pi = 1.0;
  const auto ones = sample(sem, 200, 5);
  CHECK(std::all_of(ones.sensitive.begin(), ones.sensitive.end(), [](double a) { return a == 1.0; }));

  const auto big = sample(college_custom(), 100000, 6);
  double sum = 0, sq = 0, n = 0;
  for (std::size_t i = 0; i < big.size(); ++i) {
    if (big.sensitive[i] != 1.0) continue;
    const double v = big.features(static_cast<Eigen::Index>(i), q);
    sum += v;
    sq += v * v;
    ++n;
  }
  const double mean = sum / n, se = std::sqrt((sq / n - mean * mean) / n);
  CHECK(std::abs(mean - 1.0) <= 4 * se);
  const auto again = sample(college_custom(), 100000, 6);
  CHECK(again.outcome == big.outcome);
}

TEST_CASE("least-squares fitting recovers the generating SEM") {
  LinearSEM truth = college_custom(0.5);
  truth.variables[1].intercept = 0.7;
  const auto data = sample(truth, 100000, 7);
  const auto est = fit(data, truth);
  for (std::size_t e = 0; e < truth.edges.size(); ++e) {
    CHECK(std::abs(est.edges[e].coef / truth.edges[e].coef - 1.0) <= 0.01);
  }
  CHECK(std::abs(est.variables[1].intercept / 0.7 - 1.0) <= 0.01);
  CHECK(std::abs(est.pi - 0.5) <= 0.01);

  // A noiseless outcome equation is interpolated exactly.
  LinearSEM quiet_y = college_custom();
  quiet_y.variables[3].noise_std = 1e-12;
  const auto exact = fit(sample(quiet_y, 50, 8), truth);
  for (std::size_t e = 0; e < truth.edges.size(); ++e) {
    if (truth.edges[e].to == "Y") CHECK(std::abs(exact.edges[e].coef - quiet_y.edges[e].coef) <= 1e-9);
  }
}

TEST_CASE("music scenario regressions") {
  const auto data = sample(scenario("music"), 200000, 9);
  const auto both = least_squares(
      [&] {
        Eigen::MatrixXd x(static_cast<Eigen::Index>(data.size()), 2);
        x.col(0) = data.features.col(0);
        for (std::size_t i = 0; i < data.size(); ++i) x(static_cast<Eigen::Index>(i), 1) = data.sensitive[i];
        return x;
      }(),
      Eigen::Map<const Eigen::VectorXd>(data.outcome.data(), static_cast<Eigen::Index>(data.size())), false);
  CHECK(both.coef(0) == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(both.coef(1) == doctest::Approx(-1.0).epsilon(1e-6));
  const auto x_only = least_squares(
      data.features.col(0),
      Eigen::Map<const Eigen::VectorXd>(data.outcome.data(), static_cast<Eigen::Index>(data.size())), false);
  CHECK(x_only.coef(0) == doctest::Approx(0.5).epsilon(0.02));
  CHECK_THROWS_AS(least_squares(Eigen::MatrixXd::Ones(5, 2), Eigen::VectorXd::Ones(5), false), DataError);
}

TEST_CASE("abduction") {
  const auto sem = college_custom();
  const auto d = draw(sem, 20, 10);
  for (Eigen::Index r = 0; r < d.values.rows(); ++r) {
    Record rec(d.values.cols());
    for (Eigen::Index i = 0; i < d.values.cols(); ++i) rec[static_cast<std::size_t>(i)] = d.values(r, i);
    const auto eps = abduct(sem, rec);
    for (std::size_t i = 1; i < rec.size(); ++i) CHECK(std::abs(eps[i] - d.noise(r, static_cast<Eigen::Index>(i))) <= 1e-12);
    const Eigen::VectorXd again = simulate(sem, rec[0], Eigen::Map<const Eigen::VectorXd>(eps.data(), 4));
    for (std::size_t i = 0; i < rec.size(); ++i) CHECK(std::abs(again(static_cast<Eigen::Index>(i)) - rec[i]) <= 1e-12);
  }
  const Record on_surface{1.0, 1.0, 3.0, 2.0 + 1.0 + 1.5};
  for (double e : abduct(sem, on_surface)) CHECK(e == 0.0);
  CHECK_THROWS_AS(abduct(sem, Record{1.0, kNaN, 3.0, 4.0}), DataError);
}

TEST_CASE("counterfactual outcomes") {
  const auto sem = college_custom();
  const Record rec{0.0, 0.0, 0.0, 5.0};
  CHECK(counterfactual(sem, rec, kDirect, 1.0).value == doctest::Approx(7.0));
  CHECK(counterfactual(sem, rec, kBoth, 1.0).value == doctest::Approx(8.5));
  CHECK(counterfactual(sem, rec, kBoth, 0.0).value == doctest::Approx(5.0));
  CounterfactualOptions mc;
  mc.mc_samples = 10000;
  mc.force_monte_carlo = true;
  const auto r = counterfactual(sem, rec, kBoth, 1.0, mc);
  CHECK(r.monte_carlo);
  CHECK(std::abs(r.value - 8.5) <= 4 * r.std_error + 1e-9);
}

TEST_CASE("counterfactual with a hidden mediator uses the posterior") {
  // A -> U (hidden) -> Y and A -> Y; the observed Y pins down eps_U + eps_Y only.
  LinearSEM sem;
  sem.sensitive = "A";
  sem.target = "Y";
  sem.variables = {{"A", 0, 1, true, false}, {"U", 0, 1, false, false}, {"Y", 0, 1, true, false},
                   {"Z", 0, 1, true, false}};
  sem.edges = {{"A", "U", 1.5, EdgeLabel::unfair}, {"U", "Y", 2.0, EdgeLabel::fair},
               {"A", "Y", 1.0, EdgeLabel::unfair}, {"U", "Z", 1.0, EdgeLabel::fair}};
  const Record rec{0.0, kNaN, 1.0, 0.5};
  const PathSelection through_u{{"A", "U", "Y"}};
  const double exact = counterfactual(sem, rec, through_u, 1.0).value;
  CHECK(exact == doctest::Approx(1.0 + 3.0));
  CounterfactualOptions mc;
  mc.mc_samples = 10000;
  mc.force_monte_carlo = true;
  const auto r = counterfactual(sem, rec, through_u, 1.0, mc);
  CHECK(std::abs(r.value - exact) <= 4 * r.std_error + 1e-9);
}

TEST_CASE("score correction") {
  const auto sem = college_custom(1e-12);
  const std::vector<Record> recs{{0.0, 0.0, 0.0, 1.0}, {1.0, 1.0, 3.0, 6.5}};
  const ScoreModel ignores = [](const Eigen::VectorXd& v) { return 0.3 * v(1); };
  const auto same = correct_scores(sem, ignores, recs, kBoth, 1.0);
  CHECK(same[0] == doctest::Approx(0.0));
  CHECK(same[1] == doctest::Approx(0.3));
  const ScoreModel lin = [](const Eigen::VectorXd& v) { return v(0) + 2.0 * v(1) - v(2); };
  const auto c = correct_scores(sem, lin, recs, kBoth, 1.0);
  // Record 0: A -> 1, Q stays 0, D -> 3.
  CHECK(c[0] == doctest::Approx(1.0 + 0.0 - 3.0));
  CHECK(c[1] == doctest::Approx(1.0 + 2.0 - 3.0));
}

TEST_CASE("score correction shrinks the group gap") {
  LinearSEM sem = college_custom();
  for (auto& e : sem.edges) if (e.from == "A" && e.to == "Q") e.coef = 0.0;
  const auto d = draw(sem, 2000, 11);
  std::vector<Record> recs;
  for (Eigen::Index r = 0; r < d.values.rows(); ++r) {
    recs.push_back({d.values(r, 0), d.values(r, 1), d.values(r, 2), d.values(r, 3)});
  }
  const ScoreModel model = [](const Eigen::VectorXd& v) { return v(0) + v(1) + v(2); };
  CounterfactualOptions o;
  o.mc_samples = 50;
  const auto corrected = correct_scores(sem, model, recs, unfair_paths(sem), 1.0, o);
  std::vector<double> raw0, raw1, c0, c1;
  for (std::size_t i = 0; i < recs.size(); ++i) {
    const double raw = model(Eigen::Map<const Eigen::VectorXd>(recs[i].data(), 4));
    (recs[i][0] == 1.0 ? raw1 : raw0).push_back(raw);
    (recs[i][0] == 1.0 ? c1 : c0).push_back(corrected[i]);
  }
  CHECK(oracle::w1_exact(c0, c1) < oracle::w1_exact(raw0, raw1));
}

TEST_CASE("binary targets") {
  const auto sem = scenario("police-c");
  const auto data = sample(sem, 1000, 12);
  CHECK(data.outcome_kind == OutcomeKind::classification);
  for (double y : data.outcome) CHECK((y == 1.0 || y == -1.0));
  CHECK_THROWS_AS(pse(sem, unfair_paths(sem), 0, 1), UsageError);
  const auto mc = pse_monte_carlo(sem, unfair_paths(sem), 0, 1, 20000, 13);
  CHECK(mc.value > 0.0);
}
