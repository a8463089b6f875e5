#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <random>

#include "fairkit/error.hpp"
#include "fairkit/ferm.hpp"
#include "oracles.hpp"

using namespace fairkit;

namespace {

TabularDataset synthetic(std::size_t n, int d, std::uint64_t seed, bool classification = true, int groups = 2) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z;
  std::vector<double> s, y;
  Eigen::MatrixXd x(static_cast<Eigen::Index>(n), d);
  for (std::size_t i = 0; i < n; ++i) {
    const int g = static_cast<int>(i % static_cast<std::size_t>(groups));
    s.push_back(g);
    double lin = 0.0;
    for (int j = 0; j < d; ++j) {
      x(static_cast<Eigen::Index>(i), j) = z(rng) + (j == 0 ? 0.8 * g : 0.0);
      lin += (j + 1) * 0.5 * x(static_cast<Eigen::Index>(i), j);
    }
    lin += 0.5 * z(rng);
    y.push_back(classification ? (lin > 0.3 ? 1.0 : -1.0) : lin);
  }
  return TabularDataset::from_arrays(s, x, y,
                                     classification ? OutcomeKind::classification : OutcomeKind::regression);
}

constexpr double kInf = std::numeric_limits<double>::infinity();

}  // namespace

TEST_CASE("kernels") {
  KernelSpec lin;
  Eigen::RowVectorXd a(2), b(2);
  a << 1, 2;
  b << 3, -1;
  CHECK(lin(a, b) == 1.0);
  KernelSpec rbf{KernelKind::rbf, 0.5};
  CHECK(rbf(a, b) == doctest::Approx(std::exp(-0.5 * 13.0)));
  CHECK(rbf(a, a) == 1.0);
  CHECK_THROWS_AS((KernelSpec{KernelKind::rbf, -1.0}).validate(), UsageError);
  CHECK(parse_kernel_kind("rbf") == KernelKind::rbf);
  CHECK_THROWS_AS(parse_ferm_loss("absolute"), UsageError);
}

TEST_CASE("constraint columns: one per unordered group pair per outcome bin") {
  const auto data = synthetic(90, 2, 1, true, 3);
  DiscretizationGrid grid{{-1.5, 0.0, 1.5}, {-0.5, 0.5, 1.5, 2.5}};
  const auto sys = build_constraints(data, grid);
  CHECK(sys.weights.cols() == 6);
  CHECK(sys.pairs.size() == 6);
  for (Eigen::Index j = 0; j < sys.weights.cols(); ++j) CHECK(std::abs(sys.weights.col(j).sum()) < 1e-12);
  const auto sub = build_constraints(data, grid, std::vector<int>{1});
  CHECK(sub.weights.cols() == 3);
}

TEST_CASE("infinite epsilon is plain kernel ridge") {
  const auto data = synthetic(60, 3, 2, false);
  FairERMProblem p;
  p.lambda = 0.7;
  p.epsilon = kInf;
  const auto grid = make_grid(data, 2, 2);
  const auto m = train_gferm(p, data, grid);
  const Eigen::MatrixXd& x = data.features;
  const Eigen::VectorXd y = Eigen::Map<const Eigen::VectorXd>(data.outcome.data(), 60);
  const Eigen::VectorXd w = (x.transpose() * x + 0.7 * Eigen::MatrixXd::Identity(3, 3)).ldlt().solve(x.transpose() * y);
  CHECK((m.primal_weights() - w).norm() < 1e-8);

  FairERMProblem r = p;
  r.kernel = {KernelKind::rbf, 0.3};
  const auto mr = train_gferm(r, data, grid);
  const Eigen::MatrixXd k = r.kernel.gram(x, x);
  const Eigen::VectorXd alpha = (k + 0.7 * Eigen::MatrixXd::Identity(60, 60)).ldlt().solve(y);
  CHECK((mr.decision(data) - k * alpha).norm() < 1e-6);
}

TEST_CASE("zero epsilon matches ridge on the transformed features") {
  const auto data = synthetic(200, 4, 3);
  const double lambda = 1e-9;
  const auto res = train_ferm_binary(data, FermLoss::squared, lambda, 0.0);
  const Eigen::VectorXd u = positive_mean_gap(data.features, data.outcome, data.sensitive);
  CHECK(std::abs(res.model.primal_weights().dot(u)) < 1e-8);

  const auto t = fair_linear_transform(data.features, u);
  const Eigen::MatrixXd& xt = t.features;
  const Eigen::VectorXd y = Eigen::Map<const Eigen::VectorXd>(data.outcome.data(), 200);
  const Eigen::VectorXd wt =
      (xt.transpose() * xt + lambda * Eigen::MatrixXd::Identity(3, 3)).ldlt().solve(xt.transpose() * y);
  const Eigen::VectorXd f = xt * wt;
  CHECK((res.model.decision(data) - f).cwiseAbs().maxCoeff() < 1e-5);
  CHECK(std::abs(res.positive_risk_gap) < 1e-8);
}

TEST_CASE("fair linear transform") {
  Eigen::MatrixXd x(1, 2);
  x << 3, 5;
  Eigen::VectorXd u(2);
  u << 0, 2;
  auto t = fair_linear_transform(x, u);
  CHECK(t.index == 1);
  CHECK(t.features.cols() == 1);
  CHECK(t.features(0, 0) == 3.0);
  x << 2, 4;
  u << 1, 1;
  t = fair_linear_transform(x, u);
  CHECK(t.index == 0);
  CHECK(t.features(0, 0) == 2.0);
  u << 0, 0;
  CHECK(fair_linear_transform(x, u).identity);
}

TEST_CASE("positive epsilon agrees with a cutting-plane oracle") {
  const auto data = synthetic(80, 3, 4, false, 3);
  const auto grid = make_grid(data, 2, 3);
  const auto sys = build_constraints(data, grid);
  const Eigen::MatrixXd& x = data.features;
  const Eigen::VectorXd y = Eigen::Map<const Eigen::VectorXd>(data.outcome.data(), 80);
  const Eigen::MatrixXd c = (x.transpose() * sys.weights).transpose();
  const Eigen::VectorXd free_w = (x.transpose() * x + Eigen::MatrixXd::Identity(3, 3)).ldlt().solve(x.transpose() * y);
  for (double frac : {0.1, 0.5}) {
    FairERMProblem p;
    p.lambda = 1.0;
    p.epsilon = frac * (c * free_w).lpNorm<1>();
    const auto m = train_gferm(p, data, grid);
    const Eigen::VectorXd w_star = oracle::l1_constrained_ridge(x, y, 1.0, c, p.epsilon);
    const auto obj = [&](const Eigen::VectorXd& w) { return (y - x * w).squaredNorm() + w.squaredNorm(); };
    CHECK(m.constraints.l1 <= p.epsilon + 1e-6);
    CHECK(obj(m.primal_weights()) == doctest::Approx(obj(w_star)).epsilon(1e-6));
    CHECK((m.primal_weights() - w_star).norm() < 1e-4);
  }
}

TEST_CASE("tiny problem matches a 2-D grid search") {
  const auto data = synthetic(8, 2, 5, false);
  DiscretizationGrid grid{{-1e9, 1e9}, {-0.5, 0.5, 1.5}};
  const auto sys = build_constraints(data, grid);
  const Eigen::MatrixXd& x = data.features;
  const Eigen::VectorXd y = Eigen::Map<const Eigen::VectorXd>(data.outcome.data(), 8);
  const Eigen::RowVectorXd c = (x.transpose() * sys.weights).transpose();
  FairERMProblem p;
  p.lambda = 0.5;
  p.epsilon = 0.05;
  const auto m = train_gferm(p, data, grid);
  auto f = [&](double a, double b) {
    Eigen::Vector2d w(a, b);
    if (std::abs(c.dot(w)) > p.epsilon) return kInf;
    return (y - x * w).squaredNorm() + 0.5 * w.squaredNorm();
  };
  const auto [a, b] = oracle::grid_minimize_2d(f, -10.0, 10.0);
  const Eigen::VectorXd w = m.primal_weights();
  CHECK(m.objective <= f(a, b) + 1e-6);
  CHECK(std::abs(m.objective - f(a, b)) < 1e-4);
  CHECK(std::abs(w(0) - a) < 1e-3);
  CHECK(std::abs(w(1) - b) < 1e-3);
}

TEST_CASE("classification losses respect the constraint and improve on the trivial model") {
  const auto data = synthetic(150, 3, 6);
  for (FermLoss loss : {FermLoss::logistic, FermLoss::hinge}) {
    for (double eps : {0.0, 0.05}) {
      const auto r = train_ferm_binary(data, loss, 0.1, eps);
      CHECK(r.model.constraints.l1 <= eps + 1e-6);
      std::vector<double> zero(data.size(), 0.0);
      const double trivial = ferm_objective(loss, zero, data.outcome, 0.1, 0.0);
      CHECK(r.model.objective < trivial);
    }
  }
  auto rbf = train_ferm_binary(data, FermLoss::logistic, 0.1, 0.0, {KernelKind::rbf, 0.5});
  CHECK(rbf.model.constraints.l1 <= 1e-8);
}

TEST_CASE("squared loss accepts real outcomes; other losses need labels") {
  const auto data = synthetic(40, 2, 7, false);
  FairERMProblem p;
  p.loss = FermLoss::logistic;
  CHECK_THROWS_AS(train_gferm(p, data, make_grid(data, 2, 2)), DataError);
}

TEST_CASE("delta hat is symmetric under swapping the groups") {
  auto data = synthetic(120, 3, 8);
  const auto m = train_ferm_binary(data, FermLoss::squared, 0.5, kInf).model;
  const auto grid = binary_grid();
  const Eigen::VectorXd f = m.decision(data);
  const std::span<const double> out(f.data(), static_cast<std::size_t>(f.size()));
  const double d = estimate_delta_hat(out, data, grid).value;
  auto swapped = data;
  for (double& s : swapped.sensitive) s = 1.0 - s;
  CHECK(estimate_delta_hat(out, swapped, grid).value == doctest::Approx(d).epsilon(1e-12));
}

TEST_CASE("objective is convex along random segments") {
  const auto data = synthetic(50, 3, 9);
  std::mt19937_64 rng(10);
  std::normal_distribution<double> z;
  const Eigen::MatrixXd& x = data.features;
  for (FermLoss loss : {FermLoss::squared, FermLoss::hinge, FermLoss::logistic}) {
    auto obj = [&](const Eigen::VectorXd& w) {
      const Eigen::VectorXd f = x * w;
      return ferm_objective(loss, std::span<const double>(f.data(), 50), data.outcome, 0.3, w.squaredNorm());
    };
    for (int k = 0; k < 20; ++k) {
      Eigen::VectorXd a(3), b(3);
      for (int j = 0; j < 3; ++j) {
        a(j) = z(rng);
        b(j) = z(rng);
      }
      CHECK(obj(0.5 * (a + b)) <= 0.5 * (obj(a) + obj(b)) + 1e-9);
    }
  }
}

TEST_CASE("empirical risk is non-increasing in epsilon") {
  const auto data = synthetic(120, 3, 11, true, 3);
  const auto grid = make_grid(data, 2, 3);
  for (FermLoss loss : {FermLoss::squared, FermLoss::logistic}) {
    double prev = kInf;
    for (double eps : {0.0, 0.01, 0.05, 0.2, kInf}) {
      FairERMProblem p;
      p.loss = loss;
      p.lambda = 0.5;
      p.epsilon = eps;
      const double obj = train_gferm(p, data, grid).objective;
      CHECK(obj <= prev + 1e-7);
      prev = obj;
    }
  }
}

TEST_CASE("dual and primal linear solutions agree") {
  const auto data = synthetic(70, 4, 12);
  const auto m = train_ferm_binary(data, FermLoss::logistic, 0.2, 0.03).model;
  const Eigen::VectorXd primal = data.features * m.primal_weights();
  CHECK((m.decision(data) - primal).cwiseAbs().maxCoeff() <= 1e-8);
  CHECK((m.training.transpose() * m.alpha - m.primal_weights()).norm() <= 1e-8);
}
