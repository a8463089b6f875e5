#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

#include "fairkit/error.hpp"
#include "fairkit/report.hpp"

using namespace fairkit;

namespace {

TabularDataset small_binary(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z;
  Eigen::MatrixXd x(80, 2);
  std::vector<double> s, y;
  for (Eigen::Index i = 0; i < 80; ++i) {
    s.push_back(static_cast<double>(i % 2));
    x(i, 0) = z(rng) + 0.4 * (i % 2);
    x(i, 1) = z(rng);
    y.push_back(x(i, 0) - x(i, 1) + 0.3 * z(rng) > 0 ? 1.0 : -1.0);
  }
  return TabularDataset::from_arrays(s, x, y, OutcomeKind::classification);
}

}  // namespace

TEST_CASE("json formatting") {
  Json j;
  j["b"] = 0.1;
  j["a"] = std::vector<double>{1.0, std::numeric_limits<double>::infinity()};
  const std::string text = dump_json(j);
  CHECK(text.find("\"a\"") < text.find("\"b\""));
  CHECK(text.find("0.10000000000000001") != std::string::npos);
  CHECK(text.find("null") != std::string::npos);
  CHECK(dump_json(parse_json(text)) == text);
  CHECK_THROWS_AS(parse_json("{not json"), DataError);
}

TEST_CASE("matrix round trip") {
  Eigen::MatrixXd m(2, 3);
  m << 1, 2, 3, 4, 5, 6.25;
  CHECK(matrix_from_json(to_json(m)) == m);
  Eigen::VectorXd v(3);
  v << 0.1, -2, 1e-300;
  CHECK(vector_from_json(parse_json(dump_json(to_json(v)))) == v);
}

TEST_CASE("kernel model round trip reproduces decisions") {
  const auto data = small_binary(1);
  const auto m = train_ferm_binary(data, FermLoss::logistic, 0.1, 0.02, {KernelKind::rbf, 0.7}).model;
  const auto back = kernel_model_from_json(parse_json(dump_json(to_json(m))));
  CHECK(back.decision(data) == m.decision(data));
  CHECK(back.constraints.l1 == m.constraints.l1);
  CHECK_THROWS_AS(kernel_model_from_json(to_json(scenario("college"))), DataError);
}

TEST_CASE("sem round trip") {
  const auto sem = scenario("police-b");
  const auto back = sem_from_json(parse_json(dump_json(to_json(sem))));
  CHECK(back.target == "Search");
  CHECK(back.variables.size() == sem.variables.size());
  CHECK(back.find_edge("A", "Search")->label == EdgeLabel::unfair);
  CHECK(back.variables[2].binary);
}

TEST_CASE("multitask models round trip") {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> z;
  MultiTaskDataset mt;
  for (int t = 0; t < 2; ++t) {
    TaskData task;
    task.x.resize(30, 4);
    task.y.resize(30);
    for (Eigen::Index i = 0; i < 30; ++i) {
      task.group.push_back(static_cast<int>(i % 2));
      for (int j = 0; j < 4; ++j) task.x(i, j) = z(rng);
      task.y(i) = task.x(i, 0) * (t + 1) + z(rng) * 0.1;
    }
    mt.tasks.push_back(task);
  }
  RepresentationOptions o;
  const auto rep = train_representation(mt, o);
  const auto rep_back = representation_from_json(parse_json(dump_json(to_json(rep))));
  CHECK(rep_back.a == rep.a);
  CHECK(rep_back.b == rep.b);
  CHECK(rep_back.mode == rep.mode);

  const auto data = small_binary(3);
  CommonMeanOptions c;
  c.use_predicted_sensitive = true;
  const auto cm = train_common_mean(data, c);
  const auto cm_back = common_mean_from_json(parse_json(dump_json(to_json(cm))));
  CHECK(cm_back.decision(data.features) == cm.decision(data.features));
  REQUIRE(cm_back.predictor.has_value());
  CHECK(cm_back.predictor->held_out_accuracy == cm.predictor->held_out_accuracy);
}
