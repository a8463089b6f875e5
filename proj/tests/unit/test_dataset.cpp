#include <doctest.h>

#include <sstream>

#include "fairkit/csv.hpp"
#include "fairkit/dataset.hpp"
#include "fairkit/error.hpp"

using namespace fairkit;

namespace {

TabularDataset load(const std::string& text, const std::string& schema,
                    OutcomeKind kind = OutcomeKind::classification) {
  std::istringstream in(text);
  return load_csv(in, Schema::parse(schema, kind));
}

std::string error_of(const std::string& text, const std::string& schema) {
  try {
    load(text, schema);
  } catch (const DataError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("schema parsing assigns roles and categorical flags") {
  const auto s = Schema::parse("g=sensitive,x=feature,w=feature:categorical,y=outcome",
                               OutcomeKind::classification);
  REQUIRE(s.columns.size() == 4);
  CHECK(s.columns[0].role == Role::sensitive);
  CHECK(s.columns[2].categorical);
  CHECK(s.columns[3].role == Role::outcome);
  CHECK_THROWS_AS(Schema::parse("x=banana", OutcomeKind::classification), UsageError);
}

TEST_CASE("loading maps labels, codes and one-hot features") {
  const auto d = load("g,x,w,y\nm,1.5,a,1\nf,2,b,0\nm,-3,a,1\n",
                      "g=sensitive,x=feature,w=feature:categorical,y=outcome");
  CHECK(d.size() == 3);
  CHECK(d.dim() == 3);
  CHECK(d.feature_names == std::vector<std::string>{"x", "w=a", "w=b"});
  CHECK(d.sensitive == std::vector<double>{0, 1, 0});
  CHECK(d.sensitive_levels == std::vector<std::string>{"m", "f"});
  CHECK(d.outcome == std::vector<double>{1, -1, 1});
  CHECK(d.features(1, 2) == 1.0);
  CHECK(d.features(2, 0) == -3.0);
  CHECK(d.group_count() == 2);
}

TEST_CASE("errors name the offending row and column") {
  CHECK(error_of("g,x,y\na,1,1\nb,zz,0\n", "g=sensitive,x=feature,y=outcome").find("row 3, column 'x'") !=
        std::string::npos);
  CHECK(error_of("g,x,y\na,1,7\n", "g=sensitive,x=feature,y=outcome").find("row 2, column 'y'") !=
        std::string::npos);
  CHECK(error_of("g,x,y\na,,1\n", "g=sensitive,x=feature,y=outcome").find("missing value") !=
        std::string::npos);
  CHECK(error_of("g,x,y,extra\na,1,1,q\n", "g=sensitive,x=feature,y=outcome").find("extra") !=
        std::string::npos);
  CHECK_THROWS_AS(load("g,x,y\na,1\n", "g=sensitive,x=feature,y=outcome"), DataError);
}

TEST_CASE("write_csv round-trips a loaded file") {
  const std::string text = "g,x,w,y,task\nm,1.5,a,1,t1\nf,2,b,-1,t2\n";
  const auto d = load(text, "g=sensitive,x=feature,w=feature:categorical,y=outcome,task=task");
  std::ostringstream out;
  write_csv(d, out);
  const auto again = load(out.str(), "g=sensitive,x=feature,w=feature:categorical,y=outcome,task=task");
  CHECK(again.features == d.features);
  CHECK(again.outcome == d.outcome);
  CHECK(again.sensitive == d.sensitive);
  CHECK(*again.task_id == *d.task_id);
}

TEST_CASE("quantile edges split mass evenly and pad the extremes") {
  std::vector<double> v;
  for (int i = 0; i < 100; ++i) v.push_back(i);
  const auto e = quantile_edges(v, 4);
  REQUIRE(e.size() == 5);
  CHECK(e[1] == doctest::Approx(24.5));
  CHECK(e[2] == doctest::Approx(49.5));
  CHECK(e[3] == doctest::Approx(74.5));
  CHECK(e.front() < 0.0);
  CHECK(e.back() > 99.0);
  CHECK_THROWS_AS(quantile_edges(std::vector<double>{1, 1, 1}, 2), DataError);
}

TEST_CASE("grid bins are half-open and partition counts every record") {
  DiscretizationGrid g;
  g.y_edges = {0, 1, 2};
  g.s_edges = {0, 0.5, 1.5};
  CHECK(g.y_bin(0.0) == 0);
  CHECK(g.y_bin(1.0) == 1);
  CHECK(g.y_bin(2.0) == -1);
  const std::vector<double> y{0.2, 1.2, 1.9, 0.5};
  const std::vector<double> s{0, 1, 1, 1};
  const auto idx = fairkit::partition(y, s, g);
  CHECK(idx.count(0, 0) == 1);
  CHECK(idx.count(0, 1) == 1);
  CHECK(idx.count(1, 1) == 2);
  CHECK(idx.total() == 4);
  CHECK(idx.group_probs[1] == doctest::Approx(0.75));
}

TEST_CASE("split is deterministic and stratified") {
  std::vector<double> s, y;
  Eigen::MatrixXd x(40, 1);
  for (int i = 0; i < 40; ++i) {
    s.push_back(i % 4 == 0 ? 1 : 0);
    y.push_back(i % 2 ? 1 : -1);
    x(i, 0) = i;
  }
  const auto d = TabularDataset::from_arrays(s, x, y, OutcomeKind::classification);
  const auto a = split(d, 0.7, 5), b = split(d, 0.7, 5);
  CHECK(a.first.features == b.first.features);
  CHECK(a.stratified);
  int g1 = 0;
  for (double v : a.second.sensitive) g1 += v == 1.0;
  CHECK(g1 == 3);
  CHECK(a.first.size() + a.second.size() == 40);
}

TEST_CASE("csv reals use 17 significant digits") {
  CHECK(csv::format_double(0.1) == "0.10000000000000001");
  CHECK(*csv::parse_double("+2.5") == 2.5);
  CHECK_FALSE(csv::parse_double("2.5x"));
}
