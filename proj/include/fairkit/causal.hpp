#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "fairkit/dataset.hpp"

namespace fairkit {

enum class EdgeLabel { fair, unfair };

struct Edge {
  std::string from;
  std::string to;
  double coef = 0.0;
  EdgeLabel label = EdgeLabel::fair;
};

struct Variable {
  std::string name;
  double intercept = 0.0;
  double noise_std = 1.0;
  bool observed = true;
  // Value is 1{latent > 0} with latent = intercept + sum coef * parent + noise.
  bool binary = false;
};

// Linear structural equations over a DAG of named scalar variables. The
// sensitive variable is a root taking sensitive_values[1] with probability pi
// and sensitive_values[0] otherwise.
struct LinearSEM {
  std::vector<Variable> variables;  // topological order
  std::vector<Edge> edges;
  std::string sensitive;
  std::string target;
  double pi = 0.5;
  std::array<double, 2> sensitive_values{0.0, 1.0};

  void validate() const;
  std::size_t index(std::string_view name) const;  // throws UsageError
  std::vector<std::size_t> parents(std::size_t var) const;  // edge indices into `edges`
  const Edge* find_edge(std::string_view from, std::string_view to) const;
  std::size_t sensitive_index() const { return index(sensitive); }
  std::size_t target_index() const { return index(target); }
};

// Node sequence starting at the sensitive variable.
using Path = std::vector<std::string>;
using PathSelection = std::vector<Path>;

std::vector<Path> enumerate_paths(const LinearSEM& sem, std::string_view from, std::string_view to);
// Paths from the sensitive variable to the target containing at least one unfair edge.
PathSelection unfair_paths(const LinearSEM& sem);
// "A>D,A>Y": each item is a directed path from the sensitive variable; items
// that stop short of the target are extended along every downstream path.
// "unfair" selects unfair_paths; an empty string selects nothing.
PathSelection parse_paths(const LinearSEM& sem, std::string_view text);
std::string format_path(const Path& path);

// Closed form: (a_bar - a) times the sum over paths of the coefficient products.
double pse(const LinearSEM& sem, const PathSelection& paths, double a, double a_bar);

struct McEstimate {
  double value = 0.0;
  double std_error = 0.0;
  std::size_t samples = 0;
};

// E[Y under the path-specific regime a_bar] - E[Y under a], each expectation
// estimated from n independent draws.
McEstimate pse_monte_carlo(const LinearSEM& sem, const PathSelection& paths, double a, double a_bar,
                           std::size_t n, std::uint64_t seed);

// Full-variable values and their noise terms, one row per draw.
struct SemDraw {
  Eigen::MatrixXd values;
  Eigen::MatrixXd noise;
};

SemDraw draw(const LinearSEM& sem, std::size_t n, std::uint64_t seed);
// Deterministic forward pass for given sensitive value and noise vector.
Eigen::VectorXd simulate(const LinearSEM& sem, double a, const Eigen::VectorXd& noise);
// Twin-network pass: returns the path-specific counterfactual values where
// edges on the selected paths carry counterfactual parents (a_bar at the root)
// and every other edge carries the factual ones.
Eigen::VectorXd simulate_twin(const LinearSEM& sem, const PathSelection& paths, double a,
                              double a_bar, const Eigen::VectorXd& noise);

// Observed variables as a dataset: sensitive column = sensitive variable,
// outcome = target (binary targets become -1/+1 labels), features = the rest.
TabularDataset sample(const LinearSEM& sem, std::size_t n, std::uint64_t seed);

// A record aligned with sem.variables; unobserved entries are ignored.
using Record = std::vector<double>;
Record record_from_dataset(const LinearSEM& sem, const TabularDataset& data, std::size_t row);

// Residual of every observed continuous equation with fully observed parents;
// other entries are NaN.
std::vector<double> abduct(const LinearSEM& sem, const Record& record);

// Draws a full noise vector from p(noise | record). The default handles
// linear-Gaussian conditioning and probit-thresholded observed nodes.
using NoiseSampler = std::function<Eigen::VectorXd(const LinearSEM&, const Record&, std::mt19937_64&)>;

struct CounterfactualOptions {
  std::size_t mc_samples = 1000;
  std::uint64_t seed = 0;
  bool force_monte_carlo = false;
  NoiseSampler sampler;  // optional override of the posterior
};

struct CounterfactualResult {
  double value = 0.0;
  double std_error = 0.0;  // zero for exact evaluation
  bool monte_carlo = false;
};

// Target value under the path-specific regime a_bar for one record.
CounterfactualResult counterfactual(const LinearSEM& sem, const Record& record,
                                    const PathSelection& paths, double a_bar,
                                    const CounterfactualOptions& options = {});

using ScoreModel = std::function<double(const Eigen::VectorXd& values)>;

// Averages the model over counterfactual values of the variables, keeping
// variables off the selected paths at their observed values. The target is
// treated as unobserved when inferring the noise.
std::vector<double> correct_scores(const LinearSEM& sem, const ScoreModel& model,
                                   const std::vector<Record>& records, const PathSelection& paths,
                                   double a_bar, const CounterfactualOptions& options = {});

struct OlsFit {
  Eigen::VectorXd coef;  // intercept first when fitted with one
  double residual_std = 0.0;
};

OlsFit least_squares(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, bool intercept);

// Re-estimates intercepts, edge coefficients, noise levels and pi of the
// skeleton by per-equation least squares on the dataset's columns.
LinearSEM fit(const TabularDataset& data, const LinearSEM& skeleton);

std::vector<std::string> scenario_names();
LinearSEM scenario(std::string_view name);

}  // namespace fairkit
