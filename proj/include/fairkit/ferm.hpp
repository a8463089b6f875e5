#pragma once

#include <array>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "fairkit/dataset.hpp"

namespace fairkit {

enum class KernelKind { linear, rbf };

struct KernelSpec {
  KernelKind kind = KernelKind::linear;
  double gamma = 1.0;  // rbf: exp(-gamma |a - b|^2)

  double operator()(const Eigen::Ref<const Eigen::RowVectorXd>& a,
                    const Eigen::Ref<const Eigen::RowVectorXd>& b) const;
  Eigen::MatrixXd gram(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) const;
  void validate() const;
};

KernelKind parse_kernel_kind(std::string_view text);
std::string_view to_string(KernelKind kind);

enum class FermLoss { squared, hinge, logistic };
FermLoss parse_ferm_loss(std::string_view text);
std::string_view to_string(FermLoss loss);

// Column j of `weights` averages the model output over cell (k,p) minus cell
// (k,q): <w, u_{k,p} - u_{k,q}> = weights.col(j) . f(z). In feature space the
// constraint matrix is A = Phi^T weights.
struct ConstraintSystem {
  Eigen::MatrixXd weights;              // n x m
  std::vector<std::array<int, 3>> pairs;  // (k, p, q) with p < q
  bool degenerate = false;              // no pair had two non-empty cells
};

// Unordered pairs p < q, per outcome bin, with both cells non-empty. When
// `k_subset` is given only those outcome bins are constrained.
ConstraintSystem build_constraints(std::span<const double> y, std::span<const double> s,
                                   const DiscretizationGrid& grid,
                                   const std::optional<std::vector<int>>& k_subset = std::nullopt);
ConstraintSystem build_constraints(const TabularDataset& data, const DiscretizationGrid& grid,
                                   const std::optional<std::vector<int>>& k_subset = std::nullopt);

// Model inputs z: the feature block, optionally preceded by the sensitive value.
Eigen::MatrixXd model_inputs(const TabularDataset& data, bool include_sensitive);

struct FairERMProblem {
  FermLoss loss = FermLoss::squared;
  double lambda = 1.0;
  double epsilon = 0.0;  // +inf disables the constraint
  KernelSpec kernel;
  bool include_sensitive = false;
  std::optional<std::vector<int>> k_subset;
  int max_iterations = 10000;
  double tolerance = 1e-10;

  void validate() const;
};

struct ConstraintReport {
  std::vector<double> values;  // <w, u_{k,p} - u_{k,q}> per constraint column
  double l1 = 0.0;
  double epsilon = 0.0;
  bool degenerate = false;
  std::vector<std::array<int, 3>> pairs;
};

struct KernelModel {
  KernelSpec kernel;
  bool include_sensitive = false;
  Eigen::VectorXd alpha;       // dual coefficients, one per training point
  Eigen::MatrixXd training;    // training inputs z (n x p)
  ConstraintReport constraints;
  double objective = 0.0;      // sum of losses + lambda |w|^2 at the solution
  int iterations = 0;

  Eigen::VectorXd decision(const Eigen::MatrixXd& z) const;
  Eigen::VectorXd decision(const TabularDataset& data) const;
  // Explicit primal weights (linear kernel only).
  Eigen::VectorXd primal_weights() const;
};

// Loss sum plus lambda |w|^2 evaluated from the outputs f = Phi w.
double ferm_objective(FermLoss loss, std::span<const double> f, std::span<const double> y,
                      double lambda, double w_norm_sq);

// Solves min sum_n loss(<w, phi(z_n)>, y_n) + lambda |w|^2  s.t.  |A^T w|_1 <= epsilon.
// Throws SolverError when an iterative method fails to reach a feasible point.
KernelModel train_gferm(const FairERMProblem& problem, const TabularDataset& data,
                        const DiscretizationGrid& grid);

// Lower-level entry: explicit inputs and constraint system.
KernelModel train_gferm(const FairERMProblem& problem, const Eigen::MatrixXd& z,
                        std::span<const double> y, const ConstraintSystem& constraints);

struct FairTransform {
  Eigen::MatrixXd features;  // n x (d-1), or the input when `identity`
  int index = -1;            // 0-based column eliminated
  bool identity = false;     // u was zero
};

// x~_j = x_j - x_i u_j / u_i for j != i, with i the lowest index maximizing |u_i|.
FairTransform fair_linear_transform(const Eigen::MatrixXd& features, const Eigen::VectorXd& u);

// u = u_0 - u_1 over positive-labeled records (binary y and s).
Eigen::VectorXd positive_mean_gap(const Eigen::MatrixXd& features, std::span<const double> y,
                                  std::span<const double> s);

DiscretizationGrid binary_grid();

struct BinaryFermResult {
  KernelModel model;
  // Linear-loss risk gap L^{+,0} - L^{+,1} on positive-labeled records.
  double positive_risk_gap = 0.0;
};

// |<w, u>| <= epsilon with u the positive-class group-mean gap.
BinaryFermResult train_ferm_binary(const TabularDataset& data, FermLoss loss, double lambda,
                                   double epsilon, const KernelSpec& kernel = {});

struct DeltaHat {
  double value = 0.0;
  std::vector<std::pair<int, int>> skipped_cells;
};

// sum_k sum_{p,q} (|P^{k,p} - P^{k,q}| - |L_l^{k,p} - L_l^{k,q}|) on the model's outputs.
DeltaHat estimate_delta_hat(std::span<const double> outputs, const TabularDataset& data,
                            const DiscretizationGrid& grid);
DeltaHat estimate_delta_hat(const KernelModel& model, const TabularDataset& data,
                            const DiscretizationGrid& grid);

}  // namespace fairkit
