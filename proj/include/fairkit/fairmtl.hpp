#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "fairkit/dataset.hpp"

namespace fairkit {

struct TaskData {
  Eigen::MatrixXd x;         // N_t x d
  Eigen::VectorXd y;         // N_t
  std::vector<int> group;    // N_t sensitive codes, 0 or 1 for the gap vector

  std::size_t size() const { return static_cast<std::size_t>(y.size()); }
};

struct MultiTaskDataset {
  std::vector<TaskData> tasks;

  std::size_t task_count() const { return tasks.size(); }
  std::size_t dim() const;
  void validate() const;

  // Splits a dataset with a task column; the sensitive column must be categorical.
  static MultiTaskDataset from_dataset(const TabularDataset& data);
};

// Feature mean over group 0 minus feature mean over group 1. Throws DataError
// when either group is empty.
Eigen::VectorXd conditional_mean_gap(const TaskData& task);

enum class ConstraintMode { none, equality, relaxed };
ConstraintMode parse_constraint_mode(std::string_view text);
std::string_view to_string(ConstraintMode mode);

struct RepresentationOptions {
  int r = 0;                          // 0 selects min(d, T)
  double lambda = 1.0;
  ConstraintMode mode = ConstraintMode::equality;
  double rho = 1.0;                   // relaxed: penalty weight on (1/T) sum |A^T c_t|^2
  std::optional<double> epsilon;      // relaxed: double rho until the mean penalty <= epsilon
  std::uint64_t seed = 0;
  int max_iterations = 200;
  double tolerance = 1e-8;            // relative change of the objective and of A B per sweep
};

struct RepresentationModel {
  Eigen::MatrixXd a;                  // d x r
  Eigen::MatrixXd b;                  // r x T
  Eigen::MatrixXd gaps;               // d x T, column t = c(tau_t); empty in mode none
  double lambda = 1.0;
  ConstraintMode mode = ConstraintMode::none;
  double rho = 0.0;
  std::optional<double> epsilon;
  std::vector<double> objective_trace;  // after init, then after every block update
  int iterations = 0;
  bool converged = false;
  std::string warning;

  int r() const { return static_cast<int>(a.cols()); }
  Eigen::VectorXd task_weights(std::size_t t) const;
  Eigen::VectorXd predict(std::size_t t, const Eigen::MatrixXd& x) const;
  // |A^T c_t| per task.
  std::vector<double> constraint_residuals() const;
};

// Objective (1/T) sum_t (1/N_t) |y_t - X_t A b_t|^2 + (lambda/2)(|A|_F^2 + |B|_F^2)
// plus (rho/T) sum_t |A^T c_t|^2 when rho > 0.
double representation_objective(const MultiTaskDataset& data, const Eigen::MatrixXd& a,
                                const Eigen::MatrixXd& b, double lambda, double rho,
                                const Eigen::MatrixXd& gaps);

// Per-task ridge step for fixed A.
Eigen::MatrixXd solve_task_factors(const MultiTaskDataset& data, const Eigen::MatrixXd& a,
                                   double lambda);

RepresentationModel train_representation(const MultiTaskDataset& data,
                                         const RepresentationOptions& options);

struct TransferResult {
  Eigen::VectorXd b;
  Eigen::VectorXd w;                 // A b
  std::optional<double> gap_norm;    // |A^T c| with A scaled to unit Frobenius norm
};

// Ridge regression of y on A^T x: min (1/N)|y - X A b|^2 + lambda |b|^2.
TransferResult transfer(const RepresentationModel& model, const TaskData& task, double lambda);

enum class MtlLoss { squared, linear };
MtlLoss parse_mtl_loss(std::string_view text);
std::string_view to_string(MtlLoss loss);

struct SensitivePredictor {
  int groups = 0;
  Eigen::MatrixXd coef;              // groups x (d + 1), bias last
  double held_out_accuracy = 0.0;
  double majority_rate = 0.0;
  std::size_t train_size = 0;
  std::size_t test_size = 0;

  int predict_one(const Eigen::Ref<const Eigen::RowVectorXd>& x) const;
  std::vector<int> predict(const Eigen::MatrixXd& x) const;
};

// One-vs-rest L2-regularized logistic regression of the group code on the
// features, fitted on a seeded stratified 70% split and scored on the rest.
SensitivePredictor train_sensitive_predictor(const TabularDataset& data, double lambda,
                                             std::uint64_t seed);

struct CommonMeanOptions {
  double theta = 0.5;
  double lambda = 0.5;
  double rho = 1.0;
  MtlLoss loss = MtlLoss::squared;
  bool constrain_positive = true;
  bool constrain_negative = true;
  bool use_predicted_sensitive = false;
  double predictor_lambda = 1e-3;
  std::uint64_t seed = 0;
};

struct CommonMeanModel {
  Eigen::VectorXd w0;
  std::vector<Eigen::VectorXd> v;    // w_s = w0 + v_s
  double theta = 0.0;
  double lambda = 0.0;
  double rho = 0.0;
  MtlLoss loss = MtlLoss::squared;
  std::vector<Eigen::VectorXd> u_positive;  // per group; empty vector when the cell is empty
  std::vector<Eigen::VectorXd> u_negative;
  bool constrain_positive = false;
  bool constrain_negative = false;
  std::optional<SensitivePredictor> predictor;
  double objective = 0.0;

  int groups() const { return static_cast<int>(v.size()); }
  Eigen::VectorXd group_weights(int s) const { return w0 + v[static_cast<std::size_t>(s)]; }
  // Group-specific output; uses the predictor for the group when present.
  Eigen::VectorXd decision(const Eigen::MatrixXd& x, const std::vector<int>& groups) const;
  Eigen::VectorXd decision(const Eigen::MatrixXd& x) const;
  // |w_1 . u_1 - w_s . u_s| for every constrained class and s >= 2.
  std::vector<double> constraint_residuals() const;
};

// theta L(w0) + (1-theta)(1/k) sum_s L_s(w_s) + rho [lambda |w0|^2 + (1-lambda)(1/k) sum_s |w_s - w0|^2]
// with L the group-averaged loss, subject to w_1 . u_1 = w_s . u_s per selected class.
CommonMeanModel train_common_mean(const TabularDataset& data, const CommonMeanOptions& options);

double common_mean_objective(const TabularDataset& data, const std::vector<int>& groups,
                             const CommonMeanModel& model);

}  // namespace fairkit
