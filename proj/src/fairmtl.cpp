#include "fairkit/fairmtl.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <random>

#include <Eigen/Cholesky>
#include <Eigen/QR>
#include <Eigen/SVD>

#include "fairkit/error.hpp"

namespace fairkit {

namespace {

std::string task_label(std::size_t t) { return "task " + std::to_string(t); }

double rep_penalty(const Eigen::MatrixXd& a, const Eigen::MatrixXd& gaps) {
  if (gaps.size() == 0) return 0.0;
  return (a.transpose() * gaps).squaredNorm() / static_cast<double>(gaps.cols());
}

struct Alternation {
  Eigen::MatrixXd a;
  Eigen::MatrixXd b;
  std::vector<double> trace;
  int iterations = 0;
  bool converged = false;
};

void check_monotone(std::vector<double>& trace, double value, int iteration) {
  const double prev = trace.back();
  if (value > prev + 1e-10 * std::max(1.0, std::abs(prev))) {
    throw SolverError("alternating minimization objective increased from " + std::to_string(prev) +
                          " to " + std::to_string(value),
                      value - prev, iteration);
  }
  trace.push_back(value);
}

Eigen::MatrixXd solve_factor_matrix(const MultiTaskDataset& data, const Eigen::MatrixXd& b,
                                    double lambda, double rho, const Eigen::MatrixXd& gaps,
                                    const std::vector<Eigen::MatrixXd>& grams,
                                    const std::vector<Eigen::VectorXd>& moments) {
  const auto p = static_cast<Eigen::Index>(data.dim());
  const Eigen::Index r = b.rows();
  const auto t_count = static_cast<double>(data.task_count());
  Eigen::MatrixXd m = Eigen::MatrixXd::Identity(p * r, p * r) * (lambda / 2.0);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(p * r);
  for (std::size_t t = 0; t < data.task_count(); ++t) {
    const double scale = 1.0 / (t_count * static_cast<double>(data.tasks[t].size()));
    const auto bt = b.col(static_cast<Eigen::Index>(t));
    for (Eigen::Index i = 0; i < r; ++i) {
      rhs.segment(i * p, p) += scale * bt(i) * moments[t];
      for (Eigen::Index j = 0; j < r; ++j) {
        m.block(i * p, j * p, p, p) += (scale * bt(i) * bt(j)) * grams[t];
      }
    }
  }
  if (rho > 0.0 && gaps.size() > 0) {
    const Eigen::MatrixXd cc = (rho / t_count) * (gaps * gaps.transpose());
    for (Eigen::Index i = 0; i < r; ++i) m.block(i * p, i * p, p, p) += cc;
  }
  Eigen::LLT<Eigen::MatrixXd> llt(m);
  if (llt.info() != Eigen::Success) throw SolverError("factor-matrix system is not positive definite", 0.0, 0);
  const Eigen::VectorXd vec = llt.solve(rhs);
  return Eigen::Map<const Eigen::MatrixXd>(vec.data(), p, r);
}

Alternation alternate(const MultiTaskDataset& data, int r, double lambda, double rho,
                      const Eigen::MatrixXd& gaps, std::uint64_t seed, int max_iterations,
                      double tolerance) {
  const auto p = static_cast<Eigen::Index>(data.dim());
  std::vector<Eigen::MatrixXd> grams;
  std::vector<Eigen::VectorXd> moments;
  for (const auto& task : data.tasks) {
    grams.push_back(task.x.transpose() * task.x);
    moments.push_back(task.x.transpose() * task.y);
  }

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  Eigen::MatrixXd g(p, r);
  for (Eigen::Index j = 0; j < g.cols(); ++j)
    for (Eigen::Index i = 0; i < g.rows(); ++i) g(i, j) = normal(rng);
  Alternation out;
  out.a = Eigen::HouseholderQR<Eigen::MatrixXd>(g).householderQ() * Eigen::MatrixXd::Identity(p, r);
  out.b = Eigen::MatrixXd::Zero(r, static_cast<Eigen::Index>(data.task_count()));
  out.trace.push_back(representation_objective(data, out.a, out.b, lambda, rho, gaps));

  for (int it = 1; it <= max_iterations; ++it) {
    const double start = out.trace.back();
    const Eigen::MatrixXd w_prev = out.a * out.b;
    out.b = solve_task_factors(data, out.a, lambda);
    check_monotone(out.trace, representation_objective(data, out.a, out.b, lambda, rho, gaps), it);
    out.a = solve_factor_matrix(data, out.b, lambda, rho, gaps, grams, moments);
    check_monotone(out.trace, representation_objective(data, out.a, out.b, lambda, rho, gaps), it);
    // Balanced factors of the same product minimize |A|^2 + |B|^2; kept only
    // when the full objective (with any gap penalty) does not go up.
    {
      Eigen::BDCSVD<Eigen::MatrixXd> svd(out.a * out.b, Eigen::ComputeThinU | Eigen::ComputeThinV);
      const Eigen::Index k = std::min<Eigen::Index>(r, svd.singularValues().size());
      const Eigen::VectorXd root = svd.singularValues().head(k).cwiseSqrt();
      Eigen::MatrixXd a = Eigen::MatrixXd::Zero(p, r), b = Eigen::MatrixXd::Zero(r, out.b.cols());
      a.leftCols(k) = svd.matrixU().leftCols(k) * root.asDiagonal();
      b.topRows(k) = root.asDiagonal() * svd.matrixV().leftCols(k).transpose();
      const double value = representation_objective(data, a, b, lambda, rho, gaps);
      if (value <= out.trace.back()) {
        out.a = std::move(a);
        out.b = std::move(b);
        out.trace.push_back(value);
      }
    }
    out.iterations = it;
    const double now = out.trace.back();
    const Eigen::MatrixXd w_now = out.a * out.b;
    const bool flat = std::abs(start - now) <= tolerance * std::max(std::abs(now), 1e-300);
    const bool still = (w_now - w_prev).norm() <= tolerance * std::max(w_now.norm(), 1e-300);
    if (flat && still) {
      out.converged = true;
      break;
    }
  }
  return out;
}

double log1p_exp(double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// min (1/n) sum log(1 + exp(-y x.w)) + lambda |w without bias|^2, design with bias last.
Eigen::VectorXd fit_logistic(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double lambda) {
  const Eigen::Index p = x.cols();
  const double n = static_cast<double>(x.rows());
  Eigen::VectorXd mask = Eigen::VectorXd::Ones(p);
  mask(p - 1) = 0.0;
  Eigen::VectorXd w = Eigen::VectorXd::Zero(p);
  auto value = [&](const Eigen::VectorXd& v) {
    const Eigen::VectorXd f = x * v;
    double s = 0.0;
    for (Eigen::Index i = 0; i < f.size(); ++i) s += log1p_exp(-y(i) * f(i));
    return s / n + lambda * v.cwiseProduct(mask).squaredNorm();
  };
  double current = value(w);
  for (int it = 0; it < 100; ++it) {
    const Eigen::VectorXd f = x * w;
    Eigen::VectorXd coef(f.size());
    Eigen::VectorXd curv(f.size());
    for (Eigen::Index i = 0; i < f.size(); ++i) {
      coef(i) = -y(i) * sigmoid(-y(i) * f(i));
      const double s = sigmoid(f(i));
      curv(i) = s * (1.0 - s);
    }
    const Eigen::VectorXd grad = x.transpose() * coef / n + 2.0 * lambda * w.cwiseProduct(mask);
    if (grad.norm() < 1e-10) break;
    Eigen::MatrixXd h = x.transpose() * curv.asDiagonal() * x / n;
    h.diagonal() += 2.0 * lambda * mask + Eigen::VectorXd::Constant(p, 1e-12);
    const Eigen::VectorXd step = h.ldlt().solve(grad);
    double t = 1.0;
    bool moved = false;
    for (int ls = 0; ls < 50; ++ls, t *= 0.5) {
      const Eigen::VectorXd trial = w - t * step;
      const double v = value(trial);
      if (v <= current - 1e-4 * t * grad.dot(step)) {
        w = trial;
        current = v;
        moved = true;
        break;
      }
    }
    if (!moved) break;
  }
  return w;
}

Eigen::MatrixXd with_bias(const Eigen::MatrixXd& x) {
  Eigen::MatrixXd out(x.rows(), x.cols() + 1);
  out << x, Eigen::VectorXd::Ones(x.rows());
  return out;
}

// Orthonormal basis of the null space of e (rows are constraints).
Eigen::MatrixXd null_space(const Eigen::MatrixXd& e, Eigen::Index dim) {
  if (e.rows() == 0) return Eigen::MatrixXd::Identity(dim, dim);
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(e.transpose());
  qr.setThreshold(1e-12);
  const Eigen::Index rank = qr.rank();
  const Eigen::MatrixXd q = qr.householderQ();
  return q.rightCols(dim - rank);
}

struct GroupData {
  std::vector<std::vector<Eigen::Index>> rows;
  std::vector<std::vector<Eigen::Index>> positive;
  std::vector<std::vector<Eigen::Index>> negative;
};

GroupData group_rows(const TabularDataset& data, const std::vector<int>& groups, int k) {
  GroupData g;
  g.rows.resize(static_cast<std::size_t>(k));
  g.positive.resize(static_cast<std::size_t>(k));
  g.negative.resize(static_cast<std::size_t>(k));
  for (std::size_t i = 0; i < groups.size(); ++i) {
    const auto s = static_cast<std::size_t>(groups[i]);
    const auto row = static_cast<Eigen::Index>(i);
    g.rows[s].push_back(row);
    if (data.outcome[i] > 0) g.positive[s].push_back(row);
    if (data.outcome[i] < 0) g.negative[s].push_back(row);
  }
  return g;
}

Eigen::VectorXd mean_row(const Eigen::MatrixXd& x, const std::vector<Eigen::Index>& rows) {
  Eigen::VectorXd m = Eigen::VectorXd::Zero(x.cols());
  if (rows.empty()) return Eigen::VectorXd();
  for (Eigen::Index r : rows) m += x.row(r).transpose();
  return m / static_cast<double>(rows.size());
}

double group_loss(MtlLoss loss, const TabularDataset& data, const std::vector<Eigen::Index>& rows,
                  const Eigen::VectorXd& w) {
  double s = 0.0;
  for (Eigen::Index r : rows) {
    const double f = data.features.row(r).dot(w);
    const double y = data.outcome[static_cast<std::size_t>(r)];
    s += loss == MtlLoss::squared ? (f - y) * (f - y) : 0.5 * (1.0 - f * y);
  }
  return s / static_cast<double>(rows.size());
}

}  // namespace

std::size_t MultiTaskDataset::dim() const {
  return tasks.empty() ? 0 : static_cast<std::size_t>(tasks.front().x.cols());
}

void MultiTaskDataset::validate() const {
  if (tasks.empty()) throw DataError("multitask dataset has no tasks");
  const auto d = tasks.front().x.cols();
  for (std::size_t t = 0; t < tasks.size(); ++t) {
    const auto& task = tasks[t];
    if (task.x.cols() != d) {
      throw DataError(task_label(t) + ": has " + std::to_string(task.x.cols()) +
                      " features, expected " + std::to_string(d));
    }
    if (task.size() == 0) throw DataError(task_label(t) + ": has no records");
    if (task.x.rows() != task.y.size() || task.group.size() != task.size()) {
      throw DataError(task_label(t) + ": feature, outcome and group lengths differ");
    }
    if (!task.x.allFinite() || !task.y.allFinite()) throw DataError(task_label(t) + ": non-finite value");
    for (int g : task.group) {
      if (g < 0) throw DataError(task_label(t) + ": negative group code");
    }
  }
}

MultiTaskDataset MultiTaskDataset::from_dataset(const TabularDataset& data) {
  if (!data.task_id) throw DataError("dataset has no task column");
  const auto codes = data.group_codes();
  int t_count = 0;
  for (int t : *data.task_id) t_count = std::max(t_count, t + 1);
  std::vector<std::vector<Eigen::Index>> rows(static_cast<std::size_t>(t_count));
  for (std::size_t i = 0; i < data.size(); ++i) {
    rows[static_cast<std::size_t>((*data.task_id)[i])].push_back(static_cast<Eigen::Index>(i));
  }
  MultiTaskDataset out;
  for (const auto& idx : rows) {
    TaskData task;
    task.x = data.features(idx, Eigen::placeholders::all);
    task.y.resize(static_cast<Eigen::Index>(idx.size()));
    for (std::size_t j = 0; j < idx.size(); ++j) {
      const auto i = static_cast<std::size_t>(idx[j]);
      task.y(static_cast<Eigen::Index>(j)) = data.outcome[i];
      task.group.push_back(codes[i]);
    }
    out.tasks.push_back(std::move(task));
  }
  out.validate();
  return out;
}

Eigen::VectorXd conditional_mean_gap(const TaskData& task) {
  Eigen::VectorXd sum0 = Eigen::VectorXd::Zero(task.x.cols());
  Eigen::VectorXd sum1 = Eigen::VectorXd::Zero(task.x.cols());
  std::size_t n0 = 0, n1 = 0;
  for (std::size_t i = 0; i < task.size(); ++i) {
    const auto row = task.x.row(static_cast<Eigen::Index>(i)).transpose();
    if (task.group[i] == 0) {
      sum0 += row;
      ++n0;
    } else if (task.group[i] == 1) {
      sum1 += row;
      ++n1;
    }
  }
  if (n0 == 0) throw DataError("group 0 is empty; conditional mean gap undefined");
  if (n1 == 0) throw DataError("group 1 is empty; conditional mean gap undefined");
  return sum0 / static_cast<double>(n0) - sum1 / static_cast<double>(n1);
}

ConstraintMode parse_constraint_mode(std::string_view text) {
  if (text == "none") return ConstraintMode::none;
  if (text == "equality") return ConstraintMode::equality;
  if (text == "relaxed") return ConstraintMode::relaxed;
  throw UsageError("unknown constraint mode '" + std::string(text) + "' (none, equality, relaxed)");
}

std::string_view to_string(ConstraintMode mode) {
  switch (mode) {
    case ConstraintMode::none: return "none";
    case ConstraintMode::equality: return "equality";
    case ConstraintMode::relaxed: return "relaxed";
  }
  return "none";
}

Eigen::VectorXd RepresentationModel::task_weights(std::size_t t) const {
  if (t >= static_cast<std::size_t>(b.cols())) throw UsageError("task index out of range");
  return a * b.col(static_cast<Eigen::Index>(t));
}

Eigen::VectorXd RepresentationModel::predict(std::size_t t, const Eigen::MatrixXd& x) const {
  if (x.cols() != a.rows()) throw DataError("feature dimension does not match the representation");
  return x * task_weights(t);
}

std::vector<double> RepresentationModel::constraint_residuals() const {
  std::vector<double> out;
  for (Eigen::Index t = 0; t < gaps.cols(); ++t) out.push_back((a.transpose() * gaps.col(t)).norm());
  return out;
}

double representation_objective(const MultiTaskDataset& data, const Eigen::MatrixXd& a,
                                const Eigen::MatrixXd& b, double lambda, double rho,
                                const Eigen::MatrixXd& gaps) {
  const auto t_count = static_cast<double>(data.task_count());
  double fit = 0.0;
  for (std::size_t t = 0; t < data.task_count(); ++t) {
    const auto& task = data.tasks[t];
    fit += (task.y - task.x * (a * b.col(static_cast<Eigen::Index>(t)))).squaredNorm() /
           static_cast<double>(task.size());
  }
  double value = fit / t_count + 0.5 * lambda * (a.squaredNorm() + b.squaredNorm());
  if (rho > 0.0) value += rho * rep_penalty(a, gaps);
  return value;
}

Eigen::MatrixXd solve_task_factors(const MultiTaskDataset& data, const Eigen::MatrixXd& a,
                                   double lambda) {
  const Eigen::Index r = a.cols();
  const auto t_count = static_cast<double>(data.task_count());
  Eigen::MatrixXd b(r, static_cast<Eigen::Index>(data.task_count()));
  for (std::size_t t = 0; t < data.task_count(); ++t) {
    const auto& task = data.tasks[t];
    const double scale = 1.0 / (t_count * static_cast<double>(task.size()));
    const Eigen::MatrixXd z = task.x * a;
    Eigen::MatrixXd m = scale * (z.transpose() * z);
    m.diagonal().array() += lambda / 2.0;
    b.col(static_cast<Eigen::Index>(t)) = m.llt().solve(scale * (z.transpose() * task.y));
  }
  return b;
}

RepresentationModel train_representation(const MultiTaskDataset& data,
                                         const RepresentationOptions& options) {
  data.validate();
  if (!(options.lambda > 0.0)) throw UsageError("lambda must be positive");
  if (options.r < 0) throw UsageError("r must be at least 1");
  if (options.max_iterations < 1) throw UsageError("max_iterations must be at least 1");
  if (options.mode == ConstraintMode::relaxed && !(options.rho > 0.0)) {
    throw UsageError("relaxed mode needs a positive penalty weight rho");
  }
  if (options.epsilon && !(*options.epsilon >= 0.0)) throw UsageError("epsilon must be non-negative");
  const auto d = static_cast<Eigen::Index>(data.dim());
  const auto t_count = static_cast<Eigen::Index>(data.task_count());
  const int r = options.r > 0 ? options.r : static_cast<int>(std::min(d, t_count));

  RepresentationModel model;
  model.lambda = options.lambda;
  model.mode = options.mode;
  if (r < std::min(d, t_count)) {
    model.warning = "r = " + std::to_string(r) + " is below min(d, T); the factorization imposes a rank constraint";
  }
  if (options.mode != ConstraintMode::none) {
    model.gaps.resize(d, t_count);
    for (Eigen::Index t = 0; t < t_count; ++t) {
      try {
        model.gaps.col(t) = conditional_mean_gap(data.tasks[static_cast<std::size_t>(t)]);
      } catch (const DataError& e) {
        throw DataError(task_label(static_cast<std::size_t>(t)) + ": " + e.what());
      }
    }
  }

  if (options.mode == ConstraintMode::equality) {
    Eigen::MatrixXd basis = Eigen::MatrixXd::Identity(d, d);
    const double top = model.gaps.cwiseAbs().maxCoeff();
    if (top > 0.0) {
      Eigen::BDCSVD<Eigen::MatrixXd> svd(model.gaps, Eigen::ComputeFullU);
      const auto& sv = svd.singularValues();
      Eigen::Index rank = 0;
      for (Eigen::Index i = 0; i < sv.size(); ++i) rank += sv(i) > 1e-12 * sv(0) ? 1 : 0;
      if (rank == d) {
        throw UsageError(
            "the group-mean gaps span the whole feature space, so no representation satisfies the "
            "equality constraints; use relaxed mode");
      }
      basis = svd.matrixU().rightCols(d - rank);
    }
    MultiTaskDataset projected = data;
    for (auto& task : projected.tasks) task.x = task.x * basis;
    auto alt = alternate(projected, r, options.lambda, 0.0, Eigen::MatrixXd(), options.seed,
                         options.max_iterations, options.tolerance);
    model.a = basis * alt.a;
    model.b = alt.b;
    model.objective_trace = std::move(alt.trace);
    model.iterations = alt.iterations;
    model.converged = alt.converged;
    return model;
  }

  double rho = options.mode == ConstraintMode::relaxed ? options.rho : 0.0;
  for (int attempt = 0;; ++attempt) {
    auto alt = alternate(data, r, options.lambda, rho, model.gaps, options.seed,
                         options.max_iterations, options.tolerance);
    model.a = alt.a;
    model.b = alt.b;
    model.objective_trace = std::move(alt.trace);
    model.iterations = alt.iterations;
    model.converged = alt.converged;
    model.rho = rho;
    model.epsilon = options.epsilon;
    if (options.mode != ConstraintMode::relaxed || !options.epsilon) break;
    const double pen = rep_penalty(model.a, model.gaps);
    if (pen <= *options.epsilon) break;
    if (attempt >= 60) {
      throw SolverError("relaxed constraint could not reach epsilon by increasing rho", pen, attempt);
    }
    rho *= 2.0;
  }
  return model;
}

TransferResult transfer(const RepresentationModel& model, const TaskData& task, double lambda) {
  if (task.x.cols() != model.a.rows()) {
    throw DataError("task has " + std::to_string(task.x.cols()) + " features, representation expects " +
                    std::to_string(model.a.rows()));
  }
  if (task.size() == 0) throw DataError("task has no records");
  if (!(lambda >= 0.0)) throw UsageError("lambda must be non-negative");
  const Eigen::RowVectorXd mean = task.x.colwise().mean();
  if ((task.x.rowwise() - mean).cwiseAbs().maxCoeff() == 0.0) {
    throw DataError("degenerate design: every feature has zero variance in the task");
  }
  const Eigen::MatrixXd z = task.x * model.a;
  if (z.cwiseAbs().maxCoeff() == 0.0) throw DataError("degenerate design: the representation maps the task to zero");
  const double n = static_cast<double>(task.size());
  Eigen::MatrixXd m = z.transpose() * z / n;
  m.diagonal().array() += lambda;
  const Eigen::VectorXd rhs = z.transpose() * task.y / n;
  TransferResult out;
  if (lambda > 0.0) {
    out.b = m.llt().solve(rhs);
  } else {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(m);
    if (qr.rank() < m.cols()) throw DataError("degenerate design: transformed features are rank deficient");
    out.b = qr.solve(rhs);
  }
  out.w = model.a * out.b;
  bool has0 = false, has1 = false;
  for (int g : task.group) {
    has0 = has0 || g == 0;
    has1 = has1 || g == 1;
  }
  if (has0 && has1) {
    const double fro = model.a.norm();
    out.gap_norm = fro > 0.0 ? (model.a.transpose() * conditional_mean_gap(task)).norm() / fro : 0.0;
  }
  return out;
}

MtlLoss parse_mtl_loss(std::string_view text) {
  if (text == "squared") return MtlLoss::squared;
  if (text == "linear") return MtlLoss::linear;
  throw UsageError("unknown loss '" + std::string(text) + "' (squared, linear)");
}

std::string_view to_string(MtlLoss loss) { return loss == MtlLoss::squared ? "squared" : "linear"; }

int SensitivePredictor::predict_one(const Eigen::Ref<const Eigen::RowVectorXd>& x) const {
  const Eigen::Index d = coef.cols() - 1;
  if (x.size() != d) throw DataError("sensitive predictor expects " + std::to_string(d) + " features");
  int best = 0;
  double best_score = -std::numeric_limits<double>::infinity();
  for (int c = 0; c < groups; ++c) {
    const double score = coef.row(c).head(d).dot(x) + coef(c, d);
    if (score > best_score) {
      best_score = score;
      best = c;
    }
  }
  return best;
}

std::vector<int> SensitivePredictor::predict(const Eigen::MatrixXd& x) const {
  std::vector<int> out(static_cast<std::size_t>(x.rows()));
  for (Eigen::Index i = 0; i < x.rows(); ++i) out[static_cast<std::size_t>(i)] = predict_one(x.row(i));
  return out;
}

SensitivePredictor train_sensitive_predictor(const TabularDataset& data, double lambda,
                                             std::uint64_t seed) {
  if (!(lambda > 0.0)) throw UsageError("predictor lambda must be positive");
  const auto codes = data.group_codes();
  std::map<int, std::size_t> present;
  for (int g : codes) ++present[g];
  if (present.size() < 2) throw DataError("sensitive predictor needs at least two groups present");

  const auto parts = split(data, 0.7, seed);
  if (parts.second.size() == 0) throw DataError("too few records for a held-out evaluation");
  SensitivePredictor g;
  g.groups = data.group_count();
  g.train_size = parts.first.size();
  g.test_size = parts.second.size();
  const Eigen::MatrixXd design = with_bias(parts.first.features);
  const auto train_codes = parts.first.group_codes();
  g.coef.resize(g.groups, design.cols());
  for (int c = 0; c < g.groups; ++c) {
    Eigen::VectorXd y(design.rows());
    for (Eigen::Index i = 0; i < y.size(); ++i) y(i) = train_codes[static_cast<std::size_t>(i)] == c ? 1.0 : -1.0;
    g.coef.row(c) = fit_logistic(design, y, lambda).transpose();
  }
  const auto test_codes = parts.second.group_codes();
  const auto predicted = g.predict(parts.second.features);
  std::vector<std::size_t> freq(static_cast<std::size_t>(g.groups), 0);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < test_codes.size(); ++i) {
    hits += predicted[i] == test_codes[i] ? 1 : 0;
    ++freq[static_cast<std::size_t>(test_codes[i])];
  }
  const double m = static_cast<double>(test_codes.size());
  g.held_out_accuracy = static_cast<double>(hits) / m;
  g.majority_rate = static_cast<double>(*std::max_element(freq.begin(), freq.end())) / m;
  return g;
}

Eigen::VectorXd CommonMeanModel::decision(const Eigen::MatrixXd& x, const std::vector<int>& groups) const {
  if (static_cast<Eigen::Index>(groups.size()) != x.rows()) throw DataError("one group code per record required");
  Eigen::VectorXd f(x.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const int s = groups[static_cast<std::size_t>(i)];
    if (s < 0 || s >= this->groups()) throw DataError("record " + std::to_string(i) + ": group code out of range");
    f(i) = x.row(i).dot(group_weights(s));
  }
  return f;
}

Eigen::VectorXd CommonMeanModel::decision(const Eigen::MatrixXd& x) const {
  if (!predictor) throw UsageError("model was trained on true groups; group codes are required");
  return decision(x, predictor->predict(x));
}

std::vector<double> CommonMeanModel::constraint_residuals() const {
  std::vector<double> out;
  auto add = [&](const std::vector<Eigen::VectorXd>& u) {
    const double base = group_weights(0).dot(u[0]);
    for (int s = 1; s < groups(); ++s) out.push_back(std::abs(base - group_weights(s).dot(u[static_cast<std::size_t>(s)])));
  };
  if (constrain_positive) add(u_positive);
  if (constrain_negative) add(u_negative);
  return out;
}

double common_mean_objective(const TabularDataset& data, const std::vector<int>& groups,
                             const CommonMeanModel& model) {
  const int k = model.groups();
  const auto g = group_rows(data, groups, k);
  double shared = 0.0, specific = 0.0, dev = 0.0;
  for (int s = 0; s < k; ++s) {
    const auto& rows = g.rows[static_cast<std::size_t>(s)];
    shared += group_loss(model.loss, data, rows, model.w0);
    specific += group_loss(model.loss, data, rows, model.group_weights(s));
    dev += model.v[static_cast<std::size_t>(s)].squaredNorm();
  }
  const double kd = static_cast<double>(k);
  return model.theta * shared / kd + (1.0 - model.theta) * specific / kd +
         model.rho * (model.lambda * model.w0.squaredNorm() + (1.0 - model.lambda) * dev / kd);
}

CommonMeanModel train_common_mean(const TabularDataset& data, const CommonMeanOptions& options) {
  if (!(options.theta >= 0.0 && options.theta <= 1.0)) throw UsageError("theta must be in [0,1]");
  if (!(options.lambda >= 0.0 && options.lambda <= 1.0)) throw UsageError("lambda must be in [0,1]");
  if (!(options.rho > 0.0)) throw UsageError("rho must be positive");
  const bool constrained = options.constrain_positive || options.constrain_negative;
  if ((constrained || options.loss == MtlLoss::linear) && data.outcome_kind != OutcomeKind::classification) {
    throw UsageError("equalized-odds constraints and the linear loss need a classification outcome");
  }
  if (options.loss == MtlLoss::linear && !(options.lambda > 0.0 && options.lambda < 1.0)) {
    throw UsageError("the linear loss is bounded below only for 0 < lambda < 1");
  }
  if (data.size() == 0) throw DataError("dataset has no records");

  CommonMeanModel model;
  model.theta = options.theta;
  model.lambda = options.lambda;
  model.rho = options.rho;
  model.loss = options.loss;
  model.constrain_positive = options.constrain_positive;
  model.constrain_negative = options.constrain_negative;

  std::vector<int> groups;
  int k = 0;
  if (options.use_predicted_sensitive) {
    model.predictor = train_sensitive_predictor(data, options.predictor_lambda, options.seed);
    groups = model.predictor->predict(data.features);
    k = model.predictor->groups;
  } else {
    groups = data.group_codes();
    k = data.group_count();
  }
  const auto g = group_rows(data, groups, k);
  for (int s = 0; s < k; ++s) {
    if (g.rows[static_cast<std::size_t>(s)].empty()) {
      throw DataError("group " + std::to_string(s) + " has no records" +
                      (options.use_predicted_sensitive ? " under the predicted sensitive attribute" : ""));
    }
  }
  auto cell_means = [&](const std::vector<std::vector<Eigen::Index>>& cells, bool required, const char* cls) {
    std::vector<Eigen::VectorXd> u;
    for (int s = 0; s < k; ++s) {
      const auto& rows = cells[static_cast<std::size_t>(s)];
      if (required && rows.empty()) {
        throw DataError(std::string("no records with y=") + cls + "1 in group " + std::to_string(s) +
                        "; cannot constrain that class");
      }
      u.push_back(mean_row(data.features, rows));
    }
    return u;
  };
  model.u_positive = cell_means(g.positive, options.constrain_positive, "+");
  model.u_negative = cell_means(g.negative, options.constrain_negative, "-");

  const Eigen::Index p = data.features.cols();
  const Eigen::Index dim = p * (k + 1);
  const double kd = static_cast<double>(k);
  const double dev = options.rho * (1.0 - options.lambda) / kd;
  // Objective = z^T H z - 2 g^T z + const with z = (w0, w_1, ..., w_k).
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(dim, dim);
  Eigen::VectorXd lin = Eigen::VectorXd::Zero(dim);
  h.block(0, 0, p, p).diagonal().array() += options.rho * options.lambda + options.rho * (1.0 - options.lambda);
  for (int s = 0; s < k; ++s) {
    const Eigen::Index off = p * (s + 1);
    h.block(off, off, p, p).diagonal().array() += dev;
    h.block(0, off, p, p).diagonal().array() -= dev;
    h.block(off, 0, p, p).diagonal().array() -= dev;
    const auto& rows = g.rows[static_cast<std::size_t>(s)];
    const Eigen::MatrixXd xs = data.features(rows, Eigen::placeholders::all);
    Eigen::VectorXd ys(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t j = 0; j < rows.size(); ++j) ys(static_cast<Eigen::Index>(j)) = data.outcome[static_cast<std::size_t>(rows[j])];
    const double ns = static_cast<double>(rows.size());
    const Eigen::VectorXd moment = xs.transpose() * ys / ns;
    if (options.loss == MtlLoss::squared) {
      const Eigen::MatrixXd gram = xs.transpose() * xs / ns;
      h.block(0, 0, p, p) += (options.theta / kd) * gram;
      h.block(off, off, p, p) += ((1.0 - options.theta) / kd) * gram;
      lin.head(p) += (options.theta / kd) * moment;
      lin.segment(off, p) += ((1.0 - options.theta) / kd) * moment;
    } else {
      lin.head(p) += (options.theta / (4.0 * kd)) * moment;
      lin.segment(off, p) += ((1.0 - options.theta) / (4.0 * kd)) * moment;
    }
  }

  std::vector<Eigen::RowVectorXd> rows;
  auto add_rows = [&](const std::vector<Eigen::VectorXd>& u) {
    for (int s = 1; s < k; ++s) {
      Eigen::RowVectorXd e = Eigen::RowVectorXd::Zero(dim);
      e.segment(p, p) = u[0].transpose();
      e.segment(p * (s + 1), p) -= u[static_cast<std::size_t>(s)].transpose();
      rows.push_back(e);
    }
  };
  if (options.constrain_positive) add_rows(model.u_positive);
  if (options.constrain_negative) add_rows(model.u_negative);
  Eigen::MatrixXd e(static_cast<Eigen::Index>(rows.size()), dim);
  for (std::size_t i = 0; i < rows.size(); ++i) e.row(static_cast<Eigen::Index>(i)) = rows[i];

  const Eigen::MatrixXd basis = null_space(e, dim);
  const Eigen::MatrixXd hr = basis.transpose() * h * basis;
  const Eigen::VectorXd gr = basis.transpose() * lin;
  Eigen::VectorXd y;
  if (options.loss == MtlLoss::squared) {
    y = Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd>(hr).solve(gr);
  } else {
    Eigen::LLT<Eigen::MatrixXd> llt(hr);
    if (llt.info() != Eigen::Success) throw SolverError("reduced common-mean system is not positive definite", 0.0, 0);
    y = llt.solve(gr);
  }
  const Eigen::VectorXd z = basis * y;
  model.w0 = z.head(p);
  for (int s = 0; s < k; ++s) model.v.push_back(z.segment(p * (s + 1), p) - model.w0);
  model.objective = common_mean_objective(data, groups, model);
  return model;
}

}  // namespace fairkit
