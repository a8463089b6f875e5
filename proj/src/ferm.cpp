#include "fairkit/ferm.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/QR>

#include "fairkit/error.hpp"
#include "fairkit/metrics.hpp"

namespace fairkit {
namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Explicit finite-dimensional feature map with f(z_n) = phi.row(n) . w.
struct FeatureMap {
  KernelKind kind = KernelKind::linear;
  MatrixXd phi;
  MatrixXd basis;  // rbf: V Lambda^{-1/2}, mapping w to alpha
};

FeatureMap make_feature_map(const MatrixXd& z, const KernelSpec& kernel) {
  FeatureMap fm;
  fm.kind = kernel.kind;
  if (kernel.kind == KernelKind::linear) {
    fm.phi = z;
    return fm;
  }
  const MatrixXd gram = kernel.gram(z, z);
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(gram);
  if (eig.info() != Eigen::Success) throw SolverError("Gram eigendecomposition failed", 0.0, 0);
  const VectorXd& values = eig.eigenvalues();
  const double cutoff = 1e-10 * std::max(values.maxCoeff(), 0.0);
  std::vector<Eigen::Index> keep;
  for (Eigen::Index j = 0; j < values.size(); ++j) {
    if (values(j) > cutoff) keep.push_back(j);
  }
  fm.phi.resize(z.rows(), static_cast<Eigen::Index>(keep.size()));
  fm.basis.resize(z.rows(), static_cast<Eigen::Index>(keep.size()));
  for (std::size_t c = 0; c < keep.size(); ++c) {
    const double root = std::sqrt(values(keep[c]));
    const auto col = static_cast<Eigen::Index>(c);
    fm.phi.col(col) = eig.eigenvectors().col(keep[c]) * root;
    fm.basis.col(col) = eig.eigenvectors().col(keep[c]) / root;
  }
  return fm;
}

VectorXd alpha_from_w(const FeatureMap& fm, const VectorXd& w) {
  if (fm.kind == KernelKind::rbf) return fm.basis * w;
  // Minimum-norm alpha with Z^T alpha = w.
  Eigen::CompleteOrthogonalDecomposition<MatrixXd> cod(fm.phi.transpose());
  return cod.solve(w);
}

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double softplus_neg(double m) {  // log(1 + exp(-m))
  return m > 0 ? std::log1p(std::exp(-m)) : -m + std::log1p(std::exp(m));
}

double objective_w(FermLoss loss, const MatrixXd& phi, const VectorXd& y, double lambda,
                   const VectorXd& w) {
  const VectorXd f = phi * w;
  return ferm_objective(loss, std::span<const double>(f.data(), static_cast<std::size_t>(f.size())),
                        std::span<const double>(y.data(), static_cast<std::size_t>(y.size())),
                        lambda, w.squaredNorm());
}

// Euclidean projection of v0 onto {v : |G^T v|_1 <= eps}. The penalized
// problem min 1/2|v - v0|^2 + nu |G^T v|_1 has solution v0 - G mu, where mu
// solves the box QP min 1/2 mu^T M mu - c^T mu, |mu_j| <= nu, with M = G^T G and
// c = G^T v0. |G^T v(nu)|_1 is non-increasing in nu; nu is found by bisection
// and the feasible end of the bracket is returned.
class L1ImageProjector {
 public:
  L1ImageProjector(MatrixXd g) : g_(std::move(g)), m_(g_.transpose() * g_) {}

  VectorXd project(const VectorXd& v0, double eps) {
    if (g_.cols() == 0) return v0;
    const VectorXd c = g_.transpose() * v0;
    if (c.lpNorm<1>() <= eps) return v0;
    if (eps <= 0.0) return null_project(v0, c);

    mu_.setZero(g_.cols());
    double lo = 0.0, hi = 1.0;
    VectorXd mu_hi;
    for (int i = 0;; ++i) {
      solve_box(c, hi);
      if (residual(c) <= eps) {
        mu_hi = mu_;
        break;
      }
      lo = hi;
      hi *= 2.0;
      if (i > 200) throw SolverError("L1 projection bracket search failed", residual(c), i);
    }
    for (int i = 0; i < 200 && hi - lo > 1e-15 * hi; ++i) {
      const double mid = 0.5 * (lo + hi);
      solve_box(c, mid);
      if (residual(c) <= eps) {
        hi = mid;
        mu_hi = mu_;
      } else {
        lo = mid;
      }
    }
    mu_ = mu_hi;
    return v0 - g_ * mu_hi;
  }

 private:
  double residual(const VectorXd& c) const { return (c - m_ * mu_).lpNorm<1>(); }

  VectorXd null_project(const VectorXd& v0, const VectorXd& c) const {
    Eigen::CompleteOrthogonalDecomposition<MatrixXd> cod(m_);
    return v0 - g_ * cod.solve(c);
  }

  // Cyclic coordinate descent, warm-started from the previous multiplier.
  void solve_box(const VectorXd& c, double nu) {
    const Eigen::Index m = g_.cols();
    for (Eigen::Index j = 0; j < m; ++j) mu_(j) = std::clamp(mu_(j), -nu, nu);
    VectorXd grad = m_ * mu_ - c;
    for (int sweep = 0; sweep < 100000; ++sweep) {
      double change = 0.0;
      for (Eigen::Index j = 0; j < m; ++j) {
        const double mjj = m_(j, j);
        if (mjj <= 0.0) continue;
        const double updated = std::clamp(mu_(j) - grad(j) / mjj, -nu, nu);
        const double delta = updated - mu_(j);
        if (delta != 0.0) {
          grad += m_.col(j) * delta;
          mu_(j) = updated;
          change = std::max(change, std::abs(delta) * std::sqrt(mjj));
        }
      }
      if (change <= 1e-15 * (1.0 + nu)) break;
    }
  }

  MatrixXd g_;
  MatrixXd m_;
  VectorXd mu_;
};

// Orthonormal basis of {w : G^T w = 0}.
MatrixXd null_basis(const MatrixXd& g) {
  const Eigen::Index r = g.rows();
  if (g.cols() == 0) return MatrixXd::Identity(r, r);
  Eigen::ColPivHouseholderQR<MatrixXd> qr(g);
  qr.setThreshold(1e-12);
  const Eigen::Index rank = qr.rank();
  const MatrixXd q = qr.householderQ() * MatrixXd::Identity(r, r);
  return q.rightCols(r - rank);
}

struct SolveResult {
  VectorXd w;
  int iterations = 0;
};

SolveResult solve_squared(const MatrixXd& phi, const VectorXd& y, double lambda, const MatrixXd& g,
                          double eps) {
  const Eigen::Index r = phi.cols();
  const MatrixXd h = 2.0 * (phi.transpose() * phi + lambda * MatrixXd::Identity(r, r));
  const VectorXd b = 2.0 * phi.transpose() * y;
  Eigen::LLT<MatrixXd> llt(h);
  if (llt.info() != Eigen::Success) throw SolverError("normal equations are not positive definite", 0, 0);
  if (g.cols() == 0 || std::isinf(eps)) return {llt.solve(b), 1};
  const MatrixXd lower = llt.matrixL();
  const VectorXd v0 = lower.triangularView<Eigen::Lower>().solve(b);
  const MatrixXd gw = lower.triangularView<Eigen::Lower>().solve(g);
  L1ImageProjector proj(gw);
  const VectorXd v = proj.project(v0, eps);
  return {lower.transpose().triangularView<Eigen::Upper>().solve(v), 1};
}

SolveResult solve_logistic(const MatrixXd& phi, const VectorXd& y, double lambda, const MatrixXd& g,
                           double eps, int max_iter, double tol) {
  const Eigen::Index r = phi.cols();
  const bool constrained = g.cols() > 0 && !std::isinf(eps);
  VectorXd w = VectorXd::Zero(r);
  double fval = objective_w(FermLoss::logistic, phi, y, lambda, w);
  const int budget = std::min(max_iter, 500);
  for (int it = 1; it <= budget; ++it) {
    const VectorXd f = phi * w;
    VectorXd coef(f.size()), curv(f.size());
    for (Eigen::Index n = 0; n < f.size(); ++n) {
      const double p = sigmoid(-y(n) * f(n));
      coef(n) = -y(n) * p;
      curv(n) = p * (1.0 - p);
    }
    const VectorXd grad = phi.transpose() * coef + 2.0 * lambda * w;
    const MatrixXd hess = phi.transpose() * curv.asDiagonal() * phi +
                          2.0 * lambda * MatrixXd::Identity(r, r);
    Eigen::LLT<MatrixXd> llt(hess);
    if (llt.info() != Eigen::Success) throw SolverError("logistic Hessian is not positive definite", 0, it);
    VectorXd target;
    if (!constrained) {
      target = w - llt.solve(grad);
    } else {
      // Projection of the Newton point in the Hessian metric.
      const MatrixXd lower = llt.matrixL();
      const VectorXd v0 = lower.transpose() * w - lower.triangularView<Eigen::Lower>().solve(grad);
      L1ImageProjector proj(lower.triangularView<Eigen::Lower>().solve(g));
      target = lower.transpose().triangularView<Eigen::Upper>().solve(proj.project(v0, eps));
    }
    const VectorXd d = target - w;
    const double slope = grad.dot(d);
    if (d.norm() <= 1e-14 * (1.0 + w.norm()) || -slope <= tol * (1.0 + std::abs(fval))) {
      return {target, it};
    }
    double step = 1.0, next = fval;
    for (int ls = 0; ls < 60; ++ls) {
      next = objective_w(FermLoss::logistic, phi, y, lambda, w + step * d);
      if (next <= fval + 1e-4 * step * slope) break;
      step *= 0.5;
    }
    w += step * d;
    fval = next;
  }
  throw SolverError("logistic Newton iterations did not converge", 0.0, budget);
}

SolveResult solve_hinge(const MatrixXd& phi, const VectorXd& y, double lambda, const MatrixXd& g,
                        double eps, int max_iter) {
  const Eigen::Index r = phi.cols();
  const bool constrained = g.cols() > 0 && !std::isinf(eps);
  std::optional<L1ImageProjector> proj;
  if (constrained) proj.emplace(g);
  VectorXd w = VectorXd::Zero(r);
  VectorXd avg = VectorXd::Zero(r);
  double weight_sum = 0.0;
  for (int t = 1; t <= max_iter; ++t) {
    const VectorXd f = phi * w;
    VectorXd coef = VectorXd::Zero(f.size());
    for (Eigen::Index n = 0; n < f.size(); ++n) {
      if (y(n) * f(n) < 1.0) coef(n) = -y(n);
    }
    const VectorXd grad = phi.transpose() * coef + 2.0 * lambda * w;
    w -= grad / (2.0 * lambda * t);
    if (proj) w = proj->project(w, eps);
    weight_sum += t;
    avg += (static_cast<double>(t) / weight_sum) * (w - avg);
  }
  return {avg, max_iter};
}

SolveResult solve_any(FermLoss loss, const MatrixXd& phi, const VectorXd& y, double lambda,
                      const MatrixXd& g, double eps, int max_iter, double tol) {
  switch (loss) {
    case FermLoss::squared: return solve_squared(phi, y, lambda, g, eps);
    case FermLoss::logistic: return solve_logistic(phi, y, lambda, g, eps, max_iter, tol);
    case FermLoss::hinge: return solve_hinge(phi, y, lambda, g, eps, max_iter);
  }
  return {};
}

void require_binary_labels(std::span<const double> y) {
  for (double v : y) {
    if (v != 1.0 && v != -1.0) throw DataError("hinge and logistic losses need labels in {-1,+1}");
  }
}

}  // namespace

double KernelSpec::operator()(const Eigen::Ref<const Eigen::RowVectorXd>& a,
                              const Eigen::Ref<const Eigen::RowVectorXd>& b) const {
  if (kind == KernelKind::linear) return a.dot(b);
  return std::exp(-gamma * (a - b).squaredNorm());
}

Eigen::MatrixXd KernelSpec::gram(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) const {
  if (kind == KernelKind::linear) return a * b.transpose();
  MatrixXd out(a.rows(), b.rows());
  const VectorXd na = a.rowwise().squaredNorm();
  const VectorXd nb = b.rowwise().squaredNorm();
  out.noalias() = a * b.transpose();
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < b.rows(); ++j) {
      out(i, j) = std::exp(-gamma * std::max(0.0, na(i) + nb(j) - 2.0 * out(i, j)));
    }
  }
  return out;
}

void KernelSpec::validate() const {
  if (kind == KernelKind::rbf && !(gamma > 0.0 && std::isfinite(gamma))) {
    throw UsageError("rbf gamma must be positive");
  }
}

KernelKind parse_kernel_kind(std::string_view text) {
  if (text == "linear") return KernelKind::linear;
  if (text == "rbf") return KernelKind::rbf;
  throw UsageError("unknown kernel '" + std::string(text) + "' (expected linear or rbf)");
}

std::string_view to_string(KernelKind kind) { return kind == KernelKind::linear ? "linear" : "rbf"; }

FermLoss parse_ferm_loss(std::string_view text) {
  if (text == "squared") return FermLoss::squared;
  if (text == "hinge") return FermLoss::hinge;
  if (text == "logistic") return FermLoss::logistic;
  throw UsageError("unknown loss '" + std::string(text) + "' (expected squared, hinge or logistic)");
}

std::string_view to_string(FermLoss loss) {
  switch (loss) {
    case FermLoss::squared: return "squared";
    case FermLoss::hinge: return "hinge";
    case FermLoss::logistic: return "logistic";
  }
  return "squared";
}

ConstraintSystem build_constraints(std::span<const double> y, std::span<const double> s,
                                   const DiscretizationGrid& grid,
                                   const std::optional<std::vector<int>>& k_subset) {
  const GroupIndex index = fairkit::partition(y, s, grid);
  std::vector<int> ks;
  if (k_subset) {
    ks = *k_subset;
  } else {
    for (int k = 0; k < index.k_bins; ++k) ks.push_back(k);
  }
  ConstraintSystem sys;
  std::vector<Eigen::VectorXd> cols;
  for (int k : ks) {
    if (k < 0 || k >= index.k_bins) throw UsageError("constrained outcome bin out of range");
    for (int p = 0; p < index.q_bins; ++p) {
      for (int q = p + 1; q < index.q_bins; ++q) {
        const auto& cp = index.cell(k, p);
        const auto& cq = index.cell(k, q);
        if (cp.empty() || cq.empty()) continue;
        Eigen::VectorXd col = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(y.size()));
        for (std::size_t i : cp) col(static_cast<Eigen::Index>(i)) += 1.0 / static_cast<double>(cp.size());
        for (std::size_t i : cq) col(static_cast<Eigen::Index>(i)) -= 1.0 / static_cast<double>(cq.size());
        cols.push_back(std::move(col));
        sys.pairs.push_back({k, p, q});
      }
    }
  }
  sys.weights.resize(static_cast<Eigen::Index>(y.size()), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t j = 0; j < cols.size(); ++j) sys.weights.col(static_cast<Eigen::Index>(j)) = cols[j];
  sys.degenerate = cols.empty();
  return sys;
}

ConstraintSystem build_constraints(const TabularDataset& data, const DiscretizationGrid& grid,
                                   const std::optional<std::vector<int>>& k_subset) {
  return build_constraints(data.outcome, data.sensitive, grid, k_subset);
}

Eigen::MatrixXd model_inputs(const TabularDataset& data, bool include_sensitive) {
  if (!include_sensitive) return data.features;
  MatrixXd z(data.features.rows(), data.features.cols() + 1);
  for (Eigen::Index i = 0; i < z.rows(); ++i) z(i, 0) = data.sensitive[static_cast<std::size_t>(i)];
  z.rightCols(data.features.cols()) = data.features;
  return z;
}

void FairERMProblem::validate() const {
  if (!(lambda > 0.0 && std::isfinite(lambda))) throw UsageError("lambda must be positive");
  if (!(epsilon >= 0.0)) throw UsageError("epsilon must be non-negative");
  if (max_iterations < 1) throw UsageError("iteration budget must be positive");
  kernel.validate();
}

Eigen::VectorXd KernelModel::decision(const Eigen::MatrixXd& z) const {
  if (z.cols() != training.cols()) throw DataError("model input dimension mismatch");
  if (kernel.kind == KernelKind::linear) return z * primal_weights();
  return kernel.gram(z, training) * alpha;
}

Eigen::VectorXd KernelModel::decision(const TabularDataset& data) const {
  return decision(model_inputs(data, include_sensitive));
}

Eigen::VectorXd KernelModel::primal_weights() const {
  if (kernel.kind != KernelKind::linear) throw UsageError("primal weights exist only for linear kernels");
  return training.transpose() * alpha;
}

double ferm_objective(FermLoss loss, std::span<const double> f, std::span<const double> y,
                      double lambda, double w_norm_sq) {
  double sum = 0.0;
  for (std::size_t n = 0; n < f.size(); ++n) {
    switch (loss) {
      case FermLoss::squared: sum += (f[n] - y[n]) * (f[n] - y[n]); break;
      case FermLoss::hinge: sum += std::max(0.0, 1.0 - f[n] * y[n]); break;
      case FermLoss::logistic: sum += softplus_neg(f[n] * y[n]); break;
    }
  }
  return sum + lambda * w_norm_sq;
}

KernelModel train_gferm(const FairERMProblem& problem, const Eigen::MatrixXd& z,
                        std::span<const double> y, const ConstraintSystem& constraints) {
  problem.validate();
  if (static_cast<std::size_t>(z.rows()) != y.size() || y.empty()) {
    throw DataError("training inputs and outcomes are not aligned");
  }
  if (constraints.weights.rows() != z.rows()) throw DataError("constraint system has the wrong size");
  if (problem.loss != FermLoss::squared) require_binary_labels(y);

  const FeatureMap fm = make_feature_map(z, problem.kernel);
  const VectorXd yv = Eigen::Map<const VectorXd>(y.data(), static_cast<Eigen::Index>(y.size()));
  const MatrixXd g = fm.phi.transpose() * constraints.weights;
  const bool constrained = !constraints.degenerate && !std::isinf(problem.epsilon);

  SolveResult sol;
  if (constrained && problem.epsilon == 0.0) {
    const MatrixXd basis = null_basis(g);
    if (basis.cols() == 0) {
      sol.w = VectorXd::Zero(fm.phi.cols());
    } else {
      sol = solve_any(problem.loss, fm.phi * basis, yv, problem.lambda, MatrixXd(basis.cols(), 0),
                      problem.epsilon, problem.max_iterations, problem.tolerance);
      sol.w = basis * sol.w;
    }
  } else {
    sol = solve_any(problem.loss, fm.phi, yv, problem.lambda,
                    constrained ? g : MatrixXd(fm.phi.cols(), 0), problem.epsilon,
                    problem.max_iterations, problem.tolerance);
  }

  KernelModel model;
  model.kernel = problem.kernel;
  model.include_sensitive = problem.include_sensitive;
  model.training = z;
  model.alpha = alpha_from_w(fm, sol.w);
  model.iterations = sol.iterations;
  model.objective = objective_w(problem.loss, fm.phi, yv, problem.lambda, sol.w);

  const VectorXd at = g.transpose() * sol.w;
  model.constraints.values.assign(at.data(), at.data() + at.size());
  model.constraints.l1 = at.lpNorm<1>();
  model.constraints.epsilon = problem.epsilon;
  model.constraints.degenerate = constraints.degenerate;
  model.constraints.pairs = constraints.pairs;
  if (constrained) {
    const double slack = problem.epsilon == 0.0 ? 1e-8 : 1e-6;
    if (model.constraints.l1 > problem.epsilon + slack) {
      throw SolverError("solution violates the fairness constraint", model.constraints.l1 - problem.epsilon,
                        sol.iterations);
    }
  }
  return model;
}

KernelModel train_gferm(const FairERMProblem& problem, const TabularDataset& data,
                        const DiscretizationGrid& grid) {
  const ConstraintSystem sys = build_constraints(data, grid, problem.k_subset);
  return train_gferm(problem, model_inputs(data, problem.include_sensitive), data.outcome, sys);
}

FairTransform fair_linear_transform(const Eigen::MatrixXd& features, const Eigen::VectorXd& u) {
  if (u.size() != features.cols()) throw DataError("constraint vector dimension mismatch");
  FairTransform out;
  Eigen::Index best = -1;
  double best_abs = 0.0;
  for (Eigen::Index j = 0; j < u.size(); ++j) {
    if (std::abs(u(j)) > best_abs) {
      best_abs = std::abs(u(j));
      best = j;
    }
  }
  if (best < 0) {
    out.features = features;
    out.identity = true;
    return out;
  }
  out.index = static_cast<int>(best);
  const Eigen::Index d = features.cols();
  out.features.resize(features.rows(), d - 1);
  Eigen::Index c = 0;
  for (Eigen::Index j = 0; j < d; ++j) {
    if (j == best) continue;
    out.features.col(c++) = features.col(j) - features.col(best) * (u(j) / u(best));
  }
  return out;
}

Eigen::VectorXd positive_mean_gap(const Eigen::MatrixXd& features, std::span<const double> y,
                                  std::span<const double> s) {
  if (static_cast<std::size_t>(features.rows()) != y.size() || y.size() != s.size()) {
    throw DataError("features, outcomes and groups are not aligned");
  }
  VectorXd sum0 = VectorXd::Zero(features.cols()), sum1 = sum0;
  double n0 = 0, n1 = 0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (!(y[i] > 0)) continue;
    const auto row = features.row(static_cast<Eigen::Index>(i)).transpose();
    if (s[i] == 0.0) {
      sum0 += row;
      ++n0;
    } else if (s[i] == 1.0) {
      sum1 += row;
      ++n1;
    } else {
      throw DataError("binary FERM needs sensitive codes in {0,1}");
    }
  }
  if (n0 == 0 || n1 == 0) throw DataError("a sensitive group has no positive-labeled records");
  return sum0 / n0 - sum1 / n1;
}

DiscretizationGrid binary_grid() { return {{-1.5, 0.0, 1.5}, {-0.5, 0.5, 1.5}}; }

BinaryFermResult train_ferm_binary(const TabularDataset& data, FermLoss loss, double lambda,
                                   double epsilon, const KernelSpec& kernel) {
  if (data.outcome_kind != OutcomeKind::classification) {
    throw DataError("binary FERM needs a classification outcome");
  }
  positive_mean_gap(data.features, data.outcome, data.sensitive);  // validates groups and positives
  FairERMProblem problem;
  problem.loss = loss;
  problem.lambda = lambda;
  problem.epsilon = epsilon;
  problem.kernel = kernel;
  problem.k_subset = std::vector<int>{1};
  BinaryFermResult result;
  result.model = train_gferm(problem, data, binary_grid());

  const VectorXd f = result.model.decision(data);
  double l0 = 0, l1 = 0, n0 = 0, n1 = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (!(data.outcome[i] > 0)) continue;
    const double loss_i = (1.0 - f(static_cast<Eigen::Index>(i))) / 2.0;
    if (data.sensitive[i] == 0.0) {
      l0 += loss_i;
      ++n0;
    } else {
      l1 += loss_i;
      ++n1;
    }
  }
  result.positive_risk_gap = l0 / n0 - l1 / n1;
  return result;
}

DeltaHat estimate_delta_hat(std::span<const double> outputs, const TabularDataset& data,
                            const DiscretizationGrid& grid) {
  if (outputs.size() != data.size()) throw DataError("model outputs are not aligned with the data");
  ScoreSet set;
  set.scores.assign(outputs.begin(), outputs.end());
  set.outcome = data.outcome;
  // Cells are indexed by the raw sensitive value through the grid.
  set.group.assign(data.size(), 0);
  std::vector<double> hard(outputs.begin(), outputs.end());
  if (data.outcome_kind == OutcomeKind::classification) {
    for (double& v : hard) v = v > 0.0 ? 1.0 : -1.0;
  }
  // The metrics helpers index cells by group code; rebuild codes from the grid.
  for (std::size_t i = 0; i < data.size(); ++i) {
    const int q = grid.s_bin(data.sensitive[i]);
    if (q < 0) throw DataError("record " + std::to_string(i) + " lies outside the sensitive grid");
    set.group[i] = q;
  }
  DiscretizationGrid code_grid = grid;
  code_grid.s_edges.clear();
  for (int q = 0; q <= grid.q_bins(); ++q) code_grid.s_edges.push_back(q - 0.5);

  const auto p = general_fairness(set, code_grid, hard);
  const auto l = loss_general_fairness(set, code_grid, outputs, LossKind::linear, data.outcome_kind);
  return {p.gap_sum - l.gap_sum, p.skipped_cells};
}

DeltaHat estimate_delta_hat(const KernelModel& model, const TabularDataset& data,
                            const DiscretizationGrid& grid) {
  const VectorXd f = model.decision(data);
  return estimate_delta_hat(std::span<const double>(f.data(), static_cast<std::size_t>(f.size())),
                            data, grid);
}

}  // namespace fairkit
