#include "fairkit/causal.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <Eigen/QR>
#include <boost/math/distributions/normal.hpp>

#include "fairkit/error.hpp"

namespace fairkit {
namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

std::vector<std::string_view> split_on(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (true) {
    const std::size_t next = s.find(sep, pos);
    out.push_back(s.substr(pos, next == std::string_view::npos ? std::string_view::npos : next - pos));
    if (next == std::string_view::npos) break;
    pos = next + 1;
  }
  return out;
}

// Edge indices used by the selected paths. Throws when the selection cannot be
// realized edge-wise: the paths made only of selected edges must be exactly the
// selected paths.
std::vector<bool> selected_edges(const LinearSEM& sem, const PathSelection& paths) {
  std::vector<bool> on(sem.edges.size(), false);
  for (const auto& path : paths) {
    if (path.size() < 2 || path.front() != sem.sensitive) {
      throw UsageError("path '" + format_path(path) + "' must start at " + sem.sensitive);
    }
    for (std::size_t i = 0; i + 1 < path.size(); ++i) {
      const Edge* e = sem.find_edge(path[i], path[i + 1]);
      if (!e) throw UsageError("path '" + format_path(path) + "' uses an edge not in the graph");
      on[static_cast<std::size_t>(e - sem.edges.data())] = true;
    }
  }
  std::set<Path> wanted(paths.begin(), paths.end());
  std::set<std::string> ends;
  for (const auto& p : paths) ends.insert(p.back());
  for (const auto& end : ends) {
    for (const auto& p : enumerate_paths(sem, sem.sensitive, end)) {
      bool all = true;
      for (std::size_t i = 0; i + 1 < p.size() && all; ++i) {
        all = on[static_cast<std::size_t>(sem.find_edge(p[i], p[i + 1]) - sem.edges.data())];
      }
      if (all && !wanted.count(p)) {
        throw UsageError("selection also activates path '" + format_path(p) +
                         "'; path-specific regime is not expressible edge-wise");
      }
    }
  }
  return on;
}

double evaluate(const LinearSEM& sem, std::size_t i, double latent) {
  return sem.variables[i].binary ? (latent > 0.0 ? 1.0 : 0.0) : latent;
}

std::mt19937_64 stream(std::uint64_t seed, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
  return std::mt19937_64(seq);
}

// Posterior over the noise vector given a record: a Gaussian part (mean +
// factor * z) plus independent truncated normals for observed binary nodes.
struct Posterior {
  VectorXd mean;
  MatrixXd factor;  // V x r
  struct Truncated {
    std::size_t var;
    double mu;       // latent mean without noise
    double sd;
    bool positive;   // observed value 1
  };
  std::vector<Truncated> truncated;

  bool deterministic() const { return factor.cols() == 0 && truncated.empty(); }
};

double truncated_noise(const Posterior::Truncated& t, std::mt19937_64& rng) {
  const boost::math::normal unit;
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  double u = u01(rng);
  while (u <= 0.0) u = u01(rng);
  // Noise e with mu + e > 0 (positive) or <= 0 otherwise.
  const double cut = -t.mu / t.sd;
  double z;
  if (t.positive) {
    const double tail = boost::math::cdf(boost::math::complement(unit, cut));  // P(Z > cut)
    z = boost::math::quantile(boost::math::complement(unit, u * tail));
    if (!(z > cut)) z = std::nextafter(cut, std::numeric_limits<double>::infinity());
  } else {
    const double head = boost::math::cdf(unit, cut);  // P(Z <= cut)
    z = boost::math::quantile(unit, u * head);
    if (!(z <= cut)) z = cut;
  }
  return z * t.sd;
}

VectorXd sample_posterior(const Posterior& post, std::mt19937_64& rng) {
  VectorXd eps = post.mean;
  if (post.factor.cols() > 0) {
    std::normal_distribution<double> n01;
    VectorXd z(post.factor.cols());
    for (Eigen::Index j = 0; j < z.size(); ++j) z(j) = n01(rng);
    eps += post.factor * z;
  }
  for (const auto& t : post.truncated) eps(static_cast<Eigen::Index>(t.var)) = truncated_noise(t, rng);
  return eps;
}

bool has_observed_descendant(const LinearSEM& sem, std::size_t var, const std::vector<bool>& observed) {
  std::vector<bool> seen(sem.variables.size(), false);
  std::vector<std::size_t> stack{var};
  while (!stack.empty()) {
    const std::size_t v = stack.back();
    stack.pop_back();
    for (const auto& e : sem.edges) {
      if (e.from != sem.variables[v].name) continue;
      const std::size_t c = sem.index(e.to);
      if (seen[c]) continue;
      seen[c] = true;
      if (observed[c]) return true;
      stack.push_back(c);
    }
  }
  return false;
}

Posterior build_posterior(const LinearSEM& sem, const Record& record, bool condition_on_target) {
  const std::size_t V = sem.variables.size();
  const std::size_t sens = sem.sensitive_index();
  if (record.size() != V) throw DataError("record does not list every SEM variable");
  std::vector<bool> observed(V);
  for (std::size_t i = 0; i < V; ++i) {
    observed[i] = sem.variables[i].observed && (condition_on_target || i != sem.target_index());
    if (observed[i] && !std::isfinite(record[i])) {
      throw DataError("record is missing observed variable '" + sem.variables[i].name + "'");
    }
  }
  if (!std::isfinite(record[sens])) throw DataError("record is missing the sensitive value");

  Posterior post;
  post.mean = VectorXd::Zero(static_cast<Eigen::Index>(V));
  // Unobserved-with-evidence continuous nodes need joint Gaussian conditioning.
  std::vector<std::size_t> cont;
  bool hidden_evidence = false;
  for (std::size_t i = 0; i < V; ++i) {
    if (i == sens) continue;
    const auto& var = sem.variables[i];
    if (var.binary) {
      if (!observed[i] && has_observed_descendant(sem, i, observed)) {
        throw UsageError("no default posterior for hidden binary '" + var.name +
                         "' with observed descendants; supply a noise sampler");
      }
      continue;
    }
    cont.push_back(i);
    if (!observed[i] && has_observed_descendant(sem, i, observed)) hidden_evidence = true;
  }
  for (std::size_t i = 0; i < V; ++i) {
    const auto& var = sem.variables[i];
    if (i == sens || !var.binary || !observed[i]) continue;
    double mu = var.intercept;
    for (std::size_t e : sem.parents(i)) {
      const std::size_t p = sem.index(sem.edges[e].from);
      if (!observed[p] && p != sens) {
        throw UsageError("no default posterior for binary '" + var.name +
                         "' with a hidden parent; supply a noise sampler");
      }
      mu += sem.edges[e].coef * record[p];
    }
    post.truncated.push_back({i, mu, var.noise_std, record[i] > 0.5});
  }

  const auto m = static_cast<Eigen::Index>(cont.size());
  std::vector<Eigen::Index> pos(V, -1);
  for (Eigen::Index c = 0; c < m; ++c) pos[cont[static_cast<std::size_t>(c)]] = c;

  if (!hidden_evidence) {
    // Observed continuous residuals are point masses; the rest follow the prior.
    std::vector<std::size_t> free;
    for (std::size_t i : cont) {
      const auto& var = sem.variables[i];
      if (observed[i]) {
        double fitted = var.intercept;
        for (std::size_t e : sem.parents(i)) fitted += sem.edges[e].coef * record[sem.index(sem.edges[e].from)];
        post.mean(static_cast<Eigen::Index>(i)) = record[i] - fitted;
      } else {
        free.push_back(i);
      }
    }
    post.factor = MatrixXd::Zero(static_cast<Eigen::Index>(V), static_cast<Eigen::Index>(free.size()));
    for (std::size_t j = 0; j < free.size(); ++j) {
      post.factor(static_cast<Eigen::Index>(free[j]), static_cast<Eigen::Index>(j)) =
          sem.variables[free[j]].noise_std;
    }
    return post;
  }

  // v_c = c + B v_c + eps_c  =>  v_c = T (c + eps_c), T = (I - B)^{-1}.
  MatrixXd b = MatrixXd::Zero(m, m);
  VectorXd c = VectorXd::Zero(m);
  VectorXd d(m);
  for (Eigen::Index r = 0; r < m; ++r) {
    const std::size_t i = cont[static_cast<std::size_t>(r)];
    c(r) = sem.variables[i].intercept;
    d(r) = sem.variables[i].noise_std * sem.variables[i].noise_std;
    for (std::size_t e : sem.parents(i)) {
      const std::size_t p = sem.index(sem.edges[e].from);
      if (pos[p] >= 0) {
        b(r, pos[p]) += sem.edges[e].coef;
      } else {
        c(r) += sem.edges[e].coef * record[p];  // sensitive or observed binary parent
      }
    }
  }
  const MatrixXd t = (MatrixXd::Identity(m, m) - b).inverse();
  std::vector<Eigen::Index> obs;
  for (Eigen::Index r = 0; r < m; ++r) {
    if (observed[cont[static_cast<std::size_t>(r)]]) obs.push_back(r);
  }
  const auto o = static_cast<Eigen::Index>(obs.size());
  MatrixXd to(o, m);
  VectorXd vo(o);
  for (Eigen::Index k = 0; k < o; ++k) {
    to.row(k) = t.row(obs[static_cast<std::size_t>(k)]);
    vo(k) = record[cont[static_cast<std::size_t>(obs[static_cast<std::size_t>(k)])]];
  }
  const MatrixXd dm = d.asDiagonal();
  const MatrixXd s = to * dm * to.transpose();
  Eigen::CompleteOrthogonalDecomposition<MatrixXd> cod(s);
  const MatrixXd gain = dm * to.transpose() * cod.pseudoInverse();  // m x o
  const VectorXd mean_c = gain * (vo - to * c);
  MatrixXd cov = dm - gain * to * dm;
  cov = 0.5 * (cov + cov.transpose());
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(cov);
  std::vector<Eigen::Index> keep;
  const double top = std::max(eig.eigenvalues().maxCoeff(), 0.0);
  for (Eigen::Index j = 0; j < m; ++j) {
    if (eig.eigenvalues()(j) > 1e-14 * top && eig.eigenvalues()(j) > 0) keep.push_back(j);
  }
  post.factor = MatrixXd::Zero(static_cast<Eigen::Index>(V), static_cast<Eigen::Index>(keep.size()));
  for (Eigen::Index r = 0; r < m; ++r) {
    const auto i = static_cast<Eigen::Index>(cont[static_cast<std::size_t>(r)]);
    post.mean(i) = mean_c(r);
    for (std::size_t j = 0; j < keep.size(); ++j) {
      post.factor(i, static_cast<Eigen::Index>(j)) =
          eig.eigenvectors()(r, keep[j]) * std::sqrt(eig.eigenvalues()(keep[j]));
    }
  }
  return post;
}

bool any_binary(const LinearSEM& sem) {
  return std::any_of(sem.variables.begin(), sem.variables.end(), [](const Variable& v) { return v.binary; });
}

}  // namespace

void LinearSEM::validate() const {
  if (variables.empty()) throw UsageError("SEM has no variables");
  std::set<std::string> names;
  for (const auto& v : variables) {
    if (v.name.empty() || !names.insert(v.name).second) {
      throw UsageError("SEM variable names must be unique and non-empty");
    }
  }
  const std::size_t s = index(sensitive);
  index(target);
  if (sensitive == target) throw UsageError("sensitive variable and target must differ");
  if (!(pi >= 0.0 && pi <= 1.0)) throw UsageError("pi must lie in [0,1]");
  if (variables[s].binary) throw UsageError("the sensitive variable is not a thresholded node");
  for (std::size_t i = 0; i < variables.size(); ++i) {
    if (i == s) continue;
    if (!(variables[i].noise_std > 0.0) || !std::isfinite(variables[i].noise_std)) {
      throw UsageError("noise_std of '" + variables[i].name + "' must be positive");
    }
  }
  std::set<std::pair<std::string, std::string>> seen;
  for (const auto& e : edges) {
    const std::size_t from = index(e.from), to = index(e.to);
    if (from >= to) {
      throw UsageError("edge " + e.from + "->" + e.to + " breaks the topological variable order");
    }
    if (to == s) throw UsageError("the sensitive variable must be a root");
    if (!seen.emplace(e.from, e.to).second) throw UsageError("duplicate edge " + e.from + "->" + e.to);
    if (!std::isfinite(e.coef)) throw UsageError("edge coefficients must be finite");
  }
}

std::size_t LinearSEM::index(std::string_view name) const {
  for (std::size_t i = 0; i < variables.size(); ++i) {
    if (variables[i].name == name) return i;
  }
  throw UsageError("unknown SEM variable '" + std::string(name) + "'");
}

std::vector<std::size_t> LinearSEM::parents(std::size_t var) const {
  std::vector<std::size_t> out;
  for (std::size_t e = 0; e < edges.size(); ++e) {
    if (edges[e].to == variables[var].name) out.push_back(e);
  }
  return out;
}

const Edge* LinearSEM::find_edge(std::string_view from, std::string_view to) const {
  for (const auto& e : edges) {
    if (e.from == from && e.to == to) return &e;
  }
  return nullptr;
}

std::vector<Path> enumerate_paths(const LinearSEM& sem, std::string_view from, std::string_view to) {
  std::vector<Path> out;
  Path current{std::string(from)};
  std::function<void()> walk = [&] {
    if (current.back() == to) {
      if (current.size() > 1) out.push_back(current);
      return;
    }
    for (const auto& e : sem.edges) {
      if (e.from != current.back()) continue;
      current.push_back(e.to);
      walk();
      current.pop_back();
    }
  };
  sem.index(from);
  sem.index(to);
  walk();
  std::sort(out.begin(), out.end());
  return out;
}

PathSelection unfair_paths(const LinearSEM& sem) {
  PathSelection out;
  for (const auto& p : enumerate_paths(sem, sem.sensitive, sem.target)) {
    for (std::size_t i = 0; i + 1 < p.size(); ++i) {
      if (sem.find_edge(p[i], p[i + 1])->label == EdgeLabel::unfair) {
        out.push_back(p);
        break;
      }
    }
  }
  return out;
}

PathSelection parse_paths(const LinearSEM& sem, std::string_view text) {
  const std::string all = trim(text);
  if (all.empty() || all == "none") return {};
  if (all == "unfair") return unfair_paths(sem);
  if (all == "all") return enumerate_paths(sem, sem.sensitive, sem.target);
  std::set<Path> out;
  for (std::string_view item : split_on(all, ',')) {
    Path path;
    for (std::string_view node : split_on(item, '>')) path.push_back(trim(node));
    if (path.size() < 2 || path.front() != sem.sensitive) {
      throw UsageError("path '" + std::string(item) + "' must start at " + sem.sensitive);
    }
    for (std::size_t i = 0; i + 1 < path.size(); ++i) {
      if (!sem.find_edge(path[i], path[i + 1])) {
        throw UsageError("path '" + std::string(item) + "' uses missing edge " + path[i] + ">" + path[i + 1]);
      }
    }
    if (path.back() == sem.target) {
      out.insert(path);
      continue;
    }
    const auto tails = enumerate_paths(sem, path.back(), sem.target);
    if (tails.empty()) {
      throw UsageError("path '" + std::string(item) + "' cannot be extended to " + sem.target);
    }
    for (const auto& tail : tails) {
      Path full = path;
      full.insert(full.end(), tail.begin() + 1, tail.end());
      out.insert(full);
    }
  }
  return {out.begin(), out.end()};
}

std::string format_path(const Path& path) {
  std::string out;
  for (std::size_t i = 0; i < path.size(); ++i) {
    if (i) out += '>';
    out += path[i];
  }
  return out;
}

double pse(const LinearSEM& sem, const PathSelection& paths, double a, double a_bar) {
  sem.validate();
  selected_edges(sem, paths);
  double total = 0.0;
  for (const auto& path : paths) {
    if (path.back() != sem.target) throw UsageError("path '" + format_path(path) + "' does not reach the target");
    double product = 1.0;
    for (std::size_t i = 0; i + 1 < path.size(); ++i) {
      if (sem.variables[sem.index(path[i + 1])].binary) {
        throw UsageError("closed-form effects need linear equations along the path; use Monte Carlo");
      }
      product *= sem.find_edge(path[i], path[i + 1])->coef;
    }
    total += product;
  }
  return total * (a_bar - a);
}

Eigen::VectorXd simulate(const LinearSEM& sem, double a, const Eigen::VectorXd& noise) {
  const std::size_t V = sem.variables.size();
  if (static_cast<std::size_t>(noise.size()) != V) throw UsageError("noise vector has the wrong length");
  const std::size_t s = sem.sensitive_index();
  VectorXd v(static_cast<Eigen::Index>(V));
  for (std::size_t i = 0; i < V; ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    if (i == s) {
      v(ii) = a;
      continue;
    }
    double latent = sem.variables[i].intercept + noise(ii);
    for (std::size_t e : sem.parents(i)) {
      latent += sem.edges[e].coef * v(static_cast<Eigen::Index>(sem.index(sem.edges[e].from)));
    }
    v(ii) = evaluate(sem, i, latent);
  }
  return v;
}

Eigen::VectorXd simulate_twin(const LinearSEM& sem, const PathSelection& paths, double a,
                              double a_bar, const Eigen::VectorXd& noise) {
  const std::vector<bool> on = selected_edges(sem, paths);
  const VectorXd factual = simulate(sem, a, noise);
  const std::size_t V = sem.variables.size();
  const std::size_t s = sem.sensitive_index();
  VectorXd cf(static_cast<Eigen::Index>(V));
  for (std::size_t i = 0; i < V; ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    if (i == s) {
      cf(ii) = a_bar;
      continue;
    }
    double latent = sem.variables[i].intercept + noise(ii);
    for (std::size_t e : sem.parents(i)) {
      const auto p = static_cast<Eigen::Index>(sem.index(sem.edges[e].from));
      latent += sem.edges[e].coef * (on[e] ? cf(p) : factual(p));
    }
    cf(ii) = evaluate(sem, i, latent);
  }
  return cf;
}

SemDraw draw(const LinearSEM& sem, std::size_t n, std::uint64_t seed) {
  sem.validate();
  const std::size_t V = sem.variables.size();
  const std::size_t s = sem.sensitive_index();
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution coin(sem.pi);
  std::normal_distribution<double> n01;
  SemDraw out;
  out.values.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(V));
  out.noise.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(V));
  VectorXd eps(static_cast<Eigen::Index>(V));
  for (std::size_t r = 0; r < n; ++r) {
    const double a = coin(rng) ? sem.sensitive_values[1] : sem.sensitive_values[0];
    for (std::size_t i = 0; i < V; ++i) {
      eps(static_cast<Eigen::Index>(i)) = i == s ? 0.0 : sem.variables[i].noise_std * n01(rng);
    }
    out.values.row(static_cast<Eigen::Index>(r)) = simulate(sem, a, eps).transpose();
    out.noise.row(static_cast<Eigen::Index>(r)) = eps.transpose();
  }
  return out;
}

McEstimate pse_monte_carlo(const LinearSEM& sem, const PathSelection& paths, double a, double a_bar,
                           std::size_t n, std::uint64_t seed) {
  if (n < 2) throw UsageError("Monte-Carlo estimation needs at least 2 samples");
  sem.validate();
  selected_edges(sem, paths);
  const std::size_t V = sem.variables.size();
  const std::size_t s = sem.sensitive_index();
  const auto y = static_cast<Eigen::Index>(sem.target_index());
  // Independent streams for the two expectations.
  std::mt19937_64 rng_cf = stream(seed, 1), rng_f = stream(seed, 2);
  std::normal_distribution<double> n01;
  VectorXd eps(static_cast<Eigen::Index>(V));
  auto fill = [&](std::mt19937_64& rng) {
    for (std::size_t i = 0; i < V; ++i) {
      eps(static_cast<Eigen::Index>(i)) = i == s ? 0.0 : sem.variables[i].noise_std * n01(rng);
    }
  };
  double mean_cf = 0, m2_cf = 0, mean_f = 0, m2_f = 0;
  for (std::size_t k = 1; k <= n; ++k) {
    fill(rng_cf);
    const double ycf = simulate_twin(sem, paths, a, a_bar, eps)(y);
    fill(rng_f);
    const double yf = simulate(sem, a, eps)(y);
    const double d1 = ycf - mean_cf;
    mean_cf += d1 / static_cast<double>(k);
    m2_cf += d1 * (ycf - mean_cf);
    const double d2 = yf - mean_f;
    mean_f += d2 / static_cast<double>(k);
    m2_f += d2 * (yf - mean_f);
  }
  const double nn = static_cast<double>(n);
  McEstimate est;
  est.value = mean_cf - mean_f;
  est.std_error = std::sqrt((m2_cf / (nn - 1) + m2_f / (nn - 1)) / nn);
  est.samples = n;
  return est;
}

TabularDataset sample(const LinearSEM& sem, std::size_t n, std::uint64_t seed) {
  const SemDraw d = draw(sem, n, seed);
  const std::size_t s = sem.sensitive_index(), y = sem.target_index();
  if (!sem.variables[y].observed) throw UsageError("the target variable must be observed");
  std::vector<std::size_t> feats;
  for (std::size_t i = 0; i < sem.variables.size(); ++i) {
    if (i != s && i != y && sem.variables[i].observed) feats.push_back(i);
  }
  if (feats.empty()) throw UsageError("SEM has no observed feature variables");
  TabularDataset data;
  const bool binary_codes = sem.sensitive_values[0] == 0.0 && sem.sensitive_values[1] == 1.0;
  data.sensitive_kind = binary_codes ? SensitiveKind::categorical : SensitiveKind::real;
  data.outcome_kind = sem.variables[y].binary ? OutcomeKind::classification : OutcomeKind::regression;
  data.features.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(feats.size()));
  for (std::size_t j = 0; j < feats.size(); ++j) {
    data.features.col(static_cast<Eigen::Index>(j)) = d.values.col(static_cast<Eigen::Index>(feats[j]));
    data.feature_names.push_back(sem.variables[feats[j]].name);
  }
  data.sensitive.resize(n);
  data.outcome.resize(n);
  for (std::size_t r = 0; r < n; ++r) {
    const auto rr = static_cast<Eigen::Index>(r);
    data.sensitive[r] = d.values(rr, static_cast<Eigen::Index>(s));
    const double v = d.values(rr, static_cast<Eigen::Index>(y));
    data.outcome[r] = sem.variables[y].binary ? (v > 0.5 ? 1.0 : -1.0) : v;
  }
  // Column layout in variable order so the sample re-emits with named columns.
  std::size_t next_feature = 0;
  for (std::size_t i = 0; i < sem.variables.size(); ++i) {
    if (!sem.variables[i].observed) continue;
    SourceColumn col;
    col.name = sem.variables[i].name;
    if (i == s) col.role = Role::sensitive;
    else if (i == y) col.role = Role::outcome;
    else {
      col.role = Role::feature;
      col.first_feature = next_feature++;
    }
    data.columns.push_back(std::move(col));
  }
  data.validate();
  return data;
}

Record record_from_dataset(const LinearSEM& sem, const TabularDataset& data, std::size_t row) {
  if (row >= data.size()) throw DataError("record index out of range");
  Record rec(sem.variables.size(), kNaN);
  const std::size_t s = sem.sensitive_index(), y = sem.target_index();
  rec[s] = data.sensitive[row];
  rec[y] = sem.variables[y].binary ? (data.outcome[row] > 0 ? 1.0 : 0.0) : data.outcome[row];
  for (std::size_t i = 0; i < sem.variables.size(); ++i) {
    if (i == s || i == y || !sem.variables[i].observed) continue;
    auto it = std::find(data.feature_names.begin(), data.feature_names.end(), sem.variables[i].name);
    if (it == data.feature_names.end()) {
      throw DataError("dataset has no column for SEM variable '" + sem.variables[i].name + "'");
    }
    rec[i] = data.features(static_cast<Eigen::Index>(row),
                           static_cast<Eigen::Index>(it - data.feature_names.begin()));
  }
  return rec;
}

std::vector<double> abduct(const LinearSEM& sem, const Record& record) {
  sem.validate();
  const std::size_t V = sem.variables.size();
  if (record.size() != V) throw DataError("record does not list every SEM variable");
  const std::size_t s = sem.sensitive_index();
  std::vector<double> out(V, kNaN);
  out[s] = 0.0;
  for (std::size_t i = 0; i < V; ++i) {
    const auto& var = sem.variables[i];
    if (i == s || var.binary || !var.observed) continue;
    if (!std::isfinite(record[i])) throw DataError("record is missing variable '" + var.name + "'");
    double fitted = var.intercept;
    bool known = true;
    for (std::size_t e : sem.parents(i)) {
      const std::size_t p = sem.index(sem.edges[e].from);
      if (!sem.variables[p].observed && p != s) known = false;
      fitted += sem.edges[e].coef * record[p];
    }
    if (known) out[i] = record[i] - fitted;
  }
  return out;
}

CounterfactualResult counterfactual(const LinearSEM& sem, const Record& record,
                                    const PathSelection& paths, double a_bar,
                                    const CounterfactualOptions& options) {
  sem.validate();
  selected_edges(sem, paths);
  const std::size_t s = sem.sensitive_index();
  const auto y = static_cast<Eigen::Index>(sem.target_index());
  if (record.size() != sem.variables.size()) throw DataError("record does not list every SEM variable");
  const double a = record[s];

  CounterfactualResult result;
  std::optional<Posterior> post;
  if (!options.sampler) post = build_posterior(sem, record, true);
  const bool linear = !any_binary(sem);
  if (!options.sampler && !options.force_monte_carlo && linear) {
    // The twin pass is affine in the noise, so the posterior mean is exact.
    result.value = simulate_twin(sem, paths, a, a_bar, post->mean)(y);
    return result;
  }
  if (options.mc_samples < 1) throw UsageError("Monte-Carlo counterfactuals need at least 1 sample");
  std::mt19937_64 rng(options.seed);
  double mean = 0, m2 = 0;
  for (std::size_t k = 1; k <= options.mc_samples; ++k) {
    const VectorXd eps = options.sampler ? options.sampler(sem, record, rng) : sample_posterior(*post, rng);
    const double v = simulate_twin(sem, paths, a, a_bar, eps)(y);
    const double delta = v - mean;
    mean += delta / static_cast<double>(k);
    m2 += delta * (v - mean);
  }
  result.value = mean;
  result.monte_carlo = true;
  const double m = static_cast<double>(options.mc_samples);
  result.std_error = options.mc_samples > 1 ? std::sqrt(m2 / (m - 1) / m) : 0.0;
  return result;
}

std::vector<double> correct_scores(const LinearSEM& sem, const ScoreModel& model,
                                   const std::vector<Record>& records, const PathSelection& paths,
                                   double a_bar, const CounterfactualOptions& options) {
  sem.validate();
  selected_edges(sem, paths);
  const std::size_t s = sem.sensitive_index();
  const std::size_t y = sem.target_index();
  std::vector<double> out(records.size());
  for (std::size_t r = 0; r < records.size(); ++r) {
    const Record& rec = records[r];
    try {
      std::optional<Posterior> post;
      if (!options.sampler) post = build_posterior(sem, rec, false);
      // Deterministic apart from the target's own noise, which the twin pass
      // for the other variables never reads.
      bool point_mass = false;
      if (post && post->truncated.empty()) {
        point_mass = true;
        for (Eigen::Index j = 0; j < post->factor.cols(); ++j) {
          for (Eigen::Index i = 0; i < post->factor.rows(); ++i) {
            if (static_cast<std::size_t>(i) != y && post->factor(i, j) != 0.0) point_mass = false;
          }
        }
      }
      if (point_mass && !options.force_monte_carlo) {
        out[r] = model(simulate_twin(sem, paths, rec[s], a_bar, post->mean));
        continue;
      }
      if (options.mc_samples < 1) throw UsageError("Monte-Carlo correction needs at least 1 sample");
      std::mt19937_64 rng = stream(options.seed, r);
      double sum = 0.0;
      for (std::size_t k = 0; k < options.mc_samples; ++k) {
        const VectorXd eps = options.sampler ? options.sampler(sem, rec, rng) : sample_posterior(*post, rng);
        sum += model(simulate_twin(sem, paths, rec[s], a_bar, eps));
      }
      out[r] = sum / static_cast<double>(options.mc_samples);
    } catch (const std::exception& e) {
      throw DataError("record " + std::to_string(r) + ": " + e.what());
    }
  }
  return out;
}

OlsFit least_squares(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, bool intercept) {
  const Eigen::Index n = x.rows();
  const Eigen::Index p = x.cols() + (intercept ? 1 : 0);
  if (y.size() != n) throw DataError("design and response are not aligned");
  if (n <= p) throw DataError("least squares needs more records than coefficients");
  MatrixXd design(n, p);
  if (intercept) design.col(0).setOnes();
  design.rightCols(x.cols()) = x;
  Eigen::ColPivHouseholderQR<MatrixXd> qr(design);
  if (qr.rank() < p) throw DataError("rank-deficient design matrix");
  OlsFit fit;
  fit.coef = qr.solve(y);
  const double rss = (y - design * fit.coef).squaredNorm();
  fit.residual_std = std::sqrt(rss / static_cast<double>(n - p));
  return fit;
}

LinearSEM fit(const TabularDataset& data, const LinearSEM& skeleton) {
  skeleton.validate();
  LinearSEM sem = skeleton;
  const std::size_t V = sem.variables.size();
  const std::size_t s = sem.sensitive_index();
  for (const auto& var : sem.variables) {
    if (!var.observed) throw UsageError("cannot fit the equation of hidden variable '" + var.name + "'");
  }
  const std::size_t n = data.size();
  MatrixXd values(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(V));
  for (std::size_t r = 0; r < n; ++r) {
    const Record rec = record_from_dataset(sem, data, r);
    for (std::size_t i = 0; i < V; ++i) values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(i)) = rec[i];
  }
  std::size_t ones = 0;
  for (std::size_t r = 0; r < n; ++r) {
    const double a = values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(s));
    if (a == sem.sensitive_values[1]) ++ones;
    else if (a != sem.sensitive_values[0]) throw DataError("sensitive value outside the SEM's two levels");
  }
  sem.pi = n ? static_cast<double>(ones) / static_cast<double>(n) : sem.pi;
  for (std::size_t i = 0; i < V; ++i) {
    if (i == s) continue;
    if (sem.variables[i].binary) {
      throw UsageError("least-squares fitting supports continuous equations only ('" +
                       sem.variables[i].name + "' is thresholded)");
    }
    const auto pe = sem.parents(i);
    MatrixXd x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(pe.size()));
    for (std::size_t j = 0; j < pe.size(); ++j) {
      x.col(static_cast<Eigen::Index>(j)) = values.col(static_cast<Eigen::Index>(sem.index(sem.edges[pe[j]].from)));
    }
    const OlsFit f = least_squares(x, values.col(static_cast<Eigen::Index>(i)), true);
    sem.variables[i].intercept = f.coef(0);
    for (std::size_t j = 0; j < pe.size(); ++j) sem.edges[pe[j]].coef = f.coef(static_cast<Eigen::Index>(j + 1));
    // Keep the noise level positive even on noiseless data.
    sem.variables[i].noise_std = std::max(f.residual_std, 1e-300);
  }
  return sem;
}

std::vector<std::string> scenario_names() {
  return {"college", "music", "police", "police-a", "police-b", "police-c"};
}

LinearSEM scenario(std::string_view name) {
  LinearSEM sem;
  sem.pi = 0.5;
  if (name == "college") {
    sem.sensitive = "A";
    sem.target = "Y";
    sem.variables = {{"A", 0, 1, true, false}, {"Q", 0, 1, true, false},
                     {"D", 0, 1, true, false}, {"Y", 0, 1, true, false}};
    sem.edges = {{"A", "Q", 1.0, EdgeLabel::fair},
                 {"A", "D", 1.0, EdgeLabel::unfair},
                 {"A", "Y", 1.0, EdgeLabel::unfair},
                 {"Q", "Y", 1.0, EdgeLabel::fair},
                 {"D", "Y", 1.0, EdgeLabel::fair}};
  } else if (name == "music") {
    sem.sensitive = "S";
    sem.target = "Y";
    sem.sensitive_values = {-1.0, 1.0};
    // X and Y are deterministic in (S, M); a negligible noise keeps every
    // equation Gaussian.
    sem.variables = {{"S", 0, 1, true, false}, {"M", 0, 1, false, false},
                     {"X", 0, 1e-12, true, false}, {"Y", 0, 1e-12, true, false}};
    sem.edges = {{"S", "X", 1.0, EdgeLabel::unfair},
                 {"M", "X", 1.0, EdgeLabel::fair},
                 {"M", "Y", 1.0, EdgeLabel::fair}};
  } else if (name == "police" || name == "police-a") {
    sem.sensitive = "A";
    sem.target = "Y";
    sem.variables = {{"A", 0, 1, true, false}, {"C", 0, 1, true, false}, {"Y", 0, 1, true, true}};
    sem.edges = {{"A", "C", 1.0, EdgeLabel::fair}, {"C", "Y", 1.0, EdgeLabel::fair}};
  } else if (name == "police-b" || name == "police-c") {
    sem.sensitive = "A";
    sem.target = name == "police-b" ? "Search" : "Y";
    sem.variables = {{"A", 0, 1, true, false}, {"C", 0, 1, true, false}, {sem.target, 0, 1, true, true}};
    sem.edges = {{"A", "C", 1.0, EdgeLabel::fair},
                 {"C", sem.target, 1.0, EdgeLabel::fair},
                 {"A", sem.target, 1.0, EdgeLabel::unfair}};
  } else {
    throw UsageError("unknown scenario '" + std::string(name) + "'");
  }
  sem.validate();
  return sem;
}

}  // namespace fairkit
