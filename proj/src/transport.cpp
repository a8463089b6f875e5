#include "fairkit/transport.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <string>

#include "fairkit/error.hpp"

namespace fairkit {

EmpiricalDistribution::EmpiricalDistribution(std::vector<double> samples, int bins)
    : samples_(std::move(samples)) {
  if (samples_.empty()) throw DataError("empirical distribution needs at least one sample");
  if (bins < 1) throw UsageError("bin count must be at least 1");
  std::sort(samples_.begin(), samples_.end());
  const auto n = static_cast<long long>(samples_.size());
  table_.resize(static_cast<std::size_t>(bins));
  for (int i = 1; i <= bins; ++i) {
    // Integer arithmetic keeps the mass comparison exact.
    const long long idx = (n * (i - 1)) / bins;
    table_[static_cast<std::size_t>(i - 1)] = samples_[static_cast<std::size_t>(idx)];
  }
}

EmpiricalDistribution EmpiricalDistribution::from_quantiles(std::vector<double> table) {
  if (!std::is_sorted(table.begin(), table.end())) {
    throw DataError("quantile table must be non-decreasing");
  }
  const int bins = static_cast<int>(table.size());
  return EmpiricalDistribution(std::move(table), bins);
}

double EmpiricalDistribution::quantile(int i) const {
  if (i < 1 || i > bins()) {
    throw UsageError("quantile index " + std::to_string(i) + " outside [1, " +
                     std::to_string(bins()) + "]");
  }
  return table_[static_cast<std::size_t>(i - 1)];
}

int EmpiricalDistribution::inverse_quantile(double s) const {
  return fairkit::inverse_quantile(table_, s);
}

int inverse_quantile(std::span<const double> table, double s) {
  if (table.empty()) throw DataError("empty quantile table");
  const auto it = std::upper_bound(table.begin(), table.end(), s);
  return std::max(1, static_cast<int>(it - table.begin()));
}

double wasserstein(const EmpiricalDistribution& p, const EmpiricalDistribution& q, int order) {
  if (order != 1 && order != 2) throw UsageError("Wasserstein order must be 1 or 2");
  if (p.bins() != q.bins()) throw UsageError("distributions use different bin counts");
  double sum = 0.0;
  for (int i = 1; i <= p.bins(); ++i) {
    const double d = std::abs(p.quantile(i) - q.quantile(i));
    sum += order == 1 ? d : d * d;
  }
  return sum / p.bins();
}

EmpiricalDistribution barycenter(std::span<const EmpiricalDistribution> dists,
                                 std::span<const double> weights, int order) {
  if (order != 1 && order != 2) throw UsageError("barycenter order must be 1 or 2");
  if (dists.empty()) throw DataError("barycenter of an empty family");
  if (weights.size() != dists.size()) throw UsageError("one weight per distribution is required");
  double total = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0)) throw UsageError("barycenter weights must be non-negative");
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-9) throw UsageError("barycenter weights must sum to 1");
  const int bins = dists[0].bins();
  for (const auto& d : dists) {
    if (d.bins() != bins) throw UsageError("distributions use different bin counts");
  }

  std::vector<double> table(static_cast<std::size_t>(bins));
  std::vector<std::size_t> order_idx(dists.size());
  for (int i = 1; i <= bins; ++i) {
    double value = 0.0;
    if (order == 2) {
      for (std::size_t a = 0; a < dists.size(); ++a) value += weights[a] * dists[a].quantile(i);
    } else {
      std::iota(order_idx.begin(), order_idx.end(), 0);
      std::stable_sort(order_idx.begin(), order_idx.end(), [&](std::size_t x, std::size_t y) {
        return dists[x].quantile(i) < dists[y].quantile(i);
      });
      // Lower weighted median: first value whose cumulative weight reaches 1/2.
      double cum = 0.0;
      value = dists[order_idx.back()].quantile(i);
      for (std::size_t a : order_idx) {
        cum += weights[a];
        if (cum >= 0.5 - 1e-12) {
          value = dists[a].quantile(i);
          break;
        }
      }
    }
    table[static_cast<std::size_t>(i - 1)] = value;
  }
  // The weighted mean of non-decreasing tables is non-decreasing; guard against
  // rounding so the table stays a valid quantile function.
  for (std::size_t i = 1; i < table.size(); ++i) table[i] = std::max(table[i], table[i - 1]);
  return EmpiricalDistribution::from_quantiles(std::move(table));
}

std::size_t RepairPlan::slot(int code) const {
  auto it = std::lower_bound(group_codes.begin(), group_codes.end(), code);
  if (it == group_codes.end() || *it != code) {
    throw DataError("group " + std::to_string(code) + " is not part of the repair plan");
  }
  return static_cast<std::size_t>(it - group_codes.begin());
}

std::vector<double> RepairPlan::interpolated_table(std::size_t s) const {
  const auto& own = groups[s].quantiles();
  const auto& bar = center.quantiles();
  std::vector<double> table(own.size());
  for (std::size_t i = 0; i < own.size(); ++i) table[i] = (1.0 - t) * own[i] + t * bar[i];
  return table;
}

double RepairPlan::map(int code, double s) const {
  const std::size_t g = slot(code);
  const int i = groups[g].inverse_quantile(s);
  const double own = groups[g].quantile(i);
  const double bar = center.quantile(i);
  return (1.0 - t) * own + t * bar;
}

int default_bins(std::span<const int> group) {
  std::map<int, std::size_t> counts;
  for (int g : group) ++counts[g];
  if (counts.empty()) throw DataError("no scores to repair");
  std::size_t smallest = counts.begin()->second;
  for (const auto& [_, c] : counts) smallest = std::min(smallest, c);
  return static_cast<int>(std::min<std::size_t>(100, smallest));
}

RepairPlan make_repair_plan(const ScoreSet& scores, const RepairOptions& options) {
  scores.validate();
  if (!(options.t >= 0.0 && options.t <= 1.0)) throw UsageError("t must lie in [0,1]");
  if (options.order != 1 && options.order != 2) throw UsageError("order must be 1 or 2");
  if (scores.size() == 0) throw DataError("no scores to repair");

  std::map<int, std::vector<double>> by_group;
  for (std::size_t i = 0; i < scores.size(); ++i) by_group[scores.group[i]].push_back(scores.scores[i]);

  RepairPlan plan;
  plan.t = options.t;
  plan.order = options.order;
  plan.bins = options.bins > 0 ? options.bins : default_bins(scores.group);
  const double n = static_cast<double>(scores.size());
  for (auto& [code, values] : by_group) {
    plan.group_codes.push_back(code);
    plan.weights.push_back(options.weights == WeightScheme::empirical
                               ? static_cast<double>(values.size()) / n
                               : 1.0 / static_cast<double>(by_group.size()));
    plan.groups.emplace_back(std::move(values), plan.bins);
  }
  // Renormalize so rounding in N_a/N never trips the weight-sum check.
  const double total = std::accumulate(plan.weights.begin(), plan.weights.end(), 0.0);
  for (double& w : plan.weights) w /= total;
  plan.center = barycenter(plan.groups, plan.weights, plan.order);
  return plan;
}

std::vector<double> geodesic_repair(const ScoreSet& scores, const RepairOptions& options) {
  const RepairPlan plan = make_repair_plan(scores, options);
  std::vector<double> out(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) out[i] = plan.map(scores.group[i], scores.scores[i]);
  return out;
}

double expected_prediction_changes(const EmpiricalDistribution& original,
                                   const std::function<double(double)>& transport_map) {
  double sum = 0.0;
  for (double x : original.samples()) {
    const double y = transport_map(x);
    if (x < 0.0 || x > 1.0 || y < 0.0 || y > 1.0) {
      throw DataError("prediction-change oracle needs scores in [0,1]");
    }
    sum += std::abs(x - y);
  }
  return sum / static_cast<double>(original.size());
}

}  // namespace fairkit
