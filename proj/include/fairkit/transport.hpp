#pragma once

#include <functional>
#include <span>
#include <vector>

#include "fairkit/score_set.hpp"

namespace fairkit {

// Sorted sample set with a B-bin quantile table:
//   q(i) = sup{ s : F(s) <= (i-1)/B },  i = 1..B,
// where the sup over the real line lands on the sample x_(floor(N(i-1)/B)+1).
class EmpiricalDistribution {
 public:
  EmpiricalDistribution(std::vector<double> samples, int bins);

  // A distribution whose samples are exactly the given non-decreasing table.
  static EmpiricalDistribution from_quantiles(std::vector<double> table);

  int bins() const { return static_cast<int>(table_.size()); }
  std::size_t size() const { return samples_.size(); }
  const std::vector<double>& samples() const { return samples_; }
  const std::vector<double>& quantiles() const { return table_; }

  // 1-based bin index.
  double quantile(int i) const;
  // Largest i with q(i) <= s, floored at 1.
  int inverse_quantile(double s) const;

 private:
  std::vector<double> samples_;
  std::vector<double> table_;
};

// Largest i in 1..B with table[i-1] <= s, floored at 1.
int inverse_quantile(std::span<const double> table, double s);

// p-th power cost (1/B) sum_i |q_p(i) - q_q(i)|^order, order in {1,2}.
double wasserstein(const EmpiricalDistribution& p, const EmpiricalDistribution& q, int order);

// Order 2: per-bin weighted mean of quantiles; order 1: per-bin weighted lower median.
EmpiricalDistribution barycenter(std::span<const EmpiricalDistribution> dists,
                                 std::span<const double> weights, int order);

enum class WeightScheme { empirical, uniform };

struct RepairOptions {
  double t = 1.0;
  int bins = 0;   // 0: min(100, smallest group size)
  int order = 2;  // barycenter order
  WeightScheme weights = WeightScheme::empirical;
};

struct RepairPlan {
  std::vector<int> group_codes;  // codes present, ascending
  std::vector<EmpiricalDistribution> groups;
  std::vector<double> weights;
  EmpiricalDistribution center{{0.0}, 1};
  double t = 1.0;
  int order = 2;
  int bins = 1;

  // Slot of a group code in `groups`; throws DataError when absent.
  std::size_t slot(int code) const;
  // q_{a,t}(i) = (1-t) q_a(i) + t q_bar(i).
  std::vector<double> interpolated_table(std::size_t slot) const;
  // q_{a,t}(q_a^{-1}(s)).
  double map(int code, double s) const;
};

int default_bins(std::span<const int> group);

RepairPlan make_repair_plan(const ScoreSet& scores, const RepairOptions& options);

// Repaired score for every record, in input order.
std::vector<double> geodesic_repair(const ScoreSet& scores, const RepairOptions& options);

// Sample mean of |x - T(x)| over the distribution's samples: the probability,
// under tau ~ U[0,1], that thresholding at tau changes the prediction.
double expected_prediction_changes(const EmpiricalDistribution& original,
                                   const std::function<double(double)>& transport_map);

}  // namespace fairkit
