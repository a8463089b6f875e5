#include "fairkit/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <string>

#include "fairkit/error.hpp"
#include "fairkit/transport.hpp"

namespace fairkit {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void require_nonempty_groups(const ScoreSet& scores) {
  std::vector<std::size_t> counts(static_cast<std::size_t>(scores.group_count()), 0);
  for (int g : scores.group) ++counts[static_cast<std::size_t>(g)];
  for (std::size_t g = 0; g < counts.size(); ++g) {
    if (counts[g] == 0) throw DataError("group " + std::to_string(g) + " has no records");
  }
}

// Rates from per-group numerators/denominators; groups with a zero
// denominator are excluded.
GapResult max_pair_gap(const std::vector<std::size_t>& num, const std::vector<std::size_t>& den) {
  GapResult r;
  r.rates.assign(num.size(), kNaN);
  std::vector<int> included;
  for (std::size_t g = 0; g < num.size(); ++g) {
    if (den[g] == 0) {
      r.excluded_groups.push_back(static_cast<int>(g));
    } else {
      r.rates[g] = static_cast<double>(num[g]) / static_cast<double>(den[g]);
      included.push_back(static_cast<int>(g));
    }
  }
  for (std::size_t i = 0; i < included.size(); ++i) {
    for (std::size_t j = i + 1; j < included.size(); ++j) {
      const int a = included[i], b = included[j];
      const double gap = std::abs(r.rates[static_cast<std::size_t>(a)] - r.rates[static_cast<std::size_t>(b)]);
      r.pairs.push_back({a, b, gap});
      r.value = std::max(r.value, gap);
    }
  }
  return r;
}

bool positive_label(double y) { return y > 0.0; }

GroupIndex index_cells(const ScoreSet& scores, const DiscretizationGrid& grid,
                       std::span<const double> model_outputs) {
  scores.validate(true, false);
  if (model_outputs.size() != scores.size()) {
    throw DataError("model outputs are not aligned with the score set");
  }
  std::vector<double> s(scores.group.begin(), scores.group.end());
  return fairkit::partition(scores.outcome, s, grid);
}

// Shared aggregation over k and ordered (p,q). `gap(k,p,q)` is only called on
// non-empty cells.
template <class Gap>
void aggregate(GeneralFairnessResult& r, const GroupIndex& index, Gap gap) {
  const int K = index.k_bins, Q = index.q_bins;
  double sum = 0.0;
  for (int k = 0; k < K; ++k) {
    bool any = false;
    for (int q = 0; q < Q; ++q) {
      if (index.count(k, q) == 0) {
        r.skipped_cells.emplace_back(k, q);
      } else {
        any = true;
      }
    }
    if (!any) {
      r.skipped_k.push_back(k);
      continue;
    }
    for (int p = 0; p < Q; ++p) {
      if (index.count(k, p) == 0) continue;
      for (int q = 0; q < Q; ++q) {
        if (index.count(k, q) == 0) continue;
        ++r.included_pairs;
        if (p == q) continue;
        ++r.included_distinct_pairs;
        sum += gap(k, p, q);
      }
    }
  }
  if (r.skipped_k.size() == static_cast<std::size_t>(K)) {
    throw DataError("every outcome bin is empty");
  }
  r.gap_sum = sum;
  r.value = r.included_pairs ? sum / static_cast<double>(r.included_pairs) : 0.0;
  r.pair_mean = r.included_distinct_pairs ? sum / static_cast<double>(r.included_distinct_pairs) : 0.0;
}

// Exact gap between two count ratios c_p/N_p and c_q/N_q.
double ratio_gap(long long cp, long long np, long long cq, long long nq) {
  return static_cast<double>(std::llabs(cp * nq - cq * np)) / static_cast<double>(np * nq);
}

GeneralFairnessResult hard_table(const ScoreSet& scores, const DiscretizationGrid& grid,
                                 std::span<const double> model_outputs, bool count_misses) {
  const GroupIndex index = index_cells(scores, grid, model_outputs);
  GeneralFairnessResult r;
  r.table.k_bins = index.k_bins;
  r.table.q_bins = index.q_bins;
  std::vector<long long> hits(index.cells.size(), 0);
  for (int k = 0; k < index.k_bins; ++k) {
    const double lo = grid.y_edges[static_cast<std::size_t>(k)];
    const double hi = grid.y_edges[static_cast<std::size_t>(k + 1)];
    for (int q = 0; q < index.q_bins; ++q) {
      const std::size_t c = static_cast<std::size_t>(k * index.q_bins + q);
      for (std::size_t i : index.cells[c]) {
        const bool inside = model_outputs[i] >= lo && model_outputs[i] < hi;
        hits[c] += inside != count_misses;
      }
    }
  }
  for (std::size_t c = 0; c < index.cells.size(); ++c) {
    const auto n = static_cast<long long>(index.cells[c].size());
    r.table.counts.push_back(index.cells[c].size());
    r.table.values.push_back(n ? static_cast<double>(hits[c]) / static_cast<double>(n) : kNaN);
  }
  aggregate(r, index, [&](int k, int p, int q) {
    const std::size_t cp = static_cast<std::size_t>(k * index.q_bins + p);
    const std::size_t cq = static_cast<std::size_t>(k * index.q_bins + q);
    return ratio_gap(hits[cp], static_cast<long long>(index.cells[cp].size()), hits[cq],
                     static_cast<long long>(index.cells[cq].size()));
  });
  return r;
}

}  // namespace

GapResult dp_gap(const ScoreSet& scores) {
  scores.validate(false, true);
  require_nonempty_groups(scores);
  const auto G = static_cast<std::size_t>(scores.group_count());
  std::vector<std::size_t> num(G, 0), den(G, 0);
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const auto g = static_cast<std::size_t>(scores.group[i]);
    ++den[g];
    num[g] += scores.predict(i);
  }
  return max_pair_gap(num, den);
}

StrongDpResult strong_dp_gap(const ScoreSet& scores, int bins) {
  scores.validate();
  require_nonempty_groups(scores);
  StrongDpResult r;
  r.bins = bins > 0 ? bins : default_bins(scores.group);
  const int G = scores.group_count();
  std::vector<std::vector<double>> values(static_cast<std::size_t>(G));
  for (std::size_t i = 0; i < scores.size(); ++i) {
    values[static_cast<std::size_t>(scores.group[i])].push_back(scores.scores[i]);
  }
  std::vector<EmpiricalDistribution> dists;
  for (auto& v : values) dists.emplace_back(std::move(v), r.bins);
  for (int a = 0; a < G; ++a) {
    for (int b = 0; b < G; ++b) {
      if (a == b) continue;
      r.d_pair += wasserstein(dists[static_cast<std::size_t>(a)], dists[static_cast<std::size_t>(b)], 2);
      if (a < b) {
        const double w1 =
            wasserstein(dists[static_cast<std::size_t>(a)], dists[static_cast<std::size_t>(b)], 1);
        r.w1_pairs.push_back({a, b, w1});
        r.max_w1 = std::max(r.max_w1, w1);
      }
    }
  }
  return r;
}

OddsResult efpr_efnr_gaps(const ScoreSet& scores) {
  scores.validate(true, true);
  const auto G = static_cast<std::size_t>(scores.group_count());
  std::vector<std::size_t> fp(G, 0), neg(G, 0), fn(G, 0), pos(G, 0);
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const auto g = static_cast<std::size_t>(scores.group[i]);
    const bool yhat = scores.predict(i);
    if (positive_label(scores.outcome[i])) {
      ++pos[g];
      fn[g] += !yhat;
    } else {
      ++neg[g];
      fp[g] += yhat;
    }
  }
  // A group missing either class is excluded from both rates.
  for (std::size_t g = 0; g < G; ++g) {
    if (pos[g] == 0 || neg[g] == 0) pos[g] = neg[g] = 0;
  }
  return {max_pair_gap(fp, neg), max_pair_gap(fn, pos)};
}

GapResult predictive_parity_gap(const ScoreSet& scores) {
  scores.validate(true, true);
  const auto G = static_cast<std::size_t>(scores.group_count());
  std::vector<std::size_t> tp(G, 0), predicted(G, 0);
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!scores.predict(i)) continue;
    const auto g = static_cast<std::size_t>(scores.group[i]);
    ++predicted[g];
    tp[g] += positive_label(scores.outcome[i]);
  }
  return max_pair_gap(tp, predicted);
}

GeneralFairnessResult general_fairness(const ScoreSet& scores, const DiscretizationGrid& grid,
                                       std::span<const double> model_outputs) {
  return hard_table(scores, grid, model_outputs, false);
}

GeneralFairnessResult loss_general_fairness(const ScoreSet& scores, const DiscretizationGrid& grid,
                                            std::span<const double> model_outputs, LossKind loss,
                                            OutcomeKind kind) {
  if (loss == LossKind::hard) return hard_table(scores, grid, model_outputs, true);

  const GroupIndex index = index_cells(scores, grid, model_outputs);
  GeneralFairnessResult r;
  r.table.k_bins = index.k_bins;
  r.table.q_bins = index.q_bins;
  for (const auto& cell : index.cells) {
    double sum = 0.0;
    for (std::size_t i : cell) {
      const double f = model_outputs[i], y = scores.outcome[i];
      sum += kind == OutcomeKind::classification ? (1.0 - f * y) / 2.0 : f - y;
    }
    r.table.counts.push_back(cell.size());
    r.table.values.push_back(cell.empty() ? kNaN : sum / static_cast<double>(cell.size()));
  }
  aggregate(r, index, [&](int k, int p, int q) { return std::abs(r.table.at(k, p) - r.table.at(k, q)); });
  return r;
}

std::vector<double> signed_predictions(const ScoreSet& scores) {
  scores.validate(false, true);
  std::vector<double> out(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) out[i] = scores.predict(i) ? 1.0 : -1.0;
  return out;
}

}  // namespace fairkit
