#pragma once

#include <span>
#include <utility>
#include <vector>

#include "fairkit/dataset.hpp"
#include "fairkit/score_set.hpp"

namespace fairkit {

struct PairGap {
  int a = 0;
  int b = 0;
  double value = 0.0;
};

// A max-over-pairs gap together with the per-group rates it was built from.
struct GapResult {
  double value = 0.0;
  std::vector<double> rates;          // indexed by group code; NaN for excluded groups
  std::vector<int> excluded_groups;   // groups lacking the records the rate needs
  std::vector<PairGap> pairs;         // a < b over included groups
};

// max |P(Yhat=1|a) - P(Yhat=1|b)|. Throws DataError if a group code is empty.
GapResult dp_gap(const ScoreSet& scores);

struct StrongDpResult {
  double d_pair = 0.0;  // sum over ordered pairs a != b of the order-2 cost
  double max_w1 = 0.0;  // max over pairs of the order-1 cost
  int bins = 0;
  std::vector<PairGap> w1_pairs;
};

// Threshold-free comparison of the group score distributions; bins <= 0 picks
// min(100, smallest group).
StrongDpResult strong_dp_gap(const ScoreSet& scores, int bins);

struct OddsResult {
  GapResult fpr;  // P(Yhat=1 | Y=-1, a)
  GapResult fnr;  // P(Yhat=0 | Y=+1, a)
};

// Classification outcomes in {-1,+1}; groups without both classes are excluded.
OddsResult efpr_efnr_gaps(const ScoreSet& scores);

// max |P(Y=1 | S>tau, a) - P(Y=1 | S>tau, b)|; groups without positive predictions are excluded.
GapResult predictive_parity_gap(const ScoreSet& scores);

struct CellTable {
  int k_bins = 0;
  int q_bins = 0;
  std::vector<double> values;       // values[k * q_bins + q]; NaN for empty cells
  std::vector<std::size_t> counts;  // N_{k,q}

  double at(int k, int q) const { return values[static_cast<std::size_t>(k * q_bins + q)]; }
};

struct GeneralFairnessResult {
  // Sum over k and ordered (p,q) of the cell gaps, divided by the number of
  // ordered (p,q) pairs, p = q included, whose cells are both non-empty. This
  // is 1/(K Q^2) when no cell is empty.
  double value = 0.0;
  // Same sum divided by the number of included ordered pairs with p != q.
  double pair_mean = 0.0;
  // Unnormalized sum of the ordered-pair gaps.
  double gap_sum = 0.0;
  std::size_t included_pairs = 0;
  std::size_t included_distinct_pairs = 0;
  CellTable table;
  std::vector<std::pair<int, int>> skipped_cells;  // (k, q) with no records
  std::vector<int> skipped_k;                     // outcome bins with no non-empty cell
};

// Cells come from the grid applied to (outcome, group code). P^{k,q} is the
// fraction of the cell whose model output falls in [t_k, t_{k+1}).
GeneralFairnessResult general_fairness(const ScoreSet& scores, const DiscretizationGrid& grid,
                                       std::span<const double> model_outputs);

enum class LossKind { hard, linear };

// L^{k,q}_k: hard loss 1{f outside [t_k, t_{k+1})}; linear loss (1 - f y)/2 for
// classification and f - y for regression.
GeneralFairnessResult loss_general_fairness(const ScoreSet& scores, const DiscretizationGrid& grid,
                                            std::span<const double> model_outputs, LossKind loss,
                                            OutcomeKind kind = OutcomeKind::classification);

// Hard +/-1 outputs 2*1{s > tau} - 1 for the P and hard-L estimators.
std::vector<double> signed_predictions(const ScoreSet& scores);

}  // namespace fairkit
