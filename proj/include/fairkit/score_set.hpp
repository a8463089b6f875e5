#pragma once

#include <optional>
#include <vector>

namespace fairkit {

// Aligned per-record model outputs, group codes and outcomes. Predictions are
// 1{score > threshold}; ties at the threshold classify as 0.
struct ScoreSet {
  std::vector<double> scores;
  std::vector<int> group;
  std::vector<double> outcome;  // may be empty when only scores are needed
  std::optional<double> threshold;

  std::size_t size() const { return scores.size(); }
  bool predict(std::size_t i) const { return scores[i] > *threshold; }

  // Throws DataError on misaligned arrays, negative codes or non-finite scores.
  void validate(bool need_outcome = false, bool need_threshold = false) const;
  int group_count() const;
};

}  // namespace fairkit
