#include "fairkit/score_set.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "fairkit/error.hpp"

namespace fairkit {

void ScoreSet::validate(bool need_outcome, bool need_threshold) const {
  if (group.size() != scores.size()) throw DataError("scores and groups are not aligned");
  if ((need_outcome || !outcome.empty()) && outcome.size() != scores.size()) {
    throw DataError("scores and outcomes are not aligned");
  }
  if (need_threshold && !threshold) throw UsageError("a decision threshold is required");
  if (threshold && !std::isfinite(*threshold)) throw UsageError("threshold must be finite");
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!std::isfinite(scores[i])) {
      throw DataError("record " + std::to_string(i) + " has a non-finite score");
    }
    if (group[i] < 0) throw DataError("record " + std::to_string(i) + " has a negative group code");
  }
}

int ScoreSet::group_count() const {
  int k = 0;
  for (int g : group) k = std::max(k, g + 1);
  return k;
}

}  // namespace fairkit
