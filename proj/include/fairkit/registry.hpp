#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace fairkit {

// Bundled metadata for a public fairness benchmark. Counts are kept as the
// text they are usually quoted with ("1K", "~10K", "17-20"); no data is shipped.
struct DatasetInfo {
  std::string name;
  std::string reference;
  std::string samples;
  std::string features;  // empty when not reported
  std::vector<std::string> sensitive;
  std::vector<std::string> tasks;  // BC, MC, R
  std::vector<std::string> aliases;
};

const std::vector<DatasetInfo>& dataset_registry();

// Case-insensitive match on the name or an alias; throws DataError when unknown.
const DatasetInfo& find_dataset(std::string_view name);

}  // namespace fairkit
