#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <Eigen/Core>

namespace fairkit {

enum class Role { sensitive, feature, outcome, task, ignore };
enum class OutcomeKind { regression, classification };
enum class SensitiveKind { categorical, real };

std::string_view to_string(Role role);
std::string_view to_string(OutcomeKind kind);
OutcomeKind parse_outcome_kind(std::string_view text);

struct ColumnSpec {
  std::string name;
  Role role = Role::ignore;
  // Only meaningful for features: expand one-hot at load time.
  bool categorical = false;
};

// Column-role declaration. Columns of the file that are not declared are an
// error unless `ignore_undeclared` is set.
struct Schema {
  std::vector<ColumnSpec> columns;
  OutcomeKind outcome_kind = OutcomeKind::classification;
  SensitiveKind sensitive_kind = SensitiveKind::categorical;
  bool ignore_undeclared = false;

  // Parses "gender=sensitive,x1=feature,work=feature:categorical,y=outcome".
  static Schema parse(std::string_view spec, OutcomeKind outcome_kind,
                      SensitiveKind sensitive_kind = SensitiveKind::categorical);
};

// Bookkeeping for one column of the source file, kept so that a loaded dataset
// can be re-emitted with its original column order.
struct SourceColumn {
  std::string name;
  Role role = Role::ignore;
  bool categorical = false;
  std::size_t first_feature = 0;    // features: index of the first expanded column
  std::vector<std::string> levels;  // categorical features, sensitive codes, task codes
  std::size_t ignored_slot = 0;     // ignore: index into TabularDataset::ignored
};

struct TabularDataset {
  OutcomeKind outcome_kind = OutcomeKind::classification;
  SensitiveKind sensitive_kind = SensitiveKind::categorical;
  // Categorical sensitive values are codes 0..k-1 in first-appearance order.
  std::vector<double> sensitive;
  Eigen::MatrixXd features;  // n x d
  // Regression: real; classification: -1 or +1.
  std::vector<double> outcome;
  std::optional<std::vector<int>> task_id;

  std::vector<std::string> feature_names;
  std::vector<std::string> sensitive_levels;
  std::vector<std::string> task_levels;
  std::vector<SourceColumn> columns;
  std::vector<std::vector<std::string>> ignored;  // per record, per ignored column

  std::size_t size() const { return outcome.size(); }
  std::size_t dim() const { return static_cast<std::size_t>(features.cols()); }

  // Sensitive values as integer group codes (requires categorical sensitive).
  std::vector<int> group_codes() const;
  int group_count() const;

  TabularDataset subset(std::span<const std::size_t> rows) const;

  // Checks every documented invariant; throws DataError on violation.
  void validate() const;

  static TabularDataset from_arrays(std::vector<double> sensitive, Eigen::MatrixXd features,
                                    std::vector<double> outcome, OutcomeKind kind,
                                    SensitiveKind sensitive_kind = SensitiveKind::categorical);
};

TabularDataset load_csv(const std::string& path, const Schema& schema);
TabularDataset load_csv(std::istream& in, const Schema& schema);

// Writes the dataset back in its source column order (or a synthesized
// s, features..., y[, task] layout when it was not loaded from a file).
void write_csv(const TabularDataset& data, std::ostream& out);
void write_csv(const TabularDataset& data, const std::string& path);

// Half-open cells [t_k, t_{k+1}) x [sigma_q, sigma_{q+1}).
struct DiscretizationGrid {
  std::vector<double> y_edges;
  std::vector<double> s_edges;

  int k_bins() const { return static_cast<int>(y_edges.size()) - 1; }
  int q_bins() const { return static_cast<int>(s_edges.size()) - 1; }

  // Bin index of a value, or -1 when outside every cell.
  int y_bin(double y) const;
  int s_bin(double s) const;

  void validate() const;
};

struct QuantileStrategy {};
struct ExplicitEdges {
  std::vector<double> y_edges;
  std::vector<double> s_edges;
};
using GridStrategy = std::variant<QuantileStrategy, ExplicitEdges>;

// Interior edges sit at midpoints between consecutive distinct values, chosen
// so the empirical mass below edge j is as close as possible to j/bins; outer
// edges are the data extremes padded by a few ulps.
std::vector<double> quantile_edges(std::span<const double> values, int bins);

DiscretizationGrid make_grid(const TabularDataset& data, int k_bins, int q_bins,
                             const GridStrategy& strategy = QuantileStrategy{});
DiscretizationGrid make_grid(std::span<const double> y, std::span<const double> s, int k_bins,
                             int q_bins, const GridStrategy& strategy = QuantileStrategy{});

struct GroupIndex {
  int k_bins = 0;
  int q_bins = 0;
  std::vector<std::vector<std::size_t>> cells;  // cells[k * q_bins + q]
  std::vector<std::size_t> group_counts;        // N_q
  std::vector<double> group_probs;              // N_q / N

  const std::vector<std::size_t>& cell(int k, int q) const {
    return cells[static_cast<std::size_t>(k * q_bins + q)];
  }
  std::size_t count(int k, int q) const { return cell(k, q).size(); }
  std::size_t total() const;
};

GroupIndex partition(std::span<const double> y, std::span<const double> s,
                     const DiscretizationGrid& grid);
GroupIndex partition(const TabularDataset& data, const DiscretizationGrid& grid);

struct SplitResult {
  TabularDataset first;
  TabularDataset second;
  bool stratified = true;
  std::string warning;
};

// Deterministic for a fixed seed; stratified by sensitive value so that any
// group with at least two records appears on both sides.
SplitResult split(const TabularDataset& data, double fraction, std::uint64_t seed);

}  // namespace fairkit
