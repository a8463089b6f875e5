#include "fairkit/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <ostream>
#include <random>
#include <set>

#include "fairkit/csv.hpp"
#include "fairkit/error.hpp"

namespace fairkit {
namespace {

std::string cell_where(std::size_t row, const std::string& column) {
  return "row " + std::to_string(row) + ", column '" + column + "'";
}

std::size_t level_code(std::vector<std::string>& levels, const std::string& value) {
  auto it = std::find(levels.begin(), levels.end(), value);
  if (it != levels.end()) return static_cast<std::size_t>(it - levels.begin());
  levels.push_back(value);
  return levels.size() - 1;
}

double outer_pad(double v) {
  return 4.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(v));
}

std::string format_label(double y, OutcomeKind kind) {
  if (kind == OutcomeKind::classification) return y > 0 ? "1" : "-1";
  return csv::format_double(y);
}

}  // namespace

std::string_view to_string(Role role) {
  switch (role) {
    case Role::sensitive: return "sensitive";
    case Role::feature: return "feature";
    case Role::outcome: return "outcome";
    case Role::task: return "task";
    case Role::ignore: return "ignore";
  }
  return "ignore";
}

std::string_view to_string(OutcomeKind kind) {
  return kind == OutcomeKind::regression ? "regression" : "classification";
}

OutcomeKind parse_outcome_kind(std::string_view text) {
  if (text == "regression") return OutcomeKind::regression;
  if (text == "classification") return OutcomeKind::classification;
  throw UsageError("unknown outcome kind '" + std::string(text) +
                   "' (expected regression or classification)");
}

Schema Schema::parse(std::string_view spec, OutcomeKind outcome_kind,
                     SensitiveKind sensitive_kind) {
  Schema schema;
  schema.outcome_kind = outcome_kind;
  schema.sensitive_kind = sensitive_kind;
  std::size_t pos = 0;
  while (pos <= spec.size()) {
    std::size_t comma = spec.find(',', pos);
    if (comma == std::string_view::npos) comma = spec.size();
    std::string_view item = spec.substr(pos, comma - pos);
    pos = comma + 1;
    if (item.empty()) continue;
    const std::size_t eq = item.rfind('=');
    if (eq == std::string_view::npos || eq == 0) {
      throw UsageError("schema entry '" + std::string(item) + "' is not name=role");
    }
    ColumnSpec col;
    col.name = std::string(item.substr(0, eq));
    std::string_view role = item.substr(eq + 1);
    if (const std::size_t colon = role.find(':'); colon != std::string_view::npos) {
      if (role.substr(colon + 1) != "categorical") {
        throw UsageError("unknown schema modifier in '" + std::string(item) + "'");
      }
      col.categorical = true;
      role = role.substr(0, colon);
    }
    if (role == "sensitive") col.role = Role::sensitive;
    else if (role == "feature") col.role = Role::feature;
    else if (role == "outcome") col.role = Role::outcome;
    else if (role == "task") col.role = Role::task;
    else if (role == "ignore") col.role = Role::ignore;
    else throw UsageError("unknown role '" + std::string(role) + "' in schema");
    if (col.categorical && col.role != Role::feature) {
      throw UsageError("only feature columns may be categorical ('" + col.name + "')");
    }
    schema.columns.push_back(std::move(col));
  }
  return schema;
}

std::vector<int> TabularDataset::group_codes() const {
  if (sensitive_kind != SensitiveKind::categorical) {
    throw DataError("group codes require a categorical sensitive attribute");
  }
  std::vector<int> out(sensitive.size());
  for (std::size_t i = 0; i < sensitive.size(); ++i) out[i] = static_cast<int>(sensitive[i]);
  return out;
}

int TabularDataset::group_count() const {
  int k = 0;
  for (int g : group_codes()) k = std::max(k, g + 1);
  return k;
}

TabularDataset TabularDataset::subset(std::span<const std::size_t> rows) const {
  TabularDataset out;
  out.outcome_kind = outcome_kind;
  out.sensitive_kind = sensitive_kind;
  out.feature_names = feature_names;
  out.sensitive_levels = sensitive_levels;
  out.task_levels = task_levels;
  out.columns = columns;
  out.features.resize(static_cast<Eigen::Index>(rows.size()), features.cols());
  if (task_id) out.task_id.emplace();
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const std::size_t i = rows[r];
    if (i >= size()) throw DataError("subset row " + std::to_string(i) + " out of range");
    out.sensitive.push_back(sensitive[i]);
    out.outcome.push_back(outcome[i]);
    out.features.row(static_cast<Eigen::Index>(r)) = features.row(static_cast<Eigen::Index>(i));
    if (task_id) out.task_id->push_back((*task_id)[i]);
    if (!ignored.empty()) out.ignored.push_back(ignored[i]);
  }
  return out;
}

void TabularDataset::validate() const {
  const std::size_t n = outcome.size();
  if (sensitive.size() != n || static_cast<std::size_t>(features.rows()) != n) {
    throw DataError("dataset arrays are not aligned");
  }
  if (features.cols() < 1) throw DataError("dataset needs at least one feature");
  if (task_id && task_id->size() != n) throw DataError("task ids are not aligned");
  if (!feature_names.empty() && feature_names.size() != dim()) {
    throw DataError("feature name count does not match feature dimension");
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(outcome[i]) || !std::isfinite(sensitive[i])) {
      throw DataError("record " + std::to_string(i) + " has a non-finite value");
    }
    if (outcome_kind == OutcomeKind::classification && outcome[i] != 1.0 && outcome[i] != -1.0) {
      throw DataError("record " + std::to_string(i) + " has a label outside {-1,+1}");
    }
    if (sensitive_kind == SensitiveKind::categorical &&
        (sensitive[i] < 0 || sensitive[i] != std::floor(sensitive[i]))) {
      throw DataError("record " + std::to_string(i) + " has an invalid group code");
    }
  }
  if (!features.allFinite()) throw DataError("feature matrix has non-finite entries");
}

TabularDataset TabularDataset::from_arrays(std::vector<double> sensitive, Eigen::MatrixXd features,
                                           std::vector<double> outcome, OutcomeKind kind,
                                           SensitiveKind sensitive_kind) {
  TabularDataset d;
  d.outcome_kind = kind;
  d.sensitive_kind = sensitive_kind;
  d.sensitive = std::move(sensitive);
  d.features = std::move(features);
  d.outcome = std::move(outcome);
  for (Eigen::Index j = 0; j < d.features.cols(); ++j) {
    d.feature_names.push_back("x" + std::to_string(j + 1));
  }
  d.validate();
  return d;
}

TabularDataset load_csv(const std::string& path, const Schema& schema) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  return load_csv(in, schema);
}

TabularDataset load_csv(std::istream& in, const Schema& schema) {
  const csv::Table table = csv::read(in);

  std::map<std::string, ColumnSpec> declared;
  for (const auto& c : schema.columns) {
    if (!declared.emplace(c.name, c).second) {
      throw UsageError("column '" + c.name + "' declared twice");
    }
    table.column(c.name);  // presence check
  }

  TabularDataset d;
  d.outcome_kind = schema.outcome_kind;
  d.sensitive_kind = schema.sensitive_kind;

  int n_sensitive = 0, n_outcome = 0, n_task = 0;
  for (const auto& name : table.header) {
    SourceColumn col;
    col.name = name;
    auto it = declared.find(name);
    if (it == declared.end()) {
      if (!schema.ignore_undeclared) {
        throw DataError("column '" + name + "' has no declared role");
      }
      col.role = Role::ignore;
    } else {
      col.role = it->second.role;
      col.categorical = it->second.categorical;
    }
    n_sensitive += col.role == Role::sensitive;
    n_outcome += col.role == Role::outcome;
    n_task += col.role == Role::task;
    d.columns.push_back(std::move(col));
  }
  if (n_sensitive != 1) throw UsageError("schema must declare exactly one sensitive column");
  if (n_outcome != 1) throw UsageError("schema must declare exactly one outcome column");
  if (n_task > 1) throw UsageError("schema may declare at most one task column");

  const std::size_t n = table.rows.size();
  auto line_of = [](std::size_t r) { return r + 2; };

  // Missing values are checked up front so every error names its cell.
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t j = 0; j < d.columns.size(); ++j) {
      if (d.columns[j].role != Role::ignore && table.rows[r][j].empty()) {
        throw DataError(cell_where(line_of(r), d.columns[j].name) + ": missing value");
      }
    }
  }

  // First pass: collect categorical levels to size the feature block.
  std::size_t dim = 0;
  std::size_t ignored_slots = 0;
  for (std::size_t j = 0; j < d.columns.size(); ++j) {
    SourceColumn& col = d.columns[j];
    if (col.role == Role::feature) {
      col.first_feature = dim;
      if (col.categorical) {
        for (std::size_t r = 0; r < n; ++r) level_code(col.levels, table.rows[r][j]);
        for (const auto& level : col.levels) d.feature_names.push_back(col.name + "=" + level);
        dim += col.levels.size();
      } else {
        d.feature_names.push_back(col.name);
        dim += 1;
      }
    } else if (col.role == Role::ignore) {
      col.ignored_slot = ignored_slots++;
    }
  }
  if (dim == 0) throw UsageError("schema declares no feature columns");

  d.features = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(dim));
  d.sensitive.resize(n);
  d.outcome.resize(n);
  if (n_task) d.task_id.emplace(n);
  if (ignored_slots) d.ignored.assign(n, std::vector<std::string>(ignored_slots));

  for (std::size_t j = 0; j < d.columns.size(); ++j) {
    SourceColumn& col = d.columns[j];
    for (std::size_t r = 0; r < n; ++r) {
      const std::string& text = table.rows[r][j];
      const auto ri = static_cast<Eigen::Index>(r);
      switch (col.role) {
        case Role::ignore:
          d.ignored[r][col.ignored_slot] = text;
          break;
        case Role::task:
          (*d.task_id)[r] = static_cast<int>(level_code(col.levels, text));
          break;
        case Role::sensitive:
          if (schema.sensitive_kind == SensitiveKind::categorical) {
            d.sensitive[r] = static_cast<double>(level_code(col.levels, text));
          } else {
            auto v = csv::parse_double(text);
            if (!v || !std::isfinite(*v)) {
              throw DataError(cell_where(line_of(r), col.name) + ": cannot parse '" + text + "'");
            }
            d.sensitive[r] = *v;
          }
          break;
        case Role::outcome: {
          auto v = csv::parse_double(text);
          if (!v || !std::isfinite(*v)) {
            throw DataError(cell_where(line_of(r), col.name) + ": cannot parse '" + text + "'");
          }
          if (schema.outcome_kind == OutcomeKind::classification) {
            if (*v == 0.0) *v = -1.0;
            if (*v != 1.0 && *v != -1.0) {
              throw DataError(cell_where(line_of(r), col.name) + ": label '" + text +
                              "' is not in {-1,+1} (or {0,1})");
            }
          }
          d.outcome[r] = *v;
          break;
        }
        case Role::feature:
          if (col.categorical) {
            const std::size_t code = level_code(col.levels, text);
            d.features(ri, static_cast<Eigen::Index>(col.first_feature + code)) = 1.0;
          } else {
            auto v = csv::parse_double(text);
            if (!v || !std::isfinite(*v)) {
              throw DataError(cell_where(line_of(r), col.name) + ": cannot parse '" + text + "'");
            }
            d.features(ri, static_cast<Eigen::Index>(col.first_feature)) = *v;
          }
          break;
      }
    }
    if (col.role == Role::sensitive) d.sensitive_levels = col.levels;
    if (col.role == Role::task) d.task_levels = col.levels;
  }
  d.validate();
  return d;
}

void write_csv(const TabularDataset& data, std::ostream& out) {
  const std::size_t n = data.size();
  if (data.columns.empty()) {
    std::vector<std::string> header{"s"};
    for (std::size_t j = 0; j < data.dim(); ++j) {
      header.push_back(j < data.feature_names.size() ? data.feature_names[j]
                                                     : "x" + std::to_string(j + 1));
    }
    header.push_back("y");
    if (data.task_id) header.push_back("task");
    csv::write_row(out, header);
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<std::string> row{csv::format_double(data.sensitive[i])};
      for (std::size_t j = 0; j < data.dim(); ++j) {
        row.push_back(csv::format_double(
            data.features(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j))));
      }
      row.push_back(format_label(data.outcome[i], data.outcome_kind));
      if (data.task_id) row.push_back(std::to_string((*data.task_id)[i]));
      csv::write_row(out, row);
    }
    return;
  }

  std::vector<std::string> header;
  for (const auto& c : data.columns) header.push_back(c.name);
  csv::write_row(out, header);
  for (std::size_t i = 0; i < n; ++i) {
    const auto ri = static_cast<Eigen::Index>(i);
    std::vector<std::string> row;
    for (const auto& c : data.columns) {
      switch (c.role) {
        case Role::ignore:
          row.push_back(data.ignored.empty() ? "" : data.ignored[i][c.ignored_slot]);
          break;
        case Role::task: {
          const int t = (*data.task_id)[i];
          row.push_back(c.levels.empty() ? std::to_string(t) : c.levels[static_cast<std::size_t>(t)]);
          break;
        }
        case Role::sensitive:
          if (data.sensitive_kind == SensitiveKind::categorical && !c.levels.empty()) {
            row.push_back(c.levels[static_cast<std::size_t>(data.sensitive[i])]);
          } else {
            row.push_back(csv::format_double(data.sensitive[i]));
          }
          break;
        case Role::outcome:
          row.push_back(format_label(data.outcome[i], data.outcome_kind));
          break;
        case Role::feature:
          if (c.categorical) {
            std::string level;
            for (std::size_t l = 0; l < c.levels.size(); ++l) {
              if (data.features(ri, static_cast<Eigen::Index>(c.first_feature + l)) != 0.0) {
                level = c.levels[l];
              }
            }
            row.push_back(level);
          } else {
            row.push_back(
                csv::format_double(data.features(ri, static_cast<Eigen::Index>(c.first_feature))));
          }
          break;
      }
    }
    csv::write_row(out, row);
  }
}

void write_csv(const TabularDataset& data, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path + "'");
  write_csv(data, out);
}

int DiscretizationGrid::y_bin(double y) const {
  auto it = std::upper_bound(y_edges.begin(), y_edges.end(), y);
  if (it == y_edges.begin() || it == y_edges.end()) return -1;
  return static_cast<int>(it - y_edges.begin()) - 1;
}

int DiscretizationGrid::s_bin(double s) const {
  auto it = std::upper_bound(s_edges.begin(), s_edges.end(), s);
  if (it == s_edges.begin() || it == s_edges.end()) return -1;
  return static_cast<int>(it - s_edges.begin()) - 1;
}

void DiscretizationGrid::validate() const {
  auto check = [](const std::vector<double>& e, const char* name) {
    if (e.size() < 2) throw DataError(std::string(name) + " edges need at least one bin");
    for (std::size_t i = 0; i < e.size(); ++i) {
      if (!std::isfinite(e[i])) throw DataError(std::string(name) + " edges must be finite");
      if (i && !(e[i] > e[i - 1])) {
        throw DataError(std::string(name) + " edges must be strictly increasing");
      }
    }
  };
  check(y_edges, "y");
  check(s_edges, "s");
}

std::vector<double> quantile_edges(std::span<const double> values, int bins) {
  if (bins < 1) throw UsageError("bin count must be at least 1");
  if (values.empty()) throw DataError("cannot place grid edges on an empty sample");
  std::vector<double> v(values.begin(), values.end());
  std::sort(v.begin(), v.end());
  // Distinct values with cumulative counts below each.
  std::vector<double> distinct;
  std::vector<std::size_t> below;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (distinct.empty() || v[i] != distinct.back()) {
      distinct.push_back(v[i]);
      below.push_back(i);
    }
  }
  if (distinct.size() < static_cast<std::size_t>(bins)) {
    throw DataError("only " + std::to_string(distinct.size()) + " distinct values for " +
                    std::to_string(bins) + " bins");
  }
  const double n = static_cast<double>(v.size());
  std::vector<double> edges{v.front() - outer_pad(v.front())};
  // Candidate cut c (1..m-1) separates distinct[c-1] from distinct[c]; mass below is below[c].
  std::size_t prev = 0;
  const std::size_t m = distinct.size();
  for (int j = 1; j < bins; ++j) {
    const double target = n * j / bins;
    // Leave room for the remaining cuts on both sides.
    const std::size_t lo = prev + 1;
    const std::size_t hi = m - static_cast<std::size_t>(bins - j);
    std::size_t best = lo;
    double best_err = std::numeric_limits<double>::infinity();
    for (std::size_t c = lo; c <= hi; ++c) {
      const double err = std::abs(static_cast<double>(below[c]) - target);
      if (err < best_err) {
        best_err = err;
        best = c;
      }
    }
    edges.push_back(0.5 * (distinct[best - 1] + distinct[best]));
    prev = best;
  }
  edges.push_back(v.back() + outer_pad(v.back()));
  return edges;
}

DiscretizationGrid make_grid(std::span<const double> y, std::span<const double> s, int k_bins,
                             int q_bins, const GridStrategy& strategy) {
  if (k_bins < 1 || q_bins < 1) throw UsageError("k_bins and q_bins must be at least 1");
  DiscretizationGrid grid;
  if (std::holds_alternative<QuantileStrategy>(strategy)) {
    grid.y_edges = quantile_edges(y, k_bins);
    grid.s_edges = quantile_edges(s, q_bins);
  } else {
    const auto& ex = std::get<ExplicitEdges>(strategy);
    grid.y_edges = ex.y_edges;
    grid.s_edges = ex.s_edges;
    grid.validate();
    if (grid.k_bins() != k_bins || grid.q_bins() != q_bins) {
      throw UsageError("explicit edges do not match the requested bin counts");
    }
    for (double v : y) {
      if (grid.y_bin(v) < 0) throw DataError("explicit y edges do not cover the outcome range");
    }
    for (double v : s) {
      if (grid.s_bin(v) < 0) throw DataError("explicit s edges do not cover the sensitive range");
    }
  }
  grid.validate();
  return grid;
}

DiscretizationGrid make_grid(const TabularDataset& data, int k_bins, int q_bins,
                             const GridStrategy& strategy) {
  return make_grid(data.outcome, data.sensitive, k_bins, q_bins, strategy);
}

std::size_t GroupIndex::total() const {
  std::size_t t = 0;
  for (const auto& c : cells) t += c.size();
  return t;
}

GroupIndex partition(std::span<const double> y, std::span<const double> s,
                     const DiscretizationGrid& grid) {
  grid.validate();
  if (y.size() != s.size()) throw DataError("outcome and sensitive arrays are not aligned");
  GroupIndex g;
  g.k_bins = grid.k_bins();
  g.q_bins = grid.q_bins();
  g.cells.resize(static_cast<std::size_t>(g.k_bins * g.q_bins));
  g.group_counts.assign(static_cast<std::size_t>(g.q_bins), 0);
  for (std::size_t i = 0; i < y.size(); ++i) {
    const int k = grid.y_bin(y[i]);
    const int q = grid.s_bin(s[i]);
    if (k < 0 || q < 0) {
      throw DataError("record " + std::to_string(i) + " (y=" + csv::format_double(y[i]) +
                      ", s=" + csv::format_double(s[i]) + ") lies outside every cell");
    }
    g.cells[static_cast<std::size_t>(k * g.q_bins + q)].push_back(i);
    ++g.group_counts[static_cast<std::size_t>(q)];
  }
  const double n = static_cast<double>(y.size());
  for (std::size_t c : g.group_counts) g.group_probs.push_back(n > 0 ? c / n : 0.0);
  return g;
}

GroupIndex partition(const TabularDataset& data, const DiscretizationGrid& grid) {
  return fairkit::partition(data.outcome, data.sensitive, grid);
}

SplitResult split(const TabularDataset& data, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction < 1.0)) throw UsageError("split fraction must be in (0,1)");
  std::mt19937_64 rng(seed);
  std::map<double, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < data.size(); ++i) groups[data.sensitive[i]].push_back(i);

  SplitResult result;
  bool can_stratify = true;
  for (const auto& [_, rows] : groups) can_stratify = can_stratify && rows.size() >= 2;

  std::vector<std::size_t> first, second;
  auto take = [&](std::vector<std::size_t> rows) {
    std::shuffle(rows.begin(), rows.end(), rng);
    auto k = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(rows.size())));
    if (rows.size() >= 2) k = std::clamp<std::size_t>(k, 1, rows.size() - 1);
    first.insert(first.end(), rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(k));
    second.insert(second.end(), rows.begin() + static_cast<std::ptrdiff_t>(k), rows.end());
  };
  if (can_stratify) {
    for (const auto& [_, rows] : groups) take(rows);
  } else {
    result.stratified = false;
    result.warning = "a sensitive group has fewer than 2 records; split is not stratified";
    std::vector<std::size_t> all(data.size());
    std::iota(all.begin(), all.end(), 0);
    take(all);
  }
  std::sort(first.begin(), first.end());
  std::sort(second.begin(), second.end());
  result.first = data.subset(first);
  result.second = data.subset(second);
  return result;
}

}  // namespace fairkit
