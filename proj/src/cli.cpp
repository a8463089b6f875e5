#include "fairkit/cli.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <sstream>

#include <CLI11.hpp>

#include "fairkit/causal.hpp"
#include "fairkit/csv.hpp"
#include "fairkit/dataset.hpp"
#include "fairkit/error.hpp"
#include "fairkit/fairmtl.hpp"
#include "fairkit/ferm.hpp"
#include "fairkit/metrics.hpp"
#include "fairkit/registry.hpp"
#include "fairkit/report.hpp"
#include "fairkit/transport.hpp"

namespace fairkit::cli {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Globals {
  std::uint64_t seed = 0;
  int threads = 1;
  std::string output;
  std::string format = "json";
  std::string plot;
};

class Sink {
 public:
  Sink(const Globals& g, std::ostream& out) : g_(g), out_(out) {}

  void emit(const std::string& text) const {
    if (g_.output.empty()) {
      out_ << text;
      return;
    }
    write_file(g_.output, text);
  }

  static void write_file(const std::string& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot write '" + path + "'");
    f << text;
    if (!f) throw DataError("cannot write '" + path + "'");
  }

 private:
  const Globals& g_;
  std::ostream& out_;
};

struct PlotRow {
  double x;
  std::string series;
  double value;
};

void write_plot(const std::string& path, const std::vector<PlotRow>& rows) {
  std::ostringstream s;
  csv::write_row(s, {"x", "series", "value"});
  for (const auto& r : rows) csv::write_row(s, {csv::format_double(r.x), r.series, csv::format_double(r.value)});
  Sink::write_file(path, s.str());
}

std::vector<std::string> split_list(const std::string& text, char sep = ',') {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(text);
  while (std::getline(in, item, sep)) {
    const auto b = item.find_first_not_of(' ');
    const auto e = item.find_last_not_of(' ');
    if (b != std::string::npos) out.push_back(item.substr(b, e - b + 1));
  }
  return out;
}

double parse_real_flag(const std::string& flag, const std::string& text) {
  auto v = csv::parse_double(text);
  if (!v || std::isnan(*v)) throw UsageError(flag + ": expected a number, got '" + text + "'");
  return *v;
}

Json header(const std::string& command) {
  return {{"schema_version", kSchemaVersion}, {"command", command}};
}

void emit_json(const Sink& sink, const Json& j) { sink.emit(dump_json(j)); }

// ---------------------------------------------------------------- score files

struct ScoreFile {
  ScoreSet set;
  std::vector<std::string> ids;
  std::vector<std::string> levels;
  bool has_outcome = false;
};

ScoreFile load_scores(const std::string& path, const std::string& score_col, const std::string& group_col,
                      const std::string& outcome_col) {
  const auto table = csv::read_file(path);
  const std::size_t si = table.column(score_col);
  const std::size_t gi = table.column(group_col);
  const auto oi = outcome_col.empty() ? std::nullopt : table.find_column(outcome_col);
  const auto ii = table.find_column("id");
  ScoreFile f;
  f.has_outcome = oi.has_value();
  std::map<std::string, int> codes;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    const std::string where = "row " + std::to_string(r + 2) + ", column '";
    const auto s = csv::parse_double(row[si]);
    if (!s || !std::isfinite(*s)) throw DataError(where + score_col + "': invalid score '" + row[si] + "'");
    f.set.scores.push_back(*s);
    auto [it, fresh] = codes.emplace(row[gi], static_cast<int>(codes.size()));
    if (fresh) f.levels.push_back(row[gi]);
    f.set.group.push_back(it->second);
    if (oi) {
      const auto y = csv::parse_double(row[*oi]);
      if (!y || !(*y == 0.0 || *y == 1.0 || *y == -1.0)) {
        throw DataError(where + outcome_col + "': expected a binary label, got '" + row[*oi] + "'");
      }
      f.set.outcome.push_back(*y > 0 ? 1.0 : -1.0);
    }
    f.ids.push_back(ii ? row[*ii] : std::to_string(r));
  }
  if (f.set.scores.empty()) throw DataError("'" + path + "' has no records");
  return f;
}

Json gap_json(const GapResult& g, const std::vector<std::string>& levels) {
  Json rates = Json::object();
  for (std::size_t i = 0; i < g.rates.size(); ++i) rates[levels[i]] = g.rates[i];
  Json excluded = Json::array();
  for (int e : g.excluded_groups) excluded.push_back(levels[static_cast<std::size_t>(e)]);
  Json pairs = Json::array();
  for (const auto& p : g.pairs) {
    pairs.push_back({{"a", levels[static_cast<std::size_t>(p.a)]},
                     {"b", levels[static_cast<std::size_t>(p.b)]},
                     {"value", p.value}});
  }
  return {{"value", g.value}, {"rates", rates}, {"excluded_groups", excluded}, {"pairs", pairs}};
}

Json gf_json(const GeneralFairnessResult& r) {
  Json values = Json::array(), counts = Json::array();
  for (int k = 0; k < r.table.k_bins; ++k) {
    Json vrow = Json::array(), crow = Json::array();
    for (int q = 0; q < r.table.q_bins; ++q) {
      vrow.push_back(r.table.at(k, q));
      crow.push_back(r.table.counts[static_cast<std::size_t>(k * r.table.q_bins + q)]);
    }
    values.push_back(vrow);
    counts.push_back(crow);
  }
  Json skipped = Json::array();
  for (const auto& [k, q] : r.skipped_cells) skipped.push_back({k, q});
  return {{"value", r.value},
          {"pair_mean", r.pair_mean},
          {"gap_sum", r.gap_sum},
          {"included_pairs", r.included_pairs},
          {"included_distinct_pairs", r.included_distinct_pairs},
          {"cell_values", values},
          {"cell_counts", counts},
          {"skipped_cells", skipped}};
}

DiscretizationGrid label_group_grid(int groups) {
  DiscretizationGrid g;
  g.y_edges = {-1.5, 0.0, 1.5};
  for (int q = 0; q <= groups; ++q) g.s_edges.push_back(q - 0.5);
  return g;
}

// -------------------------------------------------------------- dataset files

SensitiveKind parse_sensitive_kind(const std::string& text) {
  if (text == "categorical") return SensitiveKind::categorical;
  if (text == "real") return SensitiveKind::real;
  throw UsageError("--sensitive-kind: expected categorical or real, got '" + text + "'");
}

TabularDataset load_dataset(const std::string& path, const std::string& schema, const std::string& outcome_kind,
                            const std::string& sensitive_kind) {
  if (schema.empty()) throw UsageError("--schema is required");
  return load_csv(path, Schema::parse(schema, parse_outcome_kind(outcome_kind), parse_sensitive_kind(sensitive_kind)));
}

Json dataset_meta(const TabularDataset& d) {
  return {{"feature_names", d.feature_names},
          {"sensitive_levels", d.sensitive_levels},
          {"outcome_kind", std::string(to_string(d.outcome_kind))},
          {"sensitive_kind", d.sensitive_kind == SensitiveKind::categorical ? "categorical" : "real"}};
}

// Reorders features and sensitive codes of `data` to the layout a model was trained on.
void align_to(TabularDataset& data, const Json& meta) {
  const auto names = meta.at("feature_names").get<std::vector<std::string>>();
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(data.features.rows(), static_cast<Eigen::Index>(names.size()));
  std::vector<bool> used(data.feature_names.size(), false);
  for (std::size_t j = 0; j < names.size(); ++j) {
    auto it = std::find(data.feature_names.begin(), data.feature_names.end(), names[j]);
    if (it == data.feature_names.end()) {
      if (names[j].find('=') == std::string::npos) throw DataError("input lacks feature column '" + names[j] + "'");
      continue;
    }
    const auto src = it - data.feature_names.begin();
    used[static_cast<std::size_t>(src)] = true;
    x.col(static_cast<Eigen::Index>(j)) = data.features.col(src);
  }
  for (std::size_t j = 0; j < used.size(); ++j) {
    if (used[j]) continue;
    const auto col = data.features.col(static_cast<Eigen::Index>(j));
    const bool one_hot = data.feature_names[j].find('=') != std::string::npos;
    if (!one_hot || col.cwiseAbs().maxCoeff() != 0.0) {
      throw DataError("feature '" + data.feature_names[j] + "' was not seen in training");
    }
  }
  data.features = std::move(x);
  data.feature_names = names;
  const auto levels = meta.at("sensitive_levels").get<std::vector<std::string>>();
  if (data.sensitive_kind == SensitiveKind::categorical && !levels.empty()) {
    std::vector<double> remap;
    for (const auto& level : data.sensitive_levels) {
      auto it = std::find(levels.begin(), levels.end(), level);
      if (it == levels.end()) throw DataError("sensitive level '" + level + "' was not seen in training");
      remap.push_back(static_cast<double>(it - levels.begin()));
    }
    for (auto& s : data.sensitive) s = remap[static_cast<std::size_t>(s)];
    data.sensitive_levels = levels;
  }
}

// --------------------------------------------------------------------- metrics

struct MetricsArgs {
  std::string input;
  std::string threshold;
  int bins = 0;
  std::string metrics = "default";
  std::string score_col = "score";
  std::string group_col = "group";
  std::string outcome_col = "outcome";
};

void cmd_metrics(const MetricsArgs& a, const Sink& sink) {
  auto f = load_scores(a.input, a.score_col, a.group_col, a.outcome_col);
  if (!a.threshold.empty()) f.set.threshold = parse_real_flag("--threshold", a.threshold);
  const bool has_t = f.set.threshold.has_value();

  std::vector<std::string> wanted;
  if (a.metrics == "default") {
    wanted.push_back("strong_dp");
    if (has_t) wanted.push_back("dp");
    if (has_t && f.has_outcome) {
      for (const char* m : {"odds", "predictive_parity", "general_fairness"}) wanted.push_back(m);
    }
  } else {
    wanted = split_list(a.metrics);
  }

  Json results = Json::object();
  for (const auto& m : wanted) {
    const bool needs_t = m != "strong_dp";
    const bool needs_y = m == "odds" || m == "predictive_parity" || m == "general_fairness";
    if (m != "strong_dp" && m != "dp" && !needs_y) {
      throw UsageError("--metrics: unknown metric '" + m + "' (dp, strong_dp, odds, predictive_parity, general_fairness)");
    }
    if (needs_t && !has_t) throw UsageError("--metrics: '" + m + "' needs --threshold");
    if (needs_y && !f.has_outcome) throw DataError("metric '" + m + "' needs the '" + a.outcome_col + "' column");
    if (m == "dp") {
      results["demographic_parity"] = gap_json(dp_gap(f.set), f.levels);
    } else if (m == "strong_dp") {
      const auto r = strong_dp_gap(f.set, a.bins);
      Json pairs = Json::array();
      for (const auto& p : r.w1_pairs) {
        pairs.push_back({{"a", f.levels[static_cast<std::size_t>(p.a)]},
                         {"b", f.levels[static_cast<std::size_t>(p.b)]},
                         {"w1", p.value}});
      }
      results["strong_demographic_parity"] = {
          {"bins", r.bins}, {"max_w1", r.max_w1}, {"d_pair", r.d_pair}, {"w1_pairs", pairs}};
    } else if (m == "odds") {
      const auto r = efpr_efnr_gaps(f.set);
      results["equalized_odds"] = {{"fpr", gap_json(r.fpr, f.levels)}, {"fnr", gap_json(r.fnr, f.levels)}};
    } else if (m == "predictive_parity") {
      results["predictive_parity"] = gap_json(predictive_parity_gap(f.set), f.levels);
    } else {
      const auto grid = label_group_grid(f.set.group_count());
      const auto hard = signed_predictions(f.set);
      std::vector<double> margin(f.set.size());
      for (std::size_t i = 0; i < margin.size(); ++i) margin[i] = f.set.scores[i] - *f.set.threshold;
      results["general_fairness"] = gf_json(general_fairness(f.set, grid, hard));
      results["loss_general_fairness_linear"] =
          gf_json(loss_general_fairness(f.set, grid, margin, LossKind::linear));
    }
  }
  Json j = header("metrics");
  j["input"] = a.input;
  j["records"] = f.set.size();
  j["groups"] = f.levels;
  j["threshold"] = has_t ? Json(*f.set.threshold) : Json(nullptr);
  j["results"] = results;
  emit_json(sink, j);
}

// ---------------------------------------------------------------------- repair

struct RepairArgs {
  std::string input;
  std::string scores_out;
  double t = 1.0;
  int bins = 0;
  int order = 2;
  std::string weights = "empirical";
  int sweep = 0;
  std::string score_col = "score";
  std::string group_col = "group";
  std::string outcome_col = "outcome";
};

void cmd_repair(const RepairArgs& a, const Globals& g, const Sink& sink) {
  auto f = load_scores(a.input, a.score_col, a.group_col, a.outcome_col);
  RepairOptions opts;
  opts.t = a.t;
  opts.bins = a.bins;
  opts.order = a.order;
  if (a.weights == "empirical") opts.weights = WeightScheme::empirical;
  else if (a.weights == "uniform") opts.weights = WeightScheme::uniform;
  else throw UsageError("--weights: expected empirical or uniform, got '" + a.weights + "'");
  const auto plan = make_repair_plan(f.set, opts);
  std::vector<double> repaired(f.set.size());
  for (std::size_t i = 0; i < repaired.size(); ++i) repaired[i] = plan.map(f.set.group[i], f.set.scores[i]);

  if (!a.scores_out.empty()) {
    std::ostringstream s;
    std::vector<std::string> head = {"id", "group", "score", "repaired_score"};
    if (f.has_outcome) head.push_back(a.outcome_col);
    csv::write_row(s, head);
    for (std::size_t i = 0; i < repaired.size(); ++i) {
      std::vector<std::string> row = {f.ids[i], f.levels[static_cast<std::size_t>(f.set.group[i])],
                                      csv::format_double(f.set.scores[i]), csv::format_double(repaired[i])};
      if (f.has_outcome) row.push_back(f.set.outcome[i] > 0 ? "1" : "0");
      csv::write_row(s, row);
    }
    Sink::write_file(a.scores_out, s.str());
  }

  ScoreSet after = f.set;
  after.scores = repaired;
  const auto before_sdp = strong_dp_gap(f.set, plan.bins);
  const auto after_sdp = strong_dp_gap(after, plan.bins);
  Json groups = Json::array();
  for (std::size_t slot = 0; slot < plan.groups.size(); ++slot) {
    const int code = plan.group_codes[slot];
    std::vector<double> mine;
    for (std::size_t i = 0; i < repaired.size(); ++i) {
      if (f.set.group[i] == code) mine.push_back(repaired[i]);
    }
    const EmpiricalDistribution rep(mine, plan.bins);
    groups.push_back({{"group", f.levels[static_cast<std::size_t>(code)]},
                      {"records", plan.groups[slot].size()},
                      {"weight", plan.weights[slot]},
                      {"w1_to_barycenter_before", wasserstein(plan.groups[slot], plan.center, 1)},
                      {"w1_to_barycenter_after", wasserstein(rep, plan.center, 1)}});
  }
  Json j = header("repair");
  j["input"] = a.input;
  j["t"] = plan.t;
  j["bins"] = plan.bins;
  j["order"] = plan.order;
  j["weights"] = a.weights;
  j["groups"] = groups;
  j["strong_dp_max_w1_before"] = before_sdp.max_w1;
  j["strong_dp_max_w1_after"] = after_sdp.max_w1;
  j["barycenter_quantiles"] = plan.center.quantiles();
  j["scores_out"] = a.scores_out.empty() ? Json(nullptr) : Json(a.scores_out);

  if (a.sweep > 0) {
    if (a.sweep < 2) throw UsageError("--sweep: needs at least 2 points");
    if (g.plot.empty()) throw UsageError("--sweep: needs --plot for the curve output");
    std::vector<PlotRow> rows;
    for (int i = 0; i < a.sweep; ++i) {
      RepairOptions o = opts;
      o.t = static_cast<double>(i) / (a.sweep - 1);
      ScoreSet s = f.set;
      s.scores = geodesic_repair(f.set, o);
      for (const auto& p : strong_dp_gap(s, plan.bins).w1_pairs) {
        rows.push_back({o.t,
                        "w1:" + f.levels[static_cast<std::size_t>(p.a)] + "|" +
                            f.levels[static_cast<std::size_t>(p.b)],
                        p.value});
      }
    }
    std::stable_sort(rows.begin(), rows.end(), [](const PlotRow& x, const PlotRow& y) { return x.series < y.series; });
    write_plot(g.plot, rows);
  }
  emit_json(sink, j);
}

// ------------------------------------------------------------------------ ferm

struct FermArgs {
  std::string input;
  std::string schema;
  std::string outcome_kind = "classification";
  std::string sensitive_kind = "categorical";
  std::string loss = "squared";
  double lambda = 1.0;
  std::string epsilon = "0";
  std::string kernel = "linear";
  double gamma = 1.0;
  int grid_k = 2;
  int grid_q = 0;
  bool use_sensitive = false;
  std::string sweep;
  int max_iterations = 10000;
};

double training_risk(const TabularDataset& d, const Eigen::VectorXd& f) {
  double s = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    const double fi = f(static_cast<Eigen::Index>(i));
    if (d.outcome_kind == OutcomeKind::classification) s += (fi > 0 ? 1.0 : -1.0) != d.outcome[i] ? 1.0 : 0.0;
    else s += (fi - d.outcome[i]) * (fi - d.outcome[i]);
  }
  return s / static_cast<double>(d.size());
}

void cmd_ferm_train(const FermArgs& a, const Globals& g, const Sink& sink) {
  const auto data = load_dataset(a.input, a.schema, a.outcome_kind, a.sensitive_kind);
  int q = a.grid_q;
  if (q == 0) q = data.sensitive_kind == SensitiveKind::categorical ? data.group_count() : 2;
  const auto grid = make_grid(data, a.grid_k, q);
  FairERMProblem p;
  p.loss = parse_ferm_loss(a.loss);
  p.lambda = a.lambda;
  p.epsilon = parse_real_flag("--epsilon", a.epsilon);
  p.kernel.kind = parse_kernel_kind(a.kernel);
  p.kernel.gamma = a.gamma;
  p.include_sensitive = a.use_sensitive;
  p.max_iterations = a.max_iterations;
  const auto model = train_gferm(p, data, grid);

  Json j = to_json(model);
  j["data"] = dataset_meta(data);
  j["loss"] = a.loss;
  j["lambda"] = a.lambda;
  j["grid"] = {{"y_edges", grid.y_edges}, {"s_edges", grid.s_edges}};
  j["training_risk"] = training_risk(data, model.decision(data));

  if (!a.sweep.empty()) {
    if (g.plot.empty()) throw UsageError("--epsilon-sweep: needs --plot for the curve output");
    std::vector<PlotRow> rows;
    for (const auto& item : split_list(a.sweep)) {
      FairERMProblem ps = p;
      ps.epsilon = parse_real_flag("--epsilon-sweep", item);
      const auto m = train_gferm(ps, data, grid);
      rows.push_back({ps.epsilon, "objective", m.objective});
      rows.push_back({ps.epsilon, "constraint_l1", m.constraints.l1});
      rows.push_back({ps.epsilon, "training_risk", training_risk(data, m.decision(data))});
    }
    std::stable_sort(rows.begin(), rows.end(), [](const PlotRow& x, const PlotRow& y) { return x.series < y.series; });
    write_plot(g.plot, rows);
  }
  emit_json(sink, j);
}

struct PredictArgs {
  std::string model;
  std::string input;
  std::string schema;
  std::string sensitive_kind = "categorical";
};

void cmd_ferm_predict(const PredictArgs& a, const Sink& sink) {
  const Json j = read_json_file(a.model);
  const auto model = kernel_model_from_json(j);
  if (!j.contains("data")) throw DataError("model file lacks its training layout");
  const Json& meta = j.at("data");
  const std::string outcome_kind = meta.at("outcome_kind").get<std::string>();
  auto data = load_dataset(a.input, a.schema, outcome_kind, meta.value("sensitive_kind", a.sensitive_kind));
  align_to(data, meta);
  const Eigen::VectorXd f = model.decision(data);
  std::ostringstream s;
  const bool cls = outcome_kind == "classification";
  csv::write_row(s, cls ? std::vector<std::string>{"row", "decision", "prediction"}
                        : std::vector<std::string>{"row", "decision"});
  for (Eigen::Index i = 0; i < f.size(); ++i) {
    std::vector<std::string> row = {std::to_string(i), csv::format_double(f(i))};
    if (cls) row.push_back(f(i) > 0 ? "1" : "-1");
    csv::write_row(s, row);
  }
  sink.emit(s.str());
}

// ------------------------------------------------------------------------- sem

struct SemArgs {
  std::string scenario;
  std::string sem;
  std::string input;
  std::size_t n = 1000;
  std::string paths = "unfair";
  std::string a;
  std::string a_bar;
  std::size_t mc = 0;
  std::size_t mc_samples = 1000;
  bool force_mc = false;
  std::string weights;
  double intercept = 0.0;
};

LinearSEM load_sem(const SemArgs& a) {
  if (a.scenario.empty() == a.sem.empty()) throw UsageError("give exactly one of --scenario and --sem");
  return a.scenario.empty() ? sem_from_json(read_json_file(a.sem)) : scenario(a.scenario);
}

TabularDataset load_sem_data(const LinearSEM& sem, const std::string& path) {
  if (path.empty()) throw UsageError("--input is required");
  Schema schema;
  schema.sensitive_kind = SensitiveKind::real;
  schema.ignore_undeclared = true;
  const auto& target = sem.variables[sem.target_index()];
  schema.outcome_kind = target.binary ? OutcomeKind::classification : OutcomeKind::regression;
  for (const auto& v : sem.variables) {
    if (!v.observed) continue;
    ColumnSpec c;
    c.name = v.name;
    c.role = v.name == sem.sensitive ? Role::sensitive : v.name == sem.target ? Role::outcome : Role::feature;
    schema.columns.push_back(c);
  }
  return load_csv(path, schema);
}

double level_flag(const std::string& flag, const std::string& text, double fallback) {
  return text.empty() ? fallback : parse_real_flag(flag, text);
}

Json paths_json(const PathSelection& paths) {
  Json out = Json::array();
  for (const auto& p : paths) out.push_back(format_path(p));
  return out;
}

CounterfactualOptions cf_options(const SemArgs& a, const Globals& g) {
  CounterfactualOptions o;
  o.mc_samples = a.mc_samples;
  o.seed = g.seed;
  o.force_monte_carlo = a.force_mc;
  return o;
}

void cmd_sem(const std::string& sub, const SemArgs& a, const Globals& g, const Sink& sink) {
  const LinearSEM sem = load_sem(a);
  if (sub == "sample") {
    std::ostringstream s;
    write_csv(sample(sem, a.n, g.seed), s);
    sink.emit(s.str());
    return;
  }
  if (sub == "fit") {
    const auto data = load_sem_data(sem, a.input);
    Json j = to_json(fit(data, sem));
    j["fitted_records"] = data.size();
    emit_json(sink, j);
    return;
  }
  const double lo = level_flag("--a", a.a, sem.sensitive_values[0]);
  const double hi = level_flag("--abar", a.a_bar, sem.sensitive_values[1]);
  const auto paths = parse_paths(sem, a.paths);
  if (sub == "pse") {
    Json j = header("sem pse");
    j["paths"] = paths_json(paths);
    j["a"] = lo;
    j["a_bar"] = hi;
    try {
      j["closed_form"] = pse(sem, paths, lo, hi);
    } catch (const UsageError& e) {
      if (a.mc == 0) throw;
      j["closed_form"] = nullptr;
      j["closed_form_unavailable"] = e.what();
    }
    if (a.mc > 0) {
      const auto mc = pse_monte_carlo(sem, paths, lo, hi, a.mc, g.seed);
      j["monte_carlo"] = {{"value", mc.value}, {"std_error", mc.std_error}, {"samples", mc.samples}};
    }
    emit_json(sink, j);
    return;
  }
  const auto data = load_sem_data(sem, a.input);
  std::vector<Record> records;
  for (std::size_t r = 0; r < data.size(); ++r) records.push_back(record_from_dataset(sem, data, r));
  const auto opts = cf_options(a, g);
  std::ostringstream s;
  if (sub == "counterfactual") {
    csv::write_row(s, {"row", "counterfactual", "std_error", "monte_carlo"});
    for (std::size_t r = 0; r < records.size(); ++r) {
      CounterfactualOptions o = opts;
      o.seed = g.seed + r;
      const auto cf = counterfactual(sem, records[r], paths, hi, o);
      csv::write_row(s, {std::to_string(r), csv::format_double(cf.value), csv::format_double(cf.std_error),
                         cf.monte_carlo ? "1" : "0"});
    }
  } else {
    std::vector<std::pair<std::size_t, double>> coef;
    for (const auto& item : split_list(a.weights)) {
      const auto eq = item.find('=');
      if (eq == std::string::npos) throw UsageError("--weights: expected name=value, got '" + item + "'");
      coef.emplace_back(sem.index(item.substr(0, eq)), parse_real_flag("--weights", item.substr(eq + 1)));
    }
    if (coef.empty()) throw UsageError("--weights is required, e.g. --weights X=0.5");
    const double b = a.intercept;
    const ScoreModel model = [coef, b](const Eigen::VectorXd& v) {
      double out = b;
      for (const auto& [i, w] : coef) out += w * v(static_cast<Eigen::Index>(i));
      return out;
    };
    const auto corrected = correct_scores(sem, model, records, paths, hi, opts);
    csv::write_row(s, {"row", "score", "corrected_score"});
    for (std::size_t r = 0; r < records.size(); ++r) {
      Eigen::VectorXd v(static_cast<Eigen::Index>(records[r].size()));
      for (std::size_t i = 0; i < records[r].size(); ++i) {
        v(static_cast<Eigen::Index>(i)) = std::isfinite(records[r][i]) ? records[r][i] : 0.0;
      }
      csv::write_row(s, {std::to_string(r), csv::format_double(model(v)), csv::format_double(corrected[r])});
    }
  }
  sink.emit(s.str());
}

// ------------------------------------------------------------------------- mtl

struct MtlArgs {
  std::string input;
  std::string schema;
  std::string outcome_kind = "regression";
  int r = 0;
  double lambda = 1.0;
  std::string mode = "equality";
  double rho = 1.0;
  std::string eps;
  int max_iterations = 200;
  std::string model;
  std::string transfer_lambda;
  double theta = 0.5;
  double mix = 0.5;
  std::string loss = "squared";
  std::string classes = "+,-";
  bool predict_sensitive = false;
  double predictor_lambda = 1e-3;
};

void cmd_mtl(const std::string& sub, const MtlArgs& a, const Globals& g, const Sink& sink) {
  if (sub == "train-rep") {
    const auto data = load_dataset(a.input, a.schema, a.outcome_kind, "categorical");
    const auto mt = MultiTaskDataset::from_dataset(data);
    RepresentationOptions o;
    o.r = a.r;
    o.lambda = a.lambda;
    o.mode = parse_constraint_mode(a.mode);
    o.rho = a.rho;
    if (!a.eps.empty()) {
      if (o.mode != ConstraintMode::relaxed) throw UsageError("--eps applies to --mode relaxed only");
      o.epsilon = parse_real_flag("--eps", a.eps);
    }
    o.seed = g.seed;
    o.max_iterations = a.max_iterations;
    const auto model = train_representation(mt, o);
    Json j = to_json(model);
    j["data"] = dataset_meta(data);
    j["task_levels"] = data.task_levels;
    if (!g.plot.empty()) {
      std::vector<PlotRow> rows;
      for (std::size_t i = 0; i < model.objective_trace.size(); ++i) {
        rows.push_back({static_cast<double>(i), "objective", model.objective_trace[i]});
      }
      write_plot(g.plot, rows);
    }
    emit_json(sink, j);
    return;
  }
  if (sub == "transfer") {
    if (a.model.empty()) throw UsageError("--model is required");
    const Json mj = read_json_file(a.model);
    const auto model = representation_from_json(mj);
    auto data = load_dataset(a.input, a.schema, a.outcome_kind, "categorical");
    if (mj.contains("data")) align_to(data, mj.at("data"));
    const double lambda = a.transfer_lambda.empty() ? model.lambda : parse_real_flag("--lambda", a.transfer_lambda);
    std::vector<TaskData> tasks;
    std::vector<std::string> names;
    if (data.task_id) {
      const auto mt = MultiTaskDataset::from_dataset(data);
      tasks = mt.tasks;
      names = data.task_levels;
    } else {
      TaskData t;
      t.x = data.features;
      t.y = Eigen::Map<const Eigen::VectorXd>(data.outcome.data(), static_cast<Eigen::Index>(data.size()));
      t.group = data.group_codes();
      tasks.push_back(std::move(t));
      names.push_back("0");
    }
    Json out = Json::array();
    for (std::size_t t = 0; t < tasks.size(); ++t) {
      const auto r = transfer(model, tasks[t], lambda);
      out.push_back({{"task", names[t]},
                     {"b", to_json(r.b)},
                     {"w", to_json(r.w)},
                     {"gap_norm", r.gap_norm ? Json(*r.gap_norm) : Json(nullptr)}});
    }
    Json j = header("mtl transfer");
    j["lambda"] = lambda;
    j["tasks"] = out;
    emit_json(sink, j);
    return;
  }
  const auto data = load_dataset(a.input, a.schema, a.outcome_kind, "categorical");
  CommonMeanOptions o;
  o.theta = a.theta;
  o.lambda = a.mix;
  o.rho = a.rho;
  o.loss = parse_mtl_loss(a.loss);
  o.constrain_positive = o.constrain_negative = false;
  for (const auto& c : split_list(a.classes)) {
    if (c == "+") o.constrain_positive = true;
    else if (c == "-") o.constrain_negative = true;
    else if (c != "none") throw UsageError("--classes: expected a subset of +,- or none, got '" + c + "'");
  }
  o.use_predicted_sensitive = a.predict_sensitive;
  o.predictor_lambda = a.predictor_lambda;
  o.seed = g.seed;
  const auto model = train_common_mean(data, o);
  Json j = to_json(model);
  j["data"] = dataset_meta(data);
  emit_json(sink, j);
}

// -------------------------------------------------------------------- datasets

Json dataset_json(const DatasetInfo& d) {
  return {{"name", d.name},
          {"reference", d.reference},
          {"samples", d.samples},
          {"features", d.features},
          {"sensitive_features", d.sensitive},
          {"tasks", d.tasks}};
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"fairkit: fairness metrics, optimal-transport repair, fair ERM, causal and multitask tools"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--seed", g.seed, "Seed for every random draw")->capture_default_str();
  app.add_option("--threads", g.threads, "Worker threads (computations are deterministic at any value)")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  app.add_option("--output", g.output, "Write the main output here instead of stdout");
  app.add_option("--format", g.format, "Report format")->capture_default_str()->check(CLI::IsMember({"json"}));
  app.add_option("--plot", g.plot, "Write plot-ready CSV (x, series, value) here");

  MetricsArgs ma;
  auto* metrics = app.add_subcommand("metrics", "Group fairness report for a score file");
  metrics->add_option("--input", ma.input, "CSV with score, group and optional outcome columns")->required();
  metrics->add_option("--threshold", ma.threshold, "Classification threshold tau (predict 1 when score > tau)");
  metrics->add_option("--bins", ma.bins, "Quantile bins for strong demographic parity (0: automatic)");
  metrics->add_option("--metrics", ma.metrics, "Comma list: dp,strong_dp,odds,predictive_parity,general_fairness");
  metrics->add_option("--score-col", ma.score_col)->capture_default_str();
  metrics->add_option("--group-col", ma.group_col)->capture_default_str();
  metrics->add_option("--outcome-col", ma.outcome_col)->capture_default_str();

  RepairArgs ra;
  auto* repair = app.add_subcommand("repair", "Geodesic optimal-transport repair of group score distributions");
  repair->add_option("--input", ra.input)->required();
  repair->add_option("--scores-out", ra.scores_out, "CSV of id, group, score, repaired_score");
  repair->add_option("--t", ra.t, "Repair amount in [0,1]")->capture_default_str();
  repair->add_option("--bins", ra.bins, "Quantile bins (0: min(100, smallest group))")->capture_default_str();
  repair->add_option("--order", ra.order, "Barycenter order (1 or 2)")->capture_default_str();
  repair->add_option("--weights", ra.weights, "empirical or uniform")->capture_default_str();
  repair->add_option("--sweep", ra.sweep, "Number of evenly spaced t values for the plot CSV");
  repair->add_option("--score-col", ra.score_col)->capture_default_str();
  repair->add_option("--group-col", ra.group_col)->capture_default_str();
  repair->add_option("--outcome-col", ra.outcome_col)->capture_default_str();

  FermArgs fa;
  auto* ferm_train = app.add_subcommand("ferm-train", "Train a fair kernel model under linear-loss constraints");
  ferm_train->add_option("--input", fa.input)->required();
  ferm_train->add_option("--schema", fa.schema, "col=role[:categorical],...")->required();
  ferm_train->add_option("--outcome-kind", fa.outcome_kind)->capture_default_str();
  ferm_train->add_option("--sensitive-kind", fa.sensitive_kind)->capture_default_str();
  ferm_train->add_option("--loss", fa.loss, "squared, hinge or logistic")->capture_default_str();
  ferm_train->add_option("--lambda", fa.lambda)->capture_default_str();
  ferm_train->add_option("--epsilon", fa.epsilon, "Constraint budget; inf disables it")->capture_default_str();
  ferm_train->add_option("--kernel", fa.kernel, "linear or rbf")->capture_default_str();
  ferm_train->add_option("--gamma", fa.gamma, "RBF width")->capture_default_str();
  ferm_train->add_option("--grid-k", fa.grid_k, "Outcome bins")->capture_default_str();
  ferm_train->add_option("--grid-q", fa.grid_q, "Sensitive bins (0: one per group)")->capture_default_str();
  ferm_train->add_flag("--use-sensitive", fa.use_sensitive, "Feed the sensitive value to the model");
  ferm_train->add_option("--epsilon-sweep", fa.sweep, "Comma list of budgets for the plot CSV");
  ferm_train->add_option("--max-iterations", fa.max_iterations)->capture_default_str();

  PredictArgs pa;
  auto* ferm_predict = app.add_subcommand("ferm-predict", "Evaluate a trained model on a dataset");
  ferm_predict->add_option("--model", pa.model)->required();
  ferm_predict->add_option("--input", pa.input)->required();
  ferm_predict->add_option("--schema", pa.schema)->required();

  SemArgs sa;
  auto* sem = app.add_subcommand("sem", "Linear structural equation tools");
  sem->require_subcommand(1);
  auto add_sem_source = [&](CLI::App* c) {
    c->add_option("--scenario", sa.scenario, "Built-in scenario name");
    c->add_option("--sem", sa.sem, "SEM JSON file");
  };
  auto add_regime = [&](CLI::App* c) {
    c->add_option("--paths", sa.paths, "unfair, all, none or A>D,A>Y")->capture_default_str();
    c->add_option("--abar", sa.a_bar, "Counterfactual sensitive value");
  };
  auto* sem_sample = sem->add_subcommand("sample", "Draw a dataset");
  add_sem_source(sem_sample);
  sem_sample->add_option("--n", sa.n)->capture_default_str();
  auto* sem_fit = sem->add_subcommand("fit", "Re-estimate a SEM skeleton by least squares");
  add_sem_source(sem_fit);
  sem_fit->add_option("--input", sa.input)->required();
  auto* sem_pse = sem->add_subcommand("pse", "Path-specific effect");
  add_sem_source(sem_pse);
  add_regime(sem_pse);
  sem_pse->add_option("--a", sa.a, "Baseline sensitive value");
  sem_pse->add_option("--mc", sa.mc, "Also estimate by Monte Carlo with this many draws");
  auto* sem_cf = sem->add_subcommand("counterfactual", "Per-record path-specific counterfactual target");
  add_sem_source(sem_cf);
  add_regime(sem_cf);
  sem_cf->add_option("--input", sa.input)->required();
  sem_cf->add_option("--mc-samples", sa.mc_samples)->capture_default_str();
  sem_cf->add_flag("--force-mc", sa.force_mc);
  auto* sem_cs = sem->add_subcommand("correct-scores", "Average a linear score over counterfactual worlds");
  add_sem_source(sem_cs);
  add_regime(sem_cs);
  sem_cs->add_option("--input", sa.input)->required();
  sem_cs->add_option("--weights", sa.weights, "name=coef,... over SEM variables")->required();
  sem_cs->add_option("--intercept", sa.intercept)->capture_default_str();
  sem_cs->add_option("--mc-samples", sa.mc_samples)->capture_default_str();

  MtlArgs ta;
  auto* mtl = app.add_subcommand("mtl", "Fair multitask learning");
  mtl->require_subcommand(1);
  auto add_data = [&](CLI::App* c, const std::string& kind) {
    ta.outcome_kind = kind;
    c->add_option("--input", ta.input)->required();
    c->add_option("--schema", ta.schema)->required();
    c->add_option("--outcome-kind", ta.outcome_kind)->capture_default_str();
  };
  auto* train_rep = mtl->add_subcommand("train-rep", "Shared representation under group-mean constraints");
  add_data(train_rep, "regression");
  train_rep->add_option("--r", ta.r, "Factor count (0: min(d, T))")->capture_default_str();
  train_rep->add_option("--lambda", ta.lambda)->capture_default_str();
  train_rep->add_option("--mode", ta.mode, "none, equality or relaxed")->capture_default_str();
  train_rep->add_option("--rho", ta.rho, "Relaxed penalty weight")->capture_default_str();
  train_rep->add_option("--eps", ta.eps, "Relaxed budget on the mean squared gap");
  train_rep->add_option("--max-iterations", ta.max_iterations)->capture_default_str();
  auto* transfer_cmd = mtl->add_subcommand("transfer", "Ridge regression on a learned representation");
  transfer_cmd->add_option("--model", ta.model)->required();
  transfer_cmd->add_option("--input", ta.input)->required();
  transfer_cmd->add_option("--schema", ta.schema)->required();
  transfer_cmd->add_option("--outcome-kind", ta.outcome_kind)->capture_default_str();
  transfer_cmd->add_option("--lambda", ta.transfer_lambda, "Ridge weight (default: the model's)");
  auto* train_common = mtl->add_subcommand("train-common", "Common-mean MTL with equalized-odds constraints");
  train_common->add_option("--input", ta.input)->required();
  train_common->add_option("--schema", ta.schema)->required();
  train_common->add_option("--outcome-kind", ta.outcome_kind, "classification or regression");
  train_common->add_option("--theta", ta.theta)->capture_default_str();
  train_common->add_option("--lambda", ta.mix)->capture_default_str();
  train_common->add_option("--rho", ta.rho)->capture_default_str();
  train_common->add_option("--loss", ta.loss, "squared or linear")->capture_default_str();
  train_common->add_option("--classes", ta.classes, "Constrained classes: +,- or none")->capture_default_str();
  train_common->add_flag("--predict-sensitive", ta.predict_sensitive, "Group by a learned predictor of s");
  train_common->add_option("--predictor-lambda", ta.predictor_lambda)->capture_default_str();

  auto* datasets = app.add_subcommand("datasets", "Registry of public fairness datasets");
  datasets->require_subcommand(1);
  auto* ds_list = datasets->add_subcommand("list", "All bundled entries");
  std::string ds_name;
  auto* ds_describe = datasets->add_subcommand("describe", "One entry");
  ds_describe->add_option("name", ds_name)->required();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      out << app.help();
      return 0;
    }
    err << "error: " << e.what() << "\n" << app.help();
    return 1;
  }
  if (train_common->parsed() && train_common->count("--outcome-kind") == 0) ta.outcome_kind = "classification";

  const Sink sink(g, out);
  try {
    if (metrics->parsed()) cmd_metrics(ma, sink);
    else if (repair->parsed()) cmd_repair(ra, g, sink);
    else if (ferm_train->parsed()) cmd_ferm_train(fa, g, sink);
    else if (ferm_predict->parsed()) cmd_ferm_predict(pa, sink);
    else if (sem->parsed()) {
      for (auto* c : {sem_sample, sem_fit, sem_pse, sem_cf, sem_cs}) {
        if (c->parsed()) cmd_sem(c->get_name(), sa, g, sink);
      }
    } else if (mtl->parsed()) {
      for (auto* c : {train_rep, transfer_cmd, train_common}) {
        if (c->parsed()) cmd_mtl(c->get_name(), ta, g, sink);
      }
    } else if (ds_list->parsed()) {
      Json list = Json::array();
      for (const auto& d : dataset_registry()) list.push_back(dataset_json(d));
      Json j = header("datasets list");
      j["datasets"] = list;
      emit_json(sink, j);
    } else if (ds_describe->parsed()) {
      Json j = header("datasets describe");
      j["dataset"] = dataset_json(find_dataset(ds_name));
      emit_json(sink, j);
    }
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const SolverError& e) {
    err << "error: " << e.what() << " (residual " << csv::format_double(e.residual()) << " after "
        << e.iterations() << " iterations)\n";
    return 3;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}

int run(int argc, char** argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args, std::cout, std::cerr);
}

}  // namespace fairkit::cli
