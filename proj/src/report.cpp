#include "fairkit/report.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "fairkit/error.hpp"

namespace fairkit {

namespace {

void write(const Json& v, std::string& out, int depth) {
  const std::string pad(static_cast<std::size_t>(2 * (depth + 1)), ' ');
  const std::string close(static_cast<std::size_t>(2 * depth), ' ');
  switch (v.type()) {
    case Json::value_t::object: {
      if (v.empty()) {
        out += "{}";
        return;
      }
      out += "{\n";
      bool first = true;
      for (auto it = v.begin(); it != v.end(); ++it) {
        if (!first) out += ",\n";
        first = false;
        out += pad + Json(it.key()).dump() + ": ";
        write(it.value(), out, depth + 1);
      }
      out += "\n" + close + "}";
      return;
    }
    case Json::value_t::array: {
      if (v.empty()) {
        out += "[]";
        return;
      }
      // Arrays of scalars stay on one line.
      bool flat = true;
      for (const auto& e : v) flat = flat && !e.is_structured();
      out += flat ? "[" : "[\n";
      for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += flat ? ", " : ",\n";
        if (!flat) out += pad;
        write(v[i], out, depth + 1);
      }
      out += flat ? "]" : "\n" + close + "]";
      return;
    }
    case Json::value_t::number_float: {
      const double x = v.get<double>();
      if (!std::isfinite(x)) {
        out += "null";
        return;
      }
      char buf[32];
      std::snprintf(buf, sizeof buf, "%.17g", x);
      out += buf;
      return;
    }
    default:
      out += v.dump();
  }
}

template <class F>
auto guarded(const char* what, F&& f) {
  try {
    return f();
  } catch (const Json::exception& e) {
    throw DataError(std::string("invalid ") + what + " JSON: " + e.what());
  }
}

double real(const Json& j) { return j.is_null() ? std::nan("") : j.get<double>(); }

}  // namespace

std::string dump_json(const Json& value) {
  std::string out;
  write(value, out, 0);
  out += "\n";
  return out;
}

Json parse_json(const std::string& text) {
  try {
    return Json::parse(text);
  } catch (const Json::exception& e) {
    throw DataError(std::string("malformed JSON: ") + e.what());
  }
}

Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_json(ss.str());
}

Json to_json(const Eigen::VectorXd& v) {
  Json out = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

Json to_json(const Eigen::MatrixXd& m) {
  Json out = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) out.push_back(to_json(Eigen::VectorXd(m.row(i).transpose())));
  return out;
}

Eigen::VectorXd vector_from_json(const Json& j) {
  return guarded("vector", [&] {
    Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = real(j.at(i));
    return v;
  });
}

Eigen::MatrixXd matrix_from_json(const Json& j) {
  return guarded("matrix", [&] {
    if (!j.is_array()) throw DataError("matrix must be an array of rows");
    const std::size_t rows = j.size();
    const std::size_t cols = rows ? j.at(0).size() : 0;
    Eigen::MatrixXd m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (std::size_t i = 0; i < rows; ++i) {
      if (j.at(i).size() != cols) throw DataError("matrix rows have different lengths");
      for (std::size_t c = 0; c < cols; ++c) {
        m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = real(j.at(i).at(c));
      }
    }
    return m;
  });
}

Json to_json(const KernelModel& model) {
  Json pairs = Json::array();
  for (const auto& p : model.constraints.pairs) pairs.push_back({p[0], p[1], p[2]});
  return {
      {"kind", "gferm_model"},
      {"schema_version", kSchemaVersion},
      {"kernel", {{"kind", std::string(to_string(model.kernel.kind))}, {"gamma", model.kernel.gamma}}},
      {"include_sensitive", model.include_sensitive},
      {"alpha", to_json(model.alpha)},
      {"training", to_json(model.training)},
      {"objective", model.objective},
      {"iterations", model.iterations},
      {"constraints",
       {{"values", model.constraints.values},
        {"l1", model.constraints.l1},
        {"epsilon", model.constraints.epsilon},
        {"degenerate", model.constraints.degenerate},
        {"pairs", pairs}}},
  };
}

KernelModel kernel_model_from_json(const Json& j) {
  return guarded("model", [&] {
    if (j.value("kind", "") != "gferm_model") throw DataError("not a G-FERM model file");
    KernelModel m;
    m.kernel.kind = parse_kernel_kind(j.at("kernel").at("kind").get<std::string>());
    m.kernel.gamma = j.at("kernel").at("gamma").get<double>();
    m.include_sensitive = j.at("include_sensitive").get<bool>();
    m.alpha = vector_from_json(j.at("alpha"));
    m.training = matrix_from_json(j.at("training"));
    m.objective = real(j.at("objective"));
    m.iterations = j.at("iterations").get<int>();
    const auto& c = j.at("constraints");
    for (const auto& v : c.at("values")) m.constraints.values.push_back(real(v));
    m.constraints.l1 = real(c.at("l1"));
    m.constraints.epsilon = c.at("epsilon").is_null() ? std::numeric_limits<double>::infinity()
                                                      : c.at("epsilon").get<double>();
    m.constraints.degenerate = c.at("degenerate").get<bool>();
    for (const auto& p : c.at("pairs")) m.constraints.pairs.push_back({p.at(0), p.at(1), p.at(2)});
    if (m.alpha.size() != m.training.rows()) throw DataError("model alpha and training rows differ");
    return m;
  });
}

Json to_json(const LinearSEM& sem) {
  Json vars = Json::array();
  for (const auto& v : sem.variables) {
    vars.push_back({{"name", v.name},
                    {"intercept", v.intercept},
                    {"noise_std", v.noise_std},
                    {"observed", v.observed},
                    {"binary", v.binary}});
  }
  Json edges = Json::array();
  for (const auto& e : sem.edges) {
    edges.push_back({{"from", e.from},
                     {"to", e.to},
                     {"coef", e.coef},
                     {"label", e.label == EdgeLabel::fair ? "fair" : "unfair"}});
  }
  return {{"kind", "linear_sem"},
          {"schema_version", kSchemaVersion},
          {"variables", vars},
          {"edges", edges},
          {"sensitive", sem.sensitive},
          {"target", sem.target},
          {"pi", sem.pi},
          {"sensitive_values", {sem.sensitive_values[0], sem.sensitive_values[1]}}};
}

LinearSEM sem_from_json(const Json& j) {
  return guarded("SEM", [&] {
    if (j.value("kind", "") != "linear_sem") throw DataError("not a linear SEM file");
    LinearSEM sem;
    for (const auto& v : j.at("variables")) {
      Variable var;
      var.name = v.at("name").get<std::string>();
      var.intercept = v.value("intercept", 0.0);
      var.noise_std = v.value("noise_std", 1.0);
      var.observed = v.value("observed", true);
      var.binary = v.value("binary", false);
      sem.variables.push_back(var);
    }
    for (const auto& e : j.at("edges")) {
      Edge edge;
      edge.from = e.at("from").get<std::string>();
      edge.to = e.at("to").get<std::string>();
      edge.coef = e.at("coef").get<double>();
      const std::string label = e.value("label", "fair");
      if (label != "fair" && label != "unfair") throw DataError("edge label must be fair or unfair");
      edge.label = label == "fair" ? EdgeLabel::fair : EdgeLabel::unfair;
      sem.edges.push_back(edge);
    }
    sem.sensitive = j.at("sensitive").get<std::string>();
    sem.target = j.at("target").get<std::string>();
    sem.pi = j.value("pi", 0.5);
    if (j.contains("sensitive_values")) {
      sem.sensitive_values = {j.at("sensitive_values").at(0).get<double>(),
                              j.at("sensitive_values").at(1).get<double>()};
    }
    try {
      sem.validate();
    } catch (const UsageError& e) {
      throw DataError(std::string("invalid SEM: ") + e.what());
    }
    return sem;
  });
}

Json to_json(const RepresentationModel& model) {
  Json out = {{"kind", "fair_representation"},
              {"schema_version", kSchemaVersion},
              {"a", to_json(model.a)},
              {"b", to_json(model.b)},
              {"gaps", to_json(model.gaps)},
              {"lambda", model.lambda},
              {"mode", std::string(to_string(model.mode))},
              {"rho", model.rho},
              {"iterations", model.iterations},
              {"converged", model.converged},
              {"objective_trace", model.objective_trace},
              {"constraint_residuals", model.constraint_residuals()}};
  out["epsilon"] = model.epsilon ? Json(*model.epsilon) : Json(nullptr);
  if (!model.warning.empty()) out["warning"] = model.warning;
  return out;
}

RepresentationModel representation_from_json(const Json& j) {
  return guarded("representation", [&] {
    if (j.value("kind", "") != "fair_representation") throw DataError("not a representation model file");
    RepresentationModel m;
    m.a = matrix_from_json(j.at("a"));
    m.b = matrix_from_json(j.at("b"));
    m.gaps = matrix_from_json(j.at("gaps"));
    m.lambda = j.at("lambda").get<double>();
    m.mode = parse_constraint_mode(j.at("mode").get<std::string>());
    m.rho = j.value("rho", 0.0);
    if (j.contains("epsilon") && !j.at("epsilon").is_null()) m.epsilon = j.at("epsilon").get<double>();
    m.iterations = j.value("iterations", 0);
    m.converged = j.value("converged", false);
    for (const auto& v : j.value("objective_trace", Json::array())) m.objective_trace.push_back(real(v));
    m.warning = j.value("warning", "");
    return m;
  });
}

Json to_json(const SensitivePredictor& g) {
  return {{"groups", g.groups},
          {"coef", to_json(g.coef)},
          {"held_out_accuracy", g.held_out_accuracy},
          {"majority_rate", g.majority_rate},
          {"train_size", g.train_size},
          {"test_size", g.test_size}};
}

SensitivePredictor sensitive_predictor_from_json(const Json& j) {
  return guarded("predictor", [&] {
    SensitivePredictor g;
    g.groups = j.at("groups").get<int>();
    g.coef = matrix_from_json(j.at("coef"));
    g.held_out_accuracy = real(j.at("held_out_accuracy"));
    g.majority_rate = real(j.at("majority_rate"));
    g.train_size = j.at("train_size").get<std::size_t>();
    g.test_size = j.at("test_size").get<std::size_t>();
    return g;
  });
}

Json to_json(const CommonMeanModel& model) {
  auto vectors = [](const std::vector<Eigen::VectorXd>& vs) {
    Json out = Json::array();
    for (const auto& v : vs) out.push_back(to_json(v));
    return out;
  };
  Json out = {{"kind", "common_mean_model"},
              {"schema_version", kSchemaVersion},
              {"w0", to_json(model.w0)},
              {"v", vectors(model.v)},
              {"theta", model.theta},
              {"lambda", model.lambda},
              {"rho", model.rho},
              {"loss", std::string(to_string(model.loss))},
              {"u_positive", vectors(model.u_positive)},
              {"u_negative", vectors(model.u_negative)},
              {"constrain_positive", model.constrain_positive},
              {"constrain_negative", model.constrain_negative},
              {"objective", model.objective},
              {"constraint_residuals", model.constraint_residuals()}};
  out["predictor"] = model.predictor ? to_json(*model.predictor) : Json(nullptr);
  return out;
}

CommonMeanModel common_mean_from_json(const Json& j) {
  return guarded("common-mean model", [&] {
    if (j.value("kind", "") != "common_mean_model") throw DataError("not a common-mean model file");
    auto vectors = [](const Json& a) {
      std::vector<Eigen::VectorXd> out;
      for (const auto& v : a) out.push_back(vector_from_json(v));
      return out;
    };
    CommonMeanModel m;
    m.w0 = vector_from_json(j.at("w0"));
    m.v = vectors(j.at("v"));
    m.theta = j.at("theta").get<double>();
    m.lambda = j.at("lambda").get<double>();
    m.rho = j.at("rho").get<double>();
    m.loss = parse_mtl_loss(j.at("loss").get<std::string>());
    m.u_positive = vectors(j.at("u_positive"));
    m.u_negative = vectors(j.at("u_negative"));
    m.constrain_positive = j.at("constrain_positive").get<bool>();
    m.constrain_negative = j.at("constrain_negative").get<bool>();
    m.objective = real(j.at("objective"));
    if (!j.at("predictor").is_null()) m.predictor = sensitive_predictor_from_json(j.at("predictor"));
    return m;
  });
}

}  // namespace fairkit
