#pragma once

#include <string>

#include <Eigen/Core>
#include <json.hpp>

#include "fairkit/causal.hpp"
#include "fairkit/fairmtl.hpp"
#include "fairkit/ferm.hpp"

namespace fairkit {

using Json = nlohmann::json;

inline constexpr int kSchemaVersion = 1;

// Serializes with sorted keys, two-space indent and every real printed with 17
// significant digits; non-finite reals become null.
std::string dump_json(const Json& value);
Json parse_json(const std::string& text);
Json read_json_file(const std::string& path);

Json to_json(const Eigen::VectorXd& v);
Json to_json(const Eigen::MatrixXd& m);  // array of rows
Eigen::VectorXd vector_from_json(const Json& j);
Eigen::MatrixXd matrix_from_json(const Json& j);

Json to_json(const KernelModel& model);
KernelModel kernel_model_from_json(const Json& j);

Json to_json(const LinearSEM& sem);
LinearSEM sem_from_json(const Json& j);

Json to_json(const RepresentationModel& model);
RepresentationModel representation_from_json(const Json& j);

Json to_json(const SensitivePredictor& g);
SensitivePredictor sensitive_predictor_from_json(const Json& j);

Json to_json(const CommonMeanModel& model);
CommonMeanModel common_mean_from_json(const Json& j);

}  // namespace fairkit
