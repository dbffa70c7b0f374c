#pragma once

// JSON documents written by the CLI: fits with their run manifest, simulation
// truth and evaluation metrics. Matrices are objects {rows, cols, data} with
// row-major data; doubles use shortest round-trip formatting.

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include "json.hpp"

#include "bfpca/orchestrator.hpp"
#include "bfpca/postprocess.hpp"

namespace bfpca::cli {

using nlohmann::json;

json to_json(const Eigen::MatrixXd& m);
Eigen::MatrixXd matrix_from_json(const json& j, const char* name);
json vector_to_json(const Eigen::VectorXd& v);
Eigen::VectorXd vector_from_json(const json& j, const char* name);

// Affine map t -> (t - offset) / scale applied to every observation time.
struct TimeRescale {
  double offset = 0.0;
  double scale = 1.0;

  bool operator==(const TimeRescale&) const = default;
};

struct RunManifest {
  FitConfig config;
  std::optional<TimeRescale> rescale;
  std::string dataset;  // path as given on the command line
  int iterations = 0;
  double final_metric = 0.0;
  bool converged = false;
  double wall_seconds = 0.0;
  std::string version;
};

json to_json(const FitConfig& config);
// Missing keys keep their defaults; the result is validated.
FitConfig config_from_json(const json& j);
json to_json(const RunManifest& manifest);
RunManifest manifest_from_json(const json& j);

struct FitDocument {
  FpcaFit fit;
  std::vector<std::string> curve_ids;
  RunManifest manifest;
};

json to_json(const FitDocument& doc);
FitDocument fit_from_json(const json& j);

struct TruthDocument {
  Eigen::VectorXd grid;
  Eigen::VectorXd mu;
  Eigen::MatrixXd psi;     // n_g x 2
  Eigen::MatrixXd scores;  // n x 2
  Eigen::Vector2d score_var{1.0, 0.25};
  double noise_var = 1.0;
  std::uint64_t seed = 0;
};

json to_json(const TruthDocument& truth);
TruthDocument truth_from_json(const json& j);

// Throws IoError when the file cannot be read or written and ValidationError
// when it is not valid JSON.
json read_json(const std::string& path);
void write_json(const json& j, const std::string& path);

}  // namespace bfpca::cli
