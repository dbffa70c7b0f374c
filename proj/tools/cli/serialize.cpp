#include "serialize.hpp"

#include <fstream>

#include "bfpca/errors.hpp"

namespace bfpca::cli {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

const json& field(const json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) throw ValidationError(std::string("missing field '") + key + "'");
  return j.at(key);
}

template <typename T>
T get(const json& j, const char* key) {
  try {
    return field(j, key).get<T>();
  } catch (const json::exception& e) {
    throw ValidationError(std::string("field '") + key + "': " + e.what());
  }
}

template <typename T>
void get_if(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = get<T>(j, key);
}

}  // namespace

json to_json(const MatrixXd& m) {
  json data = json::array();
  for (Index r = 0; r < m.rows(); ++r) {
    for (Index c = 0; c < m.cols(); ++c) data.push_back(m(r, c));
  }
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::move(data)}};
}

MatrixXd matrix_from_json(const json& j, const char* name) {
  try {
    const Index rows = j.at("rows").get<Index>();
    const Index cols = j.at("cols").get<Index>();
    const json& data = j.at("data");
    if (rows < 0 || cols < 0 || !data.is_array() || static_cast<Index>(data.size()) != rows * cols) {
      throw ValidationError(std::string(name) + ": data length does not match rows * cols");
    }
    MatrixXd m(rows, cols);
    for (Index r = 0; r < rows; ++r) {
      for (Index c = 0; c < cols; ++c) m(r, c) = data[static_cast<std::size_t>(r * cols + c)].get<double>();
    }
    return m;
  } catch (const json::exception& e) {
    throw ValidationError(std::string(name) + ": " + e.what());
  }
}

json vector_to_json(const VectorXd& v) { return json(std::vector<double>(v.data(), v.data() + v.size())); }

VectorXd vector_from_json(const json& j, const char* name) {
  try {
    const std::vector<double> values = j.get<std::vector<double>>();
    return Eigen::Map<const VectorXd>(values.data(), static_cast<Index>(values.size()));
  } catch (const json::exception& e) {
    throw ValidationError(std::string(name) + ": " + e.what());
  }
}

json to_json(const FitConfig& config) {
  const Hyperparameters& h = config.hyper;
  return {
      {"num_eigen", config.num_eigen},
      {"num_splines", config.num_splines},
      {"tol", config.tol},
      {"max_iter", config.max_iter},
      {"grid_size", config.grid_size},
      {"seed", config.seed},
      {"hyper",
       {{"mu_beta", {h.mu_beta(0), h.mu_beta(1)}},
        {"sigma_beta_var", h.sigma_beta_var},
        {"a_eps", h.a_eps},
        {"a_mu", h.a_mu},
        {"a_psi", h.a_psi},
        {"sigma_zeta_var", h.sigma_zeta_var}}},
  };
}

FitConfig config_from_json(const json& j) {
  FitConfig config;
  get_if(j, "num_eigen", config.num_eigen);
  get_if(j, "num_splines", config.num_splines);
  get_if(j, "tol", config.tol);
  get_if(j, "max_iter", config.max_iter);
  get_if(j, "grid_size", config.grid_size);
  get_if(j, "seed", config.seed);
  if (j.contains("hyper")) {
    const json& h = j.at("hyper");
    Hyperparameters& out = config.hyper;
    if (h.contains("mu_beta")) {
      const VectorXd mu = vector_from_json(h.at("mu_beta"), "hyper.mu_beta");
      if (mu.size() != 2) throw ValidationError("hyper.mu_beta must have 2 entries");
      out.mu_beta = mu;
    }
    get_if(h, "sigma_beta_var", out.sigma_beta_var);
    get_if(h, "a_eps", out.a_eps);
    get_if(h, "a_mu", out.a_mu);
    get_if(h, "a_psi", out.a_psi);
    get_if(h, "sigma_zeta_var", out.sigma_zeta_var);
  }
  config.validate();
  return config;
}

json to_json(const RunManifest& manifest) {
  json j = {
      {"config", to_json(manifest.config)},
      {"seed", manifest.config.seed},
      {"dataset", manifest.dataset},
      {"iterations", manifest.iterations},
      {"final_metric", manifest.final_metric},
      {"converged", manifest.converged},
      {"wall_seconds", manifest.wall_seconds},
      {"version", manifest.version},
      {"rescale_time", nullptr},
  };
  if (manifest.rescale) {
    j["rescale_time"] = {{"offset", manifest.rescale->offset}, {"scale", manifest.rescale->scale}};
  }
  return j;
}

RunManifest manifest_from_json(const json& j) {
  RunManifest m;
  m.config = config_from_json(field(j, "config"));
  get_if(j, "dataset", m.dataset);
  get_if(j, "iterations", m.iterations);
  get_if(j, "final_metric", m.final_metric);
  get_if(j, "converged", m.converged);
  get_if(j, "wall_seconds", m.wall_seconds);
  get_if(j, "version", m.version);
  if (j.contains("rescale_time") && !j.at("rescale_time").is_null()) {
    const json& r = j.at("rescale_time");
    m.rescale = TimeRescale{get<double>(r, "offset"), get<double>(r, "scale")};
    if (!(m.rescale->scale > 0.0)) throw ValidationError("rescale_time.scale must be positive");
  }
  return m;
}

json to_json(const FitDocument& doc) {
  const FpcaFit& fit = doc.fit;
  json covs = json::array();
  for (const MatrixXd& c : fit.score_covariances) covs.push_back(to_json(c));
  return {
      {"format", "bfpca-fit"},
      {"curve_ids", doc.curve_ids},
      {"grid", vector_to_json(fit.grid)},
      {"mu", vector_to_json(fit.mu)},
      {"psi", to_json(fit.psi)},
      {"scores", to_json(fit.scores)},
      {"score_covariances", std::move(covs)},
      {"eigenvalues", vector_to_json(fit.eigenvalues)},
      {"rank", fit.rank},
      {"recip_sigsq_eps", fit.recip_sigsq_eps},
      {"sigsq_eps", 1.0 / fit.recip_sigsq_eps},
      {"score_map", to_json(fit.score_map)},
      {"score_shift", vector_to_json(fit.score_shift)},
      {"manifest", to_json(doc.manifest)},
  };
}

FitDocument fit_from_json(const json& j) {
  if (!j.is_object() || j.value("format", std::string()) != "bfpca-fit") {
    throw ValidationError("not a bfpca fit document");
  }
  FitDocument doc;
  FpcaFit& fit = doc.fit;
  doc.curve_ids = get<std::vector<std::string>>(j, "curve_ids");
  fit.grid = vector_from_json(field(j, "grid"), "grid");
  fit.mu = vector_from_json(field(j, "mu"), "mu");
  fit.psi = matrix_from_json(field(j, "psi"), "psi");
  fit.scores = matrix_from_json(field(j, "scores"), "scores");
  for (const json& c : field(j, "score_covariances")) {
    fit.score_covariances.push_back(matrix_from_json(c, "score_covariances"));
  }
  fit.eigenvalues = vector_from_json(field(j, "eigenvalues"), "eigenvalues");
  fit.rank = get<Index>(j, "rank");
  fit.recip_sigsq_eps = get<double>(j, "recip_sigsq_eps");
  fit.score_map = matrix_from_json(field(j, "score_map"), "score_map");
  fit.score_shift = vector_from_json(field(j, "score_shift"), "score_shift");
  doc.manifest = manifest_from_json(field(j, "manifest"));

  const Index n_g = fit.grid.size();
  const Index l = fit.psi.cols();
  if (fit.mu.size() != n_g || fit.psi.rows() != n_g || fit.scores.cols() != l || fit.eigenvalues.size() != l ||
      static_cast<std::size_t>(fit.scores.rows()) != doc.curve_ids.size()) {
    throw ValidationError("fit document has inconsistent array shapes");
  }
  return doc;
}

json to_json(const TruthDocument& truth) {
  return {
      {"format", "bfpca-truth"},
      {"grid", vector_to_json(truth.grid)},
      {"mu", vector_to_json(truth.mu)},
      {"psi", to_json(truth.psi)},
      {"scores", to_json(truth.scores)},
      {"score_var", {truth.score_var(0), truth.score_var(1)}},
      {"noise_var", truth.noise_var},
      {"seed", truth.seed},
  };
}

TruthDocument truth_from_json(const json& j) {
  if (!j.is_object() || j.value("format", std::string()) != "bfpca-truth") {
    throw ValidationError("not a bfpca truth document");
  }
  TruthDocument truth;
  truth.grid = vector_from_json(field(j, "grid"), "grid");
  truth.mu = vector_from_json(field(j, "mu"), "mu");
  truth.psi = matrix_from_json(field(j, "psi"), "psi");
  truth.scores = matrix_from_json(field(j, "scores"), "scores");
  const VectorXd var = vector_from_json(field(j, "score_var"), "score_var");
  if (var.size() != 2) throw ValidationError("score_var must have 2 entries");
  truth.score_var = var;
  truth.noise_var = get<double>(j, "noise_var");
  truth.seed = get<std::uint64_t>(j, "seed");
  if (truth.mu.size() != truth.grid.size() || truth.psi.rows() != truth.grid.size() || truth.grid.size() < 2) {
    throw ValidationError("truth document has inconsistent array shapes");
  }
  return truth;
}

json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ValidationError(path + ": " + e.what());
  }
}

void write_json(const json& j, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path + "'");
  out << j.dump(2) << '\n';
  if (!out) throw IoError("write to '" + path + "' failed");
}

}  // namespace bfpca::cli
