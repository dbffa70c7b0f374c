#pragma once

// The three CLI commands as callable functions. Each returns a process exit
// code and never lets a library error escape.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "bfpca/dataset.hpp"
#include "bfpca/orchestrator.hpp"
#include "bfpca/postprocess.hpp"
#include "serialize.hpp"

namespace bfpca::cli {

enum ExitCode : int {
  kExitOk = 0,
  kExitFailure = 1,
  kExitValidation = 2,
  kExitIo = 3,
  kExitNotConverged = 4,
  kExitDegenerate = 5,
};

// Maps the active exception to an exit code and logs it. Call from a catch
// block only.
int exit_code_for_current_exception();

std::string version();

// ---------------------------------------------------------------------------
// simulate

struct SimulateOptions {
  int n = 36;
  int t_min = 20;
  int t_max = 30;
  double noise_var = 1.0;
  std::uint64_t seed = 1;
  int grid_size = 1001;
  std::string out_dir;  // receives data.csv and truth.json
};

int cmd_simulate(const SimulateOptions& options);

// ---------------------------------------------------------------------------
// fit

// Flags given explicitly on the command line; they take precedence over a
// manifest, which takes precedence over the defaults.
struct FitOverrides {
  std::optional<int> num_eigen;
  std::optional<int> num_splines;
  std::optional<double> tol;
  std::optional<int> max_iter;
  std::optional<int> grid_size;
  std::optional<std::uint64_t> seed;
  std::optional<double> a_eps;
  std::optional<double> a_mu;
  std::optional<double> a_psi;
  std::optional<double> prior_beta_var;
};

FitConfig resolve_config(const FitOverrides& overrides, const std::optional<RunManifest>& manifest);

struct FitOptions {
  std::string data_path;
  std::string out_path;
  FitOverrides overrides;
  std::optional<std::string> manifest_path;  // a fit JSON or a bare manifest
  std::optional<std::string> export_csv;
  bool rescale_time = false;
};

int cmd_fit(const FitOptions& options);

// Maps all times affinely onto [0, 1]. Throws ValidationError when every
// time is equal.
TimeRescale fit_time_rescale(const FunctionalDataset& data);
FunctionalDataset apply_time_rescale(FunctionalDataset data, const TimeRescale& rescale);

// VMP, post-processing and manifest for one dataset. Degenerate fits throw.
FitDocument fit_dataset(const FunctionalDataset& data, const FitConfig& config);

// ---------------------------------------------------------------------------
// eval

struct EvalMetrics {
  double ise_mu = 0.0;
  Eigen::VectorXd ise_psi;  // one entry per truth eigenfunction matched by the fit
  Eigen::VectorXd eigenvalues;
  double sigsq_eps = 0.0;
  bool resampled = false;  // truth was interpolated onto the fit grid
};

// Sign-aligns the fit to the truth and computes ISEs on the fit grid.
EvalMetrics evaluate(const FpcaFit& fit, const TruthDocument& truth);
json to_json(const EvalMetrics& metrics);

// Linear interpolation of the columns of `values` (sampled on `from`) onto
// `to`. Both grids ascending.
Eigen::MatrixXd interpolate(const Eigen::VectorXd& from, const Eigen::MatrixXd& values, const Eigen::VectorXd& to);

struct EvalOptions {
  std::string fit_path;
  std::string truth_path;
  std::string out_path;  // empty: stdout
};

int cmd_eval(const EvalOptions& options);

// Simulation study: replicates x n_grid simulate -> fit -> eval runs.
struct StudyOptions {
  int replicates = 20;
  std::vector<int> n_grid{10, 50, 100};
  std::uint64_t seed = 1;  // replicate r uses seed + r
  int t_min = 20;
  int t_max = 30;
  double noise_var = 1.0;
  FitOverrides overrides;
  int workers = 0;  // 0: hardware concurrency
  std::string out_path;  // CSV; empty: stdout
};

struct StudyRow {
  int replicate = 0;
  int n = 0;
  std::uint64_t seed = 0;
  std::string status;  // converged | max_iter | degenerate
  int iterations = 0;
  EvalMetrics metrics;
};

// Rows ordered by (replicate, n) regardless of worker scheduling.
std::vector<StudyRow> run_study(const StudyOptions& options);
void write_study_csv(const std::vector<StudyRow>& rows, int num_eigen, std::ostream& out);

int cmd_study(const StudyOptions& options);

}  // namespace bfpca::cli
