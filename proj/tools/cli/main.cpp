#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <spdlog/cfg/env.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "CLI11.hpp"
#include "commands.hpp"

namespace {

using bfpca::cli::FitOverrides;

template <typename T>
void optional_flag(CLI::App& app, const std::string& name, std::optional<T>& target, const std::string& help) {
  app.add_option_function<T>(name, [&target](const T& value) { target = value; }, help);
}

void add_fit_flags(CLI::App& app, FitOverrides& o) {
  optional_flag(app, "--num-eigen", o.num_eigen, "number of eigenfunctions L (default 3)");
  optional_flag(app, "--num-splines", o.num_splines, "spline basis size K (default 10)");
  optional_flag(app, "--tol", o.tol, "convergence tolerance (default 1e-5)");
  optional_flag(app, "--max-iter", o.max_iter, "iteration cap (default 5000)");
  optional_flag(app, "--grid-size", o.grid_size, "evaluation grid size n_g >= 101 (default 1001)");
  optional_flag(app, "--hyper-a-eps", o.a_eps, "half-Cauchy scale for the noise variance (default 1e5)");
  optional_flag(app, "--hyper-a-mu", o.a_mu, "half-Cauchy scale for the mean smoothing variance (default 1e5)");
  optional_flag(app, "--hyper-a-psi", o.a_psi,
                "half-Cauchy scale for the eigenfunction smoothing variances (default 1e5)");
  optional_flag(app, "--prior-beta-var", o.prior_beta_var,
                "prior variance of the linear coefficients (default 1e10)");
}

}  // namespace

int main(int argc, char** argv) {
  spdlog::set_default_logger(spdlog::stderr_color_mt("bfpca"));
  spdlog::set_pattern("[%l] %v");
  spdlog::cfg::load_env_levels();

  CLI::App app{"Bayesian functional principal components analysis by variational message passing"};
  app.set_version_flag("--version", bfpca::cli::version());
  app.require_subcommand(1);

  bfpca::cli::SimulateOptions sim;
  CLI::App* simulate = app.add_subcommand("simulate", "generate a synthetic dataset and its ground truth");
  simulate->add_option("--n", sim.n, "number of curves")->capture_default_str();
  simulate->add_option("--t-min", sim.t_min, "minimum observations per curve")->capture_default_str();
  simulate->add_option("--t-max", sim.t_max, "maximum observations per curve")->capture_default_str();
  simulate->add_option("--noise-var", sim.noise_var, "noise variance")->capture_default_str();
  simulate->add_option("--seed", sim.seed, "random seed")->capture_default_str();
  simulate->add_option("--grid-size", sim.grid_size, "truth grid size")->capture_default_str();
  simulate->add_option("--out", sim.out_dir, "output directory (data.csv, truth.json)")->required();

  bfpca::cli::FitOptions fit;
  CLI::App* fit_cmd = app.add_subcommand("fit", "fit a dataset CSV");
  fit_cmd->add_option("data", fit.data_path, "dataset CSV with header curve_id,t,y")->required();
  fit_cmd->add_option("--out", fit.out_path, "fit JSON path")->required();
  add_fit_flags(*fit_cmd, fit.overrides);
  optional_flag(*fit_cmd, "--seed", fit.overrides.seed, "initialisation seed (default 1)");
  optional_flag(*fit_cmd, "--from-manifest", fit.manifest_path, "reuse the configuration of a fit JSON or manifest");
  optional_flag(*fit_cmd, "--export-csv", fit.export_csv, "write long-format series,t,value plot data");
  fit_cmd->add_flag("--rescale-time", fit.rescale_time, "map observation times affinely onto [0, 1]");

  bfpca::cli::EvalOptions eval;
  bfpca::cli::StudyOptions study;
  bool study_mode = false;
  CLI::App* eval_cmd = app.add_subcommand("eval", "score a fit against ground truth, or run a simulation study");
  eval_cmd->add_option("--fit", eval.fit_path, "fit JSON");
  eval_cmd->add_option("--truth", eval.truth_path, "truth JSON from simulate");
  eval_cmd->add_option("--out", eval.out_path, "output path (JSON, or CSV in study mode); default stdout");
  eval_cmd->add_flag("--study", study_mode, "simulate, fit and score replicates across sample sizes");
  eval_cmd->add_option("--replicates", study.replicates, "study replicates per n")->capture_default_str();
  eval_cmd->add_option("--n-grid", study.n_grid, "study sample sizes")->delimiter(',')->capture_default_str();
  eval_cmd->add_option("--seed", study.seed, "study base seed; replicate r uses seed + r")->capture_default_str();
  eval_cmd->add_option("--workers", study.workers, "study worker threads (0: all cores)")->capture_default_str();
  add_fit_flags(*eval_cmd, study.overrides);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return bfpca::cli::kExitValidation;
  }

  if (simulate->parsed()) return bfpca::cli::cmd_simulate(sim);
  if (fit_cmd->parsed()) return bfpca::cli::cmd_fit(fit);
  if (study_mode) {
    study.out_path = eval.out_path;
    return bfpca::cli::cmd_study(study);
  }
  if (eval.fit_path.empty() || eval.truth_path.empty()) {
    spdlog::error("validation: eval needs --fit and --truth (or --study)");
    return bfpca::cli::kExitValidation;
  }
  return bfpca::cli::cmd_eval(eval);
}
