#include "commands.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <mutex>
#include <thread>

#include <spdlog/spdlog.h>

#include "bfpca/errors.hpp"
#include "bfpca/quadrature.hpp"
#include "bfpca/simulate.hpp"
#include "csv_io.hpp"

#ifndef BFPCA_VERSION
#define BFPCA_VERSION "unknown"
#endif

namespace bfpca::cli {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

int exit_code_for_current_exception() {
  try {
    throw;
  } catch (const ValidationError& e) {
    spdlog::error("validation: {}", e.what());
    return kExitValidation;
  } catch (const IoError& e) {
    spdlog::error("i/o: {}", e.what());
    return kExitIo;
  } catch (const DegenerateError& e) {
    spdlog::error("degenerate: {}", e.what());
    return kExitDegenerate;
  } catch (const RankError& e) {
    spdlog::error("degenerate: {}", e.what());
    return kExitDegenerate;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return kExitFailure;
  }
}

std::string version() { return BFPCA_VERSION; }

// ---------------------------------------------------------------------------
// simulate

int cmd_simulate(const SimulateOptions& options) {
  try {
    if (options.out_dir.empty()) throw ValidationError("--out is required");
    if (options.grid_size < 101) throw ValidationError("grid size must be >= 101");
    SimConfig config;
    config.n = options.n;
    config.t_min = options.t_min;
    config.t_max = options.t_max;
    config.noise_var = options.noise_var;
    config.seed = options.seed;
    const SimResult sim = generate(config);

    std::error_code ec;
    std::filesystem::create_directories(options.out_dir, ec);
    if (ec) throw IoError("cannot create '" + options.out_dir + "': " + ec.message());
    const std::filesystem::path dir(options.out_dir);

    TruthDocument truth;
    truth.grid = unit_grid(options.grid_size);
    truth.mu = true_mean(truth.grid);
    truth.psi = true_eigenfunctions(truth.grid);
    truth.scores = sim.scores;
    truth.score_var = config.score_var;
    truth.noise_var = config.noise_var;
    truth.seed = config.seed;

    write_dataset_csv(sim.data, (dir / "data.csv").string());
    write_json(to_json(truth), (dir / "truth.json").string());
    spdlog::info("simulated {} curves, {} observations -> {}", sim.data.size(), sim.data.total_observations(),
                 options.out_dir);
    return kExitOk;
  } catch (...) {
    return exit_code_for_current_exception();
  }
}

// ---------------------------------------------------------------------------
// fit

FitConfig resolve_config(const FitOverrides& o, const std::optional<RunManifest>& manifest) {
  FitConfig config = manifest ? manifest->config : FitConfig{};
  if (o.num_eigen) config.num_eigen = *o.num_eigen;
  if (o.num_splines) config.num_splines = *o.num_splines;
  if (o.tol) config.tol = *o.tol;
  if (o.max_iter) config.max_iter = *o.max_iter;
  if (o.grid_size) config.grid_size = *o.grid_size;
  if (o.seed) config.seed = *o.seed;
  if (o.a_eps) config.hyper.a_eps = *o.a_eps;
  if (o.a_mu) config.hyper.a_mu = *o.a_mu;
  if (o.a_psi) config.hyper.a_psi = *o.a_psi;
  if (o.prior_beta_var) config.hyper.sigma_beta_var = *o.prior_beta_var;
  config.validate();
  return config;
}

TimeRescale fit_time_rescale(const FunctionalDataset& data) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (const Curve& c : data.curves) {
    if (c.t.size() == 0) continue;
    lo = std::min(lo, c.t.minCoeff());
    hi = std::max(hi, c.t.maxCoeff());
  }
  if (!std::isfinite(lo) || !std::isfinite(hi) || !(hi > lo)) {
    throw ValidationError("--rescale-time needs at least two distinct finite times");
  }
  return {lo, hi - lo};
}

FunctionalDataset apply_time_rescale(FunctionalDataset data, const TimeRescale& rescale) {
  for (Curve& c : data.curves) {
    c.t = ((c.t.array() - rescale.offset) / rescale.scale).matrix();
  }
  return data;
}

FitDocument fit_dataset(const FunctionalDataset& data, const FitConfig& config) {
  const auto start = std::chrono::steady_clock::now();
  const VmpEngine engine(data, config);
  VmpState state = engine.initialize();
  engine.run(state);
  FitDocument doc;
  doc.fit = postprocess(state.store, engine.basis(), config.grid_size);
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  doc.curve_ids.reserve(data.size());
  for (const Curve& c : data.curves) doc.curve_ids.push_back(c.id);
  RunManifest& m = doc.manifest;
  m.config = config;
  m.iterations = state.iterations;
  m.final_metric = state.history.empty() ? 0.0 : state.history.back();
  m.converged = state.converged;
  m.wall_seconds = seconds;
  m.version = version();
  return doc;
}

namespace {

RunManifest load_manifest(const std::string& path) {
  const json j = read_json(path);
  return manifest_from_json(j.contains("manifest") ? j.at("manifest") : j);
}

}  // namespace

int cmd_fit(const FitOptions& options) {
  try {
    if (options.out_path.empty()) throw ValidationError("--out is required");
    std::optional<RunManifest> manifest;
    if (options.manifest_path) manifest = load_manifest(*options.manifest_path);
    const FitConfig config = resolve_config(options.overrides, manifest);

    FunctionalDataset data = read_dataset_csv(options.data_path);
    std::optional<TimeRescale> rescale;
    if (manifest && manifest->rescale) {
      rescale = manifest->rescale;
    } else if (options.rescale_time) {
      rescale = fit_time_rescale(data);
    }
    if (rescale) data = apply_time_rescale(std::move(data), *rescale);
    data.validate();

    spdlog::info("fitting {} curves (L={}, K={}, tol={}, max_iter={})", data.size(), config.num_eigen,
                 config.num_splines, config.tol, config.max_iter);
    FitDocument doc = fit_dataset(data, config);
    doc.manifest.dataset = options.data_path;
    doc.manifest.rescale = rescale;
    write_json(to_json(doc), options.out_path);
    if (options.export_csv) write_plot_csv(doc.fit, data, *options.export_csv);

    spdlog::info("{} after {} iterations (metric {:.3g}, {:.2f} s); rank {} of {}",
                 doc.manifest.converged ? "converged" : "not converged", doc.manifest.iterations,
                 doc.manifest.final_metric, doc.manifest.wall_seconds, doc.fit.rank, config.num_eigen);
    if (!doc.manifest.converged) {
      spdlog::warn("no convergence within {} iterations; output written with converged=false", config.max_iter);
      return kExitNotConverged;
    }
    return kExitOk;
  } catch (...) {
    return exit_code_for_current_exception();
  }
}

// ---------------------------------------------------------------------------
// eval

MatrixXd interpolate(const VectorXd& from, const MatrixXd& values, const VectorXd& to) {
  if (from.size() < 2 || values.rows() != from.size()) throw ValidationError("interpolate: bad source grid");
  MatrixXd out(to.size(), values.cols());
  const double* begin = from.data();
  const double* end = begin + from.size();
  for (Index g = 0; g < to.size(); ++g) {
    const double t = to(g);
    Index hi = std::upper_bound(begin, end, t) - begin;
    hi = std::clamp<Index>(hi, 1, from.size() - 1);
    const Index lo = hi - 1;
    const double w = (t - from(lo)) / (from(hi) - from(lo));
    out.row(g) = (1.0 - w) * values.row(lo) + w * values.row(hi);
  }
  return out;
}

EvalMetrics evaluate(const FpcaFit& fit, const TruthDocument& truth) {
  EvalMetrics m;
  VectorXd mu = truth.mu;
  MatrixXd psi = truth.psi;
  const bool same_grid =
      truth.grid.size() == fit.grid.size() && (truth.grid - fit.grid).cwiseAbs().maxCoeff() <= 1e-12;
  if (!same_grid) {
    spdlog::warn("truth grid ({} points) differs from fit grid ({} points); interpolating truth",
                 truth.grid.size(), fit.grid.size());
    mu = interpolate(truth.grid, truth.mu, fit.grid);
    psi = interpolate(truth.grid, truth.psi, fit.grid);
    m.resampled = true;
  }
  const Index count = std::min(fit.psi.cols(), psi.cols());
  const FpcaFit aligned = sign_align(fit, psi.leftCols(count));
  m.ise_mu = ise(mu, aligned.mu, aligned.grid);
  m.ise_psi.resize(count);
  for (Index l = 0; l < count; ++l) m.ise_psi(l) = ise(psi.col(l), aligned.psi.col(l), aligned.grid);
  m.eigenvalues = aligned.eigenvalues;
  m.sigsq_eps = 1.0 / aligned.recip_sigsq_eps;
  return m;
}

json to_json(const EvalMetrics& m) {
  return {
      {"ise_mu", m.ise_mu},
      {"ise_psi", vector_to_json(m.ise_psi)},
      {"eigenvalues", vector_to_json(m.eigenvalues)},
      {"sigsq_eps", m.sigsq_eps},
      {"resampled_truth", m.resampled},
  };
}

int cmd_eval(const EvalOptions& options) {
  try {
    const FitDocument doc = fit_from_json(read_json(options.fit_path));
    const TruthDocument truth = truth_from_json(read_json(options.truth_path));
    const json out = to_json(evaluate(doc.fit, truth));
    if (options.out_path.empty()) {
      std::cout << out.dump(2) << '\n';
    } else {
      write_json(out, options.out_path);
    }
    return kExitOk;
  } catch (...) {
    return exit_code_for_current_exception();
  }
}

std::vector<StudyRow> run_study(const StudyOptions& options) {
  if (options.replicates < 1) throw ValidationError("--replicates must be >= 1");
  if (options.n_grid.empty()) throw ValidationError("--n-grid must list at least one n");
  const FitConfig config = resolve_config(options.overrides, std::nullopt);
  SimConfig base;
  base.t_min = options.t_min;
  base.t_max = options.t_max;
  base.noise_var = options.noise_var;
  for (int n : options.n_grid) {
    base.n = n;
    base.validate();
  }

  const std::size_t per_rep = options.n_grid.size();
  const std::size_t total = static_cast<std::size_t>(options.replicates) * per_rep;
  std::vector<StudyRow> rows(total);
  std::atomic<std::size_t> next{0};
  std::mutex log_mutex;

  const VectorXd grid = unit_grid(config.grid_size);
  TruthDocument truth;
  truth.grid = grid;
  truth.mu = true_mean(grid);
  truth.psi = true_eigenfunctions(grid);

  const auto worker = [&] {
    for (std::size_t job = next++; job < total; job = next++) {
      StudyRow row;
      row.replicate = static_cast<int>(job / per_rep);
      row.n = options.n_grid[job % per_rep];
      row.seed = options.seed + static_cast<std::uint64_t>(row.replicate);
      SimConfig sim_config = base;
      sim_config.n = row.n;
      sim_config.seed = row.seed;
      FitConfig fit_config = config;
      fit_config.seed = row.seed;
      try {
        const SimResult sim = generate(sim_config);
        const FitDocument doc = fit_dataset(sim.data, fit_config);
        row.status = doc.manifest.converged ? "converged" : "max_iter";
        row.iterations = doc.manifest.iterations;
        row.metrics = evaluate(doc.fit, truth);
      } catch (const DegenerateError& e) {
        row.status = "degenerate";
        const std::lock_guard lock(log_mutex);
        spdlog::warn("replicate {} n={}: {}", row.replicate, row.n, e.what());
      } catch (const RankError& e) {
        row.status = "degenerate";
        const std::lock_guard lock(log_mutex);
        spdlog::warn("replicate {} n={}: {}", row.replicate, row.n, e.what());
      }
      {
        const std::lock_guard lock(log_mutex);
        spdlog::debug("replicate {} n={} {} after {} iterations", row.replicate, row.n, row.status, row.iterations);
      }
      rows[job] = std::move(row);
    }
  };

  unsigned workers = options.workers > 0 ? static_cast<unsigned>(options.workers) : std::thread::hardware_concurrency();
  workers = std::clamp<unsigned>(workers, 1, static_cast<unsigned>(total));
  std::vector<std::jthread> pool;
  pool.reserve(workers - 1);
  for (unsigned w = 1; w < workers; ++w) pool.emplace_back(worker);
  worker();
  pool.clear();
  return rows;
}

void write_study_csv(const std::vector<StudyRow>& rows, int num_eigen, std::ostream& out) {
  const int num_psi = std::min(num_eigen, 2);
  out << "replicate,n,seed,status,iterations,ise_mu";
  for (int l = 1; l <= num_psi; ++l) out << ",ise_psi_" << l;
  for (int l = 1; l <= num_eigen; ++l) out << ",eigenvalue_" << l;
  out << ",sigsq_eps\n";
  const auto num = [](double v) { return std::isfinite(v) ? format_double(v) : std::string("nan"); };
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (const StudyRow& r : rows) {
    const bool ok = r.status != "degenerate";
    out << r.replicate << ',' << r.n << ',' << r.seed << ',' << r.status << ',' << r.iterations << ','
        << num(ok ? r.metrics.ise_mu : nan);
    for (int l = 0; l < num_psi; ++l) out << ',' << num(ok ? r.metrics.ise_psi(l) : nan);
    for (int l = 0; l < num_eigen; ++l) out << ',' << num(ok ? r.metrics.eigenvalues(l) : nan);
    out << ',' << num(ok ? r.metrics.sigsq_eps : nan) << '\n';
  }
}

int cmd_study(const StudyOptions& options) {
  try {
    const std::vector<StudyRow> rows = run_study(options);
    const int num_eigen = resolve_config(options.overrides, std::nullopt).num_eigen;
    if (options.out_path.empty()) {
      write_study_csv(rows, num_eigen, std::cout);
    } else {
      std::ofstream out(options.out_path);
      if (!out) throw IoError("cannot write '" + options.out_path + "'");
      write_study_csv(rows, num_eigen, out);
      if (!out) throw IoError("write to '" + options.out_path + "' failed");
    }
    const auto degenerate = std::count_if(rows.begin(), rows.end(), [](const StudyRow& r) {
      return r.status == "degenerate";
    });
    spdlog::info("study finished: {} runs, {} degenerate", rows.size(), degenerate);
    return kExitOk;
  } catch (...) {
    return exit_code_for_current_exception();
  }
}

}  // namespace bfpca::cli
