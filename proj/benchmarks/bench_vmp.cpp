#include <vector>

#include <benchmark/benchmark.h>

#include "bfpca/fragments.hpp"
#include "bfpca/orchestrator.hpp"
#include "bfpca/postprocess.hpp"
#include "bfpca/simulate.hpp"
#include "bfpca/splines.hpp"

namespace {

using namespace bfpca;
using Eigen::MatrixXd;
using Eigen::VectorXd;

FunctionalDataset dataset(int n) {
  SimConfig sim;
  sim.n = n;
  return generate(sim).data;
}

LikelihoodInputs likelihood_inputs(const LikelihoodCache& cache, std::size_t n) {
  LikelihoodInputs in;
  const auto d = cache.nu_dim();
  in.nu.mean = VectorXd::LinSpaced(d, -1.0, 1.0);
  in.nu.cov = 0.01 * MatrixXd::Identity(d, d);
  for (std::size_t i = 0; i < n; ++i) {
    in.zeta.push_back({VectorXd::Constant(cache.num_eigen, 0.3), 0.1 * MatrixXd::Identity(cache.num_eigen, cache.num_eigen)});
  }
  in.recip_sigsq_eps = 1.0;
  return in;
}

LikelihoodCache cache_for(const FunctionalDataset& data, int num_eigen, int num_splines) {
  const SplineBasis basis = SplineBasis::build(num_splines);
  std::vector<MatrixXd> designs;
  std::vector<VectorXd> responses;
  for (const Curve& c : data.curves) {
    designs.push_back(design_matrix(c.t, basis));
    responses.push_back(c.y);
  }
  return make_likelihood_cache(designs, responses, num_eigen);
}

void BM_LikelihoodFragment(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const FunctionalDataset data = dataset(n);
  const LikelihoodCache cache = cache_for(data, 3, 10);
  const LikelihoodInputs in = likelihood_inputs(cache, data.size());
  for (auto _ : state) {
    const LikelihoodExpectations ex = lik_update_expectations(cache, in);
    benchmark::DoNotOptimize(lik_message_to_nu(cache, ex));
    for (std::size_t i = 0; i < data.size(); ++i) benchmark::DoNotOptimize(lik_message_to_zeta(cache, ex, i));
    benchmark::DoNotOptimize(lik_message_to_sigsqeps(cache, ex));
  }
  state.SetItemsProcessed(state.iterations() * n);
}
BENCHMARK(BM_LikelihoodFragment)->Arg(36)->Arg(500);

void BM_PenalizationFragment(benchmark::State& state) {
  const int k = static_cast<int>(state.range(0));
  PenalizationInputs in;
  const auto d = 4 * (k + 2);
  in.nu.mean = VectorXd::LinSpaced(d, -1.0, 1.0);
  in.nu.cov = 0.01 * MatrixXd::Identity(d, d);
  in.recip_sigsq_mu = 1.0;
  in.recip_sigsq_psi = VectorXd::Ones(3);
  in.mu_beta = VectorXd::Zero(2);
  in.sigma_beta = 1e10 * MatrixXd::Identity(2, 2);
  for (auto _ : state) benchmark::DoNotOptimize(pen_messages(in, k));
}
BENCHMARK(BM_PenalizationFragment)->Arg(10)->Arg(25);

void BM_Sweep(benchmark::State& state) {
  const FunctionalDataset data = dataset(static_cast<int>(state.range(0)));
  const VmpEngine engine(data, FitConfig{});
  VmpState vmp = engine.initialize();
  for (auto _ : state) engine.sweep(vmp);
}
BENCHMARK(BM_Sweep)->Arg(36)->Arg(500)->Unit(benchmark::kMillisecond);

void BM_FullFit(benchmark::State& state) {
  const FunctionalDataset data = dataset(static_cast<int>(state.range(0)));
  const FitConfig config;
  for (auto _ : state) {
    const VmpEngine engine(data, config);
    VmpState vmp = engine.initialize();
    engine.run(vmp);
    benchmark::DoNotOptimize(postprocess(vmp.store, engine.basis(), config.grid_size));
    state.counters["iterations"] = vmp.iterations;
  }
}
BENCHMARK(BM_FullFit)->Arg(36)->Unit(benchmark::kSecond)->Iterations(1);

}  // namespace

BENCHMARK_MAIN();
