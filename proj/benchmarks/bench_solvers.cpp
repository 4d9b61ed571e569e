// Epoch throughput per solver, plus the full-gradient pass they amortize.
// Items processed = inner steps, so items/s compares solvers at equal N.

#include <benchmark/benchmark.h>

#include <vropt/analysis.hpp>
#include <vropt/data.hpp>
#include <vropt/model.hpp>
#include <vropt/sampling.hpp>
#include <vropt/solvers.hpp>

#include <cstddef>
#include <vector>

using namespace vropt;

namespace {

constexpr Eigen::Index kDim = 16;

struct Problem {
  explicit Problem(std::size_t n)
      : data(synth_logistic(n, kDim, 99)),
        model(make_loss(LossKind::LogisticL2, 1.0 / static_cast<double>(n))),
        mu(step_size_bound(TheoremKind::SagaRR, curvature(model, data), n)),
        rng(7) {}

  std::vector<std::size_t> order() { return random_permutation(rng, data.size()); }

  Dataset data;
  LossModel model;
  double mu;
  RngStream rng;
};

void BM_saga_epoch(benchmark::State& state) {
  Problem p(static_cast<std::size_t>(state.range(0)));
  SagaState solver(kDim, p.data.size(), PhiConvention::PostStep);
  for (auto _ : state) {
    saga_epoch(solver, p.data, p.model, p.order(), p.mu);
    benchmark::DoNotOptimize(solver.w.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_saga_epoch_prestep(benchmark::State& state) {
  Problem p(static_cast<std::size_t>(state.range(0)));
  SagaState solver(kDim, p.data.size(), PhiConvention::PreStep);
  for (auto _ : state) {
    saga_epoch(solver, p.data, p.model, p.order(), p.mu);
    benchmark::DoNotOptimize(solver.w.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_svrg_epoch(benchmark::State& state) {
  Problem p(static_cast<std::size_t>(state.range(0)));
  SvrgState solver(kDim);
  for (auto _ : state) {
    svrg_epoch(solver, p.data, p.model, p.order(), p.mu);
    benchmark::DoNotOptimize(solver.w.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_avrg_epoch(benchmark::State& state) {
  Problem p(static_cast<std::size_t>(state.range(0)));
  AvrgState solver(kDim);
  for (auto _ : state) {
    avrg_epoch(solver, p.data, p.model, p.order(), p.mu);
    benchmark::DoNotOptimize(solver.w.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_sgd_epoch(benchmark::State& state) {
  Problem p(static_cast<std::size_t>(state.range(0)));
  SgdState solver(kDim);
  for (auto _ : state) {
    sgd_epoch(solver, p.data, p.model, p.order(), p.mu);
    benchmark::DoNotOptimize(solver.w.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_full_grad(benchmark::State& state) {
  Problem p(static_cast<std::size_t>(state.range(0)));
  const Vector w = Vector::Zero(kDim);
  for (auto _ : state) {
    Vector g = full_grad(p.model, w, p.data);
    benchmark::DoNotOptimize(g.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

}  // namespace

BENCHMARK(BM_saga_epoch)->Arg(256)->Arg(4096);
BENCHMARK(BM_saga_epoch_prestep)->Arg(256)->Arg(4096);
BENCHMARK(BM_svrg_epoch)->Arg(256)->Arg(4096);
BENCHMARK(BM_avrg_epoch)->Arg(256)->Arg(4096);
BENCHMARK(BM_sgd_epoch)->Arg(256)->Arg(4096);
BENCHMARK(BM_full_grad)->Arg(256)->Arg(4096);

BENCHMARK_MAIN();
