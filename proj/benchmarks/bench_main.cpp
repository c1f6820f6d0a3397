#include <benchmark/benchmark.h>

#include "fixtures.hpp"
#include "kercoup/decompose.hpp"
#include "kercoup/maximality.hpp"
#include "kercoup/samplers.hpp"

using namespace kercoup;

namespace {

void BM_DecomposePipeline(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto problem = testfx::random_problem(n, 42);
  const auto h = compute_helpers(problem.Q, problem.P);
  const JointDist pbar = sample_frechet_coupling(problem.P, 0, 1 % n, 7);
  for (auto _ : state) {
    auto built = build_cam(pbar, h, problem.Q, problem.P, 0, 1 % n);
    auto b = extract_acceptance_coupling(built.cam, built.qbar);
    benchmark::DoNotOptimize(regenerate_pbar(built.qbar, b, 0, 1 % n));
  }
}
BENCHMARK(BM_DecomposePipeline)->Arg(4)->Arg(8)->Arg(16)->Arg(32);

void BM_FrechetSample(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto problem = testfx::random_problem(n, 3);
  std::uint64_t seed = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(sample_frechet_coupling(problem.P, 0, 1 % n, seed++));
  }
}
BENCHMARK(BM_FrechetSample)->Arg(4)->Arg(8)->Arg(16);

void BM_MaximalKernelCoupling(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto problem = testfx::random_problem(n, 11);
  for (auto _ : state) {
    benchmark::DoNotOptimize(build_maximal_kernel_coupling(problem.P));
  }
}
BENCHMARK(BM_MaximalKernelCoupling)->Arg(4)->Arg(8)->Arg(16);

void BM_CheckMaxConditions(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto problem = testfx::random_problem(n, 29);
  const JointDist pbar = build_maximal_coupling(problem.P.row(0), problem.P.row(1));
  const auto h = compute_helpers(problem.Q, problem.P);
  const auto built = build_cam(pbar, h, problem.Q, problem.P, 0, 1);
  const auto b = extract_acceptance_coupling(built.cam, built.qbar);
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        check_max_conditions(built.qbar, b, problem.Q, problem.a, problem.P, 0, 1));
  }
}
BENCHMARK(BM_CheckMaxConditions)->Arg(4)->Arg(8);

void BM_FiniteCoupledStep(benchmark::State& state) {
  const auto problem = testfx::random_problem(8, 5);
  FiniteCouplingSpec spec;
  spec.kind = FiniteCouplingKind::kTwoStep;
  spec.proposal = FiniteProposalCoupling::kMaximal;
  std::uint64_t t = 1;
  for (auto _ : state) {
    benchmark::DoNotOptimize(finite_coupled_step(problem, spec, 0, 3, 9, 0, t++));
  }
}
BENCHMARK(BM_FiniteCoupledStep);

}  // namespace

BENCHMARK_MAIN();
