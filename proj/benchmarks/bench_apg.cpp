#include <benchmark/benchmark.h>

#include <vector>

#include "apg/apg.hpp"
#include "apg/experiments.hpp"
#include "apg/firm.hpp"
#include "apg/solver.hpp"

using namespace apg;

namespace {

std::vector<TransitionTuple> random_tuples(int width, std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<TransitionTuple> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const State s = State::from_code(rng.uniform_int(0, (std::uint64_t{1} << width) - 1), width);
    out.push_back({s, 1, s, -1.0, false});
  }
  return out;
}

void BM_Firm(benchmark::State& state) {
  const int width = static_cast<int>(state.range(0));
  const auto tuples = random_tuples(width, static_cast<std::size_t>(state.range(1)), 1);
  const ScoreFn g = [](const State& s) { return static_cast<double>(s.code() % 97); };
  for (auto _ : state) benchmark::DoNotOptimize(firm_all_features(tuples, g));
  state.SetItemsProcessed(state.iterations() * state.range(1));
}
BENCHMARK(BM_Firm)->Args({8, 1000})->Args({16, 10000})->Args({16, 100000});

void BM_ValueIteration(benchmark::State& state) {
  const int m = static_cast<int>(state.range(0));
  const auto mdp = to_tabular(generate_domain(m, 0.25, 1, 0));
  for (auto _ : state) benchmark::DoNotOptimize(solve(mdp));
}
BENCHMARK(BM_ValueIteration)->Arg(8)->Arg(12)->Unit(benchmark::kMillisecond);

void BM_DivideAndBuild(benchmark::State& state) {
  const int m = static_cast<int>(state.range(0));
  const auto inst = make_instance(m, 0.25, 1, 0, ExperimentConfig{});
  Rng rng(2);
  const auto tuples = sample_transition_set(inst.domain, inst.policy, 0.5, rng);
  const ScoreFn g = [&](const State& s) { return inst.value(s); };
  for (auto _ : state) {
    const auto sets = divide_abstract_states(tuples, inst.policy, g, inst.epsilon);
    benchmark::DoNotOptimize(Apg::build(sets, inst.policy));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(tuples.size()));
}
BENCHMARK(BM_DivideAndBuild)->Arg(8)->Arg(12)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
