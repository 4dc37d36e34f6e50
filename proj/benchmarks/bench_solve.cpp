// Assembly/solve timing across truncation orders.

#include <benchmark/benchmark.h>

#include "psk/assembler.hpp"
#include "psk/examples.hpp"

using namespace psk;
using E = CoeffExpr;

namespace {

KernelProblem reaction_instance() {
    E x = E::var();
    E lam = E::add(E::constant(3.0), E::mul(E::pow(x, 2), E::sin(E::mul(E::constant(3.0), x))));
    return examples::example1(lam, 1.0, 3.0, 1.0);
}

void BM_AssembleReactionDiffusion(benchmark::State& state) {
    KernelProblem p = reaction_instance();
    const int N = static_cast<int>(state.range(0));
    for (auto _ : state) {
        SparseSystem sys = assemble_group(p, {0}, N);
        benchmark::DoNotOptimize(sys.nnz());
    }
}
BENCHMARK(BM_AssembleReactionDiffusion)->Arg(8)->Arg(25)->Arg(50)->Arg(100);

void BM_SolveReactionDiffusion(benchmark::State& state) {
    KernelProblem p = reaction_instance();
    const int N = static_cast<int>(state.range(0));
    for (auto _ : state) {
        SolveReport rep = solve_problem(p, {N}, 1e-10, 0);
        benchmark::DoNotOptimize(rep.residual_linear);
    }
}
BENCHMARK(BM_SolveReactionDiffusion)->Arg(8)->Arg(25)->Arg(50)->Arg(100)->Unit(benchmark::kMillisecond);

void BM_SolveLocalized(benchmark::State& state) {
    E x = E::var();
    E lam = E::sqrt(E::add(E::constant(0.5), E::pow(x, 2)));
    KernelProblem p = examples::example5(lam, 1.0, 3.0, 1.0, 0.5, 0.7);
    const int N = static_cast<int>(state.range(0));
    for (auto _ : state) {
        SolveReport rep = solve_problem(p, {N}, 1e-10, 0);
        benchmark::DoNotOptimize(rep.residual_linear);
    }
}
BENCHMARK(BM_SolveLocalized)->Arg(15)->Arg(25)->Arg(50)->Unit(benchmark::kMillisecond);

void BM_SolveMotionPlanning(benchmark::State& state) {
    KernelProblem p = examples::canonical_example4();
    for (auto _ : state) {
        SolveReport rep = solve_problem(p, {8, 40}, 1e-10, 0);
        benchmark::DoNotOptimize(rep.residual_linear);
    }
}
BENCHMARK(BM_SolveMotionPlanning)->Unit(benchmark::kMillisecond);

void BM_RecursionOracle(benchmark::State& state) {
    E x = E::var();
    E lam = E::add(E::constant(6.0), E::mul(E::pow(x, 2), E::sin(E::mul(E::constant(3.0), x))));
    const int N = static_cast<int>(state.range(0));
    UniSeries ls = expand(lam, 0.0, N + 2);
    for (auto _ : state)
        benchmark::DoNotOptimize(recursion_oracle_ex1(ls, N));
}
BENCHMARK(BM_RecursionOracle)->Arg(25)->Arg(50);

void BM_TaylorExpand(benchmark::State& state) {
    E x = E::var();
    E f = E::mul(E::exp(E::mul(E::constant(0.5), x)),
                 E::sqrt(E::add(E::constant(0.5), E::pow(x, 2))));
    const int N = static_cast<int>(state.range(0));
    for (auto _ : state)
        benchmark::DoNotOptimize(expand(f, 0.7, N));
}
BENCHMARK(BM_TaylorExpand)->Arg(25)->Arg(100);

} // namespace

BENCHMARK_MAIN();
