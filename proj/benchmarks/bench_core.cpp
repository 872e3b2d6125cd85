#include <benchmark/benchmark.h>

#include <random>

#include "peregrinn/search.hpp"
#include "testkit.hpp"

using namespace peregrinn;

namespace {

LinearProgram random_lp(std::mt19937_64& rng, int vars, int rows) {
    LinearProgram lp;
    for (int j = 0; j < vars; ++j) lp.add_variable(-10.0, 10.0);
    lp.objective.resize(vars);
    for (int j = 0; j < vars; ++j) lp.objective[j] = testkit::gaussian(rng);
    for (int r = 0; r < rows; ++r) {
        Eigen::VectorXd a(vars);
        for (int j = 0; j < vars; ++j) a[j] = testkit::gaussian(rng);
        lp.add_constraint(std::move(a), Sense::LessEq, testkit::uniform(rng, 0.0, 8.0));
    }
    return lp;
}

void BM_SimplexSolve(benchmark::State& state) {
    std::mt19937_64 rng(1);
    const LinearProgram lp = random_lp(rng, static_cast<int>(state.range(0)),
                                       static_cast<int>(2 * state.range(0)));
    for (auto _ : state) {
        benchmark::DoNotOptimize(solve(lp));
    }
}
BENCHMARK(BM_SimplexSolve)->Arg(5)->Arg(20)->Arg(50);

void BM_SymbolicAnalysis(benchmark::State& state) {
    std::mt19937_64 rng(2);
    const int width = static_cast<int>(state.range(0));
    std::vector<Layer> ls;
    int prev = 4;
    for (int l = 0; l < 3; ++l) {
        Layer layer;
        layer.weights.resize(width, prev);
        for (int r = 0; r < width; ++r)
            for (int c = 0; c < prev; ++c) layer.weights(r, c) = testkit::gaussian(rng);
        layer.bias = Eigen::VectorXd::Zero(width);
        ls.push_back(std::move(layer));
        prev = width;
    }
    const Network net(std::move(ls), 4);
    const Box box(Eigen::VectorXd::Constant(4, -1.0), Eigen::VectorXd::Constant(4, 1.0));
    const PhaseMap fixed = PhaseMap::free_for(net);
    for (auto _ : state) {
        benchmark::DoNotOptimize(symbolic_analysis(net, box, fixed));
    }
}
BENCHMARK(BM_SymbolicAnalysis)->Arg(16)->Arg(64)->Arg(128);

void BM_VerifyRandomInstance(benchmark::State& state) {
    std::mt19937_64 rng(3);
    const auto inst = testkit::random_instance(rng, 3, static_cast<int>(state.range(0)), 2);
    VerifierConfig cfg;
    cfg.timeout_s = 60.0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(verify(inst.net, inst.query, cfg));
    }
}
BENCHMARK(BM_VerifyRandomInstance)->Arg(4)->Arg(8);

}  // namespace

BENCHMARK_MAIN();
