// Serial reference vs OpenMP kernels, plus end-to-end shard training at
// worker counts 1 and 4. The two paths are bit-identical (see the tests);
// this target measures what the parallel path buys.

#include <benchmark/benchmark.h>

#include <vector>

#include "sisa/data.hpp"
#include "sisa/engine.hpp"
#include "sisa/kernels.hpp"
#include "sisa/rng.hpp"

using namespace sisa;

namespace {

std::vector<float> random_vec(size_t n, uint64_t seed) {
    std::vector<float> v(n);
    SplitMix64 rng(seed);
    for (float& x : v) {
        x = rng.next_uniform(-1.0f, 1.0f);
    }
    return v;
}

void bm_affine_serial(benchmark::State& state) {
    const int rows = static_cast<int>(state.range(0));
    const int cols = static_cast<int>(state.range(1));
    const auto w = random_vec(static_cast<size_t>(rows) * cols, 1);
    const auto b = random_vec(rows, 2);
    const auto x = random_vec(cols, 3);
    std::vector<float> y(rows);
    for (auto _ : state) {
        kernels::serial::affine(w.data(), b.data(), rows, cols, x.data(), y.data());
        benchmark::DoNotOptimize(y.data());
        benchmark::ClobberMemory();
    }
}

void bm_affine_parallel(benchmark::State& state) {
    const int rows = static_cast<int>(state.range(0));
    const int cols = static_cast<int>(state.range(1));
    const auto w = random_vec(static_cast<size_t>(rows) * cols, 1);
    const auto b = random_vec(rows, 2);
    const auto x = random_vec(cols, 3);
    std::vector<float> y(rows);
    kernels::set_parallel_enabled(true);
    for (auto _ : state) {
        kernels::affine(w.data(), b.data(), rows, cols, x.data(), y.data());
        benchmark::DoNotOptimize(y.data());
        benchmark::ClobberMemory();
    }
}

void bm_sgd_update_serial(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    auto w = random_vec(n, 4);
    auto g = random_vec(n, 5);
    for (auto _ : state) {
        kernels::serial::sgd_update(w.data(), g.data(), n, 1e-3f);
        benchmark::ClobberMemory();
    }
}

void bm_sgd_update_parallel(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    auto w = random_vec(n, 4);
    auto g = random_vec(n, 5);
    kernels::set_parallel_enabled(true);
    for (auto _ : state) {
        kernels::sgd_update(w.data(), g.data(), n, 1e-3f);
        benchmark::ClobberMemory();
    }
}

void bm_train_all(benchmark::State& state) {
    const int workers = static_cast<int>(state.range(0));
    Dataset ds = synth_generate(2, 500, 15, 500, 1.0, 7);
    FeaturizedDataset fd = featurize_dataset(ds, 1024, 32);
    EngineConfig cfg;
    cfg.dims = ModelDims{1024, 64, 2};
    cfg.mode = HeadMode::fc_only();
    cfg.train.epochs = 2;
    cfg.workers = workers;

    const PartitionPlan plan =
        make_plan(fd.ids, 5, 4, PartitionStrategy::uniform_random(), 7);
    const auto dir = std::filesystem::temp_directory_path() /
                     ("sisa_bench_" + std::to_string(workers));
    int iteration = 0;
    for (auto _ : state) {
        std::filesystem::remove_all(dir);
        CheckpointStore store(dir / std::to_string(iteration++));
        TrainAllResult result = train_all(plan, fd, cfg, store);
        benchmark::DoNotOptimize(result.ensemble.models.data());
    }
    std::filesystem::remove_all(dir);
}

}  // namespace

BENCHMARK(bm_affine_serial)->Args({256, 4096})->Args({1024, 4096});
BENCHMARK(bm_affine_parallel)->Args({256, 4096})->Args({1024, 4096});
BENCHMARK(bm_sgd_update_serial)->Arg(1 << 20);
BENCHMARK(bm_sgd_update_parallel)->Arg(1 << 20);
BENCHMARK(bm_train_all)->Arg(1)->Arg(4)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
