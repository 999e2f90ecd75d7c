// SPDX-License-Identifier: Apache-2.0
#include <benchmark/benchmark.h>

#include <random>

#include "lsr/network.hpp"
#include "lsr/tensor.hpp"

using namespace lsr;

namespace {

Tensor random_input(Shape shape, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<float> dist(0.0f, 1.0f);
    Tensor t(shape);
    for (auto& v : t.data()) {
        v = dist(rng);
    }
    return t;
}

void bm_conv2d(benchmark::State& state) {
    const int c = static_cast<int>(state.range(0));
    const int hw = static_cast<int>(state.range(1));
    const Tensor x = random_input(Shape{1, c, hw, hw}, 1);
    const Tensor w = random_input(Shape{c, c, 3, 3}, 2);
    for (auto _ : state) {
        benchmark::DoNotOptimize(conv2d(x, w, nullptr, ConvGeometry{1, 1, 1}));
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(c) * c * 9 * hw * hw);
}
BENCHMARK(bm_conv2d)->Args({16, 32})->Args({56, 32})->Args({56, 64});

void bm_model_forward(benchmark::State& state) {
    const bool fused = state.range(0) != 0;
    Model<float> model(ModelConfig::full(4), 0);
    if (fused) {
        fuse_model(model);
    }
    const Tensor lr = random_input(Shape{1, 3, 32, 32}, 3);
    for (auto _ : state) {
        benchmark::DoNotOptimize(super_resolve(model, lr));
    }
}
BENCHMARK(bm_model_forward)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
