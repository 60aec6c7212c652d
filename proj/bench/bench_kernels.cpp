// OpenMP kernels against their serial references, plus batch prediction.

#include "shotinf/kernels.hpp"
#include "shotinf/synth.hpp"
#include "shotinf/trainer.hpp"

#include <benchmark/benchmark.h>

#include <random>
#include <vector>

using namespace shotinf;

namespace {

std::vector<double> noise(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<double> v(n);
    for (auto& x : v) x = u(rng);
    return v;
}

template <bool Parallel>
void BM_Conv(benchmark::State& st) {
    const auto n = static_cast<std::size_t>(st.range(0));
    const std::size_t c_in = 48, k = 3, c_out = 32;
    const auto x = noise(n * c_in, 1), w = noise(k * c_in * c_out, 2), b = noise(c_out, 3);
    std::vector<double> y(n * c_out);
    for (auto _ : st) {
        if constexpr (Parallel)
            kernels::conv1d_same(x, n, c_in, w, k, c_out, b, y);
        else
            kernels::serial::conv1d_same(x, n, c_in, w, k, c_out, b, y);
        benchmark::DoNotOptimize(y.data());
    }
}

template <bool Parallel>
void BM_Matmul(benchmark::State& st) {
    const auto m = static_cast<std::size_t>(st.range(0));
    const std::size_t k = 64, n = 64;
    const auto a = noise(m * k, 4), b = noise(k * n, 5);
    std::vector<double> c(m * n);
    for (auto _ : st) {
        if constexpr (Parallel)
            kernels::matmul(a, b, c, m, k, n, false);
        else
            kernels::serial::matmul(a, b, c, m, k, n, false);
        benchmark::DoNotOptimize(c.data());
    }
}

template <bool Parallel>
void BM_Adam(benchmark::State& st) {
    const auto n = static_cast<std::size_t>(st.range(0));
    auto value = noise(n, 6);
    const auto grad = noise(n, 7);
    std::vector<double> m(n), v(n);
    long long step = 0;
    for (auto _ : st) {
        ++step;
        if constexpr (Parallel)
            kernels::adam_update(value, grad, m, v, {}, step);
        else
            kernels::serial::adam_update(value, grad, m, v, {}, step);
        benchmark::DoNotOptimize(value.data());
    }
}

template <bool Parallel>
void BM_Predict(benchmark::State& st) {
    synth::SynthConfig c;
    c.n_matches = 2;
    const auto inst = blsr::make_instances(synth::generate(c), blsr::Player::B);
    const model::ModelConfig cfg;
    const auto p = model::init_params(cfg, 1);
    for (auto _ : st) {
        auto out = Parallel ? train::predict_all(inst, p, cfg) : train::predict_all_serial(inst, p, cfg);
        benchmark::DoNotOptimize(out.data());
    }
    st.SetItemsProcessed(st.iterations() * static_cast<std::int64_t>(inst.size()));
}

} // namespace

BENCHMARK(BM_Conv<true>)->Arg(40)->Arg(4096);
BENCHMARK(BM_Conv<false>)->Arg(40)->Arg(4096);
BENCHMARK(BM_Matmul<true>)->Arg(40)->Arg(4096);
BENCHMARK(BM_Matmul<false>)->Arg(40)->Arg(4096);
BENCHMARK(BM_Adam<true>)->Arg(1 << 10)->Arg(1 << 18);
BENCHMARK(BM_Adam<false>)->Arg(1 << 10)->Arg(1 << 18);
BENCHMARK(BM_Predict<true>)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Predict<false>)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
