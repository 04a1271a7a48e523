#include <benchmark/benchmark.h>

#include "deter/metrics.hpp"
#include "deter/nn.hpp"
#include "deter/outlier.hpp"
#include "deter/threshold.hpp"
#include "deter/toy.hpp"

using namespace deter;

namespace {

// Default architecture over 768/512 inputs, batch of 200.
void BM_ForwardBackward(benchmark::State& state) {
    ModelConfig c;
    c.n_classes = static_cast<std::size_t>(state.range(0));
    const auto m = init_model<float>(c);
    Rng rng(1);
    const std::size_t rows = 200;
    Matrix<float> t(rows, c.d_tsdae), u(rows, c.d_use);
    for (auto& x : t.data) x = static_cast<float>(rng.normal());
    for (auto& x : u.data) x = static_cast<float>(rng.normal());
    std::vector<int> y(rows);
    for (auto& v : y) v = static_cast<int>(rng.below(c.n_classes));
    Rng drop(2);
    for (auto _ : state) {
        auto r = loss_and_gradients(m, t, u, y, {}, true, &drop);
        benchmark::DoNotOptimize(r.loss);
    }
    state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * rows));
}
BENCHMARK(BM_ForwardBackward)->Arg(39)->Arg(151)->Unit(benchmark::kMillisecond);

// One epoch of the toy configuration: 600 training rows, default model.
void BM_ToyEpoch(benchmark::State& state) {
    ToyGenConfig tc;
    const auto toy = gen_toy(tc).dataset;
    SynthConfig sc;
    sc.count = 500;
    const auto train_set = merge_outliers(toy, {generate_synthetic(toy, sc)});
    ModelConfig mc;
    mc.d_tsdae = toy.d_tsdae();
    mc.d_use = toy.d_use();
    mc.n_classes = toy.label_map.n_classes();
    const auto m = init_model<float>(mc);
    TrainConfig cfg;
    cfg.max_epochs = 1;
    cfg.patience = 1;
    for (auto _ : state) {
        auto r = train(m, train_set, toy, cfg);
        benchmark::DoNotOptimize(r.history.best_epoch);
    }
}
BENCHMARK(BM_ToyEpoch)->Unit(benchmark::kMillisecond);

void BM_GenerateSynthetic(benchmark::State& state) {
    ToyGenConfig tc;
    tc.d_tsdae = 768;
    tc.d_use = 512;
    tc.sigma = 0.05;
    const auto toy = gen_toy(tc).dataset;
    SynthConfig sc;
    sc.count = static_cast<std::size_t>(state.range(0));
    for (auto _ : state) {
        auto b = generate_synthetic(toy, sc);
        benchmark::DoNotOptimize(b.tsdae.values().data());
    }
}
BENCHMARK(BM_GenerateSynthetic)->Arg(500)->Unit(benchmark::kMicrosecond);

void BM_Evaluate(benchmark::State& state) {
    const std::size_t n = static_cast<std::size_t>(state.range(0));
    Rng rng(3);
    std::vector<int> gold(n), pred(n);
    for (std::size_t i = 0; i < n; ++i) {
        gold[i] = static_cast<int>(rng.below(151));
        pred[i] = static_cast<int>(rng.below(151));
    }
    for (auto _ : state) {
        auto r = evaluate(gold, pred, 151, 0.7);
        benchmark::DoNotOptimize(r.macro_f1_known);
    }
}
BENCHMARK(BM_Evaluate)->Arg(5700);

void BM_Calibrate(benchmark::State& state) {
    Rng rng(4);
    const std::size_t rows = 1000, cols = 76;
    Matrix<double> probs(rows, cols);
    std::vector<double> z(cols);
    std::vector<int> labels(rows);
    for (std::size_t r = 0; r < rows; ++r) {
        for (auto& v : z) v = 3.0 * rng.normal();
        const auto p = softmax(z);
        std::copy(p.begin(), p.end(), probs.row(r).begin());
        labels[r] = static_cast<int>(rng.below(cols));
    }
    for (auto _ : state) {
        auto res = calibrate_probs(probs, labels, ThresholdPolicy{});
        benchmark::DoNotOptimize(res.T);
    }
}
BENCHMARK(BM_Calibrate)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
