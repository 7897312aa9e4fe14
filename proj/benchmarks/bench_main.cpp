#include <benchmark/benchmark.h>

#include "vadeers/data/kmeans.hpp"
#include "vadeers/data/synthetic.hpp"
#include "vadeers/eval/metrics.hpp"
#include "vadeers/model/losses.hpp"
#include "vadeers/nn/ops.hpp"
#include "vadeers/train/pipeline.hpp"
#include "vadeers/train/trainer.hpp"

using namespace vadeers;
using nn::Matrix;

namespace {

Matrix normal_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed) {
    Rng rng(seed);
    std::normal_distribution<double> normal;
    Matrix m(rows, cols);
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) m(r, c) = normal(rng);
    return m;
}

const train::Prepared& desk() {
    static const train::Prepared prep = [] {
        const auto syn = data::generate_synthetic(data::SyntheticSpec::desk());
        return train::prepare(syn.dataset, train::SplitSpec{25, 25, 0}, 3, 0);
    }();
    return prep;
}

void BM_Matmul(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const Matrix a = normal_matrix(n, n, 1);
    const Matrix b = normal_matrix(n, n, 2);
    for (auto _ : state) benchmark::DoNotOptimize(nn::matmul(a, b));
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(2 * n * n * n));
}
BENCHMARK(BM_Matmul)->Arg(64)->Arg(128)->Arg(256);

// One 128-row batch through a 300 -> 256 layer.
void BM_Affine(benchmark::State& state) {
    const Matrix x = normal_matrix(128, 300, 3);
    const Matrix w = normal_matrix(300, 256, 4);
    const std::vector<double> bias(256, 0.1);
    for (auto _ : state) benchmark::DoNotOptimize(nn::affine(x, w, bias));
}
BENCHMARK(BM_Affine);

void BM_TotalLossBackward(benchmark::State& state) {
    const auto& data = desk().training;
    auto m = model::Vadeers::create(model::ModelConfig::desk(), 0);
    std::vector<const train::Pair*> pairs;
    for (std::size_t i = 0; i < 128 && i < data.split.train_pairs.size(); ++i) pairs.push_back(&data.split.train_pairs[i]);
    const auto batch = train::make_pair_batch(data, pairs);
    const model::LossWeights w;
    Rng rng(5);
    for (auto _ : state) {
        nn::Tape tape;
        const auto loss = model::total_loss_graph(tape, m, batch, w, nn::Mode::train, rng).total;
        benchmark::DoNotOptimize(tape.gradients(loss));
    }
}
BENCHMARK(BM_TotalLossBackward)->Unit(benchmark::kMillisecond);

void BM_JointEpoch(benchmark::State& state) {
    auto sched = train::TrainSchedule::desk();
    sched.joint_epochs = 1;
    sched.dspn_epochs = 0;
    for (auto _ : state) benchmark::DoNotOptimize(train::train(desk().training, model::ModelConfig::desk(), sched, {}));
}
BENCHMARK(BM_JointEpoch)->Unit(benchmark::kMillisecond);

void BM_KMeans(benchmark::State& state) {
    const Matrix pts = normal_matrix(static_cast<std::size_t>(state.range(0)), 20, 6);
    for (auto _ : state) benchmark::DoNotOptimize(data::kmeans(pts, 3, 0));
}
BENCHMARK(BM_KMeans)->Arg(100)->Arg(1000)->Unit(benchmark::kMillisecond);

void BM_Silhouette(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const Matrix pts = normal_matrix(n, 32, 7);
    std::vector<std::size_t> labels(n);
    for (std::size_t i = 0; i < n; ++i) labels[i] = i % 3;
    for (auto _ : state) benchmark::DoNotOptimize(eval::silhouette(pts, labels));
}
BENCHMARK(BM_Silhouette)->Arg(300)->Arg(900)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
