// Serial vs OpenMP kernels. Run with OMP_NUM_THREADS to vary the team size.

#include <benchmark/benchmark.h>

#include <random>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "sif/kernels.hpp"

using namespace sif;

namespace {

std::vector<kernels::HiouInstance> instances(std::size_t n) {
  std::mt19937_64 rng(11);
  std::vector<kernels::HiouInstance> items;
  for (std::size_t i = 0; i < n; ++i) items.push_back({oracle::random_set(rng, 1, 5), oracle::random_set(rng, 1, 5)});
  return items;
}

void BM_BatchHiouSerial(benchmark::State& state) {
  const auto items = instances(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(kernels::batch_hiou_serial(items));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_BatchHiouParallel(benchmark::State& state) {
  const auto items = instances(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(kernels::batch_hiou(items));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

GroundTruth ground_truth() {
  GroundTruth gt;
  gt.question = "What color is the shirt?";
  gt.answer = "red";
  gt.boxes = {{0, 0, 0.5, 0.5}};
  gt.depth = std::make_shared<DepthMap>(fixtures::split_depth());
  return gt;
}

std::vector<std::string> completions(std::size_t n) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(fixtures::completion(static_cast<int>(i)));
  return out;
}

void BM_ScoreCompletionsSerial(benchmark::State& state) {
  const auto gt = ground_truth();
  const auto c = completions(static_cast<std::size_t>(state.range(0)));
  MockJudge judge;
  for (auto _ : state) benchmark::DoNotOptimize(kernels::score_completions_serial(c, gt, judge, 0.5, {}));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_ScoreCompletionsParallel(benchmark::State& state) {
  const auto gt = ground_truth();
  const auto c = completions(static_cast<std::size_t>(state.range(0)));
  MockJudge judge;
  for (auto _ : state) benchmark::DoNotOptimize(kernels::score_completions(c, gt, judge, 0.5, {}));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

}  // namespace

BENCHMARK(BM_BatchHiouSerial)->Arg(64)->Arg(4096);
BENCHMARK(BM_BatchHiouParallel)->Arg(64)->Arg(4096);
BENCHMARK(BM_ScoreCompletionsSerial)->Arg(8)->Arg(512);
BENCHMARK(BM_ScoreCompletionsParallel)->Arg(8)->Arg(512);

BENCHMARK_MAIN();
