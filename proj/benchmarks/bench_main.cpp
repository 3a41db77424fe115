#include <benchmark/benchmark.h>

#include <numeric>

#include "aqcal/gbdt.hpp"
#include "aqcal/ingest.hpp"
#include "aqcal/preprocess.hpp"
#include "aqcal/synth.hpp"

namespace {

using namespace aqcal;

FeatureMatrix network(std::size_t sensors, std::size_t steps) {
  synth::SynthConfig c;
  c.n_sensors = sensors;
  c.n_timesteps = steps;
  return preprocess::build_features(synth::generate(c), TargetMode::kOffset);
}

void BM_FindBestSplit(benchmark::State& state) {
  const auto m = network(10, static_cast<std::size_t>(state.range(0)) / 10);
  const auto cols = gbdt::to_columns(m);
  std::vector<gbdt::GradHess> g;
  for (double y : m.labels) g.push_back(gbdt::grad_hess(0.0, y));
  std::vector<std::size_t> rows(m.num_rows());
  std::iota(rows.begin(), rows.end(), 0);
  std::vector<std::size_t> feats(m.num_features());
  std::iota(feats.begin(), feats.end(), 0);
  for (auto _ : state) {
    benchmark::DoNotOptimize(gbdt::find_best_split(rows, cols, g, gbdt::Hyperparams{}, feats));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(m.num_rows()));
}
BENCHMARK(BM_FindBestSplit)->Arg(1000)->Arg(10000)->Arg(100000);

void BM_Train(benchmark::State& state) {
  const auto m = network(10, 2000);
  const auto split = preprocess::make_split(m.num_rows(), preprocess::SplitMode::kChronological);
  gbdt::Hyperparams p;
  p.n_rounds = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(gbdt::train(m, split, p));
}
BENCHMARK(BM_Train)->Arg(10)->Arg(50)->Unit(benchmark::kMillisecond);

void BM_ParseCsv(benchmark::State& state) {
  synth::SynthConfig c;
  c.n_sensors = 10;
  c.n_timesteps = 1000;
  const auto text = ingest::write_csv(ingest::to_table(synth::flatten(synth::generate(c))));
  for (auto _ : state) benchmark::DoNotOptimize(ingest::parse_csv(text));
  state.SetBytesProcessed(state.iterations() * static_cast<std::int64_t>(text.size()));
}
BENCHMARK(BM_ParseCsv)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
