#include <benchmark/benchmark.h>

#include <numeric>

#include "gramsnn/assembler.hpp"
#include "gramsnn/dataio.hpp"
#include "gramsnn/genotype.hpp"
#include "gramsnn/runtime.hpp"

using namespace gramsnn;

namespace {

ImageDataset random_dataset(int n) {
  ImageDataset ds;
  ds.n = n;
  ds.c = 1;
  ds.h = 28;
  ds.w = 28;
  ds.images.resize(static_cast<std::size_t>(n) * 28 * 28);
  ds.labels.resize(n);
  Rng rng(1);
  for (auto& v : ds.images) v = static_cast<float>(uniform_real(rng, 0.0, 1.0));
  for (int i = 0; i < n; ++i) ds.labels[i] = static_cast<uint8_t>(i % 10);
  return ds;
}

void BM_ConvForward(benchmark::State& state) {
  const int filters = static_cast<int>(state.range(0));
  ConvSpec spec{filters, 3, 1, false, true};
  Rng init(7);
  ConvLayer<float> conv(spec, {1, 28, 28}, init);
  const int batch = 32;
  Tensor<float> x({batch, 1, 28, 28}), y(conv.out_dims(batch));
  Rng rng(2);
  for (auto& v : x.data) v = bernoulli(rng, 0.2) ? 1.0f : 0.0f;
  conv.begin_pass(batch, 1, false);
  for (auto _ : state) {
    conv.forward_step(0, x, y, false);
    benchmark::DoNotOptimize(y.data.data());
  }
  state.SetItemsProcessed(state.iterations() * batch);
}
BENCHMARK(BM_ConvForward)->Arg(16)->Arg(64)->Arg(128);

void BM_LIFStep(benchmark::State& state) {
  const std::size_t units = static_cast<std::size_t>(state.range(0));
  LIFSpec spec;
  LIFLayer<float> lif(spec, {units}, false);
  const int batch = 32;
  Tensor<float> in({static_cast<std::size_t>(batch), units}), out(in.shape);
  Rng rng(3);
  for (auto& v : in.data) v = static_cast<float>(uniform_real(rng, 0.0, 0.5));
  int t = 0;
  const int t_steps = 1 << 20;
  lif.begin_pass(batch, t_steps, false);
  for (auto _ : state) {
    lif.forward_step(t++ % t_steps, in, out, false);
    benchmark::DoNotOptimize(out.data.data());
  }
  state.SetItemsProcessed(state.iterations() * batch * units);
}
BENCHMARK(BM_LIFStep)->Arg(256)->Arg(4096);

void BM_Mutation(benchmark::State& state) {
  Grammar g = load_grammar_file(GRAMSNN_GRAMMAR_PATH);
  const auto macro = parse_macro("features:1:6,classification:1:4,output:1:1,learning:1:1");
  Rng rng(11);
  Individual ind = random_individual(g, macro, rng);
  MutationRates rates;
  for (auto _ : state) {
    Individual child = mutate(ind, rates, g, macro, rng);
    benchmark::DoNotOptimize(child.units.data());
    ind = std::move(child);
  }
}
BENCHMARK(BM_Mutation);

void BM_RateEncode(benchmark::State& state) {
  const int batch = static_cast<int>(state.range(0));
  ImageDataset ds = random_dataset(batch);
  std::vector<int> idx(batch);
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng(5);
  for (auto _ : state) {
    Tensor<float> spikes = rate_encode_batch<float>(ds, idx, 10, rng);
    benchmark::DoNotOptimize(spikes.data.data());
  }
  state.SetItemsProcessed(state.iterations() * batch * 10 * 28 * 28);
}
BENCHMARK(BM_RateEncode)->Arg(16)->Arg(64);

}  // namespace

BENCHMARK_MAIN();
