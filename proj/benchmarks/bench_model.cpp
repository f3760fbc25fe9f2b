// Whole-model inference and one training step on the shipped preset shapes.

#include <benchmark/benchmark.h>

#include "radmamba/model.hpp"
#include "radmamba/rng.hpp"
#include "radmamba/train.hpp"

using namespace radmamba;

namespace {

ModelConfig uog20_synth() {
  ModelConfig cfg;
  cfg.input_shape = {1, 224, 224};
  cfg.chan_ds.fusion_blocks = 1;
  cfg.chan_ds.fused_channels = 1;
  cfg.chan_ds.ds_h = 2;
  cfg.chan_ds.ds_w = 32;
  cfg.dim = 16;
  cfg.dim_s = 16;
  cfg.dt_rank = 4;
  cfg.projection = ProjectionKind::Conv1dK3;
  cfg.n_classes = 4;
  return cfg;
}

Tensor random_input(const ModelConfig& cfg) {
  Rng rng(9);
  Tensor x = Tensor::zeros(cfg.input_shape, Precision::F32);
  for (auto& v : x.mutable_data()) v = rng.uniform();
  x.round_to_precision();
  return x;
}

}  // namespace

static void ModelInference(benchmark::State& state) {
  ModelConfig cfg = uog20_synth();
  ModelWeights w = init_weights(cfg, 0);
  Tensor x = random_input(cfg);
  for (auto _ : state) {
    Tensor logits = model_forward(x, cfg, w, false);
    benchmark::DoNotOptimize(logits.data().data());
  }
}
BENCHMARK(ModelInference);

static void ModelTrainStep(benchmark::State& state) {
  ModelConfig cfg = uog20_synth();
  ModelWeights w = init_weights(cfg, 0);
  auto params = named_params(w);
  AdamWState opt = make_adamw_state(params);
  Tensor x = random_input(cfg);
  for (auto _ : state) {
    Tape tape;
    Tape::Scope scope(tape);
    Tensor logits = model_forward(x, cfg, w, true);
    Tensor loss = cross_entropy(ops::reshape(logits, {1, cfg.n_classes}), {0});
    for (auto& p : params) p.t.zero_grad();
    tape.backward(loss);
    adamw_step(params, opt, 1e-3, 0.01);
    benchmark::DoNotOptimize(loss.item());
  }
}
BENCHMARK(ModelTrainStep);

BENCHMARK_MAIN();
