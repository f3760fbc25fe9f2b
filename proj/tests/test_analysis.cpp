#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "doctest.h"
#include "radmamba/analysis.hpp"
#include "radmamba/rng.hpp"
#include "test_util.hpp"

using namespace radmamba;

namespace {

ModelConfig preset_uog20() {
  ModelConfig cfg;
  cfg.input_shape = {1, 240, 224};
  cfg.chan_ds.fusion_blocks = 1;
  cfg.chan_ds.fused_channels = 1;
  cfg.chan_ds.ds_h = 2;
  cfg.chan_ds.ds_w = 32;
  cfg.dim = 16;
  cfg.dim_s = 16;
  cfg.dt_rank = 4;
  cfg.projection = ProjectionKind::Conv1dK3;
  cfg.n_classes = 6;
  cfg.dim_sweep = {8, 16, 20, 24, 32};
  return cfg;
}

ModelConfig preset_diat() {
  ModelConfig cfg;
  cfg.input_shape = {3, 224, 224};
  cfg.chan_ds.fusion_blocks = 2;
  cfg.chan_ds.fused_channels = 16;
  cfg.chan_ds.ds_h = 2;
  cfg.chan_ds.ds_w = 2;
  cfg.dim = 8;
  cfg.dim_s = 1;
  cfg.dt_rank = 2;
  cfg.projection = ProjectionKind::Conv1dK3;
  cfg.n_classes = 6;
  cfg.dim_sweep = {8, 16, 32, 64, 80};
  return cfg;
}

int64_t count_scalars(ModelWeights& w) {
  int64_t n = 0;
  for (auto& p : named_params(w)) n += p.t.numel();
  return n;
}

Dataset tiny_dataset(int per_class, uint64_t seed) {
  Dataset d;
  d.class_names = {"a", "b"};
  Rng rng(seed);
  for (int cls = 0; cls < 2; ++cls)
    for (int i = 0; i < per_class; ++i) {
      Tensor x = Tensor::zeros({1, 8, 8});
      auto& v = x.mutable_data();
      for (int64_t r = 0; r < 8; ++r)
        for (int64_t c = 0; c < 8; ++c)
          v[static_cast<size_t>(r * 8 + c)] =
              (cls == 0 ? r < 4 : r >= 4) ? 0.9 : 0.1 * rng.uniform();
      x.round_to_precision();
      d.samples.push_back({std::move(x), cls, "s" + std::to_string(cls * 100 + i)});
    }
  return d;
}

ModelConfig tiny_model() {
  ModelConfig cfg;
  cfg.input_shape = {1, 8, 8};
  cfg.chan_ds.fusion_blocks = 1;
  cfg.chan_ds.fused_channels = 2;
  cfg.chan_ds.ds_h = 2;
  cfg.chan_ds.ds_w = 2;
  cfg.dim = 4;
  cfg.dim_s = 2;
  cfg.dt_rank = 1;
  cfg.n_classes = 2;
  return cfg;
}

}  // namespace

TEST_CASE("count_params: a single affine layer is P*dim + dim") {
  ModelConfig cfg = preset_uog20();
  CostReport rep = count_params(cfg);
  const ModelDims dims = derive_dims(cfg);
  for (const auto& row : rep.rows)
    if (row.name == "embed") CHECK(row.params == dims.p * cfg.dim + cfg.dim);
  int64_t sum = 0;
  for (const auto& row : rep.rows) sum += row.params;
  CHECK(sum == rep.total_params);
}

TEST_CASE("count_params: doubling dim roughly quadruples block projections") {
  ModelConfig cfg = preset_uog20();
  auto block_params = [&](int64_t dim) {
    ModelConfig c = cfg;
    c.dim = dim;
    int64_t n = 0;
    for (const auto& row : count_params(c).rows)
      if (row.name.rfind("block.0.p", 0) == 0) n += row.params;
    return n;
  };
  const double ratio = static_cast<double>(block_params(32)) / static_cast<double>(block_params(16));
  CHECK(ratio > 3.5);
  CHECK(ratio < 4.5);
}

TEST_CASE("count_params: UoG20 preset calibrates within 15% of 6.7k") {
  ModelConfig cfg = preset_uog20();
  Calibration cal = calibrate_dim(cfg, cfg.dim_sweep, 6700);
  CHECK(cal.best_dim == 16);
  CHECK(std::abs(static_cast<double>(cal.best_params) - 6700.0) / 6700.0 <= 0.15);
}

TEST_CASE("count_flops: affine convention and additivity") {
  ModelConfig cfg = preset_uog20();
  CostReport rep = count_flops(cfg);
  const ModelDims dims = derive_dims(cfg);
  for (const auto& row : rep.rows)
    if (row.name == "head")
      CHECK(row.flops == 2 * dims.n * cfg.dim * cfg.n_classes + cfg.n_classes);
  int64_t sum = 0;
  for (const auto& row : rep.rows) sum += row.flops;
  CHECK(sum == rep.total_flops);  // breakdown sums exactly to the total

  CostReport strict = count_flops(cfg, true);
  CHECK(strict.total_flops >= rep.total_flops);
}

TEST_CASE("count_flops: DIAT preset lands within factor 2 of 145.6M") {
  CostReport rep = count_flops(preset_diat());
  const double target = 145.6e6;
  CHECK(static_cast<double>(rep.total_flops) <= 2.0 * target);
  CHECK(static_cast<double>(rep.total_flops) >= target / 2.0);
}

TEST_CASE("count_flops is monotone in the extents that feed it") {
  ModelConfig small = preset_uog20();
  ModelConfig big = small;
  big.dim = 32;
  CHECK(count_flops(big).total_flops > count_flops(small).total_flops);
  ModelConfig deeper = small;
  deeper.depth = 2;
  CHECK(count_flops(deeper).total_flops > count_flops(small).total_flops);
}

TEST_CASE("count_params equals the init_weights scalar count for 50 fuzzed configs") {
  Rng rng(97);
  int checked = 0;
  while (checked < 50) {
    ModelConfig cfg;
    const int64_t c = 1 + rng.integer(3);
    cfg.input_shape = {c, 8 * (1 + rng.integer(3)), 8 * (1 + rng.integer(3))};
    cfg.chan_ds.fusion_blocks = 1 + static_cast<int>(rng.integer(2));
    cfg.chan_ds.fused_channels = 1 + rng.integer(4);
    cfg.chan_ds.ds_h = std::vector<int64_t>{1, 2, 4}[static_cast<size_t>(rng.integer(3))];
    cfg.chan_ds.ds_w = std::vector<int64_t>{1, 2, 4, 8}[static_cast<size_t>(rng.integer(4))];
    cfg.dim = 2 * (1 + rng.integer(6));
    cfg.dim_s = 1 + rng.integer(4);
    cfg.dt_rank = rng.integer(4);
    cfg.depth = 1 + static_cast<int>(rng.integer(3));
    cfg.n_classes = 2 + static_cast<int>(rng.integer(5));
    const int64_t geom = rng.integer(3);
    if (geom == 0) {
      cfg.geometry.kind = PatchKind::DopplerAligned;
    } else if (geom == 1) {
      cfg.geometry.kind = PatchKind::TimeAligned;
    } else {
      cfg.geometry = {PatchKind::Rectangular, 2, 2};
    }
    cfg.projection = std::vector<ProjectionKind>{
        ProjectionKind::Linear1, ProjectionKind::Linear3,
        ProjectionKind::Conv1dK3}[static_cast<size_t>(rng.integer(3))];
    if (!validate_model_config(cfg).empty()) continue;

    ModelWeights w = init_weights(cfg, 1);
    CHECK(count_params(cfg).total_params == count_scalars(w));
    ++checked;
  }
}

TEST_CASE("cost reports serialize to JSON and CSV") {
  CostReport rep = count_params(preset_uog20());
  auto j = cost_report_to_json(rep);
  CHECK(j["total_params"] == rep.total_params);
  const std::string csv = cost_report_csv(rep);
  CHECK(csv.find("name,params,flops") == 0);
  CHECK(csv.find("total,") != std::string::npos);
}

TEST_CASE("calibrate_dim scans the sweep and reports the nearest config") {
  ModelConfig cfg = preset_uog20();
  Calibration cal = calibrate_dim(cfg, {8, 16, 24}, 10000);
  CHECK(cal.table.size() == 3);
  int64_t best_err = std::llabs(cal.best_params - 10000);
  for (const auto& e : cal.table) CHECK(best_err <= std::llabs(e.params - 10000));
  CHECK_THROWS_AS(calibrate_dim(cfg, {}, 1000), Error);
}

TEST_CASE("run_ablation: single-cell grid over 2 seeds, then identical seeds give std 0") {
  ModelConfig base = tiny_model();
  Dataset train_d = tiny_dataset(6, 1);
  Dataset test_d = tiny_dataset(3, 2);
  TrainConfig tcfg;
  tcfg.lr0 = 5e-3;
  tcfg.batch_size = 6;
  tcfg.epochs = 2;

  AblationGrid grid;
  grid.projections = {ProjectionKind::Conv1dK3};
  grid.geometries = {PatchGeometry{PatchKind::DopplerAligned}};
  grid.ds_factors = {{2, 2}};
  grid.seeds = {0, 1};
  auto results = run_ablation(base, grid, train_d, test_d, tcfg);
  REQUIRE(results.size() == 1);
  CHECK(results[0].error.empty());
  CHECK(results[0].per_seed_accuracy.size() == 2);
  CHECK(results[0].is_radmamba);
  CHECK(results[0].params == count_params(base).total_params);

  grid.seeds = {3, 3, 3};
  auto same = run_ablation(base, grid, train_d, test_d, tcfg);
  CHECK(same[0].std_accuracy == 0.0);
}

TEST_CASE("run_ablation: invalid cells record errors and the grid continues") {
  ModelConfig base = tiny_model();
  Dataset train_d = tiny_dataset(4, 3);
  Dataset test_d = tiny_dataset(2, 4);
  TrainConfig tcfg;
  tcfg.epochs = 1;
  tcfg.batch_size = 4;

  AblationGrid grid;
  grid.projections = {ProjectionKind::Linear1};
  grid.geometries = {PatchGeometry{PatchKind::DopplerAligned},
                     PatchGeometry{PatchKind::Rectangular, 3, 3}};  // 3 does not divide 4
  grid.ds_factors = {{2, 2}};
  grid.seeds = {0};
  auto results = run_ablation(base, grid, train_d, test_d, tcfg);
  REQUIRE(results.size() == 2);
  CHECK(results[0].error.empty());
  CHECK(!results[1].error.empty());
  CHECK(results[1].per_seed_accuracy.empty());
}

TEST_CASE("ablation CSV is a pure function of its inputs") {
  ModelConfig base = tiny_model();
  Dataset train_d = tiny_dataset(5, 5);
  Dataset test_d = tiny_dataset(2, 6);
  TrainConfig tcfg;
  tcfg.epochs = 1;
  tcfg.batch_size = 5;
  AblationGrid grid;
  grid.projections = {ProjectionKind::Linear1, ProjectionKind::Conv1dK3};
  grid.geometries = {PatchGeometry{PatchKind::DopplerAligned}};
  grid.ds_factors = {{2, 2}};
  grid.seeds = {0, 1};
  const std::string a = ablation_csv(run_ablation(base, grid, train_d, test_d, tcfg));
  const std::string b = ablation_csv(run_ablation(base, grid, train_d, test_d, tcfg));
  CHECK(a == b);
  CHECK(a.find("projection,patch") == 0);
}
