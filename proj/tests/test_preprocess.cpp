#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "doctest.h"
#include "radmamba/model.hpp"
#include "radmamba/preprocess.hpp"
#include "radmamba/rng.hpp"
#include "test_util.hpp"

using namespace radmamba;

namespace {

Tensor randu(Rng& rng, Shape shape, Precision prec = Precision::F32) {
  std::vector<double> v(static_cast<size_t>(shape_numel(shape)));
  for (auto& x : v) x = rng.uniform();
  return Tensor::from_data(std::move(shape), std::move(v), prec);
}

ChanDsWeights make_chan_ds_weights(const ModelConfig& cfg, uint64_t seed) {
  ModelWeights w = init_weights(cfg, seed);
  return w.chan_ds;
}

ModelConfig base_config(Shape input, int64_t c_cd, int blocks, int64_t ds_h, int64_t ds_w) {
  ModelConfig cfg;
  cfg.input_shape = std::move(input);
  cfg.chan_ds.fusion_blocks = blocks;
  cfg.chan_ds.fused_channels = c_cd;
  cfg.chan_ds.ds_h = ds_h;
  cfg.chan_ds.ds_w = ds_w;
  cfg.dim = 8;
  cfg.dim_s = 2;
  cfg.dt_rank = 1;
  cfg.n_classes = 2;
  return cfg;
}

}  // namespace

TEST_CASE("pool plan splits factors per the documented scheme") {
  PoolPlan p22 = plan_pooling(2, 2, -1);
  CHECK(p22.mp2d_h == 2);
  CHECK(p22.mp2d_w == 2);
  CHECK(p22.mp1d_h == 1);
  CHECK(p22.mp1d_w == 1);
  CHECK(p22.avg_w == 1);

  PoolPlan p28 = plan_pooling(2, 8, -1);
  CHECK(p28.mp2d_w == 2);
  CHECK(p28.mp1d_w == 4);  // residual 4 <= 8: no average pool
  CHECK(p28.avg_w == 1);

  PoolPlan p232 = plan_pooling(2, 32, -1);
  CHECK(p232.mp2d_w == 2);
  CHECK(p232.mp1d_w == 4);  // residual 16 > 8 splits evenly
  CHECK(p232.avg_w == 4);

  PoolPlan p82 = plan_pooling(8, 2, -1);
  CHECK(p82.mp2d_h == 2);
  CHECK(p82.mp1d_h == 4);  // leftover Doppler factor
  CHECK(p82.mp1d_w == 1);

  PoolPlan p11 = plan_pooling(1, 1, -1);
  CHECK(p11.mp2d_h == 1);
  CHECK(p11.mp2d_w == 1);

  PoolPlan forced = plan_pooling(2, 8, 1);  // avgpool forced on
  CHECK(forced.mp1d_w * forced.avg_w == 4);
  CHECK(forced.avg_w == 2);
}

TEST_CASE("chan_ds produces the Table-style output extents") {
  Rng rng(1);
  struct Case {
    Shape input;
    int64_t c_cd;
    int blocks;
    int64_t ds_h, ds_w;
    Shape want;
  };
  const std::vector<Case> cases = {
      {{3, 224, 224}, 16, 2, 2, 2, {16, 112, 112}},  // DIAT-style
      {{1, 224, 224}, 1, 1, 2, 8, {1, 112, 28}},     // CI4R-style
      {{1, 224, 224}, 1, 1, 2, 32, {1, 112, 7}},     // UoG20-style frame
  };
  for (const auto& c : cases) {
    ModelConfig cfg = base_config(c.input, c.c_cd, c.blocks, c.ds_h, c.ds_w);
    ChanDsWeights w = make_chan_ds_weights(cfg, 3);
    Tensor x = randu(rng, c.input);
    Tensor y = chan_ds(x, cfg.chan_ds, w, false);
    CHECK(y.shape() == c.want);
  }
}

TEST_CASE("chan_ds rejects non-divisible reduction factors") {
  ModelConfig cfg = base_config({1, 224, 224}, 1, 1, 3, 2);
  ChanDsWeights w;
  w.blocks.resize(1);
  Rng rng(2);
  Tensor x = randu(rng, {1, 224, 224});
  CHECK_THROWS_WITH_AS(chan_ds(x, cfg.chan_ds, w, false), doctest::Contains("divide"), Error);
}

TEST_CASE("chan_ds maxpool stages never exceed the pre-pool max") {
  // identity conv (center tap 1) and batchnorm neutralized via running stats
  ModelConfig cfg = base_config({1, 16, 16}, 1, 1, 2, 8);
  ChanDsWeights w = make_chan_ds_weights(cfg, 0);
  auto& blk = w.blocks[0];
  std::fill(blk.conv_w.mutable_data().begin(), blk.conv_w.mutable_data().end(), 0.0);
  blk.conv_w.mutable_data()[4] = 1.0;  // 3x3 center
  std::fill(blk.conv_b.mutable_data().begin(), blk.conv_b.mutable_data().end(), 0.0);
  blk.bn_gamma.mutable_data()[0] = std::sqrt(1.0 + 1e-5);  // cancels the eps term
  blk.bn_beta.mutable_data()[0] = 0.0;
  blk.bn_mean.mutable_data()[0] = 0.0;
  blk.bn_var.mutable_data()[0] = 1.0;

  Rng rng(5);
  Tensor x = randu(rng, {1, 16, 16});
  Tensor y = chan_ds(x, cfg.chan_ds, w, /*training=*/false);
  double xmax = 0.0, ymax = 0.0;
  for (double v : x.data()) xmax = std::max(xmax, v);
  for (double v : y.data()) ymax = std::max(ymax, v);
  CHECK(ymax <= xmax + 1e-6);
}

TEST_CASE("segment: Doppler-aligned columns keep Doppler order") {
  Tensor x = Tensor::from_data({1, 2, 3}, {1, 2, 3, 4, 5, 6});
  Tensor seg = segment(x, {PatchKind::DopplerAligned});
  CHECK(seg.shape() == Shape{3, 2});
  CHECK(seg.data() == std::vector<double>{1, 4, 2, 5, 3, 6});
}

TEST_CASE("segment: rectangular patches in row-major order, top-left first") {
  std::vector<double> v(16);
  for (size_t i = 0; i < v.size(); ++i) v[i] = static_cast<double>(i);
  Tensor x = Tensor::from_data({1, 4, 4}, v);
  Tensor seg = segment(x, {PatchKind::Rectangular, 2, 2});
  CHECK(seg.shape() == Shape{4, 4});
  // patch 0 = rows 0-1, cols 0-1 flattened channel->Doppler->time
  CHECK(seg.data()[0] == 0.0);
  CHECK(seg.data()[1] == 1.0);
  CHECK(seg.data()[2] == 4.0);
  CHECK(seg.data()[3] == 5.0);
  // patch 1 = rows 0-1, cols 2-3 (time-major inner ordering of patches)
  CHECK(seg.data()[4] == 2.0);
}

TEST_CASE("segment: UoG20-shaped geometry gives N=7 patches of length 112") {
  Rng rng(4);
  Tensor x = randu(rng, {1, 112, 7});
  Tensor seg = segment(x, {PatchKind::DopplerAligned});
  CHECK(seg.shape() == Shape{7, 112});
}

TEST_CASE("segment: geometry errors") {
  Rng rng(6);
  Tensor x = randu(rng, {1, 6, 6});
  CHECK_THROWS_WITH_AS(segment(x, {PatchKind::Rectangular, 4, 2}),
                       doctest::Contains("divide"), Error);
}

TEST_CASE("temporal-order invariant: shifting input left shifts patches by one") {
  Rng rng(8);
  const int64_t c = 2, h = 6, w = 9;
  Tensor x = randu(rng, {c, h, w});
  Tensor shifted = Tensor::zeros({c, h, w});
  auto& sd = shifted.mutable_data();
  const auto& xd = x.data();
  for (int64_t cc = 0; cc < c; ++cc)
    for (int64_t r = 0; r < h; ++r)
      for (int64_t t = 0; t < w - 1; ++t)
        sd[static_cast<size_t>((cc * h + r) * w + t)] = xd[static_cast<size_t>((cc * h + r) * w + t + 1)];

  Tensor seg_x = segment(x, {PatchKind::DopplerAligned});
  Tensor seg_s = segment(shifted, {PatchKind::DopplerAligned});
  for (int64_t n = 0; n < w - 1; ++n)
    for (int64_t p = 0; p < seg_x.dim(1); ++p)
      CHECK(seg_s.at({n, p}) == seg_x.at({n + 1, p}));
}

TEST_CASE("round trip: unsegment(segment(x)) == x for every geometry") {
  Rng rng(10);
  const int64_t c = 3, h = 8, w = 12;
  Tensor x = randu(rng, {c, h, w});
  for (const PatchGeometry& g :
       {PatchGeometry{PatchKind::DopplerAligned}, PatchGeometry{PatchKind::TimeAligned},
        PatchGeometry{PatchKind::Rectangular, 4, 3}, PatchGeometry{PatchKind::Rectangular, 1, 12},
        PatchGeometry{PatchKind::Rectangular, 8, 1}}) {
    Tensor seg = segment(x, g);
    Tensor back = unsegment(seg, g, c, h, w);
    CHECK(radtest::max_abs_diff(back, x) == 0.0);
  }
}

TEST_CASE("segment gradients flow through the permutation") {
  Rng rng(12);
  std::vector<NamedTensor> params;
  params.push_back({"x", randu(rng, {2, 4, 6}, Precision::F64)});
  auto forward = [&]() {
    Tensor seg = segment(params[0].t, {PatchKind::Rectangular, 2, 3});
    return ops::mean(ops::mul(seg, seg));
  };
  auto res = radtest::grad_check(params, forward);
  CHECK(res.max_err < 1e-6);
}

TEST_CASE("patch_embed identity, zeros, and shape") {
  Tensor eye = Tensor::from_data({2, 2}, {1, 0, 0, 1});
  Tensor xs = Tensor::from_data({3, 2}, {1, 2, 3, 4, 5, 6});
  Tensor zero_b = Tensor::zeros({2});
  CHECK(radtest::max_abs_diff(patch_embed(xs, eye, zero_b), xs) == 0.0);

  Tensor b = Tensor::from_data({2}, {0.5, -1.0});
  Tensor z = Tensor::zeros({3, 2});
  Tensor out = patch_embed(z, eye, b);
  for (int64_t n = 0; n < 3; ++n) {
    CHECK(out.at({n, 0}) == 0.5);
    CHECK(out.at({n, 1}) == -1.0);
  }

  Rng rng(14);
  Tensor xseg = randu(rng, {7, 112});
  Tensor we = randu(rng, {112, 24});
  Tensor be = Tensor::zeros({24});
  CHECK(patch_embed(xseg, we, be).shape() == Shape{7, 24});

  Tensor wrong = randu(rng, {64, 24});
  CHECK_THROWS_AS(patch_embed(xseg, wrong, be), Error);
}

TEST_CASE("pos_encode: row zero, bounds, and sin(1)") {
  const int64_t n = 5, dim = 8;
  Tensor pe = pos_encoding_table(n, dim, Precision::F64);
  for (int64_t i = 0; i < dim / 2; ++i) {
    CHECK(pe.at({0, 2 * i}) == 0.0);      // sin 0
    CHECK(pe.at({0, 2 * i + 1}) == 1.0);  // cos 0
  }
  for (double v : pe.data()) CHECK(std::abs(v) <= 1.0);
  CHECK(pe.at({1, 0}) == doctest::Approx(std::sin(1.0)).epsilon(1e-12));
  CHECK(pe.at({1, 0}) == doctest::Approx(0.84147).epsilon(1e-5));

  Tensor x = Tensor::zeros({n, dim}, Precision::F64);
  Tensor enc = pos_encode(x);
  CHECK(radtest::max_abs_diff(enc, pe) == 0.0);

  Tensor odd = Tensor::zeros({3, 5});
  CHECK_THROWS_WITH_AS(pos_encode(odd), doctest::Contains("even"), Error);
}
