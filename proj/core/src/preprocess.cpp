#include "radmamba/preprocess.hpp"

#include <cmath>

namespace radmamba {

PoolPlan plan_pooling(int64_t ds_h, int64_t ds_w, int use_avgpool) {
  if (ds_h < 1 || ds_w < 1) fail("chan_ds: reduction factors must be >= 1");
  PoolPlan p;
  p.mp2d_h = std::min<int64_t>(ds_h, 2);
  p.mp2d_w = std::min<int64_t>(ds_w, 2);
  p.mp1d_h = ds_h / p.mp2d_h;
  int64_t rw = ds_w / p.mp2d_w;
  const bool engage_avg = use_avgpool == 1 || (use_avgpool < 0 && rw > 8);
  if (engage_avg && rw > 1) {
    // split the residual time factor as evenly as possible, maxpool first
    int64_t a = 1;
    for (int64_t d = 1; d * d <= rw; ++d)
      if (rw % d == 0) a = d;
    p.avg_w = a;
    p.mp1d_w = rw / a;
  } else {
    p.mp1d_w = rw;
  }
  return p;
}

Tensor chan_ds(const Tensor& x, const ChanDsConfig& cfg, ChanDsWeights& w, bool training) {
  if (x.rank() != 3) fail("chan_ds: input must be [C,H,W], got " + shape_str(x.shape()));
  const int64_t H = x.dim(1), W = x.dim(2);
  if (cfg.fusion_blocks < 1 || cfg.fusion_blocks > 2)
    fail("chan_ds: fusion_blocks must be 1 or 2");
  if (cfg.kernel_h % 2 == 0 || cfg.kernel_w % 2 == 0)
    fail("chan_ds: kernel extents must be odd");
  if (H % cfg.ds_h != 0 || W % cfg.ds_w != 0)
    fail("chan_ds: reduction factors (" + std::to_string(cfg.ds_h) + "," +
         std::to_string(cfg.ds_w) + ") do not divide input " + shape_str(x.shape()));
  if (static_cast<int>(w.blocks.size()) != cfg.fusion_blocks)
    fail("chan_ds: weight blocks do not match fusion_blocks");

  Tensor y = x;
  for (int l = 0; l < cfg.fusion_blocks; ++l) {
    auto& blk = w.blocks[static_cast<size_t>(l)];
    y = ops::conv2d(y, blk.conv_w, blk.conv_b, 1, 1, (cfg.kernel_h - 1) / 2,
                    (cfg.kernel_w - 1) / 2);
    y = ops::batch_norm2d(y, blk.bn_gamma, blk.bn_beta, blk.bn_mean, blk.bn_var, 0.1,
                          1e-5, training);
  }

  const PoolPlan plan = plan_pooling(cfg.ds_h, cfg.ds_w, cfg.use_avgpool);
  if (plan.mp2d_h > 1 || plan.mp2d_w > 1)
    y = ops::maxpool2d(y, static_cast<int>(plan.mp2d_h), static_cast<int>(plan.mp2d_w));
  if (plan.mp1d_h > 1) y = ops::maxpool1d_h(y, static_cast<int>(plan.mp1d_h));
  if (plan.mp1d_w > 1) y = ops::maxpool1d_w(y, static_cast<int>(plan.mp1d_w));
  if (plan.avg_w > 1) y = ops::avgpool1d_w(y, static_cast<int>(plan.avg_w));
  return y;
}

namespace {

void check_geometry(const PatchGeometry& g, int64_t h, int64_t w) {
  if (g.kind == PatchKind::Rectangular) {
    if (g.h_seg < 1 || g.w_seg < 1) fail("segment: patch extents must be >= 1");
    if (h % g.h_seg != 0 || w % g.w_seg != 0)
      fail("segment: patch (" + std::to_string(g.h_seg) + "," + std::to_string(g.w_seg) +
           ") does not divide extents (" + std::to_string(h) + "," + std::to_string(w) + ")");
  }
}

}  // namespace

int64_t patch_count(const PatchGeometry& g, int64_t /*c*/, int64_t h, int64_t w) {
  check_geometry(g, h, w);
  switch (g.kind) {
    case PatchKind::DopplerAligned: return w;
    case PatchKind::TimeAligned: return h;
    case PatchKind::Rectangular: return (h / g.h_seg) * (w / g.w_seg);
  }
  fail("segment: unknown geometry");
}

int64_t patch_len(const PatchGeometry& g, int64_t c, int64_t h, int64_t w) {
  check_geometry(g, h, w);
  switch (g.kind) {
    case PatchKind::DopplerAligned: return c * h;
    case PatchKind::TimeAligned: return c * w;
    case PatchKind::Rectangular: return c * g.h_seg * g.w_seg;
  }
  fail("segment: unknown geometry");
}

namespace {

// Flat index map from segmented layout back into [C,H,W] source offsets.
std::shared_ptr<std::vector<int64_t>> segment_map(const PatchGeometry& g, int64_t c,
                                                  int64_t h, int64_t w) {
  const int64_t n = patch_count(g, c, h, w);
  const int64_t p = patch_len(g, c, h, w);
  auto map = std::make_shared<std::vector<int64_t>>(static_cast<size_t>(n * p));
  auto src = [&](int64_t cc, int64_t hh, int64_t ww) { return (cc * h + hh) * w + ww; };

  int64_t out = 0;
  switch (g.kind) {
    case PatchKind::DopplerAligned:
      for (int64_t t = 0; t < w; ++t)
        for (int64_t cc = 0; cc < c; ++cc)
          for (int64_t hh = 0; hh < h; ++hh) (*map)[static_cast<size_t>(out++)] = src(cc, hh, t);
      break;
    case PatchKind::TimeAligned:
      for (int64_t hh = 0; hh < h; ++hh)
        for (int64_t cc = 0; cc < c; ++cc)
          for (int64_t ww = 0; ww < w; ++ww) (*map)[static_cast<size_t>(out++)] = src(cc, hh, ww);
      break;
    case PatchKind::Rectangular: {
      const int64_t j = w / g.w_seg;
      const int64_t i = h / g.h_seg;
      // row-major patch order: Doppler-block outer, time-block inner
      for (int64_t bi = 0; bi < i; ++bi)
        for (int64_t bj = 0; bj < j; ++bj)
          for (int64_t cc = 0; cc < c; ++cc)
            for (int64_t hh = 0; hh < g.h_seg; ++hh)
              for (int64_t ww = 0; ww < g.w_seg; ++ww)
                (*map)[static_cast<size_t>(out++)] =
                    src(cc, bi * g.h_seg + hh, bj * g.w_seg + ww);
      break;
    }
  }
  return map;
}

}  // namespace

Tensor segment(const Tensor& x, const PatchGeometry& g) {
  if (x.rank() != 3) fail("segment: input must be [C,H,W], got " + shape_str(x.shape()));
  const int64_t c = x.dim(0), h = x.dim(1), w = x.dim(2);
  const int64_t n = patch_count(g, c, h, w);
  const int64_t p = patch_len(g, c, h, w);
  return ops::reindex(x, segment_map(g, c, h, w), {n, p});
}

Tensor unsegment(const Tensor& xseg, const PatchGeometry& g, int64_t c, int64_t h, int64_t w) {
  if (xseg.rank() != 2) fail("unsegment: input must be [N,P]");
  const int64_t n = patch_count(g, c, h, w);
  const int64_t p = patch_len(g, c, h, w);
  if (xseg.dim(0) != n || xseg.dim(1) != p)
    fail("unsegment: shape " + shape_str(xseg.shape()) + " does not match geometry");
  auto fwd = segment_map(g, c, h, w);
  auto inv = std::make_shared<std::vector<int64_t>>(fwd->size());
  for (size_t i = 0; i < fwd->size(); ++i)
    (*inv)[static_cast<size_t>((*fwd)[i])] = static_cast<int64_t>(i);
  return ops::reindex(xseg, inv, {c, h, w});
}

Tensor patch_embed(const Tensor& xseg, const Tensor& w_e, const Tensor& b) {
  if (xseg.rank() != 2 || w_e.rank() != 2 || xseg.dim(1) != w_e.dim(0))
    fail("patch_embed: patch length " + shape_str(xseg.shape()) +
         " does not match embedding " + shape_str(w_e.shape()));
  Tensor y = ops::matmul(xseg, w_e);
  if (b.defined()) y = ops::add(y, b);
  return y;
}

Tensor pos_encoding_table(int64_t n, int64_t dim, Precision prec) {
  if (dim % 2 != 0) fail("pos_encode: dim must be even, got " + std::to_string(dim));
  Tensor pe = Tensor::zeros({n, dim}, prec);
  auto& d = pe.mutable_data();
  for (int64_t row = 0; row < n; ++row)
    for (int64_t i = 0; i < dim / 2; ++i) {
      const double angle = static_cast<double>(row) /
                           std::pow(10000.0, 2.0 * static_cast<double>(i) / static_cast<double>(dim));
      d[static_cast<size_t>(row * dim + 2 * i)] = detail::round_to(prec, std::sin(angle));
      d[static_cast<size_t>(row * dim + 2 * i + 1)] = detail::round_to(prec, std::cos(angle));
    }
  return pe;
}

Tensor pos_encode(const Tensor& x) {
  if (x.rank() != 2) fail("pos_encode: input must be [N,dim]");
  return ops::add(x, pos_encoding_table(x.dim(0), x.dim(1), x.precision()));
}

}  // namespace radmamba
