#pragma once
// Channel fusion + downsampling front end, patch segmentation geometries,
// patch embedding and sinusoidal position encoding.

#include <cstdint>
#include <vector>

#include "radmamba/tensor.hpp"

namespace radmamba {

// L x (conv2d + batchnorm) fusion blocks followed by pooling that realizes
// the (ds_h, ds_w) reduction factors exactly.
struct ChanDsConfig {
  int fusion_blocks = 1;       // L, 1 or 2
  int64_t fused_channels = 1;  // C_cd
  int kernel_h = 3;
  int kernel_w = 3;
  int64_t ds_h = 1;  // r_H = H / H_cd
  int64_t ds_w = 1;  // r_W = W / W_cd
  int use_avgpool = -1;  // -1 auto (time residual > 8), 0 never, 1 always
};

// How the reduction factors split across the pooling stages. Maxpool2d is
// 2x2 whenever both factors allow it; leftover Doppler factor goes to a
// vertical maxpool; leftover time factor goes to a horizontal maxpool, with
// an average pool taking an even share when the residual is large.
struct PoolPlan {
  int64_t mp2d_h = 1, mp2d_w = 1;
  int64_t mp1d_h = 1;  // Doppler axis
  int64_t mp1d_w = 1;  // time axis
  int64_t avg_w = 1;   // time axis
};

PoolPlan plan_pooling(int64_t ds_h, int64_t ds_w, int use_avgpool);

enum class PatchKind { DopplerAligned, Rectangular, TimeAligned };

struct PatchGeometry {
  PatchKind kind = PatchKind::DopplerAligned;
  int64_t h_seg = 7;  // Rectangular only
  int64_t w_seg = 7;
  bool operator==(const PatchGeometry& o) const = default;
};

struct ChanDsWeights {
  struct Block {
    Tensor conv_w, conv_b;          // [Cout,Cin,kh,kw], [Cout]
    Tensor bn_gamma, bn_beta;       // [Cout]
    Tensor bn_mean, bn_var;         // running stats, buffers
  };
  std::vector<Block> blocks;
};

// [C,H,W] -> [C_cd, H/ds_h, W/ds_w]. Errors when the reduction factors do
// not divide the input extents.
Tensor chan_ds(const Tensor& x, const ChanDsConfig& cfg, ChanDsWeights& w, bool training);

// Number of patches / flattened patch length for a geometry on [C,H,W].
int64_t patch_count(const PatchGeometry& g, int64_t c, int64_t h, int64_t w);
int64_t patch_len(const PatchGeometry& g, int64_t c, int64_t h, int64_t w);

// [C,H,W] -> [N, patch_len]. Flatten order inside a patch is channel, then
// Doppler, then time; DopplerAligned patches are single time columns, so the
// patch sequence follows the time axis and each patch vector walks the
// Doppler axis in ascending order.
Tensor segment(const Tensor& x, const PatchGeometry& g);

// Inverse of segment; the partition is lossless.
Tensor unsegment(const Tensor& xseg, const PatchGeometry& g, int64_t c, int64_t h, int64_t w);

// Per-patch affine map: [N,P] x [P,dim] + [dim] -> [N,dim].
Tensor patch_embed(const Tensor& xseg, const Tensor& w_e, const Tensor& b);

// x + PE with PE[n,2i] = sin(n / 10000^(2i/dim}), PE[n,2i+1] = cos(same).
// dim must be even.
Tensor pos_encode(const Tensor& x);
Tensor pos_encoding_table(int64_t n, int64_t dim, Precision prec = Precision::F32);

}  // namespace radmamba
