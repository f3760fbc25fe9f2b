#include "radmamba/model.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include "radmamba/rng.hpp"

using nlohmann::json;

namespace radmamba {

const char* projection_name(ProjectionKind k) {
  switch (k) {
    case ProjectionKind::Linear1: return "linear1";
    case ProjectionKind::Linear3: return "linear3";
    case ProjectionKind::Conv1dK3: return "conv1d";
  }
  return "?";
}

ProjectionKind projection_from_name(const std::string& name) {
  if (name == "linear1") return ProjectionKind::Linear1;
  if (name == "linear3") return ProjectionKind::Linear3;
  if (name == "conv1d") return ProjectionKind::Conv1dK3;
  fail("unknown projection kind '" + name + "' (linear1|linear3|conv1d)");
}

std::vector<std::string> validate_model_config(const ModelConfig& cfg) {
  std::vector<std::string> bad;
  if (cfg.input_shape.size() != 3) {
    bad.push_back("input_shape must be [C,H,W]");
    return bad;
  }
  const int64_t C = cfg.input_shape[0], H = cfg.input_shape[1], W = cfg.input_shape[2];
  if (C < 1 || H < 1 || W < 1) bad.push_back("input extents must be positive");
  if (cfg.chan_ds.fusion_blocks < 1 || cfg.chan_ds.fusion_blocks > 2)
    bad.push_back("chan_ds.fusion_blocks must be 1 or 2");
  if (cfg.chan_ds.fused_channels < 1) bad.push_back("chan_ds.fused_channels must be >= 1");
  if (cfg.chan_ds.kernel_h < 1 || cfg.chan_ds.kernel_h % 2 == 0 ||
      cfg.chan_ds.kernel_w < 1 || cfg.chan_ds.kernel_w % 2 == 0)
    bad.push_back("chan_ds kernel extents must be odd and >= 1");
  if (cfg.chan_ds.ds_h < 1 || cfg.chan_ds.ds_w < 1)
    bad.push_back("chan_ds reduction factors must be >= 1");
  if (H >= 1 && cfg.chan_ds.ds_h >= 1 && H % cfg.chan_ds.ds_h != 0)
    bad.push_back("chan_ds.ds_h does not divide input height " + std::to_string(H));
  if (W >= 1 && cfg.chan_ds.ds_w >= 1 && W % cfg.chan_ds.ds_w != 0)
    bad.push_back("chan_ds.ds_w does not divide input width " + std::to_string(W));

  const int64_t h_cd = cfg.chan_ds.ds_h >= 1 ? H / cfg.chan_ds.ds_h : 0;
  const int64_t w_cd = cfg.chan_ds.ds_w >= 1 ? W / cfg.chan_ds.ds_w : 0;
  if (cfg.geometry.kind == PatchKind::Rectangular) {
    if (cfg.geometry.h_seg < 1 || cfg.geometry.w_seg < 1)
      bad.push_back("rectangular patch extents must be >= 1");
    else if (h_cd > 0 && w_cd > 0 &&
             (h_cd % cfg.geometry.h_seg != 0 || w_cd % cfg.geometry.w_seg != 0))
      bad.push_back("patch (" + std::to_string(cfg.geometry.h_seg) + "," +
                    std::to_string(cfg.geometry.w_seg) + ") does not divide post-DS extents (" +
                    std::to_string(h_cd) + "," + std::to_string(w_cd) + ")");
  }
  if (cfg.dim < 2 || cfg.dim % 2 != 0)
    bad.push_back("dim must be even and >= 2 (sinusoidal position encoding)");
  if (cfg.dim_s < 1) bad.push_back("dim_s must be >= 1");
  if (cfg.dt_rank < 0) bad.push_back("dt_rank must be >= 0");
  if (cfg.depth < 1) bad.push_back("depth must be >= 1");
  if (cfg.n_classes < 2) bad.push_back("n_classes must be >= 2");
  return bad;
}

ModelDims derive_dims(const ModelConfig& cfg) {
  auto bad = validate_model_config(cfg);
  if (!bad.empty()) {
    std::string msg = "invalid model config:";
    for (const auto& b : bad) msg += "\n  - " + b;
    fail(msg);
  }
  ModelDims d;
  d.c_cd = cfg.chan_ds.fused_channels;
  d.h_cd = cfg.input_shape[1] / cfg.chan_ds.ds_h;
  d.w_cd = cfg.input_shape[2] / cfg.chan_ds.ds_w;
  d.n = patch_count(cfg.geometry, d.c_cd, d.h_cd, d.w_cd);
  d.p = patch_len(cfg.geometry, d.c_cd, d.h_cd, d.w_cd);
  return d;
}

// ---------------------------------------------------------------------------
// Initialization

namespace {

Tensor uniform_init(Rng& rng, Shape shape, int64_t fan_in, Precision prec) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(std::max<int64_t>(fan_in, 1)));
  Tensor t = Tensor::zeros(std::move(shape), prec);
  auto& d = t.mutable_data();
  for (auto& v : d) v = detail::round_to(prec, rng.uniform(-bound, bound));
  return t;
}

Rng rng_for(uint64_t seed, const std::string& name) {
  return Rng::derive(seed, fnv1a64(name));
}

ProjWeights init_projection(const ModelConfig& cfg, uint64_t seed, const std::string& name,
                            bool is_p3, Precision prec) {
  ProjWeights p;
  const int64_t dim = cfg.dim;
  Rng rng = rng_for(seed, name);
  switch (cfg.projection) {
    case ProjectionKind::Linear1:
      p.w.push_back(uniform_init(rng, {dim, dim}, dim, prec));
      p.b.push_back(Tensor::zeros({dim}, prec));
      break;
    case ProjectionKind::Linear3:
      if (is_p3) {  // projection 3 stays a single linear layer
        p.w.push_back(uniform_init(rng, {dim, dim}, dim, prec));
        p.b.push_back(Tensor::zeros({dim}, prec));
      } else {
        for (int i = 0; i < 3; ++i) {
          p.w.push_back(uniform_init(rng, {dim, dim}, dim, prec));
          p.b.push_back(Tensor::zeros({dim}, prec));
        }
      }
      break;
    case ProjectionKind::Conv1dK3: {
      const int64_t k = is_p3 ? 1 : 3;
      p.w.push_back(uniform_init(rng, {dim, dim, k}, dim * k, prec));
      p.b.push_back(Tensor::zeros({dim}, prec));
      break;
    }
  }
  return p;
}

SsmWeights init_ssm(const ModelConfig& cfg, uint64_t seed, const std::string& name,
                    Precision prec) {
  SsmWeights s;
  const int64_t dim = cfg.dim, ds = cfg.dim_s, r = cfg.dt_rank;
  s.a_log = Tensor::zeros({dim, ds}, prec);
  {
    auto& d = s.a_log.mutable_data();
    for (int64_t i = 0; i < dim; ++i)
      for (int64_t j = 0; j < ds; ++j)
        d[static_cast<size_t>(i * ds + j)] =
            detail::round_to(prec, std::log(static_cast<double>(j + 1)));
  }
  s.d = Tensor::full({dim}, 1.0, prec);
  {
    Rng rng = rng_for(seed, name + ".w_b");
    s.w_b = uniform_init(rng, {dim, ds}, dim, prec);
  }
  {
    Rng rng = rng_for(seed, name + ".w_c");
    s.w_c = uniform_init(rng, {dim, ds}, dim, prec);
  }
  if (r > 0) {
    Rng r1 = rng_for(seed, name + ".w_dt1");
    s.w_dt1 = uniform_init(r1, {dim, r}, dim, prec);
    Rng r2 = rng_for(seed, name + ".w_dt2");
    s.w_dt2 = uniform_init(r2, {r, dim}, r, prec);
  }
  s.dt_bias = Tensor::zeros({dim}, prec);
  {
    Rng rng = rng_for(seed, name + ".dt_bias");
    auto& d = s.dt_bias.mutable_data();
    for (auto& v : d) {
      const double target = rng.uniform(1e-3, 1e-1);
      v = detail::round_to(prec, std::log(std::expm1(target)));  // softplus inverse
    }
  }
  return s;
}

BranchWeights init_branch(const ModelConfig& cfg, uint64_t seed, const std::string& name,
                          Precision prec) {
  BranchWeights b;
  Rng rng = rng_for(seed, name + ".conv");
  b.conv_w = uniform_init(rng, {cfg.dim, cfg.dim, 1}, cfg.dim, prec);
  b.conv_b = Tensor::zeros({cfg.dim}, prec);
  b.ln_gamma = Tensor::full({cfg.dim}, 1.0, prec);
  b.ln_beta = Tensor::zeros({cfg.dim}, prec);
  b.ssm = init_ssm(cfg, seed, name + ".ssm", prec);
  return b;
}

}  // namespace

ModelWeights init_weights(const ModelConfig& cfg, uint64_t seed, Precision prec) {
  const ModelDims dims = derive_dims(cfg);
  ModelWeights w;

  int64_t c_in = cfg.input_shape[0];
  for (int l = 0; l < cfg.chan_ds.fusion_blocks; ++l) {
    ChanDsWeights::Block blk;
    const std::string name = "chan_ds." + std::to_string(l);
    Rng rng = rng_for(seed, name + ".conv");
    blk.conv_w = uniform_init(
        rng, {cfg.chan_ds.fused_channels, c_in, cfg.chan_ds.kernel_h, cfg.chan_ds.kernel_w},
        c_in * cfg.chan_ds.kernel_h * cfg.chan_ds.kernel_w, prec);
    blk.conv_b = Tensor::zeros({cfg.chan_ds.fused_channels}, prec);
    blk.bn_gamma = Tensor::full({cfg.chan_ds.fused_channels}, 1.0, prec);
    blk.bn_beta = Tensor::zeros({cfg.chan_ds.fused_channels}, prec);
    blk.bn_mean = Tensor::zeros({cfg.chan_ds.fused_channels}, prec);
    blk.bn_var = Tensor::full({cfg.chan_ds.fused_channels}, 1.0, prec);
    w.chan_ds.blocks.push_back(std::move(blk));
    c_in = cfg.chan_ds.fused_channels;
  }

  {
    Rng rng = rng_for(seed, "embed");
    w.embed_w = uniform_init(rng, {dims.p, cfg.dim}, dims.p, prec);
    w.embed_b = Tensor::zeros({cfg.dim}, prec);
  }

  for (int i = 0; i < cfg.depth; ++i) {
    const std::string bn = "block." + std::to_string(i);
    BlockWeights blk;
    blk.norm_gamma = Tensor::full({cfg.dim}, 1.0, prec);
    blk.norm_beta = Tensor::zeros({cfg.dim}, prec);
    blk.p1 = init_projection(cfg, seed, bn + ".p1", false, prec);
    blk.p2 = init_projection(cfg, seed, bn + ".p2", false, prec);
    blk.p3 = init_projection(cfg, seed, bn + ".p3", true, prec);
    blk.fw = init_branch(cfg, seed, bn + ".fw", prec);
    blk.bw = init_branch(cfg, seed, bn + ".bw", prec);
    w.blocks.push_back(std::move(blk));
  }

  {
    Rng rng = rng_for(seed, "head");
    w.head_w = uniform_init(rng, {dims.n * cfg.dim, cfg.n_classes}, dims.n * cfg.dim, prec);
    w.head_b = Tensor::zeros({cfg.n_classes}, prec);
  }

  for (auto& p : named_params(w)) p.t.set_requires_grad(true);
  return w;
}

// ---------------------------------------------------------------------------
// Parameter enumeration (names are the stable checkpoint contract)

namespace {

void enum_proj(std::vector<NamedTensor>& out, const std::string& base, ProjWeights& p) {
  for (size_t i = 0; i < p.w.size(); ++i) {
    out.push_back({base + ".w" + std::to_string(i), p.w[i]});
    out.push_back({base + ".b" + std::to_string(i), p.b[i]});
  }
}

void enum_ssm(std::vector<NamedTensor>& out, const std::string& base, SsmWeights& s) {
  out.push_back({base + ".a_log", s.a_log});
  out.push_back({base + ".d", s.d});
  out.push_back({base + ".w_b", s.w_b});
  out.push_back({base + ".w_c", s.w_c});
  if (s.w_dt1.defined()) {
    out.push_back({base + ".w_dt1", s.w_dt1});
    out.push_back({base + ".w_dt2", s.w_dt2});
  }
  out.push_back({base + ".dt_bias", s.dt_bias});
}

void enum_branch(std::vector<NamedTensor>& out, const std::string& base, BranchWeights& b) {
  out.push_back({base + ".conv.w", b.conv_w});
  out.push_back({base + ".conv.b", b.conv_b});
  out.push_back({base + ".ln.g", b.ln_gamma});
  out.push_back({base + ".ln.b", b.ln_beta});
  enum_ssm(out, base + ".ssm", b.ssm);
}

}  // namespace

std::vector<NamedTensor> named_params(ModelWeights& w) {
  std::vector<NamedTensor> out;
  for (size_t l = 0; l < w.chan_ds.blocks.size(); ++l) {
    const std::string base = "chan_ds." + std::to_string(l);
    auto& blk = w.chan_ds.blocks[l];
    out.push_back({base + ".conv.w", blk.conv_w});
    out.push_back({base + ".conv.b", blk.conv_b});
    out.push_back({base + ".bn.g", blk.bn_gamma});
    out.push_back({base + ".bn.b", blk.bn_beta});
  }
  out.push_back({"embed.w", w.embed_w});
  out.push_back({"embed.b", w.embed_b});
  for (size_t i = 0; i < w.blocks.size(); ++i) {
    const std::string base = "block." + std::to_string(i);
    auto& blk = w.blocks[i];
    out.push_back({base + ".norm.g", blk.norm_gamma});
    out.push_back({base + ".norm.b", blk.norm_beta});
    enum_proj(out, base + ".p1", blk.p1);
    enum_proj(out, base + ".p2", blk.p2);
    enum_proj(out, base + ".p3", blk.p3);
    enum_branch(out, base + ".fw", blk.fw);
    enum_branch(out, base + ".bw", blk.bw);
  }
  out.push_back({"head.w", w.head_w});
  out.push_back({"head.b", w.head_b});
  return out;
}

std::vector<NamedTensor> named_buffers(ModelWeights& w) {
  std::vector<NamedTensor> out;
  for (size_t l = 0; l < w.chan_ds.blocks.size(); ++l) {
    const std::string base = "chan_ds." + std::to_string(l);
    out.push_back({base + ".bn.mean", w.chan_ds.blocks[l].bn_mean});
    out.push_back({base + ".bn.var", w.chan_ds.blocks[l].bn_var});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Forward

namespace {

Tensor transpose2d(const Tensor& x) {
  const int64_t r = x.dim(0), c = x.dim(1);
  auto map = std::make_shared<std::vector<int64_t>>(static_cast<size_t>(r * c));
  for (int64_t j = 0; j < c; ++j)
    for (int64_t i = 0; i < r; ++i) (*map)[static_cast<size_t>(j * r + i)] = i * c + j;
  return ops::reindex(x, map, {c, r});
}

// Applies P1/P2/P3 on [N,dim]; conv projections run along the patch axis.
Tensor project(const Tensor& x, const ProjWeights& p, ProjectionKind kind, bool is_p3) {
  if (kind == ProjectionKind::Conv1dK3) {
    const int pad = is_p3 ? 0 : 1;
    Tensor xt = transpose2d(x);  // [dim,N]
    Tensor yt = ops::conv1d(xt, p.w[0], p.b[0], pad);
    return transpose2d(yt);
  }
  Tensor y = x;
  for (size_t i = 0; i < p.w.size(); ++i)
    y = ops::add(ops::matmul(y, p.w[i]), p.b[i]);
  return y;
}

Tensor branch_apply(const Tensor& x_dir, const BranchWeights& b, Discretization mode) {
  Tensor xt = transpose2d(x_dir);                       // [dim,N]
  Tensor conv = ops::conv1d(xt, b.conv_w, b.conv_b, 0);  // kernel 1
  Tensor x = transpose2d(conv);                          // [N,dim]
  x = ops::layer_norm(x, b.ln_gamma, b.ln_beta);
  return ssm_apply(x, b.ssm, mode);
}

template <typename F>
auto stage(const char* name, F&& f) {
  try {
    return f();
  } catch (const Error& e) {
    fail(std::string("model_forward[") + name + "]: " + e.what());
  }
}

}  // namespace

Tensor block_forward(const Tensor& x_p, const BlockWeights& w, ProjectionKind proj,
                     Discretization mode, ActivationCapture* capture) {
  if (x_p.rank() != 2) fail("block_forward: input must be [N,dim]");
  Tensor x_proj = ops::layer_norm(x_p, w.norm_gamma, w.norm_beta);

  Tensor z = project(x_proj, w.p1, proj, false);
  Tensor x_fw = project(x_proj, w.p2, proj, false);
  Tensor x_bw = ops::flip_axis0(x_fw);

  Tensor y_fw = branch_apply(x_fw, w.fw, mode);
  Tensor y_bw = ops::flip_axis0(branch_apply(x_bw, w.bw, mode));  // back to canonical order

  Tensor gate = ops::silu(z);
  Tensor gated_fw = ops::mul(y_fw, gate);
  Tensor gated_bw = ops::mul(y_bw, gate);
  Tensor y_sum = ops::add(gated_fw, gated_bw);
  Tensor y_p3 = project(y_sum, w.p3, proj, true);
  Tensor out = ops::add(y_p3, x_proj);

  if (capture) {
    capture->gated_fw = gated_fw.detach();
    capture->gated_bw = gated_bw.detach();
    capture->p1_in = x_proj.detach();
    capture->p1_out = z.detach();
    capture->p2_in = x_proj.detach();
    capture->p2_out = x_fw.detach();
    capture->p3_in = y_sum.detach();
    capture->p3_out = y_p3.detach();
  }
  return out;
}

Tensor model_forward(const Tensor& x, const ModelConfig& cfg, ModelWeights& w,
                     bool training, ActivationCapture* capture) {
  const ModelDims dims = derive_dims(cfg);
  if (x.rank() != 3 || x.shape() != cfg.input_shape)
    fail("model_forward: input " + shape_str(x.shape()) + " does not match configured " +
         shape_str(cfg.input_shape));

  Tensor y = stage("chan_ds", [&] { return chan_ds(x, cfg.chan_ds, w.chan_ds, training); });
  Tensor seg = stage("segment", [&] { return segment(y, cfg.geometry); });
  Tensor emb = stage("patch_embed", [&] { return patch_embed(seg, w.embed_w, w.embed_b); });
  Tensor pos = stage("pos_encode", [&] { return pos_encode(emb); });

  Tensor h = pos;
  for (int i = 0; i < cfg.depth; ++i) {
    ActivationCapture* cap = (capture && capture->block_index == i) ? capture : nullptr;
    h = stage("block", [&] {
      return block_forward(h, w.blocks[static_cast<size_t>(i)], cfg.projection,
                           cfg.discretization, cap);
    });
  }

  return stage("classify", [&] {
    Tensor flat = ops::reshape(h, {1, dims.n * cfg.dim});
    Tensor logits = ops::add(ops::matmul(flat, w.head_w), w.head_b);
    return ops::reshape(logits, {cfg.n_classes});
  });
}

// ---------------------------------------------------------------------------
// Patch cross-correlation

double corr_pair(const std::vector<double>& a, const std::vector<double>& b) {
  const size_t m = a.size();
  double acc = 0.0;
  for (size_t i = 0; i < m; ++i) {
    if (a[i] == 0.0) continue;
    double suffix = 0.0;
    for (size_t j = i; j < m; ++j) suffix += b[j];
    acc += a[i] * suffix;
  }
  return acc;
}

double corr_avg(const Tensor& x_bnd) {
  if (x_bnd.rank() != 3) fail("corr_avg: input must be [B,N,D]");
  const int64_t B = x_bnd.dim(0), N = x_bnd.dim(1), D = x_bnd.dim(2);
  if (B == 0) fail("corr_avg: empty batch");
  const auto& xd = x_bnd.data();

  double total = 0.0;
  std::vector<double> va(static_cast<size_t>(D)), vb(static_cast<size_t>(D));
  for (int64_t b = 0; b < B; ++b) {
    double per_b = 0.0;
    for (int64_t n1 = 0; n1 < N; ++n1) {
      for (int64_t n2 = 0; n2 < N; ++n2) {
        for (int64_t k = 0; k < D; ++k) {
          va[static_cast<size_t>(k)] = xd[static_cast<size_t>((b * N + n1) * D + k)];
          vb[static_cast<size_t>(k)] = xd[static_cast<size_t>((b * N + n2) * D + k)];
        }
        per_b += corr_pair(va, vb);
      }
    }
    total += per_b / (static_cast<double>(N) * static_cast<double>(N));
  }
  return total / static_cast<double>(B);
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {

template <typename T>
void put_raw(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get_raw(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) fail("checkpoint: truncated file");
  return v;
}

}  // namespace

void save_checkpoint(const std::string& path, const ModelConfig& cfg, ModelWeights& w) {
  std::ofstream os(path, std::ios::binary);
  if (!os) fail("cannot open for write: " + path);
  os.write("RMCK", 4);
  put_raw<uint32_t>(os, 1);  // version
  const std::string cfg_json = model_config_to_json(cfg).dump();
  put_raw<uint32_t>(os, static_cast<uint32_t>(cfg_json.size()));
  os.write(cfg_json.data(), static_cast<std::streamsize>(cfg_json.size()));

  auto params = named_params(w);
  auto buffers = named_buffers(w);
  put_raw<uint32_t>(os, static_cast<uint32_t>(params.size() + buffers.size()));
  auto dump = [&](const std::vector<NamedTensor>& list) {
    for (const auto& nt : list) {
      put_raw<uint16_t>(os, static_cast<uint16_t>(nt.name.size()));
      os.write(nt.name.data(), static_cast<std::streamsize>(nt.name.size()));
      write_tensor(os, nt.t);
    }
  };
  dump(params);
  dump(buffers);
  if (!os) fail("checkpoint write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) fail("cannot open for read: " + path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, "RMCK", 4) != 0) fail("checkpoint: bad magic in " + path);
  const uint32_t version = get_raw<uint32_t>(is);
  if (version != 1) fail("checkpoint: unsupported version " + std::to_string(version));
  const uint32_t json_len = get_raw<uint32_t>(is);
  std::string cfg_json(json_len, '\0');
  is.read(cfg_json.data(), json_len);
  if (!is) fail("checkpoint: truncated config");

  Checkpoint ck;
  ck.config = model_config_from_json(json::parse(cfg_json));
  ck.weights = init_weights(ck.config, 0);

  std::map<std::string, Tensor> by_name;
  for (auto& nt : named_params(ck.weights)) by_name.emplace(nt.name, nt.t);
  for (auto& nt : named_buffers(ck.weights)) by_name.emplace(nt.name, nt.t);

  const uint32_t count = get_raw<uint32_t>(is);
  if (count != by_name.size())
    fail("checkpoint: tensor count " + std::to_string(count) + " does not match model (" +
         std::to_string(by_name.size()) + ")");
  for (uint32_t i = 0; i < count; ++i) {
    const uint16_t len = get_raw<uint16_t>(is);
    std::string name(len, '\0');
    is.read(name.data(), len);
    Tensor t = read_tensor(is);
    auto it = by_name.find(name);
    if (it == by_name.end()) fail("checkpoint: unknown tensor '" + name + "'");
    if (t.shape() != it->second.shape())
      fail("checkpoint: shape mismatch for '" + name + "': " + shape_str(t.shape()) +
           " vs " + shape_str(it->second.shape()));
    it->second.mutable_data() = t.data();
    it->second.round_to_precision();
  }
  return ck;
}

// ---------------------------------------------------------------------------
// Config JSON

json model_config_to_json(const ModelConfig& cfg) {
  json j;
  j["input_shape"] = cfg.input_shape;
  j["chan_ds"] = {{"fusion_blocks", cfg.chan_ds.fusion_blocks},
                  {"fused_channels", cfg.chan_ds.fused_channels},
                  {"kernel", {cfg.chan_ds.kernel_h, cfg.chan_ds.kernel_w}},
                  {"ds_factors", {cfg.chan_ds.ds_h, cfg.chan_ds.ds_w}},
                  {"use_avgpool", cfg.chan_ds.use_avgpool}};
  switch (cfg.geometry.kind) {
    case PatchKind::DopplerAligned: j["geometry"] = {{"kind", "doppler_aligned"}}; break;
    case PatchKind::TimeAligned: j["geometry"] = {{"kind", "time_aligned"}}; break;
    case PatchKind::Rectangular:
      j["geometry"] = {{"kind", "rectangular"}, {"patch", {cfg.geometry.h_seg, cfg.geometry.w_seg}}};
      break;
  }
  j["dim"] = cfg.dim;
  j["dim_s"] = cfg.dim_s;
  j["dt_rank"] = cfg.dt_rank;
  j["projection"] = projection_name(cfg.projection);
  j["depth"] = cfg.depth;
  j["n_classes"] = cfg.n_classes;
  j["discretization"] = cfg.discretization == Discretization::Zoh ? "zoh" : "euler";
  j["seed"] = cfg.seed;
  if (!cfg.dim_sweep.empty()) j["dim_sweep"] = cfg.dim_sweep;
  return j;
}

ModelConfig model_config_from_json(const json& j) {
  ModelConfig cfg;
  cfg.input_shape = j.at("input_shape").get<Shape>();
  if (j.contains("chan_ds")) {
    const auto& c = j.at("chan_ds");
    cfg.chan_ds.fusion_blocks = c.value("fusion_blocks", 1);
    cfg.chan_ds.fused_channels = c.value("fused_channels", int64_t{1});
    if (c.contains("kernel")) {
      cfg.chan_ds.kernel_h = c.at("kernel").at(0).get<int>();
      cfg.chan_ds.kernel_w = c.at("kernel").at(1).get<int>();
    }
    if (c.contains("ds_factors")) {
      cfg.chan_ds.ds_h = c.at("ds_factors").at(0).get<int64_t>();
      cfg.chan_ds.ds_w = c.at("ds_factors").at(1).get<int64_t>();
    }
    cfg.chan_ds.use_avgpool = c.value("use_avgpool", -1);
  }
  if (j.contains("geometry")) {
    const auto& g = j.at("geometry");
    const std::string kind = g.value("kind", "doppler_aligned");
    if (kind == "doppler_aligned") {
      cfg.geometry.kind = PatchKind::DopplerAligned;
    } else if (kind == "time_aligned") {
      cfg.geometry.kind = PatchKind::TimeAligned;
    } else if (kind == "rectangular") {
      cfg.geometry.kind = PatchKind::Rectangular;
      cfg.geometry.h_seg = g.at("patch").at(0).get<int64_t>();
      cfg.geometry.w_seg = g.at("patch").at(1).get<int64_t>();
    } else {
      fail("unknown geometry kind '" + kind + "'");
    }
  }
  cfg.dim = j.value("dim", int64_t{16});
  cfg.dim_s = j.value("dim_s", int64_t{16});
  cfg.dt_rank = j.value("dt_rank", int64_t{0});
  cfg.projection = projection_from_name(j.value("projection", "conv1d"));
  cfg.depth = j.value("depth", 1);
  cfg.n_classes = j.value("n_classes", 2);
  const std::string disc = j.value("discretization", "zoh");
  if (disc == "zoh") {
    cfg.discretization = Discretization::Zoh;
  } else if (disc == "euler") {
    cfg.discretization = Discretization::Euler;
  } else {
    fail("unknown discretization '" + disc + "' (zoh|euler)");
  }
  cfg.seed = j.value("seed", uint64_t{0});
  if (j.contains("dim_sweep")) cfg.dim_sweep = j.at("dim_sweep").get<std::vector<int64_t>>();
  return cfg;
}

uint64_t fnv1a64(std::string_view s) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string config_hash(const json& effective_config) {
  const uint64_t h = fnv1a64(effective_config.dump());
  char buf[24];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace radmamba
