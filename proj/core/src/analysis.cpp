#include "radmamba/analysis.hpp"

#include <cmath>
#include <sstream>

#include "radmamba/threading.hpp"

using nlohmann::json;

namespace radmamba {

namespace {

int64_t proj_params(const ModelConfig& cfg, bool is_p3) {
  const int64_t d = cfg.dim;
  switch (cfg.projection) {
    case ProjectionKind::Linear1: return d * d + d;
    case ProjectionKind::Linear3: return is_p3 ? d * d + d : 3 * (d * d + d);
    case ProjectionKind::Conv1dK3: {
      const int64_t k = is_p3 ? 1 : 3;
      return d * d * k + d;
    }
  }
  return 0;
}

int64_t ssm_params(const ModelConfig& cfg) {
  const int64_t d = cfg.dim, s = cfg.dim_s, r = cfg.dt_rank;
  int64_t n = d * s;      // a_log
  n += d;                 // d (skip)
  n += 2 * d * s;         // w_b, w_c
  if (r > 0) n += d * r + r * d;
  n += d;                 // dt_bias
  return n;
}

}  // namespace

CostReport count_params(const ModelConfig& cfg) {
  const ModelDims dims = derive_dims(cfg);
  CostReport rep;
  rep.convention = "trainable scalars; batchnorm running stats excluded";

  int64_t c_in = cfg.input_shape[0];
  for (int l = 0; l < cfg.chan_ds.fusion_blocks; ++l) {
    const std::string base = "chan_ds." + std::to_string(l);
    const int64_t conv = cfg.chan_ds.fused_channels * c_in * cfg.chan_ds.kernel_h *
                             cfg.chan_ds.kernel_w +
                         cfg.chan_ds.fused_channels;
    rep.rows.push_back({base + ".conv", conv, 0, false});
    rep.rows.push_back({base + ".bn", 2 * cfg.chan_ds.fused_channels, 0, false});
    c_in = cfg.chan_ds.fused_channels;
  }

  rep.rows.push_back({"embed", dims.p * cfg.dim + cfg.dim, 0, false});

  for (int i = 0; i < cfg.depth; ++i) {
    const std::string base = "block." + std::to_string(i);
    rep.rows.push_back({base + ".norm", 2 * cfg.dim, 0, false});
    rep.rows.push_back({base + ".p1", proj_params(cfg, false), 0, false});
    rep.rows.push_back({base + ".p2", proj_params(cfg, false), 0, false});
    rep.rows.push_back({base + ".p3", proj_params(cfg, true), 0, false});
    for (const char* dir : {"fw", "bw"}) {
      rep.rows.push_back({base + "." + dir + ".conv", cfg.dim * cfg.dim + cfg.dim, 0, false});
      rep.rows.push_back({base + "." + dir + ".ln", 2 * cfg.dim, 0, false});
      rep.rows.push_back({base + "." + dir + ".ssm", ssm_params(cfg), 0, false});
    }
  }

  rep.rows.push_back({"head", dims.n * cfg.dim * cfg.n_classes + cfg.n_classes, 0, false});

  for (const auto& r : rep.rows) rep.total_params += r.params;
  return rep;
}

CostReport count_flops(const ModelConfig& cfg, bool strict) {
  const ModelDims dims = derive_dims(cfg);
  const int64_t H = cfg.input_shape[1], W = cfg.input_shape[2];
  const int64_t n = dims.n, d = cfg.dim, s = cfg.dim_s, r = cfg.dt_rank;
  CostReport rep;
  rep.convention = "2 FLOPs per MAC, batch 1, single inference";

  auto row = [&](const std::string& name, int64_t flops, bool aux = false) {
    rep.rows.push_back({name, 0, flops, aux});
  };

  int64_t c_in = cfg.input_shape[0];
  for (int l = 0; l < cfg.chan_ds.fusion_blocks; ++l) {
    const std::string base = "chan_ds." + std::to_string(l);
    const int64_t c_out = cfg.chan_ds.fused_channels;
    // stride-1 same-padding convs run at full input resolution
    row(base + ".conv",
        2 * c_out * c_in * cfg.chan_ds.kernel_h * cfg.chan_ds.kernel_w * H * W + c_out * H * W);
    row(base + ".bn", 2 * c_out * H * W, true);
    c_in = cfg.chan_ds.fused_channels;
  }
  {
    const PoolPlan plan = plan_pooling(cfg.chan_ds.ds_h, cfg.chan_ds.ds_w, cfg.chan_ds.use_avgpool);
    const int64_t c = cfg.chan_ds.fused_channels;
    int64_t h = H, w = W;
    if (plan.mp2d_h > 1 || plan.mp2d_w > 1) {
      h /= plan.mp2d_h;
      w /= plan.mp2d_w;
      row("chan_ds.maxpool2d", (plan.mp2d_h * plan.mp2d_w - 1) * c * h * w, true);
    }
    if (plan.mp1d_h > 1) {
      h /= plan.mp1d_h;
      row("chan_ds.maxpool1d_h", (plan.mp1d_h - 1) * c * h * w, true);
    }
    if (plan.mp1d_w > 1) {
      w /= plan.mp1d_w;
      row("chan_ds.maxpool1d_w", (plan.mp1d_w - 1) * c * h * w, true);
    }
    if (plan.avg_w > 1) {
      w /= plan.avg_w;
      row("chan_ds.avgpool1d_w", plan.avg_w * c * h * w, true);
    }
  }

  row("embed", 2 * dims.p * d * n + n * d);
  row("pos_encode", n * d, true);

  auto proj_flops = [&](bool is_p3) -> int64_t {
    switch (cfg.projection) {
      case ProjectionKind::Linear1: return 2 * d * d * n + n * d;
      case ProjectionKind::Linear3:
        return is_p3 ? 2 * d * d * n + n * d : 3 * (2 * d * d * n + n * d);
      case ProjectionKind::Conv1dK3: {
        const int64_t k = is_p3 ? 1 : 3;
        return 2 * d * d * k * n + n * d;
      }
    }
    return 0;
  };

  for (int i = 0; i < cfg.depth; ++i) {
    const std::string base = "block." + std::to_string(i);
    row(base + ".norm", 8 * n * d, true);
    row(base + ".p1", proj_flops(false));
    row(base + ".p2", proj_flops(false));
    row(base + ".silu_gate", 4 * n * d, true);
    for (const char* dir : {"fw", "bw"}) {
      const std::string b = base + "." + dir;
      row(b + ".conv", 2 * d * d * n + n * d);
      row(b + ".ln", 8 * n * d, true);
      row(b + ".ssm.gen_b", 2 * n * d * s);
      row(b + ".ssm.gen_c", 2 * n * d * s);
      if (r > 0) row(b + ".ssm.gen_delta", 2 * n * d * r + 2 * n * r * d + n * d);
      row(b + ".ssm.softplus", 4 * n * d, true);
      // a_bar: mul+exp per element; zoh b_bar: 4 ops per element, euler: 1
      row(b + ".ssm.discretize",
          2 * n * d * s + (cfg.discretization == Discretization::Zoh ? 4 : 1) * n * d * s);
      // state update + output projection, plus the D skip path
      row(b + ".ssm.scan", 2 * n * d * s + 2 * n * d * s + 2 * n * d);
    }
    row(base + ".gating", 3 * n * d);
    row(base + ".p3", proj_flops(true));
    row(base + ".residual", n * d, true);
  }

  row("head", 2 * n * d * cfg.n_classes + cfg.n_classes);

  if (!strict) {
    int64_t total_all = 0;
    for (const auto& rw : rep.rows) total_all += rw.flops;
    const double cutoff = 0.01 * static_cast<double>(total_all);
    std::vector<CostRow> kept;
    for (const auto& rw : rep.rows)
      if (!rw.aux || static_cast<double>(rw.flops) >= cutoff) kept.push_back(rw);
    rep.rows = std::move(kept);
    rep.convention += "; aux ops below 1% dropped";
  } else {
    rep.convention += "; strict (all normalization/activation/pooling counted)";
  }

  for (const auto& rw : rep.rows) rep.total_flops += rw.flops;
  return rep;
}

json cost_report_to_json(const CostReport& r) {
  json rows = json::array();
  for (const auto& row : r.rows) {
    json jr;
    jr["name"] = row.name;
    if (row.params) jr["params"] = row.params;
    if (row.flops) jr["flops"] = row.flops;
    rows.push_back(jr);
  }
  json j;
  j["rows"] = rows;
  j["total_params"] = r.total_params;
  j["total_flops"] = r.total_flops;
  j["convention"] = r.convention;
  return j;
}

std::string cost_report_csv(const CostReport& r) {
  std::ostringstream os;
  os << "name,params,flops\n";
  for (const auto& row : r.rows) os << row.name << "," << row.params << "," << row.flops << "\n";
  os << "total," << r.total_params << "," << r.total_flops << "\n";
  return os.str();
}

Calibration calibrate_dim(const ModelConfig& cfg, const std::vector<int64_t>& sweep,
                          int64_t target_params) {
  if (sweep.empty()) fail("calibrate_dim: empty sweep list");
  Calibration cal;
  int64_t best_err = -1;
  for (int64_t dim : sweep) {
    ModelConfig c = cfg;
    c.dim = dim;
    const int64_t p = count_params(c).total_params;
    cal.table.push_back({dim, p});
    const int64_t err = std::llabs(p - target_params);
    if (best_err < 0 || err < best_err) {
      best_err = err;
      cal.best_dim = dim;
      cal.best_params = p;
    }
  }
  return cal;
}

// ---------------------------------------------------------------------------
// Ablation

AblationGrid default_ablation_grid(const ModelConfig& base, const std::vector<uint64_t>& seeds) {
  AblationGrid g;
  g.projections = {ProjectionKind::Linear1, ProjectionKind::Linear3, ProjectionKind::Conv1dK3};
  g.geometries = {PatchGeometry{PatchKind::Rectangular, 7, 7},
                  PatchGeometry{PatchKind::TimeAligned},
                  PatchGeometry{PatchKind::DopplerAligned}};
  g.ds_factors = {{1, 1}, {8, 2}, {base.chan_ds.ds_h, base.chan_ds.ds_w}};
  g.seeds = seeds;
  return g;
}

std::vector<AblationResult> run_ablation(const ModelConfig& base, const AblationGrid& grid,
                                         const Dataset& train_data, const Dataset& test_data,
                                         const TrainConfig& tcfg,
                                         const std::atomic<bool>* cancel) {
  if (grid.seeds.empty()) fail("run_ablation: no seeds");
  struct Cell {
    ProjectionKind proj;
    PatchGeometry geom;
    std::array<int64_t, 2> ds;
  };
  std::vector<Cell> cells;
  for (auto proj : grid.projections)
    for (const auto& geom : grid.geometries)
      for (const auto& ds : grid.ds_factors) cells.push_back({proj, geom, ds});

  std::vector<AblationResult> results(cells.size());
  const int64_t n_seeds = static_cast<int64_t>(grid.seeds.size());
  const int64_t n_runs = static_cast<int64_t>(cells.size()) * n_seeds;

  for (size_t ci = 0; ci < cells.size(); ++ci) {
    auto& res = results[ci];
    res.projection = cells[ci].proj;
    res.geometry = cells[ci].geom;
    res.ds = cells[ci].ds;
    res.is_radmamba = cells[ci].proj == ProjectionKind::Conv1dK3 &&
                      cells[ci].geom.kind == PatchKind::DopplerAligned &&
                      cells[ci].ds[0] == base.chan_ds.ds_h && cells[ci].ds[1] == base.chan_ds.ds_w;
    res.per_seed_accuracy.assign(static_cast<size_t>(n_seeds), 0.0);
    res.per_seed_wall_s.assign(static_cast<size_t>(n_seeds), 0.0);
  }

  auto cell_config = [&](const Cell& cell) {
    ModelConfig cfg = base;
    cfg.projection = cell.proj;
    cfg.geometry = cell.geom;
    cfg.chan_ds.ds_h = cell.ds[0];
    cfg.chan_ds.ds_w = cell.ds[1];
    return cfg;
  };

  std::vector<std::string> run_errors(static_cast<size_t>(n_runs));
  parallel_for(n_runs, [&](int64_t run) {
    const size_t ci = static_cast<size_t>(run / n_seeds);
    const size_t si = static_cast<size_t>(run % n_seeds);
    if (cancel && cancel->load()) {
      run_errors[static_cast<size_t>(run)] = "interrupted";
      return;
    }
    try {
      ModelConfig cfg = cell_config(cells[ci]);
      TrainConfig single = tcfg;
      single.seeds = {grid.seeds[si]};
      TrainResult tr = train(cfg, train_data, test_data, single, grid.seeds[si]);
      results[ci].per_seed_accuracy[si] = tr.report.best_accuracy;
      results[ci].per_seed_wall_s[si] = tr.report.wall_time_s;
    } catch (const std::exception& e) {
      run_errors[static_cast<size_t>(run)] = e.what();
    }
  });

  for (size_t ci = 0; ci < cells.size(); ++ci) {
    auto& res = results[ci];
    for (int64_t si = 0; si < n_seeds; ++si) {
      const auto& err = run_errors[static_cast<size_t>(ci) * static_cast<size_t>(n_seeds) +
                                   static_cast<size_t>(si)];
      if (!err.empty() && res.error.empty()) res.error = err;
    }
    if (!res.error.empty()) {
      res.per_seed_accuracy.clear();
      res.per_seed_wall_s.clear();
      continue;
    }
    try {
      res.params = count_params(cell_config(cells[ci])).total_params;
    } catch (const std::exception& e) {
      res.error = e.what();
      res.per_seed_accuracy.clear();
      res.per_seed_wall_s.clear();
      continue;
    }
    double mean = 0.0;
    for (double a : res.per_seed_accuracy) mean += a;
    mean /= static_cast<double>(res.per_seed_accuracy.size());
    double var = 0.0;
    for (double a : res.per_seed_accuracy) var += (a - mean) * (a - mean);
    // sample std over seeds, matching how sweep tables report spread
    res.std_accuracy = res.per_seed_accuracy.size() > 1
                           ? std::sqrt(var / static_cast<double>(res.per_seed_accuracy.size() - 1))
                           : 0.0;
    res.mean_accuracy = mean;
  }
  return results;
}

namespace {

std::string geometry_str(const PatchGeometry& g) {
  switch (g.kind) {
    case PatchKind::DopplerAligned: return "doppler_aligned";
    case PatchKind::TimeAligned: return "time_aligned";
    case PatchKind::Rectangular:
      return "rect" + std::to_string(g.h_seg) + "x" + std::to_string(g.w_seg);
  }
  return "?";
}

}  // namespace

std::string ablation_csv(const std::vector<AblationResult>& results) {
  std::ostringstream os;
  os << "projection,patch,ds_h,ds_w,mean_acc,std_acc,params,n_seeds,radmamba,error\n";
  for (const auto& r : results) {
    os << projection_name(r.projection) << "," << geometry_str(r.geometry) << "," << r.ds[0]
       << "," << r.ds[1] << ",";
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6f,%.6f", r.mean_accuracy, r.std_accuracy);
    std::string err = r.error;  // keep one row per cell
    for (char& ch : err)
      if (ch == '\n' || ch == ',') ch = ';';
    os << buf << "," << r.params << "," << r.per_seed_accuracy.size() << ","
       << (r.is_radmamba ? 1 : 0) << "," << err << "\n";
  }
  return os.str();
}

}  // namespace radmamba
