#pragma once
// Cost accounting from shapes alone (no weight instantiation) and the
// ablation-grid runner over projection kind x patch geometry x downsampling.

#include <array>
#include <atomic>
#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "radmamba/model.hpp"
#include "radmamba/signal.hpp"
#include "radmamba/train.hpp"

namespace radmamba {

struct CostRow {
  std::string name;
  int64_t params = 0;
  int64_t flops = 0;
  bool aux = false;  // normalization / activation / pooling term
};

struct CostReport {
  std::vector<CostRow> rows;
  int64_t total_params = 0;
  int64_t total_flops = 0;
  std::string convention;
};

// Exact trainable-parameter count per layer (batchnorm/layernorm affine and
// all biases included; running stats are buffers, not parameters).
CostReport count_params(const ModelConfig& cfg);

// FLOPs for one single-sample inference, 2 FLOPs per multiply-accumulate.
// Default mode drops normalization/activation/pooling rows below 1% of the
// all-inclusive total; strict keeps everything. Totals always equal the sum
// of the reported rows.
CostReport count_flops(const ModelConfig& cfg, bool strict = false);

nlohmann::json cost_report_to_json(const CostReport& r);
std::string cost_report_csv(const CostReport& r);

struct CalibrationEntry {
  int64_t dim = 0;
  int64_t params = 0;
};

struct Calibration {
  std::vector<CalibrationEntry> table;
  int64_t best_dim = 0;
  int64_t best_params = 0;
};

// Scans the sweep list and picks the dim whose parameter count lands nearest
// target_params (ties to the smaller dim).
Calibration calibrate_dim(const ModelConfig& cfg, const std::vector<int64_t>& sweep,
                          int64_t target_params);

struct AblationGrid {
  std::vector<ProjectionKind> projections;
  std::vector<PatchGeometry> geometries;
  std::vector<std::array<int64_t, 2>> ds_factors;
  std::vector<uint64_t> seeds;
};

// The Table-style default: 3 projections x 3 geometries x 3 downsamplings.
AblationGrid default_ablation_grid(const ModelConfig& base, const std::vector<uint64_t>& seeds);

struct AblationResult {
  ProjectionKind projection;
  PatchGeometry geometry;
  std::array<int64_t, 2> ds;
  std::vector<double> per_seed_accuracy;
  std::vector<double> per_seed_wall_s;
  double mean_accuracy = 0.0;
  double std_accuracy = 0.0;
  int64_t params = 0;
  bool is_radmamba = false;  // (Conv1dK3, DopplerAligned, base DS factors)
  std::string error;        // non-empty when the cell failed; grid continues
};

// Trains every valid grid cell over the seed list; cells run on the worker
// pool. Invalid or failing cells carry their error and do not stop the grid.
// When `cancel` flips to true, pending runs are skipped and marked
// interrupted so partial results can still be flushed.
std::vector<AblationResult> run_ablation(const ModelConfig& base, const AblationGrid& grid,
                                         const Dataset& train_data, const Dataset& test_data,
                                         const TrainConfig& tcfg,
                                         const std::atomic<bool>* cancel = nullptr);

std::string ablation_csv(const std::vector<AblationResult>& results);

}  // namespace radmamba
