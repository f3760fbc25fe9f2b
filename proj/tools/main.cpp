// radmamba: one executable for the whole pipeline - data synthesis, training,
// evaluation, cost accounting, correlation diagnostics and the ablation grid.

#include <atomic>
#include <csignal>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "json.hpp"
#include "radmamba/analysis.hpp"
#include "radmamba/model.hpp"
#include "radmamba/rng.hpp"
#include "radmamba/signal.hpp"
#include "radmamba/threading.hpp"
#include "radmamba/train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace radmamba;

namespace {

std::atomic<bool> g_interrupted{false};

void on_sigint(int) { g_interrupted.store(true); }

struct FileConfig {
  json raw;
  ModelConfig model;
  TrainConfig train;
  std::string data_root;
  double split_ratio = 0.8;
  uint64_t split_seed = 0;
};

FileConfig load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) fail("cannot open config: " + path);
  FileConfig fc;
  is >> fc.raw;
  if (!fc.raw.contains("model")) fail("config missing 'model' section: " + path);
  fc.model = model_config_from_json(fc.raw.at("model"));
  if (fc.raw.contains("train")) fc.train = train_config_from_json(fc.raw.at("train"));
  if (fc.raw.contains("data")) {
    const auto& d = fc.raw.at("data");
    fc.data_root = d.value("root", "");
    fc.split_ratio = d.value("split_ratio", 0.8);
    fc.split_seed = d.value("split_seed", uint64_t{0});
  }
  return fc;
}

void check_config(const FileConfig& fc) {
  std::vector<std::string> bad = validate_model_config(fc.model);
  for (auto& b : validate_train_config(fc.train)) bad.push_back(b);
  if (!bad.empty()) {
    std::string msg = "invalid config:";
    for (const auto& b : bad) msg += "\n  - " + b;
    fail(msg);
  }
}

json effective_config_json(const FileConfig& fc) {
  json j;
  j["model"] = model_config_to_json(fc.model);
  j["train"] = train_config_to_json(fc.train);
  j["data"] = {{"root", fc.data_root}, {"split_ratio", fc.split_ratio}, {"split_seed", fc.split_seed}};
  return j;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) fail("cannot open for write: " + path);
  os << text;
}

std::pair<Dataset, Dataset> load_and_split(const FileConfig& fc) {
  if (fc.data_root.empty()) fail("no dataset: set data.root or pass --data");
  Dataset all = load_dataset_dir(fc.data_root);
  if (static_cast<int>(all.class_names.size()) != fc.model.n_classes)
    fail("dataset has " + std::to_string(all.class_names.size()) + " classes but model expects " +
         std::to_string(fc.model.n_classes));
  for (const auto& s : all.samples)
    if (s.x.shape() != fc.model.input_shape)
      fail("sample '" + s.id + "' shape " + shape_str(s.x.shape()) +
           " does not match model input " + shape_str(fc.model.input_shape));
  return split_dataset(all, fc.split_ratio, fc.split_seed);
}

// ---------------------------------------------------------------------------

int cmd_synth(const std::string& out_dir, int n_classes, int64_t n_per_class, uint64_t seed,
              bool continuous, int segments, int64_t segment_bins) {
  auto classes = default_synth_classes();
  if (n_classes < 2 || n_classes > static_cast<int>(classes.size()))
    fail("--classes must lie in [2," + std::to_string(classes.size()) + "]");
  classes.resize(static_cast<size_t>(n_classes));

  if (continuous) {
    std::vector<int> order;
    Rng rng = Rng::derive(seed, 0xc0117ULL);
    for (int i = 0; i < segments; ++i)
      order.push_back(static_cast<int>(rng.integer(static_cast<int64_t>(classes.size()))));
    Spectrogram seq = synth_continuous(classes, order, segment_bins, seed);
    std::vector<std::string> names;
    for (const auto& c : classes) names.push_back(c.name);
    write_continuous_dir(out_dir, seq, names, seed);
    std::printf("wrote continuous sequence: %lld time bins, %d segments -> %s\n",
                static_cast<long long>(seq.time_bins()), segments, out_dir.c_str());
    return 0;
  }

  auto [train_d, test_d] = make_dataset(classes, n_per_class, 1.0, seed);
  (void)test_d;  // ratio 1.0: all samples in one pool; consumers split at load time
  write_dataset_dir(out_dir, train_d, test_d, seed);
  for (size_t c = 0; c < classes.size(); ++c) {
    int64_t count = 0;
    for (const auto& s : train_d.samples)
      if (s.label == static_cast<int>(c)) ++count;
    std::printf("%-8s %lld samples\n", classes[c].name.c_str(), static_cast<long long>(count));
  }
  std::printf("wrote dataset -> %s\n", out_dir.c_str());
  return 0;
}

int cmd_train(FileConfig fc, const std::string& out_dir, bool single_seed, uint64_t seed_flag) {
  check_config(fc);
  auto [train_d, test_d] = load_and_split(fc);
  fs::create_directories(out_dir);

  const json eff = effective_config_json(fc);
  const std::string hash = config_hash(eff);
  write_text(out_dir + "/config.json", eff.dump(2) + "\n");

  std::vector<uint64_t> seeds = single_seed ? std::vector<uint64_t>{seed_flag} : fc.train.seeds;
  std::vector<RunReport> reports(seeds.size());
  std::vector<ModelWeights> best(seeds.size());

  parallel_for(static_cast<int64_t>(seeds.size()), [&](int64_t i) {
    TrainResult tr = train(fc.model, train_d, test_d, fc.train, seeds[static_cast<size_t>(i)]);
    reports[static_cast<size_t>(i)] = std::move(tr.report);
    best[static_cast<size_t>(i)] = std::move(tr.best_weights);
  });

  double mean = 0.0;
  for (size_t i = 0; i < seeds.size(); ++i) {
    reports[i].config_hash = hash;
    json jr = report_to_json(reports[i]);
    jr["config"] = eff;
    const std::string tag = std::to_string(seeds[i]);
    write_text(out_dir + "/report_seed" + tag + ".json", jr.dump(2) + "\n");
    save_checkpoint(out_dir + "/model_seed" + tag + ".ckpt", fc.model, best[i]);
    std::printf("seed %s: best accuracy %.4f (epoch %d), wall %.1fs\n", tag.c_str(),
                reports[i].best_accuracy, reports[i].best_epoch, reports[i].wall_time_s);
    mean += reports[i].best_accuracy;
  }
  std::printf("mean best accuracy over %zu seed(s): %.4f\n", seeds.size(),
              mean / static_cast<double>(seeds.size()));
  return 0;
}

int cmd_eval(const std::string& ckpt_path, const std::string& data_dir,
             const std::string& out_dir, int64_t frame_len, int64_t stride) {
  Checkpoint ck = load_checkpoint(ckpt_path);
  fs::create_directories(out_dir);
  const json eff = model_config_to_json(ck.config);
  const std::string hash = config_hash(eff);

  if (is_continuous_dir(data_dir)) {
    Spectrogram seq = load_continuous_dir(data_dir);
    WindowSpec win{frame_len > 0 ? frame_len : ck.config.input_shape[2], stride};
    ContinuousEval ev =
        eval_continuous(ck.config, ck.weights, seq, win, out_dir + "/prediction_track.csv");
    json j;
    j["mode"] = "continuous";
    j["frame_accuracy"] = ev.accuracy;
    j["windows"] = ev.track.size();
    j["config_hash"] = hash;
    j["config"] = eff;
    write_text(out_dir + "/metrics.json", j.dump(2) + "\n");
    std::printf("frame accuracy %.4f over %zu windows\n", ev.accuracy, ev.track.size());
    return 0;
  }

  Dataset data = load_dataset_dir(data_dir);
  EvalResult ev = evaluate(ck.config, ck.weights, data);
  json j;
  j["mode"] = "snippets";
  j["accuracy"] = ev.accuracy;
  j["samples"] = data.samples.size();
  j["config_hash"] = hash;
  j["config"] = eff;
  write_text(out_dir + "/metrics.json", j.dump(2) + "\n");
  std::ostringstream cm;
  for (const auto& row : ev.confusion) {
    for (size_t i = 0; i < row.size(); ++i) cm << (i ? "," : "") << row[i];
    cm << "\n";
  }
  write_text(out_dir + "/confusion.csv", cm.str());
  std::printf("accuracy %.4f over %zu samples\n", ev.accuracy, data.samples.size());
  return 0;
}

int cmd_count(const FileConfig& fc, bool flops, bool strict, const std::string& out_path) {
  CostReport rep = flops ? count_flops(fc.model, strict) : count_params(fc.model);
  json j = cost_report_to_json(rep);
  j["config_hash"] = config_hash(effective_config_json(fc));
  if (!out_path.empty()) write_text(out_path, j.dump(2) + "\n");
  std::printf("%-28s %12s %14s\n", "layer", "params", "flops");
  for (const auto& row : rep.rows)
    std::printf("%-28s %12lld %14lld\n", row.name.c_str(), static_cast<long long>(row.params),
                static_cast<long long>(row.flops));
  std::printf("%-28s %12lld %14lld\n", "total", static_cast<long long>(rep.total_params),
              static_cast<long long>(rep.total_flops));
  std::printf("convention: %s\n", rep.convention.c_str());
  return 0;
}

int cmd_corr(const std::string& ckpt_path, const std::string& data_dir, int block_index,
             int64_t batch, const std::string& out_path) {
  Checkpoint ck = load_checkpoint(ckpt_path);
  Dataset data = load_dataset_dir(data_dir);
  if (data.samples.empty()) fail("corr: empty dataset");
  const int64_t b = std::min<int64_t>(batch, static_cast<int64_t>(data.samples.size()));

  std::vector<Tensor> p1i, p1o, p2i, p2o, p3i, p3o;
  for (int64_t i = 0; i < b; ++i) {
    ActivationCapture cap;
    cap.block_index = block_index;
    model_forward(data.samples[static_cast<size_t>(i)].x, ck.config, ck.weights,
                  /*training=*/false, &cap);
    p1i.push_back(ops::reshape(cap.p1_in, {1, cap.p1_in.dim(0), cap.p1_in.dim(1)}));
    p1o.push_back(ops::reshape(cap.p1_out, {1, cap.p1_out.dim(0), cap.p1_out.dim(1)}));
    p2i.push_back(ops::reshape(cap.p2_in, {1, cap.p2_in.dim(0), cap.p2_in.dim(1)}));
    p2o.push_back(ops::reshape(cap.p2_out, {1, cap.p2_out.dim(0), cap.p2_out.dim(1)}));
    p3i.push_back(ops::reshape(cap.p3_in, {1, cap.p3_in.dim(0), cap.p3_in.dim(1)}));
    p3o.push_back(ops::reshape(cap.p3_out, {1, cap.p3_out.dim(0), cap.p3_out.dim(1)}));
  }
  auto stack_bnd = [](const std::vector<Tensor>& v) {
    std::vector<Tensor> rows;
    for (const auto& t : v) rows.push_back(ops::reshape(t, {t.dim(1) * t.dim(2)}));
    Tensor flat = ops::stack_rows(rows);  // [B, N*D]
    return ops::reshape(flat, {static_cast<int64_t>(v.size()), v[0].dim(1), v[0].dim(2)});
  };

  const double c1i = corr_avg(stack_bnd(p1i)), c1o = corr_avg(stack_bnd(p1o));
  const double c2i = corr_avg(stack_bnd(p2i)), c2o = corr_avg(stack_bnd(p2o));
  const double c3i = corr_avg(stack_bnd(p3i)), c3o = corr_avg(stack_bnd(p3o));

  std::printf("averaged patch cross-correlation (block %d, %lld samples)\n", block_index,
              static_cast<long long>(b));
  std::printf("%-12s %14s %14s\n", "projection", "at input", "at output");
  std::printf("%-12s %14.4f %14.4f\n", "P1", c1i, c1o);
  std::printf("%-12s %14.4f %14.4f\n", "P2", c2i, c2o);
  std::printf("%-12s %14.4f %14.4f\n", "P3", c3i, c3o);

  if (!out_path.empty()) {
    json j;
    j["block"] = block_index;
    j["samples"] = b;
    j["p1"] = {{"input", c1i}, {"output", c1o}};
    j["p2"] = {{"input", c2i}, {"output", c2o}};
    j["p3"] = {{"input", c3i}, {"output", c3o}};
    j["config_hash"] = config_hash(model_config_to_json(ck.config));
    write_text(out_path, j.dump(2) + "\n");
  }
  return 0;
}

int cmd_ablate(FileConfig fc, const std::string& out_path, const std::vector<uint64_t>& seeds) {
  check_config(fc);
  auto [train_d, test_d] = load_and_split(fc);
  AblationGrid grid = default_ablation_grid(fc.model, seeds.empty() ? fc.train.seeds : seeds);

  std::signal(SIGINT, on_sigint);
  auto results = run_ablation(fc.model, grid, train_d, test_d, fc.train, &g_interrupted);
  const std::string csv =
      "# config_hash=" + config_hash(effective_config_json(fc)) + "\n" + ablation_csv(results);
  if (!out_path.empty()) write_text(out_path, csv);
  std::fputs(csv.c_str(), stdout);
  if (g_interrupted.load()) {
    std::fprintf(stderr, "interrupted; partial results flushed\n");
    return 130;
  }
  return 0;
}

int cmd_calibrate(const FileConfig& fc, int64_t target_params) {
  std::vector<int64_t> sweep = fc.model.dim_sweep;
  if (sweep.empty()) fail("calibrate-dim: config has no dim_sweep list");
  Calibration cal = calibrate_dim(fc.model, sweep, target_params);
  std::printf("%8s %12s %14s\n", "dim", "params", "|delta|");
  for (const auto& e : cal.table)
    std::printf("%8lld %12lld %14lld\n", static_cast<long long>(e.dim),
                static_cast<long long>(e.params),
                static_cast<long long>(std::llabs(e.params - target_params)));
  std::printf("best dim %lld with %lld params (target %lld)\n",
              static_cast<long long>(cal.best_dim), static_cast<long long>(cal.best_params),
              static_cast<long long>(target_params));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"RadMamba: micro-Doppler bidirectional selective-SSM classifier"};
  app.require_subcommand(1);

  std::string config_path, data_dir, out_dir = "out", out_path, ckpt_path;
  uint64_t seed = 0;
  bool seed_set = false;

  // synth
  auto* synth = app.add_subcommand("synth", "generate a synthetic micro-Doppler dataset");
  int synth_classes = 4, synth_segments = 8;
  int64_t synth_n = 60, synth_segment_bins = 112;
  bool synth_continuous = false;
  synth->add_option("--out", out_dir, "output dataset directory")->required();
  synth->add_option("--classes", synth_classes, "number of classes from the default pack");
  synth->add_option("--n-per-class", synth_n, "samples per class");
  synth->add_option("--seed", seed, "generation seed");
  synth->add_flag("--continuous", synth_continuous, "one continuous sequence + labels.csv");
  synth->add_option("--segments", synth_segments, "continuous mode: number of activity segments");
  synth->add_option("--segment-bins", synth_segment_bins, "continuous mode: time bins per segment");

  // shared model/train options
  auto add_config_opts = [&](CLI::App* cmd, bool with_train_overrides) {
    cmd->add_option("--config", config_path, "JSON config file")->required();
    cmd->add_option("--data", data_dir, "dataset directory (overrides data.root)");
    if (with_train_overrides) {
      cmd->add_option_function<uint64_t>(
             "--seed", [&](const uint64_t& v) { seed = v; seed_set = true; },
             "train a single seed instead of the config seed list");
    }
  };

  auto* train_cmd = app.add_subcommand("train", "train on a dataset directory");
  add_config_opts(train_cmd, true);
  train_cmd->add_option("--out", out_dir, "artifact directory");
  int epochs_override = -1;
  double lr_override = -1.0;
  int batch_override = -1;
  std::string monitor_override;
  auto add_train_overrides = [&](CLI::App* cmd) {
    cmd->add_option("--epochs", epochs_override, "override train.epochs");
    cmd->add_option("--lr", lr_override, "override train.lr");
    cmd->add_option("--batch-size", batch_override, "override train.batch_size");
    cmd->add_option("--monitor", monitor_override, "plateau metric: test|val");
  };
  add_train_overrides(train_cmd);

  auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint on a dataset");
  eval_cmd->add_option("--checkpoint", ckpt_path, "model checkpoint")->required();
  eval_cmd->add_option("--data", data_dir, "dataset directory")->required();
  eval_cmd->add_option("--out", out_dir, "artifact directory");
  int64_t frame_len = 0, stride = 1;
  eval_cmd->add_option("--frame-len", frame_len, "continuous mode frame length");
  eval_cmd->add_option("--stride", stride, "continuous mode stride");

  auto* count_cmd = app.add_subcommand("count", "parameter count per layer");
  add_config_opts(count_cmd, false);
  count_cmd->add_option("--out", out_path, "also write report JSON here");

  auto* flops_cmd = app.add_subcommand("flops", "FLOPs per inference per layer");
  add_config_opts(flops_cmd, false);
  bool strict = false;
  flops_cmd->add_flag("--strict", strict, "count all normalization/activation/pooling ops");
  flops_cmd->add_option("--out", out_path, "also write report JSON here");

  auto* corr_cmd = app.add_subcommand("corr", "averaged patch cross-correlation at P1/P2/P3");
  corr_cmd->add_option("--checkpoint", ckpt_path, "model checkpoint")->required();
  corr_cmd->add_option("--data", data_dir, "dataset directory")->required();
  int corr_block = 0;
  int64_t corr_batch = 8;
  corr_cmd->add_option("--block", corr_block, "block index to probe");
  corr_cmd->add_option("--batch", corr_batch, "number of samples");
  corr_cmd->add_option("--out", out_path, "also write report JSON here");

  auto* ablate_cmd = app.add_subcommand("ablate", "projection x patch x downsampling grid");
  add_config_opts(ablate_cmd, false);
  std::vector<uint64_t> ablate_seeds;
  ablate_cmd->add_option("--seeds", ablate_seeds, "seed list (default: train.seeds)");
  ablate_cmd->add_option("--out", out_path, "grid CSV path");
  add_train_overrides(ablate_cmd);

  auto* cal_cmd = app.add_subcommand("calibrate-dim", "pick dim from the sweep for a target size");
  add_config_opts(cal_cmd, false);
  int64_t target_params = 0;
  cal_cmd->add_option("--target-params", target_params, "parameter budget")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth->parsed())
      return cmd_synth(out_dir, synth_classes, synth_n, seed, synth_continuous, synth_segments,
                       synth_segment_bins);

    FileConfig fc;
    if (!config_path.empty()) {
      fc = load_config(config_path);
      if (!data_dir.empty()) fc.data_root = data_dir;
      if (epochs_override >= 0) fc.train.epochs = epochs_override;
      if (lr_override > 0.0) fc.train.lr0 = lr_override;
      if (batch_override > 0) fc.train.batch_size = batch_override;
      if (!monitor_override.empty()) fc.train.monitor = monitor_override;
    }

    if (train_cmd->parsed()) return cmd_train(fc, out_dir, seed_set, seed);
    if (eval_cmd->parsed()) return cmd_eval(ckpt_path, data_dir, out_dir, frame_len, stride);
    if (count_cmd->parsed()) return cmd_count(fc, false, false, out_path);
    if (flops_cmd->parsed()) return cmd_count(fc, true, strict, out_path);
    if (corr_cmd->parsed()) return cmd_corr(ckpt_path, data_dir, corr_block, corr_batch, out_path);
    if (ablate_cmd->parsed()) return cmd_ablate(fc, out_path, ablate_seeds);
    if (cal_cmd->parsed()) return cmd_calibrate(fc, target_params);
  } catch (const std::exception& e) {
    json err;
    err["error"] = e.what();
    std::fprintf(stderr, "%s\n", err.dump().c_str());
    return 1;
  }
  return 0;
}
