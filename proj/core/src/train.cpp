#include "radmamba/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>

#include "radmamba/rng.hpp"

using nlohmann::json;

namespace radmamba {

std::vector<std::string> validate_train_config(const TrainConfig& cfg) {
  std::vector<std::string> bad;
  if (!(cfg.lr0 > 0.0)) bad.push_back("lr0 must be > 0");
  if (cfg.batch_size < 1) bad.push_back("batch_size must be >= 1");
  if (cfg.epochs < 0) bad.push_back("epochs must be >= 0");
  if (cfg.weight_decay < 0.0) bad.push_back("weight_decay must be >= 0");
  if (!(cfg.scheduler.factor > 0.0 && cfg.scheduler.factor < 1.0))
    bad.push_back("scheduler.factor must lie in (0,1)");
  if (cfg.scheduler.patience < 1) bad.push_back("scheduler.patience must be >= 1");
  if (cfg.monitor != "test" && cfg.monitor != "val")
    bad.push_back("monitor must be 'test' or 'val'");
  if (cfg.seeds.empty()) bad.push_back("seeds must not be empty");
  return bad;
}

json train_config_to_json(const TrainConfig& cfg) {
  json j;
  j["lr"] = cfg.lr0;
  j["batch_size"] = cfg.batch_size;
  j["epochs"] = cfg.epochs;
  j["weight_decay"] = cfg.weight_decay;
  j["scheduler"] = {{"factor", cfg.scheduler.factor},
                    {"patience", cfg.scheduler.patience},
                    {"min_lr", cfg.scheduler.min_lr},
                    {"threshold", cfg.scheduler.threshold}};
  j["seeds"] = cfg.seeds;
  j["monitor"] = cfg.monitor;
  j["val_fraction"] = cfg.val_fraction;
  return j;
}

TrainConfig train_config_from_json(const json& j) {
  TrainConfig cfg;
  cfg.lr0 = j.value("lr", 1e-3);
  cfg.batch_size = j.value("batch_size", 16);
  cfg.epochs = j.value("epochs", 50);
  cfg.weight_decay = j.value("weight_decay", 0.01);
  if (j.contains("scheduler")) {
    const auto& s = j.at("scheduler");
    cfg.scheduler.factor = s.value("factor", 0.5);
    cfg.scheduler.patience = s.value("patience", 5);
    cfg.scheduler.min_lr = s.value("min_lr", 1e-6);
    cfg.scheduler.threshold = s.value("threshold", 1e-4);
  }
  if (j.contains("seeds")) cfg.seeds = j.at("seeds").get<std::vector<uint64_t>>();
  cfg.monitor = j.value("monitor", "test");
  cfg.val_fraction = j.value("val_fraction", 0.1);
  return cfg;
}

// ---------------------------------------------------------------------------
// Loss

Tensor cross_entropy(const Tensor& logits, const std::vector<int>& labels) {
  if (logits.rank() != 2) fail("cross_entropy: logits must be [B,Q]");
  const int64_t B = logits.dim(0), Q = logits.dim(1);
  if (static_cast<int64_t>(labels.size()) != B)
    fail("cross_entropy: batch size mismatch");
  for (int l : labels)
    if (l < 0 || l >= Q)
      fail("cross_entropy: label " + std::to_string(l) + " outside [0," +
           std::to_string(Q) + ")");

  const auto& ld = logits.data();
  auto softmax = std::make_shared<std::vector<double>>(static_cast<size_t>(B * Q));
  double loss = 0.0;
  for (int64_t b = 0; b < B; ++b) {
    const size_t base = static_cast<size_t>(b * Q);
    double mx = ld[base];
    for (int64_t q = 1; q < Q; ++q) mx = std::max(mx, ld[base + static_cast<size_t>(q)]);
    double denom = 0.0;
    for (int64_t q = 0; q < Q; ++q) denom += std::exp(ld[base + static_cast<size_t>(q)] - mx);
    const double log_denom = std::log(denom);
    for (int64_t q = 0; q < Q; ++q)
      (*softmax)[base + static_cast<size_t>(q)] =
          std::exp(ld[base + static_cast<size_t>(q)] - mx) / denom;
    loss += -(ld[base + static_cast<size_t>(labels[static_cast<size_t>(b)])] - mx - log_denom);
  }
  loss /= static_cast<double>(B);

  Tensor out = Tensor::from_data({}, {loss}, logits.precision());
  auto li = logits.impl(), oi = out.impl();
  auto labels_copy = std::make_shared<std::vector<int>>(labels);
  detail::finish_op(out, {logits}, [li, oi, softmax, labels_copy, B, Q]() {
    const auto* g = detail::out_grad(oi);
    if (!g || !detail::wants_grad(li)) return;
    auto& gl = detail::grad_buf(li);
    const double scale = (*g)[0] / static_cast<double>(B);
    for (int64_t b = 0; b < B; ++b)
      for (int64_t q = 0; q < Q; ++q) {
        const size_t i = static_cast<size_t>(b * Q + q);
        const double one_hot = q == (*labels_copy)[static_cast<size_t>(b)] ? 1.0 : 0.0;
        gl[i] += scale * ((*softmax)[i] - one_hot);
      }
  });
  return out;
}

// ---------------------------------------------------------------------------
// AdamW

AdamWState make_adamw_state(const std::vector<NamedTensor>& params) {
  AdamWState st;
  st.m.reserve(params.size());
  st.v.reserve(params.size());
  for (const auto& p : params) {
    st.m.emplace_back(static_cast<size_t>(p.t.numel()), 0.0);
    st.v.emplace_back(static_cast<size_t>(p.t.numel()), 0.0);
  }
  return st;
}

void adamw_step(std::vector<NamedTensor>& params, AdamWState& state, double lr,
                double weight_decay, double beta1, double beta2, double eps) {
  if (state.m.size() != params.size()) fail("adamw_step: state does not match params");
  state.t += 1;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.t));
  for (size_t pi = 0; pi < params.size(); ++pi) {
    auto& t = params[pi].t;
    auto& data = t.mutable_data();
    auto& m = state.m[pi];
    auto& v = state.v[pi];
    const Precision prec = t.precision();
    const bool has_grad = t.has_grad();
    for (size_t i = 0; i < data.size(); ++i) {
      const double g = has_grad ? t.grad()[i] : 0.0;
      if (std::isnan(g))
        fail("adamw_step: NaN gradient in parameter '" + params[pi].name + "'");
      double p = data[i];
      p -= lr * weight_decay * p;  // decoupled decay
      m[i] = beta1 * m[i] + (1.0 - beta1) * g;
      v[i] = beta2 * v[i] + (1.0 - beta2) * g * g;
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      p -= lr * mhat / (std::sqrt(vhat) + eps);
      data[i] = detail::round_to(prec, p);
    }
  }
}

double PlateauScheduler::update(double metric, double lr) {
  if (metric > best_ + cfg_.threshold) {
    best_ = metric;
    bad_ = 0;
    return lr;
  }
  if (++bad_ >= cfg_.patience) {
    bad_ = 0;
    return std::max(lr * cfg_.factor, cfg_.min_lr);
  }
  return lr;
}

// ---------------------------------------------------------------------------
// Reports

json report_to_json(const RunReport& r) {
  json j;
  j["seed"] = r.seed;
  j["config_hash"] = r.config_hash;
  j["train_loss"] = r.train_loss;
  j["test_accuracy"] = r.test_accuracy;
  j["best_accuracy"] = r.best_accuracy;
  j["best_epoch"] = r.best_epoch;
  j["confusion"] = r.confusion;
  return j;
}

// ---------------------------------------------------------------------------
// Evaluation

namespace {

int argmax_class(const Tensor& logits) {
  const auto& d = logits.data();
  int best = 0;
  for (size_t i = 1; i < d.size(); ++i)
    if (d[i] > d[static_cast<size_t>(best)]) best = static_cast<int>(i);
  return best;
}

}  // namespace

EvalResult evaluate(const ModelConfig& cfg, ModelWeights& w, const Dataset& data) {
  EvalResult res;
  const int Q = cfg.n_classes;
  res.confusion.assign(static_cast<size_t>(Q), std::vector<int64_t>(static_cast<size_t>(Q), 0));
  int64_t correct = 0;
  for (const auto& s : data.samples) {
    if (s.label < 0 || s.label >= Q)
      fail("evaluate: sample '" + s.id + "' has label " + std::to_string(s.label) +
           " outside [0," + std::to_string(Q) + ")");
    Tensor logits = model_forward(s.x, cfg, w, /*training=*/false);
    const int pred = argmax_class(logits);
    res.confusion[static_cast<size_t>(s.label)][static_cast<size_t>(pred)] += 1;
    if (pred == s.label) ++correct;
  }
  res.accuracy = data.samples.empty()
                     ? 0.0
                     : static_cast<double>(correct) / static_cast<double>(data.samples.size());
  return res;
}

// ---------------------------------------------------------------------------
// Training loop

namespace {

ModelWeights clone_weights(const ModelConfig& cfg, ModelWeights& w) {
  ModelWeights copy = init_weights(cfg, 0, w.embed_w.precision());
  auto src_p = named_params(w);
  auto dst_p = named_params(copy);
  for (size_t i = 0; i < src_p.size(); ++i) dst_p[i].t.mutable_data() = src_p[i].t.data();
  auto src_b = named_buffers(w);
  auto dst_b = named_buffers(copy);
  for (size_t i = 0; i < src_b.size(); ++i) dst_b[i].t.mutable_data() = src_b[i].t.data();
  return copy;
}

}  // namespace

TrainResult train(const ModelConfig& model_cfg, const Dataset& train_data,
                  const Dataset& test_data, const TrainConfig& cfg, uint64_t seed) {
  {
    auto bad = validate_train_config(cfg);
    if (!bad.empty()) {
      std::string msg = "invalid train config:";
      for (const auto& b : bad) msg += "\n  - " + b;
      fail(msg);
    }
  }
  const auto t_start = std::chrono::steady_clock::now();

  // monitor=val carves a stratified slice off the training split
  Dataset train_split = train_data;
  Dataset monitor_split = test_data;
  if (cfg.monitor == "val") {
    auto [tr, val] = split_dataset(train_data, 1.0 - cfg.val_fraction, splitmix64(seed) ^ 0x7a1ULL);
    train_split = std::move(tr);
    monitor_split = std::move(val);
  }

  ModelWeights weights = init_weights(model_cfg, seed);
  auto params = named_params(weights);
  AdamWState opt = make_adamw_state(params);

  RunReport report;
  report.seed = seed;
  {
    json eff;
    eff["model"] = model_config_to_json(model_cfg);
    eff["train"] = train_config_to_json(cfg);
    report.config_hash = config_hash(eff);
  }

  TrainResult result;
  double best_acc = -1.0;

  auto consider_best = [&](double acc, int epoch, const EvalResult& ev) {
    if (acc > best_acc) {  // strict: ties keep the earlier epoch
      best_acc = acc;
      report.best_accuracy = acc;
      report.best_epoch = epoch;
      report.confusion = ev.confusion;
      result.best_weights = clone_weights(model_cfg, weights);
    }
  };

  if (cfg.epochs == 0) {
    EvalResult ev = evaluate(model_cfg, weights, test_data);
    report.test_accuracy.push_back(ev.accuracy);
    consider_best(ev.accuracy, -1, ev);
  }

  double lr = cfg.lr0;
  PlateauScheduler sched(cfg.scheduler);
  Rng shuffle_rng = Rng::derive(seed, 0x5aff1eULL);

  std::vector<int64_t> order(train_split.samples.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int64_t>(i);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    double loss_sum = 0.0;
    int64_t loss_count = 0;

    for (size_t start = 0; start < order.size(); start += static_cast<size_t>(cfg.batch_size)) {
      const size_t end = std::min(order.size(), start + static_cast<size_t>(cfg.batch_size));
      Tape tape;
      Tape::Scope scope(tape);
      std::vector<Tensor> rows;
      std::vector<int> labels;
      rows.reserve(end - start);
      for (size_t k = start; k < end; ++k) {
        const auto& s = train_split.samples[static_cast<size_t>(order[k])];
        rows.push_back(model_forward(s.x, model_cfg, weights, /*training=*/true));
        labels.push_back(s.label);
      }
      Tensor loss = cross_entropy(ops::stack_rows(rows), labels);
      const double lv = loss.item();
      if (!std::isfinite(lv))
        fail("training diverged: loss is NaN or infinite at epoch " + std::to_string(epoch));
      loss_sum += lv * static_cast<double>(end - start);
      loss_count += static_cast<int64_t>(end - start);

      for (auto& p : params) p.t.zero_grad();
      tape.backward(loss);
      adamw_step(params, opt, lr, cfg.weight_decay);
    }
    report.train_loss.push_back(loss_count ? loss_sum / static_cast<double>(loss_count) : 0.0);

    EvalResult ev = evaluate(model_cfg, weights, test_data);
    report.test_accuracy.push_back(ev.accuracy);
    consider_best(ev.accuracy, epoch, ev);

    double monitored = ev.accuracy;
    if (cfg.monitor == "val") monitored = evaluate(model_cfg, weights, monitor_split).accuracy;
    lr = sched.update(monitored, lr);
  }

  report.wall_time_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  result.report = std::move(report);
  if (result.best_weights.blocks.empty()) result.best_weights = clone_weights(model_cfg, weights);
  return result;
}

// ---------------------------------------------------------------------------
// Continuous evaluation

ContinuousEval eval_continuous(const ModelConfig& cfg, ModelWeights& w,
                               const Spectrogram& seq, const WindowSpec& win,
                               const std::string& csv_path) {
  if (!seq.continuous()) fail("eval_continuous: sequence has no per-bin labels");
  if (win.frame_len != cfg.input_shape[2])
    fail("eval_continuous: frame length " + std::to_string(win.frame_len) +
         " does not match model input width " + std::to_string(cfg.input_shape[2]));

  ContinuousEval out;
  auto frames = sliding_windows(seq, win);
  int64_t correct = 0;
  for (const auto& f : frames) {
    Tensor logits = model_forward(f.x, cfg, w, /*training=*/false);
    FramePrediction fp;
    fp.start_bin = f.start_bin;
    fp.predicted = argmax_class(logits);
    fp.truth = f.label;
    if (fp.predicted == fp.truth) ++correct;
    out.track.push_back(fp);
  }
  out.accuracy = out.track.empty()
                     ? 0.0
                     : static_cast<double>(correct) / static_cast<double>(out.track.size());

  if (!csv_path.empty()) {
    std::ofstream os(csv_path);
    if (!os) fail("cannot open for write: " + csv_path);
    os << "window_start_bin,predicted_class,true_class\n";
    for (const auto& fp : out.track)
      os << fp.start_bin << "," << fp.predicted << "," << fp.truth << "\n";
  }
  return out;
}

}  // namespace radmamba
