#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <filesystem>

#include "doctest.h"
#include "radmamba/rng.hpp"
#include "radmamba/train.hpp"
#include "test_util.hpp"

using namespace radmamba;

namespace {

ModelConfig toy_model() {
  ModelConfig cfg;
  cfg.input_shape = {1, 8, 8};
  cfg.chan_ds.fusion_blocks = 1;
  cfg.chan_ds.fused_channels = 2;
  cfg.chan_ds.ds_h = 2;
  cfg.chan_ds.ds_w = 2;
  cfg.geometry.kind = PatchKind::DopplerAligned;
  cfg.dim = 4;
  cfg.dim_s = 2;
  cfg.dt_rank = 1;
  cfg.projection = ProjectionKind::Conv1dK3;
  cfg.depth = 1;
  cfg.n_classes = 2;
  return cfg;
}

// linearly separable toy: class 0 lights the top half, class 1 the bottom
Dataset toy_dataset(int per_class, uint64_t seed) {
  Dataset d;
  d.class_names = {"top", "bottom"};
  Rng rng(seed);
  for (int cls = 0; cls < 2; ++cls)
    for (int i = 0; i < per_class; ++i) {
      Tensor x = Tensor::zeros({1, 8, 8});
      auto& v = x.mutable_data();
      for (int64_t r = 0; r < 8; ++r)
        for (int64_t c = 0; c < 8; ++c) {
          const bool hot = cls == 0 ? r < 4 : r >= 4;
          v[static_cast<size_t>(r * 8 + c)] = hot ? 0.8 + 0.2 * rng.uniform() : 0.1 * rng.uniform();
        }
      x.round_to_precision();
      LabeledSample s;
      s.x = std::move(x);
      s.label = cls;
      s.id = "toy" + std::to_string(cls) + "_" + std::to_string(i);
      d.samples.push_back(std::move(s));
    }
  return d;
}

TrainConfig fast_train(int epochs, double lr = 5e-3) {
  TrainConfig t;
  t.lr0 = lr;
  t.batch_size = 8;
  t.epochs = epochs;
  t.weight_decay = 0.01;
  return t;
}

}  // namespace

TEST_CASE("cross_entropy: uniform logits, one-hot limit, random formula oracle") {
  Tensor uniform = Tensor::zeros({1, 6}, Precision::F64);
  std::vector<int> label0{0};
  CHECK(cross_entropy(uniform, label0).item() == doctest::Approx(std::log(6.0)).epsilon(1e-12));

  Tensor hot = Tensor::zeros({1, 4}, Precision::F64);
  hot.mutable_data()[2] = 60.0;  // scaled one-hot at the true class
  CHECK(cross_entropy(hot, {2}).item() < 1e-12);

  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const int64_t b = 1 + rng.integer(4), q = 2 + rng.integer(5);
    std::vector<double> v(static_cast<size_t>(b * q));
    for (auto& x : v) x = 3.0 * rng.normal();
    std::vector<int> labels;
    for (int64_t i = 0; i < b; ++i) labels.push_back(static_cast<int>(rng.integer(q)));
    Tensor logits = Tensor::from_data({b, q}, v, Precision::F64);
    // direct formula evaluation: mean of -log softmax
    double want = 0.0;
    for (int64_t i = 0; i < b; ++i) {
      double denom = 0.0;
      for (int64_t j = 0; j < q; ++j) denom += std::exp(v[static_cast<size_t>(i * q + j)]);
      want += -std::log(std::exp(v[static_cast<size_t>(i * q + labels[static_cast<size_t>(i)])]) / denom);
    }
    want /= static_cast<double>(b);
    CHECK(radtest::rel_err(cross_entropy(logits, labels).item(), want) < 1e-12);
  }

  CHECK_THROWS_WITH_AS(cross_entropy(uniform, {9}), doctest::Contains("label"), Error);
}

TEST_CASE("cross_entropy gradient matches finite differences") {
  Rng rng(4);
  std::vector<double> v(12);
  for (auto& x : v) x = rng.normal();
  std::vector<NamedTensor> params;
  params.push_back({"logits", Tensor::from_data({3, 4}, v, Precision::F64)});
  std::vector<int> labels{1, 3, 0};
  auto forward = [&]() { return cross_entropy(params[0].t, labels); };
  auto res = radtest::grad_check(params, forward);
  CHECK(res.max_err < 1e-6);
}

TEST_CASE("adamw: zero grads leave params unchanged; decay-only shrinks them") {
  std::vector<NamedTensor> params;
  params.push_back({"w", Tensor::from_data({3}, {1.0, -2.0, 0.5}, Precision::F64)});
  AdamWState st = make_adamw_state(params);
  adamw_step(params, st, 0.1, 0.0);
  CHECK(params[0].t.data() == std::vector<double>{1.0, -2.0, 0.5});

  AdamWState st2 = make_adamw_state(params);
  adamw_step(params, st2, 0.1, 0.5);  // p <- p * (1 - lr*wd)
  CHECK(params[0].t.data()[0] == doctest::Approx(1.0 * 0.95).epsilon(1e-12));
  CHECK(params[0].t.data()[1] == doctest::Approx(-2.0 * 0.95).epsilon(1e-12));
}

TEST_CASE("adamw: two steps with g=1 match the hand-evaluated update") {
  const double lr = 0.1, b1 = 0.9, b2 = 0.999, eps = 1e-8;
  std::vector<NamedTensor> params;
  params.push_back({"w", Tensor::from_data({1}, {1.0}, Precision::F64)});
  params[0].t.set_requires_grad();
  AdamWState st = make_adamw_state(params);

  double p_ref = 1.0, m = 0.0, v = 0.0;
  for (int step = 1; step <= 2; ++step) {
    {
      Tape tape;
      Tape::Scope scope(tape);
      params[0].t.zero_grad();
      tape.backward(ops::sum(params[0].t));  // gradient of 1
    }
    adamw_step(params, st, lr, 0.0, b1, b2, eps);
    m = b1 * m + (1 - b1) * 1.0;
    v = b2 * v + (1 - b2) * 1.0;
    const double mhat = m / (1 - std::pow(b1, step));
    const double vhat = v / (1 - std::pow(b2, step));
    p_ref -= lr * mhat / (std::sqrt(vhat) + eps);
    CHECK(params[0].t.data()[0] == doctest::Approx(p_ref).epsilon(1e-12));
  }
}

TEST_CASE("adamw: NaN gradient aborts naming the parameter") {
  std::vector<NamedTensor> params;
  params.push_back({"w.bad", Tensor::from_data({1}, {1.0}, Precision::F64)});
  params[0].t.set_requires_grad();
  {
    Tape tape;
    Tape::Scope scope(tape);
    Tensor nan_c = Tensor::full({1}, std::nan(""), Precision::F64);
    tape.backward(ops::sum(ops::mul(params[0].t, nan_c)));
  }
  AdamWState st = make_adamw_state(params);
  CHECK_THROWS_WITH_AS(adamw_step(params, st, 0.1, 0.0), doctest::Contains("w.bad"), Error);
}

TEST_CASE("plateau scheduler: improving, flat, and floored histories") {
  SchedulerConfig cfg;
  cfg.factor = 0.5;
  cfg.patience = 3;
  cfg.min_lr = 1e-4;
  {
    PlateauScheduler s(cfg);
    double lr = 1.0;
    for (int e = 0; e < 10; ++e) lr = s.update(0.1 * (e + 1), lr);
    CHECK(lr == 1.0);  // strictly improving
  }
  {
    PlateauScheduler s(cfg);
    double lr = 1.0;
    lr = s.update(0.5, lr);  // epoch 1 sets the best
    CHECK(lr == 1.0);
    lr = s.update(0.5, lr);  // bad 1
    CHECK(lr == 1.0);
    lr = s.update(0.5, lr);  // bad 2
    CHECK(lr == 1.0);
    lr = s.update(0.5, lr);  // bad 3 == patience: halve at epoch 4
    CHECK(lr == 0.5);
  }
  {
    PlateauScheduler s(cfg);
    double lr = 2e-4;
    for (int e = 0; e < 12; ++e) lr = s.update(0.5, lr);
    CHECK(lr == 1e-4);  // stays at the floor
  }
}

TEST_CASE("training the separable toy reaches 100% within 10 epochs") {
  Dataset train_d = toy_dataset(16, 1);
  Dataset test_d = toy_dataset(6, 2);
  TrainResult res = train(toy_model(), train_d, test_d, fast_train(10), 0);
  CHECK(res.report.best_accuracy == 1.0);
  CHECK(res.report.train_loss.size() == 10);
}

TEST_CASE("epochs=0 reports only the init-weights evaluation") {
  Dataset train_d = toy_dataset(4, 3);
  Dataset test_d = toy_dataset(4, 4);
  TrainResult res = train(toy_model(), train_d, test_d, fast_train(0), 7);
  CHECK(res.report.train_loss.empty());
  CHECK(res.report.test_accuracy.size() == 1);
  CHECK(res.report.best_epoch == -1);
}

TEST_CASE("same seed twice gives an identical RunReport") {
  Dataset train_d = toy_dataset(8, 5);
  Dataset test_d = toy_dataset(4, 6);
  TrainResult a = train(toy_model(), train_d, test_d, fast_train(4), 11);
  TrainResult b = train(toy_model(), train_d, test_d, fast_train(4), 11);
  CHECK(report_to_json(a.report).dump() == report_to_json(b.report).dump());
  TrainResult c = train(toy_model(), train_d, test_d, fast_train(4), 12);
  CHECK(report_to_json(a.report).dump() != report_to_json(c.report).dump());
}

TEST_CASE("loss decreases on the toy for every seed in a 5-seed sweep") {
  Dataset train_d = toy_dataset(12, 7);
  Dataset test_d = toy_dataset(4, 8);
  for (uint64_t seed : {0, 1, 2, 3, 4}) {
    TrainResult res = train(toy_model(), train_d, test_d, fast_train(6), seed);
    REQUIRE(res.report.train_loss.size() == 6);
    CHECK(res.report.train_loss.back() < res.report.train_loss.front());
  }
}

TEST_CASE("confusion matrix rows sum to per-class counts; trace matches accuracy") {
  Dataset train_d = toy_dataset(8, 9);
  Dataset test_d = toy_dataset(5, 10);
  TrainResult res = train(toy_model(), train_d, test_d, fast_train(3), 2);
  const auto& cm = res.report.confusion;
  REQUIRE(cm.size() == 2);
  int64_t trace = 0, total = 0;
  for (size_t r = 0; r < cm.size(); ++r) {
    int64_t row_sum = 0;
    for (size_t c = 0; c < cm[r].size(); ++c) {
      row_sum += cm[r][c];
      total += cm[r][c];
      if (r == c) trace += cm[r][c];
    }
    CHECK(row_sum == 5);  // per-class test count
  }
  CHECK(static_cast<double>(trace) / static_cast<double>(total) ==
        doctest::Approx(res.report.best_accuracy).epsilon(1e-12));
}

TEST_CASE("divergence aborts with an error from the first guard it hits") {
  Dataset train_d = toy_dataset(4, 11);
  Dataset test_d = toy_dataset(2, 12);
  TrainConfig bad = fast_train(3, 1e18);  // absurd lr blows the weights up
  // the NaN surfaces in whichever guard sees it first (discretize validation,
  // the scan step check, the NaN-gradient check or the loss backstop)
  CHECK_THROWS_AS(train(toy_model(), train_d, test_d, bad, 0), Error);
}

TEST_CASE("monitor=val carves a validation slice and still trains") {
  Dataset train_d = toy_dataset(12, 13);
  Dataset test_d = toy_dataset(4, 14);
  TrainConfig t = fast_train(2);
  t.monitor = "val";
  TrainResult res = train(toy_model(), train_d, test_d, t, 0);
  CHECK(res.report.test_accuracy.size() == 2);
}

TEST_CASE("eval_continuous: counts, track and perfect-model accuracy") {
  ModelConfig cfg = toy_model();  // input width 8 = frame length
  ModelWeights w = init_weights(cfg, 0);
  // force the head to always pick class 1
  std::fill(w.head_w.mutable_data().begin(), w.head_w.mutable_data().end(), 0.0);
  w.head_b.mutable_data()[0] = 0.0;
  w.head_b.mutable_data()[1] = 5.0;

  Spectrogram seq;
  seq.data = Tensor::zeros({1, 8, 10});
  for (auto& v : seq.data.mutable_data()) v = 0.5;
  seq.frame_labels.assign(10, 1);  // constant class

  WindowSpec win{8, 1};
  namespace fs = std::filesystem;
  const std::string csv = (fs::temp_directory_path() / "radmamba_track.csv").string();
  ContinuousEval ev = eval_continuous(cfg, w, seq, win, csv);
  CHECK(ev.track.size() == 3);  // (10-8)/1 + 1
  CHECK(ev.accuracy == 1.0);
  std::ifstream is(csv);
  std::string line;
  int64_t lines = 0;
  while (std::getline(is, line)) ++lines;
  CHECK(lines == 4);  // header + one row per window
  fs::remove(csv);

  WindowSpec bad{16, 1};
  CHECK_THROWS_AS(eval_continuous(cfg, w, seq, bad, ""), Error);
}
