#pragma once
// Supervised training: cross-entropy, AdamW with decoupled weight decay,
// reduce-on-plateau scheduling, the epoch loop and continuous-sequence
// evaluation.

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "radmamba/model.hpp"
#include "radmamba/signal.hpp"

namespace radmamba {

struct SchedulerConfig {
  double factor = 0.5;
  int patience = 5;
  double min_lr = 1e-6;
  double threshold = 1e-4;  // absolute improvement that resets patience
};

struct TrainConfig {
  double lr0 = 1e-3;
  int batch_size = 16;
  int epochs = 50;
  double weight_decay = 0.01;
  SchedulerConfig scheduler;
  std::vector<uint64_t> seeds{0};
  std::string monitor = "test";  // "test" mirrors the reference protocol; "val"
                                 // carves val_fraction off the training split
  double val_fraction = 0.1;
};

std::vector<std::string> validate_train_config(const TrainConfig& cfg);
nlohmann::json train_config_to_json(const TrainConfig& cfg);
TrainConfig train_config_from_json(const nlohmann::json& j);

// Mean over the batch of -log softmax(logits)[label], max-stabilized.
// logits [B,Q]; labels in [0,Q).
Tensor cross_entropy(const Tensor& logits, const std::vector<int>& labels);

// Decoupled weight decay: p <- p - lr*wd*p independently of the adaptive
// step; moments are bias-corrected. Aborts on a NaN gradient, naming the
// parameter.
struct AdamWState {
  std::vector<std::vector<double>> m, v;
  int64_t t = 0;
};
AdamWState make_adamw_state(const std::vector<NamedTensor>& params);
void adamw_step(std::vector<NamedTensor>& params, AdamWState& state, double lr,
                double weight_decay, double beta1 = 0.9, double beta2 = 0.999,
                double eps = 1e-8);

// Maximized metric; lr drops by `factor` once `patience` epochs pass without
// an improvement above `threshold`, floored at min_lr, cooldown 0.
class PlateauScheduler {
 public:
  explicit PlateauScheduler(const SchedulerConfig& cfg) : cfg_(cfg) {}
  double update(double metric, double lr);

 private:
  SchedulerConfig cfg_;
  double best_ = -1e300;
  int bad_ = 0;
};

struct RunReport {
  std::vector<double> train_loss;     // one entry per trained epoch
  std::vector<double> test_accuracy;  // init eval when epochs == 0, else per epoch
  std::vector<std::vector<int64_t>> confusion;  // QxQ at the best epoch
  double best_accuracy = 0.0;
  int best_epoch = -1;  // -1 marks the init-weights evaluation
  uint64_t seed = 0;
  std::string config_hash;
  double wall_time_s = 0.0;  // deliberately not serialized: reports stay byte-stable
};

// Serialized report; excludes wall_time_s so identical (seed, config) runs
// produce byte-identical JSON.
nlohmann::json report_to_json(const RunReport& r);

struct EvalResult {
  double accuracy = 0.0;
  std::vector<std::vector<int64_t>> confusion;
};
EvalResult evaluate(const ModelConfig& cfg, ModelWeights& w, const Dataset& data);

struct TrainResult {
  RunReport report;
  ModelWeights best_weights;
};

// Full run: seeded shuffling, mini-batches, backward, AdamW, plateau
// scheduling, best-accuracy checkpointing (ties keep the earlier epoch).
TrainResult train(const ModelConfig& model_cfg, const Dataset& train_data,
                  const Dataset& test_data, const TrainConfig& cfg, uint64_t seed);

struct FramePrediction {
  int64_t start_bin = 0;
  int predicted = -1;
  int truth = -1;
};

struct ContinuousEval {
  std::vector<FramePrediction> track;
  double accuracy = 0.0;
};

// Slides a frame over a continuous sequence and classifies each window;
// writes the prediction track as CSV when csv_path is non-empty.
ContinuousEval eval_continuous(const ModelConfig& cfg, ModelWeights& w,
                               const Spectrogram& seq, const WindowSpec& win,
                               const std::string& csv_path = "");

}  // namespace radmamba
