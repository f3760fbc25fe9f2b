#pragma once
// Synthetic micro-Doppler generation, STFT spectrograms, dataset IO and
// sliding windows. Everything here is a pure function of (config, seed, path)
// and safe to parallelize across samples.

#include <complex>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "radmamba/tensor.hpp"

namespace radmamba {

// Channels x Doppler bins x time bins, magnitudes in [0,1]. `frame_labels`
// is per-time-bin and only populated for continuous sequences.
struct Spectrogram {
  Tensor data;  // [C,H,W]
  double doppler_hz_per_bin = 0.0;
  double seconds_per_bin = 0.0;
  int label = -1;
  std::vector<int> frame_labels;

  int64_t channels() const { return data.dim(0); }
  int64_t doppler_bins() const { return data.dim(1); }
  int64_t time_bins() const { return data.dim(2); }
  bool continuous() const { return !frame_labels.empty(); }
};

// One synthetic activity: a bulk-velocity carrier plus an oscillating limb
// component swinging limb_amp_hz around it at limb_rate_hz.
struct SynthClass {
  std::string name;
  double bulk_velocity_hz = 0.0;
  double limb_amp_hz = 0.0;
  double limb_rate_hz = 1.0;
  double noise_db = -300.0;  // complex Gaussian noise power, dB rel. unit signal
};

struct WindowSpec {
  int64_t frame_len = 224;
  int64_t stride = 1;
};

// Geometry of generated spectrograms; defaults give (1,224,224) samples.
struct SynthGeometry {
  double sample_rate = 2000.0;
  int64_t fft_len = 256;
  int64_t hop = 64;
  int64_t out_doppler = 224;  // center crop of fft_len rows
  int64_t out_time = 224;
};

// The default 4-class pack the repo trains on out of the box.
std::vector<SynthClass> default_synth_classes();

// s(t) = exp(j*2pi*[f_b*t - (A/(2pi r))*cos(2pi r t)]) + torso + noise.
// Instantaneous frequency of the limb term is f_b + A*sin(2pi r t).
// Errors if sample_rate <= 2*(|f_b| + A).
std::vector<std::complex<double>> synth_signal(const SynthClass& cls, double duration_s,
                                               double sample_rate, uint64_t rng_seed);

// Hann-windowed STFT, fftshifted so zero Doppler sits at row fft_len/2,
// magnitude in dB clipped to a 40 dB range and min-max normalized to [0,1].
// fft_len must be a power of two. W = (len - fft_len)/hop + 1.
Spectrogram stft(const std::vector<std::complex<double>>& signal, int64_t fft_len,
                 int64_t hop, double sample_rate);

// Center crop along the Doppler axis.
Spectrogram crop_doppler(const Spectrogram& sp, int64_t target_h);

// One generated sample: jittered copy of `cls` through synth_signal -> stft
// -> crop. `sample_seed` drives jitter and noise.
Spectrogram synth_spectrogram(const SynthClass& cls, const SynthGeometry& geo,
                              uint64_t sample_seed, bool jitter = true);

struct LabeledSample {
  Tensor x;  // [C,H,W]
  int label = -1;
  std::string id;
};

struct Dataset {
  std::vector<LabeledSample> samples;
  std::vector<std::string> class_names;
  double doppler_hz_per_bin = 0.0;
  double seconds_per_bin = 0.0;
};

// Generates n_per_class samples per class and splits them stratified and
// disjoint. split_ratio 1.0 leaves the test set empty (with a warning on
// stderr). Deterministic in `seed`.
std::pair<Dataset, Dataset> make_dataset(const std::vector<SynthClass>& classes,
                                         int64_t n_per_class, double split_ratio,
                                         uint64_t seed,
                                         const SynthGeometry& geo = {});

// Stratified split of an already-loaded dataset.
std::pair<Dataset, Dataset> split_dataset(const Dataset& all, double split_ratio,
                                          uint64_t seed);

// Continuous sequence: one segment per entry of `order` (class index),
// each segment_time_bins wide, with per-time-bin labels.
Spectrogram synth_continuous(const std::vector<SynthClass>& classes,
                             const std::vector<int>& order, int64_t segment_time_bins,
                             uint64_t seed, const SynthGeometry& geo = {});

struct Frame {
  Tensor x;  // [C,H,frame_len]
  int label = -1;
  int64_t start_bin = 0;
};

// Frames a continuous spectrogram; frame label is the majority of per-bin
// labels, ties resolved toward the later class index.
std::vector<Frame> sliding_windows(const Spectrogram& sp, const WindowSpec& w);

// Reads .rmt (rank 2 or 3 tensor) or 8-bit grayscale/RGB PNG. Values must
// land in [0,1].
Spectrogram load_spectrogram(const std::string& path);

// 8-bit PNG export for [1,H,W] (grayscale) or [3,H,W] (RGB) data in [0,1].
void save_spectrogram_png(const std::string& path, const Tensor& data);

// Dataset directory layout: <root>/<class_name>/<sample_id>.rmt|.png with a
// dataset.json manifest; continuous sequences are sequence.rmt + labels.csv.
void write_dataset_dir(const std::string& root, const Dataset& train,
                       const Dataset& test, uint64_t seed);
void write_continuous_dir(const std::string& root, const Spectrogram& seq,
                          const std::vector<std::string>& class_names, uint64_t seed);
Dataset load_dataset_dir(const std::string& root);
Spectrogram load_continuous_dir(const std::string& root);
bool is_continuous_dir(const std::string& root);

}  // namespace radmamba
