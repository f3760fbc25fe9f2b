#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "radmamba/rng.hpp"
#include "radmamba/signal.hpp"
#include "test_util.hpp"

using namespace radmamba;
namespace fs = std::filesystem;

namespace {

// column argmax over the Doppler axis of a [1,H,W] spectrogram
int64_t column_argmax(const Spectrogram& sp, int64_t col) {
  const int64_t h = sp.doppler_bins(), w = sp.time_bins();
  int64_t best = 0;
  for (int64_t r = 1; r < h; ++r)
    if (sp.data.data()[static_cast<size_t>(r * w + col)] >
        sp.data.data()[static_cast<size_t>(best * w + col)])
      best = r;
  return best;
}

std::string temp_dir(const std::string& tag) {
  const std::string d = (fs::temp_directory_path() / ("radmamba_sig_" + tag)).string();
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

}  // namespace

TEST_CASE("synth_signal: zero-Doppler idle class is a constant-phase tone") {
  SynthClass cls{"idle", 0.0, 0.0, 1.0, -300.0};
  auto s = synth_signal(cls, 2.0, 1000.0, 0);
  // 1.0 (limb, A=0) + 0.5 torso, both at f=0
  for (const auto& v : s) {
    CHECK(v.real() == doctest::Approx(1.5).epsilon(1e-9));
    CHECK(std::abs(v.imag()) < 1e-9);
  }
  Spectrogram sp = stft(s, 256, 64, 1000.0);
  // all STFT energy in the center Doppler bin
  for (int64_t col = 0; col < sp.time_bins(); ++col) CHECK(column_argmax(sp, col) == 128);
}

TEST_CASE("synth_signal: tone at +3 bins lands at center+3") {
  const double fs = 1000.0;
  const double bin_width = fs / 256.0;
  SynthClass cls{"tone", 3.0 * bin_width, 0.0, 1.0, -300.0};
  auto s = synth_signal(cls, 2.0, fs, 1);
  Spectrogram sp = stft(s, 256, 64, fs);
  for (int64_t col = 0; col < sp.time_bins(); ++col) CHECK(column_argmax(sp, col) == 128 + 3);
}

TEST_CASE("synth_signal: fixed seed is bit-identical, Nyquist violations rejected") {
  SynthClass cls{"walk", 120.0, 60.0, 1.2, -20.0};
  auto a = synth_signal(cls, 1.0, 2000.0, 42);
  auto b = synth_signal(cls, 1.0, 2000.0, 42);
  CHECK(a == b);
  auto c = synth_signal(cls, 1.0, 2000.0, 43);
  CHECK(a != c);
  CHECK_THROWS_WITH_AS(synth_signal(cls, 1.0, 300.0, 0), doctest::Contains("Nyquist"), Error);
}

TEST_CASE("stft: zeros input gives an all-zero spectrogram") {
  std::vector<std::complex<double>> zeros(1024, {0.0, 0.0});
  Spectrogram sp = stft(zeros, 256, 64, 1000.0);
  for (double v : sp.data.data()) CHECK(v == 0.0);
}

TEST_CASE("stft: output geometry and crop to 224x224") {
  // hop chosen so W = 224: len = 256 + 223*hop
  const int64_t hop = 64;
  std::vector<std::complex<double>> sig(static_cast<size_t>(256 + 223 * hop));
  for (size_t i = 0; i < sig.size(); ++i) {
    const double t = static_cast<double>(i) / 1000.0;
    sig[i] = {std::cos(2 * 3.14159265358979 * 50.0 * t),
              std::sin(2 * 3.14159265358979 * 50.0 * t)};
  }
  Spectrogram sp = stft(sig, 256, hop, 1000.0);
  CHECK(sp.data.shape() == Shape{1, 256, 224});
  Spectrogram cropped = crop_doppler(sp, 224);
  CHECK(cropped.data.shape() == Shape{1, 224, 224});
  CHECK(sp.doppler_hz_per_bin == doctest::Approx(1000.0 / 256.0));
  CHECK(sp.seconds_per_bin == doctest::Approx(64.0 / 1000.0));
}

TEST_CASE("stft: errors on short signals and values stay in [0,1]") {
  std::vector<std::complex<double>> s(100, {1.0, 0.0});
  CHECK_THROWS_WITH_AS(stft(s, 256, 64, 1000.0), doctest::Contains("shorter"), Error);

  SynthClass cls{"wave", 0.0, 180.0, 2.5, -20.0};
  auto sig = synth_signal(cls, 2.0, 2000.0, 3);
  Spectrogram sp = stft(sig, 256, 64, 2000.0);
  for (double v : sp.data.data()) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
}

TEST_CASE("stft energy localization: >=90% of column energy within +-1 bin") {
  const double fs = 1000.0;
  for (int k : {2, 7, 19}) {
    SynthClass cls{"tone", k * fs / 256.0, 0.0, 1.0, -300.0};
    auto sig = synth_signal(cls, 2.0, fs, 5);
    Spectrogram sp = stft(sig, 256, 64, fs);
    const int64_t w = sp.time_bins();
    for (int64_t col = 0; col < w; col += 7) {
      double total = 0.0, near = 0.0;
      const int64_t peak = 128 + k;
      for (int64_t r = 0; r < sp.doppler_bins(); ++r) {
        const double v = sp.data.data()[static_cast<size_t>(r * w + col)];
        total += v * v;
        if (std::llabs(r - peak) <= 1) near += v * v;
      }
      REQUIRE(total > 0.0);
      CHECK(near / total >= 0.90);
    }
  }
}

TEST_CASE("make_dataset: stratified 8:2 split of 4x60") {
  auto classes = default_synth_classes();
  SynthGeometry geo;
  geo.out_time = 16;  // keep the fixture fast; split logic is size-independent
  geo.out_doppler = 32;
  auto [train, test] = make_dataset(classes, 60, 0.8, 7, geo);
  CHECK(train.samples.size() == 192);
  CHECK(test.samples.size() == 48);
  for (int c = 0; c < 4; ++c) {
    int64_t tr = 0, te = 0;
    for (const auto& s : train.samples) tr += s.label == c;
    for (const auto& s : test.samples) te += s.label == c;
    CHECK(tr == 48);
    CHECK(te == 12);
  }
}

TEST_CASE("make_dataset: deterministic, disjoint, ratio 1.0 empties the test set") {
  auto classes = default_synth_classes();
  classes.resize(2);
  SynthGeometry geo;
  geo.out_time = 8;
  geo.out_doppler = 16;
  auto [a_train, a_test] = make_dataset(classes, 5, 0.6, 11, geo);
  auto [b_train, b_test] = make_dataset(classes, 5, 0.6, 11, geo);
  REQUIRE(a_train.samples.size() == b_train.samples.size());
  for (size_t i = 0; i < a_train.samples.size(); ++i) {
    CHECK(a_train.samples[i].id == b_train.samples[i].id);
    CHECK(a_train.samples[i].x.data() == b_train.samples[i].x.data());
  }
  for (const auto& tr : a_train.samples)
    for (const auto& te : a_test.samples) CHECK(tr.id + std::to_string(tr.label) != te.id + std::to_string(te.label));

  auto [full, empty] = make_dataset(classes, 4, 1.0, 1, geo);
  CHECK(full.samples.size() == 8);
  CHECK(empty.samples.empty());

  CHECK_THROWS_AS(make_dataset({}, 4, 0.8, 0, geo), Error);
  CHECK_THROWS_AS(make_dataset(classes, 1, 0.8, 0, geo), Error);
}

TEST_CASE("split stratification stays within one sample of the ratio") {
  auto classes = default_synth_classes();
  classes.resize(2);
  SynthGeometry geo;
  geo.out_time = 8;
  geo.out_doppler = 16;
  for (double ratio : {0.5, 0.7, 0.85}) {
    auto [train, test] = make_dataset(classes, 9, ratio, 3, geo);
    for (int c = 0; c < 2; ++c) {
      int64_t tr = 0;
      for (const auto& s : train.samples) tr += s.label == c;
      CHECK(std::abs(static_cast<double>(tr) - ratio * 9.0) < 1.0);
    }
    (void)test;
  }
}

TEST_CASE("sliding_windows: counts, labels, majority ties") {
  Spectrogram sp;
  sp.data = Tensor::zeros({1, 4, 226});
  sp.frame_labels.assign(226, 2);
  WindowSpec w{224, 1};
  auto frames = sliding_windows(sp, w);
  CHECK(frames.size() == 3);  // (226-224)/1 + 1
  for (const auto& f : frames) {
    CHECK(f.label == 2);  // uniform labels
    CHECK(f.x.shape() == Shape{1, 4, 224});
  }

  // non-overlapping partition
  Spectrogram sp2;
  sp2.data = Tensor::zeros({1, 4, 20});
  sp2.frame_labels.assign(20, 0);
  auto part = sliding_windows(sp2, {5, 5});
  CHECK(part.size() == 4);

  // exact tie between class 0 and class 1 goes to the later index
  Spectrogram sp3;
  sp3.data = Tensor::zeros({1, 2, 4});
  sp3.frame_labels = {0, 0, 1, 1};
  auto tied = sliding_windows(sp3, {4, 1});
  REQUIRE(tied.size() == 1);
  CHECK(tied[0].label == 1);

  CHECK_THROWS_AS(sliding_windows(sp3, {8, 1}), Error);   // frame longer than W
  CHECK_THROWS_AS(sliding_windows(sp3, {4, 5}), Error);   // stride > frame
}

TEST_CASE("window count formula holds for fuzzed (W, frame, stride)") {
  Rng rng(99);
  for (int trial = 0; trial < 1000; ++trial) {
    const int64_t frame = 1 + rng.integer(16);
    const int64_t stride = 1 + rng.integer(frame);
    const int64_t w = frame + rng.integer(40);
    Spectrogram sp;
    sp.data = Tensor::zeros({1, 2, w});
    sp.frame_labels.assign(static_cast<size_t>(w), 0);
    auto frames = sliding_windows(sp, {frame, stride});
    CHECK(static_cast<int64_t>(frames.size()) == (w - frame) / stride + 1);
    CHECK(frames.back().start_bin == (static_cast<int64_t>(frames.size()) - 1) * stride);
  }
}

TEST_CASE("PNG round trip: gray (1,H,W) and RGB (3,H,W)") {
  const std::string dir = temp_dir("png");
  Rng rng(17);
  for (int64_t channels : {int64_t{1}, int64_t{3}}) {
    Tensor img = Tensor::zeros({channels, 5, 7});
    for (auto& v : img.mutable_data()) v = rng.integer(256) / 255.0;
    img.round_to_precision();
    const std::string path = dir + "/img" + std::to_string(channels) + ".png";
    save_spectrogram_png(path, img);
    Spectrogram sp = load_spectrogram(path);
    CHECK(sp.data.shape() == Shape{channels, 5, 7});
    CHECK(radtest::max_abs_diff(sp.data, img) == 0.0);  // 8-bit values survive exactly
  }
}

TEST_CASE("load_spectrogram: rmt ranks, truncation, range validation") {
  const std::string dir = temp_dir("rmt");
  Tensor t2 = Tensor::from_data({4, 6}, std::vector<double>(24, 0.5));
  save_tensor(dir + "/r2.rmt", t2);
  CHECK(load_spectrogram(dir + "/r2.rmt").data.shape() == Shape{1, 4, 6});

  Tensor t3 = Tensor::from_data({2, 3, 4}, std::vector<double>(24, 0.25));
  save_tensor(dir + "/r3.rmt", t3);
  CHECK(load_spectrogram(dir + "/r3.rmt").data.shape() == Shape{2, 3, 4});

  {
    std::ifstream is(dir + "/r3.rmt", std::ios::binary);
    std::string bytes((std::istreambuf_iterator<char>(is)), {});
    std::ofstream os(dir + "/cut.rmt", std::ios::binary);
    os.write(bytes.data(), static_cast<std::streamsize>(bytes.size() / 2));
  }
  CHECK_THROWS_WITH_AS(load_spectrogram(dir + "/cut.rmt"), doctest::Contains("truncated"), Error);

  Tensor bad = Tensor::from_data({1, 2, 2}, {0.0, 0.5, 1.0, 2.0});
  save_tensor(dir + "/bad.rmt", bad);
  CHECK_THROWS_WITH_AS(load_spectrogram(dir + "/bad.rmt"), doctest::Contains("[0,1]"), Error);

  CHECK_THROWS_AS(load_spectrogram(dir + "/missing.rmt"), Error);
  CHECK_THROWS_AS(load_spectrogram(dir + "/file.xyz"), Error);
}

TEST_CASE("dataset directory round trip") {
  const std::string dir = temp_dir("ds");
  auto classes = default_synth_classes();
  classes.resize(2);
  SynthGeometry geo;
  geo.out_time = 8;
  geo.out_doppler = 16;
  auto [train, test] = make_dataset(classes, 4, 0.75, 21, geo);
  write_dataset_dir(dir, train, test, 21);

  CHECK(fs::exists(dir + "/dataset.json"));
  CHECK(fs::exists(dir + "/idle"));
  CHECK(fs::exists(dir + "/walk"));
  CHECK(!is_continuous_dir(dir));

  Dataset all = load_dataset_dir(dir);
  CHECK(all.samples.size() == 8);
  CHECK(all.class_names == std::vector<std::string>{"idle", "walk"});
  for (const auto& s : all.samples) CHECK(s.x.shape() == Shape{1, 16, 8});
}

TEST_CASE("continuous directory round trip preserves the label track") {
  const std::string dir = temp_dir("cont");
  auto classes = default_synth_classes();
  classes.resize(3);
  std::vector<int> order{0, 2, 1, 2};
  SynthGeometry geo;
  geo.out_doppler = 32;
  Spectrogram seq = synth_continuous(classes, order, 10, 3, geo);
  CHECK(seq.time_bins() == 40);
  CHECK(seq.frame_labels.size() == 40);
  CHECK(seq.frame_labels[0] == 0);
  CHECK(seq.frame_labels[15] == 2);

  std::vector<std::string> names{"idle", "walk", "wave"};
  write_continuous_dir(dir, seq, names, 3);
  CHECK(is_continuous_dir(dir));
  Spectrogram back = load_continuous_dir(dir);
  CHECK(back.frame_labels == seq.frame_labels);
  CHECK(radtest::max_abs_diff(back.data, seq.data) == 0.0);
}

TEST_CASE("background sparsity of the default pack is high after the 40 dB clip") {
  SynthGeometry geo;
  auto sp = synth_spectrogram(default_synth_classes()[1], geo, 5);
  int64_t zeros = 0;
  for (double v : sp.data.data()) zeros += v == 0.0;
  const double sparsity =
      static_cast<double>(zeros) / static_cast<double>(sp.data.numel());
  MESSAGE("sparsity: ", sparsity);
  CHECK(sparsity > 0.6);
}
