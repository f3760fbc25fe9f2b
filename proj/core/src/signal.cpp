#include "radmamba/signal.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "radmamba/rng.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace radmamba {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kTorsoAmp = 0.5;
constexpr double kDynamicRangeDb = 40.0;

bool is_pow2(int64_t n) { return n > 0 && (n & (n - 1)) == 0; }

void fft_inplace(std::vector<std::complex<double>>& a) {
  const size_t n = a.size();
  for (size_t i = 1, j = 0; i < n; ++i) {
    size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j |= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (size_t len = 2; len <= n; len <<= 1) {
    const double ang = -2.0 * kPi / static_cast<double>(len);
    const std::complex<double> wl(std::cos(ang), std::sin(ang));
    for (size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (size_t k = 0; k < len / 2; ++k) {
        const auto u = a[i + k];
        const auto v = a[i + k + len / 2] * w;
        a[i + k] = u + v;
        a[i + k + len / 2] = u - v;
        w *= wl;
      }
    }
  }
}

}  // namespace

std::vector<SynthClass> default_synth_classes() {
  return {
      {"idle", 0.0, 5.0, 0.5, -25.0},
      {"walk", 120.0, 60.0, 1.2, -25.0},
      {"wave", 0.0, 180.0, 2.5, -25.0},
      {"fall", -100.0, 250.0, 0.3, -25.0},
  };
}

std::vector<std::complex<double>> synth_signal(const SynthClass& cls, double duration_s,
                                               double sample_rate, uint64_t rng_seed) {
  if (cls.limb_rate_hz <= 0.0) fail("synth_signal: limb_rate_hz must be > 0");
  const double band = std::abs(cls.bulk_velocity_hz) + cls.limb_amp_hz;
  if (sample_rate <= 2.0 * band)
    fail("synth_signal: sample rate " + std::to_string(sample_rate) +
         " violates Nyquist for bandwidth " + std::to_string(band) + " Hz");

  const int64_t n = static_cast<int64_t>(std::llround(duration_s * sample_rate));
  std::vector<std::complex<double>> s(static_cast<size_t>(n));
  Rng rng = Rng::derive(rng_seed, 0x6e015eULL);
  const double noise_sigma = std::sqrt(std::pow(10.0, cls.noise_db / 10.0) / 2.0);
  const double fb = cls.bulk_velocity_hz;
  const double amp = cls.limb_amp_hz;
  const double rate = cls.limb_rate_hz;

  for (int64_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / sample_rate;
    const double phase = 2.0 * kPi * (fb * t - amp / (2.0 * kPi * rate) * std::cos(2.0 * kPi * rate * t));
    const double torso_phase = 2.0 * kPi * fb * t;
    std::complex<double> v(std::cos(phase), std::sin(phase));
    v += kTorsoAmp * std::complex<double>(std::cos(torso_phase), std::sin(torso_phase));
    v += std::complex<double>(noise_sigma * rng.normal(), noise_sigma * rng.normal());
    s[static_cast<size_t>(i)] = v;
  }
  return s;
}

Spectrogram stft(const std::vector<std::complex<double>>& signal, int64_t fft_len,
                 int64_t hop, double sample_rate) {
  if (!is_pow2(fft_len)) fail("stft: fft_len must be a power of two");
  if (hop < 1) fail("stft: hop must be >= 1");
  if (static_cast<int64_t>(signal.size()) < fft_len)
    fail("stft: signal of " + std::to_string(signal.size()) +
         " samples is shorter than one " + std::to_string(fft_len) + "-point frame");

  const int64_t H = fft_len;
  const int64_t W = (static_cast<int64_t>(signal.size()) - fft_len) / hop + 1;

  std::vector<double> window(static_cast<size_t>(fft_len));
  for (int64_t i = 0; i < fft_len; ++i)
    window[static_cast<size_t>(i)] =
        0.5 * (1.0 - std::cos(2.0 * kPi * static_cast<double>(i) / static_cast<double>(fft_len)));

  std::vector<double> mag(static_cast<size_t>(H * W), 0.0);
  std::vector<std::complex<double>> frame(static_cast<size_t>(fft_len));
  double peak = 0.0;
  for (int64_t col = 0; col < W; ++col) {
    const size_t base = static_cast<size_t>(col * hop);
    for (int64_t i = 0; i < fft_len; ++i)
      frame[static_cast<size_t>(i)] = signal[base + static_cast<size_t>(i)] * window[static_cast<size_t>(i)];
    fft_inplace(frame);
    for (int64_t r = 0; r < H; ++r) {
      // row r holds signed frequency r - H/2; fftshift
      const int64_t bin = (r + H / 2) % H;
      const double m = std::abs(frame[static_cast<size_t>(bin)]);
      mag[static_cast<size_t>(r * W + col)] = m;
      peak = std::max(peak, m);
    }
  }

  Tensor out = Tensor::zeros({1, H, W});
  if (peak > 0.0) {
    auto& od = out.mutable_data();
    const double floor_ratio = std::pow(10.0, -kDynamicRangeDb / 20.0);
    for (size_t i = 0; i < mag.size(); ++i) {
      const double ratio = std::max(mag[i] / peak, floor_ratio);
      od[i] = 1.0 + 20.0 * std::log10(ratio) / kDynamicRangeDb;
    }
    out.round_to_precision();
  }

  Spectrogram sp;
  sp.data = std::move(out);
  sp.doppler_hz_per_bin = sample_rate / static_cast<double>(fft_len);
  sp.seconds_per_bin = static_cast<double>(hop) / sample_rate;
  return sp;
}

Spectrogram crop_doppler(const Spectrogram& sp, int64_t target_h) {
  const int64_t C = sp.channels(), H = sp.doppler_bins(), W = sp.time_bins();
  if (target_h > H) fail("crop_doppler: target exceeds Doppler extent");
  const int64_t r0 = (H - target_h) / 2;
  Tensor out = Tensor::zeros({C, target_h, W}, sp.data.precision());
  auto& od = out.mutable_data();
  const auto& xd = sp.data.data();
  for (int64_t c = 0; c < C; ++c)
    for (int64_t r = 0; r < target_h; ++r)
      for (int64_t t = 0; t < W; ++t)
        od[static_cast<size_t>((c * target_h + r) * W + t)] =
            xd[static_cast<size_t>((c * H + r + r0) * W + t)];
  Spectrogram res = sp;
  res.data = std::move(out);
  return res;
}

Spectrogram synth_spectrogram(const SynthClass& cls, const SynthGeometry& geo,
                              uint64_t sample_seed, bool jitter) {
  SynthClass c = cls;
  if (jitter) {
    Rng jr = Rng::derive(sample_seed, 0x71e7ULL);
    c.bulk_velocity_hz *= jr.uniform(0.9, 1.1);
    c.limb_amp_hz *= jr.uniform(0.9, 1.1);
    c.limb_rate_hz *= jr.uniform(0.9, 1.1);
  }
  const int64_t n_samples = geo.fft_len + (geo.out_time - 1) * geo.hop;
  const double duration = static_cast<double>(n_samples) / geo.sample_rate;
  auto sig = synth_signal(c, duration, geo.sample_rate, splitmix64(sample_seed));
  Spectrogram sp = stft(sig, geo.fft_len, geo.hop, geo.sample_rate);
  return crop_doppler(sp, geo.out_doppler);
}

std::pair<Dataset, Dataset> make_dataset(const std::vector<SynthClass>& classes,
                                         int64_t n_per_class, double split_ratio,
                                         uint64_t seed, const SynthGeometry& geo) {
  if (classes.empty()) fail("make_dataset: empty class list");
  if (n_per_class < 2) fail("make_dataset: need at least 2 samples per class");
  if (split_ratio < 0.0 || split_ratio > 1.0) fail("make_dataset: split ratio outside [0,1]");

  Dataset all;
  all.doppler_hz_per_bin = geo.sample_rate / static_cast<double>(geo.fft_len);
  all.seconds_per_bin = static_cast<double>(geo.hop) / geo.sample_rate;
  for (const auto& c : classes) all.class_names.push_back(c.name);

  for (size_t ci = 0; ci < classes.size(); ++ci) {
    for (int64_t i = 0; i < n_per_class; ++i) {
      const uint64_t sample_seed = splitmix64(seed ^ (static_cast<uint64_t>(ci) << 32) ^ static_cast<uint64_t>(i));
      Spectrogram sp = synth_spectrogram(classes[ci], geo, sample_seed);
      LabeledSample s;
      s.x = std::move(sp.data);
      s.label = static_cast<int>(ci);
      char buf[32];
      std::snprintf(buf, sizeof(buf), "%04lld", static_cast<long long>(i));
      s.id = classes[ci].name + "_" + buf;
      all.samples.push_back(std::move(s));
    }
  }
  return split_dataset(all, split_ratio, seed);
}

std::pair<Dataset, Dataset> split_dataset(const Dataset& all, double split_ratio,
                                          uint64_t seed) {
  if (split_ratio >= 1.0)
    std::fprintf(stderr, "warning: split ratio %.3f leaves the test set empty\n", split_ratio);

  Dataset train, test;
  train.class_names = test.class_names = all.class_names;
  train.doppler_hz_per_bin = test.doppler_hz_per_bin = all.doppler_hz_per_bin;
  train.seconds_per_bin = test.seconds_per_bin = all.seconds_per_bin;

  const int n_classes = static_cast<int>(all.class_names.size());
  for (int c = 0; c < n_classes; ++c) {
    std::vector<int64_t> idx;
    for (size_t i = 0; i < all.samples.size(); ++i)
      if (all.samples[i].label == c) idx.push_back(static_cast<int64_t>(i));
    Rng rng = Rng::derive(seed, 0x5917ULL + static_cast<uint64_t>(c));
    rng.shuffle(idx);
    const int64_t n_train = std::llround(split_ratio * static_cast<double>(idx.size()));
    std::vector<int64_t> tr(idx.begin(), idx.begin() + n_train);
    std::vector<int64_t> te(idx.begin() + n_train, idx.end());
    std::sort(tr.begin(), tr.end());
    std::sort(te.begin(), te.end());
    for (int64_t i : tr) train.samples.push_back(all.samples[static_cast<size_t>(i)]);
    for (int64_t i : te) test.samples.push_back(all.samples[static_cast<size_t>(i)]);
  }
  return {std::move(train), std::move(test)};
}

Spectrogram synth_continuous(const std::vector<SynthClass>& classes,
                             const std::vector<int>& order, int64_t segment_time_bins,
                             uint64_t seed, const SynthGeometry& geo) {
  if (classes.empty() || order.empty()) fail("synth_continuous: empty input");
  const int64_t W = segment_time_bins * static_cast<int64_t>(order.size());
  const int64_t C = 1, H = geo.out_doppler;
  Tensor data = Tensor::zeros({C, H, W});
  auto& od = data.mutable_data();
  std::vector<int> labels(static_cast<size_t>(W));

  SynthGeometry seg_geo = geo;
  seg_geo.out_time = segment_time_bins;
  for (size_t s = 0; s < order.size(); ++s) {
    const int cls = order[s];
    if (cls < 0 || cls >= static_cast<int>(classes.size()))
      fail("synth_continuous: class index out of range");
    Spectrogram seg = synth_spectrogram(classes[static_cast<size_t>(cls)], seg_geo,
                                        splitmix64(seed ^ (static_cast<uint64_t>(s) << 40)));
    const auto& sd = seg.data.data();
    const int64_t t0 = static_cast<int64_t>(s) * segment_time_bins;
    for (int64_t r = 0; r < H; ++r)
      for (int64_t t = 0; t < segment_time_bins; ++t)
        od[static_cast<size_t>(r * W + t0 + t)] = sd[static_cast<size_t>(r * segment_time_bins + t)];
    for (int64_t t = 0; t < segment_time_bins; ++t) labels[static_cast<size_t>(t0 + t)] = cls;
  }

  Spectrogram sp;
  sp.data = std::move(data);
  sp.doppler_hz_per_bin = geo.sample_rate / static_cast<double>(geo.fft_len);
  sp.seconds_per_bin = static_cast<double>(geo.hop) / geo.sample_rate;
  sp.frame_labels = std::move(labels);
  return sp;
}

std::vector<Frame> sliding_windows(const Spectrogram& sp, const WindowSpec& w) {
  if (w.stride < 1 || w.stride > w.frame_len)
    fail("sliding_windows: stride must lie in [1, frame_len]");
  const int64_t C = sp.channels(), H = sp.doppler_bins(), W = sp.time_bins();
  if (W < w.frame_len)
    fail("sliding_windows: sequence of " + std::to_string(W) +
         " bins is shorter than frame " + std::to_string(w.frame_len));
  if (sp.continuous() && static_cast<int64_t>(sp.frame_labels.size()) != W)
    fail("sliding_windows: label track length does not match time bins");

  const int64_t count = (W - w.frame_len) / w.stride + 1;
  std::vector<Frame> frames;
  frames.reserve(static_cast<size_t>(count));
  const auto& xd = sp.data.data();
  for (int64_t f = 0; f < count; ++f) {
    const int64_t t0 = f * w.stride;
    Frame fr;
    fr.start_bin = t0;
    Tensor x = Tensor::zeros({C, H, w.frame_len}, sp.data.precision());
    auto& fd = x.mutable_data();
    for (int64_t c = 0; c < C; ++c)
      for (int64_t r = 0; r < H; ++r)
        for (int64_t t = 0; t < w.frame_len; ++t)
          fd[static_cast<size_t>((c * H + r) * w.frame_len + t)] =
              xd[static_cast<size_t>((c * H + r) * W + t0 + t)];
    fr.x = std::move(x);

    if (sp.continuous()) {
      int max_label = 0;
      for (int64_t t = 0; t < w.frame_len; ++t)
        max_label = std::max(max_label, sp.frame_labels[static_cast<size_t>(t0 + t)]);
      std::vector<int64_t> counts(static_cast<size_t>(max_label) + 1, 0);
      for (int64_t t = 0; t < w.frame_len; ++t)
        counts[static_cast<size_t>(sp.frame_labels[static_cast<size_t>(t0 + t)])]++;
      int best = 0;
      for (size_t c = 0; c < counts.size(); ++c)
        if (counts[c] >= counts[static_cast<size_t>(best)]) best = static_cast<int>(c);
      fr.label = best;  // ties go to the later class index
    } else {
      fr.label = sp.label;
    }
    frames.push_back(std::move(fr));
  }
  return frames;
}

// ---------------------------------------------------------------------------
// PNG IO

namespace {

struct PngReadCtx {
  FILE* f = nullptr;
  png_structp png = nullptr;
  png_infop info = nullptr;
  ~PngReadCtx() {
    if (png) png_destroy_read_struct(&png, info ? &info : nullptr, nullptr);
    if (f) std::fclose(f);
  }
};

struct PngWriteCtx {
  FILE* f = nullptr;
  png_structp png = nullptr;
  png_infop info = nullptr;
  ~PngWriteCtx() {
    if (png) png_destroy_write_struct(&png, info ? &info : nullptr);
    if (f) std::fclose(f);
  }
};

Tensor load_png(const std::string& path) {
  PngReadCtx ctx;
  ctx.f = std::fopen(path.c_str(), "rb");
  if (!ctx.f) fail("cannot open PNG: " + path);
  unsigned char header[8];
  if (std::fread(header, 1, 8, ctx.f) != 8 || png_sig_cmp(header, 0, 8))
    fail("not a PNG file: " + path);

  ctx.png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!ctx.png) fail("png: allocation failure");
  ctx.info = png_create_info_struct(ctx.png);
  if (!ctx.info) fail("png: allocation failure");
  if (setjmp(png_jmpbuf(ctx.png))) fail("png: failed to decode " + path);

  png_init_io(ctx.png, ctx.f);
  png_set_sig_bytes(ctx.png, 8);
  png_read_info(ctx.png, ctx.info);

  png_set_palette_to_rgb(ctx.png);
  png_set_expand_gray_1_2_4_to_8(ctx.png);
  png_set_strip_16(ctx.png);
  png_set_strip_alpha(ctx.png);
  png_read_update_info(ctx.png, ctx.info);

  const png_uint_32 width = png_get_image_width(ctx.png, ctx.info);
  const png_uint_32 height = png_get_image_height(ctx.png, ctx.info);
  const int channels = png_get_channels(ctx.png, ctx.info);
  if (channels != 1 && channels != 3)
    fail("png: expected 8-bit grayscale or RGB, got " + std::to_string(channels) +
         " channels in " + path);

  std::vector<unsigned char> row(static_cast<size_t>(width) * static_cast<size_t>(channels));
  Tensor out = Tensor::zeros({channels, static_cast<int64_t>(height), static_cast<int64_t>(width)});
  auto& od = out.mutable_data();
  const int64_t hw = static_cast<int64_t>(height) * static_cast<int64_t>(width);
  for (png_uint_32 y = 0; y < height; ++y) {
    png_read_row(ctx.png, row.data(), nullptr);
    for (png_uint_32 x = 0; x < width; ++x)
      for (int c = 0; c < channels; ++c)
        od[static_cast<size_t>(c * hw + static_cast<int64_t>(y) * width + x)] =
            static_cast<double>(row[static_cast<size_t>(x) * static_cast<size_t>(channels) + static_cast<size_t>(c)]) / 255.0;
  }
  png_read_end(ctx.png, nullptr);
  out.round_to_precision();
  return out;
}

}  // namespace

void save_spectrogram_png(const std::string& path, const Tensor& data) {
  if (data.rank() != 3 || (data.dim(0) != 1 && data.dim(0) != 3))
    fail("save_spectrogram_png: expected [1,H,W] or [3,H,W], got " + shape_str(data.shape()));
  const int channels = static_cast<int>(data.dim(0));
  const int64_t H = data.dim(1), W = data.dim(2);

  PngWriteCtx ctx;
  ctx.f = std::fopen(path.c_str(), "wb");
  if (!ctx.f) fail("cannot open for write: " + path);
  ctx.png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!ctx.png) fail("png: allocation failure");
  ctx.info = png_create_info_struct(ctx.png);
  if (!ctx.info) fail("png: allocation failure");
  if (setjmp(png_jmpbuf(ctx.png))) fail("png: failed to encode " + path);

  png_init_io(ctx.png, ctx.f);
  png_set_IHDR(ctx.png, ctx.info, static_cast<png_uint_32>(W), static_cast<png_uint_32>(H), 8,
               channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(ctx.png, ctx.info);

  const auto& xd = data.data();
  std::vector<unsigned char> row(static_cast<size_t>(W) * static_cast<size_t>(channels));
  for (int64_t y = 0; y < H; ++y) {
    for (int64_t x = 0; x < W; ++x)
      for (int c = 0; c < channels; ++c) {
        const double v = std::clamp(xd[static_cast<size_t>((c * H + y) * W + x)], 0.0, 1.0);
        row[static_cast<size_t>(x * channels + c)] =
            static_cast<unsigned char>(std::lround(v * 255.0));
      }
    png_write_row(ctx.png, row.data());
  }
  png_write_end(ctx.png, nullptr);
}

Spectrogram load_spectrogram(const std::string& path) {
  Tensor data;
  const std::string ext = fs::path(path).extension().string();
  if (ext == ".rmt") {
    Tensor t = load_tensor(path);
    if (t.rank() == 2) {
      data = ops::reshape(t, {1, t.dim(0), t.dim(1)});
    } else if (t.rank() == 3) {
      data = t;
    } else {
      fail("load_spectrogram: expected rank 2 or 3 tensor in " + path + ", got rank " +
           std::to_string(t.rank()));
    }
  } else if (ext == ".png") {
    data = load_png(path);
  } else {
    fail("load_spectrogram: unsupported extension '" + ext + "' in " + path);
  }
  for (double v : data.data())
    if (!(v >= -1e-9 && v <= 1.0 + 1e-9))
      fail("load_spectrogram: values outside [0,1] in " + path);

  Spectrogram sp;
  sp.data = std::move(data);
  return sp;
}

// ---------------------------------------------------------------------------
// Dataset directories

namespace {

json manifest_json(const std::vector<std::string>& classes, double hz_per_bin,
                   double s_per_bin, uint64_t seed, bool continuous) {
  json j;
  j["classes"] = classes;
  j["doppler_hz_per_bin"] = hz_per_bin;
  j["seconds_per_bin"] = s_per_bin;
  j["seed"] = seed;
  j["continuous"] = continuous;
  return j;
}

json read_manifest(const std::string& root) {
  std::ifstream is(root + "/dataset.json");
  if (!is) fail("dataset manifest missing: " + root + "/dataset.json");
  json j;
  is >> j;
  return j;
}

}  // namespace

void write_dataset_dir(const std::string& root, const Dataset& train,
                       const Dataset& test, uint64_t seed) {
  fs::create_directories(root);
  for (const auto& name : train.class_names) fs::create_directories(root + "/" + name);
  auto dump = [&](const Dataset& d) {
    for (const auto& s : d.samples) {
      const std::string& cls = d.class_names[static_cast<size_t>(s.label)];
      save_tensor(root + "/" + cls + "/" + s.id + ".rmt", s.x);
    }
  };
  dump(train);
  dump(test);
  std::ofstream os(root + "/dataset.json");
  os << manifest_json(train.class_names, train.doppler_hz_per_bin,
                      train.seconds_per_bin, seed, false)
            .dump(2)
     << "\n";
}

void write_continuous_dir(const std::string& root, const Spectrogram& seq,
                          const std::vector<std::string>& class_names, uint64_t seed) {
  fs::create_directories(root);
  save_tensor(root + "/sequence.rmt", seq.data);
  std::ofstream csv(root + "/labels.csv");
  csv << "time_bin,label\n";
  for (size_t t = 0; t < seq.frame_labels.size(); ++t)
    csv << t << "," << seq.frame_labels[t] << "\n";
  std::ofstream os(root + "/dataset.json");
  os << manifest_json(class_names, seq.doppler_hz_per_bin, seq.seconds_per_bin, seed, true)
            .dump(2)
     << "\n";
}

bool is_continuous_dir(const std::string& root) {
  if (!fs::exists(root + "/dataset.json")) return false;
  json j = read_manifest(root);
  return j.value("continuous", false);
}

Dataset load_dataset_dir(const std::string& root) {
  json j = read_manifest(root);
  Dataset d;
  d.class_names = j.at("classes").get<std::vector<std::string>>();
  d.doppler_hz_per_bin = j.value("doppler_hz_per_bin", 0.0);
  d.seconds_per_bin = j.value("seconds_per_bin", 0.0);

  for (size_t c = 0; c < d.class_names.size(); ++c) {
    const fs::path dir = fs::path(root) / d.class_names[c];
    if (!fs::is_directory(dir)) fail("dataset class directory missing: " + dir.string());
    std::vector<std::string> files;
    for (const auto& e : fs::directory_iterator(dir)) {
      const std::string ext = e.path().extension().string();
      if (ext == ".rmt" || ext == ".png") files.push_back(e.path().string());
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
      LabeledSample s;
      s.x = load_spectrogram(f).data;
      s.label = static_cast<int>(c);
      s.id = fs::path(f).stem().string();
      d.samples.push_back(std::move(s));
    }
  }
  if (d.samples.empty()) fail("dataset at " + root + " contains no samples");
  return d;
}

Spectrogram load_continuous_dir(const std::string& root) {
  json j = read_manifest(root);
  if (!j.value("continuous", false)) fail("dataset at " + root + " is not continuous");
  Spectrogram sp;
  sp.data = load_tensor(root + "/sequence.rmt");
  if (sp.data.rank() == 2) sp.data = ops::reshape(sp.data, {1, sp.data.dim(0), sp.data.dim(1)});
  sp.doppler_hz_per_bin = j.value("doppler_hz_per_bin", 0.0);
  sp.seconds_per_bin = j.value("seconds_per_bin", 0.0);

  std::ifstream csv(root + "/labels.csv");
  if (!csv) fail("labels.csv missing in " + root);
  std::string line;
  while (std::getline(csv, line)) {
    if (line.empty() || line.rfind("time_bin", 0) == 0) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) fail("labels.csv: malformed line '" + line + "'");
    sp.frame_labels.push_back(std::stoi(line.substr(comma + 1)));
  }
  if (static_cast<int64_t>(sp.frame_labels.size()) != sp.time_bins())
    fail("labels.csv rows do not match sequence time bins");
  return sp;
}

}  // namespace radmamba
