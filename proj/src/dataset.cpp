#include "uaplab/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>

#include "uaplab/errors.hpp"

namespace uaplab::dataset {

namespace fs = std::filesystem;

std::vector<std::string> synthetic_class_names(int k) {
  static const std::vector<std::string> names = {"silence", "chirp", "low", "mid", "high", "noise"};
  if (k < 2 || k > static_cast<int>(names.size()))
    throw InvalidConfig("synthetic_class_names: k must be in [2," + std::to_string(names.size()) + "]");
  return {names.begin(), names.begin() + k};
}

namespace {

struct HarmonicStack {
  double fundamental_hz;
  double amps[3];
  double phases[3];
};

// Deterministic base waveform for one class. Frequencies are fractions of
// the sample rate so recipes stay below Nyquist for any rate.
std::vector<double> class_base(int cls, const signal::PipelineConfig& cfg) {
  const int n = cfg.input_len;
  const double sr = cfg.sample_rate_hz;
  std::vector<double> base(static_cast<size_t>(n), 0.0);
  switch (cls) {
    case 0:  // silence: zero base, items are pure low-amplitude noise
      break;
    case 1: {  // up-chirp from 0.075 to 0.325 of the sample rate
      const double f0 = 0.075 * sr, f1 = 0.325 * sr;
      const double dur = n / sr;
      for (int t = 0; t < n; ++t) {
        const double tau = t / sr;
        const double phase = 2.0 * M_PI * (f0 * tau + 0.5 * (f1 - f0) * tau * tau / dur);
        base[static_cast<size_t>(t)] = 0.7 * std::sin(phase);
      }
      break;
    }
    case 2:
    case 3:
    case 4: {  // harmonic stacks at distinct fundamentals
      static const HarmonicStack stacks[3] = {
          {0.040, {0.50, 0.25, 0.12}, {0.0, 1.3, 2.1}},
          {0.085, {0.50, 0.22, 0.10}, {0.7, 2.6, 0.4}},
          {0.165, {0.48, 0.24, 0.11}, {1.9, 0.2, 3.0}},
      };
      const HarmonicStack& st = stacks[cls - 2];
      for (int h = 0; h < 3; ++h) {
        const double f = st.fundamental_hz * (h + 1) * sr;
        for (int t = 0; t < n; ++t)
          base[static_cast<size_t>(t)] += st.amps[h] * std::sin(2.0 * M_PI * f * t / sr + st.phases[h]);
      }
      break;
    }
    case 5: {  // band noise: fixed sum of sines in [0.25, 0.45] of the rate
      uint64_t lcg = 0x1234ABCDULL;
      for (int c = 0; c < 25; ++c) {
        lcg = lcg * 6364136223846793005ULL + 1442695040888963407ULL;
        const double frac = 0.25 + 0.20 * static_cast<double>(lcg >> 40) / 16777216.0;
        lcg = lcg * 6364136223846793005ULL + 1442695040888963407ULL;
        const double phase = 2.0 * M_PI * static_cast<double>(lcg >> 40) / 16777216.0;
        const double f = frac * sr;
        for (int t = 0; t < n; ++t)
          base[static_cast<size_t>(t)] += std::sin(2.0 * M_PI * f * t / sr + phase);
      }
      double peak = 0.0;
      for (double x : base) peak = std::max(peak, std::abs(x));
      if (peak > 0.0)
        for (double& x : base) x *= 0.8 / peak;
      break;
    }
    default:
      throw InvalidConfig("class_base: no recipe for class " + std::to_string(cls));
  }
  return base;
}

}  // namespace

LabeledDataset generate_synthetic(const SynthSpec& spec, const signal::PipelineConfig& cfg) {
  cfg.validate();
  if (spec.per_class < 1) throw InvalidConfig("generate_synthetic: per_class must be >= 1");
  if (spec.noise_level < 0.0 || spec.noise_level >= 1.0)
    throw InvalidConfig("generate_synthetic: noise_level must be in [0,1)");

  LabeledDataset ds;
  ds.class_names = synthetic_class_names(spec.k);
  ds.split_tag = "full";
  numeric::Rng root(spec.seed);

  for (int cls = 0; cls < spec.k; ++cls) {
    const std::vector<double> base = class_base(cls, cfg);
    // Silence keeps its noise small so the class stays near-silent.
    const double noise_amp = (cls == 0) ? 0.1 * spec.noise_level : spec.noise_level;
    numeric::Rng class_rng = root.fork(static_cast<uint64_t>(cls));
    for (int item = 0; item < spec.per_class; ++item) {
      numeric::Rng rng = class_rng.fork(static_cast<uint64_t>(item));
      signal::Waveform w;
      w.sample_rate_hz = cfg.sample_rate_hz;
      w.samples.resize(static_cast<size_t>(cfg.input_len));
      for (int t = 0; t < cfg.input_len; ++t) {
        const double noise = noise_amp * rng.uniform(-1.0, 1.0);
        w.samples[static_cast<size_t>(t)] =
            (1.0 - spec.noise_level) * base[static_cast<size_t>(t)] + noise;
      }
      ds.waves.push_back(std::move(w));
      ds.labels.push_back(cls);
    }
  }
  return ds;
}

namespace {

uint32_t read_u32(const unsigned char* p) {
  return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
         (static_cast<uint32_t>(p[2]) << 16) | (static_cast<uint32_t>(p[3]) << 24);
}

uint16_t read_u16(const unsigned char* p) {
  return static_cast<uint16_t>(p[0] | (p[1] << 8));
}

signal::Waveform load_wav_file(const std::string& path, const signal::PipelineConfig& cfg) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0)
    throw UnsupportedFormat(path + ": not a RIFF/WAVE file");

  size_t pos = 12;
  bool have_fmt = false;
  uint16_t format = 0, channels = 0, bits = 0;
  uint32_t rate = 0;
  const unsigned char* data_ptr = nullptr;
  uint32_t data_len = 0;
  while (pos + 8 <= bytes.size()) {
    const char* id = reinterpret_cast<const char*>(bytes.data() + pos);
    const uint32_t chunk = read_u32(bytes.data() + pos + 4);
    if (pos + 8 + chunk > bytes.size()) throw UnsupportedFormat(path + ": truncated chunk");
    if (std::memcmp(id, "fmt ", 4) == 0) {
      if (chunk < 16) throw UnsupportedFormat(path + ": short fmt chunk");
      const unsigned char* f = bytes.data() + pos + 8;
      format = read_u16(f);
      channels = read_u16(f + 2);
      rate = read_u32(f + 4);
      bits = read_u16(f + 14);
      have_fmt = true;
    } else if (std::memcmp(id, "data", 4) == 0) {
      data_ptr = bytes.data() + pos + 8;
      data_len = chunk;
    }
    pos += 8 + chunk + (chunk & 1);  // chunks are word-aligned
  }
  if (!have_fmt || data_ptr == nullptr) throw UnsupportedFormat(path + ": missing fmt or data chunk");
  if (format != 1) throw UnsupportedFormat(path + ": not PCM");
  if (channels != 1) throw UnsupportedFormat(path + ": not mono");
  if (bits != 16) throw UnsupportedFormat(path + ": not 16-bit");
  if (rate != static_cast<uint32_t>(cfg.sample_rate_hz))
    throw UnsupportedFormat(path + ": sample rate " + std::to_string(rate) + " != " +
                            std::to_string(cfg.sample_rate_hz));

  const size_t n_samples = data_len / 2;
  if (n_samples > static_cast<size_t>(cfg.input_len))
    throw ClipTooLong(path + ": " + std::to_string(n_samples) + " samples exceed input_len " +
                      std::to_string(cfg.input_len));

  signal::Waveform w;
  w.sample_rate_hz = cfg.sample_rate_hz;
  w.samples.assign(static_cast<size_t>(cfg.input_len), 0.0);
  for (size_t i = 0; i < n_samples; ++i) {
    const int16_t s = static_cast<int16_t>(read_u16(data_ptr + 2 * i));
    w.samples[i] = static_cast<double>(s) / 32768.0;
  }
  return w;
}

}  // namespace

LabeledDataset load_wav_dir(const std::string& path, const std::vector<std::string>& class_names,
                            const signal::PipelineConfig& cfg) {
  cfg.validate();
  if (!fs::is_directory(path)) throw IoError("load_wav_dir: " + path + " is not a directory");

  std::map<std::string, int> index;
  for (size_t i = 0; i < class_names.size(); ++i) index[class_names[i]] = static_cast<int>(i);

  std::vector<std::string> subdirs;
  for (const auto& e : fs::directory_iterator(path))
    if (e.is_directory()) subdirs.push_back(e.path().filename().string());
  std::sort(subdirs.begin(), subdirs.end());

  LabeledDataset ds;
  ds.class_names = class_names;
  for (const auto& dir : subdirs) {
    const auto it = index.find(dir);
    if (it == index.end())
      throw UnsupportedFormat("load_wav_dir: folder '" + dir + "' is not a known class name");
    std::vector<std::string> files;
    for (const auto& e : fs::directory_iterator(fs::path(path) / dir))
      if (e.is_regular_file() && e.path().extension() == ".wav") files.push_back(e.path().string());
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
      ds.waves.push_back(load_wav_file(f, cfg));
      ds.labels.push_back(it->second);
    }
  }
  return ds;
}

std::pair<LabeledDataset, LabeledDataset> split(const LabeledDataset& ds, double fraction,
                                                uint64_t seed) {
  if (fraction <= 0.0 || fraction >= 1.0) throw InvalidConfig("split: fraction must be in (0,1)");
  const int k = ds.k();
  std::vector<std::vector<int>> per_class(static_cast<size_t>(k));
  for (size_t i = 0; i < ds.labels.size(); ++i)
    per_class[static_cast<size_t>(ds.labels[i])].push_back(static_cast<int>(i));

  LabeledDataset train, test;
  train.class_names = test.class_names = ds.class_names;
  train.split_tag = "train";
  test.split_tag = "test";

  numeric::Rng root(seed);
  for (int cls = 0; cls < k; ++cls) {
    auto& idx = per_class[static_cast<size_t>(cls)];
    if (idx.size() < 2)
      throw ClassTooSmall("split: class " + ds.class_names[static_cast<size_t>(cls)] +
                          " has fewer than 2 items");
    numeric::Rng rng = root.fork(static_cast<uint64_t>(cls));
    // Fisher-Yates
    for (size_t i = idx.size() - 1; i > 0; --i) {
      const size_t j = static_cast<size_t>(rng.next_u64() % (i + 1));
      std::swap(idx[i], idx[j]);
    }
    size_t n_train = static_cast<size_t>(std::lround(fraction * static_cast<double>(idx.size())));
    n_train = std::min(std::max<size_t>(n_train, 1), idx.size() - 1);
    for (size_t i = 0; i < idx.size(); ++i) {
      auto& out = (i < n_train) ? train : test;
      out.waves.push_back(ds.waves[static_cast<size_t>(idx[i])]);
      out.labels.push_back(cls);
    }
  }
  return {std::move(train), std::move(test)};
}

}  // namespace uaplab::dataset
