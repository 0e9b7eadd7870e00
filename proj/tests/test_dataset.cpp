#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>

#include "uaplab/dataset.hpp"
#include "uaplab/errors.hpp"

using namespace uaplab;
using dataset::LabeledDataset;
using dataset::SynthSpec;
using signal::PipelineConfig;

namespace fs = std::filesystem;

namespace {

bool same_bytes(const LabeledDataset& a, const LabeledDataset& b) {
  if (a.labels != b.labels || a.size() != b.size()) return false;
  for (size_t i = 0; i < a.size(); ++i)
    if (std::memcmp(a.waves[i].samples.data(), b.waves[i].samples.data(),
                    a.waves[i].samples.size() * sizeof(double)) != 0)
      return false;
  return true;
}

void write_u32(std::ofstream& out, uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                              static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

void write_u16(std::ofstream& out, uint16_t v) {
  const unsigned char b[2] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8)};
  out.write(reinterpret_cast<const char*>(b), 2);
}

void write_wav(const fs::path& path, const std::vector<int16_t>& samples, uint32_t rate,
               uint16_t channels = 1, uint16_t bits = 16, uint16_t format = 1) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  const uint32_t data_len = static_cast<uint32_t>(samples.size() * 2);
  out.write("RIFF", 4);
  write_u32(out, 36 + data_len);
  out.write("WAVE", 4);
  out.write("fmt ", 4);
  write_u32(out, 16);
  write_u16(out, format);
  write_u16(out, channels);
  write_u32(out, rate);
  write_u32(out, rate * channels * bits / 8);
  write_u16(out, static_cast<uint16_t>(channels * bits / 8));
  write_u16(out, bits);
  out.write("data", 4);
  write_u32(out, data_len);
  for (int16_t s : samples) write_u16(out, static_cast<uint16_t>(s));
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("synthetic: deterministic byte-level regeneration") {
  const PipelineConfig cfg = PipelineConfig::desk();
  const SynthSpec spec{6, 10, 77, 0.1};
  const LabeledDataset a = dataset::generate_synthetic(spec, cfg);
  const LabeledDataset b = dataset::generate_synthetic(spec, cfg);
  CHECK(same_bytes(a, b));

  SynthSpec other = spec;
  other.seed = 78;
  CHECK(!same_bytes(a, dataset::generate_synthetic(other, cfg)));
}

TEST_CASE("synthetic: zero noise collapses every class to one waveform") {
  const PipelineConfig cfg = PipelineConfig::desk();
  const SynthSpec spec{6, 5, 1, 0.0};
  const LabeledDataset ds = dataset::generate_synthetic(spec, cfg);
  std::map<int, std::vector<size_t>> by_class;
  for (size_t i = 0; i < ds.size(); ++i) by_class[ds.labels[i]].push_back(i);
  for (const auto& [cls, idx] : by_class) {
    for (size_t i = 1; i < idx.size(); ++i)
      CHECK(std::memcmp(ds.waves[idx[0]].samples.data(), ds.waves[idx[i]].samples.data(),
                        sizeof(double) * ds.waves[idx[0]].samples.size()) == 0);
  }
}

TEST_CASE("synthetic: class counts and ranges") {
  const PipelineConfig cfg = PipelineConfig::desk();
  const SynthSpec spec{6, 100, 5, 0.15};
  const LabeledDataset ds = dataset::generate_synthetic(spec, cfg);
  CHECK(ds.size() == 600);
  CHECK(ds.k() == 6);
  std::vector<int> hist(6, 0);
  for (int label : ds.labels) hist[static_cast<size_t>(label)]++;
  for (int h : hist) CHECK(h == 100);
  for (const auto& w : ds.waves) {
    CHECK(static_cast<int>(w.samples.size()) == cfg.input_len);
    for (double s : w.samples) {
      CHECK(s >= -1.0);
      CHECK(s <= 1.0);
    }
  }
}

TEST_CASE("synthetic: silence class stays near-silent") {
  const PipelineConfig cfg = PipelineConfig::desk();
  const LabeledDataset ds = dataset::generate_synthetic({6, 5, 9, 0.1}, cfg);
  CHECK(ds.class_names[0] == "silence");
  for (size_t i = 0; i < ds.size(); ++i) {
    if (ds.labels[i] != 0) continue;
    double peak = 0.0;
    for (double s : ds.waves[i].samples) peak = std::max(peak, std::abs(s));
    CHECK(peak <= 0.011);
  }
}

TEST_CASE("wav loader: normalization, padding, and format errors") {
  const PipelineConfig cfg = PipelineConfig::desk();
  TempDir dir("uaplab_wav_test");
  fs::create_directories(dir.path / "silence");
  fs::create_directories(dir.path / "chirp");

  // full-scale negative value maps to -1.0 exactly
  write_wav(dir.path / "silence" / "a.wav", {-32768, 16384, 0}, 2000);
  // short clip gets zero padding
  std::vector<int16_t> short_clip(static_cast<size_t>(cfg.input_len - 10), 1000);
  write_wav(dir.path / "silence" / "b.wav", short_clip, 2000);
  write_wav(dir.path / "chirp" / "c.wav", {1, 2, 3}, 2000);

  const LabeledDataset ds =
      dataset::load_wav_dir(dir.path.string(), dataset::synthetic_class_names(6), cfg);
  CHECK(ds.size() == 3);
  // files are ordered by class directory then filename
  CHECK(ds.waves[1].samples[0] == doctest::Approx(-1.0));
  CHECK(ds.waves[1].samples[1] == doctest::Approx(0.5));
  for (int t = cfg.input_len - 10; t < cfg.input_len; ++t)
    CHECK(ds.waves[2].samples[static_cast<size_t>(t)] == 0.0);
  CHECK(ds.labels == std::vector<int>{1, 0, 0});

  SUBCASE("clip too long") {
    std::vector<int16_t> long_clip(static_cast<size_t>(cfg.input_len + 1), 0);
    write_wav(dir.path / "chirp" / "long.wav", long_clip, 2000);
    CHECK_THROWS_AS(dataset::load_wav_dir(dir.path.string(), dataset::synthetic_class_names(6), cfg),
                    ClipTooLong);
  }
  SUBCASE("stereo rejected") {
    write_wav(dir.path / "chirp" / "stereo.wav", {1, 2, 3, 4}, 2000, 2);
    CHECK_THROWS_AS(dataset::load_wav_dir(dir.path.string(), dataset::synthetic_class_names(6), cfg),
                    UnsupportedFormat);
  }
  SUBCASE("sample-rate mismatch rejected") {
    write_wav(dir.path / "chirp" / "rate.wav", {1, 2, 3}, 16000);
    CHECK_THROWS_AS(dataset::load_wav_dir(dir.path.string(), dataset::synthetic_class_names(6), cfg),
                    UnsupportedFormat);
  }
  SUBCASE("non-pcm rejected") {
    write_wav(dir.path / "chirp" / "float.wav", {1, 2, 3}, 2000, 1, 16, 3);
    CHECK_THROWS_AS(dataset::load_wav_dir(dir.path.string(), dataset::synthetic_class_names(6), cfg),
                    UnsupportedFormat);
  }
  SUBCASE("unknown class folder is named in the error") {
    fs::create_directories(dir.path / "mystery");
    write_wav(dir.path / "mystery" / "x.wav", {1}, 2000);
    try {
      dataset::load_wav_dir(dir.path.string(), dataset::synthetic_class_names(6), cfg);
      CHECK(false);
    } catch (const UnsupportedFormat& e) {
      CHECK(std::string(e.what()).find("mystery") != std::string::npos);
    }
  }
}

TEST_CASE("split: stratified halves") {
  const PipelineConfig cfg = PipelineConfig::desk();
  const LabeledDataset ds = dataset::generate_synthetic({6, 100, 21, 0.1}, cfg);
  const auto [train, test] = dataset::split(ds, 0.5, 99);
  std::vector<int> train_hist(6, 0), test_hist(6, 0);
  for (int label : train.labels) train_hist[static_cast<size_t>(label)]++;
  for (int label : test.labels) test_hist[static_cast<size_t>(label)]++;
  for (int c = 0; c < 6; ++c) {
    CHECK(train_hist[static_cast<size_t>(c)] == 50);
    CHECK(test_hist[static_cast<size_t>(c)] == 50);
  }
  CHECK(train.split_tag == "train");
  CHECK(test.split_tag == "test");
}

TEST_CASE("split: union is the original multiset") {
  const PipelineConfig cfg = PipelineConfig::desk();
  const LabeledDataset ds = dataset::generate_synthetic({4, 9, 3, 0.1}, cfg);
  const auto [train, test] = dataset::split(ds, 0.4, 1);

  // Multiset equality via sorted content digests of each waveform.
  auto digests = [](const LabeledDataset& d) {
    std::vector<std::pair<int, double>> out;
    for (size_t i = 0; i < d.size(); ++i) {
      double s = 0.0;
      for (size_t t = 0; t < d.waves[i].samples.size(); ++t)
        s += d.waves[i].samples[t] * static_cast<double>(t + 1);
      out.emplace_back(d.labels[i], s);
    }
    return out;
  };
  auto all = digests(ds);
  auto merged = digests(train);
  auto te = digests(test);
  merged.insert(merged.end(), te.begin(), te.end());
  std::sort(all.begin(), all.end());
  std::sort(merged.begin(), merged.end());
  CHECK(all == merged);
}

TEST_CASE("split: deterministic and seed-sensitive") {
  const PipelineConfig cfg = PipelineConfig::desk();
  const LabeledDataset ds = dataset::generate_synthetic({6, 20, 8, 0.1}, cfg);
  const auto [a_train, a_test] = dataset::split(ds, 0.5, 7);
  const auto [b_train, b_test] = dataset::split(ds, 0.5, 7);
  CHECK(same_bytes(a_train, b_train));
  CHECK(same_bytes(a_test, b_test));
  const auto [c_train, c_test] = dataset::split(ds, 0.5, 8);
  CHECK(!same_bytes(a_train, c_train));
}

TEST_CASE("split: class with fewer than two items") {
  const PipelineConfig cfg = PipelineConfig::desk();
  const LabeledDataset ds = dataset::generate_synthetic({6, 1, 2, 0.1}, cfg);
  CHECK_THROWS_AS(dataset::split(ds, 0.5, 3), ClassTooSmall);
}

TEST_CASE("split: fraction bounds") {
  const PipelineConfig cfg = PipelineConfig::desk();
  const LabeledDataset ds = dataset::generate_synthetic({6, 4, 2, 0.1}, cfg);
  CHECK_THROWS_AS(dataset::split(ds, 0.0, 3), InvalidConfig);
  CHECK_THROWS_AS(dataset::split(ds, 1.0, 3), InvalidConfig);
}
