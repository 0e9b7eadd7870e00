#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "micro_fixture.hpp"
#include "uaplab/errors.hpp"
#include "uaplab/model.hpp"

using namespace uaplab;
using microfix::micro_arch;
using microfix::micro_pipeline;
using model::ArchConfig;
using model::Classifier;
using model::TrainConfig;
using numeric::Matrix;

namespace {

std::vector<double> random_wave_vec(const signal::PipelineConfig& cfg, uint64_t seed) {
  numeric::Rng rng(seed);
  return numeric::sample_uniform(rng, -1.0, 1.0, cfg.input_len);
}

}  // namespace

TEST_CASE("init: deterministic per seed, sensitive to the seed") {
  const auto cfg = micro_pipeline();
  Classifier a(micro_arch(), cfg, 1);
  Classifier b(micro_arch(), cfg, 1);
  Classifier c(micro_arch(), cfg, 2);
  CHECK(a.flat_parameters() == b.flat_parameters());
  CHECK(a.flat_parameters() != c.flat_parameters());
}

TEST_CASE("forward: probabilities form a simplex") {
  const auto cfg = micro_pipeline();
  Classifier net(micro_arch(), cfg, 3);
  for (uint64_t seed = 0; seed < 5; ++seed) {
    const auto probs = net.probs(random_wave_vec(cfg, seed));
    double sum = 0.0;
    for (double p : probs) {
      CHECK(p >= 0.0);
      CHECK(p <= 1.0);
      sum += p;
    }
    CHECK(std::abs(sum - 1.0) < 1e-6);
  }
}

TEST_CASE("forward: softmax is shift invariant") {
  std::vector<double> logits = {0.3, -1.2, 2.0, 0.0, 1.1, -0.4};
  const auto base = softmax(logits);
  for (auto& l : logits) l += 17.5;
  const auto shifted = softmax(logits);
  for (size_t i = 0; i < base.size(); ++i)
    CHECK(base[i] == doctest::Approx(shifted[i]).epsilon(1e-6));
}

TEST_CASE("forward: sharpening a 2-class toy raises the top confidence") {
  // Doubling logits of a 2-class problem keeps the argmax and sharpens the
  // softmax whenever the logit gap is positive.
  const std::vector<double> logits = {1.4, 0.6};
  const auto p1 = softmax(logits);
  const auto p2 = softmax({2.8, 1.2});
  CHECK(argmax_lowest(p1) == argmax_lowest(p2));
  CHECK(p2[0] > p1[0]);
}

TEST_CASE("predict: argmax of logits equals argmax of probabilities; ties break low") {
  const auto cfg = micro_pipeline();
  Classifier net(micro_arch(), cfg, 4);
  for (uint64_t seed = 10; seed < 15; ++seed) {
    const auto x = random_wave_vec(cfg, seed);
    CHECK(argmax_lowest(net.logits(x)) == argmax_lowest(net.probs(x)));
  }
  CHECK(argmax_lowest({0.25, 0.25, 0.25, 0.25}) == 0);
  CHECK(argmax_lowest({0.1, 0.45, 0.45}) == 1);
}

TEST_CASE("input gradient: self-difference is exactly zero") {
  const auto cfg = micro_pipeline();
  Classifier net(micro_arch(), cfg, 5);
  const auto g = net.grad_logit_diff(random_wave_vec(cfg, 1), 2, 2);
  for (double v : g) CHECK(v == 0.0);
}

TEST_CASE("input gradient: matches central finite differences end to end") {
  const auto& world = microfix::micro_world();
  const auto& net = world.net;
  const auto cfg = micro_pipeline();
  numeric::Rng rng(616);
  const double h = 1e-4;
  for (int trial = 0; trial < 3; ++trial) {
    const auto x = world.test.waves[static_cast<size_t>(trial)].samples;
    const int j = 1 + trial;
    const int i = 0;
    const auto grad = net.grad_logit_diff(x, j, i);
    for (int probe = 0; probe < 20; ++probe) {
      const int t = static_cast<int>(rng.next_u64() % static_cast<uint64_t>(cfg.input_len));
      auto xp = x, xm = x;
      xp[static_cast<size_t>(t)] += h;
      xm[static_cast<size_t>(t)] -= h;
      const auto lp = net.logits(xp);
      const auto lm = net.logits(xm);
      const double fd = ((lp[static_cast<size_t>(j)] - lp[static_cast<size_t>(i)]) -
                         (lm[static_cast<size_t>(j)] - lm[static_cast<size_t>(i)])) /
                        (2.0 * h);
      const double rel = std::abs(fd - grad[static_cast<size_t>(t)]) / std::max(std::abs(fd), 1e-8);
      CHECK(rel <= 1e-3);
    }
  }
}

TEST_CASE("input gradient: softmax-confidence gradient matches finite differences") {
  const auto& world = microfix::micro_world();
  const auto cfg = micro_pipeline();
  const auto x = world.test.waves[0].samples;
  const auto grad = world.net.grad_prob(x, 3);
  numeric::Rng rng(626);
  const double h = 1e-4;
  for (int probe = 0; probe < 20; ++probe) {
    const int t = static_cast<int>(rng.next_u64() % static_cast<uint64_t>(cfg.input_len));
    auto xp = x, xm = x;
    xp[static_cast<size_t>(t)] += h;
    xm[static_cast<size_t>(t)] -= h;
    const double fd = (world.net.probs(xp)[3] - world.net.probs(xm)[3]) / (2.0 * h);
    const double rel = std::abs(fd - grad[static_cast<size_t>(t)]) / std::max(std::abs(fd), 1e-8);
    CHECK(rel <= 1e-3);
  }
}

TEST_CASE("train: zero epochs is a no-op") {
  const auto cfg = micro_pipeline();
  Classifier net(micro_arch(), cfg, 6);
  const auto before = net.flat_parameters();
  TrainConfig tc;
  tc.epochs = 0;
  const auto ds = dataset::generate_synthetic({6, 4, 1, 0.1}, cfg);
  const auto history = net.train(ds, tc);
  CHECK(history.empty());
  CHECK(net.flat_parameters() == before);
}

TEST_CASE("train: loss decreases and runs are seed-deterministic") {
  const auto cfg = micro_pipeline();
  const auto ds = dataset::generate_synthetic({6, 10, 55, 0.1}, cfg);
  TrainConfig tc;
  tc.epochs = 8;
  tc.batch_size = 12;
  tc.learning_rate = 0.05;
  tc.seed = 99;

  Classifier a(micro_arch(), cfg, 7);
  const auto hist_a = a.train(ds, tc);
  CHECK(hist_a.size() == 8);
  for (double l : hist_a) CHECK(std::isfinite(l));
  CHECK(hist_a.back() < hist_a.front());

  Classifier b(micro_arch(), cfg, 7);
  const auto hist_b = b.train(ds, tc);
  CHECK(hist_a == hist_b);
  CHECK(a.flat_parameters() == b.flat_parameters());
}

TEST_CASE("accuracy: perfect, constant, and hand-built confusion fixtures") {
  const auto& world = microfix::micro_world();
  const auto cfg = micro_pipeline();

  // Perfect predictor fixture: label every input with the model's own output.
  dataset::LabeledDataset self = world.test;
  for (size_t i = 0; i < self.size(); ++i) self.labels[i] = world.net.predict(self.waves[i].samples);
  const auto rep = world.net.accuracy(self, 2);
  CHECK(rep.overall == doctest::Approx(1.0));
  CHECK(rep.mean_per_class == doctest::Approx(1.0));

  // Constant-prediction fixture: every item is the same waveform with labels
  // spread uniformly over the 6 classes, so exactly one class is fully right.
  {
    dataset::LabeledDataset constant;
    constant.class_names = world.test.class_names;
    for (int label = 0; label < 6; ++label) {
      for (int rep_i = 0; rep_i < 3; ++rep_i) {
        constant.waves.push_back(world.test.waves[0]);
        constant.labels.push_back(label);
      }
    }
    const auto crep = world.net.accuracy(constant, 1);
    CHECK(crep.mean_per_class == doctest::Approx(1.0 / 6.0));
    CHECK(crep.overall == doctest::Approx(1.0 / 6.0));
  }

  // Known confusion: flip the labels of 5 inputs of one class.
  dataset::LabeledDataset confused = self;
  int flipped = 0;
  for (size_t i = 0; i < confused.size() && flipped < 5; ++i) {
    if (confused.labels[i] == 0) {
      confused.labels[i] = 1;
      ++flipped;
    }
  }
  REQUIRE(flipped == 5);
  const auto rep2 = world.net.accuracy(confused, 1);
  std::vector<int> total(6, 0);
  for (int label : confused.labels) total[static_cast<size_t>(label)]++;
  // the 5 flipped items are wrong for class 1, everything else unchanged
  CHECK(rep2.per_class_correct[1] == total[1] - 5);
  CHECK(rep2.per_class_correct[0] == total[0]);
}

TEST_CASE("checkpoint: bit-exact round trip") {
  const auto& world = microfix::micro_world();
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "uaplab_ckpt_test";
  fs::create_directories(dir);

  const std::string p1 = (dir / "a.ckpt").string();
  const std::string p2 = (dir / "b.ckpt").string();
  world.net.save(p1);
  const Classifier loaded = Classifier::load(p1);
  loaded.save(p2);

  std::ifstream f1(p1, std::ios::binary), f2(p2, std::ios::binary);
  const std::string bytes1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
  const std::string bytes2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
  CHECK(bytes1 == bytes2);
  CHECK(!bytes1.empty());

  // A trained model's parameters are float32-rounded, so the reload is exact.
  CHECK(loaded.flat_parameters() == world.net.flat_parameters());
  for (size_t i = 0; i < 5; ++i) {
    const auto x = world.test.waves[i].samples;
    CHECK(loaded.predict(x) == world.net.predict(x));
  }
  fs::remove_all(dir);
}

TEST_CASE("classifier rejects broken architectures") {
  const auto cfg = micro_pipeline();
  ArchConfig arch = micro_arch();
  arch.convs[0].kernel_h = 64;  // larger than the 15-frame input
  CHECK_THROWS_AS(Classifier(arch, cfg, 1), InvalidArch);
  ArchConfig one_class = micro_arch(1);
  CHECK_THROWS_AS(Classifier(one_class, cfg, 1), InvalidArch);
}

TEST_CASE("train rejects out-of-range labels") {
  const auto cfg = micro_pipeline();
  Classifier net(micro_arch(), cfg, 9);
  auto ds = dataset::generate_synthetic({6, 2, 1, 0.1}, cfg);
  ds.labels[0] = 17;
  TrainConfig tc;
  tc.epochs = 1;
  CHECK_THROWS_AS(net.train(ds, tc), InvalidConfig);
}
