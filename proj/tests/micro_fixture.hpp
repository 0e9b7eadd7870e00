#ifndef UAPLAB_TESTS_MICRO_FIXTURE_HPP
#define UAPLAB_TESTS_MICRO_FIXTURE_HPP

// Tiny end-to-end fixture shared across test suites: a 256-sample pipeline
// and a classifier trained on a small synthetic set in well under a second.

#include "uaplab/dataset.hpp"
#include "uaplab/model.hpp"
#include "uaplab/signal.hpp"

namespace microfix {

inline uaplab::signal::PipelineConfig micro_pipeline() {
  uaplab::signal::PipelineConfig cfg;
  cfg.sample_rate_hz = 2000;
  cfg.input_len = 256;
  cfg.frame_len = 32;
  cfg.hop = 16;
  cfg.fft_size = 32;
  cfg.retained_bins = 17;
  cfg.n_mels = 8;
  cfg.n_mfcc = 6;
  return cfg;
}

inline uaplab::model::ArchConfig micro_arch(int classes = 6) {
  return uaplab::model::ArchConfig::desk_default(classes);
}

struct MicroWorld {
  uaplab::dataset::LabeledDataset train;
  uaplab::dataset::LabeledDataset test;
  uaplab::model::Classifier net;
};

inline const MicroWorld& micro_world() {
  static const MicroWorld world = [] {
    const auto cfg = micro_pipeline();
    const auto full = uaplab::dataset::generate_synthetic({6, 24, 424242, 0.1}, cfg);
    auto [train, test] = uaplab::dataset::split(full, 0.5, 7);
    uaplab::model::Classifier net(micro_arch(), cfg, 2718);
    uaplab::model::TrainConfig tc;
    tc.epochs = 20;
    tc.batch_size = 16;
    tc.learning_rate = 0.05;
    tc.momentum = 0.9;
    tc.seed = 515;
    net.train(train, tc);
    return MicroWorld{std::move(train), std::move(test), std::move(net)};
  }();
  return world;
}

}  // namespace microfix

#endif  // UAPLAB_TESTS_MICRO_FIXTURE_HPP
