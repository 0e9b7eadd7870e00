#ifndef UAPLAB_CLI_HPP
#define UAPLAB_CLI_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "uaplab/attacks.hpp"
#include "uaplab/dataset.hpp"
#include "uaplab/dominance.hpp"
#include "uaplab/model.hpp"
#include "uaplab/signal.hpp"

namespace uaplab::cli {

struct UapSection {
  double xi = 0.5;
  std::string p = "2";  // "2" or "inf"
  double delta = 0.1;
  int max_passes = 5;
  std::vector<std::string> restricted;
  std::vector<uint64_t> seeds = {11, 12, 13, 14, 15};

  bool operator==(const UapSection&) const = default;
};

struct TargetSection {
  double xi = 0.5;
  int iters = 100;
  double step = 0.01;
  int trials = 20;
  uint64_t seed = 4004;

  bool operator==(const TargetSection&) const = default;
};

struct DeepfoolSection {
  int count = 25;

  bool operator==(const DeepfoolSection&) const = default;
};

struct SvdSection {
  std::vector<int> ns = {5, 10, 20, 40};
  std::vector<double> scales = {-40, -20, -10, -5, 5, 10, 20, 40};
  int trials = 20;
  int vector_count = 20;
  std::vector<double> vector_scales = {-20, 20};
  long long volume_samples = 10000;
  uint64_t seed = 6006;
  int matrix_rows = 300;  // 0 = use the whole training split
  std::vector<std::string> kinds = {
      "deepfool:waveform", "deepfool:spectrogram", "deepfool:mfcc",
      "random:waveform",   "random:spectrogram",   "random:mfcc",
      "uniform:spectrogram", "uniform:mfcc"};

  bool operator==(const SvdSection&) const = default;
};

struct ThresholdSection {
  double alpha = 1.0 / 3.0;
  double beta = 1.0 / 3.0;
  double zeta = 1.0 / 3.0;

  bool operator==(const ThresholdSection&) const = default;
};

/// Fully resolved experiment description. A config file names a preset
/// ("desk" or "paper") and overrides individual keys.
struct ExperimentConfig {
  std::string preset = "desk";
  std::string out_dir = "out";
  int threads = 2;
  signal::PipelineConfig pipeline;
  // data
  std::string data_source = "synthetic";  // "synthetic" | "wav"
  dataset::SynthSpec synth;
  std::string wav_dir;
  std::vector<std::string> wav_class_names;
  double train_fraction = 2.0 / 3.0;
  uint64_t split_seed = 2002;
  // model
  model::ArchConfig arch;
  model::TrainConfig train;
  // experiments
  UapSection uap;
  TargetSection target;
  DeepfoolSection deepfool;
  SvdSection svd;
  ThresholdSection thresholds;
  std::string silence_class = "silence";

  bool operator==(const ExperimentConfig&) const = default;

  std::vector<std::string> class_names() const;
  int silence_class_index() const;  // -1 when absent
  std::vector<int> restricted_indices() const;
};

ExperimentConfig default_config(const std::string& preset);
ExperimentConfig config_from_json_text(const std::string& text);
std::string config_to_json_text(const ExperimentConfig& cfg);
ExperimentConfig load_config_file(const std::string& path);

struct DataBundle {
  dataset::LabeledDataset full;
  dataset::LabeledDataset train;
  dataset::LabeledDataset test;
};

/// Regenerates or loads the dataset named by the config and splits it.
/// Deterministic for a fixed config.
DataBundle load_experiment_data(const ExperimentConfig& cfg);

std::string checkpoint_path(const ExperimentConfig& cfg);

/// Entry point used by the `lab` binary and by in-process tests.
/// `args` excludes the program name. Returns the process exit code; failures
/// print one machine-parsable line on stderr.
int run_cli(const std::vector<std::string>& args);

}  // namespace uaplab::cli

#endif  // UAPLAB_CLI_HPP
