#ifndef UAPLAB_DATASET_HPP
#define UAPLAB_DATASET_HPP

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "uaplab/signal.hpp"

namespace uaplab::dataset {

struct LabeledDataset {
  std::vector<signal::Waveform> waves;
  std::vector<int> labels;
  std::vector<std::string> class_names;
  std::string split_tag = "full";

  int k() const { return static_cast<int>(class_names.size()); }
  size_t size() const { return waves.size(); }
};

/// Synthetic command-like audio. Each class has a fixed spectral recipe
/// shipped in code (one near-silence class, one band-noise class, harmonic
/// stacks at distinct fundamentals, one up-chirp); only the seeded additive
/// noise varies between items of a class.
struct SynthSpec {
  int k = 6;
  int per_class = 150;
  uint64_t seed = 1;
  double noise_level = 0.1;  // in [0,1)

  bool operator==(const SynthSpec&) const = default;
};

/// Class names used by the synthetic generator, in label order.
std::vector<std::string> synthetic_class_names(int k);

LabeledDataset generate_synthetic(const SynthSpec& spec, const signal::PipelineConfig& cfg);

/// Loads path/<class_name>/*.wav. Accepts 16-bit PCM mono RIFF files at the
/// pipeline sample rate; shorter clips are zero-padded, longer clips are
/// rejected. Throws UnsupportedFormat / ClipTooLong.
LabeledDataset load_wav_dir(const std::string& path, const std::vector<std::string>& class_names,
                            const signal::PipelineConfig& cfg);

/// Deterministic stratified split; both sides keep at least one item per
/// class. Throws ClassTooSmall if any class has fewer than 2 items.
std::pair<LabeledDataset, LabeledDataset> split(const LabeledDataset& ds, double fraction,
                                                uint64_t seed);

}  // namespace uaplab::dataset

#endif  // UAPLAB_DATASET_HPP
