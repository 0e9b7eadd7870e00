#ifndef UAPLAB_SVDLAB_HPP
#define UAPLAB_SVDLAB_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "uaplab/attacks.hpp"
#include "uaplab/dataset.hpp"
#include "uaplab/model.hpp"
#include "uaplab/numeric.hpp"

namespace uaplab::svdlab {

using numeric::Matrix;

enum class MatrixKind {
  DeepFoolV,       // per-anchor minimal perturbations, generated on waveforms
  RandomR,         // uniform waveform noise at a fixed L2 norm
  UniformFeature,  // uniform noise sampled directly in a feature space
};

std::string matrix_kind_name(MatrixKind k);

/// Rows are unit-normalized perturbations in the chosen representation.
/// Waveform rows are the perturbations themselves; spectrogram/MFCC rows of
/// anchored kinds are g(x_i + v_i) - g(x_i).
struct PerturbationMatrix {
  Matrix rows;
  MatrixKind kind = MatrixKind::RandomR;
  attacks::Domain repr = attacks::Domain::Waveform;
  std::vector<int> anchors;  // dataset indices; empty for UniformFeature
  int skipped = 0;           // anchors dropped (unconverged attack rows)
};

/// L2 norm applied to waveform noise rows before mapping through g.
constexpr double kRandomRowNorm = 0.1;

PerturbationMatrix build_matrix(const dataset::LabeledDataset& ds, const model::Classifier& c,
                                MatrixKind kind, attacks::Domain repr, uint64_t seed,
                                int threads = 1);

struct DecayEntry {
  std::string name;
  std::vector<double> sigma;
  numeric::ExpFit fit;
};

DecayEntry decay_of(const PerturbationMatrix& m, const std::string& name);

struct SweepCell {
  int n = 0;          // subspace size
  double scale = 0.0; // signed; the sampled perturbation has L2 norm |scale|
  double mean_fr = 0.0;
  int trials = 0;
};

struct SubspaceSweepResult {
  std::vector<SweepCell> cells;
  uint64_t seed = 0;
};

/// Mean fooling rate of random unit directions drawn from the span of the
/// first N right singular vectors, scaled and added to each test input's
/// MFCC features. V columns must match the MFCC feature dimension.
SubspaceSweepResult subspace_sweep(const model::Classifier& c, const dataset::LabeledDataset& test,
                                   const Matrix& v_cols, const std::vector<int>& ns,
                                   const std::vector<double>& scales, int trials, uint64_t seed,
                                   int threads = 1);

struct VectorEvalRow {
  int index = 0;    // singular vector index, 0-based
  double scale = 0.0;
  double fr = 0.0;
  double freq_dom1 = 0.0;   // share of misclassified inputs landing in dom1
  double freq_dom2 = 0.0;
  double freq_others = 0.0;
  int misclassified = 0;
};

struct SingularVectorEval {
  std::vector<VectorEvalRow> rows;
  int dom1 = -1;  // the two classes most often produced, or a pinned pair
  int dom2 = -1;
};

/// Applies each of the first `count` singular vectors at every scale in MFCC
/// space and attributes the misclassifications to the two dominant classes
/// vs the rest. When `pinned_pair` is empty the pair is the two classes with
/// the highest total misclassification counts across the evaluation.
SingularVectorEval singular_vector_eval(const model::Classifier& c,
                                        const dataset::LabeledDataset& test, const Matrix& v_cols,
                                        int count, const std::vector<double>& scales,
                                        std::optional<std::pair<int, int>> pinned_pair = std::nullopt,
                                        int threads = 1);

/// Classifies `n_samples` waveforms drawn uniformly from [-1,1]^dim and
/// returns per-class counts.
std::vector<long long> volume_probe(const model::Classifier& c, long long n_samples, uint64_t seed,
                                    int threads = 1);

}  // namespace uaplab::svdlab

#endif  // UAPLAB_SVDLAB_HPP
