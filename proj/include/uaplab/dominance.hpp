#ifndef UAPLAB_DOMINANCE_HPP
#define UAPLAB_DOMINANCE_HPP

#include <optional>
#include <set>
#include <utility>
#include <vector>

#include "uaplab/dataset.hpp"
#include "uaplab/model.hpp"
#include "uaplab/numeric.hpp"

namespace uaplab::dominance {

using numeric::Matrix;

/// Per-input predictions before and after applying one perturbation.
/// All dominance statistics are pure counting over a snapshot.
struct Snapshot {
  std::vector<int> labels;
  std::vector<int> pre;
  std::vector<int> post;
  int k = 0;
};

Snapshot snapshot(const model::Classifier& c, const dataset::LabeledDataset& ds,
                  const std::vector<double>& v, int threads = 1);

enum class MisclassMode {
  /// Normalize over the misclassified inputs (matches the reported figures).
  MisclassifiedNormalized,
  /// Condition per class: among inputs not already predicted as j, the
  /// fraction pushed into j.
  PerClassConditional,
};

/// Probability of landing in each class when the perturbation causes a
/// misclassification. Zero vector when nothing is misclassified. Throws
/// EmptyEvaluationSet when no inputs survive the initially-correct filter.
std::vector<double> misclass_distribution(const Snapshot& s,
                                          MisclassMode mode = MisclassMode::MisclassifiedNormalized,
                                          bool initially_correct_only = true);

struct TransitionMatrix {
  Matrix t;                  // k x k; row i conditions on pre-attack class i
  std::vector<int> support;  // inputs per row; zero-support rows are all-zero
};

TransitionMatrix transition_matrix(const Snapshot& s, bool initially_correct_only = true);

struct Thresholds {
  double alpha = 1.0 / 3.0;
  double beta = 1.0 / 3.0;
  double zeta = 1.0 / 3.0;
};

struct DominanceReport {
  std::vector<double> p;
  TransitionMatrix t;
  std::vector<std::pair<int, int>> attractor_pairs;  // (source class, attractor)
  std::vector<int> dominant_by_mass;
  std::vector<int> dominant_by_attraction;
  Thresholds thresholds;
  double fr_all = 0.0;
  double fr_excl_dominant = 0.0;
  double fr_excl_dominant_silence = 0.0;
  int eligible = 0;             // inputs after the initially-correct filter
  int out_of_range_inputs = 0;  // perturbed inputs with samples outside [-1,1]
};

/// Attractor pairs and dominant sets from (p, t) at the given thresholds.
/// Every threshold must exceed 1/(k-1); throws ThresholdTooLow otherwise.
DominanceReport detect(const std::vector<double>& p, const TransitionMatrix& t,
                       const Thresholds& th);

/// Fraction of eligible inputs whose prediction changes; inputs whose
/// ground-truth class is excluded are dropped first. Throws
/// EmptyAfterExclusion.
double fooling_rate(const Snapshot& s, const std::set<int>& excluded,
                    bool initially_correct_only = true);

/// Per ground-truth class fooling rates (rows of the reported figures).
std::vector<double> per_class_fooling_rate(const Snapshot& s, bool initially_correct_only = true);

struct Factors {
  double fooling_rate = 0.0;     // prediction-change probability
  double dominant_share = 0.0;   // P[f(x+v) = y_b] over the whole set
  double self_confidence = 0.0;  // f_b(v), the perturbation classified alone
  int dominant_class = -1;
};

/// The three correlated quantities tracked during perturbation optimization.
/// y_b defaults to the class the model assigns to v itself.
Factors factors(const model::Classifier& c, const dataset::LabeledDataset& ds,
                const std::vector<double>& v, std::optional<int> y_b = std::nullopt,
                int threads = 1);

/// Sample Pearson correlation coefficient. Throws ZeroVariance.
double pearson(const std::vector<double>& a, const std::vector<double>& b);

/// Full report: distributions, detection at the thresholds, and the three
/// fooling-rate variants (all inputs / excluding dominant-by-mass classes /
/// excluding those plus the silence class).
DominanceReport make_report(const Snapshot& s, const Thresholds& th, int silence_class);

/// Inputs whose perturbed samples leave [-1,1]. Perturbed signals are never
/// clipped; exceedances are surfaced in reports instead.
int count_out_of_range(const dataset::LabeledDataset& ds, const std::vector<double>& v);

}  // namespace uaplab::dominance

#endif  // UAPLAB_DOMINANCE_HPP
