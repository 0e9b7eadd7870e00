#ifndef UAPLAB_GRAD_MODEL_HPP
#define UAPLAB_GRAD_MODEL_HPP

#include <memory>
#include <vector>

namespace uaplab {

/// Predictions of f(x_i + v) over a fixed input set, for a candidate
/// perturbation v. Implementations may precompute whatever the input set
/// allows (the CNN classifier caches frame spectra so only the back half of
/// the pipeline reruns per candidate).
class SetEvaluator {
 public:
  virtual ~SetEvaluator() = default;
  virtual int size() const = 0;
  virtual std::vector<int> predict_perturbed(const std::vector<double>& v) const = 0;
};

/// Minimal differentiable-classifier surface used by the attack algorithms.
/// Inputs are flat vectors in the attack domain (waveforms for the audio
/// model; plain feature vectors for toy models in tests).
class GradientModel {
 public:
  virtual ~GradientModel() = default;

  virtual int class_count() const = 0;
  virtual int input_dim() const = 0;

  virtual std::vector<double> logits(const std::vector<double>& x) const = 0;
  virtual std::vector<double> probs(const std::vector<double>& x) const = 0;
  /// argmax of logits; ties break to the lowest class index.
  virtual int predict(const std::vector<double>& x) const;

  /// Gradient of (logit_j - logit_i) with respect to x.
  virtual std::vector<double> grad_logit_diff(const std::vector<double>& x, int j, int i) const = 0;
  /// Gradient of the softmax confidence of class t with respect to x.
  virtual std::vector<double> grad_prob(const std::vector<double>& x, int t) const = 0;

  virtual std::unique_ptr<SetEvaluator> make_set_evaluator(
      const std::vector<std::vector<double>>& inputs, int threads) const;
};

int argmax_lowest(const std::vector<double>& v);
std::vector<double> softmax(const std::vector<double>& logits);

}  // namespace uaplab

#endif  // UAPLAB_GRAD_MODEL_HPP
