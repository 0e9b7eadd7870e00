#include "uaplab/grad_model.hpp"

#include <algorithm>
#include <cmath>

namespace uaplab {

int argmax_lowest(const std::vector<double>& v) {
  int best = 0;
  for (int i = 1; i < static_cast<int>(v.size()); ++i)
    if (v[static_cast<size_t>(i)] > v[static_cast<size_t>(best)]) best = i;
  return best;
}

std::vector<double> softmax(const std::vector<double>& logits) {
  std::vector<double> p(logits.size());
  const double mx = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(logits[i] - mx);
    sum += p[i];
  }
  for (auto& x : p) x /= sum;
  return p;
}

int GradientModel::predict(const std::vector<double>& x) const { return argmax_lowest(logits(x)); }

namespace {

class NaiveSetEvaluator : public SetEvaluator {
 public:
  NaiveSetEvaluator(const GradientModel& m, const std::vector<std::vector<double>>& inputs)
      : model_(m), inputs_(inputs) {}

  int size() const override { return static_cast<int>(inputs_.size()); }

  std::vector<int> predict_perturbed(const std::vector<double>& v) const override {
    std::vector<int> preds(inputs_.size());
    std::vector<double> x(v.size());
    for (size_t i = 0; i < inputs_.size(); ++i) {
      for (size_t t = 0; t < v.size(); ++t) x[t] = inputs_[i][t] + v[t];
      preds[i] = model_.predict(x);
    }
    return preds;
  }

 private:
  const GradientModel& model_;
  std::vector<std::vector<double>> inputs_;
};

}  // namespace

std::unique_ptr<SetEvaluator> GradientModel::make_set_evaluator(
    const std::vector<std::vector<double>>& inputs, int /*threads*/) const {
  return std::make_unique<NaiveSetEvaluator>(*this, inputs);
}

}  // namespace uaplab
