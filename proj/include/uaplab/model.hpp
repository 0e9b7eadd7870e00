#ifndef UAPLAB_MODEL_HPP
#define UAPLAB_MODEL_HPP

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "uaplab/dataset.hpp"
#include "uaplab/grad_model.hpp"
#include "uaplab/numeric.hpp"
#include "uaplab/signal.hpp"

namespace uaplab::model {

using numeric::Matrix;

struct ConvSpec {
  int out_channels = 0;
  int kernel_h = 0;  // along frames
  int kernel_w = 0;  // along coefficients
  int stride = 0;

  bool operator==(const ConvSpec&) const = default;
};

struct ArchConfig {
  std::vector<ConvSpec> convs;
  int classes = 0;

  bool operator==(const ArchConfig&) const = default;

  /// Two small conv stages sized for the desk pipeline.
  static ArchConfig desk_default(int classes);
};

struct TrainConfig {
  int epochs = 30;
  int batch_size = 32;
  double learning_rate = 0.02;
  double momentum = 0.9;
  uint64_t seed = 11;

  bool operator==(const TrainConfig&) const = default;
};

struct AccuracyReport {
  std::vector<int> per_class_correct;
  std::vector<int> per_class_total;
  double mean_per_class = 0.0;
  double overall = 0.0;
};

/// Convolutional softmax classifier over MFCC features, with exact input
/// gradients chained through the signal pipeline. forward/predict/gradient
/// calls are const and safe to run concurrently; train() mutates.
class Classifier : public GradientModel {
 public:
  Classifier(const ArchConfig& arch, const signal::PipelineConfig& pipeline, uint64_t seed);

  const signal::Pipeline& pipeline() const { return *pipe_; }
  const ArchConfig& arch() const { return arch_; }

  // --- feature-space interface ---
  std::vector<double> logits_from_features(const Matrix& feats) const;
  std::vector<double> probs_from_features(const Matrix& feats) const;
  int predict_from_features(const Matrix& feats) const;
  /// Gradient over the feature tensor of (logit_j - logit_i) or of the
  /// softmax confidence of class t.
  Matrix feature_grad_logit_diff(const Matrix& feats, int j, int i) const;
  Matrix feature_grad_prob(const Matrix& feats, int t) const;

  // --- waveform-space interface (GradientModel) ---
  int class_count() const override { return arch_.classes; }
  int input_dim() const override { return pipe_->cfg().input_len; }
  std::vector<double> logits(const std::vector<double>& wave) const override;
  std::vector<double> probs(const std::vector<double>& wave) const override;
  std::vector<double> grad_logit_diff(const std::vector<double>& wave, int j, int i) const override;
  std::vector<double> grad_prob(const std::vector<double>& wave, int t) const override;
  std::unique_ptr<SetEvaluator> make_set_evaluator(const std::vector<std::vector<double>>& inputs,
                                                   int threads) const override;

  int predict_wave(const signal::Waveform& w) const;

  /// Minibatch SGD with momentum on mean cross-entropy. Deterministic per
  /// seed; parameters are rounded to float32 on completion so an in-memory
  /// model and its checkpoint behave identically.
  std::vector<double> train(const dataset::LabeledDataset& ds, const TrainConfig& tc);

  AccuracyReport accuracy(const dataset::LabeledDataset& ds, int threads = 1) const;

  void save(const std::string& path) const;
  static Classifier load(const std::string& path);

  std::vector<double> flat_parameters() const;

 private:
  struct ConvLayer {
    ConvSpec spec;
    int in_channels = 0;
    int in_h = 0, in_w = 0;
    int out_h = 0, out_w = 0;
    std::vector<double> kernels;  // [out][in][kh][kw]
    std::vector<double> bias;     // [out]
  };

  struct ForwardTrace;  // activations for backprop
  struct ParamGrads;    // accumulated parameter gradients

  void build_layers();
  void init_params(uint64_t seed);
  void forward_trace(const Matrix& feats, ForwardTrace& tr) const;
  /// Reverse pass from dlogits; fills dfeats and/or accumulates grads.
  void backprop(const ForwardTrace& tr, const std::vector<double>& dlogits, Matrix* dfeats,
                ParamGrads* grads) const;
  void round_params_to_f32();

  std::shared_ptr<const signal::Pipeline> pipe_;
  ArchConfig arch_;
  std::vector<ConvLayer> convs_;
  Matrix dense_w_;  // classes x flattened conv output
  std::vector<double> dense_b_;
  uint64_t seed_ = 0;

  friend class WaveSetEvaluator;
};

}  // namespace uaplab::model

#endif  // UAPLAB_MODEL_HPP
