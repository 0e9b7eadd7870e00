#include "uaplab/model.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include "uaplab/errors.hpp"

namespace uaplab::model {

ArchConfig ArchConfig::desk_default(int classes) {
  ArchConfig a;
  a.convs = {{8, 8, 4, 2}, {16, 4, 2, 2}};
  a.classes = classes;
  return a;
}

struct Classifier::ForwardTrace {
  // Per conv layer: input tensor and pre-activation output.
  std::vector<std::vector<double>> inputs;
  std::vector<std::vector<double>> preact;
  std::vector<double> flat;  // post-ReLU output of the last conv, flattened
  std::vector<double> logits;
};

struct Classifier::ParamGrads {
  std::vector<std::vector<double>> conv_kernels;
  std::vector<std::vector<double>> conv_bias;
  numeric::Matrix dense_w;
  std::vector<double> dense_b;

  void init_like(const Classifier& c) {
    conv_kernels.resize(c.convs_.size());
    conv_bias.resize(c.convs_.size());
    for (size_t i = 0; i < c.convs_.size(); ++i) {
      conv_kernels[i].assign(c.convs_[i].kernels.size(), 0.0);
      conv_bias[i].assign(c.convs_[i].bias.size(), 0.0);
    }
    dense_w = numeric::Matrix(c.dense_w_.rows, c.dense_w_.cols);
    dense_b.assign(c.dense_b_.size(), 0.0);
  }
};

Classifier::Classifier(const ArchConfig& arch, const signal::PipelineConfig& pipeline, uint64_t seed)
    : pipe_(std::make_shared<const signal::Pipeline>(pipeline)), arch_(arch), seed_(seed) {
  if (arch_.classes < 2) throw InvalidArch("classifier: need at least 2 classes");
  if (arch_.convs.empty()) throw InvalidArch("classifier: need at least one conv layer");
  build_layers();
  init_params(seed);
}

void Classifier::build_layers() {
  int in_ch = 1;
  int in_h = pipe_->cfg().n_frames();
  int in_w = pipe_->cfg().n_mfcc;
  convs_.clear();
  for (const ConvSpec& spec : arch_.convs) {
    if (spec.out_channels < 1 || spec.kernel_h < 1 || spec.kernel_w < 1 || spec.stride < 1)
      throw InvalidArch("classifier: bad conv spec");
    if (in_h < spec.kernel_h || in_w < spec.kernel_w)
      throw InvalidArch("classifier: conv kernel larger than its input");
    ConvLayer layer;
    layer.spec = spec;
    layer.in_channels = in_ch;
    layer.in_h = in_h;
    layer.in_w = in_w;
    layer.out_h = (in_h - spec.kernel_h) / spec.stride + 1;
    layer.out_w = (in_w - spec.kernel_w) / spec.stride + 1;
    layer.kernels.assign(
        static_cast<size_t>(spec.out_channels) * in_ch * spec.kernel_h * spec.kernel_w, 0.0);
    layer.bias.assign(static_cast<size_t>(spec.out_channels), 0.0);
    convs_.push_back(std::move(layer));
    in_ch = spec.out_channels;
    in_h = convs_.back().out_h;
    in_w = convs_.back().out_w;
  }
  const int flat = in_ch * in_h * in_w;
  dense_w_ = Matrix(arch_.classes, flat);
  dense_b_.assign(static_cast<size_t>(arch_.classes), 0.0);
}

void Classifier::init_params(uint64_t seed) {
  numeric::Rng root(seed);
  for (size_t li = 0; li < convs_.size(); ++li) {
    ConvLayer& layer = convs_[li];
    const int fan_in = layer.in_channels * layer.spec.kernel_h * layer.spec.kernel_w;
    const double bound = std::sqrt(1.0 / fan_in);
    numeric::Rng rng = root.fork(li);
    for (auto& k : layer.kernels) k = rng.uniform(-bound, bound);
    for (auto& b : layer.bias) b = 0.0;
  }
  const double bound = std::sqrt(1.0 / dense_w_.cols);
  numeric::Rng rng = root.fork(1000);
  for (auto& w : dense_w_.data) w = rng.uniform(-bound, bound);
  for (auto& b : dense_b_) b = 0.0;
}

namespace {

inline size_t tidx(int c, int y, int x, int h, int w) {
  return (static_cast<size_t>(c) * h + y) * w + x;
}

}  // namespace

void Classifier::forward_trace(const Matrix& feats, ForwardTrace& tr) const {
  if (feats.rows != pipe_->cfg().n_frames() || feats.cols != pipe_->cfg().n_mfcc)
    throw ShapeMismatch("classifier: feature shape mismatch");

  tr.inputs.resize(convs_.size());
  tr.preact.resize(convs_.size());

  std::vector<double> cur = feats.data;  // 1 x H x W
  for (size_t li = 0; li < convs_.size(); ++li) {
    const ConvLayer& L = convs_[li];
    tr.inputs[li] = cur;
    std::vector<double> out(static_cast<size_t>(L.spec.out_channels) * L.out_h * L.out_w);
    const int kh = L.spec.kernel_h, kw = L.spec.kernel_w, s = L.spec.stride;
    for (int o = 0; o < L.spec.out_channels; ++o) {
      for (int oy = 0; oy < L.out_h; ++oy) {
        for (int ox = 0; ox < L.out_w; ++ox) {
          double acc = L.bias[static_cast<size_t>(o)];
          for (int ci = 0; ci < L.in_channels; ++ci) {
            const size_t kbase = (static_cast<size_t>(o) * L.in_channels + ci) * kh * kw;
            for (int ky = 0; ky < kh; ++ky) {
              const size_t in_row = tidx(ci, oy * s + ky, ox * s, L.in_h, L.in_w);
              const size_t k_row = kbase + static_cast<size_t>(ky) * kw;
              for (int kx = 0; kx < kw; ++kx) acc += cur[in_row + kx] * L.kernels[k_row + kx];
            }
          }
          out[tidx(o, oy, ox, L.out_h, L.out_w)] = acc;
        }
      }
    }
    tr.preact[li] = out;
    for (auto& v : out) v = v > 0.0 ? v : 0.0;  // ReLU
    cur = std::move(out);
  }
  tr.flat = std::move(cur);

  tr.logits.assign(static_cast<size_t>(arch_.classes), 0.0);
  for (int c = 0; c < arch_.classes; ++c) {
    const double* w = dense_w_.row(c);
    double acc = dense_b_[static_cast<size_t>(c)];
    for (size_t i = 0; i < tr.flat.size(); ++i) acc += w[i] * tr.flat[i];
    tr.logits[static_cast<size_t>(c)] = acc;
  }
}

void Classifier::backprop(const ForwardTrace& tr, const std::vector<double>& dlogits, Matrix* dfeats,
                          ParamGrads* grads) const {
  // Dense stage.
  std::vector<double> dcur(tr.flat.size(), 0.0);
  for (int c = 0; c < arch_.classes; ++c) {
    const double g = dlogits[static_cast<size_t>(c)];
    if (g == 0.0) continue;
    const double* w = dense_w_.row(c);
    for (size_t i = 0; i < dcur.size(); ++i) dcur[i] += g * w[i];
  }
  if (grads != nullptr) {
    for (int c = 0; c < arch_.classes; ++c) {
      const double g = dlogits[static_cast<size_t>(c)];
      grads->dense_b[static_cast<size_t>(c)] += g;
      if (g == 0.0) continue;
      double* gw = grads->dense_w.row(c);
      for (size_t i = 0; i < tr.flat.size(); ++i) gw[i] += g * tr.flat[i];
    }
  }

  // Conv stages in reverse.
  for (int li = static_cast<int>(convs_.size()) - 1; li >= 0; --li) {
    const ConvLayer& L = convs_[static_cast<size_t>(li)];
    const std::vector<double>& pre = tr.preact[static_cast<size_t>(li)];
    const std::vector<double>& in = tr.inputs[static_cast<size_t>(li)];
    for (size_t i = 0; i < dcur.size(); ++i)
      if (pre[i] <= 0.0) dcur[i] = 0.0;  // ReLU mask

    std::vector<double> din(in.size(), 0.0);
    const int kh = L.spec.kernel_h, kw = L.spec.kernel_w, s = L.spec.stride;
    for (int o = 0; o < L.spec.out_channels; ++o) {
      for (int oy = 0; oy < L.out_h; ++oy) {
        for (int ox = 0; ox < L.out_w; ++ox) {
          const double g = dcur[tidx(o, oy, ox, L.out_h, L.out_w)];
          if (g == 0.0) continue;
          if (grads != nullptr) grads->conv_bias[static_cast<size_t>(li)][static_cast<size_t>(o)] += g;
          for (int ci = 0; ci < L.in_channels; ++ci) {
            const size_t kbase = (static_cast<size_t>(o) * L.in_channels + ci) * kh * kw;
            for (int ky = 0; ky < kh; ++ky) {
              const size_t in_row = tidx(ci, oy * s + ky, ox * s, L.in_h, L.in_w);
              const size_t k_row = kbase + static_cast<size_t>(ky) * kw;
              for (int kx = 0; kx < kw; ++kx) {
                din[in_row + kx] += g * L.kernels[k_row + kx];
                if (grads != nullptr)
                  grads->conv_kernels[static_cast<size_t>(li)][k_row + kx] += g * in[in_row + kx];
              }
            }
          }
        }
      }
    }
    dcur = std::move(din);
  }

  if (dfeats != nullptr) {
    *dfeats = Matrix(pipe_->cfg().n_frames(), pipe_->cfg().n_mfcc);
    dfeats->data = dcur;
  }
}

std::vector<double> Classifier::logits_from_features(const Matrix& feats) const {
  ForwardTrace tr;
  forward_trace(feats, tr);
  return tr.logits;
}

std::vector<double> Classifier::probs_from_features(const Matrix& feats) const {
  return softmax(logits_from_features(feats));
}

int Classifier::predict_from_features(const Matrix& feats) const {
  return argmax_lowest(logits_from_features(feats));
}

Matrix Classifier::feature_grad_logit_diff(const Matrix& feats, int j, int i) const {
  std::vector<double> dlogits(static_cast<size_t>(arch_.classes), 0.0);
  dlogits[static_cast<size_t>(j)] += 1.0;
  dlogits[static_cast<size_t>(i)] -= 1.0;
  ForwardTrace tr;
  forward_trace(feats, tr);
  Matrix out;
  backprop(tr, dlogits, &out, nullptr);
  return out;
}

Matrix Classifier::feature_grad_prob(const Matrix& feats, int t) const {
  ForwardTrace tr;
  forward_trace(feats, tr);
  const std::vector<double> p = softmax(tr.logits);
  std::vector<double> dlogits(static_cast<size_t>(arch_.classes));
  for (int c = 0; c < arch_.classes; ++c)
    dlogits[static_cast<size_t>(c)] =
        p[static_cast<size_t>(t)] * ((c == t ? 1.0 : 0.0) - p[static_cast<size_t>(c)]);
  Matrix out;
  backprop(tr, dlogits, &out, nullptr);
  return out;
}

std::vector<double> Classifier::logits(const std::vector<double>& wave) const {
  signal::Waveform w{wave, pipe_->cfg().sample_rate_hz};
  return logits_from_features(pipe_->transform(w, signal::Repr::Mfcc));
}

std::vector<double> Classifier::probs(const std::vector<double>& wave) const {
  return softmax(logits(wave));
}

std::vector<double> Classifier::grad_logit_diff(const std::vector<double>& wave, int j, int i) const {
  signal::Waveform w{wave, pipe_->cfg().sample_rate_hz};
  const Matrix feats = pipe_->transform(w, signal::Repr::Mfcc);
  const Matrix dfeats = feature_grad_logit_diff(feats, j, i);
  return pipe_->transform_vjp(w, signal::Repr::Mfcc, dfeats);
}

std::vector<double> Classifier::grad_prob(const std::vector<double>& wave, int t) const {
  signal::Waveform w{wave, pipe_->cfg().sample_rate_hz};
  const Matrix feats = pipe_->transform(w, signal::Repr::Mfcc);
  const Matrix dfeats = feature_grad_prob(feats, t);
  return pipe_->transform_vjp(w, signal::Repr::Mfcc, dfeats);
}

int Classifier::predict_wave(const signal::Waveform& w) const {
  return predict_from_features(pipe_->transform(w, signal::Repr::Mfcc));
}

void Classifier::round_params_to_f32() {
  auto snap = [](double& x) { x = static_cast<double>(static_cast<float>(x)); };
  for (auto& L : convs_) {
    for (auto& k : L.kernels) snap(k);
    for (auto& b : L.bias) snap(b);
  }
  for (auto& w : dense_w_.data) snap(w);
  for (auto& b : dense_b_) snap(b);
}

std::vector<double> Classifier::train(const dataset::LabeledDataset& ds, const TrainConfig& tc) {
  if (tc.learning_rate <= 0.0) throw InvalidConfig("train: learning_rate must be positive");
  if (tc.batch_size < 1) throw InvalidConfig("train: batch_size must be >= 1");
  for (int label : ds.labels)
    if (label < 0 || label >= arch_.classes) throw InvalidConfig("train: label out of range");
  std::vector<double> history;
  if (tc.epochs <= 0) return history;

  // Features are fixed preprocessing for training; compute them once.
  std::vector<Matrix> feats(ds.size());
  for (size_t i = 0; i < ds.size(); ++i) feats[i] = pipe_->transform(ds.waves[i], signal::Repr::Mfcc);

  ParamGrads grads, velocity;
  grads.init_like(*this);
  velocity.init_like(*this);

  numeric::Rng root(tc.seed);
  std::vector<int> order(ds.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);

  const int n = static_cast<int>(ds.size());
  for (int epoch = 0; epoch < tc.epochs; ++epoch) {
    numeric::Rng rng = root.fork(static_cast<uint64_t>(epoch));
    for (int i = n - 1; i > 0; --i) {
      const int j = static_cast<int>(rng.next_u64() % static_cast<uint64_t>(i + 1));
      std::swap(order[static_cast<size_t>(i)], order[static_cast<size_t>(j)]);
    }

    double epoch_loss = 0.0;
    for (int start = 0; start < n; start += tc.batch_size) {
      const int end = std::min(start + tc.batch_size, n);
      const double inv_batch = 1.0 / (end - start);

      for (auto& g : grads.conv_kernels) std::fill(g.begin(), g.end(), 0.0);
      for (auto& g : grads.conv_bias) std::fill(g.begin(), g.end(), 0.0);
      std::fill(grads.dense_w.data.begin(), grads.dense_w.data.end(), 0.0);
      std::fill(grads.dense_b.begin(), grads.dense_b.end(), 0.0);

      for (int bi = start; bi < end; ++bi) {
        const int idx = order[static_cast<size_t>(bi)];
        ForwardTrace tr;
        forward_trace(feats[static_cast<size_t>(idx)], tr);
        std::vector<double> p = softmax(tr.logits);
        const int label = ds.labels[static_cast<size_t>(idx)];
        epoch_loss += -std::log(std::max(p[static_cast<size_t>(label)], 1e-300));
        // d(mean CE)/dlogits for one sample: (p - onehot) / batch
        for (auto& x : p) x *= inv_batch;
        p[static_cast<size_t>(label)] -= inv_batch;
        backprop(tr, p, nullptr, &grads);
      }

      auto sgd = [&](std::vector<double>& param, std::vector<double>& vel,
                     const std::vector<double>& grad) {
        for (size_t i = 0; i < param.size(); ++i) {
          vel[i] = tc.momentum * vel[i] - tc.learning_rate * grad[i];
          param[i] += vel[i];
        }
      };
      for (size_t li = 0; li < convs_.size(); ++li) {
        sgd(convs_[li].kernels, velocity.conv_kernels[li], grads.conv_kernels[li]);
        sgd(convs_[li].bias, velocity.conv_bias[li], grads.conv_bias[li]);
      }
      sgd(dense_w_.data, velocity.dense_w.data, grads.dense_w.data);
      sgd(dense_b_, velocity.dense_b, grads.dense_b);
    }
    history.push_back(epoch_loss / n);
  }

  // Parameters live as float32 in checkpoints; round now so the in-memory
  // model and a reloaded checkpoint are bit-identical.
  round_params_to_f32();
  return history;
}

AccuracyReport Classifier::accuracy(const dataset::LabeledDataset& ds, int threads) const {
  if (ds.size() == 0) throw EmptyEvaluationSet("accuracy: empty dataset");
  const int k = arch_.classes;
  std::vector<int> preds(ds.size());
  numeric::parallel_for(static_cast<int>(ds.size()), threads,
                        [&](int i) { preds[static_cast<size_t>(i)] = predict_wave(ds.waves[static_cast<size_t>(i)]); });

  AccuracyReport rep;
  rep.per_class_correct.assign(static_cast<size_t>(k), 0);
  rep.per_class_total.assign(static_cast<size_t>(k), 0);
  int correct = 0;
  for (size_t i = 0; i < ds.size(); ++i) {
    const int label = ds.labels[i];
    rep.per_class_total[static_cast<size_t>(label)]++;
    if (preds[i] == label) {
      rep.per_class_correct[static_cast<size_t>(label)]++;
      correct++;
    }
  }
  double mean = 0.0;
  int supported = 0;
  for (int c = 0; c < k; ++c) {
    if (rep.per_class_total[static_cast<size_t>(c)] > 0) {
      mean += static_cast<double>(rep.per_class_correct[static_cast<size_t>(c)]) /
              rep.per_class_total[static_cast<size_t>(c)];
      supported++;
    }
  }
  rep.mean_per_class = supported > 0 ? mean / supported : 0.0;
  rep.overall = static_cast<double>(correct) / static_cast<double>(ds.size());
  return rep;
}

std::vector<double> Classifier::flat_parameters() const {
  std::vector<double> out;
  for (const auto& L : convs_) {
    out.insert(out.end(), L.kernels.begin(), L.kernels.end());
    out.insert(out.end(), L.bias.begin(), L.bias.end());
  }
  out.insert(out.end(), dense_w_.data.begin(), dense_w_.data.end());
  out.insert(out.end(), dense_b_.begin(), dense_b_.end());
  return out;
}

namespace {

constexpr char kMagic[8] = {'U', 'A', 'P', 'L', 'C', 'K', 'P', '1'};

void write_u32(std::ostream& out, uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

void write_u64(std::ostream& out, uint64_t v) {
  write_u32(out, static_cast<uint32_t>(v));
  write_u32(out, static_cast<uint32_t>(v >> 32));
}

void write_f64(std::ostream& out, double v) {
  uint64_t bits;
  std::memcpy(&bits, &v, 8);
  write_u64(out, bits);
}

void write_f32(std::ostream& out, float v) {
  uint32_t bits;
  std::memcpy(&bits, &v, 4);
  write_u32(out, bits);
}

uint32_t read_u32(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (!in) throw IoError("checkpoint: truncated");
  return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
         (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
}

uint64_t read_u64(std::istream& in) {
  const uint64_t lo = read_u32(in);
  const uint64_t hi = read_u32(in);
  return lo | (hi << 32);
}

double read_f64(std::istream& in) {
  const uint64_t bits = read_u64(in);
  double v;
  std::memcpy(&v, &bits, 8);
  return v;
}

float read_f32(std::istream& in) {
  const uint32_t bits = read_u32(in);
  float v;
  std::memcpy(&v, &bits, 4);
  return v;
}

void write_param_block(std::ostream& out, const std::vector<double>& params) {
  write_u32(out, static_cast<uint32_t>(params.size()));
  for (double p : params) write_f32(out, static_cast<float>(p));
}

void read_param_block(std::istream& in, std::vector<double>& params) {
  const uint32_t n = read_u32(in);
  if (n != params.size()) throw IoError("checkpoint: parameter block size mismatch");
  for (auto& p : params) p = static_cast<double>(read_f32(in));
}

}  // namespace

void Classifier::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("checkpoint: cannot open " + path + " for writing");
  out.write(kMagic, 8);
  write_u32(out, 1);  // version

  const signal::PipelineConfig& p = pipe_->cfg();
  write_u32(out, static_cast<uint32_t>(p.sample_rate_hz));
  write_u32(out, static_cast<uint32_t>(p.input_len));
  write_u32(out, static_cast<uint32_t>(p.frame_len));
  write_u32(out, static_cast<uint32_t>(p.hop));
  write_u32(out, static_cast<uint32_t>(p.fft_size));
  write_u32(out, static_cast<uint32_t>(p.retained_bins));
  write_u32(out, static_cast<uint32_t>(p.n_mels));
  write_u32(out, static_cast<uint32_t>(p.n_mfcc));
  write_f64(out, p.log_floor);
  write_u32(out, p.window == signal::WindowKind::Hann ? 0 : 1);

  write_u32(out, static_cast<uint32_t>(arch_.classes));
  write_u32(out, static_cast<uint32_t>(arch_.convs.size()));
  for (const auto& c : arch_.convs) {
    write_u32(out, static_cast<uint32_t>(c.out_channels));
    write_u32(out, static_cast<uint32_t>(c.kernel_h));
    write_u32(out, static_cast<uint32_t>(c.kernel_w));
    write_u32(out, static_cast<uint32_t>(c.stride));
  }
  write_u64(out, seed_);

  for (const auto& L : convs_) {
    write_param_block(out, L.kernels);
    write_param_block(out, L.bias);
  }
  write_param_block(out, dense_w_.data);
  write_param_block(out, dense_b_);
  if (!out) throw IoError("checkpoint: write failed for " + path);
}

Classifier Classifier::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("checkpoint: cannot open " + path);
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kMagic, 8) != 0) throw IoError("checkpoint: bad magic in " + path);
  const uint32_t version = read_u32(in);
  if (version != 1) throw IoError("checkpoint: unsupported version " + std::to_string(version));

  signal::PipelineConfig p;
  p.sample_rate_hz = static_cast<int>(read_u32(in));
  p.input_len = static_cast<int>(read_u32(in));
  p.frame_len = static_cast<int>(read_u32(in));
  p.hop = static_cast<int>(read_u32(in));
  p.fft_size = static_cast<int>(read_u32(in));
  p.retained_bins = static_cast<int>(read_u32(in));
  p.n_mels = static_cast<int>(read_u32(in));
  p.n_mfcc = static_cast<int>(read_u32(in));
  p.log_floor = read_f64(in);
  p.window = read_u32(in) == 0 ? signal::WindowKind::Hann : signal::WindowKind::Rectangular;

  ArchConfig arch;
  arch.classes = static_cast<int>(read_u32(in));
  const uint32_t n_convs = read_u32(in);
  for (uint32_t i = 0; i < n_convs; ++i) {
    ConvSpec c;
    c.out_channels = static_cast<int>(read_u32(in));
    c.kernel_h = static_cast<int>(read_u32(in));
    c.kernel_w = static_cast<int>(read_u32(in));
    c.stride = static_cast<int>(read_u32(in));
    arch.convs.push_back(c);
  }
  const uint64_t seed = read_u64(in);

  Classifier c(arch, p, seed);
  for (auto& L : c.convs_) {
    read_param_block(in, L.kernels);
    read_param_block(in, L.bias);
  }
  read_param_block(in, c.dense_w_.data);
  read_param_block(in, c.dense_b_);
  if (!in) throw IoError("checkpoint: truncated " + path);
  return c;
}

namespace {

/// Caches per-input frame spectra; a candidate perturbation costs one
/// front-end pass for itself plus the mel/DCT/conv stages per input.
class WaveSetEvaluator : public SetEvaluator {
 public:
  WaveSetEvaluator(const Classifier& model, const std::vector<std::vector<double>>& inputs,
                   int threads)
      : model_(model), threads_(std::max(threads, 1)) {
    const auto& pipe = model_.pipeline();
    spectra_.resize(inputs.size());
    std::vector<const std::vector<double>*> ptrs(inputs.size());
    for (size_t i = 0; i < inputs.size(); ++i) ptrs[i] = &inputs[i];
    numeric::parallel_for(static_cast<int>(inputs.size()), threads_, [&](int i) {
      signal::Waveform w{*ptrs[static_cast<size_t>(i)], pipe.cfg().sample_rate_hz};
      spectra_[static_cast<size_t>(i)] = pipe.frame_spectra(w);
    });
  }

  int size() const override { return static_cast<int>(spectra_.size()); }

  std::vector<int> predict_perturbed(const std::vector<double>& v) const override {
    const auto& pipe = model_.pipeline();
    signal::Waveform pw{v, pipe.cfg().sample_rate_hz};
    const signal::FrameSpectra vs = pipe.frame_spectra(pw);
    std::vector<int> preds(spectra_.size());
    numeric::parallel_for(static_cast<int>(spectra_.size()), threads_, [&](int i) {
      const signal::FrameSpectra& xs = spectra_[static_cast<size_t>(i)];
      signal::FrameSpectra sum{xs.re, xs.im};
      for (size_t t = 0; t < sum.re.data.size(); ++t) {
        sum.re.data[t] += vs.re.data[t];
        sum.im.data[t] += vs.im.data[t];
      }
      const numeric::Matrix feats = pipe.features_from_spectra(sum, signal::Repr::Mfcc);
      preds[static_cast<size_t>(i)] = model_.predict_from_features(feats);
    });
    return preds;
  }

 private:
  Classifier model_;
  int threads_;
  std::vector<signal::FrameSpectra> spectra_;
};

}  // namespace

std::unique_ptr<SetEvaluator> Classifier::make_set_evaluator(
    const std::vector<std::vector<double>>& inputs, int threads) const {
  return std::make_unique<WaveSetEvaluator>(*this, inputs, threads);
}

}  // namespace uaplab::model
