#include "uaplab/svdlab.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "uaplab/errors.hpp"

namespace uaplab::svdlab {

std::string matrix_kind_name(MatrixKind k) {
  switch (k) {
    case MatrixKind::DeepFoolV: return "deepfool";
    case MatrixKind::RandomR: return "random";
    case MatrixKind::UniformFeature: return "uniform_feature";
  }
  return "?";
}

namespace {

signal::Repr to_repr(attacks::Domain d) {
  if (d == attacks::Domain::Waveform) throw InvalidConfig("matrix repr: waveform has no transform");
  return d == attacks::Domain::Spectrogram ? signal::Repr::Spectrogram : signal::Repr::Mfcc;
}

}  // namespace

PerturbationMatrix build_matrix(const dataset::LabeledDataset& ds, const model::Classifier& c,
                                MatrixKind kind, attacks::Domain repr, uint64_t seed, int threads) {
  const signal::Pipeline& pipe = c.pipeline();
  const signal::PipelineConfig& cfg = pipe.cfg();
  if (kind == MatrixKind::UniformFeature && repr == attacks::Domain::Waveform)
    throw InvalidConfig("build_matrix: uniform feature noise requires a feature representation");

  PerturbationMatrix out;
  out.kind = kind;
  out.repr = repr;

  const int n = static_cast<int>(ds.size());
  if (n == 0) throw InvalidConfig("build_matrix: empty dataset");
  numeric::Rng root(seed);

  if (kind == MatrixKind::UniformFeature) {
    const int d = cfg.feature_dim(to_repr(repr));
    Matrix rows(n, d);
    numeric::parallel_for(n, threads, [&](int i) {
      numeric::Rng rng = root.fork(static_cast<uint64_t>(i));
      double* row = rows.row(i);
      for (int j = 0; j < d; ++j) row[j] = rng.uniform(-1.0, 1.0);
    });
    out.rows = numeric::normalize_rows(rows);
    return out;
  }

  // Anchored kinds: one waveform perturbation per input, optionally mapped
  // through the transform at its anchor.
  std::vector<std::vector<double>> wave_rows(static_cast<size_t>(n));
  std::vector<char> ok(static_cast<size_t>(n), 1);
  if (kind == MatrixKind::RandomR) {
    numeric::parallel_for(n, threads, [&](int i) {
      const auto p = attacks::random_waveform_perturbation(
          root.fork(static_cast<uint64_t>(i)).origin(), kRandomRowNorm, cfg.input_len);
      wave_rows[static_cast<size_t>(i)] = p.values;
    });
  } else {
    numeric::parallel_for(n, threads, [&](int i) {
      const auto df = attacks::deepfool(ds.waves[static_cast<size_t>(i)].samples, c, {});
      wave_rows[static_cast<size_t>(i)] = df.r.values;
      ok[static_cast<size_t>(i)] = df.converged ? 1 : 0;
    });
  }

  const int d = repr == attacks::Domain::Waveform ? cfg.input_len : cfg.feature_dim(to_repr(repr));
  std::vector<std::vector<double>> feat_rows(static_cast<size_t>(n));
  if (repr == attacks::Domain::Waveform) {
    feat_rows = wave_rows;
  } else {
    const signal::Repr r = to_repr(repr);
    numeric::parallel_for(n, threads, [&](int i) {
      if (!ok[static_cast<size_t>(i)]) return;
      feat_rows[static_cast<size_t>(i)] =
          attacks::feature_perturbation(pipe, ds.waves[static_cast<size_t>(i)],
                                        wave_rows[static_cast<size_t>(i)], r)
              .values;
    });
  }

  std::vector<int> kept;
  for (int i = 0; i < n; ++i) {
    if (ok[static_cast<size_t>(i)])
      kept.push_back(i);
    else
      out.skipped++;
  }
  if (kept.empty()) throw InvalidConfig("build_matrix: every row was skipped");

  Matrix rows(static_cast<int>(kept.size()), d);
  for (size_t r = 0; r < kept.size(); ++r)
    std::copy(feat_rows[static_cast<size_t>(kept[r])].begin(),
              feat_rows[static_cast<size_t>(kept[r])].end(), rows.row(static_cast<int>(r)));
  out.anchors = std::move(kept);
  out.rows = numeric::normalize_rows(rows);
  return out;
}

DecayEntry decay_of(const PerturbationMatrix& m, const std::string& name) {
  DecayEntry e;
  e.name = name;
  e.sigma = numeric::thin_svd(m.rows).sigma;
  e.fit = numeric::fit_exp_decay(e.sigma);
  return e;
}

namespace {

struct FeatureSet {
  std::vector<Matrix> feats;
  std::vector<int> clean_pred;
};

FeatureSet mfcc_features(const model::Classifier& c, const dataset::LabeledDataset& ds,
                         int threads) {
  FeatureSet fs;
  fs.feats.resize(ds.size());
  fs.clean_pred.resize(ds.size());
  numeric::parallel_for(static_cast<int>(ds.size()), threads, [&](int i) {
    fs.feats[static_cast<size_t>(i)] =
        c.pipeline().transform(ds.waves[static_cast<size_t>(i)], signal::Repr::Mfcc);
    fs.clean_pred[static_cast<size_t>(i)] =
        c.predict_from_features(fs.feats[static_cast<size_t>(i)]);
  });
  return fs;
}

// Predictions when `delta` is added to every input's MFCC features.
void eval_feature_delta(const model::Classifier& c, const FeatureSet& fs,
                        const std::vector<double>& delta, int threads, std::vector<int>& preds) {
  preds.resize(fs.feats.size());
  numeric::parallel_for(static_cast<int>(fs.feats.size()), threads, [&](int i) {
    Matrix f = fs.feats[static_cast<size_t>(i)];
    for (size_t t = 0; t < f.data.size(); ++t) f.data[t] += delta[t];
    preds[static_cast<size_t>(i)] = c.predict_from_features(f);
  });
}

}  // namespace

SubspaceSweepResult subspace_sweep(const model::Classifier& c, const dataset::LabeledDataset& test,
                                   const Matrix& v_cols, const std::vector<int>& ns,
                                   const std::vector<double>& scales, int trials, uint64_t seed,
                                   int threads) {
  const int d = c.pipeline().cfg().feature_dim(signal::Repr::Mfcc);
  if (v_cols.rows != d) throw ShapeMismatch("subspace_sweep: V does not match the MFCC dimension");
  for (int n : ns)
    if (n < 1 || n > v_cols.cols) throw InvalidConfig("subspace_sweep: N out of range");
  if (trials < 1) throw InvalidConfig("subspace_sweep: trials must be >= 1");

  const FeatureSet fs = mfcc_features(c, test, threads);
  const int n_inputs = static_cast<int>(test.size());
  numeric::Rng root(seed);

  SubspaceSweepResult out;
  out.seed = seed;
  std::vector<int> preds;
  std::vector<double> delta(static_cast<size_t>(d));
  for (size_t ni = 0; ni < ns.size(); ++ni) {
    const int n = ns[ni];
    for (size_t si = 0; si < scales.size(); ++si) {
      const double scale = scales[si];
      double fr_sum = 0.0;
      for (int trial = 0; trial < trials; ++trial) {
        numeric::Rng rng = root.fork((ni * 1000 + si) * 100000 + static_cast<uint64_t>(trial));
        const std::vector<double> coef = numeric::sample_unit_sphere(rng, n);
        // delta = scale * V[:, :n] * coef; unit direction since V is orthonormal.
        std::fill(delta.begin(), delta.end(), 0.0);
        for (int j = 0; j < n; ++j) {
          const double w = coef[static_cast<size_t>(j)] * scale;
          for (int t = 0; t < d; ++t) delta[static_cast<size_t>(t)] += w * v_cols.at(t, j);
        }
        eval_feature_delta(c, fs, delta, threads, preds);
        int changed = 0;
        for (int i = 0; i < n_inputs; ++i)
          if (preds[static_cast<size_t>(i)] != fs.clean_pred[static_cast<size_t>(i)]) ++changed;
        fr_sum += static_cast<double>(changed) / n_inputs;
      }
      out.cells.push_back({n, scale, fr_sum / trials, trials});
    }
  }
  return out;
}

SingularVectorEval singular_vector_eval(const model::Classifier& c,
                                        const dataset::LabeledDataset& test, const Matrix& v_cols,
                                        int count, const std::vector<double>& scales,
                                        std::optional<std::pair<int, int>> pinned_pair,
                                        int threads) {
  const int d = c.pipeline().cfg().feature_dim(signal::Repr::Mfcc);
  if (v_cols.rows != d) throw ShapeMismatch("singular_vector_eval: V does not match the MFCC dimension");
  if (count < 1 || count > v_cols.cols) throw InvalidConfig("singular_vector_eval: count out of range");

  const FeatureSet fs = mfcc_features(c, test, threads);
  const int n_inputs = static_cast<int>(test.size());
  const int k = c.class_count();

  struct RawRow {
    int index;
    double scale;
    int changed = 0;
    std::vector<int> into;
  };
  std::vector<RawRow> raw;
  std::vector<int> preds;
  std::vector<double> delta(static_cast<size_t>(d));
  for (int q = 0; q < count; ++q) {
    for (double scale : scales) {
      RawRow row{q, scale, 0, std::vector<int>(static_cast<size_t>(k), 0)};
      for (int t = 0; t < d; ++t) delta[static_cast<size_t>(t)] = scale * v_cols.at(t, q);
      eval_feature_delta(c, fs, delta, threads, preds);
      for (int i = 0; i < n_inputs; ++i) {
        if (preds[static_cast<size_t>(i)] != fs.clean_pred[static_cast<size_t>(i)]) {
          row.changed++;
          row.into[static_cast<size_t>(preds[static_cast<size_t>(i)])]++;
        }
      }
      raw.push_back(std::move(row));
    }
  }

  SingularVectorEval out;
  if (pinned_pair.has_value()) {
    out.dom1 = pinned_pair->first;
    out.dom2 = pinned_pair->second;
  } else {
    std::vector<long long> total(static_cast<size_t>(k), 0);
    for (const auto& row : raw)
      for (int cls = 0; cls < k; ++cls) total[static_cast<size_t>(cls)] += row.into[static_cast<size_t>(cls)];
    int first = 0;
    for (int cls = 1; cls < k; ++cls)
      if (total[static_cast<size_t>(cls)] > total[static_cast<size_t>(first)]) first = cls;
    int second = first == 0 ? 1 : 0;
    for (int cls = 0; cls < k; ++cls)
      if (cls != first && total[static_cast<size_t>(cls)] > total[static_cast<size_t>(second)])
        second = cls;
    out.dom1 = first;
    out.dom2 = second;
  }

  for (const auto& row : raw) {
    VectorEvalRow r;
    r.index = row.index;
    r.scale = row.scale;
    r.fr = static_cast<double>(row.changed) / n_inputs;
    r.misclassified = row.changed;
    if (row.changed > 0) {
      const int d1 = row.into[static_cast<size_t>(out.dom1)];
      const int d2 = row.into[static_cast<size_t>(out.dom2)];
      r.freq_dom1 = static_cast<double>(d1) / row.changed;
      r.freq_dom2 = static_cast<double>(d2) / row.changed;
      r.freq_others = static_cast<double>(row.changed - d1 - d2) / row.changed;
    }
    out.rows.push_back(r);
  }
  return out;
}

std::vector<long long> volume_probe(const model::Classifier& c, long long n_samples, uint64_t seed,
                                    int threads) {
  if (n_samples < 1) throw InvalidConfig("volume_probe: n_samples must be >= 1");
  const int dim = c.input_dim();
  const int k = c.class_count();
  numeric::Rng root(seed);

  std::vector<int> preds(static_cast<size_t>(n_samples));
  numeric::parallel_for(static_cast<int>(n_samples), threads, [&](int i) {
    numeric::Rng rng = root.fork(static_cast<uint64_t>(i));
    std::vector<double> x(static_cast<size_t>(dim));
    for (auto& t : x) t = rng.uniform(-1.0, 1.0);
    preds[static_cast<size_t>(i)] = c.predict(x);
  });

  std::vector<long long> hist(static_cast<size_t>(k), 0);
  for (int p : preds) hist[static_cast<size_t>(p)]++;
  return hist;
}

}  // namespace uaplab::svdlab
