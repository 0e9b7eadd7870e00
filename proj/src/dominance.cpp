#include "uaplab/dominance.hpp"

#include <algorithm>
#include <cmath>

#include "uaplab/errors.hpp"

namespace uaplab::dominance {

Snapshot snapshot(const model::Classifier& c, const dataset::LabeledDataset& ds,
                  const std::vector<double>& v, int threads) {
  if (ds.size() == 0) throw EmptyEvaluationSet("snapshot: empty dataset");
  Snapshot s;
  s.k = c.class_count();
  s.labels = ds.labels;
  s.pre.resize(ds.size());
  s.post.resize(ds.size());
  numeric::parallel_for(static_cast<int>(ds.size()), threads, [&](int i) {
    const auto& w = ds.waves[static_cast<size_t>(i)];
    s.pre[static_cast<size_t>(i)] = c.predict_wave(w);
    signal::Waveform pw{w.samples, w.sample_rate_hz};
    for (size_t t = 0; t < pw.samples.size(); ++t) pw.samples[t] += v[t];
    s.post[static_cast<size_t>(i)] = c.predict_wave(pw);
  });
  return s;
}

namespace {

std::vector<size_t> eligible_indices(const Snapshot& s, bool initially_correct_only) {
  std::vector<size_t> idx;
  for (size_t i = 0; i < s.pre.size(); ++i)
    if (!initially_correct_only || s.pre[i] == s.labels[i]) idx.push_back(i);
  return idx;
}

}  // namespace

std::vector<double> misclass_distribution(const Snapshot& s, MisclassMode mode,
                                          bool initially_correct_only) {
  const std::vector<size_t> idx = eligible_indices(s, initially_correct_only);
  if (idx.empty()) throw EmptyEvaluationSet("misclass_distribution: no eligible inputs");

  std::vector<double> p(static_cast<size_t>(s.k), 0.0);
  if (mode == MisclassMode::MisclassifiedNormalized) {
    int miss = 0;
    for (size_t i : idx) {
      if (s.post[i] != s.pre[i]) {
        p[static_cast<size_t>(s.post[i])] += 1.0;
        ++miss;
      }
    }
    if (miss > 0)
      for (auto& x : p) x /= miss;
  } else {
    for (int j = 0; j < s.k; ++j) {
      int denom = 0, hits = 0;
      for (size_t i : idx) {
        if (s.pre[i] == j) continue;
        ++denom;
        if (s.post[i] == j) ++hits;
      }
      p[static_cast<size_t>(j)] = denom > 0 ? static_cast<double>(hits) / denom : 0.0;
    }
  }
  return p;
}

TransitionMatrix transition_matrix(const Snapshot& s, bool initially_correct_only) {
  const std::vector<size_t> idx = eligible_indices(s, initially_correct_only);
  if (idx.empty()) throw EmptyEvaluationSet("transition_matrix: no eligible inputs");

  TransitionMatrix tm;
  tm.t = Matrix(s.k, s.k);
  tm.support.assign(static_cast<size_t>(s.k), 0);
  for (size_t i : idx) {
    tm.t.at(s.pre[i], s.post[i]) += 1.0;
    tm.support[static_cast<size_t>(s.pre[i])]++;
  }
  for (int r = 0; r < s.k; ++r) {
    const int n = tm.support[static_cast<size_t>(r)];
    if (n == 0) continue;  // flagged by support, never divided
    for (int c = 0; c < s.k; ++c) tm.t.at(r, c) /= n;
  }
  return tm;
}

DominanceReport detect(const std::vector<double>& p, const TransitionMatrix& t,
                       const Thresholds& th) {
  const int k = static_cast<int>(p.size());
  if (k < 2 || t.t.rows != k || t.t.cols != k) throw ShapeMismatch("detect: inconsistent shapes");
  const double floor = 1.0 / (k - 1);
  if (th.alpha <= floor || th.beta <= floor || th.zeta <= floor)
    throw ThresholdTooLow("detect: thresholds must exceed 1/(k-1)");

  DominanceReport rep;
  rep.p = p;
  rep.t = t;
  rep.thresholds = th;
  for (int i = 0; i < k; ++i)
    for (int a = 0; a < k; ++a)
      if (i != a && t.t.at(i, a) >= th.alpha) rep.attractor_pairs.emplace_back(i, a);

  for (int b = 0; b < k; ++b)
    if (p[static_cast<size_t>(b)] >= th.beta) rep.dominant_by_mass.push_back(b);

  for (int b = 0; b < k; ++b) {
    int attracted = 0;
    for (int i = 0; i < k; ++i)
      if (i != b && t.t.at(i, b) >= th.alpha) ++attracted;
    if (static_cast<double>(attracted) / (k - 1) >= th.zeta) rep.dominant_by_attraction.push_back(b);
  }
  return rep;
}

double fooling_rate(const Snapshot& s, const std::set<int>& excluded, bool initially_correct_only) {
  int eligible = 0, changed = 0;
  for (size_t i = 0; i < s.pre.size(); ++i) {
    if (initially_correct_only && s.pre[i] != s.labels[i]) continue;
    if (excluded.count(s.labels[i]) > 0) continue;
    ++eligible;
    if (s.post[i] != s.pre[i]) ++changed;
  }
  if (eligible == 0) throw EmptyAfterExclusion("fooling_rate: no inputs left after exclusion");
  return static_cast<double>(changed) / eligible;
}

std::vector<double> per_class_fooling_rate(const Snapshot& s, bool initially_correct_only) {
  std::vector<int> eligible(static_cast<size_t>(s.k), 0), changed(static_cast<size_t>(s.k), 0);
  for (size_t i = 0; i < s.pre.size(); ++i) {
    if (initially_correct_only && s.pre[i] != s.labels[i]) continue;
    eligible[static_cast<size_t>(s.labels[i])]++;
    if (s.post[i] != s.pre[i]) changed[static_cast<size_t>(s.labels[i])]++;
  }
  std::vector<double> out(static_cast<size_t>(s.k), 0.0);
  for (int c = 0; c < s.k; ++c)
    if (eligible[static_cast<size_t>(c)] > 0)
      out[static_cast<size_t>(c)] =
          static_cast<double>(changed[static_cast<size_t>(c)]) / eligible[static_cast<size_t>(c)];
  return out;
}

Factors factors(const model::Classifier& c, const dataset::LabeledDataset& ds,
                const std::vector<double>& v, std::optional<int> y_b, int threads) {
  const Snapshot s = snapshot(c, ds, v, threads);
  Factors f;
  f.dominant_class = y_b.has_value() ? *y_b : c.predict(v);

  int changed = 0, hits = 0;
  for (size_t i = 0; i < s.pre.size(); ++i) {
    if (s.post[i] != s.pre[i]) ++changed;
    if (s.post[i] == f.dominant_class) ++hits;
  }
  f.fooling_rate = static_cast<double>(changed) / static_cast<double>(s.pre.size());
  f.dominant_share = static_cast<double>(hits) / static_cast<double>(s.pre.size());
  f.self_confidence = c.probs(v)[static_cast<size_t>(f.dominant_class)];
  return f;
}

double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size() || a.size() < 2) throw InvalidConfig("pearson: need two series of equal length >= 2");
  const double n = static_cast<double>(a.size());
  double ma = 0.0, mb = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  double saa = 0.0, sbb = 0.0, sab = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    const double da = a[i] - ma, db = b[i] - mb;
    saa += da * da;
    sbb += db * db;
    sab += da * db;
  }
  if (saa == 0.0 || sbb == 0.0) throw ZeroVariance("pearson: zero variance series");
  return sab / std::sqrt(saa * sbb);
}

DominanceReport make_report(const Snapshot& s, const Thresholds& th, int silence_class) {
  const std::vector<double> p = misclass_distribution(s);
  const TransitionMatrix t = transition_matrix(s);
  DominanceReport rep = detect(p, t, th);

  int eligible = 0;
  for (size_t i = 0; i < s.pre.size(); ++i)
    if (s.pre[i] == s.labels[i]) ++eligible;
  rep.eligible = eligible;

  rep.fr_all = fooling_rate(s, {});
  std::set<int> excl(rep.dominant_by_mass.begin(), rep.dominant_by_mass.end());
  auto guarded = [&](const std::set<int>& ex) {
    try {
      return fooling_rate(s, ex);
    } catch (const EmptyAfterExclusion&) {
      return 0.0;  // every input excluded; reported as zero with full exclusion
    }
  };
  rep.fr_excl_dominant = excl.empty() ? rep.fr_all : guarded(excl);
  std::set<int> excl_sil = excl;
  if (silence_class >= 0) excl_sil.insert(silence_class);
  rep.fr_excl_dominant_silence = excl_sil.empty() ? rep.fr_all : guarded(excl_sil);
  return rep;
}

int count_out_of_range(const dataset::LabeledDataset& ds, const std::vector<double>& v) {
  int count = 0;
  for (const auto& w : ds.waves) {
    for (size_t t = 0; t < w.samples.size(); ++t) {
      if (std::abs(w.samples[t] + v[t]) > 1.0) {
        ++count;
        break;
      }
    }
  }
  return count;
}

}  // namespace uaplab::dominance
