#include "uaplab/attacks.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include <json.hpp>

#include "uaplab/errors.hpp"

namespace uaplab::attacks {

using nlohmann::json;

std::string domain_name(Domain d) {
  switch (d) {
    case Domain::Waveform: return "waveform";
    case Domain::Spectrogram: return "spectrogram";
    case Domain::Mfcc: return "mfcc";
  }
  return "?";
}

std::string provenance_name(Provenance p) {
  switch (p) {
    case Provenance::DeepFool: return "deepfool";
    case Provenance::UapHc: return "uap_hc";
    case Provenance::TargetConf: return "target_conf";
    case Provenance::Random: return "random";
    case Provenance::SingularVector: return "singular_vector";
  }
  return "?";
}

Perturbation Perturbation::make(std::vector<double> values, Domain domain, Provenance prov) {
  Perturbation p;
  p.values = std::move(values);
  p.domain = domain;
  p.provenance = prov;
  p.refresh_norm();
  return p;
}

void Perturbation::refresh_norm() { norm_l2 = numeric::l2_norm(values); }

double Perturbation::linf_norm() const {
  double m = 0.0;
  for (double x : values) m = std::max(m, std::abs(x));
  return m;
}

std::vector<double> project_lp(const std::vector<double>& v, NormOrder p, double radius) {
  if (radius <= 0.0) throw InvalidConfig("project_lp: radius must be positive");
  if (p == NormOrder::LInf) {
    std::vector<double> out = v;
    for (auto& x : out) x = std::clamp(x, -radius, radius);
    return out;
  }
  const double norm = numeric::l2_norm(v);
  if (norm <= radius) return v;
  // The shrink keeps the projected norm strictly inside the ball despite
  // rounding, which makes a second projection the identity.
  const double scale = radius / norm * (1.0 - 1e-12);
  std::vector<double> out = v;
  for (auto& x : out) x *= scale;
  return out;
}

Perturbation project_lp(const Perturbation& v, NormOrder p, double radius) {
  Perturbation out = v;
  out.values = project_lp(v.values, p, radius);
  out.refresh_norm();
  return out;
}

DeepFoolResult deepfool(const std::vector<double>& x, const GradientModel& model,
                        const std::set<int>& restricted, const DeepFoolOptions& opt) {
  const int k = model.class_count();
  const int base_class = model.predict(x);
  if (opt.expected_class.has_value() && base_class != *opt.expected_class)
    throw AlreadyFooled("deepfool: input classifies to " + std::to_string(base_class) +
                        ", expected " + std::to_string(*opt.expected_class));

  std::vector<int> allowed;
  for (int c = 0; c < k; ++c)
    if (c != base_class && restricted.count(c) == 0) allowed.push_back(c);
  if (allowed.empty()) throw InvalidConfig("deepfool: no allowed target classes");

  const size_t dim = x.size();
  std::vector<double> r(dim, 0.0);
  std::vector<double> xp = x;

  DeepFoolResult res;
  int steps = 0;
  // Keep stepping while the current class is the base class or a restricted
  // one: a restricted landing does not count as fooled.
  auto not_fooled = [&](const std::vector<double>& point) {
    const int cur = model.predict(point);
    return cur == base_class || restricted.count(cur) > 0;
  };
  while (not_fooled(xp) && steps < opt.max_iter) {
    const std::vector<double> lg = model.logits(xp);
    double best_ratio = std::numeric_limits<double>::infinity();
    int best_class = -1;
    std::vector<double> best_w;
    double best_f = 0.0;
    for (int c : allowed) {
      const double f_diff = lg[static_cast<size_t>(c)] - lg[static_cast<size_t>(base_class)];
      const std::vector<double> w = model.grad_logit_diff(xp, c, base_class);
      const double w_norm = numeric::l2_norm(w);
      if (w_norm == 0.0) continue;
      const double ratio = std::abs(f_diff) / w_norm;
      if (ratio < best_ratio) {  // strict: ties keep the lowest class index
        best_ratio = ratio;
        best_class = c;
        best_w = w;
        best_f = f_diff;
      }
    }
    if (best_class < 0) break;  // all boundary estimates degenerate

    const double w_norm = numeric::l2_norm(best_w);
    const double coef = std::abs(best_f) / (w_norm * w_norm);
    for (size_t i = 0; i < dim; ++i) r[i] += coef * best_w[i];
    for (size_t i = 0; i < dim; ++i) xp[i] = x[i] + r[i];
    ++steps;
  }

  res.steps = steps;
  res.pre_overshoot_norm = numeric::l2_norm(r);
  for (auto& v : r) v *= opt.overshoot;
  std::vector<double> x_over(dim);
  for (size_t i = 0; i < dim; ++i) x_over[i] = x[i] + r[i];
  res.final_class = model.predict(x_over);
  res.converged = res.final_class != base_class && restricted.count(res.final_class) == 0;
  res.r = Perturbation::make(std::move(r), Domain::Waveform, Provenance::DeepFool);
  return res;
}

UapResult uap_hc(const std::vector<std::vector<double>>& inputs, const GradientModel& model,
                 const UapConfig& cfg, int threads) {
  if (inputs.empty()) throw InvalidConfig("uap_hc: empty input set");
  if (cfg.xi <= 0.0) throw InvalidConfig("uap_hc: xi must be positive");
  if (cfg.delta < 0.0 || cfg.delta > 1.0) throw InvalidConfig("uap_hc: delta must be in [0,1]");
  if (static_cast<int>(cfg.restricted.size()) >= model.class_count() - 1)
    throw InvalidConfig("uap_hc: restricted set leaves no reachable class");

  const size_t dim = inputs[0].size();
  const int n = static_cast<int>(inputs.size());
  const auto evaluator = model.make_set_evaluator(inputs, threads);

  std::vector<double> v(dim, 0.0);
  const std::vector<int> preds0 = evaluator->predict_perturbed(v);
  std::vector<int> cur_preds = preds0;

  auto fooling_rate = [&](const std::vector<int>& preds) {
    int changed = 0;
    for (int i = 0; i < n; ++i)
      if (preds[static_cast<size_t>(i)] != preds0[static_cast<size_t>(i)]) ++changed;
    return static_cast<double>(changed) / n;
  };

  UapResult out;
  double fr = 0.0;
  numeric::Rng root(cfg.seed);
  std::vector<int> order(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) order[static_cast<size_t>(i)] = i;

  std::vector<double> xv(dim), cand_unprojected(dim);
  int pass = 0;
  while (fr < 1.0 - cfg.delta && pass < cfg.max_passes) {
    numeric::Rng rng = root.fork(static_cast<uint64_t>(pass));
    for (int i = n - 1; i > 0; --i) {
      const int j = static_cast<int>(rng.next_u64() % static_cast<uint64_t>(i + 1));
      std::swap(order[static_cast<size_t>(i)], order[static_cast<size_t>(j)]);
    }

    for (int oi = 0; oi < n; ++oi) {
      const int idx = order[static_cast<size_t>(oi)];
      if (cur_preds[static_cast<size_t>(idx)] != preds0[static_cast<size_t>(idx)]) continue;

      const std::vector<double>& x = inputs[static_cast<size_t>(idx)];
      for (size_t t = 0; t < dim; ++t) xv[t] = x[t] + v[t];
      const DeepFoolResult df = deepfool(xv, model, cfg.restricted);
      if (!df.converged) out.trace.deepfool_unconverged++;

      for (size_t t = 0; t < dim; ++t) cand_unprojected[t] = v[t] + df.r.values[t];
      const std::vector<double> cand = project_lp(cand_unprojected, cfg.p, cfg.xi);
      const std::vector<int> cand_preds = evaluator->predict_perturbed(cand);
      const double fr_cand = fooling_rate(cand_preds);

      // The restricted-class check uses the unprojected candidate at the
      // triggering input.
      std::vector<double> x_cand(dim);
      for (size_t t = 0; t < dim; ++t) x_cand[t] = x[t] + cand_unprojected[t];
      const int trigger_class = model.predict(x_cand);

      if (fr < fr_cand && cfg.restricted.count(trigger_class) == 0) {
        v = cand;
        fr = fr_cand;
        cur_preds = cand_preds;

        TraceRow row;
        row.pass = pass + 1;
        row.fooling_rate = fr;
        row.dominant_class = model.predict(v);
        int hits = 0;
        for (int i = 0; i < n; ++i)
          if (cur_preds[static_cast<size_t>(i)] == row.dominant_class) ++hits;
        row.dominant_share = static_cast<double>(hits) / n;
        row.self_confidence = model.probs(v)[static_cast<size_t>(row.dominant_class)];
        row.norm_l2 = numeric::l2_norm(v);
        double peak = 0.0;
        for (size_t t = 0; t < dim; ++t) peak = std::max(peak, std::abs(x[t] + v[t]));
        out.trace.peak_abs_perturbed = std::max(out.trace.peak_abs_perturbed, peak);
        out.trace.rows.push_back(row);

        if (fr >= 1.0 - cfg.delta) break;
      }
    }
    ++pass;
  }

  out.trace.stop_reason = fr >= 1.0 - cfg.delta ? "fr_threshold" : "max_passes";
  out.trace.final_fooling_rate = fr;
  out.v = Perturbation::make(std::move(v), Domain::Waveform, Provenance::UapHc);
  return out;
}

Perturbation target_confidence_attack(const GradientModel& model, int target, double xi, int iters,
                                      double step, uint64_t seed) {
  if (xi <= 0.0) throw InvalidConfig("target_confidence_attack: xi must be positive");
  if (target < 0 || target >= model.class_count())
    throw InvalidConfig("target_confidence_attack: bad target class");

  numeric::Rng rng(seed);
  std::vector<double> v(static_cast<size_t>(model.input_dim()));
  for (auto& x : v) x = rng.uniform(-1e-3, 1e-3);
  v = project_lp(v, NormOrder::L2, xi);

  std::vector<double> best = v;
  double best_obj = model.probs(v)[static_cast<size_t>(target)];
  for (int it = 0; it < iters; ++it) {
    const std::vector<double> g = model.grad_prob(v, target);
    for (size_t i = 0; i < v.size(); ++i) v[i] += step * g[i];
    v = project_lp(v, NormOrder::L2, xi);
    const double obj = model.probs(v)[static_cast<size_t>(target)];
    if (obj > best_obj) {
      best_obj = obj;
      best = v;
    }
  }
  return Perturbation::make(std::move(best), Domain::Waveform, Provenance::TargetConf);
}

Perturbation random_waveform_perturbation(uint64_t seed, double target_l2, int dim) {
  if (target_l2 <= 0.0) throw InvalidConfig("random_waveform_perturbation: target_l2 must be positive");
  numeric::Rng rng(seed);
  std::vector<double> v(static_cast<size_t>(dim));
  double norm = 0.0;
  do {
    for (auto& x : v) x = rng.uniform(-1.0, 1.0);
    norm = numeric::l2_norm(v);
  } while (norm == 0.0);
  for (auto& x : v) x *= target_l2 / norm;
  return Perturbation::make(std::move(v), Domain::Waveform, Provenance::Random);
}

Perturbation feature_perturbation(const signal::Pipeline& pipe, const signal::Waveform& x,
                                  const std::vector<double>& v, signal::Repr repr) {
  if (v.size() != x.samples.size()) throw LengthMismatch("feature_perturbation: size mismatch");
  signal::Waveform xv{x.samples, x.sample_rate_hz};
  for (size_t i = 0; i < v.size(); ++i) xv.samples[i] += v[i];
  const numeric::Matrix fa = pipe.transform(xv, repr);
  const numeric::Matrix fb = pipe.transform(x, repr);
  std::vector<double> diff(fa.size());
  for (size_t i = 0; i < diff.size(); ++i) diff[i] = fa.data[i] - fb.data[i];
  return Perturbation::make(std::move(diff),
                            repr == signal::Repr::Spectrogram ? Domain::Spectrogram : Domain::Mfcc,
                            Provenance::DeepFool);
}

void save_perturbation(const std::string& path_base, const Perturbation& p,
                       const std::string& extra_json) {
  json meta = json::parse(extra_json);
  meta["domain"] = domain_name(p.domain);
  meta["provenance"] = provenance_name(p.provenance);
  meta["dim"] = p.values.size();
  meta["norm_l2"] = p.norm_l2;
  meta["norm_linf"] = p.linf_norm();
  meta["payload"] = path_base.substr(path_base.find_last_of('/') + 1) + ".f32";

  std::ofstream jf(path_base + ".json", std::ios::trunc);
  if (!jf) throw IoError("save_perturbation: cannot write " + path_base + ".json");
  jf << meta.dump(2) << "\n";

  std::ofstream pf(path_base + ".f32", std::ios::binary | std::ios::trunc);
  if (!pf) throw IoError("save_perturbation: cannot write " + path_base + ".f32");
  for (double x : p.values) {
    const float f = static_cast<float>(x);
    uint32_t bits;
    std::memcpy(&bits, &f, 4);
    const unsigned char b[4] = {static_cast<unsigned char>(bits), static_cast<unsigned char>(bits >> 8),
                                static_cast<unsigned char>(bits >> 16),
                                static_cast<unsigned char>(bits >> 24)};
    pf.write(reinterpret_cast<const char*>(b), 4);
  }
}

Perturbation load_perturbation(const std::string& path_base) {
  std::ifstream jf(path_base + ".json");
  if (!jf) throw IoError("load_perturbation: cannot read " + path_base + ".json");
  const json meta = json::parse(jf);

  std::ifstream pf(path_base + ".f32", std::ios::binary);
  if (!pf) throw IoError("load_perturbation: cannot read " + path_base + ".f32");
  std::vector<double> values;
  unsigned char b[4];
  while (pf.read(reinterpret_cast<char*>(b), 4)) {
    const uint32_t bits = static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
                          (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
    float f;
    std::memcpy(&f, &bits, 4);
    values.push_back(static_cast<double>(f));
  }
  if (values.size() != meta.at("dim").get<size_t>())
    throw IoError("load_perturbation: payload size does not match metadata");

  Perturbation p;
  const std::string dom = meta.at("domain").get<std::string>();
  p.domain = dom == "waveform"      ? Domain::Waveform
             : dom == "spectrogram" ? Domain::Spectrogram
                                    : Domain::Mfcc;
  const std::string prov = meta.at("provenance").get<std::string>();
  p.provenance = prov == "deepfool"      ? Provenance::DeepFool
                 : prov == "uap_hc"      ? Provenance::UapHc
                 : prov == "target_conf" ? Provenance::TargetConf
                 : prov == "random"      ? Provenance::Random
                                         : Provenance::SingularVector;
  p.values = std::move(values);
  p.refresh_norm();
  return p;
}

}  // namespace uaplab::attacks
