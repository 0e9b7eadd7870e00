#include "uaplab/cli.hpp"

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "uaplab/errors.hpp"
#include "uaplab/svdlab.hpp"

namespace uaplab::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const std::vector<std::string> kPaperClassNames = {"silence", "unknown", "yes", "no",
                                                   "up",      "down",    "left", "right",
                                                   "on",      "off",     "stop", "go"};

std::string fmt(double v) {
  char buf[40];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

uint64_t fnv1a64(const void* data, size_t len, uint64_t h = 0xCBF29CE484222325ULL) {
  const unsigned char* p = static_cast<const unsigned char*>(data);
  for (size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 0x100000001B3ULL;
  }
  return h;
}

std::string hex64(uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string dataset_digest(const dataset::LabeledDataset& ds) {
  uint64_t h = 0xCBF29CE484222325ULL;
  for (size_t i = 0; i < ds.size(); ++i) {
    const int32_t label = ds.labels[i];
    h = fnv1a64(&label, sizeof(label), h);
    h = fnv1a64(ds.waves[i].samples.data(), ds.waves[i].samples.size() * sizeof(double), h);
  }
  return hex64(h);
}

std::ofstream open_out(const fs::path& path) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  return out;
}

}  // namespace

std::vector<std::string> ExperimentConfig::class_names() const {
  return data_source == "wav" ? wav_class_names : dataset::synthetic_class_names(synth.k);
}

int ExperimentConfig::silence_class_index() const {
  const auto names = class_names();
  for (size_t i = 0; i < names.size(); ++i)
    if (names[i] == silence_class) return static_cast<int>(i);
  return -1;
}

std::vector<int> ExperimentConfig::restricted_indices() const {
  const auto names = class_names();
  std::vector<int> out;
  for (const auto& r : uap.restricted) {
    const auto it = std::find(names.begin(), names.end(), r);
    if (it == names.end()) throw InvalidConfig("restricted class '" + r + "' is not a class name");
    out.push_back(static_cast<int>(it - names.begin()));
  }
  return out;
}

ExperimentConfig default_config(const std::string& preset) {
  ExperimentConfig cfg;
  cfg.preset = preset;
  if (preset == "desk") {
    cfg.pipeline = signal::PipelineConfig::desk();
    cfg.synth = dataset::SynthSpec{6, 150, 1001, 0.1};
    cfg.arch = model::ArchConfig::desk_default(6);
  } else if (preset == "paper") {
    cfg.pipeline = signal::PipelineConfig::paper();
    cfg.data_source = "wav";
    cfg.wav_class_names = kPaperClassNames;
    cfg.arch = model::ArchConfig::desk_default(12);
    cfg.uap.xi = 0.1;
    cfg.target.xi = 0.1;
    cfg.svd.ns = {10, 50, 100, 200, 500};
    cfg.svd.scales = {-200, -150, -100, -50, 50, 100, 150, 200};
    cfg.svd.vector_scales = {-100, 100};
    cfg.svd.matrix_rows = 0;
    cfg.svd.volume_samples = 1000000;
  } else {
    throw InvalidConfig("unknown preset '" + preset + "' (expected desk or paper)");
  }
  return cfg;
}

namespace {

json pipeline_to_json(const signal::PipelineConfig& p) {
  return json{{"sample_rate_hz", p.sample_rate_hz},
              {"input_len", p.input_len},
              {"frame_len", p.frame_len},
              {"hop", p.hop},
              {"fft_size", p.fft_size},
              {"retained_bins", p.retained_bins},
              {"n_mels", p.n_mels},
              {"n_mfcc", p.n_mfcc},
              {"log_floor", p.log_floor},
              {"window", p.window == signal::WindowKind::Hann ? "hann" : "rect"}};
}

void pipeline_from_json(const json& j, signal::PipelineConfig& p) {
  p.sample_rate_hz = j.value("sample_rate_hz", p.sample_rate_hz);
  p.input_len = j.value("input_len", p.input_len);
  p.frame_len = j.value("frame_len", p.frame_len);
  p.hop = j.value("hop", p.hop);
  p.fft_size = j.value("fft_size", p.fft_size);
  p.retained_bins = j.value("retained_bins", p.retained_bins);
  p.n_mels = j.value("n_mels", p.n_mels);
  p.n_mfcc = j.value("n_mfcc", p.n_mfcc);
  p.log_floor = j.value("log_floor", p.log_floor);
  if (j.contains("window")) {
    const std::string w = j.at("window").get<std::string>();
    if (w != "hann" && w != "rect") throw InvalidConfig("pipeline.window must be hann or rect");
    p.window = w == "hann" ? signal::WindowKind::Hann : signal::WindowKind::Rectangular;
  }
}

}  // namespace

std::string config_to_json_text(const ExperimentConfig& cfg) {
  json j;
  j["preset"] = cfg.preset;
  j["out_dir"] = cfg.out_dir;
  j["threads"] = cfg.threads;
  j["pipeline"] = pipeline_to_json(cfg.pipeline);
  j["data"] = {{"source", cfg.data_source},
               {"synth",
                {{"k", cfg.synth.k},
                 {"per_class", cfg.synth.per_class},
                 {"seed", cfg.synth.seed},
                 {"noise_level", cfg.synth.noise_level}}},
               {"wav_dir", cfg.wav_dir},
               {"wav_class_names", cfg.wav_class_names},
               {"train_fraction", cfg.train_fraction},
               {"split_seed", cfg.split_seed}};
  json convs = json::array();
  for (const auto& c : cfg.arch.convs)
    convs.push_back({c.out_channels, c.kernel_h, c.kernel_w, c.stride});
  j["arch"] = {{"convs", convs}, {"classes", cfg.arch.classes}};
  j["train"] = {{"epochs", cfg.train.epochs},
                {"batch_size", cfg.train.batch_size},
                {"learning_rate", cfg.train.learning_rate},
                {"momentum", cfg.train.momentum},
                {"seed", cfg.train.seed}};
  j["uap"] = {{"xi", cfg.uap.xi},       {"p", cfg.uap.p},
              {"delta", cfg.uap.delta}, {"max_passes", cfg.uap.max_passes},
              {"restricted", cfg.uap.restricted}, {"seeds", cfg.uap.seeds}};
  j["target"] = {{"xi", cfg.target.xi},
                 {"iters", cfg.target.iters},
                 {"step", cfg.target.step},
                 {"trials", cfg.target.trials},
                 {"seed", cfg.target.seed}};
  j["deepfool"] = {{"count", cfg.deepfool.count}};
  j["svd"] = {{"ns", cfg.svd.ns},
              {"scales", cfg.svd.scales},
              {"trials", cfg.svd.trials},
              {"vector_count", cfg.svd.vector_count},
              {"vector_scales", cfg.svd.vector_scales},
              {"volume_samples", cfg.svd.volume_samples},
              {"seed", cfg.svd.seed},
              {"matrix_rows", cfg.svd.matrix_rows},
              {"kinds", cfg.svd.kinds}};
  j["thresholds"] = {{"alpha", cfg.thresholds.alpha},
                     {"beta", cfg.thresholds.beta},
                     {"zeta", cfg.thresholds.zeta}};
  j["silence_class"] = cfg.silence_class;
  return j.dump(2) + "\n";
}

ExperimentConfig config_from_json_text(const std::string& text) {
  const json j = json::parse(text);
  ExperimentConfig cfg = default_config(j.value("preset", std::string("desk")));
  cfg.out_dir = j.value("out_dir", cfg.out_dir);
  cfg.threads = j.value("threads", cfg.threads);
  if (j.contains("pipeline")) pipeline_from_json(j.at("pipeline"), cfg.pipeline);
  if (j.contains("data")) {
    const json& d = j.at("data");
    cfg.data_source = d.value("source", cfg.data_source);
    if (cfg.data_source != "synthetic" && cfg.data_source != "wav")
      throw InvalidConfig("data.source must be synthetic or wav");
    if (d.contains("synth")) {
      const json& s = d.at("synth");
      cfg.synth.k = s.value("k", cfg.synth.k);
      cfg.synth.per_class = s.value("per_class", cfg.synth.per_class);
      cfg.synth.seed = s.value("seed", cfg.synth.seed);
      cfg.synth.noise_level = s.value("noise_level", cfg.synth.noise_level);
    }
    cfg.wav_dir = d.value("wav_dir", cfg.wav_dir);
    if (d.contains("wav_class_names"))
      cfg.wav_class_names = d.at("wav_class_names").get<std::vector<std::string>>();
    cfg.train_fraction = d.value("train_fraction", cfg.train_fraction);
    cfg.split_seed = d.value("split_seed", cfg.split_seed);
  }
  if (j.contains("arch")) {
    const json& a = j.at("arch");
    if (a.contains("convs")) {
      cfg.arch.convs.clear();
      for (const auto& c : a.at("convs")) {
        if (!c.is_array() || c.size() != 4)
          throw InvalidConfig("arch.convs entries must be [out, kh, kw, stride]");
        cfg.arch.convs.push_back({c[0].get<int>(), c[1].get<int>(), c[2].get<int>(), c[3].get<int>()});
      }
    }
    cfg.arch.classes = a.value("classes", cfg.arch.classes);
  }
  if (j.contains("train")) {
    const json& t = j.at("train");
    cfg.train.epochs = t.value("epochs", cfg.train.epochs);
    cfg.train.batch_size = t.value("batch_size", cfg.train.batch_size);
    cfg.train.learning_rate = t.value("learning_rate", cfg.train.learning_rate);
    cfg.train.momentum = t.value("momentum", cfg.train.momentum);
    cfg.train.seed = t.value("seed", cfg.train.seed);
  }
  if (j.contains("uap")) {
    const json& u = j.at("uap");
    cfg.uap.xi = u.value("xi", cfg.uap.xi);
    cfg.uap.p = u.value("p", cfg.uap.p);
    if (cfg.uap.p != "2" && cfg.uap.p != "inf") throw InvalidConfig("uap.p must be 2 or inf");
    cfg.uap.delta = u.value("delta", cfg.uap.delta);
    cfg.uap.max_passes = u.value("max_passes", cfg.uap.max_passes);
    if (u.contains("restricted"))
      cfg.uap.restricted = u.at("restricted").get<std::vector<std::string>>();
    if (u.contains("seeds")) cfg.uap.seeds = u.at("seeds").get<std::vector<uint64_t>>();
  }
  if (j.contains("target")) {
    const json& t = j.at("target");
    cfg.target.xi = t.value("xi", cfg.target.xi);
    cfg.target.iters = t.value("iters", cfg.target.iters);
    cfg.target.step = t.value("step", cfg.target.step);
    cfg.target.trials = t.value("trials", cfg.target.trials);
    cfg.target.seed = t.value("seed", cfg.target.seed);
  }
  if (j.contains("deepfool")) cfg.deepfool.count = j.at("deepfool").value("count", cfg.deepfool.count);
  if (j.contains("svd")) {
    const json& s = j.at("svd");
    if (s.contains("ns")) cfg.svd.ns = s.at("ns").get<std::vector<int>>();
    if (s.contains("scales")) cfg.svd.scales = s.at("scales").get<std::vector<double>>();
    cfg.svd.trials = s.value("trials", cfg.svd.trials);
    cfg.svd.vector_count = s.value("vector_count", cfg.svd.vector_count);
    if (s.contains("vector_scales"))
      cfg.svd.vector_scales = s.at("vector_scales").get<std::vector<double>>();
    cfg.svd.volume_samples = s.value("volume_samples", cfg.svd.volume_samples);
    cfg.svd.seed = s.value("seed", cfg.svd.seed);
    cfg.svd.matrix_rows = s.value("matrix_rows", cfg.svd.matrix_rows);
    if (s.contains("kinds")) cfg.svd.kinds = s.at("kinds").get<std::vector<std::string>>();
  }
  if (j.contains("thresholds")) {
    const json& t = j.at("thresholds");
    cfg.thresholds.alpha = t.value("alpha", cfg.thresholds.alpha);
    cfg.thresholds.beta = t.value("beta", cfg.thresholds.beta);
    cfg.thresholds.zeta = t.value("zeta", cfg.thresholds.zeta);
  }
  cfg.silence_class = j.value("silence_class", cfg.silence_class);
  return cfg;
}

ExperimentConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return config_from_json_text(ss.str());
}

DataBundle load_experiment_data(const ExperimentConfig& cfg) {
  dataset::LabeledDataset full;
  if (cfg.data_source == "synthetic") {
    full = dataset::generate_synthetic(cfg.synth, cfg.pipeline);
  } else {
    if (cfg.wav_dir.empty()) throw InvalidConfig("data.wav_dir is required for wav data");
    full = dataset::load_wav_dir(cfg.wav_dir, cfg.wav_class_names, cfg.pipeline);
  }
  if (full.k() != cfg.arch.classes)
    throw InvalidConfig("arch.classes does not match the dataset class count");
  auto [train, test] = dataset::split(full, cfg.train_fraction, cfg.split_seed);
  return DataBundle{std::move(full), std::move(train), std::move(test)};
}

std::string checkpoint_path(const ExperimentConfig& cfg) { return cfg.out_dir + "/model.ckpt"; }

namespace {

// --- command implementations ---

void write_accuracy_csv(const fs::path& path, const model::AccuracyReport& rep,
                        const std::vector<std::string>& names) {
  auto out = open_out(path);
  out << "class,accuracy,samples\n";
  for (size_t c = 0; c < names.size(); ++c) {
    const int total = rep.per_class_total[c];
    const double acc = total > 0 ? 100.0 * rep.per_class_correct[c] / total : 0.0;
    out << names[c] << "," << fmt(acc) << "," << total << "\n";
  }
  out << "average," << fmt(100.0 * rep.mean_per_class) << ",\n";
  out << "overall," << fmt(100.0 * rep.overall) << ",\n";
}

int cmd_gen_data(const ExperimentConfig& cfg) {
  const DataBundle data = load_experiment_data(cfg);
  json manifest;
  manifest["preset"] = cfg.preset;
  manifest["source"] = cfg.data_source;
  manifest["class_names"] = cfg.class_names();
  manifest["pipeline"] = pipeline_to_json(cfg.pipeline);
  if (cfg.data_source == "synthetic")
    manifest["synth"] = {{"k", cfg.synth.k},
                         {"per_class", cfg.synth.per_class},
                         {"seed", cfg.synth.seed},
                         {"noise_level", cfg.synth.noise_level}};
  else
    manifest["wav_dir"] = cfg.wav_dir;
  auto counts = [&](const dataset::LabeledDataset& ds) {
    std::vector<int> c(static_cast<size_t>(ds.k()), 0);
    for (int label : ds.labels) c[static_cast<size_t>(label)]++;
    return c;
  };
  manifest["counts"] = {{"full", counts(data.full)},
                        {"train", counts(data.train)},
                        {"test", counts(data.test)}};
  manifest["digest"] = {{"full", dataset_digest(data.full)},
                        {"train", dataset_digest(data.train)},
                        {"test", dataset_digest(data.test)}};
  manifest["split"] = {{"train_fraction", cfg.train_fraction}, {"split_seed", cfg.split_seed}};
  auto out = open_out(fs::path(cfg.out_dir) / "manifest.json");
  out << manifest.dump(2) << "\n";
  std::cout << "wrote " << cfg.out_dir << "/manifest.json (" << data.full.size() << " items)\n";
  return 0;
}

int cmd_train(const ExperimentConfig& cfg) {
  const DataBundle data = load_experiment_data(cfg);
  model::Classifier c(cfg.arch, cfg.pipeline, cfg.train.seed);
  const std::vector<double> history = c.train(data.train, cfg.train);
  c.save(checkpoint_path(cfg));

  auto loss_csv = open_out(fs::path(cfg.out_dir) / "train_loss.csv");
  loss_csv << "epoch,mean_cross_entropy\n";
  for (size_t e = 0; e < history.size(); ++e) loss_csv << e + 1 << "," << fmt(history[e]) << "\n";

  const model::AccuracyReport rep = c.accuracy(data.test, cfg.threads);
  write_accuracy_csv(fs::path(cfg.out_dir) / "accuracy.csv", rep, cfg.class_names());
  std::cout << "trained " << history.size() << " epochs; test accuracy "
            << fmt(100.0 * rep.overall) << "% (mean per-class " << fmt(100.0 * rep.mean_per_class)
            << "%)\n";
  return 0;
}

int cmd_eval(const ExperimentConfig& cfg) {
  const DataBundle data = load_experiment_data(cfg);
  const model::Classifier c = model::Classifier::load(checkpoint_path(cfg));
  const model::AccuracyReport rep = c.accuracy(data.test, cfg.threads);
  write_accuracy_csv(fs::path(cfg.out_dir) / "accuracy.csv", rep, cfg.class_names());
  std::cout << "test accuracy " << fmt(100.0 * rep.overall) << "% (mean per-class "
            << fmt(100.0 * rep.mean_per_class) << "%)\n";
  return 0;
}

void write_trace_csv(const fs::path& path, const attacks::AttackTrace& trace) {
  auto out = open_out(path);
  out << "pass,fooling_rate,dominant_share,self_confidence,norm_l2,dominant_class\n";
  for (const auto& row : trace.rows)
    out << row.pass << "," << fmt(row.fooling_rate) << "," << fmt(row.dominant_share) << ","
        << fmt(row.self_confidence) << "," << fmt(row.norm_l2) << "," << row.dominant_class << "\n";
}

std::vector<std::vector<double>> wave_vectors(const dataset::LabeledDataset& ds) {
  std::vector<std::vector<double>> out(ds.size());
  for (size_t i = 0; i < ds.size(); ++i) out[i] = ds.waves[i].samples;
  return out;
}

int cmd_attack(const ExperimentConfig& cfg, const std::string& kind,
               std::optional<uint64_t> seed_override) {
  const DataBundle data = load_experiment_data(cfg);
  const model::Classifier c = model::Classifier::load(checkpoint_path(cfg));
  const std::vector<std::string> names = cfg.class_names();

  if (kind == "uap") {
    const std::vector<int> restricted_vec = cfg.restricted_indices();
    attacks::UapConfig ucfg;
    ucfg.xi = cfg.uap.xi;
    ucfg.p = cfg.uap.p == "inf" ? attacks::NormOrder::LInf : attacks::NormOrder::L2;
    ucfg.delta = cfg.uap.delta;
    ucfg.max_passes = cfg.uap.max_passes;
    ucfg.restricted = std::set<int>(restricted_vec.begin(), restricted_vec.end());

    const std::vector<std::vector<double>> inputs = wave_vectors(data.train);
    std::vector<uint64_t> seeds = cfg.uap.seeds;
    if (seed_override.has_value()) seeds = {*seed_override};
    for (uint64_t seed : seeds) {
      ucfg.seed = seed;
      const attacks::UapResult res = attacks::uap_hc(inputs, c, ucfg, cfg.threads);
      json extra;
      extra["xi"] = ucfg.xi;
      extra["p"] = cfg.uap.p;
      extra["delta"] = ucfg.delta;
      extra["max_passes"] = ucfg.max_passes;
      extra["restricted"] = cfg.uap.restricted;
      extra["seed"] = seed;
      extra["final_fooling_rate"] = res.trace.final_fooling_rate;
      extra["stop_reason"] = res.trace.stop_reason;
      extra["accepted_updates"] = res.trace.rows.size();
      extra["deepfool_unconverged"] = res.trace.deepfool_unconverged;
      extra["peak_abs_perturbed"] = res.trace.peak_abs_perturbed;
      const std::string base = cfg.out_dir + "/uap_s" + std::to_string(seed);
      attacks::save_perturbation(base, res.v, extra.dump());
      write_trace_csv(base + "_trace.csv", res.trace);
      std::cout << "uap seed " << seed << ": train FR " << fmt(res.trace.final_fooling_rate)
                << " |v|2 " << fmt(res.v.norm_l2) << " (" << res.trace.stop_reason << ")\n";
    }
    return 0;
  }

  if (kind == "target") {
    const uint64_t base_seed = seed_override.value_or(cfg.target.seed);
    numeric::Rng root(base_seed);
    auto summary = open_out(fs::path(cfg.out_dir) / "target_summary.csv");
    summary << "target_class,trial,seed,objective,achieved_class,norm_l2\n";
    for (int t = 0; t < c.class_count(); ++t) {
      for (int trial = 0; trial < cfg.target.trials; ++trial) {
        const uint64_t seed = root.fork(static_cast<uint64_t>(t) * 100000 + trial).origin();
        const attacks::Perturbation v = attacks::target_confidence_attack(
            c, t, cfg.target.xi, cfg.target.iters, cfg.target.step, seed);
        const int achieved = c.predict(v.values);
        const double obj = c.probs(v.values)[static_cast<size_t>(t)];
        json extra;
        extra["target_class"] = names[static_cast<size_t>(t)];
        extra["trial"] = trial;
        extra["seed"] = seed;
        extra["xi"] = cfg.target.xi;
        extra["iters"] = cfg.target.iters;
        extra["step"] = cfg.target.step;
        extra["objective"] = obj;
        extra["achieved_class"] = names[static_cast<size_t>(achieved)];
        attacks::save_perturbation(
            cfg.out_dir + "/target_" + names[static_cast<size_t>(t)] + "_t" + std::to_string(trial),
            v, extra.dump());
        summary << names[static_cast<size_t>(t)] << "," << trial << "," << seed << "," << fmt(obj)
                << "," << names[static_cast<size_t>(achieved)] << "," << fmt(v.norm_l2) << "\n";
      }
    }
    std::cout << "wrote " << c.class_count() * cfg.target.trials << " target-confidence artifacts\n";
    return 0;
  }

  if (kind == "deepfool") {
    const int count = std::min<int>(cfg.deepfool.count, static_cast<int>(data.test.size()));
    auto summary = open_out(fs::path(cfg.out_dir) / "deepfool_summary.csv");
    summary << "index,label,pre_class,final_class,converged,steps,norm_pre_overshoot,norm_l2\n";
    for (int i = 0; i < count; ++i) {
      const auto df = attacks::deepfool(data.test.waves[static_cast<size_t>(i)].samples, c, {});
      json extra;
      extra["input_index"] = i;
      extra["converged"] = df.converged;
      extra["steps"] = df.steps;
      extra["final_class"] = df.final_class >= 0 ? names[static_cast<size_t>(df.final_class)] : "?";
      attacks::save_perturbation(cfg.out_dir + "/df_" + std::to_string(i), df.r, extra.dump());
      summary << i << "," << names[static_cast<size_t>(data.test.labels[static_cast<size_t>(i)])]
              << "," << names[static_cast<size_t>(c.predict(data.test.waves[static_cast<size_t>(i)].samples))]
              << "," << (df.final_class >= 0 ? names[static_cast<size_t>(df.final_class)] : "?") << ","
              << (df.converged ? 1 : 0) << "," << df.steps << "," << fmt(df.pre_overshoot_norm) << ","
              << fmt(df.r.norm_l2) << "\n";
    }
    std::cout << "wrote " << count << " individual perturbation artifacts\n";
    return 0;
  }

  throw InvalidConfig("attack kind must be uap, target or deepfool");
}

std::vector<std::string> artifact_bases(const std::string& dir, const std::string& prefix) {
  std::vector<std::string> bases;
  if (!fs::is_directory(dir)) return bases;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (!e.is_regular_file() || e.path().extension() != ".json") continue;
    const std::string stem = e.path().stem().string();
    if (stem.rfind(prefix, 0) != 0) continue;
    if (stem == "manifest" || (stem.size() >= 6 && stem.substr(stem.size() - 6) == "_trace")) continue;
    bases.push_back((fs::path(dir) / stem).string());
  }
  std::sort(bases.begin(), bases.end());
  return bases;
}

// Trace rows needed for the factor-correlation table.
struct ParsedTrace {
  std::vector<double> f1, f2, f3;
};

ParsedTrace parse_trace_first_pass(const std::string& path) {
  ParsedTrace out;
  std::ifstream in(path);
  if (!in) return out;
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    std::stringstream ss(line);
    std::string field;
    std::vector<std::string> fields;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (fields.size() < 6) continue;
    if (std::stoi(fields[0]) != 1) continue;  // first pass only
    out.f1.push_back(std::stod(fields[1]));
    out.f2.push_back(std::stod(fields[2]));
    out.f3.push_back(std::stod(fields[3]));
  }
  return out;
}

int cmd_dominance(const ExperimentConfig& cfg, const std::string& prefix) {
  const DataBundle data = load_experiment_data(cfg);
  const model::Classifier c = model::Classifier::load(checkpoint_path(cfg));
  const std::vector<std::string> names = cfg.class_names();
  const dominance::Thresholds th{cfg.thresholds.alpha, cfg.thresholds.beta, cfg.thresholds.zeta};
  const int silence = cfg.silence_class_index();

  const std::vector<std::string> bases = artifact_bases(cfg.out_dir, prefix);
  if (bases.empty()) throw IoError("no perturbation artifacts with prefix '" + prefix + "' in " + cfg.out_dir);

  const fs::path dom_dir = fs::path(cfg.out_dir) / "dominance";
  auto freq_csv = open_out(dom_dir / "misclass_freq.csv");
  auto fr_class_csv = open_out(dom_dir / "per_class_fr.csv");
  auto fr_csv = open_out(dom_dir / "fooling_rates.csv");
  freq_csv << "perturbation";
  fr_class_csv << "perturbation";
  for (const auto& n : names) {
    freq_csv << "," << n;
    fr_class_csv << "," << n;
  }
  freq_csv << "\n";
  fr_class_csv << "\n";
  fr_csv << "perturbation,fr_all,fr_excl_dominant,fr_excl_dominant_silence,dominant_by_mass,"
            "dominant_by_attraction,attractor_pairs,out_of_range_inputs\n";

  std::vector<double> all, excl_dom, excl_dom_sil;
  std::map<std::string, std::vector<double>> by_target;  // target-attack grouping

  for (const auto& base : bases) {
    const std::string name = fs::path(base).filename().string();
    const attacks::Perturbation v = attacks::load_perturbation(base);
    if (v.domain != attacks::Domain::Waveform)
      throw InvalidConfig(name + ": dominance evaluation expects waveform perturbations");
    const dominance::Snapshot snap = dominance::snapshot(c, data.test, v.values, cfg.threads);
    dominance::DominanceReport rep = dominance::make_report(snap, th, silence);
    rep.out_of_range_inputs = dominance::count_out_of_range(data.test, v.values);

    json rj;
    rj["perturbation"] = name;
    rj["p"] = rep.p;
    json tmat = json::array();
    for (int r = 0; r < snap.k; ++r) {
      json row = json::array();
      for (int col = 0; col < snap.k; ++col) row.push_back(rep.t.t.at(r, col));
      tmat.push_back(row);
    }
    rj["transition"] = tmat;
    rj["transition_support"] = rep.t.support;
    json pairs = json::array();
    for (const auto& [i, a] : rep.attractor_pairs)
      pairs.push_back({names[static_cast<size_t>(i)], names[static_cast<size_t>(a)]});
    rj["attractor_pairs"] = pairs;
    auto name_list = [&](const std::vector<int>& cls) {
      json out = json::array();
      for (int x : cls) out.push_back(names[static_cast<size_t>(x)]);
      return out;
    };
    rj["dominant_by_mass"] = name_list(rep.dominant_by_mass);
    rj["dominant_by_attraction"] = name_list(rep.dominant_by_attraction);
    rj["thresholds"] = {{"alpha", th.alpha}, {"beta", th.beta}, {"zeta", th.zeta}};
    rj["fooling_rate"] = {{"all", rep.fr_all},
                          {"excl_dominant", rep.fr_excl_dominant},
                          {"excl_dominant_silence", rep.fr_excl_dominant_silence}};
    rj["eligible_inputs"] = rep.eligible;
    rj["out_of_range_inputs"] = rep.out_of_range_inputs;
    auto rf = open_out(dom_dir / ("report_" + name + ".json"));
    rf << rj.dump(2) << "\n";

    freq_csv << name;
    for (double x : rep.p) freq_csv << "," << fmt(x);
    freq_csv << "\n";
    const std::vector<double> pcfr = dominance::per_class_fooling_rate(snap);
    fr_class_csv << name;
    for (double x : pcfr) fr_class_csv << "," << fmt(x);
    fr_class_csv << "\n";
    auto joined = [&](const std::vector<int>& cls) {
      std::string s;
      for (size_t i = 0; i < cls.size(); ++i)
        s += (i ? ";" : "") + names[static_cast<size_t>(cls[i])];
      return s;
    };
    fr_csv << name << "," << fmt(rep.fr_all) << "," << fmt(rep.fr_excl_dominant) << ","
           << fmt(rep.fr_excl_dominant_silence) << "," << joined(rep.dominant_by_mass) << ","
           << joined(rep.dominant_by_attraction) << "," << rep.attractor_pairs.size() << ","
           << rep.out_of_range_inputs << "\n";

    all.push_back(rep.fr_all);
    excl_dom.push_back(rep.fr_excl_dominant);
    excl_dom_sil.push_back(rep.fr_excl_dominant_silence);

    if (prefix == "target_") {
      // target_<class>_t<trial>
      const std::string rest = name.substr(7);
      const size_t cut = rest.rfind("_t");
      if (cut != std::string::npos) by_target[rest.substr(0, cut)].push_back(rep.fr_all);
    }
  }

  auto agg = open_out(dom_dir / "aggregate.csv");
  agg << "variant,mean,max\n";
  auto stat = [&](const char* label, const std::vector<double>& xs) {
    double sum = 0.0, mx = 0.0;
    for (double x : xs) {
      sum += x;
      mx = std::max(mx, x);
    }
    agg << label << "," << fmt(sum / xs.size()) << "," << fmt(mx) << "\n";
  };
  stat("all", all);
  stat("excl_dominant", excl_dom);
  stat("excl_dominant_silence", excl_dom_sil);

  if (prefix == "target_" && !by_target.empty()) {
    auto tf = open_out(dom_dir / "target_fr_by_class.csv");
    tf << "target_class,mean_fr,max_fr,trials\n";
    for (const auto& [cls, xs] : by_target) {
      double sum = 0.0, mx = 0.0;
      for (double x : xs) {
        sum += x;
        mx = std::max(mx, x);
      }
      tf << cls << "," << fmt(sum / xs.size()) << "," << fmt(mx) << "," << xs.size() << "\n";
    }
  }

  if (prefix == "uap_") {
    auto corr = open_out(dom_dir / "factor_correlations.csv");
    corr << "perturbation,corr_fr_selfconf,corr_fr_domshare,corr_domshare_selfconf\n";
    std::vector<double> c13, c12, c23;
    for (const auto& base : bases) {
      const ParsedTrace tr = parse_trace_first_pass(base + "_trace.csv");
      if (tr.f1.size() < 2) continue;
      try {
        const double a = dominance::pearson(tr.f1, tr.f3);
        const double b = dominance::pearson(tr.f1, tr.f2);
        const double c2 = dominance::pearson(tr.f2, tr.f3);
        corr << fs::path(base).filename().string() << "," << fmt(a) << "," << fmt(b) << ","
             << fmt(c2) << "\n";
        c13.push_back(a);
        c12.push_back(b);
        c23.push_back(c2);
      } catch (const ZeroVariance&) {
        // constant factor series carries no correlation information
      }
    }
    if (!c13.empty()) {
      auto mean = [](const std::vector<double>& xs) {
        double s = 0.0;
        for (double x : xs) s += x;
        return s / xs.size();
      };
      corr << "mean," << fmt(mean(c13)) << "," << fmt(mean(c12)) << "," << fmt(mean(c23)) << "\n";
    }
  }

  std::cout << "wrote dominance reports for " << bases.size() << " perturbations\n";
  return 0;
}

svdlab::MatrixKind parse_kind(const std::string& s) {
  if (s == "deepfool") return svdlab::MatrixKind::DeepFoolV;
  if (s == "random") return svdlab::MatrixKind::RandomR;
  if (s == "uniform") return svdlab::MatrixKind::UniformFeature;
  throw InvalidConfig("unknown matrix kind '" + s + "'");
}

attacks::Domain parse_domain(const std::string& s) {
  if (s == "waveform") return attacks::Domain::Waveform;
  if (s == "spectrogram") return attacks::Domain::Spectrogram;
  if (s == "mfcc") return attacks::Domain::Mfcc;
  throw InvalidConfig("unknown representation '" + s + "'");
}

void write_sweep(const fs::path& csv_path, const fs::path& dat_path,
                 const svdlab::SubspaceSweepResult& res) {
  auto csv = open_out(csv_path);
  csv << "n,scale,mean_fr,trials\n";
  auto dat = open_out(dat_path);
  for (const auto& cell : res.cells) {
    csv << cell.n << "," << fmt(cell.scale) << "," << fmt(cell.mean_fr) << "," << cell.trials << "\n";
    dat << cell.n << " " << fmt(cell.scale) << " " << fmt(cell.mean_fr) << "\n";
  }
}

void write_svec(const fs::path& csv_path, const fs::path& dat_path,
                const svdlab::SingularVectorEval& ev, const std::vector<std::string>& names) {
  auto csv = open_out(csv_path);
  csv << "index,scale,fr,freq_" << names[static_cast<size_t>(ev.dom1)] << ",freq_"
      << names[static_cast<size_t>(ev.dom2)] << ",freq_others,misclassified\n";
  auto dat = open_out(dat_path);
  for (const auto& r : ev.rows) {
    csv << r.index << "," << fmt(r.scale) << "," << fmt(r.fr) << "," << fmt(r.freq_dom1) << ","
        << fmt(r.freq_dom2) << "," << fmt(r.freq_others) << "," << r.misclassified << "\n";
    dat << r.index << " " << fmt(r.scale) << " " << fmt(r.fr) << " " << fmt(r.freq_dom1) << " "
        << fmt(r.freq_dom2) << " " << fmt(r.freq_others) << "\n";
  }
}

int cmd_svd(const ExperimentConfig& cfg, std::optional<uint64_t> seed_override) {
  const DataBundle data = load_experiment_data(cfg);
  const model::Classifier c = model::Classifier::load(checkpoint_path(cfg));
  const std::vector<std::string> names = cfg.class_names();
  const uint64_t seed = seed_override.value_or(cfg.svd.seed);
  const fs::path dir = fs::path(cfg.out_dir) / "svd";

  dataset::LabeledDataset anchors = data.train;
  if (cfg.svd.matrix_rows > 0 && static_cast<size_t>(cfg.svd.matrix_rows) < anchors.size()) {
    anchors.waves.resize(static_cast<size_t>(cfg.svd.matrix_rows));
    anchors.labels.resize(static_cast<size_t>(cfg.svd.matrix_rows));
  }

  json summary;
  summary["seed"] = seed;
  summary["matrix_rows"] = anchors.size();
  numeric::Rng root(seed);

  std::map<std::string, svdlab::PerturbationMatrix> matrices;
  json lambdas;
  for (const auto& spec : cfg.svd.kinds) {
    const size_t colon = spec.find(':');
    if (colon == std::string::npos) throw InvalidConfig("svd.kinds entries look like kind:repr");
    const svdlab::MatrixKind kind = parse_kind(spec.substr(0, colon));
    const attacks::Domain repr = parse_domain(spec.substr(colon + 1));
    const uint64_t mseed = root.fork(fnv1a64(spec.data(), spec.size())).origin();
    svdlab::PerturbationMatrix m =
        svdlab::build_matrix(anchors, c, kind, repr, mseed, cfg.threads);
    const std::string name = spec.substr(0, colon) + "_" + spec.substr(colon + 1);
    const svdlab::DecayEntry entry = svdlab::decay_of(m, name);

    auto dat = open_out(dir / ("decay_" + name + ".dat"));
    const double smax = entry.sigma.front();
    const double smin = entry.sigma.back();
    const size_t n = entry.sigma.size();
    for (size_t i = 0; i < n; ++i) {
      const double x = static_cast<double>(i) / static_cast<double>(n - 1);
      const double scaled = smax > smin ? (entry.sigma[i] - smin) / (smax - smin) : 0.0;
      const double fitted = entry.fit.rho * std::exp(-x * entry.fit.lambda) + entry.fit.omega;
      dat << i << " " << fmt(entry.sigma[i]) << " " << fmt(scaled) << " " << fmt(fitted) << "\n";
    }
    lambdas[name] = {{"rho", entry.fit.rho},
                     {"lambda", entry.fit.lambda},
                     {"omega", entry.fit.omega},
                     {"rmse", entry.fit.rmse},
                     {"rows", m.rows.rows},
                     {"skipped", m.skipped}};
    matrices.emplace(spec, std::move(m));
  }
  summary["lambda"] = lambdas;
  {
    auto lf = open_out(dir / "decay_lambda.json");
    lf << lambdas.dump(2) << "\n";
  }

  // Subspace and per-vector experiments in the MFCC space.
  const auto df_it = matrices.find("deepfool:mfcc");
  const auto rnd_it = matrices.find("random:mfcc");
  if (df_it != matrices.end() && rnd_it != matrices.end()) {
    const numeric::SvdResult df_svd = numeric::thin_svd(df_it->second.rows);
    const numeric::SvdResult rnd_svd = numeric::thin_svd(rnd_it->second.rows);

    const auto sweep_df = svdlab::subspace_sweep(c, data.test, df_svd.v, cfg.svd.ns,
                                                 cfg.svd.scales, cfg.svd.trials,
                                                 root.fork(101).origin(), cfg.threads);
    const auto sweep_rnd = svdlab::subspace_sweep(c, data.test, rnd_svd.v, cfg.svd.ns,
                                                  cfg.svd.scales, cfg.svd.trials,
                                                  root.fork(102).origin(), cfg.threads);
    write_sweep(dir / "sweep_deepfool.csv", dir / "sweep_deepfool.dat", sweep_df);
    write_sweep(dir / "sweep_random.csv", dir / "sweep_random.dat", sweep_rnd);

    const auto svec_df = svdlab::singular_vector_eval(c, data.test, df_svd.v, cfg.svd.vector_count,
                                                      cfg.svd.vector_scales, std::nullopt,
                                                      cfg.threads);
    // The random comparison is attributed to the same two classes.
    const auto svec_rnd = svdlab::singular_vector_eval(
        c, data.test, rnd_svd.v, cfg.svd.vector_count, cfg.svd.vector_scales,
        std::make_pair(svec_df.dom1, svec_df.dom2), cfg.threads);
    write_svec(dir / "svec_deepfool.csv", dir / "svec_deepfool.dat", svec_df, names);
    write_svec(dir / "svec_random.csv", dir / "svec_random.dat", svec_rnd, names);
    summary["dominant_pair"] = {names[static_cast<size_t>(svec_df.dom1)],
                                names[static_cast<size_t>(svec_df.dom2)]};
  }

  const std::vector<long long> hist =
      svdlab::volume_probe(c, cfg.svd.volume_samples, root.fork(103).origin(), cfg.threads);
  {
    auto vp = open_out(dir / "volume_probe.csv");
    vp << "class_index,class_name,count,share\n";
    long long total = 0;
    for (long long h : hist) total += h;
    int modal = 0;
    for (size_t i = 0; i < hist.size(); ++i) {
      if (hist[i] > hist[static_cast<size_t>(modal)]) modal = static_cast<int>(i);
      vp << i << "," << names[i] << "," << hist[i] << ","
         << fmt(static_cast<double>(hist[i]) / static_cast<double>(total)) << "\n";
    }
    summary["volume_modal_class"] = names[static_cast<size_t>(modal)];
    summary["volume_modal_share"] =
        static_cast<double>(hist[static_cast<size_t>(modal)]) / static_cast<double>(total);
  }

  auto sf = open_out(dir / "summary.json");
  sf << summary.dump(2) << "\n";
  std::cout << "wrote svd reports (" << matrices.size() << " matrices)\n";
  return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
  CLI::App app{"universal-perturbation laboratory for a speech-command classifier"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_override;
  int threads_override = -1;
  uint64_t seed_value = 0;
  bool seed_given = false;
  std::string attack_kind = "uap";
  std::string dom_prefix = "uap_";

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "experiment config file (JSON)")->required();
    cmd->add_option("--out", out_override, "override the output directory");
    cmd->add_option("--threads", threads_override, "worker thread cap");
    cmd->add_option_function<uint64_t>(
        "--seed",
        [&](const uint64_t& v) {
          seed_value = v;
          seed_given = true;
        },
        "override the command's primary seed");
  };

  CLI::App* gen = app.add_subcommand("gen-data", "generate the dataset and write its manifest");
  CLI::App* train = app.add_subcommand("train", "train the classifier and write a checkpoint");
  CLI::App* eval = app.add_subcommand("eval", "evaluate a checkpoint on the test split");
  CLI::App* attack = app.add_subcommand("attack", "generate perturbation artifacts");
  attack->add_option("--kind", attack_kind, "uap | target | deepfool");
  CLI::App* dom = app.add_subcommand("dominance", "dominance analysis of stored perturbations");
  dom->add_option("--prefix", dom_prefix, "artifact name prefix to analyze");
  CLI::App* svd = app.add_subcommand("svd", "perturbation-geometry experiments");
  for (CLI::App* cmd : {gen, train, eval, attack, dom, svd}) add_common(cmd);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    ExperimentConfig cfg = load_config_file(config_path);
    if (!out_override.empty()) cfg.out_dir = out_override;
    if (threads_override >= 0) cfg.threads = threads_override;
    const char* det = std::getenv("LAB_DETERMINISTIC");
    const bool deterministic = det == nullptr || std::string(det) != "0";
    if (cfg.threads < 1) {
      // Hardware detection is the one machine-dependent default; it stays
      // behind LAB_DETERMINISTIC=0.
      cfg.threads = deterministic ? 1 : static_cast<int>(std::thread::hardware_concurrency());
      if (cfg.threads < 1) cfg.threads = 1;
    }

    const std::optional<uint64_t> seed =
        seed_given ? std::optional<uint64_t>(seed_value) : std::nullopt;
    if (gen->parsed()) return cmd_gen_data(cfg);
    if (train->parsed()) return cmd_train(cfg);
    if (eval->parsed()) return cmd_eval(cfg);
    if (attack->parsed()) return cmd_attack(cfg, attack_kind, seed);
    if (dom->parsed()) return cmd_dominance(cfg, dom_prefix);
    if (svd->parsed()) return cmd_svd(cfg, seed);
    std::cerr << "error: no command\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace uaplab::cli
