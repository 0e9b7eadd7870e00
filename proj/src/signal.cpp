#include "uaplab/signal.hpp"

#include <cmath>
#include <string>

#include "uaplab/errors.hpp"

namespace uaplab::signal {

void PipelineConfig::validate() const {
  if (sample_rate_hz <= 0) throw InvalidConfig("pipeline: sample_rate_hz must be positive");
  if (input_len <= 0 || frame_len <= 0 || hop <= 0 || fft_size <= 0)
    throw InvalidConfig("pipeline: lengths must be positive");
  if (frame_len > input_len) throw InvalidConfig("pipeline: frame_len exceeds input_len");
  if (retained_bins != fft_size / 2 + 1)
    throw InvalidConfig("pipeline: retained_bins must equal fft_size/2 + 1");
  if (n_mels < 2) throw InvalidConfig("pipeline: n_mels must be >= 2");
  if (n_mels > retained_bins) throw InvalidConfig("pipeline: n_mels exceeds retained_bins");
  if (n_mfcc < 1 || n_mfcc > n_mels) throw InvalidConfig("pipeline: need 1 <= n_mfcc <= n_mels");
  if (log_floor <= 0.0) throw InvalidConfig("pipeline: log_floor must be positive");
  if (n_frames() < 1) throw InvalidConfig("pipeline: config yields no frames");
}

PipelineConfig PipelineConfig::paper() {
  PipelineConfig cfg;
  cfg.sample_rate_hz = 16000;
  cfg.input_len = 16000;
  cfg.frame_len = 320;
  cfg.hop = 160;
  cfg.fft_size = 512;
  cfg.retained_bins = 257;
  cfg.n_mels = 40;
  cfg.n_mfcc = 40;
  return cfg;
}

PipelineConfig PipelineConfig::desk() {
  PipelineConfig cfg;
  cfg.sample_rate_hz = 2000;
  cfg.input_len = 2000;
  cfg.frame_len = 64;
  cfg.hop = 32;
  cfg.fft_size = 128;
  cfg.retained_bins = 65;
  cfg.n_mels = 20;
  cfg.n_mfcc = 13;
  return cfg;
}

namespace {

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

}  // namespace

Matrix mel_filterbank(const PipelineConfig& cfg) {
  cfg.validate();
  const int bins = cfg.retained_bins;
  const double nyquist = cfg.sample_rate_hz / 2.0;
  const double mel_max = hz_to_mel(nyquist);

  // n_mels + 2 points equally spaced on the mel scale, mapped to fractional
  // FFT bin positions.
  std::vector<double> bin_pos(static_cast<size_t>(cfg.n_mels) + 2);
  for (size_t i = 0; i < bin_pos.size(); ++i) {
    const double hz = mel_to_hz(mel_max * static_cast<double>(i) / (cfg.n_mels + 1));
    bin_pos[i] = hz * cfg.fft_size / cfg.sample_rate_hz;
  }

  Matrix bank(cfg.n_mels, bins);
  for (int m = 0; m < cfg.n_mels; ++m) {
    const double left = bin_pos[static_cast<size_t>(m)];
    const double center = bin_pos[static_cast<size_t>(m) + 1];
    const double right = bin_pos[static_cast<size_t>(m) + 2];
    bool any = false;
    for (int b = 0; b < bins; ++b) {
      double w = 0.0;
      if (b > left && b < right) {
        w = (b <= center) ? (b - left) / (center - left) : (right - b) / (right - center);
      }
      if (w > 0.0) any = true;
      bank.at(m, b) = w;
    }
    if (!any) {
      // Triangle narrower than one bin: keep the filter non-degenerate by
      // placing unit weight at the nearest bin to its peak.
      int b = static_cast<int>(std::lround(center));
      b = std::min(std::max(b, 0), bins - 1);
      bank.at(m, b) = 1.0;
    }
  }
  return bank;
}

Matrix dct_matrix(int n_mfcc, int n_mels) {
  if (n_mfcc < 1 || n_mels < 1 || n_mfcc > n_mels) throw InvalidConfig("dct_matrix: bad shape");
  Matrix d(n_mfcc, n_mels);
  const double norm0 = std::sqrt(1.0 / n_mels);
  const double norm = std::sqrt(2.0 / n_mels);
  for (int k = 0; k < n_mfcc; ++k) {
    for (int m = 0; m < n_mels; ++m) {
      d.at(k, m) = (k == 0 ? norm0 : norm) * std::cos(M_PI * k * (2.0 * m + 1.0) / (2.0 * n_mels));
    }
  }
  return d;
}

Pipeline::Pipeline(const PipelineConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  window_.resize(static_cast<size_t>(cfg_.frame_len));
  for (int t = 0; t < cfg_.frame_len; ++t) {
    window_[static_cast<size_t>(t)] =
        cfg_.window == WindowKind::Hann
            ? 0.5 - 0.5 * std::cos(2.0 * M_PI * t / cfg_.frame_len)  // periodic Hann
            : 1.0;
  }
  dft_cos_ = Matrix(cfg_.retained_bins, cfg_.frame_len);
  dft_sin_ = Matrix(cfg_.retained_bins, cfg_.frame_len);
  for (int b = 0; b < cfg_.retained_bins; ++b) {
    for (int t = 0; t < cfg_.frame_len; ++t) {
      const double theta = 2.0 * M_PI * b * t / cfg_.fft_size;
      dft_cos_.at(b, t) = std::cos(theta);
      dft_sin_.at(b, t) = std::sin(theta);
    }
  }
  mel_bank_ = mel_filterbank(cfg_);
  dct_ = dct_matrix(cfg_.n_mfcc, cfg_.n_mels);
}

Matrix Pipeline::frame(const Waveform& w) const {
  if (static_cast<int>(w.samples.size()) != cfg_.input_len)
    throw LengthMismatch("frame: waveform has " + std::to_string(w.samples.size()) +
                         " samples, config expects " + std::to_string(cfg_.input_len));
  const int nf = cfg_.n_frames();
  Matrix out(nf, cfg_.frame_len);
  for (int f = 0; f < nf; ++f) {
    const int off = f * cfg_.hop;
    for (int t = 0; t < cfg_.frame_len; ++t)
      out.at(f, t) = w.samples[static_cast<size_t>(off + t)] * window_[static_cast<size_t>(t)];
  }
  return out;
}

FrameSpectra Pipeline::frame_spectra(const Waveform& w) const {
  const Matrix frames = frame(w);
  const int nf = frames.rows;
  FrameSpectra s{Matrix(nf, cfg_.retained_bins), Matrix(nf, cfg_.retained_bins)};
  // Frames shorter than fft_size are implicitly zero-padded: the DFT basis is
  // evaluated only over the frame_len support.
  for (int f = 0; f < nf; ++f) {
    const double* x = frames.row(f);
    for (int b = 0; b < cfg_.retained_bins; ++b) {
      const double* cs = dft_cos_.row(b);
      const double* sn = dft_sin_.row(b);
      double re = 0.0, im = 0.0;
      for (int t = 0; t < cfg_.frame_len; ++t) {
        re += x[t] * cs[t];
        im -= x[t] * sn[t];
      }
      s.re.at(f, b) = re;
      s.im.at(f, b) = im;
    }
  }
  return s;
}

Matrix Pipeline::spectrogram_from_spectra(const FrameSpectra& s) const {
  Matrix mag(s.re.rows, s.re.cols);
  for (size_t i = 0; i < mag.size(); ++i)
    mag.data[i] = std::sqrt(s.re.data[i] * s.re.data[i] + s.im.data[i] * s.im.data[i] + kMagnitudeEps);
  return mag;
}

Matrix Pipeline::spectrogram(const Waveform& w) const {
  return spectrogram_from_spectra(frame_spectra(w));
}

Matrix Pipeline::mfcc(const Matrix& spec) const {
  if (spec.rows != cfg_.n_frames() || spec.cols != cfg_.retained_bins)
    throw ShapeMismatch("mfcc: spectrogram shape mismatch");
  const int nf = spec.rows;
  Matrix out(nf, cfg_.n_mfcc);
  std::vector<double> logmel(static_cast<size_t>(cfg_.n_mels));
  for (int f = 0; f < nf; ++f) {
    const double* s = spec.row(f);
    for (int m = 0; m < cfg_.n_mels; ++m) {
      const double* bank = mel_bank_.row(m);
      double e = 0.0;
      for (int b = 0; b < cfg_.retained_bins; ++b) e += bank[b] * s[b];
      logmel[static_cast<size_t>(m)] = std::log(e + cfg_.log_floor);
    }
    for (int k = 0; k < cfg_.n_mfcc; ++k) {
      const double* d = dct_.row(k);
      double c = 0.0;
      for (int m = 0; m < cfg_.n_mels; ++m) c += d[m] * logmel[static_cast<size_t>(m)];
      out.at(f, k) = c;
    }
  }
  return out;
}

Matrix Pipeline::transform(const Waveform& w, Repr repr) const {
  const Matrix spec = spectrogram(w);
  return repr == Repr::Spectrogram ? spec : mfcc(spec);
}

Matrix Pipeline::features_from_spectra(const FrameSpectra& s, Repr repr) const {
  const Matrix spec = spectrogram_from_spectra(s);
  return repr == Repr::Spectrogram ? spec : mfcc(spec);
}

std::vector<double> Pipeline::transform_vjp(const Waveform& w, Repr repr, const Matrix& upstream) const {
  const int nf = cfg_.n_frames();
  if (upstream.rows != nf || upstream.cols != cfg_.feature_cols(repr))
    throw ShapeMismatch("transform_vjp: upstream shape mismatch");

  const FrameSpectra spectra = frame_spectra(w);
  const Matrix mag = spectrogram_from_spectra(spectra);

  // d(loss)/d(magnitude), per frame.
  Matrix dmag(nf, cfg_.retained_bins);
  if (repr == Repr::Spectrogram) {
    dmag = upstream;
  } else {
    std::vector<double> mel(static_cast<size_t>(cfg_.n_mels));
    std::vector<double> dlogmel(static_cast<size_t>(cfg_.n_mels));
    for (int f = 0; f < nf; ++f) {
      const double* s = mag.row(f);
      for (int m = 0; m < cfg_.n_mels; ++m) {
        const double* bank = mel_bank_.row(m);
        double e = 0.0;
        for (int b = 0; b < cfg_.retained_bins; ++b) e += bank[b] * s[b];
        mel[static_cast<size_t>(m)] = e;
      }
      const double* up = upstream.row(f);
      for (int m = 0; m < cfg_.n_mels; ++m) {
        double g = 0.0;
        for (int k = 0; k < cfg_.n_mfcc; ++k) g += dct_.at(k, m) * up[k];
        dlogmel[static_cast<size_t>(m)] = g / (mel[static_cast<size_t>(m)] + cfg_.log_floor);
      }
      for (int b = 0; b < cfg_.retained_bins; ++b) {
        double g = 0.0;
        for (int m = 0; m < cfg_.n_mels; ++m) g += mel_bank_.at(m, b) * dlogmel[static_cast<size_t>(m)];
        dmag.at(f, b) = g;
      }
    }
  }

  // Through magnitude smoothing and the DFT back to windowed frames, then
  // overlap-add into the waveform.
  std::vector<double> grad(static_cast<size_t>(cfg_.input_len), 0.0);
  std::vector<double> dre(static_cast<size_t>(cfg_.retained_bins));
  std::vector<double> dim(static_cast<size_t>(cfg_.retained_bins));
  for (int f = 0; f < nf; ++f) {
    for (int b = 0; b < cfg_.retained_bins; ++b) {
      const double g = dmag.at(f, b) / mag.at(f, b);
      dre[static_cast<size_t>(b)] = g * spectra.re.at(f, b);
      dim[static_cast<size_t>(b)] = g * spectra.im.at(f, b);
    }
    const int off = f * cfg_.hop;
    for (int t = 0; t < cfg_.frame_len; ++t) {
      double g = 0.0;
      for (int b = 0; b < cfg_.retained_bins; ++b)
        g += dre[static_cast<size_t>(b)] * dft_cos_.at(b, t) - dim[static_cast<size_t>(b)] * dft_sin_.at(b, t);
      grad[static_cast<size_t>(off + t)] += g * window_[static_cast<size_t>(t)];
    }
  }
  return grad;
}

}  // namespace uaplab::signal
