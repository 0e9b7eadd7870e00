#ifndef UAPLAB_SIGNAL_HPP
#define UAPLAB_SIGNAL_HPP

#include <cstdint>
#include <vector>

#include "uaplab/numeric.hpp"

namespace uaplab::signal {

using numeric::Matrix;

enum class WindowKind { Hann, Rectangular };

enum class Repr { Spectrogram, Mfcc };

/// Fixed-length audio clip. Samples are expected in [-1,1] for natural data;
/// attack code may evaluate out-of-range signals and reports them instead of
/// clipping.
struct Waveform {
  std::vector<double> samples;
  int sample_rate_hz = 0;
};

struct PipelineConfig {
  int sample_rate_hz = 0;
  int input_len = 0;
  int frame_len = 0;
  int hop = 0;
  int fft_size = 0;
  int retained_bins = 0;
  int n_mels = 0;
  int n_mfcc = 0;
  double log_floor = 1e-6;
  WindowKind window = WindowKind::Hann;

  int n_frames() const { return (input_len - frame_len) / hop + 1; }
  int feature_cols(Repr repr) const { return repr == Repr::Spectrogram ? retained_bins : n_mfcc; }
  int feature_dim(Repr repr) const { return n_frames() * feature_cols(repr); }
  void validate() const;  // throws InvalidConfig

  /// 16 kHz, 1 s clips, 20 ms frames with 10 ms stride: features 99x257 / 99x40.
  static PipelineConfig paper();
  /// 2 kHz, 1 s clips: features 61x65 / 61x13. Small enough for second-scale runs.
  static PipelineConfig desk();

  bool operator==(const PipelineConfig&) const = default;
};

/// Complex spectra of the windowed frames, before the magnitude stage.
/// Framing, windowing and the DFT are all linear in the waveform, so spectra
/// of a perturbed signal decompose as spectra(x) + spectra(v); batch
/// evaluators exploit this to avoid recomputing the front end per input.
struct FrameSpectra {
  Matrix re;  // n_frames x retained_bins
  Matrix im;
};

/// Precomputed tables (window, DFT basis, mel bank, DCT) for one config.
/// Immutable after construction; safe to share across threads.
class Pipeline {
 public:
  explicit Pipeline(const PipelineConfig& cfg);

  const PipelineConfig& cfg() const { return cfg_; }

  /// Windowed frames, n_frames x frame_len. Throws LengthMismatch.
  Matrix frame(const Waveform& w) const;

  FrameSpectra frame_spectra(const Waveform& w) const;

  /// Smoothed magnitudes sqrt(re^2 + im^2 + eps), n_frames x retained_bins.
  Matrix spectrogram(const Waveform& w) const;
  Matrix spectrogram_from_spectra(const FrameSpectra& s) const;

  /// Log-mel energies decorrelated by an orthonormal DCT-II,
  /// n_frames x n_mfcc.
  Matrix mfcc(const Matrix& spectrogram) const;

  Matrix transform(const Waveform& w, Repr repr) const;
  Matrix features_from_spectra(const FrameSpectra& s, Repr repr) const;

  /// Vector-Jacobian product of transform() at w: maps an upstream gradient
  /// over the feature tensor back to a gradient over the samples.
  std::vector<double> transform_vjp(const Waveform& w, Repr repr, const Matrix& upstream) const;

  const Matrix& mel_bank() const { return mel_bank_; }
  const Matrix& dct() const { return dct_; }

  static constexpr double kMagnitudeEps = 1e-12;

 private:
  PipelineConfig cfg_;
  std::vector<double> window_;
  Matrix dft_cos_;  // retained_bins x frame_len
  Matrix dft_sin_;
  Matrix mel_bank_;  // n_mels x retained_bins
  Matrix dct_;       // n_mfcc x n_mels, orthonormal type-II rows
};

/// Triangular filters on the mel scale from 0 Hz to Nyquist.
Matrix mel_filterbank(const PipelineConfig& cfg);

/// Orthonormal DCT-II matrix, n_mfcc x n_mels.
Matrix dct_matrix(int n_mfcc, int n_mels);

}  // namespace uaplab::signal

#endif  // UAPLAB_SIGNAL_HPP
