#pragma once

// MFCC-based timbre descriptors: 13 cepstral coefficients per frame, each
// summarised over the frames after an onset by its first 4 temporal DCT
// coefficients.

#include <numbers>
#include <string>
#include <vector>

#include "symstream/onset.hpp"

namespace symstream {

inline constexpr Index kMfccCount = 13;
inline constexpr Index kTemporalCount = 4;
inline constexpr Index kTimbreDim = kMfccCount * kTemporalCount;

/// Element 4*m + d holds temporal DCT coefficient d of MFCC m.
template <typename Scalar>
using TimbreVector = Eigen::Matrix<Scalar, kTimbreDim, 1>;

/// Rows of the orthonormal DCT-II matrix of size n, first `keep` rows.
template <typename Scalar>
MatrixX<Scalar> dct2_matrix(Index keep, Index n) {
  MatrixX<Scalar> m(keep, n);
  const Scalar pi = std::numbers::pi_v<Scalar>;
  for (Index k = 0; k < keep; ++k) {
    const Scalar scale = std::sqrt((k == 0 ? Scalar(1) : Scalar(2)) / Scalar(n));
    for (Index i = 0; i < n; ++i) m(k, i) = scale * std::cos(pi * Scalar(k) * (2 * Scalar(i) + 1) / (2 * Scalar(n)));
  }
  return m;
}

inline double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
inline double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

/// Triangular filters equally spaced on the mel scale. Each filter's
/// weights sum to one, so a flat power spectrum gives equal energies.
template <typename Scalar>
class MelFilterbank {
 public:
  MelFilterbank(Index n_mels, Index fft_size, Scalar sample_rate, Scalar fmin = Scalar(20),
                Scalar fmax = Scalar(-1)) {
    if (n_mels < 1 || fft_size < 2) throw InvalidArgument("MelFilterbank: bad size");
    if (fmax <= 0) fmax = sample_rate / 2;
    const Index bins = fft_size / 2 + 1;
    weights_ = MatrixX<Scalar>::Zero(n_mels, bins);
    const double lo = hz_to_mel(static_cast<double>(fmin));
    const double hi = hz_to_mel(static_cast<double>(fmax));
    std::vector<double> edges(static_cast<std::size_t>(n_mels + 2));
    for (Index i = 0; i < n_mels + 2; ++i) {
      edges[static_cast<std::size_t>(i)] = mel_to_hz(lo + (hi - lo) * double(i) / double(n_mels + 1));
    }
    const double bin_hz = static_cast<double>(sample_rate) / double(fft_size);
    for (Index m = 0; m < n_mels; ++m) {
      const double left = edges[static_cast<std::size_t>(m)];
      const double centre = edges[static_cast<std::size_t>(m + 1)];
      const double right = edges[static_cast<std::size_t>(m + 2)];
      for (Index k = 0; k < bins; ++k) {
        const double f = double(k) * bin_hz;
        double w = 0.0;
        if (f > left && f <= centre) w = (f - left) / (centre - left);
        else if (f > centre && f < right) w = (right - f) / (right - centre);
        weights_(m, k) = Scalar(w);
      }
      const Scalar total = weights_.row(m).sum();
      if (total > 0) {
        weights_.row(m) /= total;
      } else {
        // Filter narrower than one bin: take the nearest bin.
        const Index k = std::min<Index>(bins - 1, static_cast<Index>(std::lround(centre / bin_hz)));
        weights_(m, k) = 1;
      }
    }
  }

  Index size() const { return weights_.rows(); }
  Index bins() const { return weights_.cols(); }
  const MatrixX<Scalar>& weights() const { return weights_; }

  /// Filter energies of a power spectrum.
  VectorX<Scalar> energies(const ArrayX<Scalar>& power) const {
    if (power.size() != bins()) throw InvalidArgument("MelFilterbank: spectrum size mismatch");
    return weights_ * power.matrix();
  }

 private:
  MatrixX<Scalar> weights_;
};

inline constexpr double kLogFloor = 1e-10;

/// First n_coeffs MFCCs of one frame: mel energies of |X|^2, natural log
/// with floor, orthonormal DCT-II.
template <typename Scalar>
VectorX<Scalar> mfcc_frame(const MelFilterbank<Scalar>& bank, const SpectralFrame<Scalar>& frame,
                           Index n_coeffs = kMfccCount, Scalar floor = Scalar(kLogFloor)) {
  if (n_coeffs < 1 || n_coeffs > bank.size()) throw InvalidArgument("mfcc_frame: bad coefficient count");
  const VectorX<Scalar> log_energy =
      bank.energies(frame.bins.abs2()).array().max(floor).log().matrix();
  return dct2_matrix<Scalar>(n_coeffs, bank.size()) * log_energy;
}

struct TimbreParams {
  Index window = 1024;
  Index hop = 128;
  Index n_mels = 40;
  double fmin = 20.0;
};

/// Computes timbre descriptors for onsets of one signal. Holds the
/// filterbank so repeated calls share it; const methods are thread-safe.
template <typename Scalar>
class TimbreExtractor {
 public:
  TimbreExtractor(Scalar sample_rate, TimbreParams params = {})
      : params_(params),
        sample_rate_(sample_rate),
        bank_(params.n_mels, params.window, sample_rate, Scalar(params.fmin)),
        cepstral_(dct2_matrix<Scalar>(kMfccCount, params.n_mels)) {}

  const TimbreParams& params() const { return params_; }
  const MelFilterbank<Scalar>& filterbank() const { return bank_; }

  /// MFCC matrix (13 x F) of the frames covering [onset, onset + L).
  /// Samples past the end of the audio, and past L when L is shorter than
  /// one window, read as zero.
  MatrixX<Scalar> mfcc_frames(const AudioBuffer<Scalar>& audio, Scalar onset_seconds,
                              Scalar length_ms) const {
    if (audio.sample_rate != sample_rate_) throw InvalidArgument("TimbreExtractor: sample rate mismatch");
    if (!(length_ms > 0)) throw InvalidArgument("timbre_descriptor: L must be positive");
    if (onset_seconds < 0 || onset_seconds > audio.duration()) {
      throw InvalidArgument("timbre_descriptor: onset outside audio");
    }
    const Index start = std::min<Index>(audio.size(), static_cast<Index>(std::lround(onset_seconds * sample_rate_)));
    const Index length = std::max<Index>(1, static_cast<Index>(std::lround(length_ms / 1000 * sample_rate_)));
    const Index available = std::min<Index>(length, audio.size() - start);

    AudioBuffer<Scalar> segment;
    segment.sample_rate = sample_rate_;
    segment.samples = ArrayX<Scalar>::Zero(std::max<Index>(length, params_.window));
    if (available > 0) segment.samples.head(available) = audio.samples.segment(start, available);

    const auto frames = stft(segment, params_.window, params_.hop);
    MatrixX<Scalar> coeffs(kMfccCount, static_cast<Index>(frames.size()));
    for (std::size_t f = 0; f < frames.size(); ++f) {
      const VectorX<Scalar> log_energy =
          bank_.energies(frames[f].bins.abs2()).array().max(Scalar(kLogFloor)).log().matrix();
      coeffs.col(static_cast<Index>(f)) = cepstral_ * log_energy;
    }
    return coeffs;
  }

  TimbreVector<Scalar> descriptor(const AudioBuffer<Scalar>& audio, Scalar onset_seconds,
                                  Scalar length_ms) const {
    const MatrixX<Scalar> coeffs = mfcc_frames(audio, onset_seconds, length_ms);
    const Index frames = std::max<Index>(coeffs.cols(), kTemporalCount);
    MatrixX<Scalar> series = MatrixX<Scalar>::Zero(kMfccCount, frames);
    series.leftCols(coeffs.cols()) = coeffs;
    // (13 x F) * (F x 4): row m holds the temporal DCT of MFCC m.
    const MatrixX<Scalar> temporal = series * dct2_matrix<Scalar>(kTemporalCount, frames).transpose();
    TimbreVector<Scalar> out;
    for (Index m = 0; m < kMfccCount; ++m) {
      for (Index d = 0; d < kTemporalCount; ++d) out(kTemporalCount * m + d) = temporal(m, d);
    }
    return out;
  }

 private:
  TimbreParams params_;
  Scalar sample_rate_;
  MelFilterbank<Scalar> bank_;
  MatrixX<Scalar> cepstral_;
};

template <typename Scalar>
TimbreVector<Scalar> timbre_descriptor(const AudioBuffer<Scalar>& audio, Scalar onset_seconds,
                                       Scalar length_ms, const TimbreParams& params = {}) {
  return TimbreExtractor<Scalar>(audio.sample_rate, params).descriptor(audio, onset_seconds, length_ms);
}

/// Interval between onset `index` and its predecessor.
inline double ioi_feature(const OnsetList& onsets, std::size_t index) {
  if (index == 0) throw InvalidArgument("ioi_feature: index 0 has no predecessor");
  if (index >= onsets.size()) throw InvalidArgument("ioi_feature: index out of range");
  const double ioi = onsets[index] - onsets[index - 1];
  if (!(ioi > 0)) throw InvalidArgument("ioi_feature: onsets must be strictly increasing");
  return ioi;
}

/// Column names for descriptor CSV dumps: mfcc{m}_dct{d} in element order.
inline std::vector<std::string> timbre_column_names() {
  std::vector<std::string> names;
  for (Index m = 0; m < kMfccCount; ++m) {
    for (Index d = 0; d < kTemporalCount; ++d) {
      names.push_back("mfcc" + std::to_string(m) + "_dct" + std::to_string(d));
    }
  }
  return names;
}

}  // namespace symstream
