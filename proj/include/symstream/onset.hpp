#pragma once

// Complex-domain onset detection: STFT, detection function, adaptive median
// threshold and peak picking.

#include <algorithm>
#include <complex>
#include <numbers>
#include <vector>

#include <unsupported/Eigen/FFT>

#include "symstream/audio.hpp"

namespace symstream {

/// Maps a phase to the half-open interval (-pi, pi].
template <typename Scalar>
Scalar princarg(Scalar phi) {
  constexpr Scalar pi = std::numbers::pi_v<Scalar>;
  constexpr Scalar two_pi = 2 * std::numbers::pi_v<Scalar>;
  Scalar r = phi - two_pi * std::ceil((phi - pi) / two_pi);
  // Rounding in the subtraction can land just outside the interval.
  if (r <= -pi) r += two_pi;
  if (r > pi) r -= two_pi;
  return r;
}

/// One-sided spectrum of one analysis frame, K = window/2 + 1 bins.
template <typename Scalar>
struct SpectralFrame {
  Eigen::Array<std::complex<Scalar>, Eigen::Dynamic, 1> bins;
  Index frame_index = 0;

  ArrayX<Scalar> magnitudes() const { return bins.abs(); }
  ArrayX<Scalar> phases() const {
    return bins.arg().unaryExpr([](Scalar p) { return princarg(p); });
  }
};

enum class WindowKind { Hann, Rectangular };

/// Periodic Hann (or flat) analysis window.
template <typename Scalar>
ArrayX<Scalar> make_window(WindowKind kind, Index n) {
  if (kind == WindowKind::Rectangular) return ArrayX<Scalar>::Ones(n);
  const Scalar two_pi = 2 * std::numbers::pi_v<Scalar>;
  return Scalar(0.5) -
         Scalar(0.5) * (two_pi * ArrayX<Scalar>::LinSpaced(n, 0, Scalar(n - 1)) / Scalar(n)).cos();
}

/// Short-time Fourier transform. Each frame is windowed, transformed and
/// divided by the window sum, so a full-scale sinusoid at a bin centre has
/// magnitude 0.5 in that bin.
///
/// Returns an empty sequence when the audio is shorter than one window.
template <typename Scalar>
std::vector<SpectralFrame<Scalar>> stft(const AudioBuffer<Scalar>& audio, Index window_size,
                                        Index hop, WindowKind kind = WindowKind::Hann) {
  if (hop < 1 || window_size < hop) throw InvalidArgument("stft: need window_size >= hop >= 1");
  if (audio.empty()) throw InvalidArgument("stft: empty audio");

  std::vector<SpectralFrame<Scalar>> frames;
  if (audio.size() < window_size) return frames;

  const Index count = (audio.size() - window_size) / hop + 1;
  const ArrayX<Scalar> window = make_window<Scalar>(kind, window_size);
  const Scalar norm = Scalar(1) / window.sum();

  Eigen::FFT<Scalar> fft;
  fft.SetFlag(Eigen::FFT<Scalar>::HalfSpectrum);
  std::vector<Scalar> buffer(static_cast<std::size_t>(window_size));
  std::vector<std::complex<Scalar>> spectrum;

  frames.reserve(static_cast<std::size_t>(count));
  for (Index l = 0; l < count; ++l) {
    Eigen::Map<ArrayX<Scalar>>(buffer.data(), window_size) =
        audio.samples.segment(l * hop, window_size) * window;
    fft.fwd(spectrum, buffer);
    SpectralFrame<Scalar> frame;
    frame.frame_index = l;
    frame.bins = Eigen::Map<const Eigen::Array<std::complex<Scalar>, Eigen::Dynamic, 1>>(
                     spectrum.data(), window_size / 2 + 1) *
                 norm;
    frames.push_back(std::move(frame));
  }
  return frames;
}

/// Per-frame detection values with the frame-to-time mapping.
template <typename Scalar>
struct DetectionSeries {
  ArrayX<Scalar> eta;
  Scalar hop_seconds = 0;
  /// Time of frame 0. Frames are stamped at the start of their window.
  Scalar offset_seconds = 0;

  Scalar frame_time(Index l) const { return offset_seconds + Scalar(l) * hop_seconds; }
};

using OnsetList = std::vector<double>;

/// Unsmoothed complex-domain deviation per frame: sum over bins of
/// |X_k(l) - Xhat_k(l)|, where Xhat keeps the previous magnitude and
/// extrapolates the unwrapped phase linearly. Frames 0 and 1 have no phase
/// history and contribute 0.
template <typename Scalar>
ArrayX<Scalar> spectral_deviation(const std::vector<SpectralFrame<Scalar>>& frames) {
  const Index n = static_cast<Index>(frames.size());
  ArrayX<Scalar> deviation = ArrayX<Scalar>::Zero(n);
  if (n == 0) return deviation;

  const Index bins = frames.front().bins.size();
  ArrayX<Scalar> unwrapped_prev2(bins), unwrapped_prev1(bins), phase_prev(bins);
  for (Index l = 0; l < n; ++l) {
    const auto& x = frames[static_cast<std::size_t>(l)].bins;
    if (x.size() != bins) throw InvalidArgument("spectral_deviation: inconsistent frame sizes");
    const ArrayX<Scalar> phase = frames[static_cast<std::size_t>(l)].phases();
    ArrayX<Scalar> unwrapped(bins);
    if (l == 0) {
      unwrapped = phase;
    } else {
      unwrapped = unwrapped_prev1 +
                  (phase - phase_prev).unaryExpr([](Scalar d) { return princarg(d); });
    }

    if (l >= 2) {
      const auto& prev = frames[static_cast<std::size_t>(l - 1)].bins;
      Scalar sum = 0;
      for (Index k = 0; k < bins; ++k) {
        const Scalar predicted_phase = princarg(2 * unwrapped_prev1(k) - unwrapped_prev2(k));
        const std::complex<Scalar> predicted = std::polar(std::abs(prev(k)), predicted_phase);
        sum += std::abs(x(k) - predicted);
      }
      deviation(l) = sum;
    }

    unwrapped_prev2 = unwrapped_prev1;
    unwrapped_prev1 = unwrapped;
    phase_prev = phase;
  }
  return deviation;
}

/// Onset detection function eta(l): the deviation summed over a centred
/// window of M frames and divided by M. Frames outside the stream count 0.
template <typename Scalar>
DetectionSeries<Scalar> detection_function(const std::vector<SpectralFrame<Scalar>>& frames,
                                           int smoothing, Scalar hop_seconds = 0,
                                           Scalar offset_seconds = 0) {
  if (smoothing < 1 || smoothing % 2 == 0) {
    throw InvalidArgument("detection_function: smoothing length must be odd and >= 1");
  }
  if (frames.size() < 3) throw InvalidArgument("detection_function: need at least 3 frames");

  const ArrayX<Scalar> deviation = spectral_deviation(frames);
  const Index n = deviation.size();
  ArrayX<Scalar> prefix = ArrayX<Scalar>::Zero(n + 1);
  for (Index l = 0; l < n; ++l) prefix(l + 1) = prefix(l) + deviation(l);

  const Index half = smoothing / 2;
  DetectionSeries<Scalar> series;
  series.hop_seconds = hop_seconds;
  series.offset_seconds = offset_seconds;
  series.eta.resize(n);
  for (Index l = 0; l < n; ++l) {
    const Index lo = std::max<Index>(0, l - half);
    const Index hi = std::min<Index>(n - 1, l + half);
    series.eta(l) = std::max(Scalar(0), (prefix(hi + 1) - prefix(lo)) / Scalar(smoothing));
  }
  return series;
}

/// theta(l) = C * median(eta(l), ..., eta(l + P)), truncated at the end of
/// the stream. Even-sized windows use the mean of the two middle values.
template <typename Scalar>
ArrayX<Scalar> adaptive_threshold(const DetectionSeries<Scalar>& series, Scalar sensitivity,
                                  int lookahead) {
  if (sensitivity < 0 || sensitivity > 1) throw InvalidArgument("adaptive_threshold: C must be in [0, 1]");
  if (lookahead < 0) throw InvalidArgument("adaptive_threshold: P must be non-negative");

  const Index n = series.eta.size();
  ArrayX<Scalar> theta(n);
  std::vector<Scalar> window;
  for (Index l = 0; l < n; ++l) {
    const Index hi = std::min<Index>(n - 1, l + lookahead);
    window.assign(series.eta.data() + l, series.eta.data() + hi + 1);
    const std::size_t mid = window.size() / 2;
    std::nth_element(window.begin(), window.begin() + static_cast<std::ptrdiff_t>(mid), window.end());
    Scalar median = window[mid];
    if (window.size() % 2 == 0) {
      const Scalar lower = *std::max_element(window.begin(), window.begin() + static_cast<std::ptrdiff_t>(mid));
      median = (median + lower) / 2;
    }
    theta(l) = sensitivity * median;
  }
  return theta;
}

/// Peak-smoothed excess mu_s(l) = max(sum_{|m| <= W/2} max(eta - theta, 0) - theta_s, 0).
template <typename Scalar>
ArrayX<Scalar> peak_function(const DetectionSeries<Scalar>& series, const ArrayX<Scalar>& theta,
                             int peak_window, Scalar silence) {
  if (peak_window < 1 || peak_window % 2 == 0) throw InvalidArgument("pick_onsets: W must be odd and positive");
  if (theta.size() != series.eta.size()) throw InvalidArgument("pick_onsets: threshold length mismatch");

  const Index n = series.eta.size();
  const ArrayX<Scalar> excess = (series.eta - theta).max(Scalar(0));
  const Index half = peak_window / 2;
  ArrayX<Scalar> mu(n);
  for (Index l = 0; l < n; ++l) {
    const Index lo = std::max<Index>(0, l - half);
    const Index hi = std::min<Index>(n - 1, l + half);
    mu(l) = excess.segment(lo, hi - lo + 1).sum();
  }
  return (mu - silence).max(Scalar(0));
}

/// Times of the strict local maxima of mu_s with mu_s > 0. A plateau that
/// is a local maximum reports its first frame.
template <typename Scalar>
OnsetList pick_onsets(const DetectionSeries<Scalar>& series, const ArrayX<Scalar>& theta,
                      int peak_window, Scalar silence) {
  const ArrayX<Scalar> mu_s = peak_function(series, theta, peak_window, silence);
  const Index n = mu_s.size();
  OnsetList onsets;
  Index l = 0;
  while (l < n) {
    if (!(mu_s(l) > 0)) {
      ++l;
      continue;
    }
    Index r = l;
    while (r + 1 < n && mu_s(r + 1) == mu_s(l)) ++r;
    const bool rises = l == 0 || mu_s(l - 1) < mu_s(l);
    const bool falls = r == n - 1 || mu_s(r + 1) < mu_s(l);
    if (rises && falls) onsets.push_back(static_cast<double>(series.frame_time(l)));
    l = r + 1;
  }
  return onsets;
}

struct OnsetParams {
  Index window = 1024;
  Index hop = 128;
  int smoothing = 33;        // M
  double sensitivity = 0.9;  // C
  int lookahead = 10;        // P
  int peak_window = 11;      // W
  double silence = 0.002;    // theta_s
};

/// Full chain from audio to onset times. Audio shorter than three frames
/// has no analyzable content and yields no onsets.
template <typename Scalar>
OnsetList detect_onsets(const AudioBuffer<Scalar>& audio, const OnsetParams& params = {}) {
  if (audio.empty()) return {};
  const auto frames = stft(audio, params.window, params.hop);
  if (frames.size() < 3) return {};
  const Scalar hop_seconds = Scalar(params.hop) / audio.sample_rate;
  const auto series = detection_function(frames, params.smoothing, hop_seconds, Scalar(0));
  const auto theta = adaptive_threshold(series, Scalar(params.sensitivity), params.lookahead);
  return pick_onsets(series, theta, params.peak_window, Scalar(params.silence));
}

}  // namespace symstream
