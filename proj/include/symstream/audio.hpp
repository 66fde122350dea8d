#pragma once

#include <string>
#include <vector>

#include "symstream/common.hpp"

namespace symstream {

/// Mono signal with its sampling rate. Samples are expected in [-1, 1].
template <typename Scalar>
struct AudioBuffer {
  ArrayX<Scalar> samples;
  Scalar sample_rate = Scalar(44100);

  AudioBuffer() = default;
  AudioBuffer(ArrayX<Scalar> s, Scalar rate) : samples(std::move(s)), sample_rate(rate) {
    validate();
  }

  Index size() const { return samples.size(); }
  bool empty() const { return samples.size() == 0; }
  Scalar duration() const { return Scalar(samples.size()) / sample_rate; }

  void validate() const {
    if (!(sample_rate > Scalar(0))) throw InvalidArgument("AudioBuffer: sample_rate must be positive");
    if (!samples.allFinite()) throw InvalidArgument("AudioBuffer: non-finite sample");
  }
};

enum class WavEncoding { Pcm16, Float32 };

/// Reads a RIFF/WAVE file holding 16-bit PCM or 32-bit float samples.
/// Multichannel input is mixed down by averaging the channels.
AudioBuffer<double> read_wav(const std::string& path);

void write_wav(const std::string& path, const AudioBuffer<double>& audio,
               WavEncoding encoding = WavEncoding::Pcm16);

}  // namespace symstream
