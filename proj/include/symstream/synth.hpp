#pragma once

// Synthetic symbol sequences and labeled audio.

#include <string>
#include <vector>

#include "symstream/audio.hpp"
#include "symstream/common.hpp"

namespace symstream {

/// Blocks of 0-based positions, each sorted, blocks ordered by minimum.
using SetPartition = std::vector<std::vector<int>>;

/// Every partition of {0..n-1} in restricted-growth order; 1 <= n <= 6.
std::vector<SetPartition> enumerate_set_partitions(int n);

struct PatternSpec {
  SetPartition partition;
  int repetitions = 20;

  int length() const;
  int symbols() const { return static_cast<int>(partition.size()); }
  void validate() const;
};

/// Position k gets the index of its block.
std::vector<int> base_pattern(const SetPartition& partition);
std::vector<int> generate_sequence(const PatternSpec& spec);

std::vector<int> apply_skip_noise(const std::vector<int>& seq, double p, Rng& rng);
/// Replacement is uniform over all n_l symbols, so it may redraw the
/// original.
std::vector<int> apply_switch_noise(const std::vector<int>& seq, double p, int n_l, Rng& rng);

enum class TimbreKind { NoiseBurst, SineBurst, DampedHarmonic };

struct TimbreSpec {
  TimbreKind kind = TimbreKind::SineBurst;
  double frequency = 440;
  double decay = 25;
  std::string name;
};

/// Classes 0, 1, 2 are a noise burst, a sine burst and a damped harmonic
/// tone; further classes cycle the kinds at other pitches.
std::vector<TimbreSpec> default_timbres(int count = 3);

struct SynthEvent {
  double time = 0;
  int label = 0;
  /// Optional blend toward another class: (1 - mix) * label + mix * other.
  int blend_label = -1;
  double mix = 0;
};

struct Annotation {
  double time = 0;
  std::string label;
};

struct LabeledAudio {
  AudioBuffer<double> audio;
  std::vector<Annotation> annotations;
};

struct SynthParams {
  double sample_rate = 44100;
  double event_duration = 0.3;
  double attack = 0.01;
  double amplitude = 0.5;
  double tail = 0.5;
  std::uint64_t seed = 1;
};

LabeledAudio synthesize_labeled_audio(const std::vector<SynthEvent>& events, const std::vector<TimbreSpec>& timbres,
                                      const SynthParams& params = {});

/// Events at start, start + ioi, ... labeled by the sequence.
std::vector<SynthEvent> schedule(const std::vector<int>& labels, double ioi, double start = 0.1);

}  // namespace symstream
