#include "symstream/synth.hpp"

#include <algorithm>
#include <numbers>

namespace symstream {

std::vector<SetPartition> enumerate_set_partitions(int n) {
  if (n < 1) throw InvalidArgument("enumerate_set_partitions: n must be at least 1");
  if (n > 6) throw InvalidArgument("enumerate_set_partitions: n must be at most 6");
  std::vector<SetPartition> out;
  std::vector<int> rgs(static_cast<std::size_t>(n), 0);
  auto emit = [&] {
    const int k = *std::max_element(rgs.begin(), rgs.end()) + 1;
    SetPartition p(static_cast<std::size_t>(k));
    for (int i = 0; i < n; ++i) p[static_cast<std::size_t>(rgs[static_cast<std::size_t>(i)])].push_back(i);
    out.push_back(std::move(p));
  };
  // Restricted growth strings: rgs[0] = 0, rgs[i] <= 1 + max(rgs[0..i-1]).
  auto rec = [&](auto&& self, int i, int max_so_far) -> void {
    if (i == n) {
      emit();
      return;
    }
    for (int v = 0; v <= max_so_far + 1; ++v) {
      rgs[static_cast<std::size_t>(i)] = v;
      self(self, i + 1, std::max(max_so_far, v));
    }
  };
  rec(rec, 1, 0);
  return out;
}

int PatternSpec::length() const {
  int n = 0;
  for (const auto& b : partition) n += static_cast<int>(b.size());
  return n;
}

void PatternSpec::validate() const {
  if (repetitions < 1) throw InvalidArgument("PatternSpec: repetitions must be positive");
  const int n = length();
  if (n < 1) throw InvalidArgument("PatternSpec: empty partition");
  std::vector<int> seen(static_cast<std::size_t>(n), 0);
  for (const auto& b : partition) {
    if (b.empty()) throw InvalidArgument("PatternSpec: empty block");
    for (int i : b) {
      if (i < 0 || i >= n || seen[static_cast<std::size_t>(i)]++) throw InvalidArgument("PatternSpec: blocks must cover positions exactly once");
    }
  }
}

std::vector<int> base_pattern(const SetPartition& partition) {
  PatternSpec{partition, 1}.validate();
  int n = 0;
  for (const auto& b : partition) n += static_cast<int>(b.size());
  std::vector<int> out(static_cast<std::size_t>(n));
  for (std::size_t k = 0; k < partition.size(); ++k) {
    for (int i : partition[k]) out[static_cast<std::size_t>(i)] = static_cast<int>(k);
  }
  return out;
}

std::vector<int> generate_sequence(const PatternSpec& spec) {
  spec.validate();
  const auto base = base_pattern(spec.partition);
  std::vector<int> out;
  out.reserve(base.size() * static_cast<std::size_t>(spec.repetitions));
  for (int r = 0; r < spec.repetitions; ++r) out.insert(out.end(), base.begin(), base.end());
  return out;
}

namespace {
void check_probability(double p) {
  if (!(p >= 0 && p <= 0.95)) throw InvalidArgument("noise probability must lie in [0, 0.95]");
}
}  // namespace

std::vector<int> apply_skip_noise(const std::vector<int>& seq, double p, Rng& rng) {
  check_probability(p);
  std::vector<int> out;
  for (int s : seq) {
    if (!rng.bernoulli(p)) out.push_back(s);
  }
  return out;
}

std::vector<int> apply_switch_noise(const std::vector<int>& seq, double p, int n_l, Rng& rng) {
  check_probability(p);
  if (n_l < 1) throw InvalidArgument("apply_switch_noise: alphabet size must be positive");
  std::vector<int> out = seq;
  for (int& s : out) {
    if (rng.bernoulli(p)) s = static_cast<int>(rng.below(static_cast<std::uint64_t>(n_l)));
  }
  return out;
}

std::vector<TimbreSpec> default_timbres(int count) {
  if (count < 1) throw InvalidArgument("default_timbres: count must be positive");
  std::vector<TimbreSpec> out;
  const TimbreKind kinds[] = {TimbreKind::NoiseBurst, TimbreKind::SineBurst, TimbreKind::DampedHarmonic};
  const char* names[] = {"noise", "sine", "harmonic"};
  const double base[] = {0, 880, 220};
  for (int k = 0; k < count; ++k) {
    const int kind = k % 3;
    const int round = k / 3;
    TimbreSpec t;
    t.kind = kinds[kind];
    t.frequency = base[kind] > 0 ? base[kind] * std::pow(1.5, round) : 0;
    t.decay = kind == 0 ? 40.0 + 15.0 * round : 25.0 + 5.0 * round;
    t.name = std::string(names[kind]) + (round > 0 ? std::to_string(round) : "");
    out.push_back(t);
  }
  return out;
}

namespace {

double voice(const TimbreSpec& t, double tau, Rng& noise) {
  const double w = 2 * std::numbers::pi * t.frequency * tau;
  switch (t.kind) {
    case TimbreKind::NoiseBurst: return 2 * noise.uniform() - 1;
    case TimbreKind::SineBurst: return std::sin(w);
    case TimbreKind::DampedHarmonic: {
      double v = 0;
      for (int h = 1; h <= 6; ++h) v += std::sin(h * w) * std::exp(-0.3 * (h - 1)) / h;
      return v;
    }
  }
  return 0;
}

}  // namespace

LabeledAudio synthesize_labeled_audio(const std::vector<SynthEvent>& events, const std::vector<TimbreSpec>& timbres,
                                      const SynthParams& params) {
  if (!(params.sample_rate > 0)) throw InvalidArgument("synthesize: sample rate must be positive");
  if (!(params.event_duration > params.attack && params.attack > 0)) throw InvalidArgument("synthesize: invalid envelope");
  LabeledAudio out;
  out.audio.sample_rate = params.sample_rate;
  if (events.empty()) return out;

  double last = -1;
  for (const auto& e : events) {
    if (!(e.time >= 0) || e.time <= last) throw InvalidArgument("synthesize: event times must be increasing and non-negative");
    auto check = [&](int label) {
      if (label < 0 || static_cast<std::size_t>(label) >= timbres.size()) throw InvalidArgument("synthesize: unknown timbre class");
    };
    check(e.label);
    if (e.blend_label >= 0) check(e.blend_label);
    if (!(e.mix >= 0 && e.mix <= 1)) throw InvalidArgument("synthesize: mix must lie in [0, 1]");
    last = e.time;
  }

  const double sr = params.sample_rate;
  const auto total = static_cast<Index>(std::ceil((last + params.event_duration + params.tail) * sr));
  out.audio.samples = ArrayX<double>::Zero(total);
  Rng noise(params.seed);
  const auto length = static_cast<Index>(std::round(params.event_duration * sr));
  for (const auto& e : events) {
    const auto start = static_cast<Index>(std::round(e.time * sr));
    const TimbreSpec& a = timbres[static_cast<std::size_t>(e.label)];
    const TimbreSpec* b = e.blend_label >= 0 ? &timbres[static_cast<std::size_t>(e.blend_label)] : nullptr;
    for (Index k = 0; k < length && start + k < total; ++k) {
      const double tau = static_cast<double>(k) / sr;
      const double attack = std::min(1.0, tau / params.attack);
      const double fade = std::min(1.0, (params.event_duration - tau) / params.attack);
      auto env = [&](const TimbreSpec& t) { return attack * fade * std::exp(-t.decay * std::max(0.0, tau - params.attack)); };
      double v = (1 - e.mix) * env(a) * voice(a, tau, noise);
      if (b != nullptr) v += e.mix * env(*b) * voice(*b, tau, noise);
      out.audio.samples(start + k) += params.amplitude * v;
    }
    out.annotations.push_back({e.time, timbres[static_cast<std::size_t>(e.mix > 0.5 && b ? e.blend_label : e.label)].name});
  }
  out.audio.samples = out.audio.samples.max(-1.0).min(1.0);
  return out;
}

std::vector<SynthEvent> schedule(const std::vector<int>& labels, double ioi, double start) {
  if (!(ioi > 0)) throw InvalidArgument("schedule: ioi must be positive");
  std::vector<SynthEvent> out;
  for (std::size_t i = 0; i < labels.size(); ++i) out.push_back({start + ioi * static_cast<double>(i), labels[i], -1, 0});
  return out;
}

}  // namespace symstream
