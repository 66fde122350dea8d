// One line per criterion; exit status is the number of failures.

#include <chrono>
#include <cstdio>
#include <functional>
#include <string>

#include "symstream/hngram.hpp"
#include "symstream/metrics.hpp"
#include "symstream/pipeline.hpp"
#include "symstream/synth.hpp"

using namespace symstream;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void report(int id, const char* name, const std::function<Outcome()>& run) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = run();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::printf("%s [%d] %s: %s (%.2f s)\n", o.pass ? "PASS" : "FAIL", id, name, o.detail.c_str(), secs);
  std::fflush(stdout);
  failures += !o.pass;
}

std::string fmt(const char* f, double a, double b = 0, double c = 0, double d = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

struct Case {
  int n_l;
  SetPartition partition;
};

std::vector<Case> nontrivial_partitions(int lo, int hi) {
  std::vector<Case> out;
  for (int n = lo; n <= hi; ++n) {
    for (auto& p : enumerate_set_partitions(n)) {
      if (p.size() > 1) out.push_back({n, p});
    }
  }
  return out;
}

// ARI from an explicit walk over all index pairs.
double ari_by_pairs(const std::vector<int>& x, const std::vector<int>& y) {
  double both = 0, in_x = 0, in_y = 0, pairs = 0;
  bool agree = true;
  for (std::size_t i = 0; i < x.size(); ++i) {
    for (std::size_t j = i + 1; j < x.size(); ++j) {
      const bool sx = x[i] == x[j], sy = y[i] == y[j];
      both += sx && sy;
      in_x += sx;
      in_y += sy;
      pairs += 1;
      agree = agree && sx == sy;
    }
  }
  const double expected = in_x * in_y / pairs;
  const double max_index = (in_x + in_y) / 2;
  if (max_index == expected) return agree ? 1.0 : 0.0;
  return (both - expected) / (max_index - expected);
}

double late_mean(const std::vector<CurvePoint>& curve, int from) {
  double sum = 0;
  int n = 0;
  for (const auto& p : curve) {
    if (p.t >= from) {
      sum += p.ari;
      ++n;
    }
  }
  return n ? sum / n : 0.0;
}

}  // namespace

int main() {
  report(1, "HN learning rate", [] {
    int curves = 0, points = 0, misses = 0;
    const auto t0 = std::chrono::steady_clock::now();
    for (const auto& c : nontrivial_partitions(2, 5)) {
      const auto seq = generate_sequence(PatternSpec{c.partition, 20});
      ExpectationParams ep;
      for (const auto& p : run_expectation(seq, c.n_l, ep)) {
        if (p.t < 4 * c.n_l) continue;
        ++points;
        misses += p.ari != 1.0;
      }
      ++curves;
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return Outcome{misses == 0 && secs < 10,
                   fmt("%.0f partitions, %.0f scored points from t = 4 n_l, %.0f below ARI 1", curves, points, misses)};
  });

  report(2, "HN noise collapse", [] {
    const auto cases = nontrivial_partitions(2, 5);
    const int runs = static_cast<int>(cases.size());
    std::string detail;
    bool ok = runs >= 50;
    for (int kind = 0; kind < 2; ++kind) {
      std::vector<double> means;
      for (int pi = 0; pi <= 5; ++pi) {
        const double p = pi / 10.0;
        double sum = 0;
        for (int r = 0; r < runs; ++r) {
          const auto& c = cases[static_cast<std::size_t>(r)];
          Rng rng = Rng::derive(7, static_cast<std::uint64_t>(r * 100 + pi));
          auto seq = generate_sequence(PatternSpec{c.partition, 20});
          seq = kind == 0 ? apply_skip_noise(seq, p, rng) : apply_switch_noise(seq, p, c.n_l, rng);
          ExpectationParams ep;
          sum += late_mean(run_expectation(seq, c.n_l, ep), 4 * c.n_l);
        }
        means.push_back(sum / runs);
      }
      ok = ok && std::abs(means.back()) <= 0.1;
      for (std::size_t k = 1; k < means.size(); ++k) ok = ok && means[k] <= means[k - 1] + 0.05;
      detail += kind == 0 ? "skip" : "; switch";
      for (double m : means) detail += fmt(" %.3f", m);
    }
    return Outcome{ok, detail + fmt(" (%.0f runs per level)", runs)};
  });

  report(3, "CB slower than HN", [] {
    bool ok = true;
    std::string detail;
    for (int n_l : {2, 3}) {
      double hn = 0, cb = 0;
      int n = 0;
      for (const auto& c : nontrivial_partitions(n_l, n_l)) {
        const auto seq = generate_sequence(PatternSpec{c.partition, 20});
        for (std::uint64_t seed = 1; seed <= 100; ++seed) {
          ExpectationParams h, b;
          b.model = SequenceModel::CB;
          h.seed = b.seed = seed;
          hn += expectation_ari(seq, n_l, 4 * n_l, h);
          cb += expectation_ari(seq, n_l, 4 * n_l, b);
          ++n;
        }
      }
      hn /= n;
      cb /= n;
      ok = ok && cb < hn && hn - cb > 0.1;
      detail += fmt("n_l=%.0f HN %.3f CB %.3f diff %.3f; ", n_l, hn, cb, hn - cb);
    }
    return Outcome{ok, detail + "100 seeds per partition at 2 repetitions"};
  });

  report(4, "ARI oracle equivalence", [] {
    long pairs = 0, mismatches = 0, self_fail = 0;
    double worst = 0;
    for (int n = 2; n <= 6; ++n) {
      const auto all = enumerate_set_partitions(n);
      std::vector<std::vector<int>> labels;
      for (const auto& p : all) labels.push_back(base_pattern(p));
      for (const auto& x : labels) {
        self_fail += adjusted_rand_index(x, x) != 1.0;
        for (const auto& y : labels) {
          const double err = std::abs(adjusted_rand_index(x, y) - ari_by_pairs(x, y));
          worst = std::max(worst, err);
          mismatches += err > 1e-12;
          ++pairs;
        }
      }
    }
    return Outcome{mismatches == 0 && self_fail == 0,
                   fmt("%.0f pairs over sizes 2..6, max |diff| %.2e, %.0f self-ARI failures", double(pairs), worst,
                       double(self_fail))};
  });

  report(5, "merge count conservation", [] {
    long violations = 0;
    Rng rng(2024);
    for (int trial = 0; trial < 1000; ++trial) {
      const int n_max = 1 + static_cast<int>(rng.below(5));
      const int symbols = 2 + static_cast<int>(rng.below(5));
      const int length = 1 + static_cast<int>(rng.below(60));
      PatternTable t(n_max);
      for (int k = 0; k < length; ++k) t.observe(static_cast<SymbolId>(rng.below(static_cast<std::uint64_t>(symbols))));
      for (int k = 0; k < symbols; ++k) t.add_symbol(k);
      std::vector<long> before;
      for (int n = 1; n <= n_max; ++n) before.push_back(t.sum_counts(n));
      std::vector<SymbolId> sources;
      for (SymbolId s : t.alphabet()) {
        if (rng.bernoulli(0.5)) sources.push_back(s);
      }
      while (sources.size() < 2) {
        const SymbolId s = t.alphabet()[static_cast<std::size_t>(rng.below(t.alphabet().size()))];
        if (std::find(sources.begin(), sources.end(), s) == sources.end()) sources.push_back(s);
      }
      SymbolId survivor = sources.front();
      for (SymbolId s : t.alphabet()) {
        if (std::find(sources.begin(), sources.end(), s) != sources.end()) {
          survivor = s;
          break;
        }
      }
      t.apply_merge(sources, survivor);
      for (int n = 1; n <= n_max; ++n) violations += t.sum_counts(n) != before[static_cast<std::size_t>(n - 1)];
    }
    constexpr SymbolId b = 0, c = 1, d = 2;
    PatternTable ex(3);
    for (int r = 0; r < 3; ++r) {
      for (SymbolId s : {b, b, c}) ex.observe(s);
    }
    for (int r = 0; r < 2; ++r) {
      for (SymbolId s : {b, b, d}) ex.observe(s);
    }
    const long bbc = ex.count_of({b, b, c}), bbd = ex.count_of({b, b, d});
    ex.apply_merge(std::vector<SymbolId>{c, d}, c);
    const long merged = ex.count_of({b, b, c});
    return Outcome{violations == 0 && bbc == 3 && bbd == 2 && merged == 5,
                   fmt("1000 random merges, %.0f level sums changed; bbc %.0f + bbd %.0f -> %.0f", double(violations),
                       double(bbc), double(bbd), double(merged))};
  });

  report(6, "onsets on synthetic tracks", [] {
    double worst = 1;
    int events = 0;
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
      Rng rng(seed);
      std::vector<int> labels;
      for (int i = 0; i < 120; ++i) labels.push_back(static_cast<int>(rng.below(3)));
      SynthParams sp;
      sp.seed = seed;
      const auto track = synthesize_labeled_audio(schedule(labels, 0.4), default_timbres(3), sp);
      std::vector<double> truth;
      for (const auto& a : track.annotations) truth.push_back(a.time);
      const auto score = onset_fmeasure(detect_onsets(track.audio, OnsetParams{}), truth, 0.05);
      worst = std::min(worst, score.f);
      events += static_cast<int>(truth.size());
    }
    return Outcome{worst >= 0.95, fmt("3 tracks, %.0f events, 3 timbres, 0.4 s spacing, min F %.4f", events, worst)};
  });

  report(7, "Cobweb separation and merging", [] {
    const double a = 18.5;
    // Centroids 5a apart: 2.5a along each of four dimensions, spread a/2.
    auto sample = [&](Rng& rng, double centre) {
      VectorX<double> x(kTimbreDim);
      for (Index d = 0; d < kTimbreDim; ++d) x(d) = 0.5 * a * rng.normal() + (d < 4 ? centre : 0.0);
      return x;
    };
    double worst = 1;
    int merged_runs = 0, single_runs = 0;
    const int seeds = 10;
    for (std::uint64_t seed = 1; seed <= seeds; ++seed) {
      Rng rng(seed);
      ClusterTree<double> tree(kTimbreDim, a);
      std::vector<int> labels, symbols;
      for (int i = 0; i < 200; ++i) {
        const int l = static_cast<int>(rng.below(2));
        labels.push_back(l);
        symbols.push_back(tree.incorporate(sample(rng, l * 2.5 * a)).symbol);
      }
      worst = std::min(worst, adjusted_rand_index(symbols, labels));

      ClusterTree<double> fade(kTimbreDim, a);
      int merges = 0;
      for (int i = 0; i < 400; ++i) {
        const double lam = std::clamp((i - 100) / 100.0, 0.0, 1.0);
        const double centre = (i % 2 ? 2.5 * a : 0.0) * (1 - lam) + 1.25 * a * lam;
        for (const auto& e : fade.incorporate(sample(rng, centre)).events) merges += e.kind == EventKind::Merged;
      }
      merged_runs += merges >= 1;
      single_runs += fade.alphabet().size() == 1;
    }
    return Outcome{worst >= 0.95 && merged_runs == seeds && single_runs == seeds,
                   fmt("a = 18.5, 200 events: min ARI %.4f over %.0f seeds; crossfade merged in %.0f, ended with one "
                       "symbol in %.0f",
                       worst, seeds, merged_runs, single_runs)};
  });

  report(8, "online causality audit", [] {
    Rng rng(99);
    std::vector<int> labels;
    std::vector<SynthEvent> events;
    double t = 0.1;
    const std::vector<int> base{0, 1, 0, 2, 1};
    for (int i = 0; i < 500; ++i) {
      const int l = rng.bernoulli(0.1) ? static_cast<int>(rng.below(3)) : base[static_cast<std::size_t>(i % 5)];
      events.push_back({t, l});
      t += (i % 5 == 4) ? 0.5 : 0.3;
    }
    const auto track = synthesize_labeled_audio(events, default_timbres(3));
    std::vector<double> times;
    for (const auto& a : track.annotations) times.push_back(a.time);
    PipelineConfig config;
    const auto descriptors = describe(track.audio, times, config);
    std::string detail;
    bool ok = true;
    for (auto model : {SequenceModel::HN, SequenceModel::CB}) {
      config.model = model;
      const auto r = audit_causality(times, descriptors, config, 10);
      ok = ok && r.ok() && r.events == 500 && r.diverged == r.checkpoints;
      if (!detail.empty()) detail += "; ";
      detail += std::string(to_string(model)) +
                fmt(": %.0f events, %.0f checkpoints, %.0f violations, %.0f scrambled futures diverged", double(r.events),
                    double(r.checkpoints), double(r.violations), double(r.diverged));
    }
    return Outcome{ok, detail};
  });

  return failures;
}
