#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "symstream/io.hpp"
#include "symstream/metrics.hpp"
#include "symstream/pipeline.hpp"

using namespace symstream;

namespace {

LabeledAudio track(const std::vector<int>& labels, double ioi, int classes) {
  return synthesize_labeled_audio(schedule(labels, ioi), default_timbres(classes));
}

std::vector<int> alternate(int n, int classes) {
  std::vector<int> out;
  for (int i = 0; i < n; ++i) out.push_back(i % classes);
  return out;
}

// Two Gaussian sources in descriptor space, 5 apart over four dimensions.
std::pair<std::vector<double>, std::vector<VectorX<double>>> vector_stream(int n, std::uint64_t seed, bool crossfade) {
  Rng rng(seed);
  std::vector<double> times;
  std::vector<VectorX<double>> xs;
  for (int i = 0; i < n; ++i) {
    const double lam = crossfade ? std::clamp((i - 60) / 60.0, 0.0, 1.0) : 0.0;
    const double centre = (i % 2 ? 2.5 : 0.0) * (1 - lam) + 1.25 * lam;
    VectorX<double> x(kTimbreDim);
    for (Index d = 0; d < kTimbreDim; ++d) x(d) = 0.3 * rng.normal() + (d < 4 ? centre : 0.0);
    xs.push_back(x);
    times.push_back(0.5 + 0.4 * i + 0.01 * rng.normal());
  }
  return {times, xs};
}

}  // namespace

TEST_CASE("configuration") {
  PipelineConfig c;
  CHECK(c.L_ms == 150);
  CHECK(c.acuity == 18.5);
  CHECK(c.temporal_acuity == 0.075);
  CHECK(c.max_length == 5);
  c.validate();
  auto bad = c;
  bad.acuity = 0;
  CHECK_THROWS_AS(bad.validate(), InvalidArgument);
  bad = c;
  bad.onset.smoothing = 32;
  CHECK_THROWS_AS(bad.validate(), InvalidArgument);
  bad = c;
  bad.L_ms = -1;
  CHECK_THROWS_AS(bad.validate(), InvalidArgument);
  CHECK(parse_model("CB") == SequenceModel::CB);
  CHECK_THROWS_AS(parse_model("xyz"), InvalidArgument);
  CHECK(c.to_json()["model"] == "HN");
}

TEST_CASE("transcription of a two-class track") {
  const auto t = track(alternate(40, 2), 0.4, 2);
  const auto r = run_transcription(t.audio, t.annotations, PipelineConfig{});
  CHECK(r.symbols.size() == 40);
  CHECK(r.ari >= 0.9);
  std::size_t correct = 0;
  for (const auto& rec : r.records) correct += rec.status == "correct";
  CHECK(correct >= 38);
  REQUIRE(!r.log.empty());
  CHECK(r.log[0].to_json()["kind"] == "created");
  CHECK_THROWS_AS(run_transcription(AudioBuffer<double>{}, t.annotations, PipelineConfig{}), InvalidArgument);
}

TEST_CASE("clustering at annotated onsets") {
  const auto t = track(alternate(30, 3), 0.4, 3);
  const auto r = run_clustering(t.audio, t.annotations, PipelineConfig{});
  CHECK(r.ari == doctest::Approx(1.0));
  CHECK(r.tree.alphabet().size() == 3);
}

TEST_CASE("expectation curve") {
  const auto seq = generate_sequence(PatternSpec{{{0}, {1}}, 20});
  const auto curve = run_expectation(seq, 2, ExpectationParams{});
  REQUIRE(!curve.empty());
  for (const auto& p : curve) {
    if (p.t >= 4) CHECK(p.ari == 1.0);
  }
  CHECK(run_expectation(std::vector<int>(30, 0), 1, ExpectationParams{}).empty());
  CHECK_THROWS_AS(run_expectation(std::vector<int>{0}, 1, ExpectationParams{}), InvalidArgument);
  CHECK(forecast(seq, 2, 4, ExpectationParams{}) == std::vector<SymbolId>{0, 1, 0, 1, 0, 1, 0, 1});
}

TEST_CASE("CB learns more slowly than HN") {
  const auto seq = generate_sequence(PatternSpec{{{0}, {1}, {2}}, 20});
  ExpectationParams hn;
  ExpectationParams cb;
  cb.model = SequenceModel::CB;
  double hn_sum = 0, cb_sum = 0;
  for (std::uint64_t s = 1; s <= 100; ++s) {
    hn.seed = cb.seed = s;
    hn_sum += expectation_ari(seq, 3, 6, hn);
    cb_sum += expectation_ari(seq, 3, 6, cb);
  }
  CHECK(cb_sum / 100 < hn_sum / 100);
}

TEST_CASE("online prediction of a metronomic alternation") {
  const auto t = track(alternate(60, 2), 0.4, 2);
  const auto r = run_prediction(t.audio, t.annotations, PipelineConfig{});
  REQUIRE(r.records.size() == 60);
  CHECK(r.records[0].status == "unmatched");
  CHECK_FALSE(r.records[0].predicted_symbol.has_value());
  for (std::size_t i = 10; i < r.records.size(); ++i) {
    REQUIRE(r.records[i].predicted_time.has_value());
    CHECK(std::abs(*r.records[i].predicted_time - t.annotations[i].time) < 0.15);
    CHECK(*r.records[i].predicted_ioi == doctest::Approx(0.4).epsilon(0.05));
  }
  std::vector<int> predicted, truth;
  for (std::size_t i = 10; i < r.records.size(); ++i) {
    predicted.push_back(*r.records[i].predicted_symbol);
    truth.push_back(static_cast<int>(i % 2));
  }
  CHECK(adjusted_rand_index(predicted, truth) >= 0.8);
  CHECK(r.ari >= 0.8);
  const auto j = r.records[20].to_json();
  for (const char* key : {"index", "time", "annotated_time", "symbol", "predicted_symbol", "predicted_ioi",
                          "predicted_time", "status"}) {
    CHECK(j.contains(key));
  }
}

TEST_CASE("every merge reaches the sequence model") {
  auto [times, xs] = vector_stream(240, 3, true);
  for (auto model : {SequenceModel::HN, SequenceModel::CB}) {
    PipelineConfig c;
    c.acuity = 1.0;
    c.model = model;
    OnlinePredictor p(c);
    for (std::size_t i = 0; i < xs.size(); ++i) p.step(times[i], xs[i]);
    CHECK(p.merges_emitted() >= 1);
    CHECK(p.merges_applied() == p.merges_emitted());
    CHECK(p.tree().alphabet().size() == 1);
    if (model == SequenceModel::HN) CHECK(p.table().alphabet() == p.tree().alphabet());
    else CHECK(p.net()->alphabet() == p.tree().alphabet());
  }
}

TEST_CASE("online loop rejects time going backwards") {
  PipelineConfig c;
  OnlinePredictor p(c);
  p.step(1.0, VectorX<double>::Zero(kTimbreDim));
  CHECK_THROWS_AS(p.step(0.5, VectorX<double>::Zero(kTimbreDim)), InvalidArgument);
}

TEST_CASE("causality audit") {
  auto [times, xs] = vector_stream(80, 5, false);
  PipelineConfig c;
  c.acuity = 1.0;
  const auto report = audit_causality(times, xs, c, 4);
  CHECK(report.checkpoints == 4);
  CHECK(report.ok());
  CHECK(report.diverged == 4);
  CHECK(report.to_json()["violations"] == 0);
  c.model = SequenceModel::CB;
  CHECK(audit_causality(times, xs, c, 3).ok());
}

TEST_CASE("grid search") {
  const auto one = grid_search(GridAxis{"L", {150}}, GridAxis{"a", {18.5}}, [](double, double) { return 0.3; });
  CHECK(one.best() == 0.3);
  CHECK(one.values.size() == 1);

  const auto axis = GridAxis::range("L", 50, 175, 25);
  CHECK(axis.values == std::vector<double>{50, 75, 100, 125, 150, 175});
  CHECK(GridAxis::range("a", 15, 19, 0.5).values.size() == 9);
  CHECK_THROWS_AS(GridAxis::range("a", 1, 0, 0.5), InvalidArgument);

  auto surface = [](double l, double a) { return -std::abs(l - 125) - 10 * std::abs(a - 17); };
  const auto g = grid_search(axis, GridAxis::range("a", 15, 19, 0.5), surface);
  CHECK(g.rows.values[static_cast<std::size_t>(g.best_row)] == 125);
  CHECK(g.cols.values[static_cast<std::size_t>(g.best_col)] == 17);

  // A peak beyond the border is reached by extension.
  GridOptions opt;
  opt.extend = true;
  auto far = [](double l, double a) { return -std::abs(l - 225) - std::abs(a - 16); };
  const auto ext = grid_search(axis, GridAxis::range("a", 15, 19, 0.5), far, opt);
  CHECK(ext.extensions == 3);
  CHECK(ext.rows.values.back() == 250);
  CHECK(ext.rows.values[static_cast<std::size_t>(ext.best_row)] == 225);
  opt.max_extensions = 1;
  CHECK(grid_search(axis, GridAxis::range("a", 15, 19, 0.5), far, opt).extensions == 1);

  auto picky = [](double l, double) {
    if (l < 60) throw InvalidArgument("too short");
    return l;
  };
  GridOptions threaded;
  threaded.threads = 3;
  const auto pk = grid_search(axis, GridAxis{"a", {1, 2}}, picky, threaded);
  CHECK(std::isnan(pk.values(0, 0)));
  CHECK(pk.best() == 175);
  const auto csv = pk.to_csv();
  CHECK(csv.rfind("L,a,ari,best\n", 0) == 0);
  CHECK(csv.find("nan") != std::string::npos);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 13);
}
