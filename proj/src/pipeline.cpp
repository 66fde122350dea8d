#include "symstream/pipeline.hpp"

#include <algorithm>
#include <cstdio>
#include <future>
#include <map>
#include <sstream>

#include "symstream/io.hpp"
#include "symstream/metrics.hpp"

namespace symstream {

SequenceModel parse_model(const std::string& name) {
  if (name == "HN" || name == "hn") return SequenceModel::HN;
  if (name == "CB" || name == "cb") return SequenceModel::CB;
  throw InvalidArgument("unknown sequence model '" + name + "' (expected HN or CB)");
}

const char* to_string(SequenceModel model) { return model == SequenceModel::HN ? "HN" : "CB"; }

void PipelineConfig::validate() const {
  if (onset.window < 2 || onset.hop < 1 || onset.hop > onset.window) throw InvalidArgument("config: need window >= hop >= 1");
  if (onset.smoothing < 1 || onset.smoothing % 2 == 0) throw InvalidArgument("config: M must be odd and positive");
  if (!(onset.sensitivity >= 0 && onset.sensitivity <= 1)) throw InvalidArgument("config: C must lie in [0, 1]");
  if (onset.lookahead < 0) throw InvalidArgument("config: P must be non-negative");
  if (onset.peak_window < 1 || onset.peak_window % 2 == 0) throw InvalidArgument("config: W must be odd and positive");
  if (!(onset.silence >= 0)) throw InvalidArgument("config: theta_s must be non-negative");
  if (!(L_ms > 0)) throw InvalidArgument("config: L must be positive");
  if (!(acuity > 0)) throw InvalidArgument("config: acuity must be positive");
  if (!(temporal_acuity > 0)) throw InvalidArgument("config: temporal acuity must be positive");
  if (max_length < 2 || max_length > 12) throw InvalidArgument("config: N must lie in [2, 12]");
  if (!(onset_tolerance > 0) || !(prediction_tolerance > 0)) throw InvalidArgument("config: tolerances must be positive");
}

nlohmann::json PipelineConfig::to_json() const {
  return {{"M", onset.smoothing},
          {"C", onset.sensitivity},
          {"P", onset.lookahead},
          {"W", onset.peak_window},
          {"theta_s", onset.silence},
          {"window", onset.window},
          {"hop", onset.hop},
          {"L", L_ms},
          {"a", acuity},
          {"a_t", temporal_acuity},
          {"model", to_string(model)},
          {"N", max_length},
          {"seed", seed}};
}

nlohmann::json EventRecord::to_json() const {
  auto opt = [](const auto& v) -> nlohmann::json {
    if (v) return *v;
    return nullptr;
  };
  return {{"index", index},
          {"time", opt(time)},
          {"annotated_time", opt(annotated_time)},
          {"symbol", symbol >= 0 ? nlohmann::json(symbol) : nlohmann::json(nullptr)},
          {"predicted_symbol", opt(predicted_symbol)},
          {"predicted_ioi", opt(predicted_ioi)},
          {"predicted_time", opt(predicted_time)},
          {"status", status}};
}

nlohmann::json LoggedEvent::to_json() const {
  std::vector<SymbolId> symbols = event.kind == EventKind::Merged ? event.sources : std::vector<SymbolId>{event.symbol};
  return {{"event_index", event_index}, {"kind", symstream::to_string(event.kind)}, {"symbols", symbols}};
}

namespace {

/// Status of each matched pair under the greedy cluster-to-label mapping.
std::vector<std::string> match_status(const std::vector<std::pair<std::size_t, std::size_t>>& pairs,
                                      const std::vector<SymbolId>& symbols, const std::vector<int>& labels) {
  std::vector<std::string> out;
  if (pairs.empty()) return out;
  std::map<SymbolId, int> col;
  std::map<int, int> row;
  for (auto [i, j] : pairs) {
    col.try_emplace(symbols[i], static_cast<int>(col.size()));
    row.try_emplace(labels[j], static_cast<int>(row.size()));
  }
  ContingencyTable t;
  t.counts.setZero(static_cast<Index>(row.size()), static_cast<Index>(col.size()));
  for (auto [i, j] : pairs) ++t.counts(row[labels[j]], col[symbols[i]]);
  const auto mapping = greedy_label_mapping(t);
  for (auto [i, j] : pairs) {
    auto it = mapping.find(col[symbols[i]]);
    out.push_back(it != mapping.end() && it->second == row[labels[j]] ? "correct" : "wrong-cluster");
  }
  return out;
}

std::vector<Annotation> checked(const std::vector<Annotation>& annotations) {
  for (std::size_t i = 1; i < annotations.size(); ++i) {
    if (!(annotations[i].time > annotations[i - 1].time)) throw InvalidArgument("annotation times must be increasing");
  }
  return annotations;
}

}  // namespace

std::vector<VectorX<double>> describe(const AudioBuffer<double>& audio, const std::vector<double>& onsets,
                                      const PipelineConfig& config) {
  const TimbreExtractor<double> extractor(audio.sample_rate, config.timbre);
  std::vector<VectorX<double>> out;
  out.reserve(onsets.size());
  for (double t : onsets) out.push_back(extractor.descriptor(audio, std::min(t, audio.duration()), config.L_ms));
  return out;
}

ClusteringResult cluster_stream(const std::vector<double>& times, std::vector<VectorX<double>> descriptors,
                                const PipelineConfig& config) {
  config.validate();
  if (times.size() != descriptors.size()) throw InvalidArgument("cluster_stream: size mismatch");
  ClusteringResult r;
  r.tree = ClusterTree<double>(kTimbreDim, config.acuity);
  for (std::size_t i = 0; i < descriptors.size(); ++i) {
    auto inc = r.tree.incorporate(descriptors[i]);
    for (auto& e : inc.events) r.log.push_back({i, std::move(e)});
    r.symbols.push_back(inc.symbol);
    EventRecord rec;
    rec.index = i;
    rec.time = times[i];
    rec.symbol = inc.symbol;
    r.records.push_back(rec);
  }
  r.times = times;
  r.descriptors = std::move(descriptors);
  return r;
}

ClusteringResult run_clustering(const AudioBuffer<double>& audio, const std::vector<Annotation>& annotations,
                                const PipelineConfig& config) {
  config.validate();
  const auto ann = checked(annotations);
  if (ann.size() < 2) throw InvalidArgument("run_clustering: need at least two annotations");
  std::vector<double> times;
  for (const auto& a : ann) times.push_back(a.time);
  auto r = cluster_stream(times, describe(audio, times, config), config);
  const auto labels = encode_labels(ann);
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t i = 0; i < ann.size(); ++i) pairs.emplace_back(i, i);
  const auto status = match_status(pairs, r.symbols, labels);
  for (std::size_t i = 0; i < ann.size(); ++i) {
    r.records[i].annotated_time = ann[i].time;
    r.records[i].status = status[i];
  }
  r.ari = adjusted_rand_index(r.symbols, labels);
  return r;
}

ClusteringResult run_transcription(const AudioBuffer<double>& audio, const std::vector<Annotation>& annotations,
                                   const PipelineConfig& config) {
  config.validate();
  const auto ann = checked(annotations);
  if (audio.empty()) throw InvalidArgument("run_transcription: empty audio");
  const auto onsets = detect_onsets(audio, config.onset);
  if (onsets.empty()) throw InvalidArgument("run_transcription: no onsets detected");
  auto r = cluster_stream(onsets, describe(audio, onsets, config), config);
  const auto labels = encode_labels(ann);
  std::vector<double> ann_times;
  std::vector<TimedSymbol> produced, reference;
  for (std::size_t j = 0; j < ann.size(); ++j) {
    ann_times.push_back(ann[j].time);
    reference.push_back({ann[j].time, labels[j]});
  }
  for (std::size_t i = 0; i < onsets.size(); ++i) produced.push_back({onsets[i], r.symbols[i]});
  const auto pairs = match_times(onsets, ann_times, config.onset_tolerance);
  const auto status = match_status(pairs, r.symbols, labels);
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    r.records[pairs[k].first].annotated_time = ann[pairs[k].second].time;
    r.records[pairs[k].first].status = status[k];
  }
  r.ari = prediction_ari(produced, reference, config.onset_tolerance);
  return r;
}

std::vector<SymbolId> forecast(const std::vector<int>& seq, int n_l, int t, const ExpectationParams& params) {
  if (n_l < 1) throw InvalidArgument("forecast: n_l must be positive");
  if (t < 1 || static_cast<std::size_t>(t) > seq.size()) throw InvalidArgument("forecast: t out of range");
  const int lo = t > params.full_context_factor * n_l ? std::max(0, t - params.window) : 0;
  const std::vector<int> train(seq.begin() + lo, seq.begin() + t);
  const int horizon = params.horizon_factor * n_l;
  std::vector<SymbolId> context = train;
  std::vector<SymbolId> out;
  if (params.model == SequenceModel::HN) {
    PatternTable table(params.max_length);
    for (int s : train) table.observe(s);
    const auto joint = table.joint_probabilities();
    for (int h = 0; h < horizon; ++h) {
      const SymbolId s = predict_next(table, joint, context).symbol;
      out.push_back(s);
      context.push_back(s);
    }
    return out;
  }
  CbParams cp;
  cp.slots = params.max_length;
  ConceptualBoltzmann cb(cp, Rng::derive(params.seed, static_cast<std::uint64_t>(t)).next());
  for (std::size_t k = 0; k < train.size(); ++k) {
    const auto& alpha = cb.alphabet();
    if (std::find(alpha.begin(), alpha.end(), train[k]) == alpha.end()) cb.adapt_structure(StructuralEvent::created(train[k]));
    const std::size_t from = k + 1 > static_cast<std::size_t>(cp.slots) ? k + 1 - static_cast<std::size_t>(cp.slots) : 0;
    cb.train_instance(std::span<const SymbolId>(train.data() + from, k + 1 - from));
  }
  for (int h = 0; h < horizon; ++h) {
    const SymbolId s = cb.predict_next(context);
    out.push_back(s);
    context.push_back(s);
  }
  return out;
}

double expectation_ari(const std::vector<int>& seq, int n_l, int t, const ExpectationParams& params) {
  const int horizon = params.horizon_factor * n_l;
  if (static_cast<std::size_t>(t + horizon) > seq.size()) throw InvalidArgument("expectation_ari: horizon past the end of the sequence");
  const std::vector<int> truth(seq.begin() + t, seq.begin() + t + horizon);
  return adjusted_rand_index(forecast(seq, n_l, t, params), truth);
}

std::vector<CurvePoint> run_expectation(const std::vector<int>& seq, int n_l, const ExpectationParams& params) {
  if (seq.size() < 2) throw InvalidArgument("run_expectation: need at least two symbols");
  std::vector<CurvePoint> curve;
  if (std::all_of(seq.begin(), seq.end(), [&](int s) { return s == seq.front(); })) return curve;
  const int horizon = params.horizon_factor * n_l;
  for (int t = 1; t + horizon <= static_cast<int>(seq.size()); ++t) curve.push_back({t, expectation_ari(seq, n_l, t, params)});
  return curve;
}

OnlinePredictor::OnlinePredictor(const PipelineConfig& config)
    : config_(config),
      tree_(kTimbreDim, config.acuity),
      table_(config.max_length),
      ioi_tree_(1, config.temporal_acuity),
      ioi_table_(config.max_length) {
  config_.validate();
  if (config_.model == SequenceModel::CB) {
    CbParams cp;
    cp.slots = config_.max_length;
    cb_.emplace(cp, config_.seed);
  }
}

void OnlinePredictor::remap_history(std::vector<SymbolId>& history, const StructuralEvent& e) {
  if (e.kind == EventKind::Merged) {
    for (auto& s : history) {
      if (std::find(e.sources.begin(), e.sources.end(), s) != e.sources.end()) s = e.symbol;
    }
  } else if (e.kind == EventKind::Removed) {
    auto last = std::find(history.rbegin(), history.rend(), e.symbol);
    if (last != history.rend()) history.erase(history.begin(), last.base());
  }
}

void OnlinePredictor::apply_symbol_events(const std::vector<StructuralEvent>& events) {
  for (const auto& e : events) {
    if (e.kind == EventKind::Merged) ++merges_emitted_;
    if (cb_) cb_->adapt_structure(e);
    else table_.apply(e);
    if (e.kind == EventKind::Merged) ++merges_applied_;
    remap_history(history_, e);
  }
}

OnlinePredictor::Step OnlinePredictor::step(double time, const VectorX<double>& descriptor) {
  if (last_time_ && !(time > *last_time_)) throw InvalidArgument("OnlinePredictor: event times must be increasing");
  Step out;
  auto inc = tree_.incorporate(descriptor);
  apply_symbol_events(inc.events);
  out.symbol = inc.symbol;
  out.events = std::move(inc.events);
  history_.push_back(inc.symbol);
  if (static_cast<int>(history_.size()) > config_.max_length) history_.erase(history_.begin());
  if (cb_) cb_->train_instance(history_);
  else table_.observe(inc.symbol);

  if (last_time_) {
    VectorX<double> ioi(1);
    ioi(0) = time - *last_time_;
    auto ioi_inc = ioi_tree_.incorporate(ioi);
    for (const auto& e : ioi_inc.events) {
      ioi_table_.apply(e);
      remap_history(ioi_history_, e);
    }
    ioi_history_.push_back(ioi_inc.symbol);
    if (static_cast<int>(ioi_history_.size()) > config_.max_length) ioi_history_.erase(ioi_history_.begin());
    ioi_table_.observe(ioi_inc.symbol);
    out.ioi_symbol = ioi_inc.symbol;
  }
  last_time_ = time;
  ++steps_;

  if (!ioi_table_.empty()) {
    Forecast f;
    f.symbol = cb_ ? cb_->predict_next(history_) : predict_next(table_, history_).symbol;
    f.ioi_symbol = predict_next(ioi_table_, ioi_history_).symbol;
    f.ioi = ioi_tree_.symbol_mean(f.ioi_symbol)(0);
    f.time = time + f.ioi;
    out.next = f;
  }
  return out;
}

std::uint64_t OnlinePredictor::fingerprint() const {
  std::uint64_t h = splitmix64(tree_.fingerprint());
  h = splitmix64(h ^ (cb_ ? cb_->fingerprint() : table_.fingerprint()));
  h = splitmix64(h ^ ioi_tree_.fingerprint());
  h = splitmix64(h ^ ioi_table_.fingerprint());
  for (SymbolId s : history_) h = splitmix64(h ^ static_cast<std::uint64_t>(s));
  for (SymbolId s : ioi_history_) h = splitmix64(h ^ static_cast<std::uint64_t>(s + 1000003));
  return h;
}

PredictionResult predict_stream(const std::vector<double>& times, const std::vector<VectorX<double>>& descriptors,
                                const std::vector<Annotation>& annotations, const PipelineConfig& config) {
  if (times.size() != descriptors.size()) throw InvalidArgument("predict_stream: size mismatch");
  const auto ann = checked(annotations);
  OnlinePredictor predictor(config);
  PredictionResult r;
  r.times = times;
  std::optional<Forecast> pending;
  std::vector<TimedSymbol> predicted;
  std::vector<std::size_t> predicted_record;
  for (std::size_t i = 0; i < times.size(); ++i) {
    const auto step = predictor.step(times[i], descriptors[i]);
    EventRecord rec;
    rec.index = i;
    rec.time = times[i];
    rec.symbol = step.symbol;
    if (pending) {
      rec.predicted_symbol = pending->symbol;
      rec.predicted_ioi = pending->ioi;
      rec.predicted_time = pending->time;
      predicted.push_back({pending->time, pending->symbol});
      predicted_record.push_back(i);
    }
    r.records.push_back(rec);
    r.symbols.push_back(step.symbol);
    pending = step.next;
  }

  const auto labels = encode_labels(ann);
  std::vector<TimedSymbol> reference;
  std::vector<double> ann_times, pred_times;
  for (std::size_t j = 0; j < ann.size(); ++j) {
    reference.push_back({ann[j].time, labels[j]});
    ann_times.push_back(ann[j].time);
  }
  std::vector<SymbolId> pred_symbols;
  for (const auto& p : predicted) {
    pred_times.push_back(p.time);
    pred_symbols.push_back(p.label);
  }
  const auto pairs = match_times(pred_times, ann_times, config.prediction_tolerance);
  const auto status = match_status(pairs, pred_symbols, labels);
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    auto& rec = r.records[predicted_record[pairs[k].first]];
    rec.annotated_time = ann[pairs[k].second].time;
    rec.status = status[k];
  }
  r.ari = predicted.size() + reference.size() >= 2 ? prediction_ari(predicted, reference, config.prediction_tolerance) : 0.0;
  return r;
}

PredictionResult run_prediction(const AudioBuffer<double>& audio, const std::vector<Annotation>& annotations,
                                const PipelineConfig& config) {
  config.validate();
  if (audio.empty()) throw InvalidArgument("run_prediction: empty audio");
  const auto onsets = detect_onsets(audio, config.onset);
  if (onsets.empty()) throw InvalidArgument("run_prediction: no onsets detected");
  return predict_stream(onsets, describe(audio, onsets, config), annotations, config);
}

nlohmann::json CausalityReport::to_json() const {
  return {{"events", events}, {"checkpoints", checkpoints}, {"violations", violations}, {"diverged", diverged}, {"ok", ok()}};
}

CausalityReport audit_causality(const std::vector<double>& times, const std::vector<VectorX<double>>& descriptors,
                                const PipelineConfig& config, std::size_t checkpoints) {
  if (times.size() != descriptors.size()) throw InvalidArgument("audit_causality: size mismatch");
  struct Trace {
    std::vector<std::uint64_t> state;
    std::vector<std::optional<Forecast>> next;
  };
  auto run = [&](const std::vector<double>& ts, const std::vector<VectorX<double>>& xs, std::size_t upto) {
    OnlinePredictor p(config);
    Trace tr;
    for (std::size_t i = 0; i < upto; ++i) {
      tr.next.push_back(p.step(ts[i], xs[i]).next);
      tr.state.push_back(p.fingerprint());
    }
    return tr;
  };
  auto same = [](const std::optional<Forecast>& a, const std::optional<Forecast>& b) {
    if (a.has_value() != b.has_value()) return false;
    return !a || (a->symbol == b->symbol && a->ioi_symbol == b->ioi_symbol && a->ioi == b->ioi && a->time == b->time);
  };

  CausalityReport report;
  report.events = times.size();
  const Trace full = run(times, descriptors, times.size());
  Rng rng(config.seed ^ 0x5eed);
  std::vector<std::size_t> marks;
  for (std::size_t k = 1; k <= checkpoints; ++k) {
    const std::size_t c = k * times.size() / (checkpoints + 1);
    if (c > 0 && (marks.empty() || marks.back() != c)) marks.push_back(c);
  }
  for (std::size_t c : marks) {
    ++report.checkpoints;
    bool ok = true;
    const Trace prefix = run(times, descriptors, c);
    auto scrambled_t = times;
    auto scrambled_x = descriptors;
    // A different but plausible future: shuffled descriptors, redrawn IOIs.
    for (std::size_t i = times.size(); i > c + 1; --i) {
      std::swap(scrambled_x[i - 1], scrambled_x[c + rng.below(i - c)]);
    }
    for (std::size_t i = c; i < times.size(); ++i) {
      scrambled_t[i] = (i == 0 ? 0.0 : scrambled_t[i - 1]) + 0.05 + rng.uniform();
    }
    const Trace future = run(scrambled_t, scrambled_x, times.size());
    for (std::size_t i = 0; i < c; ++i) {
      ok = ok && prefix.state[i] == full.state[i] && future.state[i] == full.state[i];
      ok = ok && same(prefix.next[i], full.next[i]) && same(future.next[i], full.next[i]);
    }
    if (!ok) ++report.violations;
    if (c < times.size() && future.state.back() != full.state.back()) ++report.diverged;
  }
  return report;
}

GridAxis GridAxis::range(std::string name, double start, double stop, double step) {
  if (!(step > 0)) throw InvalidArgument("grid axis step must be positive");
  if (stop < start) throw InvalidArgument("grid axis stop must not precede start");
  GridAxis axis{std::move(name), {}};
  for (int k = 0;; ++k) {
    const double v = start + step * k;
    if (v > stop + step * 1e-3) break;
    axis.values.push_back(v);
  }
  return axis;
}

std::string GridResult::to_csv() const {
  std::ostringstream out;
  out.precision(10);
  out << rows.name << ',' << cols.name << ",ari,best\n";
  for (Index r = 0; r < values.rows(); ++r) {
    for (Index c = 0; c < values.cols(); ++c) {
      out << rows.values[static_cast<std::size_t>(r)] << ',' << cols.values[static_cast<std::size_t>(c)] << ',';
      if (std::isnan(values(r, c))) out << "nan";
      else out << values(r, c);
      out << ',' << (r == best_row && c == best_col ? 1 : 0) << '\n';
    }
  }
  return out.str();
}

GridResult grid_search(GridAxis rows, GridAxis cols, const std::function<double(double, double)>& evaluate,
                       const GridOptions& options) {
  if (rows.values.empty() || cols.values.empty()) throw InvalidArgument("grid_search: empty axis");
  if (options.threads < 1) throw InvalidArgument("grid_search: threads must be positive");
  std::map<std::pair<double, double>, double> cache;
  auto safe_eval = [&](double r, double c) {
    try {
      return evaluate(r, c);
    } catch (const InvalidArgument&) {
      return std::numeric_limits<double>::quiet_NaN();
    }
  };
  auto fill = [&] {
    std::vector<std::pair<double, double>> todo;
    for (double r : rows.values) {
      for (double c : cols.values) {
        if (!cache.count({r, c})) todo.emplace_back(r, c);
      }
    }
    for (std::size_t b = 0; b < todo.size(); b += static_cast<std::size_t>(options.threads)) {
      std::vector<std::future<double>> jobs;
      const std::size_t e = std::min(todo.size(), b + static_cast<std::size_t>(options.threads));
      for (std::size_t k = b; k < e; ++k) {
        jobs.push_back(std::async(options.threads > 1 ? std::launch::async : std::launch::deferred, safe_eval,
                                  todo[k].first, todo[k].second));
      }
      for (std::size_t k = b; k < e; ++k) cache[todo[k]] = jobs[k - b].get();
    }
  };

  GridResult result;
  bool blocked[4] = {false, false, false, false};
  while (true) {
    fill();
    result.values.resize(static_cast<Index>(rows.values.size()), static_cast<Index>(cols.values.size()));
    double best = -std::numeric_limits<double>::infinity();
    bool any = false;
    for (Index r = 0; r < result.values.rows(); ++r) {
      for (Index c = 0; c < result.values.cols(); ++c) {
        const double v = cache[{rows.values[static_cast<std::size_t>(r)], cols.values[static_cast<std::size_t>(c)]}];
        result.values(r, c) = v;
        if (!std::isnan(v) && (!any || v > best)) {
          best = v;
          result.best_row = r;
          result.best_col = c;
          any = true;
        }
      }
    }
    if (!options.extend || result.extensions >= options.max_extensions || !any) break;
    auto grow = [](GridAxis& axis, bool low) {
      if (axis.values.size() < 2) return false;
      if (low) axis.values.insert(axis.values.begin(), 2 * axis.values[0] - axis.values[1]);
      else axis.values.push_back(2 * axis.values.back() - axis.values[axis.values.size() - 2]);
      return true;
    };
    bool grew = false;
    const Index nr = result.values.rows(), nc = result.values.cols();
    if (result.best_row == 0 && !blocked[0]) grew = (blocked[0] = !grow(rows, true), !blocked[0]) || grew;
    if (result.best_row == nr - 1 && !blocked[1]) grew = (blocked[1] = !grow(rows, false), !blocked[1]) || grew;
    if (result.best_col == 0 && !blocked[2]) grew = (blocked[2] = !grow(cols, true), !blocked[2]) || grew;
    if (result.best_col == nc - 1 && !blocked[3]) grew = (blocked[3] = !grow(cols, false), !blocked[3]) || grew;
    if (!grew) break;
    ++result.extensions;
  }
  result.rows = std::move(rows);
  result.cols = std::move(cols);
  return result;
}

}  // namespace symstream
