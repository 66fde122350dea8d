#pragma once

// Audio -> onsets -> timbre -> symbols -> forecasts, plus the evaluation
// protocols and parameter grids built on that chain.

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "symstream/audio.hpp"
#include "symstream/cboltzmann.hpp"
#include "symstream/cobweb.hpp"
#include "symstream/hngram.hpp"
#include "symstream/onset.hpp"
#include "symstream/synth.hpp"
#include "symstream/timbre.hpp"

namespace symstream {

enum class SequenceModel { HN, CB };

SequenceModel parse_model(const std::string& name);
const char* to_string(SequenceModel model);

struct PipelineConfig {
  OnsetParams onset;
  TimbreParams timbre;
  double L_ms = 150;
  double acuity = 18.5;
  double temporal_acuity = 0.075;
  SequenceModel model = SequenceModel::HN;
  int max_length = 5;
  std::uint64_t seed = 1;
  double onset_tolerance = 0.05;
  double prediction_tolerance = 0.15;

  void validate() const;
  nlohmann::json to_json() const;
};

struct EventRecord {
  std::size_t index = 0;
  std::optional<double> time;
  std::optional<double> annotated_time;
  SymbolId symbol = -1;
  std::optional<SymbolId> predicted_symbol;
  std::optional<double> predicted_ioi;
  std::optional<double> predicted_time;
  /// correct, wrong-cluster or unmatched.
  std::string status = "unmatched";

  nlohmann::json to_json() const;
};

/// One row of the structural event log.
struct LoggedEvent {
  std::size_t event_index = 0;
  StructuralEvent event;
  nlohmann::json to_json() const;
};

struct ClusteringResult {
  std::vector<double> times;
  std::vector<VectorX<double>> descriptors;
  std::vector<SymbolId> symbols;
  std::vector<LoggedEvent> log;
  ClusterTree<double> tree{kTimbreDim, 1.0};
  std::vector<EventRecord> records;
  double ari = 0;
};

/// Descriptors at given onsets.
std::vector<VectorX<double>> describe(const AudioBuffer<double>& audio, const std::vector<double>& onsets,
                                      const PipelineConfig& config);

/// Clusters descriptors in stream order.
ClusteringResult cluster_stream(const std::vector<double>& times, std::vector<VectorX<double>> descriptors,
                                const PipelineConfig& config);

/// Clustering at the annotated onsets, scored against their labels.
ClusteringResult run_clustering(const AudioBuffer<double>& audio, const std::vector<Annotation>& annotations,
                                const PipelineConfig& config);

/// Detected onsets through clustering; events are matched to annotations
/// within the onset tolerance before scoring.
ClusteringResult run_transcription(const AudioBuffer<double>& audio, const std::vector<Annotation>& annotations,
                                   const PipelineConfig& config);

struct ExpectationParams {
  SequenceModel model = SequenceModel::HN;
  int max_length = 5;
  /// Context once t exceeds full_context_factor * n_l.
  int window = 12;
  int full_context_factor = 5;
  int horizon_factor = 4;
  std::uint64_t seed = 1;
};

struct CurvePoint {
  int t = 0;
  double ari = 0;
};

/// Greedy forecast of horizon_factor * n_l symbols after the first t.
std::vector<SymbolId> forecast(const std::vector<int>& seq, int n_l, int t, const ExpectationParams& params);
double expectation_ari(const std::vector<int>& seq, int n_l, int t, const ExpectationParams& params);
/// ARI for every t with a full ground-truth horizon. Sequences with a
/// single symbol are not scored and give an empty curve.
std::vector<CurvePoint> run_expectation(const std::vector<int>& seq, int n_l, const ExpectationParams& params);

struct Forecast {
  SymbolId symbol = -1;
  SymbolId ioi_symbol = -1;
  double ioi = 0;
  double time = 0;
};

/// The online loop. Each step consumes one event and forecasts the next;
/// nothing else feeds the models.
class OnlinePredictor {
 public:
  explicit OnlinePredictor(const PipelineConfig& config);

  struct Step {
    SymbolId symbol = -1;
    std::vector<StructuralEvent> events;
    SymbolId ioi_symbol = -1;
    std::optional<Forecast> next;
  };

  Step step(double time, const VectorX<double>& descriptor);
  std::uint64_t fingerprint() const;
  std::size_t steps() const { return steps_; }
  std::size_t merges_emitted() const { return merges_emitted_; }
  std::size_t merges_applied() const { return merges_applied_; }
  const ClusterTree<double>& tree() const { return tree_; }
  const PatternTable& table() const { return table_; }
  const ConceptualBoltzmann* net() const { return cb_ ? &*cb_ : nullptr; }

 private:
  void apply_symbol_events(const std::vector<StructuralEvent>& events);
  static void remap_history(std::vector<SymbolId>& history, const StructuralEvent& e);

  PipelineConfig config_;
  ClusterTree<double> tree_;
  PatternTable table_;
  std::optional<ConceptualBoltzmann> cb_;
  ClusterTree<double> ioi_tree_;
  PatternTable ioi_table_;
  std::vector<SymbolId> history_;
  std::vector<SymbolId> ioi_history_;
  std::optional<double> last_time_;
  std::size_t steps_ = 0;
  std::size_t merges_emitted_ = 0;
  std::size_t merges_applied_ = 0;
};

struct PredictionResult {
  std::vector<double> times;
  std::vector<SymbolId> symbols;
  std::vector<EventRecord> records;
  double ari = 0;
};

/// Runs the online loop over given event times and descriptors and scores
/// the forecasts against annotations.
PredictionResult predict_stream(const std::vector<double>& times, const std::vector<VectorX<double>>& descriptors,
                                const std::vector<Annotation>& annotations, const PipelineConfig& config);
PredictionResult run_prediction(const AudioBuffer<double>& audio, const std::vector<Annotation>& annotations,
                                const PipelineConfig& config);

struct CausalityReport {
  std::size_t events = 0;
  std::size_t checkpoints = 0;
  std::size_t violations = 0;
  /// Checkpoints whose scrambled future did change the final state.
  std::size_t diverged = 0;
  bool ok() const { return violations == 0 && checkpoints > 0; }
  nlohmann::json to_json() const;
};

/// Replays every checkpoint prefix on a fresh predictor and with a
/// scrambled future; state fingerprints and forecasts up to the checkpoint
/// must match the uninterrupted run.
CausalityReport audit_causality(const std::vector<double>& times, const std::vector<VectorX<double>>& descriptors,
                                const PipelineConfig& config, std::size_t checkpoints = 10);

struct GridAxis {
  std::string name;
  std::vector<double> values;
  /// start, start + step, ... up to stop (inclusive within step/1000).
  static GridAxis range(std::string name, double start, double stop, double step);
};

struct GridOptions {
  /// Grow the grid by one step past any border holding the maximum.
  bool extend = false;
  int max_extensions = 4;
  int threads = 1;
};

struct GridResult {
  GridAxis rows;
  GridAxis cols;
  /// NaN where a cell's parameters were rejected.
  MatrixX<double> values;
  Index best_row = 0;
  Index best_col = 0;
  int extensions = 0;

  double best() const { return values(best_row, best_col); }
  /// One line per cell: row, col, value, best flag.
  std::string to_csv() const;
};

GridResult grid_search(GridAxis rows, GridAxis cols, const std::function<double(double, double)>& evaluate,
                       const GridOptions& options = {});

}  // namespace symstream
