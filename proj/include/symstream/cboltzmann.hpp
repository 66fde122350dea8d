#pragma once

// Categorical Boltzmann machine over the most recent symbols, with hidden
// chunk units grown from strong weights and units that follow the symbol
// alphabet as it changes.

#include <array>
#include <span>
#include <vector>

#include <json.hpp>

#include "symstream/events.hpp"

namespace symstream {

struct AnnealSchedule {
  double start = 50;
  double end = 0.005;
  int steps = 100;

  /// Geometric sequence from start to end inclusive.
  std::vector<double> temperatures() const;
  void validate() const;
};

struct CbParams {
  /// Visible window length, which also caps chunk length.
  int slots = 5;
  double mu = 0.1;
  AnnealSchedule schedule;
  /// Chunk thresholds by pattern length 1..4; longer patterns use the last.
  std::array<double, 4> thresholds{0.2, 0.15, 0.1, 0.05};
};

struct CbUnit {
  enum class Kind { Atom, Chunk };
  Kind kind = Kind::Atom;
  /// Atom: its slot. Chunk: first slot of its span.
  int slot = 0;
  /// Atom: one symbol. Chunk: the pattern, length >= 2.
  std::vector<SymbolId> pattern;

  int length() const { return static_cast<int>(pattern.size()); }
  bool covers(int s) const { return s >= slot && s < slot + length(); }
  bool operator==(const CbUnit&) const = default;
};

class ConceptualBoltzmann {
 public:
  explicit ConceptualBoltzmann(CbParams params = {}, std::uint64_t seed = 1);

  const CbParams& params() const { return params_; }
  const std::vector<SymbolId>& alphabet() const { return alphabet_; }
  const std::vector<CbUnit>& units() const { return units_; }
  std::size_t unit_count() const { return units_.size(); }
  const MatrixX<double>& weights() const { return w_; }
  bool connected(std::size_t i, std::size_t j) const { return mask_(static_cast<Index>(i), static_cast<Index>(j)) != 0; }
  const VectorX<double>& state() const { return s_; }
  std::vector<CbUnit> chunks() const;

  /// Unit id of a symbol in a slot, or of a chunk; -1 if absent.
  long atom(int slot, SymbolId symbol) const;
  long chunk(int slot, const std::vector<SymbolId>& pattern) const;

  /// Sets a weight symmetrically; the pair must be connected.
  void set_weight(std::size_t i, std::size_t j, double w);

  void adapt_structure(const StructuralEvent& e);

  /// Clamps a slot to a symbol for subsequent sampling.
  void clamp(int slot, SymbolId symbol);
  void release_all();
  /// Samples one unclamped slot from the softmax of its net inputs at
  /// temperature T.
  SymbolId unit_update(int slot, double temperature);
  /// Symbol currently active in a slot, -1 if none.
  SymbolId slot_value(int slot) const;

  /// Positive phase with the window clamped right-aligned, negative phase
  /// free from a uniform random state, then the contrastive update and
  /// chunking. Returns the chunks created.
  std::vector<CbUnit> train_instance(std::span<const SymbolId> window);
  std::vector<CbUnit> maybe_chunk();

  /// Clamps the context just before the last slot and anneals; returns the
  /// last slot's symbol.
  SymbolId predict_next(std::span<const SymbolId> context);

  nlohmann::json to_json() const;
  std::uint64_t fingerprint() const;

 private:
  struct Phase {
    std::vector<bool> active_slot;
    std::vector<bool> clamped_slot;
  };

  void check_slot(int slot) const;
  std::size_t symbol_index(SymbolId s) const;
  bool structural(const CbUnit& a, const CbUnit& b) const;
  void add_unit(CbUnit u);
  void keep_units(const std::vector<std::size_t>& keep);
  bool unit_active(std::size_t i, const Phase& ph) const;
  void set_slot(int slot, SymbolId s);
  void sample_chunk(std::size_t i, double temperature);
  void anneal(const Phase& ph);
  void randomize(const Phase& ph);
  double threshold(int length) const;

  CbParams params_;
  Rng rng_;
  std::vector<SymbolId> alphabet_;
  std::vector<CbUnit> units_;
  MatrixX<double> w_;
  MatrixX<double> mask_;
  VectorX<double> s_;
  std::vector<SymbolId> clamped_;
  Phase phase_;
};

}  // namespace symstream
