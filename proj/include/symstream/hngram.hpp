#pragma once

// Hierarchical N-gram over a dynamic alphabet.

#include <map>
#include <span>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "symstream/events.hpp"

namespace symstream {

using Pattern = std::vector<SymbolId>;

struct PatternHash {
  std::size_t operator()(const Pattern& p) const noexcept {
    std::uint64_t h = 0x84222325cbf29ce4ULL;
    for (SymbolId s : p) h = splitmix64(h ^ static_cast<std::uint64_t>(static_cast<std::uint32_t>(s)));
    return static_cast<std::size_t>(h);
  }
};

class JointDistribution;

/// Sparse counts for every observed pattern of length 1..N.
///
/// Each length keeps its patterns in order of first appearance. T(n,i) is
/// the number of length-n windows seen since pattern i was registered; it is
/// stored as an offset into the running window total so an observation
/// costs O(N) rather than O(patterns).
class PatternTable {
 public:
  struct Entry {
    Pattern pattern;
    long count = 0;
    long registered_at = 0;
  };

  explicit PatternTable(int max_length = 5);

  int max_length() const { return max_length_; }
  /// Live symbols, in the order they were introduced.
  const std::vector<SymbolId>& alphabet() const { return alphabet_; }
  bool has_symbol(SymbolId s) const;
  long observations() const { return observations_; }
  bool empty() const { return levels_[0].entries.empty(); }

  std::size_t size(int n) const { return level(n).entries.size(); }
  const Entry& entry(int n, std::size_t i) const { return level(n).entries.at(i); }
  long count(int n, std::size_t i) const { return entry(n, i).count; }
  /// T(n,i) for 0-based registry position i.
  long total(int n, std::size_t i) const { return level(n).windows - entry(n, i).registered_at; }
  /// T(1,1), the reference total shared by every length.
  long reference_total() const;
  /// 0-based registry position, or -1.
  long find(const Pattern& p) const;
  long count_of(const Pattern& p) const;
  long sum_counts(int n) const;

  /// Adds the new symbol to the alphabet if unseen, then counts every
  /// suffix ending at it.
  void observe(SymbolId s);
  void add_symbol(SymbolId s);
  /// Drops the symbol, every pattern containing it and the history up to
  /// its last occurrence.
  void remove_symbol(SymbolId s);
  /// Rewrites every source with the survivor, which must be the source
  /// introduced first. Colliding patterns sum their counts and keep the
  /// earliest registration.
  void apply_merge(std::span<const SymbolId> sources, SymbolId survivor);
  void apply(const StructuralEvent& e);

  JointDistribution joint_probabilities() const;

  nlohmann::json to_json() const;
  std::uint64_t fingerprint() const;

 private:
  struct Level {
    std::vector<Entry> entries;
    std::unordered_map<Pattern, std::size_t, PatternHash> index;
    long windows = 0;
  };

  Level& level(int n);
  const Level& level(int n) const;
  void reindex(Level& lv);

  int max_length_;
  std::vector<Level> levels_;
  std::vector<SymbolId> alphabet_;
  std::vector<SymbolId> history_;
  long observations_ = 0;
};

/// Joint probabilities for every registered pattern, blended across widths,
/// with a composition rule for patterns never observed.
class JointDistribution {
 public:
  struct Level {
    std::vector<double> blended;
    std::vector<double> width_estimate;
    /// 1 - sum of blended.
    double residual = 1;
    /// 1 - sum of width_estimate.
    double width_residual = 1;
  };

  /// P of any pattern of length 1..N; unregistered patterns share the
  /// level's residual in proportion to their width-(n-1) estimate.
  double probability(const Pattern& p) const;
  const Level& level(int n) const { return levels_.at(static_cast<std::size_t>(n - 1)); }
  int max_length() const { return static_cast<int>(levels_.size()); }

 private:
  friend class PatternTable;
  explicit JointDistribution(const PatternTable& table) : table_(&table) {}
  double width_estimate(const Pattern& p) const;
  double composed(const Pattern& p) const;

  const PatternTable* table_;
  std::vector<Level> levels_;
  mutable std::map<Pattern, double> cache_;
};

struct SymbolPrediction {
  SymbolId symbol = -1;
  /// Over the alphabet, ordered as the symbols were first introduced.
  std::vector<std::pair<SymbolId, double>> distribution;
  /// Context length actually used.
  int context_used = 0;
};

/// P(y | context) from joint ratios with the longest context whose
/// continuation mass is positive; an empty table is uniform.
SymbolPrediction predict_next(const PatternTable& table, std::span<const SymbolId> context);
SymbolPrediction predict_next(const PatternTable& table, const JointDistribution& joint,
                              std::span<const SymbolId> context);

}  // namespace symstream
