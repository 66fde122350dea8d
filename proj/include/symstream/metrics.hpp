#pragma once

// Partition agreement, onset matching and label mapping.

#include <map>
#include <span>
#include <vector>

#include <json.hpp>

#include "symstream/common.hpp"

namespace symstream {

/// Block membership over indices 0..T-1; labels are renumbered densely in
/// order of first appearance.
class Partition {
 public:
  Partition() = default;
  template <typename Label>
  static Partition from_labels(std::span<const Label> labels) {
    Partition p;
    std::map<Label, int> ids;
    for (const Label& l : labels) {
      auto it = ids.try_emplace(l, static_cast<int>(ids.size())).first;
      p.block_of_.push_back(it->second);
    }
    p.blocks_ = static_cast<int>(ids.size());
    return p;
  }
  template <typename Label>
  static Partition from_labels(const std::vector<Label>& labels) {
    return from_labels(std::span<const Label>(labels));
  }
  /// Blocks given as lists of indices; they must cover 0..T-1 exactly once.
  static Partition from_blocks(const std::vector<std::vector<int>>& blocks);

  std::size_t size() const { return block_of_.size(); }
  int block_count() const { return blocks_; }
  int block_of(std::size_t i) const { return block_of_.at(i); }
  const std::vector<int>& labels() const { return block_of_; }
  std::vector<std::vector<int>> blocks() const;
  bool operator==(const Partition&) const = default;

 private:
  std::vector<int> block_of_;
  int blocks_ = 0;
};

/// n_ij = |A_i ∩ C_j|.
struct ContingencyTable {
  Eigen::Matrix<long, Eigen::Dynamic, Eigen::Dynamic> counts;
  static ContingencyTable of(const Partition& a, const Partition& c);
  long total() const { return counts.sum(); }
};

double rand_index(const Partition& a, const Partition& c);
/// Hubert-Arabie adjusted Rand index.
double adjusted_rand_index(const Partition& a, const Partition& c);

template <typename L1, typename L2>
double adjusted_rand_index(const std::vector<L1>& a, const std::vector<L2>& c) {
  return adjusted_rand_index(Partition::from_labels(a), Partition::from_labels(c));
}

/// One-to-one pairs (i into first list, j into second) with |a_i - b_j| <=
/// tol, chosen greedily by ascending difference.
std::vector<std::pair<std::size_t, std::size_t>> match_times(std::span<const double> a, std::span<const double> b,
                                                             double tol);

struct OnsetScore {
  double precision = 0;
  double recall = 0;
  double f = 0;
  std::size_t matches = 0;
};

OnsetScore onset_fmeasure(std::span<const double> estimated, std::span<const double> annotated, double tol = 0.05);

/// Repeatedly binds the largest remaining positive entry's column (cluster)
/// to its row (annotation). Ties go to the lowest (row, column).
std::map<int, int> greedy_label_mapping(const ContingencyTable& table);

struct TimedSymbol {
  double time = 0;
  int label = 0;
};

/// ARI over annotated events plus unmatched predictions. A side with no
/// counterpart within tol gets a singleton block.
double prediction_ari(std::span<const TimedSymbol> predicted, std::span<const TimedSymbol> annotated,
                      double tol = 0.15);

nlohmann::json metric_json(const std::string& metric, double value, nlohmann::json params = nlohmann::json::object());

}  // namespace symstream
