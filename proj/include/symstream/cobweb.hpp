#pragma once

// Incremental conceptual clustering over real-valued vectors.
//
// Every node models its instances with one Gaussian per dimension. The
// children of the root are the live symbol alphabet; changes to that level
// are reported as StructuralEvents. Only sufficient statistics are kept, so
// past instances are never revisited.

#include <cstring>
#include <span>
#include <vector>

#include <json.hpp>

#include "symstream/events.hpp"

namespace symstream {

/// Count, mean and sum of squared deviations per dimension (Welford form).
template <typename Scalar>
class GaussianStats {
 public:
  GaussianStats() = default;
  explicit GaussianStats(Index dim) : mean_(VectorX<Scalar>::Zero(dim)), m2_(VectorX<Scalar>::Zero(dim)) {}

  static GaussianStats single(const VectorX<Scalar>& x) {
    GaussianStats s(x.size());
    s.add(x);
    return s;
  }

  void add(const VectorX<Scalar>& x) {
    ++count_;
    const VectorX<Scalar> delta = x - mean_;
    mean_ += delta / Scalar(count_);
    m2_ += delta.cwiseProduct(x - mean_);
  }

  void merge(const GaussianStats& other) {
    if (other.count_ == 0) return;
    if (count_ == 0) {
      *this = other;
      return;
    }
    const Scalar na = Scalar(count_), nb = Scalar(other.count_), n = na + nb;
    const VectorX<Scalar> delta = other.mean_ - mean_;
    mean_ += delta * (nb / n);
    m2_ += other.m2_ + delta.cwiseAbs2() * (na * nb / n);
    count_ += other.count_;
  }

  GaussianStats plus(const VectorX<Scalar>& x) const {
    GaussianStats s = *this;
    s.add(x);
    return s;
  }

  GaussianStats plus(const GaussianStats& other) const {
    GaussianStats s = *this;
    s.merge(other);
    return s;
  }

  long count() const { return count_; }
  Index dim() const { return mean_.size(); }
  const VectorX<Scalar>& mean() const { return mean_; }

  /// Population standard deviation; 0 for fewer than two instances.
  VectorX<Scalar> stddev() const {
    if (count_ < 2) return VectorX<Scalar>::Zero(dim());
    return (m2_.array().max(Scalar(0)) / Scalar(count_)).sqrt().matrix();
  }

  /// Sum over dimensions of 1 / max(sigma_d, acuity). A single instance has
  /// sigma = acuity by convention.
  Scalar specificity(Scalar acuity) const {
    return (Scalar(1) / stddev().array().max(acuity)).sum();
  }

 private:
  long count_ = 0;
  VectorX<Scalar> mean_;
  VectorX<Scalar> m2_;
};

/// Gain in specificity from partitioning `parent` into `children`:
/// (1/K) * (sum_k I_k/I * specificity_k - specificity_parent), with the
/// acuity floor applied to every standard deviation.
template <typename Scalar>
Scalar category_utility(const GaussianStats<Scalar>& parent,
                        std::span<const GaussianStats<Scalar>> children, Scalar acuity) {
  if (children.empty()) throw InvalidArgument("category_utility: need at least one child");
  if (parent.count() == 0) throw InvalidArgument("category_utility: empty parent");
  Scalar weighted = 0;
  for (const auto& c : children) weighted += Scalar(c.count()) / Scalar(parent.count()) * c.specificity(acuity);
  return (weighted - parent.specificity(acuity)) / Scalar(children.size());
}

template <typename Scalar>
class ClusterTree {
 public:
  static constexpr int kNoNode = -1;

  struct Node {
    int id = kNoNode;
    int parent = kNoNode;
    std::vector<int> children;
    GaussianStats<Scalar> stats;
    /// Set only while the node is a child of the root.
    SymbolId symbol = -1;
    bool alive = true;
  };

  struct Incorporation {
    SymbolId symbol = -1;
    /// Leaf that absorbed the instance. Leaves are never deleted, so this id
    /// stays valid for symbol_of().
    int leaf = kNoNode;
    std::vector<StructuralEvent> events;
  };

  ClusterTree(Index dim, Scalar acuity) : dim_(dim), acuity_(acuity) {
    if (dim < 1) throw InvalidArgument("ClusterTree: dimension must be positive");
    if (!(acuity > 0)) throw InvalidArgument("ClusterTree: acuity must be positive");
    nodes_.push_back(Node{0, kNoNode, {}, GaussianStats<Scalar>(dim), -1, true});
  }

  Index dimension() const { return dim_; }
  Scalar acuity() const { return acuity_; }
  long instances() const { return nodes_[0].stats.count(); }
  int root() const { return 0; }
  const Node& node(int id) const { return nodes_.at(static_cast<std::size_t>(id)); }
  std::size_t node_capacity() const { return nodes_.size(); }
  const std::vector<StructuralEvent>& event_log() const { return log_; }

  /// Live symbols in first-appearance order.
  std::vector<SymbolId> alphabet() const {
    std::vector<SymbolId> out;
    for (int c : nodes_[0].children) out.push_back(nodes_[static_cast<std::size_t>(c)].symbol);
    std::sort(out.begin(), out.end());
    return out;
  }

  /// Symbol of the root child above a live node.
  SymbolId symbol_of(int id) const {
    const Node* n = &node(id);
    if (!n->alive) throw InvalidArgument("symbol_of: node was removed");
    if (id == 0) throw InvalidArgument("symbol_of: root has no symbol");
    while (n->parent != 0) n = &node(n->parent);
    return n->symbol;
  }

  /// Mean of a live symbol's partition.
  const VectorX<Scalar>& symbol_mean(SymbolId s) const { return node(symbol_node(s)).stats.mean(); }

  int symbol_node(SymbolId s) const {
    for (int c : nodes_[0].children) {
      if (nodes_[static_cast<std::size_t>(c)].symbol == s) return c;
    }
    throw InvalidArgument("unknown symbol " + std::to_string(s));
  }

  nlohmann::json to_json() const {
    nlohmann::json nodes = nlohmann::json::array();
    for (const auto& n : nodes_) {
      if (!n.alive) continue;
      const VectorX<Scalar> sd = n.stats.stddev();
      nlohmann::json j = {{"id", n.id},
                          {"parent", n.parent},
                          {"children", n.children},
                          {"count", n.stats.count()},
                          {"mean", std::vector<double>(n.stats.mean().data(), n.stats.mean().data() + n.stats.dim())},
                          {"stddev", std::vector<double>(sd.data(), sd.data() + sd.size())}};
      if (n.symbol >= 0) j["symbol"] = n.symbol;
      nodes.push_back(std::move(j));
    }
    return {{"dimension", dim_}, {"acuity", acuity_}, {"alphabet", alphabet()}, {"nodes", std::move(nodes)}};
  }

  std::uint64_t fingerprint() const {
    std::string bytes;
    auto put = [&](const void* p, std::size_t size) { bytes.append(static_cast<const char*>(p), size); };
    for (const auto& n : nodes_) {
      put(&n.parent, sizeof n.parent);
      put(&n.symbol, sizeof n.symbol);
      const char alive = n.alive ? 1 : 0;
      put(&alive, 1);
      for (int c : n.children) put(&c, sizeof c);
      const long count = n.stats.count();
      put(&count, sizeof count);
      if (count > 0) put(n.stats.mean().data(), sizeof(Scalar) * static_cast<std::size_t>(dim_));
    }
    return fnv1a(bytes);
  }

  /// Routes x down the tree, updating statistics on the way and applying at
  /// each level the alternative with the highest category utility.
  Incorporation incorporate(const VectorX<Scalar>& x) {
    if (x.size() != dim_) throw InvalidArgument("incorporate: dimension mismatch");
    if (!x.allFinite()) throw InvalidArgument("incorporate: non-finite value");
    Incorporation result;
    events_ = &result.events;

    Node& root = nodes_[0];
    if (root.children.empty()) {
      root.stats.add(x);
      result.leaf = new_leaf(0, x);
      assign_symbol(result.leaf);
    } else {
      result.leaf = descend(0, x);
    }
    result.symbol = symbol_of(result.leaf);
    log_.insert(log_.end(), result.events.begin(), result.events.end());
    events_ = nullptr;
    return result;
  }

 private:
  enum class Op { Insert, New, Merge, Split };

  struct Choice {
    Op op = Op::Insert;
    std::size_t slot = 0;
    std::size_t other = 0;
    Scalar utility = 0;
  };

  Node& at(int id) { return nodes_[static_cast<std::size_t>(id)]; }

  Scalar tolerance() const { return Scalar(1e-9) * Scalar(dim_) / acuity_; }

  int new_node(int parent, GaussianStats<Scalar> stats) {
    const int id = static_cast<int>(nodes_.size());
    nodes_.push_back(Node{id, parent, {}, std::move(stats), -1, true});
    return id;
  }

  int new_leaf(int parent, const VectorX<Scalar>& x) {
    const int id = new_node(parent, GaussianStats<Scalar>::single(x));
    at(parent).children.push_back(id);
    return id;
  }

  void assign_symbol(int id) {
    at(id).symbol = next_symbol_++;
    events_->push_back(StructuralEvent::created(at(id).symbol));
  }

  Scalar utility(const GaussianStats<Scalar>& parent, const std::vector<GaussianStats<Scalar>>& parts) const {
    return category_utility<Scalar>(parent, parts, acuity_);
  }

  std::vector<GaussianStats<Scalar>> child_stats(int id) const {
    std::vector<GaussianStats<Scalar>> out;
    for (int c : node(id).children) out.push_back(node(c).stats);
    return out;
  }

  /// Squared distance to the mean in units of max(sigma, a).
  Scalar scaled_distance(const GaussianStats<Scalar>& g, const VectorX<Scalar>& x) const {
    const VectorX<Scalar> spread = g.stddev().array().max(acuity_);
    return ((x - g.mean()).array() / spread.array()).square().sum();
  }

  /// Best utility of placing x into one member of `parts`.
  Scalar best_insert(const GaussianStats<Scalar>& parent, std::vector<GaussianStats<Scalar>> parts,
                     const VectorX<Scalar>& x) const {
    Scalar best = -std::numeric_limits<Scalar>::infinity();
    for (std::size_t k = 0; k < parts.size(); ++k) {
      const GaussianStats<Scalar> saved = parts[k];
      parts[k].add(x);
      best = std::max(best, utility(parent, parts));
      parts[k] = saved;
    }
    return best;
  }

  Choice choose(int id, const VectorX<Scalar>& x, bool allow_merge) const {
    const Node& n = node(id);
    const auto& parent = n.stats;
    std::vector<GaussianStats<Scalar>> parts = child_stats(id);
    const std::size_t k = parts.size();

    std::vector<Scalar> insert(k);
    for (std::size_t i = 0; i < k; ++i) {
      const GaussianStats<Scalar> saved = parts[i];
      parts[i].add(x);
      insert[i] = utility(parent, parts);
      parts[i] = saved;
    }

    std::vector<Choice> options;
    for (std::size_t i = 0; i < k; ++i) options.push_back({Op::Insert, i, 0, insert[i]});
    {
      auto with_new = parts;
      with_new.push_back(GaussianStats<Scalar>::single(x));
      options.push_back({Op::New, 0, 0, utility(parent, with_new)});
    }

    // Root may collapse to a single symbol; deeper nodes keep two children.
    const bool can_merge = allow_merge && (id == 0 ? k >= 2 : k >= 3);
    if (can_merge) {
      std::size_t h1 = 0, h2 = 1;
      if (insert[h2] > insert[h1]) std::swap(h1, h2);
      for (std::size_t i = 2; i < k; ++i) {
        if (insert[i] > insert[h1]) {
          h2 = h1;
          h1 = i;
        } else if (insert[i] > insert[h2]) {
          h2 = i;
        }
      }
      std::vector<GaussianStats<Scalar>> merged;
      for (std::size_t i = 0; i < k; ++i) {
        if (i != h1 && i != h2) merged.push_back(parts[i]);
      }
      merged.push_back(parts[h1].plus(parts[h2]).plus(x));
      options.push_back({Op::Merge, std::min(h1, h2), std::max(h1, h2), utility(parent, merged)});
    }

    for (std::size_t i = 0; i < k; ++i) {
      const Node& c = node(n.children[i]);
      if (c.children.empty()) continue;
      std::vector<GaussianStats<Scalar>> promoted;
      for (std::size_t j = 0; j < k; ++j) {
        if (j != i) promoted.push_back(parts[j]);
      }
      for (int g : c.children) promoted.push_back(node(g).stats);
      options.push_back({Op::Split, i, 0, best_insert(parent, promoted, x)});
    }

    Scalar best = -std::numeric_limits<Scalar>::infinity();
    for (const auto& o : options) best = std::max(best, o.utility);
    const Scalar tol = tolerance();
    // Among near-ties: merge (fewer partitions), then insert into the
    // nearest child, then a new partition, then split.
    for (Op preferred : {Op::Merge, Op::Insert, Op::New, Op::Split}) {
      const Choice* pick = nullptr;
      Scalar nearest = std::numeric_limits<Scalar>::infinity();
      for (const auto& o : options) {
        if (o.op != preferred || o.utility < best - tol) continue;
        if (o.op != Op::Insert) return o;
        const Scalar d = scaled_distance(parts[o.slot], x);
        if (d < nearest) {
          nearest = d;
          pick = &o;
        }
      }
      if (pick) return *pick;
    }
    return options.front();
  }

  /// Adds x below node `id` (whose statistics do not yet include x) and
  /// returns the absorbing leaf.
  int descend(int id, const VectorX<Scalar>& x) {
    while (true) {
      if (node(id).children.empty()) return absorb_at_leaf(id, x);
      at(id).stats.add(x);
      bool allow_merge = true;
      while (true) {
        const Choice c = choose(id, x, allow_merge);
        if (c.op == Op::Insert) {
          id = node(id).children[c.slot];
          break;
        }
        if (c.op == Op::New) {
          const int leaf = new_leaf(id, x);
          if (id == 0) assign_symbol(leaf);
          return leaf;
        }
        if (c.op == Op::Merge) {
          id = merge_children(id, c.slot, c.other);
          break;
        }
        split_child(id, c.slot);
        allow_merge = false;
      }
    }
  }

  int absorb_at_leaf(int id, const VectorX<Scalar>& x) {
    const GaussianStats<Scalar> before = node(id).stats;
    const GaussianStats<Scalar> after = before.plus(x);
    const std::vector<GaussianStats<Scalar>> split{before, GaussianStats<Scalar>::single(x)};
    if (utility(after, split) <= tolerance()) {
      at(id).stats = after;
      return id;
    }
    // Fringe split: an internal node takes the leaf's place (and symbol),
    // with the old leaf and a new leaf for x below it.
    const int parent = node(id).parent;
    const int inner = new_node(parent, after);
    auto& siblings = at(parent).children;
    *std::find(siblings.begin(), siblings.end(), id) = inner;
    at(inner).symbol = node(id).symbol;
    at(id).symbol = -1;
    at(id).parent = inner;
    at(inner).children.push_back(id);
    return new_leaf(inner, x);
  }

  /// Replaces children a < b of `id` by one node holding both; returns it.
  int merge_children(int id, std::size_t a, std::size_t b) {
    const int ca = node(id).children[a];
    const int cb = node(id).children[b];
    const int m = new_node(id, node(ca).stats.plus(node(cb).stats));
    at(m).children = {ca, cb};
    at(ca).parent = m;
    at(cb).parent = m;
    auto& ch = at(id).children;
    ch[a] = m;
    ch.erase(ch.begin() + static_cast<std::ptrdiff_t>(b));
    if (id == 0) {
      const auto e = StructuralEvent::merged({node(ca).symbol, node(cb).symbol});
      at(m).symbol = e.symbol;
      at(ca).symbol = -1;
      at(cb).symbol = -1;
      events_->push_back(e);
    }
    return m;
  }

  /// Removes child `slot` of `id`, reparenting its children to `id`.
  void split_child(int id, std::size_t slot) {
    const int c = node(id).children[slot];
    std::vector<int> grand = node(c).children;
    auto& ch = at(id).children;
    ch.erase(ch.begin() + static_cast<std::ptrdiff_t>(slot));
    ch.insert(ch.begin() + static_cast<std::ptrdiff_t>(slot), grand.begin(), grand.end());
    for (int g : grand) at(g).parent = id;
    at(c).alive = false;
    at(c).children.clear();
    if (id == 0) {
      events_->push_back(StructuralEvent::removed(node(c).symbol));
      at(c).symbol = -1;
      for (int g : grand) assign_symbol(g);
    }
  }

  Index dim_;
  Scalar acuity_;
  std::vector<Node> nodes_;
  SymbolId next_symbol_ = 0;
  std::vector<StructuralEvent> log_;
  std::vector<StructuralEvent>* events_ = nullptr;
};

}  // namespace symstream
