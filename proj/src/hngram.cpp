#include "symstream/hngram.hpp"

#include <algorithm>

namespace symstream {

PatternTable::PatternTable(int max_length) : max_length_(max_length) {
  if (max_length < 1) throw InvalidArgument("PatternTable: max_length must be at least 1");
  levels_.resize(static_cast<std::size_t>(max_length));
}

PatternTable::Level& PatternTable::level(int n) {
  if (n < 1 || n > max_length_) throw InvalidArgument("PatternTable: length out of range");
  return levels_[static_cast<std::size_t>(n - 1)];
}

const PatternTable::Level& PatternTable::level(int n) const {
  if (n < 1 || n > max_length_) throw InvalidArgument("PatternTable: length out of range");
  return levels_[static_cast<std::size_t>(n - 1)];
}

bool PatternTable::has_symbol(SymbolId s) const {
  return std::find(alphabet_.begin(), alphabet_.end(), s) != alphabet_.end();
}

long PatternTable::reference_total() const { return levels_[0].entries.empty() ? 0 : total(1, 0); }

long PatternTable::find(const Pattern& p) const {
  if (p.empty() || static_cast<int>(p.size()) > max_length_) return -1;
  const auto& lv = level(static_cast<int>(p.size()));
  auto it = lv.index.find(p);
  return it == lv.index.end() ? -1 : static_cast<long>(it->second);
}

long PatternTable::count_of(const Pattern& p) const {
  const long i = find(p);
  return i < 0 ? 0 : entry(static_cast<int>(p.size()), static_cast<std::size_t>(i)).count;
}

long PatternTable::sum_counts(int n) const {
  long sum = 0;
  for (const auto& e : level(n).entries) sum += e.count;
  return sum;
}

void PatternTable::add_symbol(SymbolId s) {
  if (s < 0) throw InvalidArgument("PatternTable: negative symbol id");
  if (!has_symbol(s)) alphabet_.push_back(s);
}

void PatternTable::observe(SymbolId s) {
  add_symbol(s);
  history_.push_back(s);
  if (static_cast<int>(history_.size()) > max_length_) history_.erase(history_.begin());
  ++observations_;
  const int avail = static_cast<int>(history_.size());
  for (int n = 1; n <= avail; ++n) {
    Level& lv = level(n);
    Pattern p(history_.end() - n, history_.end());
    auto it = lv.index.find(p);
    std::size_t i;
    if (it == lv.index.end()) {
      i = lv.entries.size();
      lv.index.emplace(p, i);
      lv.entries.push_back(Entry{std::move(p), 0, lv.windows});
    } else {
      i = it->second;
    }
    ++lv.entries[i].count;
    ++lv.windows;
  }
}

void PatternTable::reindex(Level& lv) {
  lv.index.clear();
  for (std::size_t i = 0; i < lv.entries.size(); ++i) lv.index.emplace(lv.entries[i].pattern, i);
}

void PatternTable::remove_symbol(SymbolId s) {
  auto pos = std::find(alphabet_.begin(), alphabet_.end(), s);
  if (pos == alphabet_.end()) throw InvalidArgument("remove_symbol: unknown symbol " + std::to_string(s));
  alphabet_.erase(pos);
  for (auto& lv : levels_) {
    std::erase_if(lv.entries, [s](const Entry& e) {
      return std::find(e.pattern.begin(), e.pattern.end(), s) != e.pattern.end();
    });
    reindex(lv);
  }
  auto last = std::find(history_.rbegin(), history_.rend(), s);
  if (last != history_.rend()) history_.erase(history_.begin(), last.base());
}

void PatternTable::apply_merge(std::span<const SymbolId> sources, SymbolId survivor) {
  std::vector<SymbolId> src(sources.begin(), sources.end());
  std::sort(src.begin(), src.end());
  src.erase(std::unique(src.begin(), src.end()), src.end());
  if (src.size() < 2) throw InvalidArgument("apply_merge: need at least two distinct sources");
  if (std::find(src.begin(), src.end(), survivor) == src.end())
    throw InvalidArgument("apply_merge: survivor must be one of the sources");
  std::size_t earliest = alphabet_.size();
  for (SymbolId s : src) {
    auto it = std::find(alphabet_.begin(), alphabet_.end(), s);
    if (it == alphabet_.end()) throw InvalidArgument("apply_merge: unknown symbol " + std::to_string(s));
    earliest = std::min(earliest, static_cast<std::size_t>(it - alphabet_.begin()));
  }
  if (alphabet_[earliest] != survivor)
    throw InvalidArgument("apply_merge: survivor must be the earliest source");

  auto rewrite = [&](SymbolId x) {
    return std::binary_search(src.begin(), src.end(), x) ? survivor : x;
  };
  for (auto& lv : levels_) {
    std::vector<Entry> merged;
    std::unordered_map<Pattern, std::size_t, PatternHash> index;
    for (auto& e : lv.entries) {
      Pattern p = e.pattern;
      std::transform(p.begin(), p.end(), p.begin(), rewrite);
      auto it = index.find(p);
      if (it == index.end()) {
        index.emplace(p, merged.size());
        merged.push_back(Entry{std::move(p), e.count, e.registered_at});
      } else {
        Entry& into = merged[it->second];
        into.count += e.count;
        into.registered_at = std::min(into.registered_at, e.registered_at);
      }
    }
    lv.entries = std::move(merged);
    lv.index = std::move(index);
  }
  std::erase_if(alphabet_, [&](SymbolId x) { return x != survivor && std::binary_search(src.begin(), src.end(), x); });
  std::transform(history_.begin(), history_.end(), history_.begin(), rewrite);
}

void PatternTable::apply(const StructuralEvent& e) {
  switch (e.kind) {
    case EventKind::Created: add_symbol(e.symbol); break;
    case EventKind::Removed: remove_symbol(e.symbol); break;
    case EventKind::Merged: apply_merge(e.sources, e.symbol); break;
  }
}

nlohmann::json PatternTable::to_json() const {
  nlohmann::json levels = nlohmann::json::array();
  for (int n = 1; n <= max_length_; ++n) {
    nlohmann::json rows = nlohmann::json::array();
    for (std::size_t i = 0; i < size(n); ++i) {
      rows.push_back({{"pattern", entry(n, i).pattern}, {"C", count(n, i)}, {"T", total(n, i)}});
    }
    levels.push_back({{"n", n}, {"patterns", std::move(rows)}});
  }
  return {{"max_length", max_length_}, {"alphabet", alphabet_}, {"levels", std::move(levels)}};
}

std::uint64_t PatternTable::fingerprint() const {
  std::string bytes;
  auto put = [&](const void* p, std::size_t n) { bytes.append(static_cast<const char*>(p), n); };
  for (SymbolId s : alphabet_) put(&s, sizeof s);
  bytes.push_back('|');
  for (SymbolId s : history_) put(&s, sizeof s);
  for (const auto& lv : levels_) {
    bytes.push_back('|');
    put(&lv.windows, sizeof lv.windows);
    for (const auto& e : lv.entries) {
      for (SymbolId s : e.pattern) put(&s, sizeof s);
      put(&e.count, sizeof e.count);
      put(&e.registered_at, sizeof e.registered_at);
    }
  }
  return fnv1a(bytes);
}

JointDistribution PatternTable::joint_probabilities() const {
  JointDistribution joint(*this);
  const double t11 = static_cast<double>(reference_total());
  if (t11 <= 0) throw InvalidArgument("joint_probabilities: table has no observations");

  auto finish = [](JointDistribution::Level& lv) {
    double sum = 0;
    for (double p : lv.blended) sum += p;
    if (sum > 1) {
      for (double& p : lv.blended) p /= sum;
      sum = 1;
    }
    lv.residual = std::max(0.0, 1 - sum);
    double wsum = 0;
    for (double p : lv.width_estimate) wsum += p;
    lv.width_residual = std::max(0.0, 1 - wsum);
  };

  {
    JointDistribution::Level lv;
    const std::size_t k = size(1);
    lv.width_estimate.assign(k, 1.0 / static_cast<double>(k));
    for (std::size_t i = 0; i < k; ++i) lv.blended.push_back(static_cast<double>(count(1, i)) / t11);
    finish(lv);
    joint.levels_.push_back(std::move(lv));
  }

  for (int n = 2; n <= max_length_; ++n) {
    JointDistribution::Level lv;
    const std::size_t k = size(n);
    double carried = k > 0 ? std::max(0.0, t11 - static_cast<double>(total(n, 0))) : 0.0;
    double sum_p = 0, sum_w = 0;
    for (std::size_t i = 0; i < k; ++i) {
      const double w = joint.width_estimate(entry(n, i).pattern);
      const double p = (static_cast<double>(count(n, i)) + carried * w) / t11;
      lv.width_estimate.push_back(w);
      lv.blended.push_back(p);
      sum_p += p;
      sum_w += w;
      if (i + 1 < k) {
        const double q_n = std::max(0.0, 1 - sum_p);
        const double q_w = 1 - sum_w;
        const double gap = static_cast<double>(total(n, i) - total(n, i + 1));
        if (q_w > 1e-12 && gap > 0) carried += gap * q_n / q_w;
      }
    }
    finish(lv);
    joint.levels_.push_back(std::move(lv));
  }
  joint.cache_.clear();
  return joint;
}

double JointDistribution::probability(const Pattern& p) const {
  const int n = static_cast<int>(p.size());
  if (n < 1 || n > max_length()) throw InvalidArgument("probability: pattern length out of range");
  const long i = table_->find(p);
  if (i >= 0) return levels_[static_cast<std::size_t>(n - 1)].blended[static_cast<std::size_t>(i)];
  auto it = cache_.find(p);
  if (it != cache_.end()) return it->second;
  const double v = composed(p);
  cache_.emplace(p, v);
  return v;
}

double JointDistribution::composed(const Pattern& p) const {
  const std::size_t n = p.size();
  const Level& lv = levels_[n - 1];
  if (lv.residual <= 0) return 0;
  if (n == 1) {
    if (!table_->has_symbol(p[0])) return 0;
    const std::size_t unseen = table_->alphabet().size() - table_->size(1);
    return unseen == 0 ? 0 : lv.residual / static_cast<double>(unseen);
  }
  if (lv.width_residual <= 1e-12) return 0;
  return std::min(lv.residual, lv.residual * width_estimate(p) / lv.width_residual);
}

double JointDistribution::width_estimate(const Pattern& p) const {
  const Pattern prefix(p.begin(), p.end() - 1);
  const Pattern suffix(p.begin() + 1, p.end());
  Pattern probe(p.begin() + 1, p.end());
  double denom = 0;
  for (SymbolId y : table_->alphabet()) {
    probe.back() = y;
    denom += probability(probe);
  }
  if (denom <= 0) return 0;
  return probability(prefix) * probability(suffix) / denom;
}

SymbolPrediction predict_next(const PatternTable& table, std::span<const SymbolId> context) {
  if (table.empty()) {
    SymbolPrediction out;
    for (SymbolId s : table.alphabet()) out.distribution.emplace_back(s, 1.0 / static_cast<double>(table.alphabet().size()));
    if (!out.distribution.empty()) out.symbol = out.distribution.front().first;
    return out;
  }
  return predict_next(table, table.joint_probabilities(), context);
}

SymbolPrediction predict_next(const PatternTable& table, const JointDistribution& joint,
                              std::span<const SymbolId> context) {
  for (SymbolId s : context) {
    if (!table.has_symbol(s)) throw InvalidArgument("predict_next: context symbol " + std::to_string(s) + " not in alphabet");
  }
  std::vector<SymbolId> order;
  for (std::size_t i = 0; i < table.size(1); ++i) order.push_back(table.entry(1, i).pattern[0]);
  for (SymbolId s : table.alphabet()) {
    if (std::find(order.begin(), order.end(), s) == order.end()) order.push_back(s);
  }
  SymbolPrediction out;
  if (order.empty()) return out;

  std::vector<double> probs(order.size(), 0.0);
  double sum = 0;
  int k = std::min(static_cast<int>(context.size()), table.max_length() - 1);
  for (; k >= 0; --k) {
    Pattern p(context.end() - k, context.end());
    p.push_back(0);
    sum = 0;
    for (std::size_t j = 0; j < order.size(); ++j) {
      p.back() = order[j];
      probs[j] = joint.probability(p);
      sum += probs[j];
    }
    if (sum > 0) break;
  }
  out.context_used = std::max(k, 0);
  if (!(sum > 0)) {
    std::fill(probs.begin(), probs.end(), 1.0);
    sum = static_cast<double>(order.size());
  }
  std::size_t best = 0;
  for (std::size_t j = 0; j < order.size(); ++j) {
    probs[j] /= sum;
    if (probs[j] > probs[best]) best = j;
    out.distribution.emplace_back(order[j], probs[j]);
  }
  out.symbol = order[best];
  return out;
}

}  // namespace symstream
