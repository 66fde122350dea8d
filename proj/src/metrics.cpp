#include "symstream/metrics.hpp"

#include <algorithm>
#include <tuple>

namespace symstream {

namespace {

double choose2(double n) { return n * (n - 1) / 2; }

void require_same_size(const Partition& a, const Partition& c) {
  if (a.size() != c.size()) throw InvalidArgument("partitions cover different index sets");
}

}  // namespace

Partition Partition::from_blocks(const std::vector<std::vector<int>>& blocks) {
  std::size_t total = 0;
  for (const auto& b : blocks) {
    if (b.empty()) throw InvalidArgument("Partition: empty block");
    total += b.size();
  }
  std::vector<int> label(total, -1);
  for (std::size_t k = 0; k < blocks.size(); ++k) {
    for (int i : blocks[k]) {
      if (i < 0 || static_cast<std::size_t>(i) >= total || label[static_cast<std::size_t>(i)] != -1)
        throw InvalidArgument("Partition: blocks must cover 0..T-1 exactly once");
      label[static_cast<std::size_t>(i)] = static_cast<int>(k);
    }
  }
  return from_labels(label);
}

std::vector<std::vector<int>> Partition::blocks() const {
  std::vector<std::vector<int>> out(static_cast<std::size_t>(blocks_));
  for (std::size_t i = 0; i < block_of_.size(); ++i) out[static_cast<std::size_t>(block_of_[i])].push_back(static_cast<int>(i));
  return out;
}

ContingencyTable ContingencyTable::of(const Partition& a, const Partition& c) {
  require_same_size(a, c);
  ContingencyTable t;
  t.counts.setZero(a.block_count(), c.block_count());
  for (std::size_t i = 0; i < a.size(); ++i) ++t.counts(a.block_of(i), c.block_of(i));
  return t;
}

double rand_index(const Partition& a, const Partition& c) {
  require_same_size(a, c);
  if (a.size() < 2) throw InvalidArgument("rand_index: need at least two elements");
  const auto t = ContingencyTable::of(a, c);
  const auto n = t.counts.cast<double>();
  const double pairs = choose2(static_cast<double>(a.size()));
  const double same_both = (n.array() * (n.array() - 1) / 2).sum();
  const double same_a = (n.rowwise().sum().array() * (n.rowwise().sum().array() - 1) / 2).sum();
  const double same_c = (n.colwise().sum().array() * (n.colwise().sum().array() - 1) / 2).sum();
  const double diff_both = pairs - same_a - same_c + same_both;
  return (same_both + diff_both) / pairs;
}

double adjusted_rand_index(const Partition& a, const Partition& c) {
  require_same_size(a, c);
  if (a.size() < 2) throw InvalidArgument("adjusted_rand_index: need at least two elements");
  const auto t = ContingencyTable::of(a, c);
  const auto n = t.counts.cast<double>();
  const auto rows = n.rowwise().sum().array();
  const auto cols = n.colwise().sum().array();
  const double index = (n.array() * (n.array() - 1) / 2).sum();
  const double sum_a = (rows * (rows - 1) / 2).sum();
  const double sum_c = (cols * (cols - 1) / 2).sum();
  const double expected = sum_a * sum_c / choose2(static_cast<double>(a.size()));
  const double maximum = (sum_a + sum_c) / 2;
  const double denom = maximum - expected;
  if (denom == 0) return a == c ? 1.0 : 0.0;
  return (index - expected) / denom;
}

std::vector<std::pair<std::size_t, std::size_t>> match_times(std::span<const double> a, std::span<const double> b,
                                                             double tol) {
  if (!(tol > 0)) throw InvalidArgument("match_times: tolerance must be positive");
  std::vector<std::size_t> ia(a.size()), ib(b.size());
  for (std::size_t i = 0; i < ia.size(); ++i) ia[i] = i;
  for (std::size_t j = 0; j < ib.size(); ++j) ib[j] = j;
  std::sort(ia.begin(), ia.end(), [&](auto x, auto y) { return a[x] < a[y]; });
  std::sort(ib.begin(), ib.end(), [&](auto x, auto y) { return b[x] < b[y]; });

  std::vector<std::tuple<double, std::size_t, std::size_t>> candidates;
  std::size_t lo = 0;
  for (std::size_t i : ia) {
    while (lo < ib.size() && b[ib[lo]] < a[i] - tol) ++lo;
    for (std::size_t k = lo; k < ib.size() && b[ib[k]] <= a[i] + tol; ++k) {
      candidates.emplace_back(std::abs(a[i] - b[ib[k]]), i, ib[k]);
    }
  }
  std::sort(candidates.begin(), candidates.end());
  std::vector<bool> used_a(a.size()), used_b(b.size());
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (const auto& [d, i, j] : candidates) {
    if (used_a[i] || used_b[j]) continue;
    used_a[i] = used_b[j] = true;
    out.emplace_back(i, j);
  }
  std::sort(out.begin(), out.end());
  return out;
}

OnsetScore onset_fmeasure(std::span<const double> estimated, std::span<const double> annotated, double tol) {
  OnsetScore s;
  s.matches = match_times(estimated, annotated, tol).size();
  const double m = static_cast<double>(s.matches);
  s.precision = estimated.empty() ? 0 : m / static_cast<double>(estimated.size());
  s.recall = annotated.empty() ? 0 : m / static_cast<double>(annotated.size());
  s.f = s.precision + s.recall > 0 ? 2 * s.precision * s.recall / (s.precision + s.recall) : 0;
  return s;
}

std::map<int, int> greedy_label_mapping(const ContingencyTable& table) {
  if (table.counts.size() == 0) throw InvalidArgument("greedy_label_mapping: empty table");
  auto m = table.counts;
  std::vector<bool> row_used(static_cast<std::size_t>(m.rows())), col_used(static_cast<std::size_t>(m.cols()));
  std::map<int, int> out;
  while (true) {
    long best = 0;
    Index br = -1, bc = -1;
    for (Index r = 0; r < m.rows(); ++r) {
      if (row_used[static_cast<std::size_t>(r)]) continue;
      for (Index c = 0; c < m.cols(); ++c) {
        if (col_used[static_cast<std::size_t>(c)]) continue;
        if (m(r, c) > best) {
          best = m(r, c);
          br = r;
          bc = c;
        }
      }
    }
    if (br < 0) break;
    row_used[static_cast<std::size_t>(br)] = col_used[static_cast<std::size_t>(bc)] = true;
    out[static_cast<int>(bc)] = static_cast<int>(br);
  }
  return out;
}

double prediction_ari(std::span<const TimedSymbol> predicted, std::span<const TimedSymbol> annotated, double tol) {
  std::vector<double> tp, ta;
  for (const auto& p : predicted) tp.push_back(p.time);
  for (const auto& a : annotated) ta.push_back(a.time);
  const auto pairs = match_times(tp, ta, tol);

  // Real labels are tagged 0, singletons 1, so the two never collide.
  using Label = std::pair<int, long>;
  std::vector<Label> pred_labels, ann_labels;
  std::vector<long> partner(annotated.size(), -1);
  std::vector<bool> pred_matched(predicted.size(), false);
  for (auto [i, j] : pairs) {
    partner[j] = static_cast<long>(i);
    pred_matched[i] = true;
  }
  long singleton = 0;
  for (std::size_t j = 0; j < annotated.size(); ++j) {
    ann_labels.emplace_back(0, annotated[j].label);
    if (partner[j] >= 0) {
      pred_labels.emplace_back(0, predicted[static_cast<std::size_t>(partner[j])].label);
    } else {
      pred_labels.emplace_back(1, singleton++);
    }
  }
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    if (pred_matched[i]) continue;
    pred_labels.emplace_back(0, predicted[i].label);
    ann_labels.emplace_back(1, singleton++);
  }
  if (pred_labels.size() < 2) throw InvalidArgument("prediction_ari: need at least two events");
  return adjusted_rand_index(Partition::from_labels(pred_labels), Partition::from_labels(ann_labels));
}

nlohmann::json metric_json(const std::string& metric, double value, nlohmann::json params) {
  return {{"metric", metric}, {"value", value}, {"params", std::move(params)}};
}

}  // namespace symstream
