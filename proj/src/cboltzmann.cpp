#include "symstream/cboltzmann.hpp"

#include <algorithm>
#include <cstring>

namespace symstream {

std::vector<double> AnnealSchedule::temperatures() const {
  validate();
  std::vector<double> t(static_cast<std::size_t>(steps));
  if (steps == 1) {
    t[0] = end;
    return t;
  }
  const double ratio = std::log(end / start) / static_cast<double>(steps - 1);
  for (int k = 0; k < steps; ++k) t[static_cast<std::size_t>(k)] = start * std::exp(ratio * k);
  t.back() = end;
  return t;
}

void AnnealSchedule::validate() const {
  if (steps < 1) throw InvalidArgument("AnnealSchedule: steps must be at least 1");
  if (!(end > 0) || !(start > end)) throw InvalidArgument("AnnealSchedule: need start > end > 0");
}

ConceptualBoltzmann::ConceptualBoltzmann(CbParams params, std::uint64_t seed) : params_(params), rng_(seed) {
  if (params_.slots < 2) throw InvalidArgument("ConceptualBoltzmann: need at least two slots");
  if (!(params_.mu > 0)) throw InvalidArgument("ConceptualBoltzmann: learning rate must be positive");
  params_.schedule.validate();
  clamped_.assign(static_cast<std::size_t>(params_.slots), -1);
  phase_.active_slot.assign(static_cast<std::size_t>(params_.slots), true);
  phase_.clamped_slot.assign(static_cast<std::size_t>(params_.slots), false);
}

std::vector<CbUnit> ConceptualBoltzmann::chunks() const {
  std::vector<CbUnit> out;
  for (const auto& u : units_) {
    if (u.kind == CbUnit::Kind::Chunk) out.push_back(u);
  }
  return out;
}

void ConceptualBoltzmann::check_slot(int slot) const {
  if (slot < 0 || slot >= params_.slots) throw InvalidArgument("slot out of range");
}

std::size_t ConceptualBoltzmann::symbol_index(SymbolId s) const {
  auto it = std::find(alphabet_.begin(), alphabet_.end(), s);
  if (it == alphabet_.end()) throw InvalidArgument("unknown symbol " + std::to_string(s));
  return static_cast<std::size_t>(it - alphabet_.begin());
}

long ConceptualBoltzmann::atom(int slot, SymbolId symbol) const {
  for (std::size_t i = 0; i < units_.size(); ++i) {
    const auto& u = units_[i];
    if (u.kind == CbUnit::Kind::Atom && u.slot == slot && u.pattern[0] == symbol) return static_cast<long>(i);
  }
  return -1;
}

long ConceptualBoltzmann::chunk(int slot, const std::vector<SymbolId>& pattern) const {
  for (std::size_t i = 0; i < units_.size(); ++i) {
    const auto& u = units_[i];
    if (u.kind == CbUnit::Kind::Chunk && u.slot == slot && u.pattern == pattern) return static_cast<long>(i);
  }
  return -1;
}

bool ConceptualBoltzmann::structural(const CbUnit& a, const CbUnit& b) const {
  using K = CbUnit::Kind;
  if (a.kind == K::Atom && b.kind == K::Atom) return std::abs(a.slot - b.slot) == 1;
  if (a.kind == K::Chunk && b.kind == K::Chunk) return false;
  const CbUnit& c = a.kind == K::Chunk ? a : b;
  const CbUnit& x = a.kind == K::Chunk ? b : a;
  if (c.covers(x.slot)) return c.pattern[static_cast<std::size_t>(x.slot - c.slot)] == x.pattern[0];
  return x.slot == c.slot - 1 || x.slot == c.slot + c.length();
}

void ConceptualBoltzmann::add_unit(CbUnit u) {
  const Index n = static_cast<Index>(units_.size());
  w_.conservativeResize(n + 1, n + 1);
  mask_.conservativeResize(n + 1, n + 1);
  s_.conservativeResize(n + 1);
  w_.row(n).setZero();
  w_.col(n).setZero();
  mask_.row(n).setZero();
  mask_.col(n).setZero();
  s_(n) = 0;
  for (Index i = 0; i < n; ++i) {
    if (structural(units_[static_cast<std::size_t>(i)], u)) mask_(i, n) = mask_(n, i) = 1;
  }
  units_.push_back(std::move(u));
}

void ConceptualBoltzmann::keep_units(const std::vector<std::size_t>& keep) {
  const Index n = static_cast<Index>(keep.size());
  MatrixX<double> w(n, n), m(n, n);
  VectorX<double> s(n);
  std::vector<CbUnit> units;
  for (Index a = 0; a < n; ++a) {
    const auto ia = static_cast<Index>(keep[static_cast<std::size_t>(a)]);
    s(a) = s_(ia);
    units.push_back(units_[static_cast<std::size_t>(ia)]);
    for (Index b = 0; b < n; ++b) {
      const auto ib = static_cast<Index>(keep[static_cast<std::size_t>(b)]);
      w(a, b) = w_(ia, ib);
      m(a, b) = mask_(ia, ib);
    }
  }
  w_ = std::move(w);
  mask_ = std::move(m);
  s_ = std::move(s);
  units_ = std::move(units);
}

void ConceptualBoltzmann::set_weight(std::size_t i, std::size_t j, double w) {
  if (i >= units_.size() || j >= units_.size()) throw InvalidArgument("set_weight: unit out of range");
  if (!connected(i, j)) throw InvalidArgument("set_weight: units are not connected");
  w_(static_cast<Index>(i), static_cast<Index>(j)) = w_(static_cast<Index>(j), static_cast<Index>(i)) = w;
}

void ConceptualBoltzmann::adapt_structure(const StructuralEvent& e) {
  switch (e.kind) {
    case EventKind::Created: {
      if (std::find(alphabet_.begin(), alphabet_.end(), e.symbol) != alphabet_.end())
        throw InvalidArgument("adapt_structure: symbol " + std::to_string(e.symbol) + " already exists");
      if (e.symbol < 0) throw InvalidArgument("adapt_structure: negative symbol id");
      alphabet_.push_back(e.symbol);
      for (int slot = 0; slot < params_.slots; ++slot) add_unit({CbUnit::Kind::Atom, slot, {e.symbol}});
      break;
    }
    case EventKind::Removed: {
      alphabet_.erase(alphabet_.begin() + static_cast<std::ptrdiff_t>(symbol_index(e.symbol)));
      std::vector<std::size_t> keep;
      for (std::size_t i = 0; i < units_.size(); ++i) {
        const auto& p = units_[i].pattern;
        if (std::find(p.begin(), p.end(), e.symbol) == p.end()) keep.push_back(i);
      }
      keep_units(keep);
      for (auto& c : clamped_) {
        if (c == e.symbol) c = -1;
      }
      break;
    }
    case EventKind::Merged: {
      for (SymbolId s : e.sources) symbol_index(s);
      if (std::find(e.sources.begin(), e.sources.end(), e.symbol) == e.sources.end())
        throw InvalidArgument("adapt_structure: survivor must be a source");
      auto rewrite = [&](SymbolId x) {
        return std::find(e.sources.begin(), e.sources.end(), x) != e.sources.end() ? e.symbol : x;
      };
      std::vector<CbUnit> merged;
      std::vector<long> target(units_.size(), -1);
      std::vector<double> mass(units_.size());
      for (std::size_t i = 0; i < units_.size(); ++i) mass[i] = w_.row(static_cast<Index>(i)).cwiseAbs().sum();
      for (std::size_t i = 0; i < units_.size(); ++i) {
        CbUnit u = units_[i];
        std::transform(u.pattern.begin(), u.pattern.end(), u.pattern.begin(), rewrite);
        auto it = std::find(merged.begin(), merged.end(), u);
        if (it == merged.end()) {
          target[i] = static_cast<long>(merged.size());
          merged.push_back(std::move(u));
          continue;
        }
        const long t = it - merged.begin();
        if (u.kind == CbUnit::Kind::Atom) {
          target[i] = t;
          continue;
        }
        // Colliding chunks: the heavier wiring wins outright.
        for (std::size_t k = 0; k < i; ++k) {
          if (target[k] == t && mass[i] > mass[k]) {
            target[k] = -1;
            target[i] = t;
          }
        }
      }
      MatrixX<double> p = MatrixX<double>::Zero(static_cast<Index>(merged.size()), static_cast<Index>(units_.size()));
      for (std::size_t i = 0; i < units_.size(); ++i) {
        if (target[i] >= 0) p(target[i], static_cast<Index>(i)) = 1;
      }
      w_ = p * w_ * p.transpose();
      mask_ = (p * mask_ * p.transpose()).cwiseMin(1.0);
      w_.diagonal().setZero();
      mask_.diagonal().setZero();
      s_ = (p * s_).cwiseMin(1.0);
      units_ = std::move(merged);
      std::erase_if(alphabet_, [&](SymbolId x) { return x != e.symbol && rewrite(x) == e.symbol; });
      for (auto& c : clamped_) {
        if (c >= 0) c = rewrite(c);
      }
      break;
    }
  }
}

void ConceptualBoltzmann::clamp(int slot, SymbolId symbol) {
  check_slot(slot);
  symbol_index(symbol);
  clamped_[static_cast<std::size_t>(slot)] = symbol;
  set_slot(slot, symbol);
}

void ConceptualBoltzmann::release_all() { std::fill(clamped_.begin(), clamped_.end(), -1); }

void ConceptualBoltzmann::set_slot(int slot, SymbolId s) {
  for (std::size_t i = 0; i < units_.size(); ++i) {
    const auto& u = units_[i];
    if (u.kind == CbUnit::Kind::Atom && u.slot == slot) s_(static_cast<Index>(i)) = u.pattern[0] == s ? 1 : 0;
  }
}

SymbolId ConceptualBoltzmann::slot_value(int slot) const {
  check_slot(slot);
  for (std::size_t i = 0; i < units_.size(); ++i) {
    const auto& u = units_[i];
    if (u.kind == CbUnit::Kind::Atom && u.slot == slot && s_(static_cast<Index>(i)) > 0.5) return u.pattern[0];
  }
  return -1;
}

SymbolId ConceptualBoltzmann::unit_update(int slot, double temperature) {
  check_slot(slot);
  if (!(temperature > 0)) throw InvalidArgument("unit_update: temperature must be positive");
  if (clamped_[static_cast<std::size_t>(slot)] >= 0) throw InvalidArgument("unit_update: slot is clamped");
  if (alphabet_.empty()) throw InvalidArgument("unit_update: empty alphabet");
  std::vector<std::size_t> ids;
  std::vector<double> logits;
  for (std::size_t i = 0; i < units_.size(); ++i) {
    const auto& u = units_[i];
    if (u.kind != CbUnit::Kind::Atom || u.slot != slot) continue;
    ids.push_back(i);
    logits.push_back(w_.row(static_cast<Index>(i)).dot(s_) / temperature);
  }
  const double top = *std::max_element(logits.begin(), logits.end());
  double sum = 0;
  for (double& l : logits) sum += (l = std::exp(l - top));
  double r = rng_.uniform() * sum;
  std::size_t pick = ids.size() - 1;
  for (std::size_t k = 0; k < ids.size(); ++k) {
    if (r < logits[k]) {
      pick = k;
      break;
    }
    r -= logits[k];
  }
  const SymbolId chosen = units_[ids[pick]].pattern[0];
  for (std::size_t i : ids) s_(static_cast<Index>(i)) = 0;
  s_(static_cast<Index>(ids[pick])) = 1;
  return chosen;
}

void ConceptualBoltzmann::sample_chunk(std::size_t i, double temperature) {
  const double net = w_.row(static_cast<Index>(i)).dot(s_) / temperature;
  const double p = 1 / (1 + std::exp(-net));
  s_(static_cast<Index>(i)) = rng_.bernoulli(p) ? 1 : 0;
}

bool ConceptualBoltzmann::unit_active(std::size_t i, const Phase& ph) const {
  const auto& u = units_[i];
  for (int k = u.slot; k < u.slot + u.length(); ++k) {
    if (!ph.active_slot[static_cast<std::size_t>(k)]) return false;
  }
  return true;
}

void ConceptualBoltzmann::randomize(const Phase& ph) {
  for (std::size_t i = 0; i < units_.size(); ++i) {
    if (!unit_active(i, ph)) s_(static_cast<Index>(i)) = 0;
    else if (units_[i].kind == CbUnit::Kind::Chunk) s_(static_cast<Index>(i)) = rng_.bernoulli(0.5) ? 1 : 0;
  }
  for (int slot = 0; slot < params_.slots; ++slot) {
    const auto k = static_cast<std::size_t>(slot);
    if (!ph.active_slot[k]) continue;
    if (ph.clamped_slot[k]) set_slot(slot, clamped_[k]);
    else set_slot(slot, alphabet_[rng_.below(alphabet_.size())]);
  }
}

void ConceptualBoltzmann::anneal(const Phase& ph) {
  std::vector<std::size_t> hidden;
  for (std::size_t i = 0; i < units_.size(); ++i) {
    if (units_[i].kind == CbUnit::Kind::Chunk && unit_active(i, ph)) hidden.push_back(i);
  }
  bool any_free = !hidden.empty();
  for (int slot = 0; slot < params_.slots; ++slot) {
    const auto k = static_cast<std::size_t>(slot);
    if (ph.active_slot[k] && !ph.clamped_slot[k]) any_free = true;
  }
  if (!any_free) return;
  for (double t : params_.schedule.temperatures()) {
    for (int slot = 0; slot < params_.slots; ++slot) {
      const auto k = static_cast<std::size_t>(slot);
      if (ph.active_slot[k] && !ph.clamped_slot[k]) unit_update(slot, t);
    }
    for (std::size_t i : hidden) sample_chunk(i, t);
  }
}

double ConceptualBoltzmann::threshold(int length) const {
  const auto k = static_cast<std::size_t>(std::clamp(length, 1, 4) - 1);
  return params_.thresholds[k];
}

std::vector<CbUnit> ConceptualBoltzmann::train_instance(std::span<const SymbolId> window) {
  if (window.empty()) throw InvalidArgument("train_instance: empty window");
  for (SymbolId s : window) symbol_index(s);
  const int n = std::min(static_cast<int>(window.size()), params_.slots);
  const int first = params_.slots - n;
  const auto tail = window.subspan(window.size() - static_cast<std::size_t>(n));

  Phase ph;
  ph.active_slot.assign(static_cast<std::size_t>(params_.slots), false);
  ph.clamped_slot.assign(static_cast<std::size_t>(params_.slots), false);
  release_all();
  for (int k = 0; k < n; ++k) {
    const auto slot = static_cast<std::size_t>(first + k);
    ph.active_slot[slot] = true;
    ph.clamped_slot[slot] = true;
    clamped_[slot] = tail[static_cast<std::size_t>(k)];
  }
  randomize(ph);
  anneal(ph);
  const VectorX<double> plus = s_;

  std::fill(ph.clamped_slot.begin(), ph.clamped_slot.end(), false);
  release_all();
  randomize(ph);
  anneal(ph);
  const VectorX<double> minus = s_;

  w_ += (params_.mu * (plus * plus.transpose() - minus * minus.transpose())).cwiseProduct(mask_);
  return maybe_chunk();
}

std::vector<CbUnit> ConceptualBoltzmann::maybe_chunk() {
  struct Trigger {
    std::size_t left, right;
    double w;
  };
  std::vector<Trigger> triggers;
  for (std::size_t i = 0; i < units_.size(); ++i) {
    for (std::size_t j = i + 1; j < units_.size(); ++j) {
      if (!connected(i, j)) continue;
      const auto& a = units_[i];
      const auto& b = units_[j];
      if (a.kind == CbUnit::Kind::Chunk && b.kind == CbUnit::Kind::Chunk) continue;
      if (a.covers(b.slot) || b.covers(a.slot)) continue;
      const double w = w_(static_cast<Index>(i), static_cast<Index>(j));
      if (w <= threshold(std::max(a.length(), b.length()))) continue;
      if (a.slot < b.slot) triggers.push_back({i, j, w});
      else triggers.push_back({j, i, w});
    }
  }
  std::vector<CbUnit> created;
  for (const auto& t : triggers) {
    const CbUnit left = units_[t.left];
    const CbUnit right = units_[t.right];
    w_(static_cast<Index>(t.left), static_cast<Index>(t.right)) = 0;
    w_(static_cast<Index>(t.right), static_cast<Index>(t.left)) = 0;
    mask_(static_cast<Index>(t.left), static_cast<Index>(t.right)) = 0;
    mask_(static_cast<Index>(t.right), static_cast<Index>(t.left)) = 0;
    std::vector<SymbolId> pattern = left.pattern;
    pattern.insert(pattern.end(), right.pattern.begin(), right.pattern.end());
    if (static_cast<int>(pattern.size()) > params_.slots || chunk(left.slot, pattern) >= 0) continue;
    CbUnit c{CbUnit::Kind::Chunk, left.slot, pattern};
    add_unit(c);
    const auto id = units_.size() - 1;
    for (int k = 0; k < c.length(); ++k) {
      const long a = atom(c.slot + k, pattern[static_cast<std::size_t>(k)]);
      if (a >= 0) set_weight(id, static_cast<std::size_t>(a), t.w);
    }
    created.push_back(std::move(c));
  }
  return created;
}

SymbolId ConceptualBoltzmann::predict_next(std::span<const SymbolId> context) {
  if (alphabet_.empty()) throw InvalidArgument("predict_next: empty alphabet");
  if (context.empty()) throw InvalidArgument("predict_next: empty context");
  for (SymbolId s : context) symbol_index(s);
  const int last = params_.slots - 1;
  const int m = std::min(static_cast<int>(context.size()), last);
  const auto tail = context.subspan(context.size() - static_cast<std::size_t>(m));
  Phase ph;
  ph.active_slot.assign(static_cast<std::size_t>(params_.slots), false);
  ph.clamped_slot.assign(static_cast<std::size_t>(params_.slots), false);
  release_all();
  for (int k = 0; k < m; ++k) {
    const auto slot = static_cast<std::size_t>(last - m + k);
    ph.active_slot[slot] = true;
    ph.clamped_slot[slot] = true;
    clamped_[slot] = tail[static_cast<std::size_t>(k)];
  }
  ph.active_slot[static_cast<std::size_t>(last)] = true;
  randomize(ph);
  anneal(ph);
  const SymbolId out = slot_value(last);
  release_all();
  return out;
}

nlohmann::json ConceptualBoltzmann::to_json() const {
  nlohmann::json units = nlohmann::json::array(), chunk_list = nlohmann::json::array(), weights = nlohmann::json::array();
  for (std::size_t i = 0; i < units_.size(); ++i) {
    const auto& u = units_[i];
    nlohmann::json j = {{"id", i}, {"kind", u.kind == CbUnit::Kind::Atom ? "atom" : "chunk"}, {"slot", u.slot}, {"pattern", u.pattern}};
    if (u.kind == CbUnit::Kind::Chunk) chunk_list.push_back(j);
    units.push_back(std::move(j));
    for (std::size_t k = i + 1; k < units_.size(); ++k) {
      const double w = w_(static_cast<Index>(i), static_cast<Index>(k));
      if (connected(i, k) && w != 0) weights.push_back({i, k, w});
    }
  }
  return {{"slots", params_.slots}, {"alphabet", alphabet_}, {"units", units}, {"chunks", chunk_list}, {"weights", weights}};
}

std::uint64_t ConceptualBoltzmann::fingerprint() const {
  std::string bytes;
  auto put = [&](const void* p, std::size_t n) { bytes.append(static_cast<const char*>(p), n); };
  for (SymbolId s : alphabet_) put(&s, sizeof s);
  for (const auto& u : units_) {
    put(&u.slot, sizeof u.slot);
    for (SymbolId s : u.pattern) put(&s, sizeof s);
  }
  put(w_.data(), sizeof(double) * static_cast<std::size_t>(w_.size()));
  put(mask_.data(), sizeof(double) * static_cast<std::size_t>(mask_.size()));
  return fnv1a(bytes);
}

}  // namespace symstream
