#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include "symstream/common.hpp"

namespace symstream {

enum class EventKind { Created, Merged, Removed };

inline const char* to_string(EventKind kind) {
  switch (kind) {
    case EventKind::Created: return "created";
    case EventKind::Merged: return "merged";
    case EventKind::Removed: return "removed";
  }
  return "?";
}

/// A change to the live symbol alphabet.
///
/// Merged carries every source symbol (survivor included, ascending); the
/// survivor is the source that appeared first, i.e. the smallest id.
struct StructuralEvent {
  EventKind kind = EventKind::Created;
  SymbolId symbol = -1;
  std::vector<SymbolId> sources;

  static StructuralEvent created(SymbolId s) { return {EventKind::Created, s, {}}; }
  static StructuralEvent removed(SymbolId s) { return {EventKind::Removed, s, {}}; }
  static StructuralEvent merged(std::vector<SymbolId> from) {
    std::sort(from.begin(), from.end());
    from.erase(std::unique(from.begin(), from.end()), from.end());
    if (from.size() < 2) throw InvalidArgument("merge needs at least two distinct sources");
    const SymbolId survivor = from.front();
    return {EventKind::Merged, survivor, std::move(from)};
  }

  bool operator==(const StructuralEvent&) const = default;
};

/// Folds one event into an alphabet kept in first-appearance order.
inline void apply_event(std::vector<SymbolId>& alphabet, const StructuralEvent& e) {
  auto erase = [&](SymbolId s) { alphabet.erase(std::remove(alphabet.begin(), alphabet.end(), s), alphabet.end()); };
  switch (e.kind) {
    case EventKind::Created:
      alphabet.push_back(e.symbol);
      std::sort(alphabet.begin(), alphabet.end());
      break;
    case EventKind::Removed:
      erase(e.symbol);
      break;
    case EventKind::Merged:
      for (SymbolId s : e.sources) {
        if (s != e.symbol) erase(s);
      }
      break;
  }
}

}  // namespace symstream
