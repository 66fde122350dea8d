#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <map>

#include "symstream/hngram.hpp"

using namespace symstream;

namespace {

PatternTable table_of(const std::vector<SymbolId>& seq, int n = 5) {
  PatternTable t(n);
  for (SymbolId s : seq) t.observe(s);
  return t;
}

// Brute-force count of a pattern's occurrences.
long occurrences(const std::vector<SymbolId>& seq, const Pattern& p) {
  long c = 0;
  for (std::size_t i = 0; i + p.size() <= seq.size(); ++i) {
    c += std::equal(p.begin(), p.end(), seq.begin() + static_cast<std::ptrdiff_t>(i));
  }
  return c;
}

}  // namespace

constexpr SymbolId a = 0, b = 1, c = 2, d = 3;

TEST_CASE("first observation") {
  PatternTable t;
  CHECK(t.empty());
  t.observe(a);
  CHECK(t.count_of({a}) == 1);
  CHECK(t.total(1, 0) == 1);
  CHECK(t.reference_total() == 1);
}

TEST_CASE("suffix counts") {
  const auto t = table_of({a, b, a, b});
  CHECK(t.count_of({a, b}) == 2);
  CHECK(t.count_of({b, a}) == 1);
  CHECK(t.count_of({a, b, a}) == 1);
  CHECK(t.count_of({a, a}) == 0);
  CHECK(t.find({a, a}) == -1);
  CHECK(t.reference_total() == 4);
}

TEST_CASE("counts agree with brute force on random streams") {
  Rng rng(9);
  std::vector<SymbolId> seq;
  for (int i = 0; i < 300; ++i) seq.push_back(static_cast<SymbolId>(rng.below(3)));
  const auto t = table_of(seq, 4);
  CHECK(t.reference_total() == 300);
  for (int n = 1; n <= 4; ++n) {
    long sum = 0;
    for (std::size_t i = 0; i < t.size(n); ++i) {
      CHECK(t.count(n, i) == occurrences(seq, t.entry(n, i).pattern));
      sum += t.count(n, i);
    }
    CHECK(sum == 300 - n + 1);
  }
}

TEST_CASE("windows seen since registration") {
  const auto t = table_of({a, a, b});
  // {b} is registered after two unigram windows; one window has passed since.
  CHECK(t.total(1, static_cast<std::size_t>(t.find({a}))) == 3);
  CHECK(t.total(1, static_cast<std::size_t>(t.find({b}))) == 1);
  CHECK(t.total(2, static_cast<std::size_t>(t.find({a, a}))) == 2);
}

TEST_CASE("merge inherits counts") {
  // bbc three times and bbd twice.
  PatternTable t(3);
  for (int r = 0; r < 3; ++r) {
    for (SymbolId s : {b, b, c}) t.observe(s);
  }
  for (int r = 0; r < 2; ++r) {
    for (SymbolId s : {b, b, d}) t.observe(s);
  }
  CHECK(t.count_of({b, b, c}) == 3);
  CHECK(t.count_of({b, b, d}) == 2);
  std::vector<long> before;
  for (int n = 1; n <= 3; ++n) before.push_back(t.sum_counts(n));
  t.apply_merge(std::vector<SymbolId>{c, d}, c);
  CHECK(t.count_of({b, b, c}) == 5);
  CHECK(t.count_of({b, b, d}) == 0);
  CHECK(!t.has_symbol(d));
  for (int n = 1; n <= 3; ++n) CHECK(t.sum_counts(n) == before[static_cast<std::size_t>(n - 1)]);
}

TEST_CASE("merge of unused symbols only touches the alphabet") {
  auto t = table_of({a, b, a, b});
  t.add_symbol(c);
  t.add_symbol(d);
  const auto before = t.to_json()["levels"];
  t.apply_merge(std::vector<SymbolId>{c, d}, c);
  CHECK(t.to_json()["levels"] == before);
  CHECK(t.alphabet() == std::vector<SymbolId>{a, b, c});
}

TEST_CASE("merge preconditions") {
  auto t = table_of({a, b, c});
  CHECK_THROWS_AS(t.apply_merge(std::vector<SymbolId>{b, c}, c), InvalidArgument);
  CHECK_THROWS_AS(t.apply_merge(std::vector<SymbolId>{b, d}, b), InvalidArgument);
  CHECK_THROWS_AS(t.apply_merge(std::vector<SymbolId>{b}, b), InvalidArgument);
  CHECK_THROWS_AS(t.apply_merge(std::vector<SymbolId>{b, c}, a), InvalidArgument);
}

TEST_CASE("removal drops patterns holding the symbol") {
  auto t = table_of({a, b, c, a, b});
  t.remove_symbol(c);
  CHECK(!t.has_symbol(c));
  for (int n = 1; n <= 5; ++n) {
    for (std::size_t i = 0; i < t.size(n); ++i) {
      const auto& p = t.entry(n, i).pattern;
      CHECK(std::find(p.begin(), p.end(), c) == p.end());
    }
  }
  CHECK(t.count_of({a, b}) == 2);
  // History after the removed symbol survives; new windows do not bridge it.
  t.observe(a);
  CHECK(t.count_of({b, a}) == 1);
  CHECK(t.count_of({a, b, a}) == 1);
  CHECK_THROWS_AS(t.remove_symbol(d), InvalidArgument);
}

TEST_CASE("structural events dispatch") {
  PatternTable t;
  t.apply(StructuralEvent::created(a));
  t.apply(StructuralEvent::created(b));
  CHECK(t.alphabet().size() == 2);
  t.observe(a);
  t.observe(b);
  t.apply(StructuralEvent::merged({a, b}));
  CHECK(t.alphabet() == std::vector<SymbolId>{a});
  CHECK(t.count_of({a, a}) == 1);
  t.apply(StructuralEvent::removed(a));
  CHECK(t.alphabet().empty());
}

TEST_CASE("joint probabilities") {
  {
    const auto t = table_of({a, a, a, a});
    const auto j = t.joint_probabilities();
    CHECK(j.probability({a}) == doctest::Approx(1.0));
    CHECK(j.probability({a, a, a}) == doctest::Approx(1.0));
  }
  {
    const auto t = table_of({a, b, a, b});
    const auto j = t.joint_probabilities();
    for (int n = 1; n <= 4; ++n) {
      double sum = j.level(n).residual;
      for (std::size_t i = 0; i < t.size(n); ++i) sum += j.probability(t.entry(n, i).pattern);
      CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
    }
    CHECK(j.probability({a}) == doctest::Approx(0.5));
    CHECK(j.probability({a, b}) >= j.probability({b, a}));
    // Never-seen bigrams share the level residual by their unigram product,
    // which for aa and bb is 1/4 each against a width residual of 1/2.
    const double r = j.level(2).residual;
    CHECK(j.probability({a, a}) == doctest::Approx(r * 0.25 / j.level(2).width_residual));
    CHECK(j.probability({a, a}) == doctest::Approx(j.probability({b, b})));
  }
  CHECK_THROWS_AS(PatternTable().joint_probabilities(), InvalidArgument);
}

TEST_CASE("next symbol prediction") {
  {
    const auto t = table_of({a, b, a, b});
    const auto p = predict_next(t, std::vector<SymbolId>{a});
    CHECK(p.symbol == b);
  }
  {
    const auto t = table_of({a, a, a, a});
    for (const auto& ctx : {std::vector<SymbolId>{a}, std::vector<SymbolId>{a, a, a}, std::vector<SymbolId>{}}) {
      const auto p = predict_next(t, ctx);
      CHECK(p.symbol == a);
      REQUIRE(p.distribution.size() == 1);
      CHECK(p.distribution[0].second == doctest::Approx(1.0));
    }
  }
  {
    const std::vector<SymbolId> seq{a, b, c, a, b, c, a, b, c};
    const auto t = table_of(seq);
    const auto p = predict_next(t, std::vector<SymbolId>{a, b});
    std::map<SymbolId, long> freq;
    for (SymbolId y : {a, b, c}) freq[y] = occurrences(seq, {a, b, y});
    const auto best = std::max_element(freq.begin(), freq.end(),
                                       [](auto& l, auto& r) { return l.second < r.second; });
    CHECK(p.symbol == best->first);
    CHECK(p.symbol == c);
    double total = 0;
    for (auto [s, q] : p.distribution) total += q;
    CHECK(total == doctest::Approx(1.0));
  }
  {
    PatternTable t;
    t.add_symbol(a);
    t.add_symbol(b);
    const auto p = predict_next(t, std::vector<SymbolId>{});
    REQUIRE(p.distribution.size() == 2);
    CHECK(p.distribution[0].second == doctest::Approx(0.5));
    CHECK(p.distribution[1].second == doctest::Approx(0.5));
  }
}

TEST_CASE("two repetitions suffice for every rotation") {
  const std::vector<SymbolId> base{a, b, a, c};
  std::vector<SymbolId> seq;
  for (int r = 0; r < 2; ++r) seq.insert(seq.end(), base.begin(), base.end());
  const auto t = table_of(seq);
  for (std::size_t k = 0; k < base.size(); ++k) {
    std::vector<SymbolId> ctx(seq.begin(), seq.begin() + static_cast<std::ptrdiff_t>(4 + k));
    CHECK(predict_next(t, ctx).symbol == base[k]);
  }
}

TEST_CASE("snapshot and fingerprint") {
  const auto t = table_of({a, b, a});
  const auto j = t.to_json();
  CHECK(j["max_length"] == 5);
  CHECK(j["levels"][1]["patterns"].size() == 2);
  CHECK(j["levels"][0]["patterns"][0]["C"] == 2);
  CHECK(j["levels"][0]["patterns"][0]["T"] == 3);
  CHECK(table_of({a, b, a}).fingerprint() == t.fingerprint());
  CHECK(table_of({a, b, b}).fingerprint() != t.fingerprint());
}
