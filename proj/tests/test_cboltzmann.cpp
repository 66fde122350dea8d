#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "symstream/cboltzmann.hpp"

using namespace symstream;

namespace {

constexpr SymbolId a = 0, b = 1, c = 2, d = 3;

ConceptualBoltzmann net_with(std::vector<SymbolId> symbols, CbParams p = {}, std::uint64_t seed = 1) {
  ConceptualBoltzmann net(p, seed);
  for (SymbolId s : symbols) net.adapt_structure(StructuralEvent::created(s));
  return net;
}

void check_invariants(const ConceptualBoltzmann& net) {
  const auto& w = net.weights();
  CHECK((w - w.transpose()).cwiseAbs().maxCoeff() == 0.0);
  for (std::size_t i = 0; i < net.unit_count(); ++i) {
    CHECK(w(static_cast<Index>(i), static_cast<Index>(i)) == 0.0);
    for (std::size_t j = 0; j < net.unit_count(); ++j) {
      const auto& u = net.units()[i];
      const auto& v = net.units()[j];
      if (!net.connected(i, j)) CHECK(w(static_cast<Index>(i), static_cast<Index>(j)) == 0.0);
      if (i != j && u.kind == CbUnit::Kind::Atom && v.kind == CbUnit::Kind::Atom && u.slot == v.slot) {
        CHECK_FALSE(net.connected(i, j));
      }
    }
  }
}

}  // namespace

TEST_CASE("annealing schedule") {
  const auto t = AnnealSchedule{}.temperatures();
  REQUIRE(t.size() == 100);
  CHECK(t.front() == doctest::Approx(50));
  CHECK(t.back() == doctest::Approx(0.005));
  const double ratio = t[1] / t[0];
  for (std::size_t i = 1; i < t.size(); ++i) CHECK(t[i] / t[i - 1] == doctest::Approx(ratio));
  CHECK_THROWS_AS((AnnealSchedule{1, 2, 10}.validate()), InvalidArgument);
  CHECK(CbParams{}.mu == 0.1);
}

TEST_CASE("created symbols add one atom per slot") {
  auto net = net_with({});
  CHECK(net.unit_count() == 0);
  net.adapt_structure(StructuralEvent::created(a));
  CHECK(net.unit_count() == 5);
  net.adapt_structure(StructuralEvent::created(b));
  CHECK(net.unit_count() == 10);
  CHECK(net.weights().cwiseAbs().maxCoeff() == 0.0);
  CHECK(net.atom(4, b) >= 0);
  CHECK(net.atom(5, b) == -1);
  CHECK_THROWS_AS(net.adapt_structure(StructuralEvent::created(a)), InvalidArgument);
  check_invariants(net);
}

TEST_CASE("only neighbouring slots are connected") {
  const auto net = net_with({a, b});
  const auto i = static_cast<std::size_t>(net.atom(1, a));
  CHECK(net.connected(i, static_cast<std::size_t>(net.atom(2, b))));
  CHECK(net.connected(i, static_cast<std::size_t>(net.atom(0, a))));
  CHECK_FALSE(net.connected(i, static_cast<std::size_t>(net.atom(3, b))));
  CHECK_FALSE(net.connected(i, static_cast<std::size_t>(net.atom(1, b))));
  auto copy = net;
  CHECK_THROWS_AS(copy.set_weight(i, static_cast<std::size_t>(net.atom(3, b)), 1.0), InvalidArgument);
}

TEST_CASE("zero weights sample uniformly") {
  auto net = net_with({a, b, c, d});
  std::array<int, 4> hits{};
  const int n = 10000;
  for (int k = 0; k < n; ++k) ++hits[static_cast<std::size_t>(net.unit_update(2, 1.0))];
  for (int h : hits) CHECK(std::abs(h - n / 4) < 4 * std::sqrt(n * 0.25 * 0.75));
}

TEST_CASE("sampling follows the softmax of net inputs") {
  auto net = net_with({a, b, c});
  net.set_weight(static_cast<std::size_t>(net.atom(1, a)), static_cast<std::size_t>(net.atom(2, b)), 1.0);
  net.clamp(1, a);
  const int n = 10000;
  int hits = 0;
  for (int k = 0; k < n; ++k) hits += net.unit_update(2, 1.0) == b;
  const double p = std::exp(1.0) / (std::exp(1.0) + 2.0);
  CHECK(std::abs(hits - n * p) < 4 * std::sqrt(n * p * (1 - p)));

  int cold = 0;
  for (int k = 0; k < 1000; ++k) cold += net.unit_update(2, 0.005) == b;
  CHECK(cold == 1000);
  CHECK_THROWS_AS(net.unit_update(1, 1.0), InvalidArgument);
  CHECK_THROWS_AS(net.unit_update(2, 0.0), InvalidArgument);
  CHECK_THROWS_AS(net_with({}).unit_update(0, 1.0), InvalidArgument);
}

TEST_CASE("training on a repeated bigram") {
  CbParams p;
  p.thresholds = {1e9, 1e9, 1e9, 1e9};
  auto net = net_with({a, b}, p);
  for (int k = 0; k < 50; ++k) net.train_instance(std::vector<SymbolId>{a, b});
  const auto i = net.atom(3, a), j = net.atom(4, b);
  const double w = net.weights()(i, j);
  CHECK(w > 0);
  CHECK(w == doctest::Approx(net.weights().maxCoeff()));
  check_invariants(net);
}

TEST_CASE("chunking on a strong weight") {
  auto net = net_with({a, b});
  const auto i = static_cast<std::size_t>(net.atom(1, a)), j = static_cast<std::size_t>(net.atom(2, b));
  net.set_weight(i, j, 0.19);
  CHECK(net.maybe_chunk().empty());
  net.set_weight(i, j, 0.25);
  const auto created = net.maybe_chunk();
  REQUIRE(created.size() == 1);
  CHECK(created[0].slot == 1);
  CHECK(created[0].pattern == std::vector<SymbolId>{a, b});
  CHECK_FALSE(net.connected(i, j));
  CHECK(net.weights()(static_cast<Index>(i), static_cast<Index>(j)) == 0.0);
  const auto k = static_cast<std::size_t>(net.chunk(1, {a, b}));
  CHECK(net.connected(k, i));
  CHECK(net.connected(k, j));
  CHECK(net.connected(k, static_cast<std::size_t>(net.atom(3, a))));
  CHECK(net.connected(k, static_cast<std::size_t>(net.atom(0, b))));
  CHECK_FALSE(net.connected(k, static_cast<std::size_t>(net.atom(1, b))));
  check_invariants(net);
}

TEST_CASE("chained chunks never exceed the window") {
  CbParams p;
  p.slots = 3;
  auto net = net_with({a}, p);
  for (int round = 0; round < 6; ++round) {
    for (std::size_t i = 0; i < net.unit_count(); ++i) {
      for (std::size_t j = i + 1; j < net.unit_count(); ++j) {
        if (net.connected(i, j)) net.set_weight(i, j, 1.0);
      }
    }
    net.maybe_chunk();
  }
  CHECK_FALSE(net.chunks().empty());
  for (const auto& ch : net.chunks()) {
    CHECK(ch.length() <= 3);
    CHECK(ch.slot + ch.length() <= 3);
  }
  check_invariants(net);
}

TEST_CASE("merge collapses colliding chunks") {
  auto net = net_with({a, b, c, d});
  net.set_weight(static_cast<std::size_t>(net.atom(0, b)), static_cast<std::size_t>(net.atom(1, c)), 0.5);
  net.set_weight(static_cast<std::size_t>(net.atom(0, b)), static_cast<std::size_t>(net.atom(1, d)), 0.3);
  net.maybe_chunk();
  REQUIRE(net.chunk(0, {b, c}) >= 0);
  REQUIRE(net.chunk(0, {b, d}) >= 0);
  net.set_weight(static_cast<std::size_t>(net.atom(2, a)), static_cast<std::size_t>(net.atom(3, c)), 0.07);
  net.set_weight(static_cast<std::size_t>(net.atom(2, a)), static_cast<std::size_t>(net.atom(3, d)), -0.04);
  const double mass_between = net.weights()(net.atom(2, a), net.atom(3, c)) + net.weights()(net.atom(2, a), net.atom(3, d));

  net.adapt_structure(StructuralEvent::merged({c, d}));
  CHECK(net.alphabet() == std::vector<SymbolId>{a, b, c});
  CHECK(net.chunk(0, {b, c}) >= 0);
  CHECK(net.chunk(0, {b, d}) == -1);
  CHECK(net.chunks().size() == 1);
  CHECK(net.weights()(net.atom(2, a), net.atom(3, c)) == doctest::Approx(mass_between));
  check_invariants(net);
  CHECK_THROWS_AS(net.adapt_structure(StructuralEvent::merged({c, 7})), InvalidArgument);
}

TEST_CASE("removing an unweighted symbol keeps the rest") {
  auto net = net_with({a, b, c});
  net.set_weight(static_cast<std::size_t>(net.atom(0, a)), static_cast<std::size_t>(net.atom(1, b)), 0.1);
  net.adapt_structure(StructuralEvent::removed(c));
  CHECK(net.unit_count() == 10);
  CHECK(net.weights()(net.atom(0, a), net.atom(1, b)) == doctest::Approx(0.1));
  CHECK(std::abs(net.weights().sum()) == doctest::Approx(0.2));
  CHECK_THROWS_AS(net.adapt_structure(StructuralEvent::removed(c)), InvalidArgument);
}

TEST_CASE("prediction after training on an alternation") {
  int hits = 0;
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    auto net = net_with({a, b}, {}, seed);
    const std::vector<SymbolId> seq{a, b, a, b, a, b, a, b, a, b, a, b};
    for (std::size_t k = 0; k < seq.size(); ++k) {
      const std::size_t from = k + 1 > 5 ? k + 1 - 5 : 0;
      net.train_instance(std::span<const SymbolId>(seq.data() + from, k + 1 - from));
    }
    hits += net.predict_next(std::vector<SymbolId>{b, a}) == b;
  }
  CHECK(hits > 80);
}

TEST_CASE("untrained prediction is near uniform") {
  std::array<int, 3> hits{};
  for (std::uint64_t seed = 1; seed <= 600; ++seed) {
    auto net = net_with({a, b, c}, {}, seed);
    ++hits[static_cast<std::size_t>(net.predict_next(std::vector<SymbolId>{a}))];
  }
  for (int h : hits) CHECK(std::abs(h - 200) < 4 * std::sqrt(600 * (1.0 / 3) * (2.0 / 3)));
  auto empty = net_with({});
  CHECK_THROWS_AS(empty.predict_next(std::vector<SymbolId>{a}), InvalidArgument);
}

TEST_CASE("seeded runs reproduce") {
  auto run = [](std::uint64_t seed) {
    auto net = net_with({a, b, c}, {}, seed);
    for (int k = 0; k < 10; ++k) net.train_instance(std::vector<SymbolId>{a, b, c, a, b});
    net.predict_next(std::vector<SymbolId>{a, b});
    return net.fingerprint();
  };
  CHECK(run(4) == run(4));
  CHECK(run(4) != run(5));
  const auto j = net_with({a}).to_json();
  CHECK(j.contains("slots"));
  CHECK(j.contains("units"));
  CHECK(j.contains("chunks"));
  CHECK(j.contains("weights"));
}
