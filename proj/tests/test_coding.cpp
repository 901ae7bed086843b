#include "doctest.h"

#include <cmath>

#include "cms/analysis.hpp"
#include "cms/coding.hpp"
#include "cms/rng.hpp"
#include "helpers.hpp"

using namespace cms;

namespace {

SymbolWord word(std::initializer_list<const char*> ids) {
  SymbolWord w;
  for (const char* id : ids) w.symbols.push_back(id);
  return w;
}

EventuallyPeriodicWord ep(std::initializer_list<const char*> period,
                          std::initializer_list<const char*> prefix = {}) {
  EventuallyPeriodicWord w;
  w.period = word(period);
  w.prefix = word(prefix);
  return w;
}

// random valid eventually periodic word: walk the edge graph for the period
// until it can close up, then extend a prefix from the period's target
EventuallyPeriodicWord random_ep_word(const ValidatedSystem& sys, RngStream& rng,
                                      int period_len, int prefix_len) {
  auto pick = [&](int atom) -> const Edge* {
    auto outgoing = sys.edges_from(atom);
    return outgoing[rng.next_u64() % outgoing.size()];
  };
  for (int attempt = 0; attempt < 1000; ++attempt) {
    EventuallyPeriodicWord w;
    int start = sys.atoms[rng.next_u64() % sys.atoms.size()].id;
    int at = start;
    for (int k = 0; k < period_len; ++k) {
      const Edge* e = pick(at);
      w.period.symbols.push_back(e->id);
      at = e->target;
    }
    if (at != start) continue;  // the period must close up
    for (int k = 0; k < prefix_len; ++k) {
      const Edge* e = pick(at);
      w.prefix.symbols.push_back(e->id);
      at = e->target;
    }
    if (w.is_valid_path(sys)) return w;
  }
  throw std::runtime_error("no cyclic word found");
}

}  // namespace

TEST_CASE("eval_X composes maps onto the anchor") {
  auto prdm = load_fixture("prdm.json");
  CHECK(eval_X(prdm, word({"b"})) == rat("1/4"));  // w_b(1/2)

  auto dmse = load_fixture("dmse.json");
  // the self-loop at 0 fixes the anchor
  CHECK(eval_X(dmse, word({"a"})) == rat("0"));
  // threefold halving from the midpoint anchor
  CHECK(eval_X(dmse, word({"b", "b", "b"})) == rat("1/16"));
}

TEST_CASE("eval_X rejects invalid paths naming the junction") {
  auto prdm = load_fixture("prdm.json");
  // t(a) = 2 but i(a) = 1
  CHECK_THROWS_WITH(eval_X(prdm, word({"a", "a"})), doctest::Contains("a -> a"));
}

TEST_CASE("coding_map_exact on periodic tails") {
  auto dmse = load_fixture("dmse.json");
  CHECK(coding_map_exact(dmse, ep({"b"})) == rat("0"));
  CHECK(coding_map_exact(dmse, ep({"c"})) == rat("1"));

  auto prdm = load_fixture("prdm.json");
  // composite w_c o w_b: x -> 1/2 + x/4, fixed point 2/3
  CHECK(coding_map_exact(prdm, ep({"b", "c"})) == rat("2/3"));
}

TEST_CASE("coding_map_exact rejects a non-contracting period") {
  auto ident = load_fixture("identity_edge.json");
  CHECK_THROWS_WITH(coding_map_exact(ident, ep({"i"})),
                    doctest::Contains("not contracting"));
}

TEST_CASE("truncated coding carries the explicit tail bound") {
  auto prdm = load_fixture("prdm.json");
  auto w = ep({"b"});  // valid: b is a self-loop on atom 2

  auto t40 = coding_map_truncated(
      prdm, [&](std::size_t k) { return w.backward_symbol(k); }, 40);
  CHECK(t40.error_bound < 5e-6);

  // depth 0 is the worst case 2 C1 sqrt(a) / (1 - sqrt(a)) with C1 = 1
  auto t0 = coding_map_truncated(
      prdm, [&](std::size_t k) { return w.backward_symbol(k); }, 0);
  double c1 = 2.0 * 0.25 / (1.0 - 0.5);
  CHECK(t0.error_bound ==
        doctest::Approx(2.0 * c1 * std::sqrt(0.5) / (1.0 - std::sqrt(0.5))));

  // exact vs truncated at depth 30 agree within the bound
  auto t30 = coding_map_truncated(
      prdm, [&](std::size_t k) { return w.backward_symbol(k); }, 30);
  double exact = coding_map_exact(prdm, w).to_double();
  CHECK(std::abs(t30.estimate.to_double() - exact) <= t30.error_bound);
}

TEST_CASE("truncation soundness on 500 seeded eventually periodic words") {
  for (const char* name : {"prdm.json", "dmse.json"}) {
    auto sys = load_fixture(name);
    RngStream rng(2024, 1);
    for (int k = 0; k < 500; ++k) {
      auto w = random_ep_word(sys, rng, 1 + rng.next_u64() % 4, rng.next_u64() % 4);
      int depth = 10 + static_cast<int>(rng.next_u64() % 30);
      auto t = coding_map_truncated(
          sys, [&](std::size_t j) { return w.backward_symbol(j); }, depth);
      Rational exact = coding_map_exact(sys, w);
      CHECK(std::abs((t.estimate - exact).to_double()) <= t.error_bound);
    }
  }
}

TEST_CASE("cylinder probabilities") {
  auto prdm = load_fixture("prdm.json");
  // p_b(1/2) * p_c(w_b(1/2)) = 1/2 * 3/4
  CHECK(cylinder_prob(prdm, rat("1/2"), word({"b", "c"})) == rat("3/8"));
  // x outside the first source atom
  CHECK(cylinder_prob(prdm, rat("0"), word({"b"})) == rat("0"));
  // depth-1 word is the bare probability
  CHECK(cylinder_prob(prdm, rat("1/3"), word({"b"})) == rat("1/3"));
  // invalid words carry zero mass
  CHECK(cylinder_prob(prdm, rat("0"), word({"a", "a"})) == rat("0"));
}

TEST_CASE("cylinder additivity: one-step extensions resum exactly") {
  auto sys = load_fixture("prdm.json");
  RngStream rng(5, 0);
  for (int k = 0; k < 200; ++k) {
    auto w = random_ep_word(sys, rng, 1 + rng.next_u64() % 3, rng.next_u64() % 3);
    SymbolWord base = w.period;
    for (const auto& s : w.prefix.symbols) base.symbols.push_back(s);
    Rational x(static_cast<long>(rng.next_u64() % 999) + 1, 1000);
    Rational total = cylinder_prob(sys, x, base);
    const Edge& last = *sys.edge_by_id(base.symbols.back());
    Rational sum(0);
    for (const Edge* e : sys.edges_from(last.target)) {
      SymbolWord ext = base;
      ext.symbols.push_back(e->id);
      sum += cylinder_prob(sys, x, ext);
    }
    CHECK(sum == total);
  }
}

TEST_CASE("shift compatibility: rotating the period applies the oldest map") {
  for (const char* name : {"prdm.json", "dmse.json", "mcae_n1.json"}) {
    auto sys = load_fixture(name);
    RngStream rng(99, 7);
    for (int k = 0; k < 200; ++k) {
      auto w = random_ep_word(sys, rng, 1 + rng.next_u64() % 5, 0);
      Rational f = coding_map_exact(sys, w);
      // S shifts the bi-infinite periodic word by one: the rotated period
      // ends at the old first symbol, and F(S sigma) = w_{first}(F(sigma))
      EventuallyPeriodicWord rotated;
      rotated.period.symbols.assign(w.period.symbols.begin() + 1, w.period.symbols.end());
      rotated.period.symbols.push_back(w.period.symbols.front());
      Rational lhs = coding_map_exact(sys, rotated);
      Rational rhs = sys.edge_by_id(w.period.symbols.front())->map(f);
      CHECK(lhs == rhs);
    }
  }
}

TEST_CASE("anchor independence of the exact coding map") {
  auto spec = parse_spec_file(fixture_path("prdm.json"));
  spec.anchors[2] = rat("1/3");
  auto moved = validate(spec);
  auto sys = load_fixture("prdm.json");
  for (auto& w : {ep({"b", "c"}), ep({"b"}, {"c", "c"}), ep({"c"})}) {
    CHECK(coding_map_exact(sys, w) == coding_map_exact(moved, w));
  }
}

TEST_CASE("word metric unrolls to the first disagreement") {
  auto m = word_metric(ep({"b"}, {"b", "b"}), ep({"c"}, {"b", "b"}));
  CHECK(m.k == 2);
  CHECK(m.exact() == rat("1/4"));
  CHECK(!m.is_upper_bound);

  auto same = word_metric(ep({"b", "c"}), ep({"b", "c"}));
  CHECK(same.exact_zero);

  // the same sequence written with a rolled-out prefix is still the same word
  auto rolled = word_metric(ep({"b"}), ep({"b"}, {"b", "b", "b"}));
  CHECK(rolled.exact_zero);
  auto rotated = word_metric(ep({"b", "c"}), ep({"c", "b"}, {"c"}));
  CHECK(rotated.exact_zero);

  auto tail_split = word_metric(ep({"b", "c"}), ep({"c"}));
  CHECK(tail_split.k == 1);
}

TEST_CASE("holder report: prdm constant and exponent") {
  auto sys = load_fixture("prdm.json");
  std::vector<std::pair<EventuallyPeriodicWord, EventuallyPeriodicWord>> pairs;
  pairs.push_back({ep({"b"}, {"b", "b"}), ep({"c"}, {"b", "b"})});
  pairs.push_back({ep({"b", "c"}), ep({"b", "c"})});
  auto rep = holder_check(sys, pairs);
  CHECK(rep.exponent == doctest::Approx(0.5));
  // 8b/((1-sqrt(a))(1-a)) = 2/((1-sqrt(1/2))/2)
  CHECK(rep.constant == doctest::Approx(13.6569).epsilon(1e-4));
  CHECK(rep.constant <= 13.66);
  CHECK(rep.violations == 0);
  CHECK(rep.pairs[1].distance.is_zero());
}
