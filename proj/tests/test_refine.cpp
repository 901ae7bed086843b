#include "doctest.h"

#include "cms/analysis.hpp"
#include "cms/refine.hpp"
#include "cms/rng.hpp"
#include "helpers.hpp"

using namespace cms;

namespace {

Refinement dyadic(const char* fixture) {
  auto base = load_fixture(fixture);
  return build_refinement(base, {CutSpec{2, rat("1/2"), true}});
}

SymbolWord random_refined_path(const Refinement& ref, RngStream& rng, int len) {
  const auto& sys = ref.refined;
  SymbolWord w;
  int at = sys.atoms[rng.next_u64() % sys.atoms.size()].id;
  for (int k = 0; k < len; ++k) {
    auto outgoing = sys.edges_from(at);
    const Edge* e = outgoing[rng.next_u64() % outgoing.size()];
    w.symbols.push_back(e->id);
    at = e->target;
  }
  return w;
}

EventuallyPeriodicWord random_refined_ep(const Refinement& ref, RngStream& rng, int period_len,
                                         int prefix_len) {
  const auto& sys = ref.refined;
  auto pick = [&](int atom) -> const Edge* {
    auto outgoing = sys.edges_from(atom);
    return outgoing[rng.next_u64() % outgoing.size()];
  };
  for (int attempt = 0; attempt < 2000; ++attempt) {
    EventuallyPeriodicWord w;
    int start = sys.atoms[rng.next_u64() % sys.atoms.size()].id;
    int at = start;
    for (int k = 0; k < period_len; ++k) {
      const Edge* e = pick(at);
      w.period.symbols.push_back(e->id);
      at = e->target;
    }
    if (at != start) continue;
    for (int k = 0; k < prefix_len; ++k) {
      const Edge* e = pick(at);
      w.prefix.symbols.push_back(e->id);
      at = e->target;
    }
    if (w.is_valid_path(sys)) return w;
  }
  throw std::runtime_error("no cyclic refined word found");
}

}  // namespace

TEST_CASE("dyadic refinement of prdm: 4 atoms, 6 restricted edges") {
  auto ref = dyadic("prdm.json");
  CHECK(ref.refined.atoms.size() == 4);
  // a and d restrict whole, b and c split over the two halves
  CHECK(ref.refined.edges.size() == 6);
  // atom embedding covers every refined atom and r is surjective
  CHECK(ref.atom_embedding.size() == 4);
  std::set<std::string> base_ids;
  for (const auto& [re, be] : ref.r) base_ids.insert(be);
  CHECK(base_ids == std::set<std::string>{"a", "b", "c", "d"});
}

TEST_CASE("refined atoms partition their base atoms") {
  auto ref = dyadic("prdm.json");
  for (const auto& a : ref.refined.atoms) {
    const Atom& parent = ref.base.atom(ref.atom_embedding.at(a.id));
    CHECK(atom_contains_atom(parent, a));
  }
  // the two halves of (0,1) are disjoint and abut at 1/2
  std::vector<const Atom*> halves;
  for (const auto& a : ref.refined.atoms)
    if (ref.atom_embedding.at(a.id) == 2) halves.push_back(&a);
  REQUIRE(halves.size() == 2);
  CHECK(halves[0]->hi == halves[1]->lo);
  CHECK(halves[0]->hi_closed != halves[1]->lo_closed);
}

TEST_CASE("refined anchors keep the base anchor when it fits") {
  auto ref = dyadic("prdm.json");
  // base anchor 1/2 lands in (0,1/2]; the other half gets its midpoint
  bool found_half = false, found_mid = false;
  for (const auto& a : ref.refined.atoms) {
    if (ref.atom_embedding.at(a.id) != 2) continue;
    Rational anchor = ref.refined.anchors.at(a.id);
    if (anchor == rat("1/2")) found_half = true;
    if (anchor == rat("3/4")) found_mid = true;
  }
  CHECK(found_half);
  CHECK(found_mid);
}

TEST_CASE("cuts must be interior") {
  auto base = load_fixture("prdm.json");
  CHECK_THROWS_WITH(build_refinement(base, {CutSpec{2, rat("0"), true}}),
                    doctest::Contains("cut not interior"));
  CHECK_THROWS_WITH(build_refinement(base, {CutSpec{2, rat("1"), true}}),
                    doctest::Contains("cut not interior"));
}

TEST_CASE("a cut at 1/3 breaks the Markov property with witness 1/3") {
  auto base = load_fixture("prdm.json");
  CHECK_THROWS_WITH(build_refinement(base, {CutSpec{2, rat("1/3"), true}}),
                    doctest::Contains("1/3"));
}

TEST_CASE("psi projects symbol-wise and preserves validity") {
  auto ref = dyadic("prdm.json");
  SymbolWord empty;
  CHECK(psi_project(ref, empty).empty());

  RngStream rng(17, 0);
  for (int k = 0; k < 1000; ++k) {
    SymbolWord w = random_refined_path(ref, rng, 1 + rng.next_u64() % 8);
    REQUIRE(w.is_valid_path(ref.refined));
    SymbolWord base_word = psi_project(ref, w);
    CHECK(base_word.is_valid_path(ref.base));
    CHECK(base_word.size() == w.size());
  }
}

TEST_CASE("cylinder pushforward: x = 1/2, word (b,c) carries 3/8 on both levels") {
  auto ref = dyadic("prdm.json");
  SymbolWord w;
  w.symbols = {"b", "c"};
  auto chk = cylinder_pushforward_check(ref, rat("1/2"), w);
  CHECK(chk.equal);
  CHECK(chk.lhs == rat("3/8"));
  CHECK(chk.rhs == rat("3/8"));
}

TEST_CASE("cylinder pushforward: zero-probability words agree at zero") {
  auto ref = dyadic("prdm.json");
  SymbolWord w;
  w.symbols = {"b"};
  auto chk = cylinder_pushforward_check(ref, rat("0"), w);  // 0 is not in (0,1)
  CHECK(chk.equal);
  CHECK(chk.lhs == rat("0"));
}

TEST_CASE("cylinder pushforward: depth-3 words from 1/4 carry total mass 1") {
  auto ref = dyadic("prdm.json");
  const Rational x = rat("1/4");
  // enumerate all base words of length 3 starting anywhere
  Rational lhs_total(0), rhs_total(0);
  std::vector<SymbolWord> words;
  std::function<void(SymbolWord, int, int)> extend = [&](SymbolWord w, int at, int left) {
    if (left == 0) {
      words.push_back(w);
      return;
    }
    for (const Edge* e : ref.base.edges_from(at)) {
      SymbolWord w2 = w;
      w2.symbols.push_back(e->id);
      extend(w2, e->target, left - 1);
    }
  };
  for (const auto& a : ref.base.atoms) extend(SymbolWord{}, a.id, 3);
  for (const auto& w : words) {
    auto chk = cylinder_pushforward_check(ref, x, w);
    CHECK(chk.equal);
    lhs_total += chk.lhs;
    rhs_total += chk.rhs;
  }
  CHECK(lhs_total == rat("1"));
  CHECK(rhs_total == rat("1"));
}

TEST_CASE("coding commute: refined fixed points project onto base fixed points") {
  auto ref = dyadic("dmse.json");
  // the self-loop restriction of b on the left half codes to 0
  const Edge* left_loop = nullptr;
  for (const auto& e : ref.refined.edges)
    if (ref.r.at(e.id) == "b" && e.source == e.target) left_loop = &e;
  REQUIRE(left_loop != nullptr);
  EventuallyPeriodicWord w;
  w.period.symbols = {left_loop->id};
  CHECK(coding_map_exact(ref.refined, w) == rat("0"));
  auto rep = coding_commute_check(ref, {w});
  CHECK(rep.failures == 0);

  // and the c-side loop codes to 1 on both levels
  const Edge* right_loop = nullptr;
  for (const auto& e : ref.refined.edges)
    if (ref.r.at(e.id) == "c" && e.source == e.target) right_loop = &e;
  REQUIRE(right_loop != nullptr);
  EventuallyPeriodicWord v;
  v.period.symbols = {right_loop->id};
  CHECK(coding_map_exact(ref.refined, v) == rat("1"));
  CHECK(coding_commute_check(ref, {v}).failures == 0);
}

TEST_CASE("coding commute holds on 100 seeded refined words") {
  auto ref = dyadic("dmse.json");
  RngStream rng(23, 0);
  std::vector<EventuallyPeriodicWord> words;
  for (int k = 0; k < 100; ++k)
    words.push_back(random_refined_ep(ref, rng, 1 + rng.next_u64() % 4, rng.next_u64() % 4));
  auto rep = coding_commute_check(ref, words);
  CHECK(rep.failures == 0);
}

TEST_CASE("the markov operator is invariant under refinement") {
  auto ref = dyadic("prdm.json");
  RngStream rng(31, 0);
  for (int k = 0; k < 1000; ++k) {
    long den = 1 + static_cast<long>(rng.next_u64() % 9999);
    long num = static_cast<long>(rng.next_u64() % (den + 1));
    Rational x(num, den);
    for (const auto& base_atom : ref.base.atoms) {
      Atom atom = base_atom;
      auto f = [&atom](const Rational& y) {
        return atom.contains(y) ? Rational(1) : Rational(0);
      };
      CHECK(ref.base.apply_U(f, x) == ref.refined.apply_U(f, x));
    }
  }
}

TEST_CASE("consistency transfers to the refined system") {
  // the base passes the global-continuity rule, the refined system has
  // finite chain sums: its classify verdict stays consistent
  auto ref = dyadic("dmse.json");
  CHECK(ucct_rule(ref.base).holds);
  auto rep = classify(ref.refined);
  CHECK(rep.consistency.tag == ConsistencyTag::consistent);
  CHECK(rep.existence.tag == ExistenceTag::guaranteed);
}

TEST_CASE("refined spec JSON round-trips through the parser") {
  auto ref = dyadic("prdm.json");
  auto spec = parse_spec(refined_spec_json(ref));
  auto sys = validate(spec);
  CHECK(sys.atoms.size() == ref.refined.atoms.size());
  CHECK(sys.edges.size() == ref.refined.edges.size());
}
