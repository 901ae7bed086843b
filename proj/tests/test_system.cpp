#include "doctest.h"

#include "cms/rng.hpp"
#include "cms/system.hpp"
#include "helpers.hpp"

using namespace cms;

TEST_CASE("prdm parses to 3 atoms and 4 edges") {
  auto spec = parse_spec_file(fixture_path("prdm.json"));
  CHECK(spec.atoms.size() == 3);
  CHECK(spec.edges.size() == 4);
  CHECK(spec.backend == Backend::interval);
}

TEST_CASE("parse errors carry their cause") {
  CHECK_THROWS_WITH_AS(parse_spec(R"({"backend":"interval","space":{"lo":"0","hi":"1"},)"
                                  R"("atoms":[{"id":1,"kind":"interval","lo":"0","hi":"1"}],)"
                                  R"("edges":[]})"),
                       doctest::Contains("system has no edges"), SpecError);
  CHECK_THROWS_WITH_AS(parse_spec(R"({"backend":"interval","space":{"lo":"0","hi":"1"},)"
                                  R"("atoms":[{"id":1,"kind":"point","at":"1/0"}],)"
                                  R"("edges":[{"id":"e","from":1,)"
                                  R"("map":{"slope":"1","intercept":"0"},)"
                                  R"("prob":{"slope":"0","intercept":"1"}}]})"),
                       doctest::Contains("zero denominator"), SpecError);
  CHECK_THROWS_WITH_AS(parse_spec(R"({"backend":"banana"})"),
                       doctest::Contains("unknown backend"), SpecError);
  CHECK_THROWS_WITH_AS(
      parse_spec(R"({"backend":"interval","space":{"lo":"0","hi":"1"},)"
                 R"("atoms":[{"id":1,"kind":"point","at":"0"},{"id":1,"kind":"point","at":"1"}],)"
                 R"("edges":[{"id":"e","from":1,"map":{"slope":"1","intercept":"0"},)"
                 R"("prob":{"slope":"0","intercept":"1"}}]})"),
      doctest::Contains("duplicate atom id"), SpecError);
}

TEST_CASE("validation resolves edge targets by exact interval containment") {
  auto sys = load_fixture("prdm.json");
  CHECK(sys.edge_by_id("a")->target == 2);
  CHECK(sys.edge_by_id("b")->target == 2);  // w0((0,1)) = (0,1/2) inside (0,1)
  CHECK(sys.edge_by_id("c")->target == 2);
  CHECK(sys.edge_by_id("d")->target == 2);
}

TEST_CASE("dmse probability sums cancel exactly") {
  CHECK_NOTHROW(load_fixture("dmse.json"));
}

TEST_CASE("straddled edge image is rejected with the cut point as witness") {
  CHECK_THROWS_WITH_AS(load_fixture("broken_straddle.json"), doctest::Contains("1/3"),
                       ValidationError);
}

TEST_CASE("partition defects are rejected with witnesses") {
  CHECK_THROWS_WITH_AS(load_fixture("broken_gap.json"), doctest::Contains("gap"),
                       ValidationError);
  CHECK_THROWS_WITH_AS(load_fixture("broken_overlap.json"), doctest::Contains("overlap"),
                       ValidationError);
  CHECK_THROWS_WITH_AS(load_fixture("broken_probsum.json"),
                       doctest::Contains("probability sum"), ValidationError);
  CHECK_THROWS_WITH_AS(load_fixture("broken_zeroprob.json"),
                       doctest::Contains("identically zero"), ValidationError);
}

TEST_CASE("anchors default to midpoints and points, and must lie inside") {
  auto sys = load_fixture("prdm.json");
  CHECK(sys.anchors.at(1) == rat("0"));
  CHECK(sys.anchors.at(2) == rat("1/2"));
  CHECK(sys.anchors.at(3) == rat("1"));

  auto spec = parse_spec_file(fixture_path("prdm.json"));
  spec.anchors[2] = rat("2");
  CHECK_THROWS_WITH_AS(validate(spec), doctest::Contains("outside atom"), ValidationError);
}

TEST_CASE("atom_of locates points exactly") {
  auto sys = load_fixture("prdm.json");
  CHECK(sys.atom_of(rat("0")) == 1);
  CHECK(sys.atom_of(rat("1/2")) == 2);
  CHECK(sys.atom_of(rat("1")) == 3);
  CHECK(!sys.atom_of(rat("2")).has_value());
}

TEST_CASE("partition property: every seeded rational point lies in exactly one atom") {
  auto sys = load_fixture("prdm.json");
  RngStream rng(7, 0);
  for (int k = 0; k < 1000; ++k) {
    long num = static_cast<long>(rng.next_u64() % 10000);
    long den = static_cast<long>(rng.next_u64() % 9999) + 1;
    Rational x(num % (den + 1), den);  // in [0, 1]
    int hits = 0;
    for (const auto& a : sys.atoms)
      if (a.contains(x)) ++hits;
    CHECK(hits == 1);
  }
}

TEST_CASE("stochasticity at closure corners is exact") {
  for (const char* name : {"prdm.json", "dmse.json", "gnce.json", "mcae_n1.json"}) {
    auto sys = load_fixture(name);
    for (const auto& atom : sys.atoms) {
      for (const auto& corner : atom.closure_corners()) {
        Rational total(0);
        for (const Edge* e : sys.edges_from(atom.id)) total += e->prob(corner);
        CHECK(total == Rational(1));
      }
    }
  }
}

TEST_CASE("target soundness: corner images lie in the target closure") {
  for (const char* name : {"prdm.json", "dmse.json", "gnce.json", "mcae_n1.json"}) {
    auto sys = load_fixture(name);
    for (const auto& e : sys.edges) {
      const Atom& src = sys.atom(e.source);
      const Atom& tgt = sys.atom(e.target);
      for (const auto& corner : src.closure_corners()) {
        Rational img = e.map(corner);
        bool inside = tgt.contains(img);
        bool in_closure =
            tgt.kind == AtomKind::point ? img == tgt.lo : (img >= tgt.lo && img <= tgt.hi);
        CHECK((inside || in_closure));
      }
    }
  }
}

TEST_CASE("subshift g table is validated for admissibility and normalization") {
  CHECK_NOTHROW(load_fixture("gmc_chain.json"));

  auto missing = parse_spec(R"({"backend":"subshift",
    "graph":{"vertices":[1],"edges":[{"id":"h","from":1,"to":1},{"id":"t","from":1,"to":1}]},
    "g":{"memory":1,"table":{"h":"1/2"}}})");
  CHECK_THROWS_WITH_AS(validate(missing), doctest::Contains("missing entry"), ValidationError);
}

TEST_CASE("subshift normalization failure names the context") {
  auto spec = parse_spec(R"({"backend":"subshift",
    "graph":{"vertices":[1],"edges":[{"id":"h","from":1,"to":1},{"id":"t","from":1,"to":1}]},
    "g":{"memory":1,"table":{"h":"1/2","t":"1/3"}}})");
  CHECK_THROWS_WITH_AS(validate(spec), doctest::Contains("sum to"), ValidationError);
}

TEST_CASE("dead-end vertices are rejected") {
  auto spec = parse_spec(R"({"backend":"subshift",
    "graph":{"vertices":[1,2],"edges":[{"id":"a","from":1,"to":1},{"id":"b","from":1,"to":2}]},
    "g":{"memory":1,"table":{"a":"1/2","b":"1/2"}}})");
  CHECK_THROWS_WITH_AS(validate(spec), doctest::Contains("outgoing"), ValidationError);
}

TEST_CASE("tail family instantiates with a verified truncation error") {
  auto sys = load_fixture("ieex.json");
  REQUIRE(sys.tail.has_value());
  const auto& t = *sys.tail;
  CHECK(t.eps_tail == doctest::Approx(0.06846).epsilon(0.01));
  // total mass plus the truncation bound reaches 1
  CHECK(t.mass < 1.0);
  CHECK(t.mass + t.eps_tail >= 1.0 - 1e-6);
  // the contraction sum converges well below 1/2
  CHECK(t.contraction_partial + t.contraction_tail_bound < 0.5);
}

TEST_CASE("exact markov operator on indicator functions") {
  auto sys = load_fixture("prdm.json");
  // U 1_{K2}(1/2) = p_b + p_c = 1 since both images stay interior
  auto f = [&](const Rational& y) {
    return sys.atom_of(y) == 2 ? Rational(1) : Rational(0);
  };
  CHECK(sys.apply_U(f, rat("1/2")) == Rational(1));
  // U id(x) = 1/2 identically under prdm
  auto id = [](const Rational& y) { return y; };
  CHECK(sys.apply_U(id, rat("7/10")) == rat("1/2"));
  CHECK(sys.apply_U(id, rat("1/3")) == rat("1/2"));
}
