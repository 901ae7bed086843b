#include "doctest.h"

#include <algorithm>
#include <functional>

#include "cms/analysis.hpp"
#include "cms/rng.hpp"
#include "helpers.hpp"

using namespace cms;

namespace {

// Independent oracle for R-iterates: assemble the boundary transfer matrix by
// direct evaluation and push the R1 vector through explicit matrix powers.
std::vector<BoundaryFn> a_matrix_iterates(const ValidatedSystem& sys, int count) {
  auto boundary = boundary_set(sys);
  std::vector<Rational> pts;
  for (const auto& bp : boundary) pts.push_back(bp.point);
  std::size_t n = pts.size();

  std::vector<std::vector<Rational>> A(n, std::vector<Rational>(n, Rational(0)));
  for (std::size_t i = 0; i < n; ++i) {
    for (const auto& e : sys.edges) {
      auto bpts = sys.atom(e.source).boundary_points();
      if (std::find(bpts.begin(), bpts.end(), pts[i]) == bpts.end()) continue;
      Rational mass = e.prob(pts[i]);
      if (mass.is_zero()) continue;
      Rational img = e.map(pts[i]);
      for (std::size_t j = 0; j < n; ++j)
        if (pts[j] == img) A[i][j] += mass;
    }
  }

  std::vector<Rational> v(n);
  BoundaryFn r1 = r_one(sys);
  for (std::size_t i = 0; i < n; ++i) v[i] = r1.at(pts[i]);

  std::vector<BoundaryFn> out;
  for (int k = 0; k < count; ++k) {
    BoundaryFn f;
    for (std::size_t i = 0; i < n; ++i)
      if (!v[i].is_zero()) f.values[pts[i]] = v[i];
    out.push_back(f);
    std::vector<Rational> next(n, Rational(0));
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) next[i] += A[i][j] * v[j];
    v = std::move(next);
  }
  return out;
}

}  // namespace

TEST_CASE("contraction certificates") {
  CHECK(contraction_certificate(load_fixture("prdm.json")).a.exact == rat("1/2"));
  CHECK(contraction_certificate(load_fixture("prdm.json")).contractive);

  auto ident = contraction_certificate(load_fixture("identity_edge.json"));
  CHECK(ident.a.exact == rat("1"));
  CHECK(!ident.contractive);

  auto ieex = contraction_certificate(load_fixture("ieex.json"));
  CHECK(!ieex.a.is_exact);
  CHECK(ieex.a.value() <= 0.5 + ieex.a.eps);
  CHECK(ieex.contractive);

  CHECK(contraction_certificate(load_fixture("gmc_chain.json")).a.exact == rat("1/2"));
}

TEST_CASE("coupling constant b") {
  CHECK(coupling_constant_b(load_fixture("prdm.json")).exact == rat("1/4"));
  CHECK(coupling_constant_b(load_fixture("dmse.json")).exact == rat("1/4"));
  // every edge fixes its anchor: b = 0
  CHECK(coupling_constant_b(load_fixture("identity_edge.json")).exact == rat("0"));
}

TEST_CASE("dominating chain constants") {
  auto chain = dominating_chain(load_fixture("prdm.json"));
  CHECK(chain.xi.at(1).exact == rat("1"));
  CHECK(chain.xi.at(2).exact == rat("2"));
  CHECK(chain.xi.at(3).exact == rat("1"));
  CHECK(chain.c.exact == rat("2"));
  CHECK(chain.q.at({1, 2}) == rat("1"));
  CHECK(chain.q.at({2, 2}) == rat("1"));

  // constant probabilities: every xi_i = 1
  auto mcae = dominating_chain(load_fixture("mcae_n1.json"));
  for (const auto& [id, xi] : mcae.xi) CHECK(xi.exact == rat("1"));

  // two-state chain: c is the sup-column-sum 13/10
  auto sub = dominating_chain(load_fixture("gmc_chain.json"));
  CHECK(sub.xi.at(1).exact == rat("1"));
  CHECK(sub.xi.at(2).exact == rat("1"));
  CHECK(sub.c.exact == rat("13/10"));
}

TEST_CASE("boundary sets") {
  auto b = boundary_set(load_fixture("prdm.json"));
  REQUIRE(b.size() == 2);
  CHECK(b[0].point == rat("0"));
  CHECK(b[0].atoms == std::vector<int>{2});
  CHECK(b[1].point == rat("1"));
  CHECK(b[1].atoms == std::vector<int>{2});

  // all atoms clopen: empty boundary
  CHECK(boundary_set(load_fixture("clopen_unit.json")).empty());

  // a shared cut point belongs to the boundaries of both flanking atoms
  auto split = boundary_set(load_fixture("prdm_split.json"));
  auto mid = std::find_if(split.begin(), split.end(),
                          [](const BoundaryPoint& p) { return p.point == rat("1/2"); });
  REQUIRE(mid != split.end());
  CHECK(mid->atoms.size() == 2);
}

TEST_CASE("R operator on prdm: R1 on {0,1}, R^2 1 = 0") {
  auto sys = load_fixture("prdm.json");
  BoundaryFn f1 = r_one(sys);
  CHECK(f1.at(rat("0")) == rat("1"));
  CHECK(f1.at(rat("1")) == rat("1"));
  CHECK(f1.values.size() == 2);
  BoundaryFn f2 = r_apply(sys, f1);
  CHECK(f2.is_zero());
}

TEST_CASE("R operator on dmse: R(R1) = R1") {
  auto sys = load_fixture("dmse.json");
  BoundaryFn f1 = r_one(sys);
  BoundaryFn f2 = r_apply(sys, f1);
  CHECK(f2 == f1);
}

TEST_CASE("R1 can exceed 1 where two boundaries meet") {
  auto sys = load_fixture("prdm_split.json");
  BoundaryFn f1 = r_one(sys);
  CHECK(f1.at(rat("1/2")) == rat("2"));
}

TEST_CASE("omega on the worked examples") {
  auto prdm = omega_set(load_fixture("prdm.json"), 16);
  CHECK(prdm.decided);
  CHECK(prdm.omega.empty());

  auto dmse = omega_set(load_fixture("dmse.json"), 16);
  CHECK(dmse.decided);
  REQUIRE(dmse.omega.size() == 2);
  CHECK(dmse.omega[0] == rat("0"));
  CHECK(dmse.omega[1] == rat("1"));

  // mcae: R^2 1 supported in {1}, after which the intersection empties
  auto sys = load_fixture("mcae_n1.json");
  auto mcae = omega_set(sys, 16);
  CHECK(mcae.decided);
  CHECK(mcae.omega.empty());
  REQUIRE(mcae.iterates.size() >= 2);
  const BoundaryFn& r2 = mcae.iterates[1];
  CHECK(r2.at(rat("1/2")) == rat("0"));
  CHECK(r2.at(rat("1")) == rat("1"));

  // honest undecided outcome under a tiny cap
  auto capped = omega_set(load_fixture("dmse.json"), 1);
  CHECK(!capped.decided);
  CHECK(capped.note == "undecided after 1 iterations");
}

TEST_CASE("open partition shortcut: empty boundary decides omega immediately") {
  auto res = omega_set(load_fixture("clopen_unit.json"), 4);
  CHECK(res.decided);
  CHECK(res.omega.empty());
  auto rep = classify(load_fixture("clopen_unit.json"));
  CHECK(rep.degeneracy.tag == DegeneracyTag::non_degenerate);
}

TEST_CASE("A-matrix equivalence: iterated r_apply equals matrix powers") {
  for (const char* name :
       {"prdm.json", "dmse.json", "gnce.json", "mcae_n1.json", "prdm_split.json"}) {
    auto sys = load_fixture(name);
    auto oracle = a_matrix_iterates(sys, 6);
    BoundaryFn f = r_one(sys);
    for (int n = 0; n < 6; ++n) {
      CHECK(f == oracle[n]);
      f = r_apply(sys, f);
    }
  }
}

TEST_CASE("kernel mass bound: R-kernel total equals R1 at the base point") {
  for (const char* name : {"prdm.json", "dmse.json", "gnce.json", "prdm_split.json"}) {
    auto sys = load_fixture(name);
    BoundaryFn f1 = r_one(sys);
    for (const auto& bp : boundary_set(sys)) {
      CHECK(r_kernel_at(sys, bp.point).total() == f1.at(bp.point));
    }
  }
}

TEST_CASE("csc kernel domination: dmse passes at both omega points") {
  auto sys = load_fixture("dmse.json");
  auto omega = omega_set(sys, 16);
  auto res = csc_check(sys, omega);
  CHECK(res.pass);
  CHECK(res.kernels.size() == 2);
}

TEST_CASE("csc kernel domination: gnce fails with the witness (0, 0, 1 vs 1/2)") {
  auto sys = load_fixture("gnce.json");
  auto res = csc_check(sys, omega_set(sys, 16));
  CHECK(!res.pass);
  REQUIRE(res.witness.has_value());
  CHECK(res.witness->z == rat("0"));
  CHECK(res.witness->y == rat("0"));
  CHECK(res.witness->r_mass == rat("1"));
  CHECK(res.witness->u_mass == rat("1/2"));
}

TEST_CASE("csc with empty omega passes vacuously") {
  auto sys = load_fixture("prdm.json");
  auto res = csc_check(sys, omega_set(sys, 16));
  CHECK(res.pass);
  CHECK(res.kernels.empty());
}

TEST_CASE("csc refuses an undecided omega") {
  auto sys = load_fixture("dmse.json");
  auto capped = omega_set(sys, 1);
  CHECK_THROWS_WITH(csc_check(sys, capped), doctest::Contains("larger n_max"));
}

TEST_CASE("csc soundness on monomials: domination implies Rf <= Uf pointwise") {
  auto sys = load_fixture("dmse.json");
  auto omega = omega_set(sys, 16);
  auto res = csc_check(sys, omega);
  REQUIRE(res.pass);

  std::vector<std::function<Rational(const Rational&)>> fns;
  for (const auto& a : sys.atoms) {
    Atom atom = a;
    fns.push_back(
        [atom](const Rational& y) { return atom.contains(y) ? Rational(1) : Rational(0); });
  }
  for (const auto& [rk, uk] : res.kernels)
    for (const auto& [y, mass] : rk.masses) {
      Rational point = y;
      fns.push_back(
          [point](const Rational& v) { return v == point ? Rational(1) : Rational(0); });
    }

  for (const auto& z : omega.omega) {
    for (const auto& f : fns) {
      Rational rf(0);
      for (const auto& [y, m] : r_kernel_at(sys, z).masses) rf += m * f(y);
      Rational uf = sys.apply_U(f, z);
      CHECK(rf <= uf);
    }
  }
}

TEST_CASE("ucct rule on the worked examples") {
  CHECK(ucct_rule(load_fixture("dmse.json")).holds);
  CHECK(ucct_rule(load_fixture("prdm.json")).holds);

  auto gnce = ucct_rule(load_fixture("gnce.json"));
  CHECK(!gnce.holds);
  CHECK(gnce.reason.find("probability formulas differ") != std::string::npos);

  // ungrouped edges: rule not applicable, not a refutation
  auto ungrouped = ucct_rule(load_fixture("identity_edge.json"));
  CHECK(!ungrouped.holds);
  CHECK(ungrouped.reason.find("no group label") != std::string::npos);

  // mcae shares maps but its step probabilities break global continuity
  CHECK(!ucct_rule(load_fixture("mcae_n1.json")).holds);
}

TEST_CASE("closed subsystems on the worked examples") {
  auto has = [](const std::vector<SubsystemRecord>& recs, std::set<int> atoms, bool closed) {
    for (const auto& r : recs)
      if (r.atoms == atoms) return r.closed_in_k == closed;
    return false;
  };

  auto dmse = closed_subsystems(load_fixture("dmse.json"));
  CHECK(has(dmse, {1}, true));
  CHECK(has(dmse, {3}, true));
  CHECK(has(dmse, {2}, false));

  auto gnce = closed_subsystems(load_fixture("gnce.json"));
  CHECK(has(gnce, {3}, true));

  // prdm funnels everything through the interior: the only closed candidate
  // is the whole system
  auto prdm = closed_subsystems(load_fixture("prdm.json"));
  bool full_is_minimal_closed = false;
  for (const auto& r : prdm)
    if (r.atoms == std::set<int>{1, 2, 3}) full_is_minimal_closed = r.minimal_closed;
  CHECK(full_is_minimal_closed);
  for (const auto& r : prdm)
    if (r.atoms != std::set<int>{1, 2, 3}) CHECK(!r.closed_in_k);
}

TEST_CASE("classify: prdm is non-degenerate with existence via eimc-i") {
  auto rep = classify(load_fixture("prdm.json"));
  CHECK(rep.degeneracy.tag == DegeneracyTag::non_degenerate);
  CHECK(rep.existence.tag == ExistenceTag::guaranteed);
  CHECK(rep.existence.rule == "eimc-i");
  CHECK(!rep.existence.hypotheses.empty());
}

TEST_CASE("classify: dmse is degenerate-capable but consistent, existence via usdmc") {
  auto rep = classify(load_fixture("dmse.json"));
  CHECK(rep.degeneracy.tag == DegeneracyTag::undecided);
  CHECK(rep.consistency.tag == ConsistencyTag::consistent);
  CHECK(rep.consistency.rule == "csc-holds");
  CHECK(rep.existence.tag == ExistenceTag::guaranteed);
  CHECK(rep.existence.rule == "usdmc");
}

TEST_CASE("classify: gnce fails csc but a closed subsystem carries it via sndct") {
  auto rep = classify(load_fixture("gnce.json"));
  CHECK(rep.consistency.tag == ConsistencyTag::inconsistent_candidate);
  REQUIRE(rep.consistency.witness.has_value());
  CHECK(rep.consistency.witness->z == rat("0"));
  CHECK(rep.existence.tag == ExistenceTag::guaranteed);
  CHECK(rep.existence.rule == "sndct");
  REQUIRE(rep.existence.subsystem.has_value());
  CHECK(*rep.existence.subsystem == std::set<int>{3});
}

TEST_CASE("classify: every guaranteed verdict records its hypotheses") {
  for (const char* name :
       {"prdm.json", "dmse.json", "gnce.json", "mcae_n1.json", "gmc_chain.json", "ieex.json"}) {
    auto rep = classify(load_fixture(name));
    CHECK(rep.existence.tag == ExistenceTag::guaranteed);
    CHECK(!rep.existence.rule.empty());
    CHECK(!rep.existence.hypotheses.empty());
  }
}

TEST_CASE("report serialization carries rationals as p/q strings") {
  auto rep = classify(load_fixture("prdm.json"));
  std::string js = rep.to_json_string();
  CHECK(js.find("\"exact\": \"1/2\"") != std::string::npos);
  CHECK(js.find("\"rule\": \"eimc-i\"") != std::string::npos);
  std::string text = rep.to_text();
  CHECK(text.find("a = 1/2") != std::string::npos);
  CHECK(text.find("b = 1/4") != std::string::npos);
  CHECK(text.find("Omega = {}") != std::string::npos);
  CHECK(text.find("verdict: existence guaranteed (eimc-i)") != std::string::npos);
}
