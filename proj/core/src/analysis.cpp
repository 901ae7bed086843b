#include "cms/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "json.hpp"

namespace cms {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Small helpers
// ---------------------------------------------------------------------------

std::string CertValue::str() const {
  if (is_exact) return exact.str();
  std::ostringstream os;
  os << approx;
  if (eps > 0) os << " (includes truncation bound " << eps << ")";
  return os.str();
}

bool BoundaryFn::is_zero() const {
  for (const auto& [_, v] : values)
    if (!v.is_zero()) return false;
  return true;
}

std::string BoundaryFn::str() const {
  std::ostringstream os;
  os << "{";
  bool first = true;
  for (const auto& [x, v] : values) {
    if (v.is_zero()) continue;
    if (!first) os << ", ";
    os << x.str() << " -> " << v.str();
    first = false;
  }
  os << "}";
  return os.str();
}

Rational BoundaryKernel::total() const {
  Rational t(0);
  for (const auto& [_, m] : masses) t += m;
  return t;
}

std::string BoundaryKernel::str() const {
  std::ostringstream os;
  os << "at " << base.str() << ": {";
  bool first = true;
  for (const auto& [y, m] : masses) {
    if (!first) os << ", ";
    os << y.str() << " -> " << m.str();
    first = false;
  }
  os << "}";
  return os.str();
}

namespace {

// max of an affine function over the closure corners of an atom
Rational corner_max(const Atom& atom, const Affine& f) {
  auto corners = atom.closure_corners();
  if (corners.empty()) return f.intercept;  // line atoms carry constants only
  Rational best = f(corners[0]);
  for (std::size_t k = 1; k < corners.size(); ++k) best = std::max(best, f(corners[k]));
  return best;
}

// continuous extension of an edge probability, evaluated at a closure point;
// for affine functions the one-sided limit is the formula value
Rational prob_bar(const Edge& e, const Rational& z) { return e.prob(z); }

Rational dist(const Rational& x, const Rational& y) { return (x - y).abs(); }

}  // namespace

// ---------------------------------------------------------------------------
// Contraction rate a
// ---------------------------------------------------------------------------

ContractionCertificate contraction_certificate(const ValidatedSystem& sys) {
  ContractionCertificate cert;
  if (sys.backend == Backend::subshift) {
    // appending one symbol halves the path-space metric
    cert.a = CertValue::of(Rational(1, 2));
    cert.contractive = true;
    return cert;
  }

  Rational exact_max(0);
  bool have_exact = false;
  double tail_atom_value = 0.0;
  bool has_tail = sys.tail.has_value();

  for (const auto& atom : sys.atoms) {
    // sum of p_e(x)|slope_e| is affine in x; take the closure-corner max
    Affine sum{Rational(0), Rational(0)};
    for (const Edge* e : sys.edges_from(atom.id)) {
      Rational lip = e->map.slope.abs();
      sum.slope += e->prob.slope * lip;
      sum.intercept += e->prob.intercept * lip;
    }
    bool tail_here = has_tail && sys.tail->spec.atom == atom.id;
    if (tail_here) {
      tail_atom_value = corner_max(atom, sum).to_double() + sys.tail->contraction_partial +
                        sys.tail->contraction_tail_bound;
    } else {
      Rational v = corner_max(atom, sum);
      exact_max = have_exact ? std::max(exact_max, v) : v;
      have_exact = true;
    }
  }

  if (!has_tail) {
    cert.a = CertValue::of(exact_max);
    cert.contractive = exact_max < Rational(1);
  } else {
    cert.a.is_exact = false;
    cert.a.exact = exact_max;
    cert.a.approx = std::max(have_exact ? exact_max.to_double() : 0.0, tail_atom_value);
    cert.a.eps = sys.tail->contraction_tail_bound;
    cert.contractive = cert.a.approx < 1.0;
  }
  return cert;
}

// ---------------------------------------------------------------------------
// Coupling constant b
// ---------------------------------------------------------------------------

namespace {

// context words and the path-space metric live in the subshift module; for b
// we only need the distance between two bounded contexts aligned at time 0
Rational context_distance(const std::vector<std::string>& u, const std::vector<std::string>& v) {
  int agree = 0;
  int n = static_cast<int>(std::min(u.size(), v.size()));
  while (agree < n && u[u.size() - 1 - agree] == v[v.size() - 1 - agree]) ++agree;
  return dyadic_pow2(agree);
}

std::vector<std::vector<std::string>> admissible_words(const SubshiftSystem& sub, int len) {
  std::vector<std::vector<std::string>> words;
  for (const auto& e : sub.edges) words.push_back({e.id});
  for (int l = 2; l <= len; ++l) {
    std::vector<std::vector<std::string>> next;
    for (const auto& w : words) {
      const SubshiftEdge* last = sub.edge_by_id(w.back());
      for (const auto& e : sub.edges)
        if (e.from == last->to) {
          auto w2 = w;
          w2.push_back(e.id);
          next.push_back(std::move(w2));
        }
    }
    words = std::move(next);
  }
  return words;
}

std::vector<std::string> anchor_context(const SubshiftSystem& sub, int vertex) {
  // deterministic choice: lexicographically smallest admissible word ending at vertex
  auto words = admissible_words(sub, sub.memory);
  std::vector<std::string> best;
  for (const auto& w : words) {
    if (sub.edge_by_id(w.back())->to != vertex) continue;
    if (best.empty() || w < best) best = w;
  }
  return best;
}

Rational g_sup_for_edge(const SubshiftSystem& sub, const std::string& edge_id) {
  Rational best(0);
  for (const auto& [word, val] : sub.g)
    if (word.back() == edge_id) best = std::max(best, val);
  return best;
}

}  // namespace

CertValue coupling_constant_b(const ValidatedSystem& sys) {
  if (sys.backend == Backend::subshift) {
    const SubshiftSystem& sub = *sys.shift;
    // per-context sums of g(c,e) * d(anchor(i(e)) . e, anchor(t(e)))
    std::map<std::string, Rational> edge_dist;
    for (const auto& e : sub.edges) {
      auto src_anchor = anchor_context(sub, e.from);
      auto tgt_anchor = anchor_context(sub, e.to);
      auto moved = src_anchor;
      moved.push_back(e.id);
      edge_dist[e.id] = context_distance(moved, tgt_anchor);
    }
    Rational best(0);
    if (sub.memory == 1) {
      // probabilities depend on the new edge alone; the sup runs over vertices
      for (int v : sub.vertices) {
        Rational sum(0);
        for (const auto& e : sub.edges)
          if (e.from == v) sum += sub.g.at({e.id}) * edge_dist[e.id];
        best = std::max(best, sum);
      }
      return CertValue::of(best);
    }
    for (const auto& ctx : admissible_words(sub, sub.memory - 1)) {
      int v = sub.edge_by_id(ctx.back())->to;
      Rational sum(0);
      for (const auto& e : sub.edges) {
        if (e.from != v) continue;
        auto key = ctx;
        key.push_back(e.id);
        auto it = sub.g.find(key);
        if (it == sub.g.end()) continue;
        sum += it->second * edge_dist[e.id];
      }
      best = std::max(best, sum);
    }
    return CertValue::of(best);
  }

  Rational exact_max(0);
  bool have_exact = false;
  double tail_value = 0.0;
  double tail_eps = 0.0;
  bool has_tail = sys.tail.has_value();

  for (const auto& atom : sys.atoms) {
    const Rational& xi = sys.anchors.at(atom.id);
    Affine sum{Rational(0), Rational(0)};
    for (const Edge* e : sys.edges_from(atom.id)) {
      Rational d = dist(e->map(xi), sys.anchors.at(e->target));
      sum.slope += e->prob.slope * d;
      sum.intercept += e->prob.intercept * d;
    }
    bool tail_here = has_tail && sys.tail->spec.atom == atom.id;
    if (tail_here) {
      const TailFamily& t = *sys.tail;
      double anchor = xi.to_double();
      double base = corner_max(atom, sum).to_double();
      double within = 0.0;
      for (long n = t.spec.n0; n <= t.spec.truncate_at; ++n) {
        double img = t.slope[n - t.spec.n0] * anchor + t.spec.intercept.to_double();
        within += t.p_n(n) * std::abs(img - anchor);
      }
      // beyond truncation: |w_n(x)-x| <= |slope_n||x| + |intercept - x|
      double beyond = std::abs(anchor) * t.contraction_tail_bound +
                      std::abs(t.spec.intercept.to_double() - anchor) * t.eps_tail;
      tail_value = base + within + beyond;
      tail_eps = beyond;
    } else {
      Rational v = corner_max(atom, sum);
      exact_max = have_exact ? std::max(exact_max, v) : v;
      have_exact = true;
    }
  }

  if (!has_tail) return CertValue::of(exact_max);
  CertValue v;
  v.is_exact = false;
  v.exact = exact_max;
  v.approx = std::max(have_exact ? exact_max.to_double() : 0.0, tail_value);
  v.eps = tail_eps;
  return v;
}

// ---------------------------------------------------------------------------
// Dominating Markov chain
// ---------------------------------------------------------------------------

DominatingChain dominating_chain(const ValidatedSystem& sys) {
  DominatingChain chain;

  if (sys.backend == Backend::subshift) {
    const SubshiftSystem& sub = *sys.shift;
    std::map<std::pair<int, int>, Rational> m;  // xi_i * q_ij
    for (int v : sub.vertices) {
      Rational xi(0);
      for (const auto& e : sub.edges) {
        if (e.from != v) continue;
        Rational s = g_sup_for_edge(sub, e.id);
        xi += s;
        m[{v, e.to}] += s;
      }
      chain.xi[v] = CertValue::of(xi);
    }
    Rational c(0);
    for (int j : sub.vertices) {
      Rational col(0);
      for (int i : sub.vertices) {
        auto it = m.find({i, j});
        if (it != m.end()) col = std::max(col, it->second);
      }
      c += col;
    }
    for (const auto& [ij, mass] : m) {
      const Rational& xi = chain.xi.at(ij.first).exact;
      if (!xi.is_zero()) chain.q[ij] = mass / xi;
    }
    chain.c = CertValue::of(c);
    return chain;
  }

  std::map<std::pair<int, int>, Rational> m;  //exact xi_i q_ij numerators
  double tail_extra = 0.0;

  for (const auto& atom : sys.atoms) {
    Rational xi(0);
    for (const Edge* e : sys.edges_from(atom.id)) {
      Rational s = corner_max(sys.atom(e->source), e->prob);
      xi += s;
      m[{atom.id, e->target}] += s;
    }
    bool tail_here = sys.tail && sys.tail->spec.atom == atom.id;
    if (tail_here) {
      // constant tail probabilities: sup = value; self-loop on the line atom
      double t_mass = sys.tail->mass + sys.tail->eps_tail;
      CertValue v;
      v.is_exact = false;
      v.exact = xi;
      v.approx = xi.to_double() + t_mass;
      v.eps = sys.tail->eps_tail;
      chain.xi[atom.id] = v;
      tail_extra = t_mass;
    } else {
      chain.xi[atom.id] = CertValue::of(xi);
    }
  }

  Rational c_exact(0);
  for (const auto& ja : sys.atoms) {
    Rational col(0);
    for (const auto& ia : sys.atoms) {
      auto it = m.find({ia.id, ja.id});
      if (it != m.end()) col = std::max(col, it->second);
    }
    c_exact += col;
  }
  for (const auto& [ij, mass] : m) {
    const auto& xi = chain.xi.at(ij.first);
    if (xi.is_exact && !xi.exact.is_zero()) chain.q[ij] = mass / xi.exact;
  }
  if (tail_extra > 0.0) {
    chain.c.is_exact = false;
    chain.c.exact = c_exact;
    chain.c.approx = c_exact.to_double() + tail_extra;
    chain.c.eps = sys.tail->eps_tail;
  } else {
    chain.c = CertValue::of(c_exact);
  }
  return chain;
}

// ---------------------------------------------------------------------------
// Boundary set and the R operator
// ---------------------------------------------------------------------------

std::vector<BoundaryPoint> boundary_set(const ValidatedSystem& sys) {
  std::map<Rational, std::vector<int>> acc;
  if (sys.backend == Backend::interval) {
    for (const auto& atom : sys.atoms)
      for (const auto& z : atom.boundary_points()) acc[z].push_back(atom.id);
  }
  // subshift vertex sets are clopen: empty boundary
  std::vector<BoundaryPoint> out;
  for (auto& [z, ids] : acc) out.push_back({z, ids});
  return out;
}

namespace {

// the edges whose boundary-charged probability is supported at z, paired with
// their mass bar{p_e}(z)
std::vector<std::pair<const Edge*, Rational>> boundary_charges(const ValidatedSystem& sys,
                                                               const Rational& z) {
  std::vector<std::pair<const Edge*, Rational>> out;
  for (const auto& e : sys.edges) {
    const Atom& src = sys.atom(e.source);
    auto bpts = src.boundary_points();
    if (std::find(bpts.begin(), bpts.end(), z) == bpts.end()) continue;
    Rational mass = prob_bar(e, z);
    if (mass.is_zero()) continue;
    out.push_back({&e, mass});
  }
  return out;
}

}  // namespace

BoundaryFn r_one(const ValidatedSystem& sys) {
  BoundaryFn f;
  for (const auto& bp : boundary_set(sys)) {
    Rational total(0);
    for (const auto& [e, mass] : boundary_charges(sys, bp.point)) total += mass;
    if (!total.is_zero()) f.values[bp.point] = total;
  }
  return f;
}

BoundaryFn r_apply(const ValidatedSystem& sys, const BoundaryFn& f) {
  BoundaryFn out;
  for (const auto& bp : boundary_set(sys)) {
    Rational total(0);
    for (const auto& [e, mass] : boundary_charges(sys, bp.point))
      total += mass * f.at(e->map(bp.point));
    if (!total.is_zero()) out.values[bp.point] = total;
  }
  return out;
}

int default_n_max(const ValidatedSystem& sys) {
  return 2 * static_cast<int>(boundary_set(sys).size()) + 8;
}

OmegaResult omega_set(const ValidatedSystem& sys, int n_max) {
  OmegaResult res;
  auto boundary = boundary_set(sys);
  if (boundary.empty()) {
    res.decided = true;
    res.note = "empty boundary: R1 = 0";
    return res;
  }

  std::vector<Rational> points;
  for (const auto& bp : boundary) points.push_back(bp.point);
  std::size_t n = points.size();

  // B x B transfer matrix: A[z][z'] = sum of bar{p_e}(z) over edges with
  // image w_e(z) = z'. Iterates of R restricted to B are powers of A.
  std::vector<std::vector<Rational>> A(n, std::vector<Rational>(n, Rational(0)));
  for (std::size_t i = 0; i < n; ++i) {
    for (const auto& [e, mass] : boundary_charges(sys, points[i])) {
      Rational img = e->map(points[i]);
      for (std::size_t j = 0; j < n; ++j)
        if (points[j] == img) A[i][j] += mass;
    }
  }

  BoundaryFn f1 = r_one(sys);
  std::vector<Rational> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = f1.at(points[i]);

  auto fn_of = [&](const std::vector<Rational>& vec) {
    BoundaryFn f;
    for (std::size_t i = 0; i < n; ++i)
      if (!vec[i].is_zero()) f.values[points[i]] = vec[i];
    return f;
  };
  auto geq_one_set = [&](const std::vector<Rational>& vec) {
    std::set<std::size_t> s;
    for (std::size_t i = 0; i < n; ++i)
      if (vec[i] >= Rational(1)) s.insert(i);
    return s;
  };

  res.iterates.push_back(f1);
  std::set<std::size_t> omega_acc = geq_one_set(v);
  std::vector<std::vector<Rational>> seen{v};
  res.iterations = 1;

  while (res.iterations < n_max) {
    if (omega_acc.empty()) {
      res.decided = true;
      res.note = "intersection emptied after " + std::to_string(res.iterations) +
                 " iterations";
      return res;
    }
    std::vector<Rational> next(n, Rational(0));
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        if (!A[i][j].is_zero()) next[i] += A[i][j] * v[j];
    v = std::move(next);
    ++res.iterations;
    res.iterates.push_back(fn_of(v));

    auto s = geq_one_set(v);
    std::set<std::size_t> inter;
    std::set_intersection(omega_acc.begin(), omega_acc.end(), s.begin(), s.end(),
                          std::inserter(inter, inter.begin()));
    omega_acc = std::move(inter);

    for (const auto& old : seen) {
      if (old == v) {
        // values cycle; the accumulated intersection is final
        res.decided = true;
        for (auto i : omega_acc) res.omega.push_back(points[i]);
        res.note = "value vector cycled after " + std::to_string(res.iterations) +
                   " iterations";
        return res;
      }
    }
    seen.push_back(v);
  }

  if (omega_acc.empty()) {
    res.decided = true;
    res.note = "intersection emptied after " + std::to_string(res.iterations) + " iterations";
    return res;
  }
  res.decided = false;
  for (auto i : omega_acc) res.omega.push_back(points[i]);  // best-known superset
  res.note = "undecided after " + std::to_string(n_max) + " iterations";
  return res;
}

// ---------------------------------------------------------------------------
// Consistency: kernel domination and the global-continuity rule
// ---------------------------------------------------------------------------

BoundaryKernel r_kernel_at(const ValidatedSystem& sys, const Rational& z) {
  BoundaryKernel k;
  k.base = z;
  for (const auto& [e, mass] : boundary_charges(sys, z)) k.masses[e->map(z)] += mass;
  return k;
}

BoundaryKernel u_kernel_at(const ValidatedSystem& sys, const Rational& z) {
  BoundaryKernel k;
  k.base = z;
  auto home = sys.atom_of(z);
  if (!home) return k;
  for (const Edge* e : sys.edges_from(*home)) {
    Rational p = e->prob(z);
    if (p.is_zero()) continue;
    k.masses[e->map(z)] += p;
  }
  return k;
}

CscResult csc_check(const ValidatedSystem& sys, const OmegaResult& omega) {
  if (!omega.decided)
    throw std::runtime_error("omega undecided; run omega_set with larger n_max");
  CscResult res;
  res.pass = true;
  for (const auto& z : omega.omega) {
    BoundaryKernel rk = r_kernel_at(sys, z);
    BoundaryKernel uk = u_kernel_at(sys, z);
    for (const auto& [y, rm] : rk.masses) {
      auto it = uk.masses.find(y);
      Rational um = it == uk.masses.end() ? Rational(0) : it->second;
      if (rm > um && res.pass) {
        res.pass = false;
        res.witness = CscWitness{z, y, rm, um};
      }
    }
    res.kernels.push_back({rk, uk});
  }
  return res;
}

UcctResult ucct_rule(const ValidatedSystem& sys) {
  UcctResult r;
  if (sys.backend == Backend::subshift) {
    r.reason = "rule not applicable to the subshift backend";
    return r;
  }
  if (sys.tail) {
    r.reason = "tail families carry no grouping";
    return r;
  }
  std::map<std::string, const Edge*> rep;
  for (const auto& e : sys.edges) {
    if (!e.group) {
      r.reason = "edge '" + e.id + "' carries no group label";
      return r;
    }
    auto [it, inserted] = rep.try_emplace(*e.group, &e);
    if (!inserted) {
      const Edge* first = it->second;
      if (!(first->map == e.map)) {
        r.reason = "group '" + *e.group + "': map formulas differ between edges '" +
                   first->id + "' and '" + e.id + "'";
        return r;
      }
      if (!(first->prob == e.prob)) {
        r.reason = "group '" + *e.group + "': probability formulas differ between edges '" +
                   first->id + "' and '" + e.id + "'";
        return r;
      }
    }
  }
  // the group representatives must assemble into one continuous random
  // dynamical system: probabilities sum to 1 identically and stay in [0,1]
  Rational slope_sum(0), intercept_sum(0);
  for (const auto& [_, e] : rep) {
    slope_sum += e->prob.slope;
    intercept_sum += e->prob.intercept;
    for (const Rational& corner : {sys.space_lo, sys.space_hi}) {
      Rational v = e->prob(corner);
      if (v < Rational(0) || v > Rational(1)) {
        r.reason = "group '" + *e->group + "' probability leaves [0,1] on the space";
        return r;
      }
    }
  }
  if (!slope_sum.is_zero() || intercept_sum != Rational(1)) {
    r.reason = "group probabilities do not sum to 1 on the whole space";
    return r;
  }
  r.holds = true;
  r.reason = "all edges are restrictions of one continuous pair with finite chain sums";
  return r;
}

// ---------------------------------------------------------------------------
// Closed subsystems
// ---------------------------------------------------------------------------

namespace {

std::set<int> forward_closure(const ValidatedSystem& sys, int start) {
  std::set<int> seen{start};
  std::vector<int> stack{start};
  while (!stack.empty()) {
    int v = stack.back();
    stack.pop_back();
    if (sys.backend == Backend::subshift) {
      for (const auto& e : sys.shift->edges)
        if (e.from == v && seen.insert(e.to).second) stack.push_back(e.to);
    } else {
      for (const Edge* e : sys.edges_from(v))
        if (seen.insert(e->target).second) stack.push_back(e->target);
      if (sys.tail && sys.tail->spec.atom == v) {
        // the tail family is a self-loop on its atom
      }
    }
  }
  return seen;
}

bool closed_in_k(const ValidatedSystem& sys, const std::set<int>& s) {
  if (sys.backend == Backend::subshift) return true;  // vertex sets are clopen
  for (int id : s) {
    for (const auto& z : sys.atom(id).boundary_points()) {
      auto home = sys.atom_of(z);
      if (!home || !s.count(*home)) return false;
    }
  }
  return true;
}

}  // namespace

std::vector<SubsystemRecord> closed_subsystems(const ValidatedSystem& sys) {
  std::vector<std::set<int>> closures;
  for (int id : sys.atom_ids()) {
    auto c = forward_closure(sys, id);
    if (std::find(closures.begin(), closures.end(), c) == closures.end())
      closures.push_back(c);
  }
  std::sort(closures.begin(), closures.end(),
            [](const auto& a, const auto& b) {
              if (a.size() != b.size()) return a.size() < b.size();
              return a < b;
            });

  // candidates for the closed-subsystem route: unions of single-atom closures
  std::vector<std::set<int>> candidates = closures;
  if (closures.size() <= 12) {
    for (std::size_t mask = 1; mask < (1ull << closures.size()); ++mask) {
      std::set<int> u;
      for (std::size_t k = 0; k < closures.size(); ++k)
        if (mask & (1ull << k)) u.insert(closures[k].begin(), closures[k].end());
      if (std::find(candidates.begin(), candidates.end(), u) == candidates.end())
        candidates.push_back(u);
    }
  }

  std::vector<std::set<int>> closed;
  for (const auto& c : candidates)
    if (closed_in_k(sys, c)) closed.push_back(c);
  // subset-minimal closed candidates
  std::vector<std::set<int>> minimal;
  for (const auto& c : closed) {
    bool has_smaller = false;
    for (const auto& d : closed)
      if (d != c && std::includes(c.begin(), c.end(), d.begin(), d.end())) {
        has_smaller = true;
        break;
      }
    if (!has_smaller) minimal.push_back(c);
  }

  std::vector<SubsystemRecord> out;
  auto push = [&](const std::set<int>& s) -> SubsystemRecord& {
    for (auto& r : out)
      if (r.atoms == s) return r;
    out.push_back(SubsystemRecord{s, closed_in_k(sys, s), false, false});
    return out.back();
  };
  for (const auto& c : closures) push(c).from_single_closure = true;
  for (const auto& c : minimal) push(c).minimal_closed = true;
  std::sort(out.begin(), out.end(), [](const SubsystemRecord& a, const SubsystemRecord& b) {
    if (a.atoms.size() != b.atoms.size()) return a.atoms.size() < b.atoms.size();
    return a.atoms < b.atoms;
  });
  return out;
}

ValidatedSystem make_subsystem(const ValidatedSystem& sys, const std::set<int>& atoms) {
  if (sys.backend == Backend::subshift)
    throw std::logic_error("subsystems are only built for the interval backend");
  SystemSpec spec;
  spec.backend = Backend::interval;
  spec.unbounded_space = sys.unbounded;
  for (const auto& a : sys.atoms)
    if (atoms.count(a.id)) spec.atoms.push_back(a);
  if (spec.atoms.empty()) throw std::logic_error("empty subsystem");
  for (const auto& e : sys.edges)
    if (atoms.count(e.source)) {
      if (!atoms.count(e.target))
        throw std::logic_error("atom set is not forward-closed at edge '" + e.id + "'");
      spec.edges.push_back(e);
    }
  for (int id : atoms) spec.anchors[id] = sys.anchors.at(id);
  if (sys.tail && atoms.count(sys.tail->spec.atom)) spec.tail = sys.tail->spec;

  // bypass the partition-coverage walk: the sub-union need not tile an interval
  ValidatedSystem sub;
  sub.backend = Backend::interval;
  sub.unbounded = spec.unbounded_space;
  sub.atoms = spec.atoms;
  std::sort(sub.atoms.begin(), sub.atoms.end(), [](const Atom& x, const Atom& y) {
    if (x.lo != y.lo) return x.lo < y.lo;
    return x.is_point() && !y.is_point();
  });
  if (!sub.atoms.empty()) {
    sub.space_lo = sub.atoms.front().lo;
    sub.space_hi = sub.atoms.back().hi;
  }
  sub.edges = spec.edges;
  sub.anchors = spec.anchors;
  if (spec.tail) sub.tail = sys.tail;
  sub.build_indexes();
  return sub;
}

// ---------------------------------------------------------------------------
// classify
// ---------------------------------------------------------------------------

namespace {

AnalysisReport classify_impl(const ValidatedSystem& sys, int n_max, bool allow_subsystems);

bool quantitative_hypotheses(const AnalysisReport& rep, std::vector<std::string>& hyp) {
  bool ok = true;
  if (rep.contraction.contractive) {
    hyp.push_back("a = " + rep.contraction.a.str() + " < 1");
  } else {
    hyp.push_back("contraction failed: a = " + rep.contraction.a.str());
    ok = false;
  }
  hyp.push_back("b = " + rep.b.str() + " finite");
  bool xi_ok = true;
  for (const auto& [id, xi] : rep.chain.xi)
    if (!std::isfinite(xi.value())) xi_ok = false;
  hyp.push_back(xi_ok ? "xi finite" : "xi not finite");
  ok = ok && xi_ok;
  if (rep.chain.c_finite) {
    hyp.push_back("c = " + rep.chain.c.str() + " < inf (dominating-chain tightness)");
  } else {
    hyp.push_back("finite atom set (tightness trivial)");
  }
  return ok;
}

AnalysisReport classify_impl(const ValidatedSystem& sys, int n_max, bool allow_subsystems) {
  AnalysisReport rep;
  rep.n_max_used = n_max;
  rep.contraction = contraction_certificate(sys);
  rep.b = coupling_constant_b(sys);
  rep.chain = dominating_chain(sys);
  rep.chain.c_finite = std::isfinite(rep.chain.c.value());
  if (sys.backend == Backend::interval) rep.anchors_used = sys.anchors;
  rep.boundary = boundary_set(sys);
  rep.omega = omega_set(sys, n_max);
  rep.ucct = ucct_rule(sys);
  rep.subsystems = closed_subsystems(sys);
  if (sys.tail) rep.eps_tail = sys.tail->eps_tail;

  bool omega_empty = rep.omega.decided && rep.omega.omega.empty();

  if (omega_empty) {
    rep.degeneracy.tag = DegeneracyTag::non_degenerate;
    rep.degeneracy.rule =
        rep.boundary.empty() ? "omega-empty (open partition: R1 = 0)" : "omega-empty";
  } else {
    rep.degeneracy.tag = DegeneracyTag::undecided;
    rep.degeneracy.rule = rep.omega.decided ? "omega non-empty" : rep.omega.note;
  }

  // consistency
  if (omega_empty) {
    rep.consistency.tag = ConsistencyTag::consistent;
    rep.consistency.rule = "omega-empty";
  } else {
    if (rep.omega.decided) {
      rep.csc = csc_check(sys, rep.omega);
      if (rep.csc->pass) {
        rep.consistency.tag = ConsistencyTag::consistent;
        rep.consistency.rule = "csc-holds";
      } else {
        rep.consistency.witness = rep.csc->witness;
      }
    }
    if (rep.consistency.tag != ConsistencyTag::consistent && rep.ucct.holds) {
      rep.consistency.tag = ConsistencyTag::consistent;
      rep.consistency.rule = "ucct-rule";
    }
    if (rep.consistency.tag != ConsistencyTag::consistent) {
      rep.consistency.tag = (rep.csc && !rep.csc->pass)
                                ? ConsistencyTag::inconsistent_candidate
                                : ConsistencyTag::undecided;
    }
  }

  // existence
  std::vector<std::string> hyp;
  bool quant = quantitative_hypotheses(rep, hyp);

  if (rep.degeneracy.tag == DegeneracyTag::non_degenerate && quant) {
    rep.existence.tag = ExistenceTag::guaranteed;
    rep.existence.rule = "eimc-i";
    hyp.insert(hyp.begin(), "non-degenerate (" + rep.degeneracy.rule + ")");
    rep.existence.hypotheses = hyp;
    return rep;
  }
  if (rep.consistency.tag == ConsistencyTag::consistent && quant) {
    rep.existence.tag = ExistenceTag::guaranteed;
    rep.existence.rule = "usdmc";
    hyp.insert(hyp.begin(), "consistent (" + rep.consistency.rule + ")");
    rep.existence.hypotheses = hyp;
    return rep;
  }
  if (allow_subsystems && sys.backend == Backend::interval) {
    for (const auto& sub_rec : rep.subsystems) {
      if (!sub_rec.minimal_closed) continue;
      if (sub_rec.atoms.size() == sys.atoms.size()) continue;  // the system itself
      ValidatedSystem sub = make_subsystem(sys, sub_rec.atoms);
      AnalysisReport sub_rep = classify_impl(sub, default_n_max(sub), false);
      if (sub_rep.existence.tag == ExistenceTag::guaranteed) {
        rep.existence.tag = ExistenceTag::guaranteed;
        rep.existence.rule = "sndct";
        rep.existence.subsystem = sub_rec.atoms;
        std::string atoms_str = "{";
        bool first = true;
        for (int id : sub_rec.atoms) {
          if (!first) atoms_str += ",";
          atoms_str += std::to_string(id);
          first = false;
        }
        atoms_str += "}";
        rep.existence.hypotheses.push_back("closed subsystem " + atoms_str +
                                           " exists via " + sub_rep.existence.rule);
        for (const auto& h : sub_rep.existence.hypotheses)
          rep.existence.hypotheses.push_back("  [subsystem] " + h);
        return rep;
      }
    }
  }

  rep.existence.tag = ExistenceTag::not_established;
  rep.existence.rule = "";
  rep.existence.hypotheses = hyp;
  if (rep.consistency.witness)
    rep.existence.hypotheses.push_back(
        "csc witness: z=" + rep.consistency.witness->z.str() + " image=" +
        rep.consistency.witness->y.str() + " R-mass " + rep.consistency.witness->r_mass.str() +
        " > U-mass " + rep.consistency.witness->u_mass.str());
  return rep;
}

}  // namespace

AnalysisReport classify(const ValidatedSystem& sys, int n_max) {
  if (n_max <= 0) n_max = default_n_max(sys);
  return classify_impl(sys, n_max, true);
}

// ---------------------------------------------------------------------------
// Report rendering
// ---------------------------------------------------------------------------

namespace {

std::string rational_set_str(const std::vector<Rational>& xs) {
  std::ostringstream os;
  os << "{";
  for (std::size_t k = 0; k < xs.size(); ++k) os << (k ? ", " : "") << xs[k].str();
  os << "}";
  return os.str();
}

std::string atoms_set_str(const std::set<int>& s) {
  std::ostringstream os;
  os << "{";
  bool first = true;
  for (int id : s) {
    os << (first ? "" : ",") << id;
    first = false;
  }
  os << "}";
  return os.str();
}

const char* deg_str(DegeneracyTag t) {
  switch (t) {
    case DegeneracyTag::non_degenerate: return "non-degenerate";
    case DegeneracyTag::degenerate: return "degenerate";
    case DegeneracyTag::undecided: return "undecided";
  }
  return "?";
}

const char* cons_str(ConsistencyTag t) {
  switch (t) {
    case ConsistencyTag::consistent: return "consistent";
    case ConsistencyTag::inconsistent_candidate: return "inconsistent-candidate";
    case ConsistencyTag::undecided: return "undecided";
  }
  return "?";
}

}  // namespace

std::string AnalysisReport::to_text() const {
  std::ostringstream os;
  os << "a = " << contraction.a.str()
     << (contraction.contractive ? " (contractive)" : " (NOT contractive)") << "\n";
  os << "b = " << b.str() << "\n";
  if (!anchors_used.empty()) {
    os << "anchors:";
    for (const auto& [id, x] : anchors_used) os << " " << id << " -> " << x.str();
    os << "\n";
  }
  os << "xi:";
  for (const auto& [id, xi] : chain.xi) os << " " << id << " -> " << xi.str();
  os << "\n";
  os << "c = " << chain.c.str() << "\n";
  {
    std::vector<Rational> b_pts;
    for (const auto& bp : boundary) b_pts.push_back(bp.point);
    os << "boundary B = " << rational_set_str(b_pts) << "\n";
  }
  if (!omega.iterates.empty()) os << "R1 = " << omega.iterates.front().str() << "\n";
  if (omega.decided)
    os << "Omega = " << rational_set_str(omega.omega) << "\n";
  else
    os << "Omega = " << omega.note << "\n";
  os << "degeneracy: " << deg_str(degeneracy.tag) << " (" << degeneracy.rule << ")\n";
  os << "consistency: " << cons_str(consistency.tag);
  if (!consistency.rule.empty()) os << " (" << consistency.rule << ")";
  if (consistency.witness)
    os << " [witness z=" << consistency.witness->z.str() << ", image "
       << consistency.witness->y.str() << ", masses " << consistency.witness->r_mass.str()
       << " vs " << consistency.witness->u_mass.str() << "]";
  os << "\n";
  os << "subsystems:";
  for (const auto& s : subsystems) {
    os << " " << atoms_set_str(s.atoms) << "[" << (s.closed_in_k ? "closed" : "not closed")
       << (s.minimal_closed ? ", minimal closed" : "") << "]";
  }
  os << "\n";
  if (eps_tail > 0) os << "eps_tail = " << eps_tail << "\n";
  if (existence.tag == ExistenceTag::guaranteed)
    os << "verdict: existence guaranteed (" << existence.rule << ")\n";
  else
    os << "verdict: existence not established\n";
  for (const auto& h : existence.hypotheses) os << "  - " << h << "\n";
  return os.str();
}

namespace {

json cert_json(const CertValue& v) {
  json j;
  if (v.is_exact) {
    j["exact"] = v.exact.str();
  } else {
    j["approx"] = v.approx;
    j["exact_part"] = v.exact.str();
    j["truncation_bound"] = v.eps;
  }
  return j;
}

json fn_json(const BoundaryFn& f) {
  json j = json::object();
  for (const auto& [x, v] : f.values) j[x.str()] = v.str();
  return j;
}

}  // namespace

std::string AnalysisReport::to_json_string() const {
  json j;
  j["a"] = cert_json(contraction.a);
  j["contractive"] = contraction.contractive;
  j["b"] = cert_json(b);
  j["anchors"] = json::object();
  for (const auto& [id, x] : anchors_used) j["anchors"][std::to_string(id)] = x.str();
  j["xi"] = json::object();
  for (const auto& [id, xi] : chain.xi) j["xi"][std::to_string(id)] = cert_json(xi);
  j["q"] = json::array();
  for (const auto& [ij, v] : chain.q)
    j["q"].push_back({{"from", ij.first}, {"to", ij.second}, {"value", v.str()}});
  j["c"] = cert_json(chain.c);
  j["boundary"] = json::array();
  for (const auto& bp : boundary)
    j["boundary"].push_back({{"point", bp.point.str()}, {"atoms", bp.atoms}});
  j["r_iterates"] = json::array();
  for (const auto& f : omega.iterates) j["r_iterates"].push_back(fn_json(f));
  j["omega"] = json::object();
  j["omega"]["decided"] = omega.decided;
  j["omega"]["note"] = omega.note;
  j["omega"]["points"] = json::array();
  for (const auto& z : omega.omega) j["omega"]["points"].push_back(z.str());
  j["degeneracy"] = {{"verdict", deg_str(degeneracy.tag)}, {"rule", degeneracy.rule}};
  j["consistency"] = {{"verdict", cons_str(consistency.tag)}, {"rule", consistency.rule}};
  if (consistency.witness) {
    j["consistency"]["witness"] = {{"z", consistency.witness->z.str()},
                                   {"image", consistency.witness->y.str()},
                                   {"r_mass", consistency.witness->r_mass.str()},
                                   {"u_mass", consistency.witness->u_mass.str()}};
  }
  j["subsystems"] = json::array();
  for (const auto& s : subsystems) {
    json js;
    js["atoms"] = std::vector<int>(s.atoms.begin(), s.atoms.end());
    js["closed_in_k"] = s.closed_in_k;
    js["minimal_closed"] = s.minimal_closed;
    j["subsystems"].push_back(js);
  }
  j["existence"] = {{"verdict", existence.tag == ExistenceTag::guaranteed
                                    ? "guaranteed"
                                    : "not-established"},
                    {"rule", existence.rule},
                    {"hypotheses", existence.hypotheses}};
  if (existence.subsystem)
    j["existence"]["subsystem"] =
        std::vector<int>(existence.subsystem->begin(), existence.subsystem->end());
  if (eps_tail > 0) j["eps_tail"] = eps_tail;
  j["n_max"] = n_max_used;
  return j.dump(2);
}

}  // namespace cms
