#include "cms/system.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace cms {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Atom geometry
// ---------------------------------------------------------------------------

bool Atom::contains(const Rational& x) const {
  switch (kind) {
    case AtomKind::point:
      return x == lo;
    case AtomKind::line:
      return true;
    case AtomKind::interval:
      if (x < lo || x > hi) return false;
      if (x == lo && !lo_closed) return false;
      if (x == hi && !hi_closed) return false;
      return true;
  }
  return false;
}

std::vector<Rational> Atom::boundary_points() const {
  std::vector<Rational> out;
  if (kind != AtomKind::interval) return out;  // points and lines are closed
  if (!lo_closed) out.push_back(lo);
  if (!hi_closed) out.push_back(hi);
  return out;
}

std::vector<Rational> Atom::closure_corners() const {
  switch (kind) {
    case AtomKind::point:
      return {lo};
    case AtomKind::line:
      return {};
    case AtomKind::interval:
      return {lo, hi};
  }
  return {};
}

std::string atom_to_string(const Atom& a) {
  std::ostringstream os;
  switch (a.kind) {
    case AtomKind::point:
      os << "{" << a.lo.str() << "}";
      break;
    case AtomKind::line:
      os << "(-inf, inf)";
      break;
    case AtomKind::interval:
      os << (a.lo_closed ? "[" : "(") << a.lo.str() << ", " << a.hi.str()
         << (a.hi_closed ? "]" : ")");
      break;
  }
  return os.str();
}

Atom affine_image(const Atom& source, const Affine& map) {
  Atom img;
  img.id = -1;
  if (source.kind == AtomKind::line) {
    img.kind = map.slope.is_zero() ? AtomKind::point : AtomKind::line;
    if (img.kind == AtomKind::point) img.lo = img.hi = map.intercept;
    return img;
  }
  if (source.kind == AtomKind::point || map.slope.is_zero()) {
    img.kind = AtomKind::point;
    img.lo = img.hi = map(source.lo);
    return img;
  }
  img.kind = AtomKind::interval;
  Rational a = map(source.lo), b = map(source.hi);
  if (map.slope.is_negative()) {
    img.lo = b;
    img.hi = a;
    img.lo_closed = source.hi_closed;
    img.hi_closed = source.lo_closed;
  } else {
    img.lo = a;
    img.hi = b;
    img.lo_closed = source.lo_closed;
    img.hi_closed = source.hi_closed;
  }
  return img;
}

bool atom_contains_atom(const Atom& outer, const Atom& inner) {
  if (outer.kind == AtomKind::line) return true;
  if (inner.kind == AtomKind::line) return false;
  if (inner.kind == AtomKind::point) return outer.contains(inner.lo);
  if (outer.kind == AtomKind::point) return false;  // a proper interval never fits a point
  // interval in interval
  if (inner.lo < outer.lo || (inner.lo == outer.lo && inner.lo_closed && !outer.lo_closed))
    return false;
  if (inner.hi > outer.hi || (inner.hi == outer.hi && inner.hi_closed && !outer.hi_closed))
    return false;
  return true;
}

// ---------------------------------------------------------------------------
// Tail family instantiation
// ---------------------------------------------------------------------------

double TailFamily::p_n(long n) const {
  double ln = std::log(static_cast<double>(n));
  return spec.prob_coeff / (static_cast<double>(n) * ln * ln);
}

double TailFamily::slope_n(long n) const {
  return spec.slope_coeff * std::sqrt(std::log(static_cast<double>(n)));
}

double TailFamily::tail_mass_bound(long m) const {
  // sum_{n>m} p_n <= prob_coeff * integral_m^inf dt/(t ln^2 t) = prob_coeff/ln m
  return spec.prob_coeff / std::log(static_cast<double>(m));
}

namespace {

TailFamily instantiate_tail(const TailFamilySpec& spec) {
  if (spec.kind != "log_power")
    throw ValidationError("unknown tail family kind '" + spec.kind + "'");
  if (spec.n0 < 3) throw ValidationError("tail family requires n0 >= 3");
  if (spec.truncate_at <= spec.n0)
    throw ValidationError("tail family truncation must exceed n0");
  if (spec.prob_coeff <= 0.0)
    throw ValidationError("tail family prob_coeff must be positive");

  TailFamily t;
  t.spec = spec;
  long count = spec.truncate_at - spec.n0 + 1;
  t.cdf.resize(count);
  t.slope.resize(count);
  double acc = 0.0;
  for (long n = spec.n0; n <= spec.truncate_at; ++n) {
    double p = t.p_n(n);
    double s = t.slope_n(n);
    acc += p;
    t.cdf[n - spec.n0] = acc;
    t.slope[n - spec.n0] = s;
    t.contraction_partial += p * std::abs(s);
    t.mean_slope += p * s;
    t.mean_slope2 += p * s * s;
  }
  t.mass = acc;
  t.eps_tail = t.tail_mass_bound(spec.truncate_at);
  // sum_{n>M} p_n|s_n| <= prob_coeff*slope_coeff * int_M^inf dt/(t ln^{3/2} t)
  t.contraction_tail_bound = 2.0 * spec.prob_coeff * std::abs(spec.slope_coeff) /
                             std::sqrt(std::log(static_cast<double>(spec.truncate_at)));

  // The declared tail bound must actually dominate the generator: check it by
  // direct summation at a couple of interior cut points.
  for (long m : {spec.truncate_at / 2, spec.truncate_at / 4}) {
    if (m <= spec.n0) continue;
    double tail = t.mass - t.cdf[m - spec.n0];
    if (tail > t.tail_mass_bound(m) * (1.0 + 1e-9) + 1e-15)
      throw ValidationError("tail_mass_bound violated at m=" + std::to_string(m));
  }
  return t;
}

}  // namespace

// ---------------------------------------------------------------------------
// Parsing
// ---------------------------------------------------------------------------

namespace {

Rational rat_field(const json& j) {
  if (j.is_number_integer()) return Rational(static_cast<long>(j.get<long long>()));
  if (j.is_string()) return Rational::parse(j.get<std::string>());
  throw SpecError("expected rational as string \"p/q\" or integer, got: " + j.dump());
}

Affine affine_field(const json& j) {
  Affine a;
  a.slope = rat_field(j.at("slope"));
  a.intercept = rat_field(j.at("intercept"));
  return a;
}

std::vector<std::string> split_word(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!cur.empty() || !s.empty()) out.push_back(cur);
  return out;
}

SystemSpec parse_interval(const json& doc) {
  SystemSpec spec;
  spec.backend = Backend::interval;

  const auto& space = doc.at("space");
  if (space.contains("unbounded") && space.at("unbounded").get<bool>()) {
    spec.unbounded_space = true;
  } else {
    spec.space_lo = rat_field(space.at("lo"));
    spec.space_hi = rat_field(space.at("hi"));
  }

  std::set<int> atom_ids;
  for (const auto& ja : doc.at("atoms")) {
    Atom a;
    a.id = ja.at("id").get<int>();
    if (!atom_ids.insert(a.id).second)
      throw SpecError("duplicate atom id " + std::to_string(a.id));
    std::string kind = ja.at("kind").get<std::string>();
    if (kind == "point") {
      a.kind = AtomKind::point;
      a.lo = a.hi = rat_field(ja.at("at"));
      a.lo_closed = a.hi_closed = true;
    } else if (kind == "interval") {
      a.kind = AtomKind::interval;
      a.lo = rat_field(ja.at("lo"));
      a.hi = rat_field(ja.at("hi"));
      a.lo_closed = ja.value("lo_closed", false);
      a.hi_closed = ja.value("hi_closed", false);
    } else if (kind == "line") {
      a.kind = AtomKind::line;
    } else {
      throw SpecError("unknown atom kind '" + kind + "'");
    }
    spec.atoms.push_back(a);
  }

  if (doc.contains("anchors")) {
    for (auto it = doc.at("anchors").begin(); it != doc.at("anchors").end(); ++it)
      spec.anchors[std::stoi(it.key())] = rat_field(it.value());
  }

  std::set<std::string> edge_ids;
  if (doc.contains("edges")) {
    for (const auto& je : doc.at("edges")) {
      Edge e;
      e.id = je.at("id").is_string() ? je.at("id").get<std::string>()
                                     : je.at("id").dump();
      if (!edge_ids.insert(e.id).second) throw SpecError("duplicate edge id '" + e.id + "'");
      e.source = je.at("from").get<int>();
      e.map = affine_field(je.at("map"));
      e.prob = affine_field(je.at("prob"));
      if (je.contains("group")) e.group = je.at("group").get<std::string>();
      spec.edges.push_back(e);
    }
  }

  if (doc.contains("tail_family")) {
    const auto& jt = doc.at("tail_family");
    TailFamilySpec t;
    t.kind = jt.value("kind", std::string("log_power"));
    t.n0 = jt.value("n0", 3L);
    t.atom = jt.value("atom", 1);
    t.truncate_at = jt.at("truncate_at").get<long>();
    t.prob_coeff = jt.at("prob_coeff").get<double>();
    t.slope_coeff = jt.at("slope_coeff").get<double>();
    t.intercept = rat_field(jt.at("intercept"));
    spec.tail = t;
  }

  if (spec.edges.empty() && !spec.tail) throw SpecError("system has no edges");
  return spec;
}

SystemSpec parse_subshift(const json& doc) {
  SystemSpec spec;
  spec.backend = Backend::subshift;
  SubshiftSystem sub;

  const auto& graph = doc.at("graph");
  std::set<int> vset;
  for (const auto& v : graph.at("vertices")) {
    int id = v.get<int>();
    if (!vset.insert(id).second) throw SpecError("duplicate vertex id " + std::to_string(id));
    sub.vertices.push_back(id);
  }
  std::set<std::string> eset;
  for (const auto& je : graph.at("edges")) {
    SubshiftEdge e;
    e.id = je.at("id").is_string() ? je.at("id").get<std::string>() : je.at("id").dump();
    if (!eset.insert(e.id).second) throw SpecError("duplicate edge id '" + e.id + "'");
    e.from = je.at("from").get<int>();
    e.to = je.at("to").get<int>();
    if (!vset.count(e.from) || !vset.count(e.to))
      throw SpecError("edge '" + e.id + "' references unknown vertex");
    sub.edges.push_back(e);
  }
  if (sub.edges.empty()) throw SpecError("system has no edges");

  const auto& g = doc.at("g");
  sub.memory = g.at("memory").get<int>();
  if (sub.memory < 1) throw SpecError("g memory must be >= 1");
  for (auto it = g.at("table").begin(); it != g.at("table").end(); ++it) {
    auto word = split_word(it.key());
    if (static_cast<int>(word.size()) != sub.memory)
      throw SpecError("g table key '" + it.key() + "' has wrong length");
    sub.g[word] = rat_field(it.value());
  }
  spec.subshift = std::move(sub);
  return spec;
}

}  // namespace

SystemSpec parse_spec(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const std::exception& e) {
    throw SpecError(std::string("invalid JSON: ") + e.what());
  }
  std::string backend = doc.value("backend", std::string(""));
  if (backend == "interval") return parse_interval(doc);
  if (backend == "subshift") return parse_subshift(doc);
  throw SpecError("unknown backend '" + backend + "'");
}

SystemSpec parse_spec_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SpecError("cannot open spec file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_spec(ss.str());
}

// ---------------------------------------------------------------------------
// SubshiftSystem helpers
// ---------------------------------------------------------------------------

const SubshiftEdge* SubshiftSystem::edge_by_id(const std::string& id) const {
  for (const auto& e : edges)
    if (e.id == id) return &e;
  return nullptr;
}

std::vector<const SubshiftEdge*> SubshiftSystem::edges_from(int vertex) const {
  std::vector<const SubshiftEdge*> out;
  for (const auto& e : edges)
    if (e.from == vertex) out.push_back(&e);
  return out;
}

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

namespace {

// A point provably inside both overlapping atoms, used as the error witness.
Rational overlap_witness(const Atom& a, const Atom& b) {
  Rational lo = std::max(a.lo, b.lo);
  Rational hi = std::min(a.hi, b.hi);
  if (a.contains(lo) && b.contains(lo)) return lo;
  if (a.contains(hi) && b.contains(hi)) return hi;
  return (lo + hi) / Rational(2);
}

void validate_partition(const std::vector<Atom>& sorted, const Rational& lo,
                        const Rational& hi) {
  // Walk left to right; each atom must continue exactly where the previous
  // one stopped, with complementary endpoint flags.
  Rational pos = lo;
  bool covered = false;  // is `pos` itself already covered?
  for (std::size_t k = 0; k < sorted.size(); ++k) {
    const Atom& a = sorted[k];
    bool closed_at_start = a.is_point() ? true : a.lo_closed;
    if (a.lo > pos)
      throw ValidationError("coverage gap: witness interval (" + pos.str() + ", " +
                            a.lo.str() + ")");
    if (a.lo < pos) {
      if (k == 0)
        throw ValidationError("atom " + std::to_string(a.id) +
                              " extends below the state space: witness point " + a.lo.str());
      throw ValidationError("overlapping atoms: witness point " +
                            overlap_witness(sorted[k - 1], a).str());
    }
    // a.lo == pos
    if (!covered && !closed_at_start)
      throw ValidationError("coverage gap: witness point " + pos.str());
    if (covered && closed_at_start)
      throw ValidationError("overlapping atoms: witness point " + pos.str());
    pos = a.hi;
    covered = a.is_point() ? true : a.hi_closed;
  }
  if (pos < hi) {
    throw ValidationError("coverage gap: witness interval (" + pos.str() + ", " + hi.str() +
                          ")");
  }
  if (pos > hi)
    throw ValidationError("atom extends beyond the state space: witness point " + pos.str());
  if (!covered) throw ValidationError("coverage gap: witness point " + pos.str());
}

bool prob_identically_zero(const Atom& atom, const Affine& p) {
  if (atom.kind == AtomKind::point) return p(atom.lo).is_zero();
  return p.is_identically_zero();
}

}  // namespace

ValidatedSystem validate(const SystemSpec& spec) {
  ValidatedSystem sys;
  sys.backend = spec.backend;

  if (spec.backend == Backend::subshift) {
    const SubshiftSystem& sub = *spec.subshift;
    for (int v : sub.vertices) {
      bool has_out = false, has_in = false;
      for (const auto& e : sub.edges) {
        if (e.from == v) has_out = true;
        if (e.to == v) has_in = true;
      }
      if (!has_out)
        throw ValidationError("vertex " + std::to_string(v) + " has no outgoing edge");
      if (!has_in)
        throw ValidationError("vertex " + std::to_string(v) + " has no incoming edge");
    }
    for (const auto& [word, val] : sub.g) {
      for (std::size_t k = 0; k < word.size(); ++k) {
        const SubshiftEdge* e = sub.edge_by_id(word[k]);
        if (!e) throw ValidationError("g table references unknown edge '" + word[k] + "'");
        if (k + 1 < word.size()) {
          const SubshiftEdge* f = sub.edge_by_id(word[k + 1]);
          if (e->to != f->from)
            throw ValidationError("g table key contains non-admissible word at '" +
                                  word[k] + "," + word[k + 1] + "'");
        }
      }
      if (val <= Rational(0) || val > Rational(1))
        throw ValidationError("g value outside (0,1] for a table entry");
    }

    // Enumerate admissible length-(memory) words and check the table is
    // complete and normalized: extensions of each context sum to exactly 1.
    std::vector<std::vector<std::string>> words;
    for (const auto& e : sub.edges) words.push_back({e.id});
    for (int len = 2; len <= sub.memory; ++len) {
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
      if (words.size() > 200000)
        throw ValidationError("g table context space too large to validate");
    }
    std::map<std::vector<std::string>, Rational> context_sum;
    for (const auto& w : words) {
      auto it = sub.g.find(w);
      if (it == sub.g.end()) {
        std::string key;
        for (std::size_t k = 0; k < w.size(); ++k) key += (k ? "," : "") + w[k];
        throw ValidationError("g table missing entry for admissible word '" + key + "'");
      }
      std::vector<std::string> ctx(w.begin(), w.end() - 1);
      if (sub.memory == 1) ctx = {std::to_string(sub.edge_by_id(w.back())->from)};
      context_sum[ctx] += it->second;
    }
    for (const auto& [ctx, total] : context_sum) {
      if (total != Rational(1)) {
        std::string key;
        for (std::size_t k = 0; k < ctx.size(); ++k) key += (k ? "," : "") + ctx[k];
        throw ValidationError("g values for context '" + key + "' sum to " + total.str() +
                              ", expected 1");
      }
    }

    sys.shift = sub;
    return sys;
  }

  // interval backend
  sys.unbounded = spec.unbounded_space;
  sys.space_lo = spec.space_lo;
  sys.space_hi = spec.space_hi;
  sys.atoms = spec.atoms;
  sys.edges = spec.edges;
  sys.tail.reset();

  if (sys.atoms.empty()) throw ValidationError("system has no atoms");

  bool has_line = std::any_of(sys.atoms.begin(), sys.atoms.end(),
                              [](const Atom& a) { return a.kind == AtomKind::line; });
  if (has_line) {
    if (!sys.unbounded || sys.atoms.size() != 1)
      throw ValidationError("a line atom must be the single atom of an unbounded space");
  } else if (sys.unbounded) {
    throw ValidationError("unbounded space requires a line atom");
  } else {
    for (const auto& a : sys.atoms) {
      if (a.kind == AtomKind::interval && !(a.lo < a.hi))
        throw ValidationError("interval atom " + std::to_string(a.id) +
                              " must satisfy lo < hi");
    }
    std::sort(sys.atoms.begin(), sys.atoms.end(),
              [](const Atom& x, const Atom& y) {
                if (x.lo != y.lo) return x.lo < y.lo;
                return x.is_point() && !y.is_point();
              });
    validate_partition(sys.atoms, sys.space_lo, sys.space_hi);
  }

  if (spec.tail) {
    TailFamily t = instantiate_tail(*spec.tail);
    bool found = std::any_of(sys.atoms.begin(), sys.atoms.end(),
                             [&](const Atom& a) { return a.id == t.spec.atom; });
    if (!found)
      throw ValidationError("tail family references unknown atom " +
                            std::to_string(t.spec.atom));
    sys.tail = std::move(t);
  }

  sys.build_indexes();

  // Per-edge sanity and target resolution.
  for (auto& e : sys.edges) {
    const Atom* src = nullptr;
    for (const auto& a : sys.atoms)
      if (a.id == e.source) src = &a;
    if (!src)
      throw ValidationError("edge '" + e.id + "' has unknown source atom " +
                            std::to_string(e.source));

    if (prob_identically_zero(*src, e.prob))
      throw ValidationError("edge '" + e.id + "' has probability identically zero on atom " +
                            std::to_string(e.source));
    if (src->kind == AtomKind::line) {
      if (!e.prob.slope.is_zero())
        throw ValidationError("edge '" + e.id +
                              "' on a line atom must have a constant probability");
      if (e.prob.intercept < Rational(0) || e.prob.intercept > Rational(1))
        throw ValidationError("edge '" + e.id + "' probability leaves [0,1]");
    }
    for (const auto& corner : src->closure_corners()) {
      Rational v = e.prob(corner);
      if (v < Rational(0) || v > Rational(1))
        throw ValidationError("edge '" + e.id + "' probability leaves [0,1] at x=" +
                              corner.str() + " (value " + v.str() + ")");
    }

    Atom img = affine_image(*src, e.map);
    const Atom* tgt = nullptr;
    for (const auto& a : sys.atoms)
      if (atom_contains_atom(a, img)) {
        tgt = &a;
        break;
      }
    if (!tgt) {
      // The image straddles atoms; report the first partition boundary that
      // cuts through its interior.
      for (const auto& a : sys.atoms) {
        for (const auto& endpoint : a.closure_corners()) {
          if (img.kind == AtomKind::interval && endpoint > img.lo && endpoint < img.hi)
            throw ValidationError("edge '" + e.id + "' image " + atom_to_string(img) +
                                  " straddles two atoms at witness point " + endpoint.str());
        }
      }
      throw ValidationError("edge '" + e.id + "' image " + atom_to_string(img) +
                            " is not contained in any atom");
    }
    e.target = tgt->id;
  }

  // Probability-sum identity per atom: affine coefficients must add up to the
  // constant 1 on every atom with interior; point atoms are checked by value.
  for (const auto& a : sys.atoms) {
    auto outgoing = sys.edges_from(a.id);
    bool has_tail_here = sys.tail && sys.tail->spec.atom == a.id;
    if (outgoing.empty() && !has_tail_here)
      throw ValidationError("atom " + std::to_string(a.id) + " has no outgoing edges");

    if (a.kind == AtomKind::point) {
      Rational total(0);
      for (const Edge* e : outgoing) total += e->prob(a.lo);
      if (!has_tail_here) {
        if (total != Rational(1))
          throw ValidationError("probability sum on atom " + std::to_string(a.id) + " is " +
                                total.str() + ", expected 1");
      }
    } else {
      Rational slope_sum(0), intercept_sum(0);
      for (const Edge* e : outgoing) {
        slope_sum += e->prob.slope;
        intercept_sum += e->prob.intercept;
      }
      if (!has_tail_here) {
        if (!slope_sum.is_zero() || intercept_sum != Rational(1))
          throw ValidationError("probability sum on atom " + std::to_string(a.id) +
                                " is the affine " + slope_sum.str() + "*x + " +
                                intercept_sum.str() + ", expected the constant 1");
      } else {
        if (!slope_sum.is_zero())
          throw ValidationError("probability slopes on the tail atom must cancel");
        double residual =
            1.0 - intercept_sum.to_double() - sys.tail->mass;
        if (residual < -1e-9 || residual > sys.tail->eps_tail + 1e-9)
          throw ValidationError(
              "probability mass on the tail atom misses 1 by " + std::to_string(residual) +
              ", beyond the declared truncation error " + std::to_string(sys.tail->eps_tail));
      }
    }
  }

  // Anchors: default to the point / the midpoint, then check membership.
  sys.anchors = spec.anchors;
  for (const auto& a : sys.atoms) {
    auto it = sys.anchors.find(a.id);
    if (it == sys.anchors.end()) {
      Rational def;
      if (a.kind == AtomKind::point)
        def = a.lo;
      else if (a.kind == AtomKind::line)
        def = Rational(0);
      else
        def = (a.lo + a.hi) / Rational(2);
      sys.anchors[a.id] = def;
    } else if (!a.contains(it->second)) {
      throw ValidationError("anchor " + it->second.str() + " lies outside atom " +
                            std::to_string(a.id));
    }
  }

  return sys;
}

// ---------------------------------------------------------------------------
// ValidatedSystem accessors
// ---------------------------------------------------------------------------

void ValidatedSystem::build_indexes() {
  atom_index_.clear();
  edges_from_.clear();
  edge_index_.clear();
  for (std::size_t k = 0; k < atoms.size(); ++k) atom_index_[atoms[k].id] = k;
  for (std::size_t k = 0; k < edges.size(); ++k) {
    edges_from_[edges[k].source].push_back(k);
    edge_index_[edges[k].id] = k;
  }
}

const Atom& ValidatedSystem::atom(int id) const {
  auto it = atom_index_.find(id);
  if (it == atom_index_.end())
    throw std::out_of_range("no atom with id " + std::to_string(id));
  return atoms[it->second];
}

std::optional<int> ValidatedSystem::atom_of(const Rational& x) const {
  for (const auto& a : atoms)
    if (a.contains(x)) return a.id;
  return std::nullopt;
}

std::vector<const Edge*> ValidatedSystem::edges_from(int atom_id) const {
  std::vector<const Edge*> out;
  auto it = edges_from_.find(atom_id);
  if (it == edges_from_.end()) return out;
  for (auto k : it->second) out.push_back(&edges[k]);
  return out;
}

const Edge* ValidatedSystem::edge_by_id(const std::string& id) const {
  auto it = edge_index_.find(id);
  return it == edge_index_.end() ? nullptr : &edges[it->second];
}

std::vector<int> ValidatedSystem::atom_ids() const {
  std::vector<int> out;
  if (backend == Backend::subshift) {
    out = shift->vertices;
  } else {
    for (const auto& a : atoms) out.push_back(a.id);
  }
  return out;
}

Rational ValidatedSystem::apply_U(const std::function<Rational(const Rational&)>& f,
                                  const Rational& x) const {
  if (tail) throw std::logic_error("apply_U requires a finite edge set");
  auto home = atom_of(x);
  if (!home) return Rational(0);
  Rational acc(0);
  for (const Edge* e : edges_from(*home)) {
    Rational p = e->prob(x);
    if (p.is_zero()) continue;
    acc += p * f(e->map(x));
  }
  return acc;
}

}  // namespace cms
