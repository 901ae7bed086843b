#include "cms/refine.hpp"

#include <algorithm>

#include "json.hpp"

namespace cms {

using nlohmann::json;

namespace {

struct SubAtom {
  Atom atom;
  int base_id;
};

std::vector<SubAtom> split_atoms(const ValidatedSystem& base, const std::vector<CutSpec>& cuts) {
  std::map<int, std::vector<CutSpec>> by_atom;
  for (const auto& c : cuts) by_atom[c.atom].push_back(c);

  std::vector<SubAtom> out;
  int next_id = 1;
  for (const auto& a : base.atoms) {
    auto it = by_atom.find(a.id);
    if (it == by_atom.end()) {
      SubAtom s{a, a.id};
      s.atom.id = next_id++;
      out.push_back(s);
      continue;
    }
    if (a.kind != AtomKind::interval)
      throw ValidationError("only interval atoms can be cut (atom " + std::to_string(a.id) +
                            ")");
    auto atom_cuts = it->second;
    std::sort(atom_cuts.begin(), atom_cuts.end(),
              [](const CutSpec& x, const CutSpec& y) { return x.at < y.at; });
    for (const auto& c : atom_cuts) {
      if (!(c.at > a.lo && c.at < a.hi))
        throw ValidationError("cut not interior: " + c.at.str() + " in atom " +
                              std::to_string(a.id) + " " + atom_to_string(a));
    }
    Rational lo = a.lo;
    bool lo_closed = a.lo_closed;
    for (const auto& c : atom_cuts) {
      Atom piece;
      piece.id = next_id++;
      piece.kind = AtomKind::interval;
      piece.lo = lo;
      piece.lo_closed = lo_closed;
      piece.hi = c.at;
      piece.hi_closed = c.left_closed;
      out.push_back(SubAtom{piece, a.id});
      lo = c.at;
      lo_closed = !c.left_closed;
    }
    Atom last;
    last.id = next_id++;
    last.kind = AtomKind::interval;
    last.lo = lo;
    last.lo_closed = lo_closed;
    last.hi = a.hi;
    last.hi_closed = a.hi_closed;
    out.push_back(SubAtom{last, a.id});
  }
  return out;
}

}  // namespace

Refinement build_refinement(const ValidatedSystem& base, const std::vector<CutSpec>& cuts) {
  if (base.backend != Backend::interval)
    throw std::logic_error("refinement requires the interval backend");
  if (base.tail) throw std::logic_error("refinement requires a finite edge set");

  Refinement ref;
  ref.base = base;

  auto pieces = split_atoms(base, cuts);

  SystemSpec spec;
  spec.backend = Backend::interval;
  spec.space_lo = base.space_lo;
  spec.space_hi = base.space_hi;
  for (const auto& p : pieces) spec.atoms.push_back(p.atom);

  // anchors: keep the base anchor where it lands, else the midpoint
  for (const auto& p : pieces) {
    const Rational& base_anchor = base.anchors.at(p.base_id);
    if (p.atom.contains(base_anchor))
      spec.anchors[p.atom.id] = base_anchor;
    else if (p.atom.kind == AtomKind::interval)
      spec.anchors[p.atom.id] = (p.atom.lo + p.atom.hi) / Rational(2);
    else
      spec.anchors[p.atom.id] = p.atom.lo;
  }

  // restrict every base edge to each sub-atom of its source
  std::map<std::string, std::string> r_map;
  std::map<std::string, int> fiber_count;
  for (const auto& e : base.edges) {
    int copies = 0;
    for (const auto& p : pieces) {
      if (p.base_id != e.source) continue;
      ++copies;
      Edge re = e;
      re.id = e.id + "." + std::to_string(copies);
      re.source = p.atom.id;
      re.target = 0;
      // drop restrictions whose probability vanishes identically on the piece
      bool zero = p.atom.kind == AtomKind::point ? e.prob(p.atom.lo).is_zero()
                                                 : e.prob.is_identically_zero();
      if (zero) continue;
      spec.edges.push_back(re);
      r_map[re.id] = e.id;
      fiber_count[e.id] += 1;
    }
  }
  for (const auto& e : base.edges) {
    if (fiber_count[e.id] == 0)
      throw ValidationError("refinement map not surjective: base edge '" + e.id +
                            "' has no restriction with positive probability");
  }

  ValidatedSystem refined = validate(spec);

  ref.refined = std::move(refined);
  ref.r = std::move(r_map);
  for (const auto& p : pieces) ref.atom_embedding[p.atom.id] = p.base_id;
  ref.refined_spec = std::move(spec);

  // structural guarantees: every refined atom sits inside its base atom, and
  // every base atom is the disjoint union of its pieces (by construction of
  // the split; checked here against the validated copy)
  for (const auto& a : ref.refined.atoms) {
    const Atom& parent = base.atom(ref.atom_embedding.at(a.id));
    if (!atom_contains_atom(parent, a))
      throw ValidationError("refined atom escapes its base atom");
  }
  return ref;
}

SymbolWord psi_project(const Refinement& ref, const SymbolWord& refined_word) {
  SymbolWord out;
  for (const auto& id : refined_word.symbols) {
    auto it = ref.r.find(id);
    if (it == ref.r.end()) throw std::invalid_argument("unknown refined edge '" + id + "'");
    out.symbols.push_back(it->second);
  }
  return out;
}

EventuallyPeriodicWord psi_project(const Refinement& ref, const EventuallyPeriodicWord& w) {
  EventuallyPeriodicWord out;
  out.prefix = psi_project(ref, w.prefix);
  out.period = psi_project(ref, w.period);
  return out;
}

PushforwardCheck cylinder_pushforward_check(const Refinement& ref, const Rational& x,
                                            const SymbolWord& base_word) {
  if (base_word.size() > 6)
    throw std::invalid_argument("pushforward check is capped at depth 6");
  PushforwardCheck out;
  out.lhs = cylinder_prob(ref.base, x, base_word);

  // preimage fibers per base symbol
  std::vector<std::vector<std::string>> fibers;
  for (const auto& id : base_word.symbols) {
    std::vector<std::string> fiber;
    for (const auto& [re, be] : ref.r)
      if (be == id) fiber.push_back(re);
    std::sort(fiber.begin(), fiber.end());
    fibers.push_back(std::move(fiber));
  }

  Rational total(0);
  std::vector<std::size_t> idx(fibers.size(), 0);
  if (!fibers.empty()) {
    long long count = 0;
    while (true) {
      SymbolWord w;
      for (std::size_t k = 0; k < fibers.size(); ++k) w.symbols.push_back(fibers[k][idx[k]]);
      total += cylinder_prob(ref.refined, x, w);
      ++count;
      std::size_t k = 0;
      while (k < idx.size()) {
        if (++idx[k] < fibers[k].size()) break;
        idx[k] = 0;
        ++k;
      }
      if (k == idx.size()) break;
    }
    out.preimage_words = count;
  }
  out.rhs = total;
  out.equal = out.lhs == out.rhs;
  return out;
}

CommuteReport coding_commute_check(const Refinement& ref,
                                   const std::vector<EventuallyPeriodicWord>& refined_words) {
  CommuteReport rep;
  for (const auto& w : refined_words) {
    CommuteCheckEntry e;
    e.word = w;
    e.refined_value = coding_map_exact(ref.refined, w);
    e.base_value = coding_map_exact(ref.base, psi_project(ref, w));
    e.equal = e.refined_value == e.base_value;
    if (!e.equal) ++rep.failures;
    rep.entries.push_back(std::move(e));
  }
  return rep;
}

std::string refined_spec_json(const Refinement& ref) {
  json j;
  j["backend"] = "interval";
  j["space"] = {{"lo", ref.refined.space_lo.str()}, {"hi", ref.refined.space_hi.str()}};
  j["atoms"] = json::array();
  for (const auto& a : ref.refined.atoms) {
    json ja;
    ja["id"] = a.id;
    if (a.kind == AtomKind::point) {
      ja["kind"] = "point";
      ja["at"] = a.lo.str();
    } else {
      ja["kind"] = "interval";
      ja["lo"] = a.lo.str();
      ja["hi"] = a.hi.str();
      ja["lo_closed"] = a.lo_closed;
      ja["hi_closed"] = a.hi_closed;
    }
    j["atoms"].push_back(ja);
  }
  j["anchors"] = json::object();
  for (const auto& [id, x] : ref.refined.anchors) j["anchors"][std::to_string(id)] = x.str();
  j["edges"] = json::array();
  for (const auto& e : ref.refined.edges) {
    json je;
    je["id"] = e.id;
    je["from"] = e.source;
    je["map"] = {{"slope", e.map.slope.str()}, {"intercept", e.map.intercept.str()}};
    je["prob"] = {{"slope", e.prob.slope.str()}, {"intercept", e.prob.intercept.str()}};
    if (e.group) je["group"] = *e.group;
    j["edges"].push_back(je);
  }
  j["refinement_map"] = json::object();
  for (const auto& [re, be] : ref.r) j["refinement_map"][re] = be;
  return j.dump(2);
}

}  // namespace cms
