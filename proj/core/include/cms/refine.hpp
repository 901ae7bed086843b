#pragma once

#include <map>
#include <string>
#include <vector>

#include "cms/coding.hpp"
#include "cms/system.hpp"

namespace cms {

/// Cut an atom at an interior point. left_closed chooses the side convention
/// (lo, at] / (at, hi) versus (lo, at) / [at, hi).
struct CutSpec {
  int atom = 0;
  Rational at;
  bool left_closed = true;
};

/// A verified refinement: the finer system, the refinement map r on edges and
/// the atom embedding. Every refined edge restricts its base edge exactly.
struct Refinement {
  ValidatedSystem base;
  ValidatedSystem refined;
  std::map<std::string, std::string> r;       // refined edge id -> base edge id
  std::map<int, int> atom_embedding;          // refined atom id -> base atom id

  SystemSpec refined_spec;  // serializable form of the refined system
};

/// Split the named atoms, restrict every base edge to the sub-atoms of its
/// source, re-resolve targets and re-validate. Refined anchors keep the base
/// anchor when it lands inside the sub-atom, else the midpoint. Restrictions
/// with identically-zero probability are dropped; r stays surjective or the
/// build fails.
Refinement build_refinement(const ValidatedSystem& base, const std::vector<CutSpec>& cuts);

/// Symbol-wise application of r; a valid refined path projects to a valid
/// base path.
SymbolWord psi_project(const Refinement& ref, const SymbolWord& refined_word);
EventuallyPeriodicWord psi_project(const Refinement& ref, const EventuallyPeriodicWord& w);

struct PushforwardCheck {
  Rational lhs;  // base cylinder probability
  Rational rhs;  // sum over refined preimage words
  bool equal = false;
  long long preimage_words = 0;
};

/// P_x(base word) must equal the sum of refined cylinder probabilities over
/// every refined word projecting to it. Exact; depth capped at 6.
PushforwardCheck cylinder_pushforward_check(const Refinement& ref, const Rational& x,
                                            const SymbolWord& base_word);

struct CommuteCheckEntry {
  EventuallyPeriodicWord word;
  Rational refined_value, base_value;
  bool equal = false;
};

struct CommuteReport {
  std::vector<CommuteCheckEntry> entries;
  int failures = 0;
};

/// Exact coding on the refined system must equal exact coding of the
/// projected word on the base system.
CommuteReport coding_commute_check(const Refinement& ref,
                                   const std::vector<EventuallyPeriodicWord>& refined_words);

/// Serialize a refined system back to spec JSON.
std::string refined_spec_json(const Refinement& ref);

}  // namespace cms
