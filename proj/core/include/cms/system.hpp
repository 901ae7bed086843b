#pragma once

#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "cms/rational.hpp"

namespace cms {

/// Thrown when a parsed spec fails semantic validation. The message always
/// carries a witness (an offending point, interval or identifier).
struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class Backend { interval, subshift };

enum class AtomKind { point, interval, line };

/// One vertex set of the Markov partition. Interval atoms carry open/closed
/// flags per endpoint; point atoms are singletons; a line atom is the whole
/// real line (only allowed as the single atom of an unbounded space).
struct Atom {
  int id = 0;
  AtomKind kind = AtomKind::interval;
  Rational lo, hi;  // point: lo == hi == the point
  bool lo_closed = false, hi_closed = false;

  bool is_point() const { return kind == AtomKind::point; }
  bool contains(const Rational& x) const;
  /// Points of closure(atom) \ atom. Empty for points, lines and clopen intervals.
  std::vector<Rational> boundary_points() const;
  /// Endpoints of the closure; affine functions attain their sup/inf here.
  /// Empty for line atoms (sups over the line exist only for constants).
  std::vector<Rational> closure_corners() const;
};

/// Affine function x -> slope*x + intercept, used both for the maps w_e and
/// the probability functions p_e. Evaluation is exact on rational inputs; the
/// Lipschitz constant of the map role is |slope|.
struct Affine {
  Rational slope, intercept;
  Rational operator()(const Rational& x) const { return slope * x + intercept; }
  bool operator==(const Affine& o) const { return slope == o.slope && intercept == o.intercept; }
  bool is_identically_zero() const { return slope.is_zero() && intercept.is_zero(); }
};

struct Edge {
  std::string id;
  int source = 0;  // i(e)
  int target = 0;  // t(e), resolved during validation
  Affine map;      // w_e
  Affine prob;     // p_e
  std::optional<std::string> group;  // restriction-of-one-global-pair label
};

/// Parametric description of a countable edge family indexed by n >= n0,
/// instantiated by truncation. The one supported closed form is
///   p_n = prob_coeff / (n ln^2 n),  w_n(x) = slope_coeff*sqrt(ln n)*x + intercept.
struct TailFamilySpec {
  std::string kind = "log_power";
  long n0 = 3;
  int atom = 1;
  long truncate_at = 0;
  double prob_coeff = 0.0;
  double slope_coeff = 0.0;
  Rational intercept;
};

/// A truncated instantiation with its recorded truncation error and the
/// closed-form tail bounds every downstream certificate carries along.
struct TailFamily {
  TailFamilySpec spec;
  std::vector<double> cdf;    // cumulative probabilities for n0..truncate_at
  std::vector<double> slope;  // map slopes for n0..truncate_at
  double mass = 0.0;          // sum p_n over the instantiated range
  double eps_tail = 0.0;      // upper bound on the mass beyond truncation
  double contraction_partial = 0.0;    // sum p_n |slope_n|
  double contraction_tail_bound = 0.0; // upper bound on the same sum beyond truncation
  double mean_slope = 0.0;    // sum p_n slope_n
  double mean_slope2 = 0.0;   // sum p_n slope_n^2

  double p_n(long n) const;
  double slope_n(long n) const;
  double tail_mass_bound(long m) const;
  long edge_count() const { return static_cast<long>(cdf.size()); }
};

struct SubshiftEdge {
  std::string id;
  int from = 0, to = 0;
};

/// Finite-graph subshift with a finite-memory g-function. The table maps
/// length-memory admissible edge words to values in (0,1]; the last symbol of
/// a key is the edge being taken, the rest is the most recent history.
struct SubshiftSystem {
  std::vector<int> vertices;
  std::vector<SubshiftEdge> edges;
  int memory = 1;
  std::map<std::vector<std::string>, Rational> g;

  const SubshiftEdge* edge_by_id(const std::string& id) const;
  std::vector<const SubshiftEdge*> edges_from(int vertex) const;
};

/// Raw parsed spec, rationals exact, nothing validated yet.
struct SystemSpec {
  Backend backend = Backend::interval;
  bool unbounded_space = false;
  Rational space_lo, space_hi;
  std::vector<Atom> atoms;
  std::vector<Edge> edges;
  std::map<int, Rational> anchors;
  std::optional<TailFamilySpec> tail;
  std::optional<SubshiftSystem> subshift;
};

/// A validated Markov system: partition verified, probability-sum identity
/// verified per atom, edge targets resolved, anchors complete. Immutable
/// after construction; safe to share across threads.
class ValidatedSystem {
 public:
  Backend backend = Backend::interval;

  // interval backend
  bool unbounded = false;
  Rational space_lo, space_hi;
  std::vector<Atom> atoms;  // sorted by position on the line
  std::vector<Edge> edges;
  std::map<int, Rational> anchors;
  std::optional<TailFamily> tail;

  // subshift backend
  std::optional<SubshiftSystem> shift;

  const Atom& atom(int id) const;
  std::optional<int> atom_of(const Rational& x) const;
  std::vector<const Edge*> edges_from(int atom_id) const;
  const Edge* edge_by_id(const std::string& id) const;
  std::vector<int> atom_ids() const;

  /// Exact Markov operator on functions, Uf(x) = sum_e p_e(x) f(w_e(x)).
  /// Finite edge set only; throws when a tail family is attached.
  Rational apply_U(const std::function<Rational(const Rational&)>& f, const Rational& x) const;

  /// Rebuild the lookup tables after direct construction; validate() and
  /// make_subsystem() call this once all members are in place.
  void build_indexes();

 private:
  std::map<int, std::size_t> atom_index_;
  std::map<int, std::vector<std::size_t>> edges_from_;
  std::map<std::string, std::size_t> edge_index_;
};

/// Parse a system-spec JSON document. Errors: malformed rational literals,
/// unknown backend, duplicate atom/edge ids, empty edge list.
SystemSpec parse_spec(const std::string& json_text);
SystemSpec parse_spec_file(const std::string& path);

ValidatedSystem validate(const SystemSpec& spec);

/// Exact image of an interval-or-point atom under an affine map, as a
/// pseudo-atom (kind interval or point) with correct endpoint flags.
Atom affine_image(const Atom& source, const Affine& map);

/// Does `inner` lie inside `outer` as a set (endpoint flags respected)?
bool atom_contains_atom(const Atom& outer, const Atom& inner);

std::string atom_to_string(const Atom& a);

}  // namespace cms
