#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "cms/system.hpp"

namespace cms {

/// A certificate value. For finite systems it is exact; with a truncated tail
/// family the value picks up a floating contribution whose truncation-bound
/// part is recorded in `eps` so reports can annotate it.
struct CertValue {
  Rational exact;
  bool is_exact = true;
  double approx = 0.0;  // equals exact.to_double() when is_exact
  double eps = 0.0;     // truncation-bound portion already included in approx

  static CertValue of(Rational r) {
    CertValue v;
    v.exact = r;
    v.approx = r.to_double();
    return v;
  }
  double value() const { return is_exact ? exact.to_double() : approx; }
  std::string str() const;
};

/// Finitely supported non-negative rational function on the boundary set.
struct BoundaryFn {
  std::map<Rational, Rational> values;  // absent points evaluate to 0

  Rational at(const Rational& x) const {
    auto it = values.find(x);
    return it == values.end() ? Rational(0) : it->second;
  }
  bool is_zero() const;
  bool operator==(const BoundaryFn& o) const { return values == o.values; }
  std::string str() const;
};

/// Finitely supported sub-probability kernel rooted at a boundary point.
struct BoundaryKernel {
  Rational base;
  std::map<Rational, Rational> masses;
  Rational total() const;
  std::string str() const;
};

struct ContractionCertificate {
  CertValue a;
  bool contractive = false;
};

struct DominatingChain {
  std::map<int, CertValue> xi;
  std::map<std::pair<int, int>, Rational> q;  // exact part only
  CertValue c;
  bool c_finite = true;
  bool xi_finite = true;
};

struct BoundaryPoint {
  Rational point;
  std::vector<int> atoms;  // atoms whose closure-minus-atom contains the point
};

struct OmegaResult {
  bool decided = false;
  std::vector<Rational> omega;       // meaningful when decided
  std::vector<BoundaryFn> iterates;  // R1, R^2 1, ... as computed
  int iterations = 0;
  std::string note;
};

struct CscWitness {
  Rational z;       // point of Omega
  Rational y;       // image point where domination fails
  Rational r_mass;  // R-kernel mass at y
  Rational u_mass;  // U-kernel mass at y
};

struct CscResult {
  bool pass = false;
  std::optional<CscWitness> witness;
  // kernel pairs per Omega point, for reports and audits
  std::vector<std::pair<BoundaryKernel, BoundaryKernel>> kernels;  // (R, U)
};

struct UcctResult {
  bool holds = false;
  std::string reason;
};

struct SubsystemRecord {
  std::set<int> atoms;
  bool closed_in_k = false;
  bool from_single_closure = false;  // graph closure of a single atom
  bool minimal_closed = false;       // subset-minimal among closed-in-K candidates
};

enum class DegeneracyTag { non_degenerate, degenerate, undecided };
enum class ConsistencyTag { consistent, inconsistent_candidate, undecided };
enum class ExistenceTag { guaranteed, not_established };

struct DegeneracyVerdict {
  DegeneracyTag tag = DegeneracyTag::undecided;
  std::string rule;     // which rule produced the verdict
  std::string witness;  // for the degenerate case
};

struct ConsistencyVerdict {
  ConsistencyTag tag = ConsistencyTag::undecided;
  std::string rule;  // omega-empty | csc-holds | ucct-rule
  std::optional<CscWitness> witness;
};

struct ExistenceVerdict {
  ExistenceTag tag = ExistenceTag::not_established;
  std::string rule;  // eimc-i | usdmc | sndct
  std::vector<std::string> hypotheses;  // every hypothesis that was checked
  std::optional<std::set<int>> subsystem;  // for the sndct route
};

struct AnalysisReport {
  ContractionCertificate contraction;
  CertValue b;
  std::map<int, Rational> anchors_used;
  DominatingChain chain;
  std::vector<BoundaryPoint> boundary;
  OmegaResult omega;
  std::optional<CscResult> csc;
  UcctResult ucct;
  std::vector<SubsystemRecord> subsystems;
  DegeneracyVerdict degeneracy;
  ConsistencyVerdict consistency;
  ExistenceVerdict existence;
  int n_max_used = 0;
  double eps_tail = 0.0;  // truncation error annotation, 0 for finite systems

  std::string to_text() const;
  std::string to_json_string() const;
};

/// a = max_j sup_{K_j} sum_{i(e)=j} p_e(x)|w_e'|; exact endpoint evaluation
/// for affine data. Subshift systems return a = 1/2 by the metric construction.
ContractionCertificate contraction_certificate(const ValidatedSystem& sys);

/// b = sup_i sup_{K_i} sum_{i(e)=i} p_e(x) d(w_e(x_i), x_{t(e)}).
CertValue coupling_constant_b(const ValidatedSystem& sys);

DominatingChain dominating_chain(const ValidatedSystem& sys);

/// The exact finite set of points in closure(K_j) \ K_j for at least one j.
std::vector<BoundaryPoint> boundary_set(const ValidatedSystem& sys);

BoundaryFn r_one(const ValidatedSystem& sys);                        // R applied to the constant 1
BoundaryFn r_apply(const ValidatedSystem& sys, const BoundaryFn& f); // Rf

/// Decide Omega = intersection_n {R^n 1 >= 1} by exact iteration with cycle
/// detection, capped at n_max. Returns the iterate trace.
OmegaResult omega_set(const ValidatedSystem& sys, int n_max);

int default_n_max(const ValidatedSystem& sys);  // 2|B| + 8

/// Pointwise kernel domination R <= U at every point of Omega. Sufficient for
/// the functional inequality on all bounded non-negative f. Requires omega
/// decided; throws std::runtime_error otherwise.
CscResult csc_check(const ValidatedSystem& sys, const OmegaResult& omega);

/// Kernels at a boundary point, exposed for audits.
BoundaryKernel r_kernel_at(const ValidatedSystem& sys, const Rational& z);
BoundaryKernel u_kernel_at(const ValidatedSystem& sys, const Rational& z);

/// Global-continuity rule: every edge grouped, groups carry identical affine
/// pairs, group probabilities form a partition of unity on the whole space,
/// and the dominating-chain sums are finite.
UcctResult ucct_rule(const ValidatedSystem& sys);

std::vector<SubsystemRecord> closed_subsystems(const ValidatedSystem& sys);

/// Restriction of the system to a forward-closed atom set.
ValidatedSystem make_subsystem(const ValidatedSystem& sys, const std::set<int>& atoms);

AnalysisReport classify(const ValidatedSystem& sys, int n_max = 0);

}  // namespace cms
