#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cms/rng.hpp"
#include "cms/subshift.hpp"
#include "cms/system.hpp"

namespace cms {

/// One realized path of the random dynamical system. Interval backend fills
/// `states` (states[0] = x0); the subshift backend fills `vertices`. Edge
/// codes index the explicit edge list; tail-family edges are encoded as
/// edges.size() + (n - n0).
struct Trajectory {
  Backend backend = Backend::interval;
  std::vector<double> states;
  std::vector<int> vertices;
  std::vector<long long> edges_taken;
  std::vector<double> log_probs;  // running sums of log p

  std::string edge_name(const ValidatedSystem& sys, long long code) const;
};

/// Weighted sample summary: per-atom histogram, moment accumulators and an
/// optional uniform reservoir of visited states.
struct EmpiricalMeasure {
  std::map<int, long long> histogram;  // atom id -> count
  std::map<int, double> sum_x;         // per-atom sum of states
  std::map<int, double> sum_x2;
  long long total = 0;
  std::vector<double> reservoir;
  long long reservoir_seen = 0;

  double mean() const;
  double second_moment() const;
  double frequency(int atom_id) const;
  void add(int atom_id, double x, std::size_t reservoir_cap, RngStream& rng);
  void merge(const EmpiricalMeasure& other);
};

struct SimOptions {
  double x0 = 0.0;
  long long steps = 0;
  long long burn_in = 0;
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;
  std::size_t reservoir = 4096;
  bool keep_trajectory = true;
};

/// Prepared float-side sampler. Atom resolution follows the exact atoms'
/// endpoint conventions; hits within 1e-14 of a stored boundary point are
/// re-checked in exact rational arithmetic.
class Stepper {
 public:
  explicit Stepper(const ValidatedSystem& sys);

  int atom_of(double x) const;  // atom id; throws if x escapes the space
  /// One transition from x. Returns (edge code, new state, log prob).
  struct Result {
    long long edge_code;
    double x_next;
    double log_p;
  };
  Result step(double x, RngStream& rng) const;

  double min_prob_total() const { return min_total_; }
  double max_prob_total() const { return max_total_; }

  const ValidatedSystem& system() const { return *sys_; }

 private:
  struct FloatEdge {
    double p_slope, p_int, w_slope, w_int;
    std::size_t index;
  };
  struct FloatAtom {
    int id;
    double lo, hi;
    bool lo_closed, hi_closed;
    bool is_point, is_line;
    std::vector<FloatEdge> edges;
    bool has_tail = false;
  };
  const ValidatedSystem* sys_;
  std::vector<FloatAtom> atoms_;
  std::vector<std::pair<double, Rational>> boundary_;  // for the exact re-check
  mutable double min_total_ = 1.0, max_total_ = 1.0;
};

struct RunResult {
  Trajectory trajectory;
  EmpiricalMeasure measure;
};

/// Seeded run: `steps` transitions from x0, recording everything after
/// burn_in. Deterministic under a fixed (seed, stream).
RunResult run(const ValidatedSystem& sys, const SimOptions& opt);

/// Replica-parallel estimation: replica r uses stream opt.stream + r; merged
/// in replica order, so the result is independent of the thread count.
EmpiricalMeasure run_replicas(const ValidatedSystem& sys, const SimOptions& opt, int replicas,
                              int threads = 1);

/// Weak invariance residuals Delta(f) = |mean Uf - mean f| over the reservoir
/// for f in {atom indicators, x, x^2} plus optional user functions evaluated
/// as (name, callback) pairs on reservoir points.
std::map<std::string, double> invariance_residual(
    const ValidatedSystem& sys, const EmpiricalMeasure& measure,
    const std::vector<std::pair<std::string, std::function<double(double)>>>& extra = {});

struct TightnessGridPoint {
  long long n;
  std::map<int, double> alpha;           // occupation over atoms at horizon n
  std::map<double, std::size_t> cover;   // eps -> smallest #atoms covering 1-eps
};

struct TightnessReport {
  std::vector<TightnessGridPoint> grid;
  // interval backend: fraction of post-burn-in states outside [med-W, med+W]
  std::vector<std::pair<double, double>> window_tail;  // (W, tail fraction)
  bool empirically_tight = false;
  bool dtc_certified = false;  // c < infinity certified: tightness holds at every horizon
  std::string note;
};

TightnessReport occupation_tightness(const ValidatedSystem& sys, const SimOptions& opt,
                                     int grid_points = 8);

struct LMomentCheck {
  double l_mean = 0.0;     // empirical integral of distance-to-own-anchor
  double se = 0.0;
  double bound = 0.0;      // b/(1-a)
  bool pass = false;
};

LMomentCheck l_moment_check(const ValidatedSystem& sys, const EmpiricalMeasure& measure);

/// Exact U^n L(x) by edge-tree recursion (finite systems, small n).
Rational exact_un_l(const ValidatedSystem& sys, const Rational& x, int n);

struct UIterateBound {
  int n;
  double estimate, se, bound;
  bool pass;
};

/// Sampled U^n L(x0) against a^n L(x0) + b/(1-a) + 3 SE for n = 1..n_max.
std::vector<UIterateBound> u_iterate_bound_check(const ValidatedSystem& sys, double x0,
                                                 int n_max, int replicas, std::uint64_t seed);

struct CylinderEstimate {
  double mean = 0.0;
  double se = 0.0;
  long long samples = 0;
};

/// Monte Carlo average over reservoir points of the exact cylinder
/// probability of `word`.
CylinderEstimate phi_cylinder_estimate(const ValidatedSystem& sys,
                                       const EmpiricalMeasure& measure,
                                       const std::vector<std::string>& word, long long replicas,
                                       RngStream& rng);

}  // namespace cms
