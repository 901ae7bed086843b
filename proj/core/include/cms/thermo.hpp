#pragma once

#include <map>
#include <string>
#include <vector>

#include "cms/simulate.hpp"
#include "cms/system.hpp"

namespace cms {

/// Birkhoff average of the energy u = log p along a realized trajectory.
struct EnergyAverage {
  double value = 0.0;  // nats, always <= 0
  long long n = 0;
};

EnergyAverage energy_average(const Trajectory& traj);

/// Empirical conditional entropy of the next edge given the previous m edges.
struct BlockEntropy {
  int memory = 0;
  double h = 0.0;  // nats
  long long contexts = 0;
  bool adequate = true;  // frequency-table adequacy heuristic
};

BlockEntropy block_entropy(const Trajectory& traj, int memory);

struct FreeEnergyResidual {
  int memory = 0;
  double h = 0.0;
  double u_avg = 0.0;
  double rho = 0.0;  // h + u_avg, -> 0^- for equilibrium samples
  double se = 0.0;
  bool entropy_possibly_infinite = false;
};

/// rho_m = H_m + mean log p. The standard error comes from a block split of
/// the trajectory. When the system carries a truncated countable family whose
/// marginal edge entropy keeps growing with the truncation, the residual test
/// is flagged inapplicable instead of asserted.
FreeEnergyResidual free_energy_residual(const ValidatedSystem& sys, const Trajectory& traj,
                                        int memory);

/// Marginal edge entropy of a truncated countable family has no plateau when
/// the underlying entropy diverges.
bool entropy_possibly_infinite(const ValidatedSystem& sys);

/// Exact stationary distribution of the vertex chain of a memory-1 g-system,
/// by rational linear solve of pi P = pi, sum pi = 1.
std::map<int, Rational> markov_stationary_oracle(const SubshiftSystem& sub);

/// Thrown by the oracle when the transition structure is reducible; the
/// message lists the closed classes.
struct ReducibleChainError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace cms
