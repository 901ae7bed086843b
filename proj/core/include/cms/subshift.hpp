#pragma once

#include <string>
#include <vector>

#include "cms/rng.hpp"
#include "cms/system.hpp"

namespace cms {

/// Bounded-memory representation of a left-infinite past: the last
/// `memory` edges plus the current terminal vertex. Lossless for the
/// dynamics because the g-function has finite memory.
struct ShiftState {
  std::vector<std::string> context;  // oldest first, length = memory
  int vertex = 0;

  std::string str() const;
};

/// Deterministic initial state: the given context word, or the
/// lexicographically smallest admissible length-memory word.
ShiftState subshift_initial_state(const ValidatedSystem& sys,
                                  const std::vector<std::string>& context = {});

struct SubshiftStep {
  const SubshiftEdge* edge;
  ShiftState state;
  double log_p;
};

/// Sample one symbol: edge e with i(e) = vertex, with probability
/// g(context . e); the new context drops its oldest symbol.
SubshiftStep subshift_step(const ValidatedSystem& sys, const ShiftState& state, RngStream& rng);

/// d(s, s') = 2^k with k the smallest integer such that the words agree for
/// k < i <= 0. Bounded contexts report an upper bound when they agree fully.
struct ContextMetric {
  int k = 0;
  bool is_upper_bound = false;
  double value() const;
  Rational exact() const;
};

ContextMetric subshift_metric(const std::vector<std::string>& w1,
                              const std::vector<std::string>& w2);

}  // namespace cms
