#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "cms/system.hpp"

namespace cms {

/// Finite edge word in backward time: symbols[0] is the oldest symbol, the
/// last entry is the time-0 symbol. Invalid junctions are representable (the
/// cylinder measure of an invalid word is 0); evaluation rejects them.
struct SymbolWord {
  std::vector<std::string> symbols;

  bool empty() const { return symbols.empty(); }
  std::size_t size() const { return symbols.size(); }
  /// Index of the first broken junction (between k and k+1), if any.
  std::optional<std::size_t> first_broken_junction(const ValidatedSystem& sys) const;
  bool is_valid_path(const ValidatedSystem& sys) const {
    return !first_broken_junction(sys).has_value();
  }
  std::string str() const;
};

/// Infinitely repeated period followed (in time) by a finite prefix:
/// ... P P P prefix. The period must be non-empty.
struct EventuallyPeriodicWord {
  SymbolWord prefix;
  SymbolWord period;

  /// Symbol t steps back from time 0 (t = 0 is the newest symbol).
  const std::string& backward_symbol(std::size_t t) const;
  bool is_valid_path(const ValidatedSystem& sys) const;
  std::string str() const;
};

/// X_m: exact composition w_{s_0} o ... o w_{s_m} applied to the anchor of
/// the oldest symbol's source atom.
Rational eval_X(const ValidatedSystem& sys, const SymbolWord& word);

/// Exact coding-map value on an eventually periodic word: the fixed point of
/// the period composite, pushed through the prefix composition.
Rational coding_map_exact(const ValidatedSystem& sys, const EventuallyPeriodicWord& word);

struct TruncatedCoding {
  Rational estimate;
  double error_bound = 0.0;  // conditional on membership in the good sets
  int depth = 0;
};

/// Truncated evaluation. The callback yields symbols backward from time 0;
/// depth m consumes m+1 symbols. The bound is 2*C1*a^((m+1)/2)/(1-sqrt(a))
/// with C1 = 2b/(1-a).
TruncatedCoding coding_map_truncated(const ValidatedSystem& sys,
                                     const std::function<std::string(std::size_t)>& backward,
                                     int depth);

/// Exact cylinder probability P_x(word) = p_{e_m}(x) p_{e_{m+1}}(w_{e_m} x) ...
/// Zero if the word is not a path or x lies outside the first source atom.
Rational cylinder_prob(const ValidatedSystem& sys, const Rational& x, const SymbolWord& word);

/// d'(s, s') = 2^-k with k the number of agreeing trailing symbols, unrolled
/// to the first disagreement and capped at 64 symbols.
struct WordMetric {
  bool exact_zero = false;   // words are the same sequence
  int k = 0;                 // d' = 2^-k
  bool is_upper_bound = false;  // disagreement not found within the cap
  double value() const;
  Rational exact() const { return dyadic_pow2(k); }
};

WordMetric word_metric(const EventuallyPeriodicWord& w1, const EventuallyPeriodicWord& w2);

struct HolderPair {
  Rational f1, f2, distance;  // exact coding values and |f1 - f2|
  WordMetric metric;
  bool violated = false;
};

struct HolderReport {
  double constant = 0.0;  // 8b / ((1-sqrt a)(1-a))
  double exponent = 0.0;  // log sqrt(a) / log(1/2)
  std::vector<HolderPair> pairs;
  int violations = 0;
};

HolderReport holder_check(
    const ValidatedSystem& sys,
    const std::vector<std::pair<EventuallyPeriodicWord, EventuallyPeriodicWord>>& pairs);

}  // namespace cms
