#include "cms/coding.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

#include "cms/analysis.hpp"

namespace cms {

namespace {

const Edge& edge_or_throw(const ValidatedSystem& sys, const std::string& id) {
  const Edge* e = sys.edge_by_id(id);
  if (!e) throw std::invalid_argument("unknown edge '" + id + "'");
  return *e;
}

Affine compose(const Affine& outer, const Affine& inner) {
  // (outer o inner)(x)
  return Affine{outer.slope * inner.slope, outer.slope * inner.intercept + outer.intercept};
}

void require_interval(const ValidatedSystem& sys) {
  if (sys.backend != Backend::interval)
    throw std::logic_error("coding operations require the interval backend");
  if (sys.tail)
    throw std::logic_error("coding operations require a finite edge set");
}

}  // namespace

std::optional<std::size_t> SymbolWord::first_broken_junction(const ValidatedSystem& sys) const {
  for (std::size_t k = 0; k + 1 < symbols.size(); ++k) {
    const Edge& a = edge_or_throw(sys, symbols[k]);
    const Edge& b = edge_or_throw(sys, symbols[k + 1]);
    if (a.target != b.source) return k;
  }
  if (!symbols.empty()) edge_or_throw(sys, symbols.back());
  return std::nullopt;
}

std::string SymbolWord::str() const {
  std::ostringstream os;
  for (std::size_t k = 0; k < symbols.size(); ++k) os << (k ? "," : "") << symbols[k];
  return os.str();
}

const std::string& EventuallyPeriodicWord::backward_symbol(std::size_t t) const {
  if (t < prefix.size()) return prefix.symbols[prefix.size() - 1 - t];
  std::size_t s = (t - prefix.size()) % period.size();
  return period.symbols[period.size() - 1 - s];
}

bool EventuallyPeriodicWord::is_valid_path(const ValidatedSystem& sys) const {
  if (period.empty()) return false;
  if (!period.is_valid_path(sys)) return false;
  const Edge& last = edge_or_throw(sys, period.symbols.back());
  const Edge& first = edge_or_throw(sys, period.symbols.front());
  if (last.target != first.source) return false;  // period must close up
  if (!prefix.empty()) {
    if (!prefix.is_valid_path(sys)) return false;
    const Edge& pfirst = edge_or_throw(sys, prefix.symbols.front());
    if (last.target != pfirst.source) return false;
  }
  return true;
}

std::string EventuallyPeriodicWord::str() const {
  return "(" + period.str() + ")^inf " + prefix.str();
}

Rational eval_X(const ValidatedSystem& sys, const SymbolWord& word) {
  require_interval(sys);
  if (word.empty()) throw std::invalid_argument("cannot evaluate the empty word");
  if (auto broken = word.first_broken_junction(sys)) {
    throw std::invalid_argument("invalid path: junction " + word.symbols[*broken] + " -> " +
                                word.symbols[*broken + 1] + " at position " +
                                std::to_string(*broken));
  }
  const Edge& oldest = edge_or_throw(sys, word.symbols.front());
  Rational x = sys.anchors.at(oldest.source);
  for (const auto& id : word.symbols) x = edge_or_throw(sys, id).map(x);
  return x;
}

Rational coding_map_exact(const ValidatedSystem& sys, const EventuallyPeriodicWord& word) {
  require_interval(sys);
  if (word.period.empty()) throw std::invalid_argument("period must be non-empty");
  if (!word.is_valid_path(sys)) throw std::invalid_argument("word is not a valid path");

  Affine composite{Rational(1), Rational(0)};
  for (const auto& id : word.period.symbols)
    composite = compose(edge_or_throw(sys, id).map, composite);
  if (composite.slope.abs() >= Rational(1))
    throw std::domain_error("period not contracting; use coding_map_truncated");

  // unique fixed point of the period composite
  Rational fp = composite.intercept / (Rational(1) - composite.slope);
  for (const auto& id : word.prefix.symbols) fp = edge_or_throw(sys, id).map(fp);
  return fp;
}

TruncatedCoding coding_map_truncated(const ValidatedSystem& sys,
                                     const std::function<std::string(std::size_t)>& backward,
                                     int depth) {
  require_interval(sys);
  if (depth < 0) throw std::invalid_argument("depth must be >= 0");

  auto cert = contraction_certificate(sys);
  if (!cert.contractive)
    throw std::domain_error("truncated coding requires a contraction certificate a < 1");
  double a = cert.a.value();
  double b = coupling_constant_b(sys).value();

  SymbolWord w;
  w.symbols.resize(depth + 1);
  for (int t = 0; t <= depth; ++t) w.symbols[depth - t] = backward(t);

  TruncatedCoding out;
  out.depth = depth;
  out.estimate = eval_X(sys, w);
  double c1 = 2.0 * b / (1.0 - a);
  out.error_bound =
      2.0 * c1 * std::pow(a, (static_cast<double>(depth) + 1.0) / 2.0) / (1.0 - std::sqrt(a));
  return out;
}

Rational cylinder_prob(const ValidatedSystem& sys, const Rational& x, const SymbolWord& word) {
  require_interval(sys);
  Rational p(1);
  Rational state = x;
  for (const auto& id : word.symbols) {
    const Edge& e = edge_or_throw(sys, id);
    if (!sys.atom(e.source).contains(state)) return Rational(0);
    Rational pe = e.prob(state);
    if (pe.is_zero()) return Rational(0);
    p *= pe;
    state = e.map(state);
  }
  return p;
}

double WordMetric::value() const { return std::ldexp(1.0, -k); }

WordMetric word_metric(const EventuallyPeriodicWord& w1, const EventuallyPeriodicWord& w2) {
  WordMetric m;
  constexpr std::size_t kCap = 64;
  std::size_t agree = 0;
  while (agree < kCap && w1.backward_symbol(agree) == w2.backward_symbol(agree)) ++agree;
  if (agree < kCap) {
    m.k = static_cast<int>(agree);
    return m;
  }
  // no disagreement within the cap: decide structural equality by unrolling
  // both past the prefixes over one common period
  std::size_t horizon = std::max(w1.prefix.size(), w2.prefix.size()) +
                        std::lcm(w1.period.size(), w2.period.size()) + kCap;
  bool equal = true;
  for (std::size_t t = kCap; t < horizon; ++t)
    if (w1.backward_symbol(t) != w2.backward_symbol(t)) {
      equal = false;
      break;
    }
  if (equal) {
    m.exact_zero = true;
    m.k = static_cast<int>(kCap);
  } else {
    m.k = static_cast<int>(kCap);
    m.is_upper_bound = true;
  }
  return m;
}

HolderReport holder_check(
    const ValidatedSystem& sys,
    const std::vector<std::pair<EventuallyPeriodicWord, EventuallyPeriodicWord>>& pairs) {
  require_interval(sys);
  HolderReport rep;
  double a = contraction_certificate(sys).a.value();
  double b = coupling_constant_b(sys).value();
  rep.constant = 8.0 * b / ((1.0 - std::sqrt(a)) * (1.0 - a));
  rep.exponent = std::log(std::sqrt(a)) / std::log(0.5);

  for (const auto& [w1, w2] : pairs) {
    HolderPair hp;
    hp.f1 = coding_map_exact(sys, w1);
    hp.f2 = coding_map_exact(sys, w2);
    hp.distance = (hp.f1 - hp.f2).abs();
    hp.metric = word_metric(w1, w2);
    if (hp.metric.exact_zero) {
      hp.violated = !hp.distance.is_zero();
    } else {
      double bound = rep.constant * std::pow(hp.metric.value(), rep.exponent);
      hp.violated = hp.distance.to_double() > bound * (1.0 + 1e-12);
    }
    if (hp.violated) ++rep.violations;
    rep.pairs.push_back(std::move(hp));
  }
  return rep;
}

}  // namespace cms
