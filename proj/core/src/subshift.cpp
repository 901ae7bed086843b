#include "cms/subshift.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace cms {

std::string ShiftState::str() const {
  std::ostringstream os;
  for (std::size_t k = 0; k < context.size(); ++k) os << (k ? "," : "") << context[k];
  os << " @" << vertex;
  return os.str();
}

namespace {

const SubshiftSystem& sub_of(const ValidatedSystem& sys) {
  if (sys.backend != Backend::subshift || !sys.shift)
    throw std::logic_error("operation requires the subshift backend");
  return *sys.shift;
}

}  // namespace

ShiftState subshift_initial_state(const ValidatedSystem& sys,
                                  const std::vector<std::string>& context) {
  const SubshiftSystem& sub = sub_of(sys);
  ShiftState st;
  if (!context.empty()) {
    if (static_cast<int>(context.size()) != sub.memory)
      throw std::invalid_argument("initial context must have length " +
                                  std::to_string(sub.memory));
    for (const auto& id : context)
      if (!sub.edge_by_id(id))
        throw std::invalid_argument("initial context references unknown edge '" + id + "'");
    for (std::size_t k = 0; k + 1 < context.size(); ++k) {
      const SubshiftEdge* a = sub.edge_by_id(context[k]);
      const SubshiftEdge* b = sub.edge_by_id(context[k + 1]);
      if (a->to != b->from)
        throw std::invalid_argument("initial context is not an admissible word");
    }
    st.context = context;
    st.vertex = sub.edge_by_id(context.back())->to;
    return st;
  }
  // smallest admissible word in the g table (the table is validated complete)
  st.context = sub.g.begin()->first;
  st.vertex = sub.edge_by_id(st.context.back())->to;
  return st;
}

SubshiftStep subshift_step(const ValidatedSystem& sys, const ShiftState& state, RngStream& rng) {
  const SubshiftSystem& sub = sub_of(sys);
  auto outgoing = sub.edges_from(state.vertex);
  if (outgoing.empty())
    throw std::logic_error("dead-end vertex " + std::to_string(state.vertex));

  // g key: the last (memory-1) context symbols followed by the candidate edge
  std::vector<std::string> key(state.context.end() - (sub.memory - 1), state.context.end());
  key.push_back("");

  double u = rng.next_double();
  double acc = 0.0;
  const SubshiftEdge* chosen = nullptr;
  double chosen_p = 0.0;
  for (const SubshiftEdge* e : outgoing) {
    key.back() = e->id;
    double p = sub.g.at(key).to_double();
    acc += p;
    if (!chosen && u < acc) {
      chosen = e;
      chosen_p = p;
    }
  }
  if (!chosen) {  // float round-off at the top end
    chosen = outgoing.back();
    key.back() = chosen->id;
    chosen_p = sub.g.at(key).to_double();
  }

  SubshiftStep out;
  out.edge = chosen;
  out.state.context.assign(state.context.begin() + 1, state.context.end());
  out.state.context.push_back(chosen->id);
  out.state.vertex = chosen->to;
  out.log_p = std::log(chosen_p);
  return out;
}

double ContextMetric::value() const { return std::ldexp(1.0, k); }

Rational ContextMetric::exact() const {
  if (k <= 0) return dyadic_pow2(-k);
  Rational r(1);
  for (int i = 0; i < k; ++i) r *= Rational(2);
  return r;
}

ContextMetric subshift_metric(const std::vector<std::string>& w1,
                              const std::vector<std::string>& w2) {
  ContextMetric m;
  std::size_t n = std::min(w1.size(), w2.size());
  std::size_t agree = 0;
  while (agree < n && w1[w1.size() - 1 - agree] == w2[w2.size() - 1 - agree]) ++agree;
  m.k = -static_cast<int>(agree);
  m.is_upper_bound = (agree == n);  // ran out of recorded symbols
  return m;
}

}  // namespace cms
