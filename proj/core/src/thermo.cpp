#include "cms/thermo.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

namespace cms {

EnergyAverage energy_average(const Trajectory& traj) {
  EnergyAverage out;
  out.n = static_cast<long long>(traj.log_probs.size());
  if (out.n == 0) return out;
  out.value = traj.log_probs.back() / static_cast<double>(out.n);
  return out;
}

namespace {

// context key: m consecutive edge codes packed into a string
std::string pack(const std::vector<long long>& edges, std::size_t start, int len) {
  std::string key;
  key.reserve(len * 4);
  for (int k = 0; k < len; ++k) {
    long long e = edges[start + k];
    key.append(reinterpret_cast<const char*>(&e), sizeof(e));
  }
  return key;
}

double conditional_entropy(const std::vector<long long>& edges, std::size_t begin,
                           std::size_t end, int memory, long long* contexts_out) {
  if (end <= begin + static_cast<std::size_t>(memory)) return 0.0;
  std::unordered_map<std::string, std::unordered_map<long long, long long>> table;
  long long total = 0;
  for (std::size_t k = begin + memory; k < end; ++k) {
    std::string ctx = memory == 0 ? std::string() : pack(edges, k - memory, memory);
    table[ctx][edges[k]] += 1;
    ++total;
  }
  double h = 0.0;
  for (const auto& [ctx, nexts] : table) {
    long long ctx_total = 0;
    for (const auto& [_, c] : nexts) ctx_total += c;
    double p_ctx = static_cast<double>(ctx_total) / static_cast<double>(total);
    double h_ctx = 0.0;
    for (const auto& [_, c] : nexts) {
      double p = static_cast<double>(c) / static_cast<double>(ctx_total);
      h_ctx -= p * std::log(p);
    }
    h += p_ctx * h_ctx;
  }
  if (contexts_out) *contexts_out = static_cast<long long>(table.size());
  return h;
}

}  // namespace

BlockEntropy block_entropy(const Trajectory& traj, int memory) {
  if (memory < 0) throw std::invalid_argument("memory must be >= 0");
  BlockEntropy out;
  out.memory = memory;
  const auto& edges = traj.edges_taken;
  out.h = conditional_entropy(edges, 0, edges.size(), memory, &out.contexts);
  // adequacy: enough transitions per observed context on average
  if (out.contexts > 0) {
    double per_ctx = static_cast<double>(edges.size()) / static_cast<double>(out.contexts);
    out.adequate = per_ctx >= 100.0;
  }
  return out;
}

bool entropy_possibly_infinite(const ValidatedSystem& sys) {
  if (!sys.tail) return false;
  const TailFamily& t = *sys.tail;
  // partial sums of -p_n log p_n from the generator; no plateau means the
  // marginal edge entropy keeps growing with the truncation
  auto partial_entropy = [&](long m) {
    double h = 0.0;
    for (long n = t.spec.n0; n <= m; ++n) {
      double p = t.p_n(n);
      if (p > 0) h -= p * std::log(p);
    }
    return h;
  };
  long m = t.spec.truncate_at;
  double gap = partial_entropy(m) - partial_entropy(m / 2);
  return gap > 0.01;
}

FreeEnergyResidual free_energy_residual(const ValidatedSystem& sys, const Trajectory& traj,
                                        int memory) {
  FreeEnergyResidual out;
  out.memory = memory;
  BlockEntropy be = block_entropy(traj, memory);
  EnergyAverage ea = energy_average(traj);
  out.h = be.h;
  out.u_avg = ea.value;
  out.rho = be.h + ea.value;
  out.entropy_possibly_infinite = entropy_possibly_infinite(sys);

  // block split for the standard error
  const int blocks = 16;
  std::size_t n = traj.edges_taken.size();
  if (n >= static_cast<std::size_t>(blocks * (memory + 2))) {
    std::vector<double> rhos;
    std::size_t len = n / blocks;
    for (int b = 0; b < blocks; ++b) {
      std::size_t lo = b * len, hi = (b + 1) * len;
      double h = conditional_entropy(traj.edges_taken, lo, hi, memory, nullptr);
      double u0 = lo == 0 ? 0.0 : traj.log_probs[lo - 1];
      double u = (traj.log_probs[hi - 1] - u0) / static_cast<double>(hi - lo);
      rhos.push_back(h + u);
    }
    double m = 0.0;
    for (double r : rhos) m += r;
    m /= rhos.size();
    double var = 0.0;
    for (double r : rhos) var += (r - m) * (r - m);
    var /= rhos.size();
    out.se = std::sqrt(var / rhos.size());
  }
  return out;
}

std::map<int, Rational> markov_stationary_oracle(const SubshiftSystem& sub) {
  if (sub.memory != 1)
    throw std::invalid_argument("the stationary oracle is defined at memory 1");
  std::vector<int> vs = sub.vertices;
  std::size_t n = vs.size();
  auto index_of = [&](int v) {
    return static_cast<std::size_t>(std::find(vs.begin(), vs.end(), v) - vs.begin());
  };

  // vertex transition matrix P[i][j] = sum of g(e) over edges i -> j
  std::vector<std::vector<Rational>> P(n, std::vector<Rational>(n, Rational(0)));
  for (const auto& e : sub.edges) {
    auto it = sub.g.find({e.id});
    if (it != sub.g.end()) P[index_of(e.from)][index_of(e.to)] += it->second;
  }

  // reducibility: strongly connected on positive transitions?
  auto reachable = [&](std::size_t from, bool forward) {
    std::vector<bool> seen(n, false);
    std::vector<std::size_t> stack{from};
    seen[from] = true;
    while (!stack.empty()) {
      std::size_t v = stack.back();
      stack.pop_back();
      for (std::size_t w = 0; w < n; ++w) {
        Rational p = forward ? P[v][w] : P[w][v];
        if (!p.is_zero() && !seen[w]) {
          seen[w] = true;
          stack.push_back(w);
        }
      }
    }
    return seen;
  };
  auto fwd = reachable(0, true);
  auto bwd = reachable(0, false);
  bool irreducible = true;
  for (std::size_t v = 0; v < n; ++v) irreducible = irreducible && fwd[v] && bwd[v];
  if (!irreducible) {
    // name the closed classes: forward closures that cannot be left
    std::string classes;
    std::vector<std::vector<bool>> closures;
    for (std::size_t v = 0; v < n; ++v) {
      auto r = reachable(v, true);
      bool closed = true;
      for (std::size_t w = 0; w < n; ++w) {
        if (!r[w]) continue;
        auto rw = reachable(w, true);
        for (std::size_t u = 0; u < n; ++u)
          if (rw[u] && !r[u]) closed = false;
      }
      if (!closed) continue;
      if (std::find(closures.begin(), closures.end(), r) != closures.end()) continue;
      closures.push_back(r);
      classes += " {";
      bool first = true;
      for (std::size_t w = 0; w < n; ++w)
        if (r[w]) {
          classes += (first ? "" : ",") + std::to_string(vs[w]);
          first = false;
        }
      classes += "}";
    }
    throw ReducibleChainError("reducible chain; closed classes:" + classes);
  }

  // solve pi P = pi with sum pi = 1: rows of (P^T - I), last row replaced by ones
  std::vector<std::vector<Rational>> M(n, std::vector<Rational>(n + 1, Rational(0)));
  for (std::size_t i = 0; i + 1 < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) M[i][j] = P[j][i] - (i == j ? Rational(1) : Rational(0));
  }
  for (std::size_t j = 0; j < n; ++j) M[n - 1][j] = Rational(1);
  M[n - 1][n] = Rational(1);

  // exact Gaussian elimination
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t pivot = col;
    while (pivot < n && M[pivot][col].is_zero()) ++pivot;
    if (pivot == n) throw std::runtime_error("singular stationary system");
    std::swap(M[col], M[pivot]);
    for (std::size_t r = 0; r < n; ++r) {
      if (r == col || M[r][col].is_zero()) continue;
      Rational factor = M[r][col] / M[col][col];
      for (std::size_t c = col; c <= n; ++c) M[r][c] -= factor * M[col][c];
    }
  }
  std::map<int, Rational> pi;
  for (std::size_t v = 0; v < n; ++v) pi[vs[v]] = M[v][n] / M[v][v];
  return pi;
}

}  // namespace cms
