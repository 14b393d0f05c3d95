#pragma once

#include <map>
#include <optional>
#include <utility>
#include <vector>

#include "countsyn/common.hpp"
#include "countsyn/graph.hpp"

namespace countsyn {

/// Histogram over graph nodes: w_q = number of subsystems at q.
struct AggregateState {
  Vec w;

  double total() const {
    double n = 0;
    for (double v : w) n += v;
    return n;
  }

  bool operator==(const AggregateState& o) const { return w == o.w; }
};

/// Aggregate input: r indexed flat by (node, mode), r[q * n_modes + mu].
struct AggregateInput {
  Vec r;
};

/// Weights placed on the entries of a cycle.
struct Assignment {
  Cycle cycle;
  Vec alpha;

  double weight() const {
    double n = 0;
    for (double v : alpha) n += v;
    return n;
  }
};

constexpr double kAggregateTol = 1e-9;

/// One step of w(s+1) = B r(s). Checks Eq.-11 admissibility: r >= 0, the mode
/// split at each node sums to w_q, and no mass rides a missing edge.
inline AggregateState step(const AggregateState& w, const AggregateInput& r,
                           const LabeledDigraph& g) {
  const int n = g.n_nodes;
  const int m = g.n_modes;
  if (static_cast<int>(w.w.size()) != n || static_cast<int>(r.r.size()) != n * m)
    throw std::invalid_argument("step: dimension mismatch");
  for (int q = 0; q < n; ++q) {
    double sum = 0;
    for (int mu = 0; mu < m; ++mu) {
      double v = r.r[q * m + mu];
      if (v < -kAggregateTol)
        throw std::invalid_argument("step: negative aggregate input");
      if (v > kAggregateTol && g.succ(q, mu) < 0)
        throw std::invalid_argument("step: input mass on a missing (node, mode) action");
      sum += v;
    }
    if (std::abs(sum - w.w[q]) > kAggregateTol * std::max(1.0, std::abs(w.w[q])))
      throw std::invalid_argument("step: mode split does not sum to w at node " +
                                  std::to_string(q));
  }
  AggregateState next;
  next.w.assign(n, 0.0);
  for (int q = 0; q < n; ++q)
    for (auto [mu, dst] : g.out[q]) next.w[dst] += r.r[q * m + mu];
  return next;
}

/// s-step circulation: alpha^{(s)}(i) = alpha((i - s) mod |C|).
inline Vec circulate(const Vec& alpha, long s) {
  const long n = static_cast<long>(alpha.size());
  Vec out(n);
  for (long i = 0; i < n; ++i) out[i] = alpha[((i - s) % n + n) % n];
  return out;
}

/// X-count at time s: sum of circulated weights on X-member cycle positions.
inline double x_count(const Cycle& c, const Vec& alpha, long s, const DiscreteCountingSet& x) {
  const long n = c.size();
  double acc = 0;
  for (long i = 0; i < n; ++i)
    if (x.contains(c.state(i), c.mode(i))) acc += alpha[((i - s) % n + n) % n];
  return acc;
}

/// Circulant 0/1 matrix B_C^X: row 0 marks the X-positions of C; row k is row
/// 0 rotated so that (B alpha)_k equals the X-count at time k.
inline std::vector<std::vector<double>> circulant_matrix(const Cycle& c,
                                                         const DiscreteCountingSet& x) {
  const int n = c.size();
  std::vector<char> member(n);
  for (int i = 0; i < n; ++i) member[i] = x.contains(c.state(i), c.mode(i)) ? 1 : 0;
  std::vector<std::vector<double>> b(n, std::vector<double>(n, 0.0));
  for (int k = 0; k < n; ++k)
    for (int i = 0; i < n; ++i)
      if (member[(i + k) % n]) b[k][i] = 1.0;
  return b;
}

/// maxcnt^X(C, alpha) = || B_C^X alpha ||_inf.
inline double maxcnt(const Cycle& c, const Vec& alpha, const DiscreteCountingSet& x) {
  auto b = circulant_matrix(c, x);
  double best = 0;
  for (const auto& row : b) {
    double acc = 0;
    for (int i = 0; i < c.size(); ++i) acc += row[i] * alpha[i];
    best = std::max(best, acc);
  }
  return best;
}

inline long long lcm_of_lengths(const std::vector<const Cycle*>& cycles, long long cap) {
  long long l = 1;
  for (const auto* c : cycles) {
    long long len = c->size();
    l = l / llgcd(l, len) * len;
    if (l > cap)
      throw LcmCapExceeded(
          "joint count: lcm of cycle lengths exceeds the row cap (" + std::to_string(cap) +
          "); use the conservative length-grouped bound");
  }
  return l;
}

/// Joint maximal X-count over synchronously circulated assignments, Eq. 14:
/// max over s in [lcm] of the summed per-cycle counts.
inline double joint_maxcnt(const std::vector<Assignment>& assignments,
                           const DiscreteCountingSet& x, long long row_cap = 100000) {
  if (assignments.empty()) return 0;
  std::vector<const Cycle*> cycles;
  for (const auto& a : assignments) cycles.push_back(&a.cycle);
  long long K = lcm_of_lengths(cycles, row_cap);

  // per-cycle count vectors; row s of the Kronecker stack is counts[j][s mod |C_j|]
  std::vector<Vec> counts;
  for (const auto& a : assignments) {
    Vec cj(a.cycle.size());
    for (int s = 0; s < a.cycle.size(); ++s) cj[s] = x_count(a.cycle, a.alpha, s, x);
    counts.push_back(std::move(cj));
  }
  double best = 0;
  for (long long s = 0; s < K; ++s) {
    double acc = 0;
    for (std::size_t j = 0; j < counts.size(); ++j)
      acc += counts[j][s % counts[j].size()];
    best = std::max(best, acc);
  }
  return best;
}

/// Partition of cycle indices into groups whose lengths are pairwise co-prime
/// across groups (Eq. 16): connected components of the shared-prime-factor
/// relation, the finest exact split. Groups are ordered by smallest member.
inline std::vector<std::vector<int>> coprime_partition(const std::vector<Assignment>& assignments) {
  const int n = static_cast<int>(assignments.size());
  std::vector<int> parent(n);
  for (int i = 0; i < n; ++i) parent[i] = i;
  std::function<int(int)> find = [&](int v) {
    while (parent[v] != v) v = parent[v] = parent[parent[v]];
    return v;
  };
  auto unite = [&](int a, int b) { parent[find(a)] = find(b); };

  std::map<long long, int> prime_owner;
  for (int j = 0; j < n; ++j) {
    long long len = assignments[j].cycle.size();
    for (long long p = 2; p * p <= len; ++p) {
      if (len % p) continue;
      while (len % p == 0) len /= p;
      auto [it, fresh] = prime_owner.emplace(p, j);
      if (!fresh) unite(j, it->second);
    }
    if (len > 1) {
      auto [it, fresh] = prime_owner.emplace(len, j);
      if (!fresh) unite(j, it->second);
    }
  }

  std::map<int, std::vector<int>> by_root;
  for (int j = 0; j < n; ++j) by_root[find(j)].push_back(j);
  std::vector<std::vector<int>> groups;
  for (auto& [root, members] : by_root) {
    std::sort(members.begin(), members.end());
    groups.push_back(std::move(members));
  }
  std::sort(groups.begin(), groups.end(),
            [](const auto& a, const auto& b) { return a.front() < b.front(); });
  return groups;
}

/// Suffix rows needed when the joint count is split over `groups`:
/// sum of the per-group lcms (the 232,792,560 -> 5,100 reduction of Sec. V-D).
inline long long partitioned_row_count(const std::vector<Assignment>& assignments,
                                       const std::vector<std::vector<int>>& groups,
                                       long long cap = (1LL << 62)) {
  long long total = 0;
  for (const auto& g : groups) {
    std::vector<const Cycle*> cycles;
    for (int j : g) cycles.push_back(&assignments[j].cycle);
    total += lcm_of_lengths(cycles, cap);
  }
  return total;
}

/// Remark-3 conservative bound: group cycles by exact length and sum the
/// per-length joint counts. Always >= joint_maxcnt.
inline double conservative_joint(const std::vector<Assignment>& assignments,
                                 const DiscreteCountingSet& x) {
  std::map<int, std::vector<Assignment>> by_len;
  for (const auto& a : assignments) by_len[a.cycle.size()].push_back(a);
  double total = 0;
  for (auto& [len, group] : by_len) total += joint_maxcnt(group, x, len);
  return total;
}

/// P-average assignment: constant N_p / (|C|/P) on each residue class mod P.
inline Assignment average_assignment(const Cycle& c, int P, const Vec& totals) {
  if (P < 1 || c.size() % P != 0)
    throw std::invalid_argument("average_assignment: P must divide |C|");
  if (static_cast<int>(totals.size()) != P)
    throw std::invalid_argument("average_assignment: need one total per class");
  for (double t : totals)
    if (t < 0) throw std::invalid_argument("average_assignment: totals must be >= 0");
  Assignment a;
  a.cycle = c;
  a.alpha.resize(c.size());
  const double cells = static_cast<double>(c.size() / P);
  for (int i = 0; i < c.size(); ++i) a.alpha[i] = totals[i % P] / cells;
  return a;
}

/// Lemma-1 split: a cycle revisiting `repeat_node` decomposes there into two
/// subcycles; the class totals are divided proportionally to subcycle length
/// and both parts are returned as P-averages. The cycle is re-indexed so the
/// repeated node leads.
inline std::pair<Assignment, Assignment> split_cycle_average(const Cycle& c, const Vec& alpha,
                                                             int repeat_node, int P) {
  const int n = c.size();
  if (static_cast<int>(alpha.size()) != n)
    throw std::invalid_argument("split_cycle_average: assignment length mismatch");
  int first = -1, second = -1;
  for (int i = 0; i < n; ++i) {
    if (c.state(i) != repeat_node) continue;
    if (first == -1) {
      first = i;
    } else if (second == -1) {
      second = i;
    }
  }
  if (second == -1)
    throw std::invalid_argument("split_cycle_average: node is not visited twice");

  // rotate so the repeated node is index 0; the split point follows
  Cycle rotated;
  Vec ralpha(n);
  rotated.entries.resize(n);
  for (int i = 0; i < n; ++i) {
    rotated.entries[i] = c.entries[(first + i) % n];
    ralpha[i] = alpha[(first + i) % n];
  }
  const int m = second - first;

  if (P < 1 || n % P || m % P || (n - m) % P)
    throw std::invalid_argument("split_cycle_average: P must divide |C|, |C1| and |C2|");

  Vec class_totals(P, 0.0);
  for (int i = 0; i < n; ++i) class_totals[i % P] += ralpha[i];

  Cycle c1, c2;
  c1.entries.assign(rotated.entries.begin(), rotated.entries.begin() + m);
  c2.entries.assign(rotated.entries.begin() + m, rotated.entries.end());

  Vec n1(P), n2(P);
  for (int p = 0; p < P; ++p) {
    n1[p] = class_totals[p] * static_cast<double>(m) / n;
    n2[p] = class_totals[p] * static_cast<double>(n - m) / n;
  }
  return {average_assignment(c1, P, n1), average_assignment(c2, P, n2)};
}

/// Smallest T with all-positive boolean power of the component's adjacency,
/// capped by the Wielandt bound (n-1)^2 + 1.
inline int primitivity_horizon(const LabeledDigraph& g, const std::vector<int>& comp) {
  const int n = static_cast<int>(comp.size());
  std::vector<int> local(g.n_nodes, -1);
  for (int i = 0; i < n; ++i) local[comp[i]] = i;

  std::vector<std::vector<char>> adj(n, std::vector<char>(n, 0));
  for (int i = 0; i < n; ++i)
    for (auto [m, w] : g.out[comp[i]])
      if (local[w] >= 0) adj[i][local[w]] = 1;

  const int cap = (n - 1) * (n - 1) + 1;
  std::vector<std::vector<char>> power = adj;
  for (int t = 1; t <= cap; ++t) {
    bool all = true;
    for (int i = 0; i < n && all; ++i)
      for (int j = 0; j < n; ++j)
        if (!power[i][j]) {
          all = false;
          break;
        }
    if (all) return t;
    if (t == cap) break;
    std::vector<std::vector<char>> next(n, std::vector<char>(n, 0));
    for (int i = 0; i < n; ++i)
      for (int k = 0; k < n; ++k)
        if (power[i][k])
          for (int j = 0; j < n; ++j)
            if (adj[k][j]) next[i][j] = 1;
    power = std::move(next);
  }
  throw std::runtime_error(
      "primitivity_horizon: no all-positive power within the Wielandt bound "
      "(component is not primitive; aperiodicity assumption violated)");
}

struct SteerResult {
  std::vector<AggregateInput> inputs;     // r(0..T-1), each Eq.-11 admissible
  std::vector<int> compatible_rotations;  // class rotations matching the endpoint sums
};

namespace detail {

// Exact-length paths: reach[t][v] = 1 iff v reaches `target` in exactly t steps
// inside the component.
inline std::vector<std::vector<char>> backward_reach(
    const LabeledDigraph& g, const std::vector<std::vector<std::pair<int, int>>>& pred,
    const std::vector<char>& in_comp, int target, int length) {
  std::vector<std::vector<char>> reach(length + 1, std::vector<char>(g.n_nodes, 0));
  reach[0][target] = 1;
  for (int t = 1; t <= length; ++t)
    for (int v = 0; v < g.n_nodes; ++v)
      if (reach[t - 1][v])
        for (auto [u, m] : pred[v])
          if (in_comp[u]) reach[t][u] = 1;
  return reach;
}

}  // namespace detail

/// Steers the aggregate state between two integer histograms supported on a
/// nontrivial SCC (Thm 4 / Cor. 1): transportation split by northwest-corner,
/// units routed along exact-length paths within the primitivity horizon.
/// `horizon_mod` constrains T mod P for periodic components.
inline SteerResult steer(const LabeledDigraph& g, const std::vector<int>& comp,
                         const AggregateState& from, const AggregateState& to,
                         std::optional<int> horizon_mod = std::nullopt) {
  const int nm = g.n_modes;
  std::vector<char> in_comp(g.n_nodes, 0);
  for (int v : comp) in_comp[v] = 1;

  auto check_integer_support = [&](const AggregateState& s, const char* which) {
    if (static_cast<int>(s.w.size()) != g.n_nodes)
      throw std::invalid_argument("steer: histogram size mismatch");
    for (int v = 0; v < g.n_nodes; ++v) {
      if (s.w[v] < 0 || std::abs(s.w[v] - std::llround(s.w[v])) > kAggregateTol)
        throw std::invalid_argument(std::string("steer: ") + which +
                                    " must be a nonnegative integer vector");
      if (s.w[v] > 0 && !in_comp[v])
        throw std::invalid_argument(std::string("steer: ") + which +
                                    " has support outside the component");
    }
  };
  check_integer_support(from, "source");
  check_integer_support(to, "target");
  if (std::llround(from.total()) != std::llround(to.total()))
    throw std::invalid_argument("steer: endpoint histograms must have equal mass");

  const int P = period(g, comp);
  auto classes = periodic_classes(g, comp);

  auto class_sums = [&](const AggregateState& s) {
    std::vector<double> sums(P, 0.0);
    for (int p = 0; p < P; ++p)
      for (int v : classes[p]) sums[p] += s.w[v];
    return sums;
  };
  const auto from_sums = class_sums(from);
  const auto to_sums = class_sums(to);

  std::vector<int> rotations;
  for (int k = 0; k < P; ++k) {
    bool ok = true;
    for (int p = 0; p < P && ok; ++p)
      ok = std::abs(to_sums[(p + k) % P] - from_sums[p]) < 0.5;
    if (ok) rotations.push_back(k);
  }

  SteerResult result;
  result.compatible_rotations = rotations;
  if (from == to && (!horizon_mod || *horizon_mod % P == 0)) return result;

  auto fail_parity = [&](const std::string& why) {
    std::string msg = "steer: " + why + "; class sums source=(";
    for (int p = 0; p < P; ++p) msg += (p ? "," : "") + std::to_string(from_sums[p]);
    msg += ") target=(";
    for (int p = 0; p < P; ++p) msg += (p ? "," : "") + std::to_string(to_sums[p]);
    msg += ")";
    throw ParityError(msg, from_sums, to_sums, rotations);
  };

  int rotation;
  if (horizon_mod) {
    rotation = ((*horizon_mod % P) + P) % P;
    if (std::find(rotations.begin(), rotations.end(), rotation) == rotations.end())
      fail_parity("requested horizon parity is incompatible with the endpoint class sums");
  } else {
    if (rotations.empty())
      fail_parity("no class rotation matches the endpoint class sums");
    rotation = rotations.front();
  }

  // Advance the source by `rotation` steps along arbitrary in-component edges
  // so the class sums align, tracking per-node masses.
  AggregateState cur = from;
  auto advance_step = [&]() {
    AggregateInput r;
    r.r.assign(static_cast<std::size_t>(g.n_nodes) * nm, 0.0);
    for (int v = 0; v < g.n_nodes; ++v) {
      if (cur.w[v] <= 0) continue;
      int mode = -1;
      for (auto [m, w] : g.out[v])
        if (in_comp[w]) {
          mode = m;
          break;
        }
      if (mode < 0) throw std::runtime_error("steer: component node without internal action");
      r.r[static_cast<std::size_t>(v) * nm + mode] = cur.w[v];
    }
    cur = step(cur, r, g);
    result.inputs.push_back(std::move(r));
  };
  for (int t = 0; t < rotation; ++t) advance_step();

  // Classwise horizon on the P-th power graph; paths of length P*T_power then
  // exist between any same-class pair.
  int t_power = 1;
  if (P == 1) {
    t_power = primitivity_horizon(g, comp);
  } else {
    LabeledDigraph power(g.n_nodes, 1);
    for (int v : comp) {
      // nodes reachable in exactly P steps within the component
      std::vector<char> cur_set(g.n_nodes, 0), next_set(g.n_nodes, 0);
      cur_set[v] = 1;
      for (int t = 0; t < P; ++t) {
        std::fill(next_set.begin(), next_set.end(), 0);
        for (int u = 0; u < g.n_nodes; ++u)
          if (cur_set[u])
            for (auto [m, w] : g.out[u])
              if (in_comp[w]) next_set[w] = 1;
        cur_set.swap(next_set);
      }
      for (int w = 0; w < g.n_nodes; ++w)
        if (cur_set[w]) power.out[v].emplace_back(0, w);
    }
    for (const auto& cls : classes) t_power = std::max(t_power, primitivity_horizon(power, cls));
  }
  if (cur == to) return result;  // rotation alone reached the target
  const int L = P * t_power;

  // Remaining horizon: exact-length-L unit routing per class, northwest corner.
  std::vector<AggregateInput> stage(L);
  for (auto& r : stage) r.r.assign(static_cast<std::size_t>(g.n_nodes) * nm, 0.0);

  const auto pred = g.predecessors();
  for (const auto& cls : classes) {
    std::vector<std::pair<int, long long>> supply, demand;
    for (int v : cls) {
      long long s = std::llround(cur.w[v]);
      long long d = std::llround(to.w[v]);
      if (s > 0) supply.emplace_back(v, s);
      if (d > 0) demand.emplace_back(v, d);
    }
    std::size_t i = 0, j = 0;
    std::map<int, std::vector<std::vector<char>>> reach_cache;
    while (i < supply.size() && j < demand.size()) {
      long long move = std::min(supply[i].second, demand[j].second);
      int src = supply[i].first, dst = demand[j].first;
      auto it = reach_cache.find(dst);
      if (it == reach_cache.end())
        it = reach_cache.emplace(dst, detail::backward_reach(g, pred, in_comp, dst, L)).first;
      const auto& reach = it->second;
      if (!reach[L][src])
        throw std::runtime_error("steer: no path of the required length (not primitive?)");
      int v = src;
      for (int t = 0; t < L; ++t) {
        int mode = -1, next = -1;
        for (auto [m, w] : g.out[v])
          if (in_comp[w] && reach[L - t - 1][w]) {
            mode = m;
            next = w;
            break;
          }
        if (mode < 0) throw std::runtime_error("steer: path routing failed");
        stage[t].r[static_cast<std::size_t>(v) * nm + mode] += static_cast<double>(move);
        v = next;
      }
      supply[i].second -= move;
      demand[j].second -= move;
      if (supply[i].second == 0) ++i;
      if (demand[j].second == 0) ++j;
    }
  }

  for (auto& r : stage) {
    cur = step(cur, r, g);
    result.inputs.push_back(std::move(r));
  }
  if (!(cur == to)) throw std::runtime_error("steer: endpoint mismatch after routing");
  return result;
}

}  // namespace countsyn
