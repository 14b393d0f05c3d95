#pragma once

#include <deque>
#include <map>
#include <optional>
#include <set>
#include <utility>
#include <vector>

#include "countsyn/abstraction.hpp"
#include "countsyn/common.hpp"

namespace countsyn {

/// The abstraction viewed as a labeled digraph. Deterministic per (node, mode);
/// pruned nodes simply keep no outgoing edges (indexing is preserved).
struct LabeledDigraph {
  int n_nodes = 0;
  int n_modes = 0;
  std::vector<std::vector<std::pair<int, int>>> out;  // per node: (mode, dst), mode-ascending

  LabeledDigraph() = default;
  LabeledDigraph(int nodes, int modes) : n_nodes(nodes), n_modes(modes), out(nodes) {}

  void add_edge(int src, int mode, int dst) {
    auto& edges = out[src];
    for (auto& [m, d] : edges)
      if (m == mode) throw std::invalid_argument("LabeledDigraph: duplicate (node, mode)");
    edges.emplace_back(mode, dst);
    std::sort(edges.begin(), edges.end());
  }

  int succ(int node, int mode) const {
    for (auto [m, d] : out[node])
      if (m == mode) return d;
    return -1;
  }

  bool has_action(int node) const { return !out[node].empty(); }

  std::size_t edge_count() const {
    std::size_t n = 0;
    for (const auto& e : out) n += e.size();
    return n;
  }

  /// Predecessor table: for each node, the (src, mode) pairs leading into it.
  std::vector<std::vector<std::pair<int, int>>> predecessors() const {
    std::vector<std::vector<std::pair<int, int>>> pred(n_nodes);
    for (int u = 0; u < n_nodes; ++u)
      for (auto [m, v] : out[u]) pred[v].emplace_back(u, m);
    for (auto& p : pred) std::sort(p.begin(), p.end());
    return pred;
  }

  static LabeledDigraph from_abstraction(const Abstraction& abs) {
    LabeledDigraph g(static_cast<int>(abs.state_count()), abs.mode_count());
    for (long q = 0; q < abs.state_count(); ++q)
      for (int mu = 0; mu < abs.mode_count(); ++mu) {
        std::int32_t dst = abs.successor(q, mu);
        if (dst >= 0) g.out[q].emplace_back(mu, dst);  // already mode-ascending
      }
    return g;
  }
};

/// A cycle as (state, mode) pairs with succ(q_i, mu_i) = q_{i+1 mod |C|};
/// stored in canonical (lexicographically smallest) rotation.
struct Cycle {
  std::vector<std::pair<int, int>> entries;

  int size() const { return static_cast<int>(entries.size()); }
  int state(int i) const { return entries[i].first; }
  int mode(int i) const { return entries[i].second; }

  void canonicalize() {
    if (entries.size() < 2) return;
    const int n = size();
    int best = 0;
    for (int r = 1; r < n; ++r) {
      for (int k = 0; k < n; ++k) {
        const auto& a = entries[(r + k) % n];
        const auto& b = entries[(best + k) % n];
        if (a < b) {
          best = r;
          break;
        }
        if (b < a) break;
      }
    }
    std::rotate(entries.begin(), entries.begin() + best, entries.end());
  }

  void validate_in(const LabeledDigraph& g) const {
    if (entries.empty()) throw std::invalid_argument("Cycle: empty");
    const int n = size();
    for (int i = 0; i < n; ++i) {
      int dst = g.succ(state(i), mode(i));
      if (dst != state((i + 1) % n))
        throw std::invalid_argument("Cycle: closure violated at index " + std::to_string(i));
    }
  }

  bool operator==(const Cycle& other) const { return entries == other.entries; }
  bool operator<(const Cycle& other) const {
    if (entries.size() != other.entries.size()) return entries.size() < other.entries.size();
    return entries < other.entries;
  }
};

struct SccResult {
  std::vector<std::vector<int>> components;  // each sorted ascending
  std::vector<bool> trivial;                 // singleton without self-loop
  std::vector<int> component_of;             // node -> component index
};

/// Tarjan strongly connected components (iterative). Components are ordered
/// by their smallest node for reproducibility.
inline SccResult scc(const LabeledDigraph& g) {
  const int n = g.n_nodes;
  std::vector<int> index(n, -1), low(n, 0), on_stack(n, 0);
  std::vector<int> stack;
  std::vector<std::vector<int>> comps;
  int counter = 0;

  struct Frame {
    int node;
    std::size_t edge;
  };
  std::vector<Frame> call;

  for (int root = 0; root < n; ++root) {
    if (index[root] != -1) continue;
    call.push_back({root, 0});
    while (!call.empty()) {
      auto& fr = call.back();
      int v = fr.node;
      if (fr.edge == 0) {
        index[v] = low[v] = counter++;
        stack.push_back(v);
        on_stack[v] = 1;
      }
      bool descended = false;
      while (fr.edge < g.out[v].size()) {
        int w = g.out[v][fr.edge].second;
        ++fr.edge;
        if (index[w] == -1) {
          call.push_back({w, 0});
          descended = true;
          break;
        }
        if (on_stack[w]) low[v] = std::min(low[v], index[w]);
      }
      if (descended) continue;
      if (low[v] == index[v]) {
        std::vector<int> comp;
        while (true) {
          int w = stack.back();
          stack.pop_back();
          on_stack[w] = 0;
          comp.push_back(w);
          if (w == v) break;
        }
        std::sort(comp.begin(), comp.end());
        comps.push_back(std::move(comp));
      }
      call.pop_back();
      if (!call.empty()) {
        int parent = call.back().node;
        low[parent] = std::min(low[parent], low[v]);
      }
    }
  }

  std::sort(comps.begin(), comps.end(),
            [](const auto& a, const auto& b) { return a.front() < b.front(); });

  SccResult res;
  res.components = std::move(comps);
  res.component_of.assign(n, -1);
  res.trivial.resize(res.components.size());
  for (std::size_t c = 0; c < res.components.size(); ++c) {
    for (int v : res.components[c]) res.component_of[v] = static_cast<int>(c);
    bool self_loop = false;
    if (res.components[c].size() == 1) {
      int v = res.components[c].front();
      for (auto [m, d] : g.out[v]) self_loop |= (d == v);
      res.trivial[c] = !self_loop;
    } else {
      res.trivial[c] = false;
    }
  }
  return res;
}

namespace detail {

// BFS levels within a component; also reports edges inside the component.
inline std::vector<int> component_levels(const LabeledDigraph& g,
                                         const std::vector<int>& comp) {
  std::vector<int> level(g.n_nodes, -1);
  std::vector<char> in_comp(g.n_nodes, 0);
  for (int v : comp) in_comp[v] = 1;
  std::deque<int> queue{comp.front()};
  level[comp.front()] = 0;
  while (!queue.empty()) {
    int v = queue.front();
    queue.pop_front();
    for (auto [m, w] : g.out[v]) {
      if (in_comp[w] && level[w] == -1) {
        level[w] = level[v] + 1;
        queue.push_back(w);
      }
    }
  }
  return level;
}

}  // namespace detail

/// gcd of all cycle lengths in a nontrivial strongly connected component,
/// via BFS level differences.
inline int period(const LabeledDigraph& g, const std::vector<int>& comp) {
  if (comp.empty()) throw std::invalid_argument("period: empty component");
  std::vector<char> in_comp(g.n_nodes, 0);
  for (int v : comp) in_comp[v] = 1;
  bool has_edge = false;
  auto level = detail::component_levels(g, comp);
  long long p = 0;
  for (int u : comp)
    for (auto [m, w] : g.out[u]) {
      if (!in_comp[w]) continue;
      has_edge = true;
      p = llgcd(p, level[u] + 1 - level[w]);
    }
  if (!has_edge || p == 0)
    throw std::invalid_argument("period: component is trivial (no cycle)");
  return static_cast<int>(p);
}

/// Classes D_0..D_{P-1} with every edge going D_p -> D_{(p+1) mod P}; the
/// smallest node of the component anchors D_0.
inline std::vector<std::vector<int>> periodic_classes(const LabeledDigraph& g,
                                                      const std::vector<int>& comp) {
  int P = period(g, comp);
  auto level = detail::component_levels(g, comp);
  std::vector<std::vector<int>> classes(P);
  for (int v : comp) classes[((level[v] % P) + P) % P].push_back(v);
  for (auto& c : classes) std::sort(c.begin(), c.end());
  return classes;
}

/// Longest shortest-path distance over ordered node pairs; requires the graph
/// to be strongly connected.
inline int diameter(const LabeledDigraph& g) {
  auto comps = scc(g);
  if (comps.components.size() != 1)
    throw std::invalid_argument("diameter: graph is not strongly connected");
  int best = 0;
  for (int s = 0; s < g.n_nodes; ++s) {
    std::vector<int> dist(g.n_nodes, -1);
    std::deque<int> queue{s};
    dist[s] = 0;
    while (!queue.empty()) {
      int v = queue.front();
      queue.pop_front();
      for (auto [m, w] : g.out[v])
        if (dist[w] == -1) {
          dist[w] = dist[v] + 1;
          best = std::max(best, dist[w]);
          queue.push_back(w);
        }
    }
  }
  return best;
}

/// Removes (q, mu) pairs mandated to zero count (R = 0), then iterates the
/// no-outgoing-action fixpoint: the largest controlled-invariant subgraph.
inline LabeledDigraph prune_zero_count(const LabeledDigraph& g,
                                       const std::vector<DiscreteCountingSet>& constraints) {
  LabeledDigraph pruned(g.n_nodes, g.n_modes);
  for (int u = 0; u < g.n_nodes; ++u) {
    for (auto [m, v] : g.out[u]) {
      bool forbidden = false;
      for (const auto& c : constraints)
        if (c.bound == 0.0 && c.contains(u, m)) {
          forbidden = true;
          break;
        }
      if (!forbidden) pruned.out[u].emplace_back(m, v);
    }
  }
  // cascade: drop dead nodes and edges into them until every node keeps an action
  std::vector<char> alive(g.n_nodes, 1);
  bool changed = true;
  while (changed) {
    changed = false;
    for (int u = 0; u < g.n_nodes; ++u) {
      if (!alive[u]) continue;
      auto& edges = pruned.out[u];
      edges.erase(std::remove_if(edges.begin(), edges.end(),
                                 [&](const std::pair<int, int>& e) { return !alive[e.second]; }),
                  edges.end());
      if (edges.empty()) {
        alive[u] = 0;
        changed = true;
      }
    }
  }
  return pruned;
}

/// All simple cycles (no repeated node) of length <= max_len, canonical
/// rotation each; parallel mode labels yield distinct cycles. Throws
/// EnumerationOverflow past `cap` cycles.
inline std::vector<Cycle> enumerate_simple_cycles(const LabeledDigraph& g, int max_len,
                                                  std::size_t cap = 1000000) {
  if (max_len < 1) throw std::invalid_argument("enumerate_simple_cycles: max_len >= 1");
  std::vector<Cycle> found;
  std::vector<char> on_path(g.n_nodes, 0);
  std::vector<std::pair<int, int>> path;  // (state, mode)

  // bounded backtracking anchored at the smallest node of each cycle
  std::function<void(int, int)> dfs = [&](int start, int v) {
    for (auto [m, w] : g.out[v]) {
      if (w == start) {
        path.emplace_back(v, m);
        Cycle c{path};
        c.canonicalize();
        if (found.size() >= cap)
          throw EnumerationOverflow("enumerate_simple_cycles: cap exceeded");
        found.push_back(std::move(c));
        path.pop_back();
      } else if (w > start && !on_path[w] && static_cast<int>(path.size()) + 1 < max_len) {
        path.emplace_back(v, m);
        on_path[w] = 1;
        dfs(start, w);
        on_path[w] = 0;
        path.pop_back();
      }
    }
  };

  for (int s = 0; s < g.n_nodes; ++s) {
    on_path[s] = 1;
    dfs(s, s);
    on_path[s] = 0;
  }
  std::sort(found.begin(), found.end());
  return found;
}

struct CycleSampleOptions {
  std::size_t count = 1;
  std::uint64_t seed = 0;
  std::size_t budget = 0;  // walk attempts; 0 means 1000 * count
  std::vector<std::vector<int>> visit_sets;  // each sampled cycle must touch every set
  struct FractionTarget {
    int mode = 0;
    double fraction = 0.5;
  };
  std::vector<FractionTarget> fraction_targets;  // applied round-robin per walk
  std::vector<int> start_pool;                   // default: all nodes with actions
};

struct CycleSample {
  std::vector<Cycle> cycles;  // sorted by (length, canonical form)
  bool exhausted = false;     // budget ran out before `count` distinct cycles
};

/// Seeded random walks truncated at the first node revisit; rejects cycles
/// missing a visit set; identical seeds give identical output.
inline CycleSample sample_cycles(const LabeledDigraph& g, const CycleSampleOptions& opt) {
  if (opt.count < 1) throw std::invalid_argument("sample_cycles: count >= 1");
  Rng rng(opt.seed);
  std::vector<int> pool = opt.start_pool;
  if (pool.empty()) {
    for (int v = 0; v < g.n_nodes; ++v)
      if (g.has_action(v)) pool.push_back(v);
  }
  CycleSample out;
  if (pool.empty()) {
    out.exhausted = true;
    return out;
  }

  // membership masks make visit-set rejection O(|C|) per sampled cycle
  std::vector<std::vector<char>> visit_mask;
  for (const auto& vs : opt.visit_sets) {
    std::vector<char> mask(g.n_nodes, 0);
    for (int q : vs) mask[q] = 1;
    visit_mask.push_back(std::move(mask));
  }

  std::set<Cycle> seen;
  std::size_t budget = opt.budget ? opt.budget : 1000 * opt.count;
  std::vector<std::pair<int, int>> pos(g.n_nodes, {-1, -1});  // (generation, path index)

  for (std::size_t attempt = 0; attempt < budget && seen.size() < opt.count; ++attempt) {
    const int gen = static_cast<int>(attempt);
    auto position = [&](int node) {
      return pos[node].first == gen ? pos[node].second : -1;
    };
    std::vector<std::pair<int, int>> path;
    int v = pool[rng.uniform_int(0, static_cast<int>(pool.size()) - 1)];
    const CycleSampleOptions::FractionTarget* target =
        opt.fraction_targets.empty()
            ? nullptr
            : &opt.fraction_targets[attempt % opt.fraction_targets.size()];

    while (position(v) == -1 && g.has_action(v)) {
      pos[v] = {gen, static_cast<int>(path.size())};
      const auto& edges = g.out[v];
      int pick;
      if (target) {
        std::vector<int> preferred, rest;
        for (int i = 0; i < static_cast<int>(edges.size()); ++i)
          (edges[i].first == target->mode ? preferred : rest).push_back(i);
        bool use_pref = !preferred.empty() &&
                        (rest.empty() || rng.uniform_real(0.0, 1.0) < target->fraction);
        const auto& bucket = use_pref ? preferred : rest;
        pick = bucket[rng.uniform_int(0, static_cast<int>(bucket.size()) - 1)];
      } else {
        pick = rng.uniform_int(0, static_cast<int>(edges.size()) - 1);
      }
      path.emplace_back(v, edges[pick].first);
      v = edges[pick].second;
    }
    int start = position(v);
    if (start == -1) continue;  // walk died at a node without actions

    Cycle c;
    c.entries.assign(path.begin() + start, path.end());
    c.canonicalize();

    bool ok = true;
    for (const auto& mask : visit_mask) {
      bool hit = false;
      for (const auto& [q, m] : c.entries)
        if (mask[q]) {
          hit = true;
          break;
        }
      if (!hit) {
        ok = false;
        break;
      }
    }
    if (ok) seen.insert(std::move(c));
  }

  out.cycles.assign(seen.begin(), seen.end());
  std::sort(out.cycles.begin(), out.cycles.end());
  out.exhausted = seen.size() < opt.count;
  return out;
}

}  // namespace countsyn
