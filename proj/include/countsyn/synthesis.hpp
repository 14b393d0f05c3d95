#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "countsyn/aggregate.hpp"

namespace countsyn {

enum class Integrality { Exact, Relaxed };

/// Single-class counting problem instance over a (pruned) graph.
struct ProblemInstance {
  const LabeledDigraph* graph = nullptr;
  AggregateState initial;  // w(0)
  std::vector<DiscreteCountingSet> constraints;
  int horizon = 0;  // T
  std::vector<Cycle> cycles;
  Integrality integrality = Integrality::Exact;
  double relax_eps = 0.0;
  long long lcm_cap = 100000;
  bool allow_conservative = true;

  // provenance used by the Table-I verdict logic
  bool constraints_contracted = false;  // built via G^{-(eps+eta/2)}
  bool cycle_set_complete = false;      // cycles exhaust the required bound
  double scale = 1.0;                   // divisor S already applied

  double subsystems() const { return initial.total(); }
};

/// Per-class data of the multi-class problem; counting sets live per class in
/// the joint constraints below.
struct ClassProblem {
  const LabeledDigraph* graph = nullptr;
  AggregateState initial;
  std::vector<Cycle> cycles;
};

/// One counting constraint summed over classes: sum_h count_h(X_l^h) <= bound.
struct JointConstraint {
  std::vector<DiscreteCountingSet> per_class;
  double bound = 0.0;
};

struct MultiInstance {
  std::vector<ClassProblem> classes;
  std::vector<JointConstraint> constraints;
  int horizon = 0;
  Integrality integrality = Integrality::Exact;
  double relax_eps = 0.0;
  long long lcm_cap = 100000;
  bool allow_conservative = true;
};

/// w_q(0) = #{n : xi_n(0) = q}.
inline AggregateState aggregate_initial(const std::vector<int>& xi0, long n_states) {
  AggregateState w;
  w.w.assign(n_states, 0.0);
  for (int q : xi0) {
    if (q < 0 || q >= n_states)
      throw std::invalid_argument("aggregate_initial: invalid state index");
    w.w[q] += 1.0;
  }
  return w;
}

/// Sparse linear feasibility program with named rows/columns so MPS exports
/// are reproducible byte for byte.
struct LinearProgram {
  enum class Sense { LessEq, Eq };
  struct Row {
    std::string name;
    Sense sense = Sense::LessEq;
    double rhs = 0.0;
    std::vector<std::pair<int, double>> terms;
  };
  struct Block {
    std::string name;
    int first = 0;
    int size = 0;
  };

  std::vector<Row> rows;
  std::vector<std::string> var_names;
  Vec lower, upper;
  std::vector<char> integer;  // integrality flag per variable
  std::vector<std::pair<int, double>> objective;  // optional hook; empty = pure feasibility
  std::vector<Block> blocks;
  bool conservative_suffix = false;  // Remark-3 fallback replaced the exact joint rows

  int n_vars() const { return static_cast<int>(var_names.size()); }

  int add_var(std::string name, double lb, double ub, bool is_integer) {
    var_names.push_back(std::move(name));
    lower.push_back(lb);
    upper.push_back(ub);
    integer.push_back(is_integer ? 1 : 0);
    return n_vars() - 1;
  }

  Row& add_row(std::string name, Sense sense, double rhs) {
    rows.push_back({std::move(name), sense, rhs, {}});
    return rows.back();
  }

  const Block* block(const std::string& name) const {
    for (const auto& b : blocks)
      if (b.name == name) return &b;
    return nullptr;
  }
};

/// Layout bookkeeping to map LP points back into prefix-suffix solutions.
struct LpLayout {
  struct ClassLayout {
    int n_nodes = 0, n_modes = 0;
    std::vector<int> alpha_first;  // per cycle
    int r_first = 0;               // T blocks of n_nodes*n_modes
    int w_first = 0;               // T blocks of n_nodes (w(1..T))
    int row_17c_first = 0;         // n_nodes rows
    int row_17d_first = 0;         // T*n_nodes rows
    int row_17e_first = 0;         // T*n_nodes rows
  };
  int horizon = 0;
  std::vector<ClassLayout> classes;
};

struct BuiltLp {
  LinearProgram lp;
  LpLayout layout;
};

namespace detail {

inline std::string idx_name(const char* stem, std::initializer_list<long long> parts) {
  std::string s = stem;
  for (long long p : parts) s += "_" + std::to_string(p);
  return s;
}

// Suffix grouping for Eq. 17b: the co-prime partition when its total row count
// fits the cap, else Remark-3 length groups. Returns (groups, conservative?).
// Cycle identity is (class, cycle) flattened in order.
inline std::pair<std::vector<std::vector<int>>, bool> suffix_groups(
    const std::vector<const Cycle*>& cycles, long long cap, bool allow_conservative) {
  std::vector<Assignment> dummies;
  for (const auto* c : cycles) dummies.push_back({*c, Vec(c->size(), 0.0)});
  auto groups = coprime_partition(dummies);
  long long rows = 0;
  bool overflow = false;
  for (const auto& g : groups) {
    long long l = 1;
    for (int j : g) {
      long long len = dummies[j].cycle.size();
      l = l / llgcd(l, len) * len;
      if (l > cap) {
        overflow = true;
        break;
      }
    }
    if (overflow) break;
    rows += l;
    if (rows > cap) {
      overflow = true;
      break;
    }
  }
  if (!overflow) return {groups, false};

  if (!allow_conservative)
    throw LcmCapExceeded(
        "build_lp: joint-count rows exceed the lcm cap; enable the conservative "
        "length-grouped fallback or supply shorter cycles");
  std::map<int, std::vector<int>> by_len;
  for (std::size_t j = 0; j < cycles.size(); ++j)
    by_len[cycles[j]->size()].push_back(static_cast<int>(j));
  std::vector<std::vector<int>> cons;
  long long total = 0;
  for (auto& [len, members] : by_len) {
    total += len;
    cons.push_back(members);
  }
  if (total > cap)
    throw LcmCapExceeded("build_lp: even the conservative grouping exceeds the lcm cap");
  return {cons, true};
}

}  // namespace detail

/// Builds the prefix-suffix feasibility program (multi-class form; a single
/// class reproduces the single-class structure exactly).
///
/// Row order: 17a prefix counts (s outer, l inner); 17b suffix joint counts
/// (per constraint: group rows, then one combiner row when several groups);
/// 17c connection; 17d dynamics; 17e conservation. Nonnegativity is carried
/// as variable bounds. When `fixed_suffix` is supplied the alpha variables are
/// replaced by those constants and 17b is dropped (rounding step 3).
inline BuiltLp build_lp(const MultiInstance& inst,
                        const std::vector<std::vector<Vec>>* fixed_suffix = nullptr) {
  const int H = static_cast<int>(inst.classes.size());
  const int T = inst.horizon;
  if (H == 0) throw std::invalid_argument("build_lp: no classes");
  if (T < 0) throw std::invalid_argument("build_lp: negative horizon");
  for (const auto& c : inst.constraints)
    if (static_cast<int>(c.per_class.size()) != H)
      throw std::invalid_argument("build_lp: constraint class arity mismatch");

  BuiltLp out;
  LinearProgram& lp = out.lp;
  out.layout.horizon = T;
  const bool exact = inst.integrality == Integrality::Exact;
  const double relax = inst.integrality == Integrality::Relaxed ? inst.relax_eps : 0.0;

  // flattened cycle list across classes for the suffix machinery
  std::vector<const Cycle*> all_cycles;
  std::vector<int> cycle_class;
  for (int h = 0; h < H; ++h) {
    const auto& cp = inst.classes[h];
    if (!cp.graph) throw std::invalid_argument("build_lp: class without graph");
    if (static_cast<int>(cp.initial.w.size()) != cp.graph->n_nodes)
      throw std::invalid_argument("build_lp: initial histogram size mismatch");
    for (const auto& cy : cp.cycles) {
      cy.validate_in(*cp.graph);
      all_cycles.push_back(&cy);
      cycle_class.push_back(h);
    }
  }

  // variables, class-major: alpha_j, then r(s), then w(1..T)
  out.layout.classes.resize(H);
  {
    std::vector<const Vec*> fixed_flat;
    if (fixed_suffix) {
      for (int h = 0; h < H; ++h) {
        if ((*fixed_suffix)[h].size() != inst.classes[h].cycles.size())
          throw std::invalid_argument("build_lp: fixed suffix arity mismatch");
        for (const auto& a : (*fixed_suffix)[h]) fixed_flat.push_back(&a);
      }
    }
    int flat = 0;
    for (int h = 0; h < H; ++h) {
      auto& cl = out.layout.classes[h];
      const auto& cp = inst.classes[h];
      cl.n_nodes = cp.graph->n_nodes;
      cl.n_modes = cp.graph->n_modes;
      for (std::size_t j = 0; j < cp.cycles.size(); ++j, ++flat) {
        cl.alpha_first.push_back(lp.n_vars());
        if (!fixed_suffix) {
          int first = lp.n_vars();
          for (int i = 0; i < cp.cycles[j].size(); ++i)
            lp.add_var(detail::idx_name("C_alpha", {h, static_cast<long long>(j), i}), 0.0,
                       std::numeric_limits<double>::infinity(), exact);
          lp.blocks.push_back({detail::idx_name("alpha", {h, static_cast<long long>(j)}),
                               first, cp.cycles[j].size()});
        }
      }
      cl.r_first = lp.n_vars();
      for (int s = 0; s < T; ++s) {
        int first = lp.n_vars();
        for (int q = 0; q < cl.n_nodes; ++q)
          for (int mu = 0; mu < cl.n_modes; ++mu) {
            // actions missing from the graph carry a zero upper bound
            double ub = cp.graph->succ(q, mu) >= 0 ? std::numeric_limits<double>::infinity()
                                                   : 0.0;
            lp.add_var(detail::idx_name("C_r", {h, s, q, mu}), 0.0, ub, exact);
          }
        lp.blocks.push_back({detail::idx_name("r", {h, s}), first, cl.n_nodes * cl.n_modes});
      }
      cl.w_first = lp.n_vars();
      for (int s = 1; s <= T; ++s) {
        int first = lp.n_vars();
        for (int q = 0; q < cl.n_nodes; ++q)
          lp.add_var(detail::idx_name("C_w", {h, s, q}), 0.0,
                     std::numeric_limits<double>::infinity(), exact);
        lp.blocks.push_back({detail::idx_name("w", {h, s}), first, cl.n_nodes});
      }
    }
  }

  auto r_var = [&](int h, int s, int q, int mu) {
    const auto& cl = out.layout.classes[h];
    return cl.r_first + s * cl.n_nodes * cl.n_modes + q * cl.n_modes + mu;
  };
  auto w_var = [&](int h, int s, int q) {  // s in 1..T
    const auto& cl = out.layout.classes[h];
    return cl.w_first + (s - 1) * cl.n_nodes + q;
  };

  const int L = static_cast<int>(inst.constraints.size());

  // 17a: prefix counting rows
  for (int s = 0; s < T; ++s)
    for (int l = 0; l < L; ++l) {
      auto& row = lp.add_row(detail::idx_name("R17a", {s, l}), LinearProgram::Sense::LessEq,
                             inst.constraints[l].bound + relax);
      for (int h = 0; h < H; ++h)
        for (auto [q, mu] : inst.constraints[l].per_class[h].members)
          row.terms.emplace_back(r_var(h, s, q, mu), 1.0);
    }

  // 17b: suffix joint-count rows via the co-prime / conservative grouping
  if (!fixed_suffix && !all_cycles.empty() && L > 0) {
    auto [groups, conservative] =
        detail::suffix_groups(all_cycles, inst.lcm_cap, inst.allow_conservative);
    lp.conservative_suffix = conservative;
    for (int l = 0; l < L; ++l) {
      std::vector<int> z_vars;
      if (groups.size() > 1) {
        for (std::size_t gidx = 0; gidx < groups.size(); ++gidx)
          z_vars.push_back(lp.add_var(
              detail::idx_name("C_z", {l, static_cast<long long>(gidx)}), 0.0,
              std::numeric_limits<double>::infinity(), false));
      }
      for (std::size_t gidx = 0; gidx < groups.size(); ++gidx) {
        const auto& group = groups[gidx];
        long long K = 1;
        for (int j : group) {
          long long len = all_cycles[j]->size();
          K = K / llgcd(K, len) * len;
        }
        for (long long s = 0; s < K; ++s) {
          bool combined = groups.size() > 1;
          auto& row = lp.add_row(
              detail::idx_name("R17b", {l, static_cast<long long>(gidx), s}),
              LinearProgram::Sense::LessEq,
              combined ? 0.0 : inst.constraints[l].bound + relax);
          for (int j : group) {
            const Cycle& cy = *all_cycles[j];
            const auto& xset = inst.constraints[l].per_class[cycle_class[j]];
            const int n = cy.size();
            int alpha0 = 0;
            {  // find the alpha block of flattened cycle j
              int h = cycle_class[j];
              int local = j;
              for (int hh = 0; hh < h; ++hh)
                local -= static_cast<int>(inst.classes[hh].cycles.size());
              alpha0 = out.layout.classes[h].alpha_first[local];
            }
            for (int p = 0; p < n; ++p)
              if (xset.contains(cy.state((p + s) % n), cy.mode((p + s) % n)))
                row.terms.emplace_back(alpha0 + p, 1.0);
          }
          if (combined) row.terms.emplace_back(z_vars[gidx], -1.0);
        }
      }
      if (groups.size() > 1) {
        auto& row = lp.add_row(detail::idx_name("R17bz", {l}), LinearProgram::Sense::LessEq,
                               inst.constraints[l].bound + relax);
        for (int z : z_vars) row.terms.emplace_back(z, 1.0);
      }
    }
  }

  // 17c: connection rows w_q(T) = sum_j <C_j, alpha_j>^{{q} x U}
  for (int h = 0; h < H; ++h) {
    const auto& cp = inst.classes[h];
    out.layout.classes[h].row_17c_first = static_cast<int>(lp.rows.size());
    for (int q = 0; q < cp.graph->n_nodes; ++q) {
      // T > 0: w_q(T) - sum_j alpha-mass-at-q = 0 (mass as rhs when fixed)
      // T = 0: sum_j alpha-mass-at-q = w_q(0)
      auto& row = lp.add_row(H > 1 ? detail::idx_name("R17c", {h, q})
                                   : detail::idx_name("R17c", {q}),
                             LinearProgram::Sense::Eq, 0.0);
      if (T > 0) row.terms.emplace_back(w_var(h, T, q), 1.0);
      double fixed_mass = 0.0;
      for (std::size_t j = 0; j < cp.cycles.size(); ++j) {
        const Cycle& cy = cp.cycles[j];
        for (int i = 0; i < cy.size(); ++i) {
          if (cy.state(i) != q) continue;
          if (fixed_suffix)
            fixed_mass += (*fixed_suffix)[h][j][i];
          else
            row.terms.emplace_back(out.layout.classes[h].alpha_first[j] + i,
                                   T == 0 ? 1.0 : -1.0);
        }
      }
      if (T == 0)
        row.rhs = cp.initial.w[q] - (fixed_suffix ? fixed_mass : 0.0);
      else if (fixed_suffix)
        row.rhs = fixed_mass;
    }
  }

  // 17d: dynamics rows w(s+1) = B r(s)
  for (int h = 0; h < H; ++h) {
    const auto& cp = inst.classes[h];
    out.layout.classes[h].row_17d_first = static_cast<int>(lp.rows.size());
    for (int s = 0; s < T; ++s)
      for (int q = 0; q < cp.graph->n_nodes; ++q) {
        auto& row = lp.add_row(H > 1 ? detail::idx_name("R17d", {h, s, q})
                                     : detail::idx_name("R17d", {s, q}),
                               LinearProgram::Sense::Eq, 0.0);
        row.terms.emplace_back(w_var(h, s + 1, q), 1.0);
        for (int u = 0; u < cp.graph->n_nodes; ++u)
          for (auto [mu, v] : cp.graph->out[u])
            if (v == q) row.terms.emplace_back(r_var(h, s, u, mu), -1.0);
      }
  }

  // 17e: conservation rows sum_mu r_q^mu(s) = w_q(s); s = 0 carries the data
  for (int h = 0; h < H; ++h) {
    const auto& cp = inst.classes[h];
    out.layout.classes[h].row_17e_first = static_cast<int>(lp.rows.size());
    for (int s = 0; s < T; ++s)
      for (int q = 0; q < cp.graph->n_nodes; ++q) {
        auto& row = lp.add_row(H > 1 ? detail::idx_name("R17e", {h, s, q})
                                     : detail::idx_name("R17e", {s, q}),
                               LinearProgram::Sense::Eq,
                               s == 0 ? cp.initial.w[q] : 0.0);
        for (int mu = 0; mu < cp.graph->n_modes; ++mu)
          row.terms.emplace_back(r_var(h, s, q, mu), 1.0);
        if (s > 0) row.terms.emplace_back(w_var(h, s, q), -1.0);
      }
  }

  return out;
}

/// Single-class convenience wrapper.
inline BuiltLp build_lp(const ProblemInstance& inst) {
  MultiInstance mi;
  mi.classes.push_back({inst.graph, inst.initial, inst.cycles});
  for (const auto& c : inst.constraints) mi.constraints.push_back({{c}, c.bound});
  mi.horizon = inst.horizon;
  mi.integrality = inst.integrality;
  mi.relax_eps = inst.relax_eps;
  mi.lcm_cap = inst.lcm_cap;
  mi.allow_conservative = inst.allow_conservative;
  return build_lp(mi);
}

/// Multi-class builder per Problem 2. All classes share the horizon (and the
/// caller must have discretized them with one sampling period).
inline BuiltLp build_multiclass(const MultiInstance& inst) { return build_lp(inst); }

struct PrefixSuffixSolution {
  enum class Provenance { Exact, Relaxed, Rounded };
  std::vector<AggregateInput> inputs;   // r(0..T-1)
  std::vector<AggregateState> states;   // w(1..T)
  std::vector<Assignment> assignments;  // (C_j, alpha_j)
  Provenance provenance = Provenance::Exact;
  bool conservative_suffix = false;
};

/// Maps an LP point back into per-class prefix-suffix solutions.
inline std::vector<PrefixSuffixSolution> extract_solution(const MultiInstance& inst,
                                                          const BuiltLp& built,
                                                          const Vec& point) {
  if (static_cast<int>(point.size()) != built.lp.n_vars())
    throw std::invalid_argument("extract_solution: point does not match the program");
  const int H = static_cast<int>(inst.classes.size());
  const int T = built.layout.horizon;
  std::vector<PrefixSuffixSolution> sols(H);
  for (int h = 0; h < H; ++h) {
    const auto& cl = built.layout.classes[h];
    auto& sol = sols[h];
    sol.provenance = inst.integrality == Integrality::Exact
                         ? PrefixSuffixSolution::Provenance::Exact
                         : PrefixSuffixSolution::Provenance::Relaxed;
    sol.conservative_suffix = built.lp.conservative_suffix;
    for (std::size_t j = 0; j < inst.classes[h].cycles.size(); ++j) {
      Assignment a;
      a.cycle = inst.classes[h].cycles[j];
      a.alpha.resize(a.cycle.size());
      for (int i = 0; i < a.cycle.size(); ++i) a.alpha[i] = point[cl.alpha_first[j] + i];
      sol.assignments.push_back(std::move(a));
    }
    for (int s = 0; s < T; ++s) {
      AggregateInput r;
      r.r.assign(static_cast<std::size_t>(cl.n_nodes) * cl.n_modes, 0.0);
      for (std::size_t k = 0; k < r.r.size(); ++k)
        r.r[k] = point[cl.r_first + s * cl.n_nodes * cl.n_modes + k];
      sol.inputs.push_back(std::move(r));
    }
    for (int s = 1; s <= T; ++s) {
      AggregateState w;
      w.w.assign(cl.n_nodes, 0.0);
      for (int q = 0; q < cl.n_nodes; ++q) w.w[q] = point[cl.w_first + (s - 1) * cl.n_nodes + q];
      sol.states.push_back(std::move(w));
    }
  }
  return sols;
}

/// Crash basis for Eq.-17 programs: propagates the initial histogram along
/// the first available mode at every node, covering the 17e rows with those r
/// columns and the 17d rows with the w columns. The selection is triangular
/// under a row/column permutation, hence always nonsingular, and its basic
/// values are the (nonnegative) propagated masses, so phase I starts with
/// artificials only on the connection rows and any violated counting rows.
inline std::vector<int> propagation_basis(const MultiInstance& inst, const BuiltLp& built) {
  std::vector<int> basis(built.lp.rows.size(), -1);
  const int T = built.layout.horizon;
  for (std::size_t h = 0; h < inst.classes.size(); ++h) {
    const auto& cp = inst.classes[h];
    const auto& cl = built.layout.classes[h];
    for (int s = 0; s < T; ++s)
      for (int q = 0; q < cl.n_nodes; ++q) {
        if (!cp.graph->out[q].empty()) {
          int mu = cp.graph->out[q].front().first;
          basis[cl.row_17e_first + s * cl.n_nodes + q] =
              cl.r_first + s * cl.n_nodes * cl.n_modes + q * cl.n_modes + mu;
        }
        basis[cl.row_17d_first + s * cl.n_nodes + q] = cl.w_first + s * cl.n_nodes + q;
      }
  }
  return basis;
}

struct CheckReport {
  bool ok = true;
  std::string detail;
};

/// Independent replay of a solution through the aggregate algebra (never the
/// solver's residuals): Eq.-11 admissibility and dynamics via step(), prefix
/// counts, the connection identity, and the joint suffix counts.
inline CheckReport check_solution(const MultiInstance& inst,
                                  const std::vector<PrefixSuffixSolution>& sols,
                                  double tol = 1e-7) {
  CheckReport rep;
  auto fail = [&](const std::string& why) {
    rep.ok = false;
    if (!rep.detail.empty()) rep.detail += "; ";
    rep.detail += why;
  };
  const int H = static_cast<int>(inst.classes.size());
  const int T = inst.horizon;
  const double relax = inst.integrality == Integrality::Relaxed ? inst.relax_eps : 0.0;

  std::vector<std::vector<AggregateState>> trajs(H);
  for (int h = 0; h < H; ++h) {
    const auto& cp = inst.classes[h];
    const auto& sol = sols[h];
    AggregateState cur = cp.initial;
    trajs[h].push_back(cur);
    for (int s = 0; s < T; ++s) {
      try {
        cur = step(cur, sol.inputs[s], *cp.graph);
      } catch (const std::exception& e) {
        fail("class " + std::to_string(h) + " step " + std::to_string(s) + ": " + e.what());
        return rep;
      }
      for (int q = 0; q < cp.graph->n_nodes; ++q)
        if (std::abs(cur.w[q] - sol.states[s].w[q]) > tol * std::max(1.0, cur.w[q]))
          fail("class " + std::to_string(h) + " state mismatch at s=" + std::to_string(s + 1));
      trajs[h].push_back(cur);
    }
    // connection: w(T) equals the unshifted assignment node sums
    Vec node_sum(cp.graph->n_nodes, 0.0);
    for (const auto& a : sol.assignments)
      for (int i = 0; i < a.cycle.size(); ++i) node_sum[a.cycle.state(i)] += a.alpha[i];
    for (int q = 0; q < cp.graph->n_nodes; ++q)
      if (std::abs(node_sum[q] - cur.w[q]) > tol * std::max(1.0, cur.w[q]))
        fail("class " + std::to_string(h) + " connection mismatch at node " + std::to_string(q));
  }

  // prefix counting rows
  for (int s = 0; s < T; ++s)
    for (std::size_t l = 0; l < inst.constraints.size(); ++l) {
      double count = 0;
      for (int h = 0; h < H; ++h) {
        const auto& xset = inst.constraints[l].per_class[h];
        const auto& r = sols[h].inputs[s];
        for (auto [q, mu] : xset.members)
          count += r.r[static_cast<std::size_t>(q) * inst.classes[h].graph->n_modes + mu];
      }
      if (count > inst.constraints[l].bound + relax + tol)
        fail("prefix count " + std::to_string(l) + " violated at s=" + std::to_string(s));
    }

  // suffix joint counts (exact when the lcm fits, else the conservative bound)
  for (std::size_t l = 0; l < inst.constraints.size(); ++l) {
    std::vector<Assignment> tagged;
    std::vector<const DiscreteCountingSet*> sets;
    for (int h = 0; h < H; ++h)
      for (const auto& a : sols[h].assignments) {
        tagged.push_back(a);
        sets.push_back(&inst.constraints[l].per_class[h]);
      }
    // evaluate per-class sets by remapping each cycle count separately
    long long K = 1;
    bool overflow = false;
    for (const auto& a : tagged) {
      long long len = a.cycle.size();
      K = K / llgcd(K, len) * len;
      if (K > inst.lcm_cap) {
        overflow = true;
        break;
      }
    }
    double worst = 0;
    if (!overflow) {
      for (long long s = 0; s < K; ++s) {
        double acc = 0;
        for (std::size_t j = 0; j < tagged.size(); ++j)
          acc += x_count(tagged[j].cycle, tagged[j].alpha, s, *sets[j]);
        worst = std::max(worst, acc);
      }
    } else {
      // conservative: per length class, max over its own shifts
      std::map<int, std::vector<std::size_t>> members;
      for (std::size_t j = 0; j < tagged.size(); ++j)
        members[tagged[j].cycle.size()].push_back(j);
      for (auto& [len, idxs] : members) {
        double grp = 0;
        for (int s = 0; s < len; ++s) {
          double acc = 0;
          for (auto j : idxs) acc += x_count(tagged[j].cycle, tagged[j].alpha, s, *sets[j]);
          grp = std::max(grp, acc);
        }
        worst += grp;
      }
    }
    if (worst > inst.constraints[l].bound + relax + tol)
      fail("suffix joint count " + std::to_string(l) + " violated");
  }
  return rep;
}

/// Divisor scaling of Sec. V-D: divides w(0) and every bound by S; solutions
/// scale back by multiplying r, w, alpha with the same S.
inline ProblemInstance scale_instance(const ProblemInstance& inst, long long S) {
  if (S < 1) throw std::invalid_argument("scale_instance: S must be >= 1");
  ProblemInstance scaled = inst;
  auto divides = [&](double v) {
    double q = v / static_cast<double>(S);
    return std::abs(q - std::llround(q)) < 1e-9;
  };
  for (double v : inst.initial.w)
    if (!divides(v)) throw std::invalid_argument("scale_instance: S does not divide w(0)");
  for (const auto& c : inst.constraints)
    if (!divides(c.bound)) throw std::invalid_argument("scale_instance: S does not divide R");
  for (auto& v : scaled.initial.w) v /= static_cast<double>(S);
  for (auto& c : scaled.constraints) c.bound /= static_cast<double>(S);
  scaled.scale = inst.scale * static_cast<double>(S);
  return scaled;
}

/// Scales a solution of the reduced instance back to the original.
inline PrefixSuffixSolution unscale_solution(const PrefixSuffixSolution& sol, long long S) {
  PrefixSuffixSolution out = sol;
  for (auto& r : out.inputs)
    for (auto& v : r.r) v *= static_cast<double>(S);
  for (auto& w : out.states)
    for (auto& v : w.w) v *= static_cast<double>(S);
  for (auto& a : out.assignments)
    for (auto& v : a.alpha) v *= static_cast<double>(S);
  return out;
}

struct CompletenessReport {
  double prefix_horizon = 0;     // binom(|Q|+N-1, N)
  double max_cycle_length = 0;   // |Q| * binom(|Q|+N-1, N)
  double relaxed_horizon = 0;    // (diam^2+1) N / eps
};

/// Table-I bounds: Thm-5 horizon/cycle bounds and the Thm-6 relaxed horizon.
inline CompletenessReport completeness_bounds(long long n_states, long long n_subsystems,
                                              long long diam, double eps) {
  CompletenessReport rep;
  double binom = 1.0;
  for (long long k = 1; k <= n_subsystems; ++k) {
    binom *= static_cast<double>(n_states - 1 + k) / static_cast<double>(k);
    if (!std::isfinite(binom)) break;
  }
  rep.prefix_horizon = binom;
  rep.max_cycle_length = binom * static_cast<double>(n_states);
  rep.relaxed_horizon =
      eps > 0 ? (static_cast<double>(diam) * diam + 1.0) * n_subsystems / eps
              : std::numeric_limits<double>::infinity();
  return rep;
}

enum class LpOutcome { Feasible, Infeasible, Inconclusive };
enum class Verdict { Solution, NoDiscreteSolution, NoContinuousSolution, Inconclusive };

inline const char* verdict_name(Verdict v) {
  switch (v) {
    case Verdict::Solution: return "solution";
    case Verdict::NoDiscreteSolution: return "no discrete solution";
    case Verdict::NoContinuousSolution: return "no continuous solution";
    default: return "inconclusive (insufficient horizon/cycles)";
  }
}

/// Table-I classification of a solve outcome.
inline Verdict infeasibility_verdict(const ProblemInstance& inst, LpOutcome outcome) {
  if (outcome == LpOutcome::Feasible) return Verdict::Solution;
  if (outcome == LpOutcome::Inconclusive) return Verdict::Inconclusive;

  bool proves_infeasible = false;
  if (inst.integrality == Integrality::Exact) {
    // Thm 5 preconditions: horizon at the completeness bound and a cycle set
    // the caller certifies as exhaustive up to the Table-I length
    auto rep = completeness_bounds(inst.graph->n_nodes,
                                   static_cast<long long>(inst.subsystems()), 0, 1.0);
    proves_infeasible = inst.cycle_set_complete && inst.horizon >= rep.prefix_horizon &&
                        std::isfinite(rep.prefix_horizon);
  } else if (inst.relax_eps > 0) {
    // Thm 6 preconditions: all simple cycles and the relaxed horizon
    try {
      int diam = diameter(*inst.graph);
      auto rep = completeness_bounds(inst.graph->n_nodes,
                                     static_cast<long long>(inst.subsystems()), diam,
                                     inst.relax_eps);
      proves_infeasible = inst.cycle_set_complete && inst.horizon >= rep.relaxed_horizon;
    } catch (const std::exception&) {
      proves_infeasible = false;
    }
  }
  if (!proves_infeasible) return Verdict::Inconclusive;
  return inst.constraints_contracted ? Verdict::NoContinuousSolution
                                     : Verdict::NoDiscreteSolution;
}

}  // namespace countsyn
