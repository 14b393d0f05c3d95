#include <catch2/catch_amalgamated.hpp>

#include <algorithm>

#include "countsyn/solver.hpp"
#include "countsyn/synthesis.hpp"
#include "test_models.hpp"

using namespace countsyn;

namespace {

ProblemInstance ring_instance(const LabeledDigraph& ring, int horizon) {
  ProblemInstance inst;
  inst.graph = &ring;
  inst.initial.w.assign(ring.n_nodes, 1.0);
  inst.horizon = horizon;
  inst.cycles = enumerate_simple_cycles(ring, ring.n_nodes);
  return inst;
}

}  // namespace

TEST_CASE("aggregate_initial counts occupancies", "[synthesis]") {
  auto w = aggregate_initial({2}, 4);
  CHECK(w.w == Vec{0, 0, 1, 0});

  auto all_one = aggregate_initial({1, 1, 1, 1, 1}, 3);
  CHECK(all_one.w == Vec{0, 5, 0});

  std::vector<int> xs{0, 2, 2, 1, 0, 2};
  auto a = aggregate_initial(xs, 3);
  std::reverse(xs.begin(), xs.end());
  auto b = aggregate_initial(xs, 3);
  CHECK(a.w == b.w);  // permutation symmetry

  CHECK_THROWS_AS(aggregate_initial({3}, 3), std::invalid_argument);
}

TEST_CASE("T = 0 instance reduces to connection rows", "[synthesis]") {
  auto ring = ring_graph(3);
  ProblemInstance inst = ring_instance(ring, 0);
  inst.initial.w = {3, 0, 0};
  auto built = build_lp(inst);
  // only 17c rows, one per node
  REQUIRE(built.lp.rows.size() == 3);
  for (const auto& row : built.lp.rows) CHECK(row.name.rfind("R17c", 0) == 0);

  // mass on the cycle: feasible, alpha pinned to the histogram
  auto res = solve_lp(built.lp);
  REQUIRE(res.status == SolveResult::Status::Feasible);
  CHECK(res.point[0] == Catch::Approx(3.0));

  // mass off every cycle: infeasible
  LabeledDigraph chain(3, 1);
  chain.add_edge(0, 0, 1);
  chain.add_edge(1, 0, 2);
  chain.add_edge(2, 0, 2);  // self-loop sink
  ProblemInstance off;
  off.graph = &chain;
  off.initial.w = {1, 0, 0};
  off.horizon = 0;
  Cycle sink;
  sink.entries = {{2, 0}};
  off.cycles = {sink};
  auto built_off = build_lp(off);
  CHECK(solve_lp(built_off.lp).status == SolveResult::Status::Infeasible);
}

TEST_CASE("variable and row counts follow the size formulas", "[synthesis]") {
  auto g = twocycle_graph();
  ProblemInstance inst;
  inst.graph = &g;
  inst.initial.w = {2, 1, 0, 0, 3};
  inst.horizon = 4;
  inst.cycles = enumerate_simple_cycles(g, 5);
  inst.constraints = {DiscreteCountingSet::mode_only(5, {0}, 4.0),
                      DiscreteCountingSet::product({0, 2}, {0, 1}, 5.0)};
  auto built = build_lp(inst);

  const int T = 4, Q = 5, U = 2, L = 2;
  int sum_cycle_len = 0;
  for (const auto& c : inst.cycles) sum_cycle_len += c.size();
  // alpha + r + w blocks (plus any z auxiliaries for multi-group suffixes)
  int z_vars = 0;
  for (const auto& name : built.lp.var_names) z_vars += name.rfind("C_z", 0) == 0 ? 1 : 0;
  CHECK(built.lp.n_vars() == sum_cycle_len + T * Q * U + T * Q + z_vars);

  // rows: 17a (T*L) + 17b (lcm(2,4)=4 rows per l) + 17c (Q) + 17d (T*Q) + 17e (T*Q)
  std::map<std::string, int> by_family;
  for (const auto& row : built.lp.rows) by_family[row.name.substr(0, 4)]++;
  CHECK(by_family["R17a"] == T * L);
  CHECK(by_family["R17b"] == L * 4);
  CHECK(by_family["R17c"] == Q);
  CHECK(by_family["R17d"] == T * Q);
  CHECK(by_family["R17e"] == T * Q);
  CHECK(z_vars == 0);  // lengths 2 and 4 share a prime: one group, no auxiliaries
}

TEST_CASE("suffix rows split across co-prime groups with auxiliaries", "[synthesis]") {
  // two disjoint rings of co-prime lengths 2 and 3 in one graph
  LabeledDigraph g(5, 1);
  g.add_edge(0, 0, 1);
  g.add_edge(1, 0, 0);
  g.add_edge(2, 0, 3);
  g.add_edge(3, 0, 4);
  g.add_edge(4, 0, 2);
  ProblemInstance inst;
  inst.graph = &g;
  inst.initial.w = {1, 1, 1, 1, 1};
  inst.horizon = 0;
  inst.cycles = enumerate_simple_cycles(g, 5);
  REQUIRE(inst.cycles.size() == 2);
  inst.constraints = {DiscreteCountingSet::product({0, 2}, {0}, 2.0)};
  auto built = build_lp(inst);

  int z_vars = 0;
  for (const auto& name : built.lp.var_names) z_vars += name.rfind("C_z", 0) == 0 ? 1 : 0;
  CHECK(z_vars == 2);
  std::map<std::string, int> by_family;
  for (const auto& row : built.lp.rows) by_family[row.name.substr(0, 4)]++;
  CHECK(by_family["R17b"] == 2 + 3 + 1);  // group rows plus the combiner

  auto res = solve_ilp(built.lp);
  REQUIRE(res.status == SolveResult::Status::Feasible);
  MultiInstance mi{{{inst.graph, inst.initial, inst.cycles}},
                   {{{inst.constraints[0]}, 2.0}},
                   0};
  auto sols = extract_solution(mi, built, res.point);
  CHECK(check_solution(mi, sols).ok);
  CHECK(joint_maxcnt(sols[0].assignments, inst.constraints[0]) <= 2.0 + 1e-9);
}

TEST_CASE("relaxation widens every counting bound", "[synthesis]") {
  auto ring = ring_graph(4);
  ProblemInstance inst = ring_instance(ring, 2);
  inst.constraints = {DiscreteCountingSet::product({0}, {0}, 1.0)};
  inst.integrality = Integrality::Relaxed;
  inst.relax_eps = 0.5;
  auto built = build_lp(inst);
  for (const auto& row : built.lp.rows)
    if (row.name.rfind("R17a", 0) == 0 || row.name.rfind("R17b", 0) == 0)
      CHECK(row.rhs == Catch::Approx(1.5));
  for (char flag : built.lp.integer) CHECK(flag == 0);
}

TEST_CASE("two identical half-mass classes behave like one class", "[synthesis]") {
  auto ring = ring_graph(4);
  auto cycles = enumerate_simple_cycles(ring, 4);

  ProblemInstance single = ring_instance(ring, 2);
  single.initial.w = {4, 2, 0, 2};
  single.constraints = {DiscreteCountingSet::product({1}, {0}, 4.0)};
  auto single_built = build_lp(single);
  auto single_res = solve_ilp(single_built.lp);
  REQUIRE(single_res.status == SolveResult::Status::Feasible);

  MultiInstance twin;
  for (int h = 0; h < 2; ++h) {
    ClassProblem cp;
    cp.graph = &ring;
    cp.initial.w = {2, 1, 0, 1};
    cp.cycles = cycles;
    twin.classes.push_back(cp);
  }
  JointConstraint joint;
  joint.per_class = {DiscreteCountingSet::product({1}, {0}, 0.0),
                     DiscreteCountingSet::product({1}, {0}, 0.0)};
  joint.bound = 4.0;
  twin.constraints = {joint};
  twin.horizon = 2;
  auto twin_built = build_multiclass(twin);
  auto twin_res = solve_ilp(twin_built.lp);
  REQUIRE(twin_res.status == SolveResult::Status::Feasible);

  auto sols = extract_solution(twin, twin_built, twin_res.point);
  CHECK(check_solution(twin, sols).ok);
}

TEST_CASE("multi-class coupling constraint is enforced across classes", "[synthesis]") {
  // class 0 on a 2-ring, class 1 on a 3-ring; joint cap on two marked nodes
  LabeledDigraph r2 = ring_graph(2);
  LabeledDigraph r3 = ring_graph(3);
  MultiInstance mi;
  mi.horizon = 1;
  {
    ClassProblem cp;
    cp.graph = &r2;
    cp.initial.w = {2, 0};
    cp.cycles = enumerate_simple_cycles(r2, 2);
    mi.classes.push_back(cp);
  }
  {
    ClassProblem cp;
    cp.graph = &r3;
    cp.initial.w = {0, 3, 0};
    cp.cycles = enumerate_simple_cycles(r3, 3);
    mi.classes.push_back(cp);
  }
  JointConstraint joint;
  joint.per_class = {DiscreteCountingSet::product({0}, {0}, 0.0),
                     DiscreteCountingSet::product({0}, {0}, 0.0)};
  // co-prime ring lengths make the joint count exactly 2 + 3 by additivity,
  // so a bound of 4 must fail and a bound of 5 must pass
  joint.bound = 4.0;
  mi.constraints = {joint};
  CHECK(solve_ilp(build_multiclass(mi).lp).status == SolveResult::Status::Infeasible);

  mi.constraints[0].bound = 5.0;
  auto built = build_multiclass(mi);
  auto res = solve_ilp(built.lp);
  REQUIRE(res.status == SolveResult::Status::Feasible);
  auto sols = extract_solution(mi, built, res.point);
  auto rep = check_solution(mi, sols);
  CHECK(rep.ok);

  // and the joint count really is the sum of the two class counts
  double worst = 0;
  for (int s = 0; s < 6; ++s) {
    double acc = x_count(sols[0].assignments[0].cycle, sols[0].assignments[0].alpha, s,
                         joint.per_class[0]) +
                 x_count(sols[1].assignments[0].cycle, sols[1].assignments[0].alpha, s,
                         joint.per_class[1]);
    worst = std::max(worst, acc);
  }
  CHECK(worst == Catch::Approx(5.0));
}

TEST_CASE("mismatched class horizons are rejected", "[synthesis]") {
  // horizons are shared by construction in MultiInstance; the guard that
  // matters is constraint arity
  auto ring = ring_graph(2);
  MultiInstance mi;
  ClassProblem cp;
  cp.graph = &ring;
  cp.initial.w = {1, 0};
  mi.classes.push_back(cp);
  JointConstraint joint;
  joint.per_class = {};  // wrong arity
  joint.bound = 1.0;
  mi.constraints = {joint};
  CHECK_THROWS_AS(build_multiclass(mi), std::invalid_argument);
}

TEST_CASE("scale_instance divides data and solutions scale back", "[synthesis]") {
  auto ring = ring_graph(2);
  ProblemInstance inst;
  inst.graph = &ring;
  inst.initial.w = {10, 20};
  inst.horizon = 2;
  inst.cycles = enumerate_simple_cycles(ring, 2);
  inst.constraints = {DiscreteCountingSet::product({0}, {0}, 30.0)};

  CHECK_THROWS_AS(scale_instance(inst, 4), std::invalid_argument);

  auto same = scale_instance(inst, 1);
  CHECK(same.initial.w == inst.initial.w);

  auto scaled = scale_instance(inst, 10);
  CHECK(scaled.initial.w == Vec{1, 2});
  CHECK(scaled.constraints[0].bound == Catch::Approx(3.0));
  CHECK(scaled.scale == Catch::Approx(10.0));

  auto built_small = build_lp(scaled);
  auto built_big = build_lp(inst);
  CHECK(built_small.lp.n_vars() == built_big.lp.n_vars());
  CHECK(built_small.lp.rows.size() == built_big.lp.rows.size());

  auto res = solve_ilp(built_small.lp);
  REQUIRE(res.status == SolveResult::Status::Feasible);
  MultiInstance mi_small{{{scaled.graph, scaled.initial, scaled.cycles}},
                         {{{scaled.constraints[0]}, scaled.constraints[0].bound}},
                         scaled.horizon};
  auto sols = extract_solution(mi_small, built_small, res.point);
  auto back = unscale_solution(sols[0], 10);
  MultiInstance mi_big{{{inst.graph, inst.initial, inst.cycles}},
                       {{{inst.constraints[0]}, inst.constraints[0].bound}},
                       inst.horizon};
  CHECK(check_solution(mi_big, {back}).ok);
}

TEST_CASE("completeness bounds evaluate the closed forms", "[synthesis]") {
  auto rep = completeness_bounds(3, 2, 0, 1.0);
  CHECK(rep.prefix_horizon == Catch::Approx(6.0));
  CHECK(rep.max_cycle_length == Catch::Approx(18.0));

  auto unit = completeness_bounds(7, 1, 0, 1.0);
  CHECK(unit.prefix_horizon == Catch::Approx(7.0));

  auto relaxed = completeness_bounds(5, 12, 4, 1.0);
  CHECK(relaxed.relaxed_horizon == Catch::Approx(204.0));
}

TEST_CASE("verdicts follow the inference table", "[synthesis]") {
  LabeledDigraph g(1, 1);
  g.add_edge(0, 0, 0);
  ProblemInstance inst;
  inst.graph = &g;
  inst.initial.w = {1};
  inst.horizon = 1;
  Cycle loop;
  loop.entries = {{0, 0}};
  inst.cycles = {loop};
  inst.constraints = {DiscreteCountingSet::product({0}, {0}, 0.0)};

  CHECK(infeasibility_verdict(inst, LpOutcome::Feasible) == Verdict::Solution);
  CHECK(infeasibility_verdict(inst, LpOutcome::Inconclusive) == Verdict::Inconclusive);

  // undersized cycle set: inconclusive even when infeasible
  inst.cycle_set_complete = false;
  CHECK(infeasibility_verdict(inst, LpOutcome::Infeasible) == Verdict::Inconclusive);

  // Table-I preconditions met: one state, N = 1, horizon 1 >= binom(1,1)
  inst.cycle_set_complete = true;
  CHECK(infeasibility_verdict(inst, LpOutcome::Infeasible) == Verdict::NoDiscreteSolution);

  // and the ILP really is infeasible at any horizon (pruning empties the graph)
  auto built = build_lp(inst);
  CHECK(solve_ilp(built.lp).status == SolveResult::Status::Infeasible);

  inst.constraints_contracted = true;
  CHECK(infeasibility_verdict(inst, LpOutcome::Infeasible) == Verdict::NoContinuousSolution);

  // relaxed route: all simple cycles plus the Thm-6 horizon
  inst.constraints_contracted = false;
  inst.integrality = Integrality::Relaxed;
  inst.relax_eps = 1.0;
  inst.horizon = 2;  // (diam^2+1) N / eps = 1
  CHECK(infeasibility_verdict(inst, LpOutcome::Infeasible) == Verdict::NoDiscreteSolution);
  inst.relax_eps = 0.0;
  CHECK(infeasibility_verdict(inst, LpOutcome::Infeasible) == Verdict::Inconclusive);
}

TEST_CASE("feasible points replay through the aggregate algebra", "[synthesis]") {
  Rng rng(31337);
  for (int trial = 0; trial < 12; ++trial) {
    int n = rng.uniform_int(3, 6);
    LabeledDigraph g(n, 2);
    for (int i = 0; i < n; ++i) g.add_edge(i, 0, (i + 1) % n);
    g.add_edge(rng.uniform_int(0, n - 1), 1, rng.uniform_int(0, n - 1));
    ProblemInstance inst;
    inst.graph = &g;
    inst.initial.w.assign(n, 0.0);
    for (int u = 0; u < 6; ++u) inst.initial.w[rng.uniform_int(0, n - 1)] += 1;
    inst.horizon = rng.uniform_int(1, 4);
    inst.cycles = enumerate_simple_cycles(g, n);
    inst.constraints = {DiscreteCountingSet::mode_only(n, {0}, 5.0)};
    auto built = build_lp(inst);
    auto res = solve_ilp(built.lp);
    if (res.status != SolveResult::Status::Feasible) continue;
    MultiInstance mi{{{inst.graph, inst.initial, inst.cycles}},
                     {{{inst.constraints[0]}, 5.0}},
                     inst.horizon};
    auto sols = extract_solution(mi, built, res.point);
    CHECK(check_solution(mi, sols).ok);
  }
}
