#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <fstream>

#include "countsyn/solver.hpp"
#include "test_models.hpp"

using namespace countsyn;

namespace {

LinearProgram toy_interval(double lo, double hi, bool integer) {
  LinearProgram lp;
  lp.add_var("x", 0.0, std::numeric_limits<double>::infinity(), integer);
  auto& r1 = lp.add_row("upper", LinearProgram::Sense::LessEq, hi);
  r1.terms = {{0, 1.0}};
  auto& r2 = lp.add_row("lower", LinearProgram::Sense::LessEq, -lo);
  r2.terms = {{0, -1.0}};
  return lp;
}

// exhaustive integer search over [0, box]^n for cross-checking the ILP
bool ilp_oracle(const LinearProgram& lp, int box) {
  int n = lp.n_vars();
  std::vector<long long> x(n, 0);
  for (;;) {
    Vec point(x.begin(), x.end());
    bool ok = true;
    for (int j = 0; j < n && ok; ++j)
      ok = point[j] >= lp.lower[j] - 1e-9 && point[j] <= lp.upper[j] + 1e-9;
    if (ok && validate_point(lp, point, 1e-9)) return true;
    int k = 0;
    while (k < n && ++x[k] > box) x[k++] = 0;
    if (k == n) return false;
  }
}

}  // namespace

TEST_CASE("solve_lp on a pinned interval", "[solver]") {
  LinearProgram lp = toy_interval(0.5, 0.5, false);
  auto res = solve_lp(lp);
  REQUIRE(res.status == SolveResult::Status::Feasible);
  CHECK(res.point[0] == Catch::Approx(0.5).margin(1e-7));
}

TEST_CASE("solve_lp detects empty intervals", "[solver]") {
  LinearProgram lp = toy_interval(0.0, -1.0, false);  // x >= 0, x <= -1
  auto res = solve_lp(lp);
  CHECK(res.status == SolveResult::Status::Infeasible);
}

TEST_CASE("solve_lp is deterministic", "[solver]") {
  Rng rng(7);
  LinearProgram lp;
  for (int j = 0; j < 8; ++j)
    lp.add_var("x" + std::to_string(j), 0.0, 10.0, false);
  for (int i = 0; i < 6; ++i) {
    auto& row = lp.add_row("r" + std::to_string(i),
                           i % 3 == 0 ? LinearProgram::Sense::Eq : LinearProgram::Sense::LessEq,
                           rng.uniform_int(2, 12));
    for (int j = 0; j < 8; ++j)
      if (rng.uniform_int(0, 1)) row.terms.emplace_back(j, rng.uniform_int(1, 3));
    if (row.terms.empty()) row.terms.emplace_back(0, 1.0);
  }
  auto a = solve_lp(lp);
  auto b = solve_lp(lp);
  CHECK(a.status == b.status);
  if (a.status == SolveResult::Status::Feasible) {
    CHECK(a.point == b.point);
    CHECK(a.stats.iterations == b.stats.iterations);
  }
}

TEST_CASE("solve_ilp on unit intervals", "[solver]") {
  auto narrow = toy_interval(0.4, 0.6, true);
  CHECK(solve_ilp(narrow).status == SolveResult::Status::Infeasible);

  auto wide = toy_interval(0.4, 1.6, true);
  auto res = solve_ilp(wide);
  REQUIRE(res.status == SolveResult::Status::Feasible);
  CHECK(res.point[0] == Catch::Approx(1.0));
}

TEST_CASE("prefix LP of the one-node two-mode toy", "[solver]") {
  // one self-loop node under two modes, N = 10, R = 4 on (q, mu0), T = 1
  LabeledDigraph g(1, 2);
  g.add_edge(0, 0, 0);
  g.add_edge(0, 1, 0);
  ProblemInstance inst;
  inst.graph = &g;
  inst.initial.w = {10.0};
  inst.horizon = 1;
  Cycle loop0, loop1;
  loop0.entries = {{0, 0}};
  loop1.entries = {{0, 1}};
  inst.cycles = {loop0, loop1};
  inst.constraints = {DiscreteCountingSet::product({0}, {0}, 4.0)};
  auto built = build_lp(inst);
  auto res = solve_lp(built.lp);
  REQUIRE(res.status == SolveResult::Status::Feasible);
  // hand solution: at most 4 units on mu0, the rest of the 10 on mu1
  double r0 = res.point[built.layout.classes[0].r_first + 0];
  double r1 = res.point[built.layout.classes[0].r_first + 1];
  CHECK(r0 <= 4.0 + 1e-7);
  CHECK(r0 + r1 == Catch::Approx(10.0).margin(1e-7));

  auto ires = solve_ilp(built.lp);
  REQUIRE(ires.status == SolveResult::Status::Feasible);
  MultiInstance mi{{{inst.graph, inst.initial, inst.cycles}},
                   {{{inst.constraints[0]}, 4.0}},
                   inst.horizon};
  auto sols = extract_solution(mi, built, ires.point);
  CHECK(check_solution(mi, sols).ok);
}

TEST_CASE("ring counting ILP finds the uniform suffix", "[solver]") {
  // ring of 3 nodes, N = 3 spread uniformly, R = 1 on one node, T = 3
  auto ring = ring_graph(3);
  ProblemInstance inst;
  inst.graph = &ring;
  inst.initial.w = {1.0, 1.0, 1.0};
  inst.horizon = 3;
  inst.cycles = enumerate_simple_cycles(ring, 3);
  REQUIRE(inst.cycles.size() == 1);
  inst.constraints = {DiscreteCountingSet::product({0}, {0}, 1.0)};
  auto built = build_lp(inst);
  auto res = solve_ilp(built.lp);
  REQUIRE(res.status == SolveResult::Status::Feasible);
  for (int i = 0; i < 3; ++i) CHECK(res.point[i] == Catch::Approx(1.0));
}

TEST_CASE("branch and bound agrees with exhaustive enumeration", "[solver]") {
  Rng rng(4242);
  int disagreements = 0;
  for (int trial = 0; trial < 120; ++trial) {
    LinearProgram lp;
    int n = rng.uniform_int(2, 4);
    for (int j = 0; j < n; ++j) lp.add_var("x" + std::to_string(j), 0.0, 3.0, true);
    int rows = rng.uniform_int(2, 4);
    for (int i = 0; i < rows; ++i) {
      auto& row = lp.add_row("r" + std::to_string(i),
                             rng.uniform_int(0, 3) == 0 ? LinearProgram::Sense::Eq
                                                        : LinearProgram::Sense::LessEq,
                             rng.uniform_int(-2, 8));
      for (int j = 0; j < n; ++j) {
        int c = rng.uniform_int(-2, 3);
        if (c != 0) row.terms.emplace_back(j, static_cast<double>(c));
      }
      if (row.terms.empty()) row.terms.emplace_back(0, 1.0);
    }
    bool expect = ilp_oracle(lp, 3);
    auto res = solve_ilp(lp);
    if (res.status == SolveResult::Status::IterationLimit) continue;
    bool got = res.status == SolveResult::Status::Feasible;
    if (expect != got) ++disagreements;
  }
  CHECK(disagreements == 0);
}

TEST_CASE("feasible results satisfy the raw rows", "[solver]") {
  Rng rng(888);
  for (int trial = 0; trial < 40; ++trial) {
    LinearProgram lp;
    int n = rng.uniform_int(3, 10);
    for (int j = 0; j < n; ++j)
      lp.add_var("x" + std::to_string(j), 0.0,
                 rng.uniform_int(0, 3) ? std::numeric_limits<double>::infinity() : 2.0, false);
    for (int i = 0, rows = rng.uniform_int(2, 6); i < rows; ++i) {
      auto& row = lp.add_row("r" + std::to_string(i),
                             rng.uniform_int(0, 2) ? LinearProgram::Sense::LessEq
                                                   : LinearProgram::Sense::Eq,
                             rng.uniform_int(0, 10));
      for (int j = 0; j < n; ++j)
        if (rng.uniform_int(0, 1)) row.terms.emplace_back(j, rng.uniform_int(1, 4));
      if (row.terms.empty()) row.terms.emplace_back(0, 1.0);
    }
    auto res = solve_lp(lp);
    if (res.status == SolveResult::Status::Feasible) CHECK(validate_point(lp, res.point));
  }
}

TEST_CASE("mps export of an empty program is a valid skeleton", "[solver]") {
  LinearProgram lp;
  std::string path = "empty_test.mps";
  export_mps(lp, path);
  std::ifstream in(path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  REQUIRE(lines.size() == 7);
  CHECK(lines[0].rfind("NAME", 0) == 0);
  CHECK(lines[1] == "ROWS");
  CHECK(lines[2] == " N  COST");
  CHECK(lines[3] == "COLUMNS");
  CHECK(lines[4] == "RHS");
  CHECK(lines[5] == "BOUNDS");
  CHECK(lines[6] == "ENDATA");
  std::remove(path.c_str());
}

TEST_CASE("mps export is deterministic and carries the sections", "[solver]") {
  LinearProgram lp;
  lp.add_var("C_alpha_0_0_0", 0.0, std::numeric_limits<double>::infinity(), true);
  lp.add_var("C_r_0_0_0_0", 0.0, 0.0, true);
  auto& row = lp.add_row("R17a_0_0", LinearProgram::Sense::LessEq, 4.0);
  row.terms = {{0, 1.0}, {1, 2.5}};
  auto& eq = lp.add_row("R17c_0", LinearProgram::Sense::Eq, 1.0);
  eq.terms = {{0, 1.0}};

  std::string path = "toy_test.mps";
  export_mps(lp, path);
  std::ifstream in(path);
  std::stringstream buf;
  buf << in.rdbuf();
  std::string first = buf.str();
  export_mps(lp, path);
  std::ifstream in2(path);
  std::stringstream buf2;
  buf2 << in2.rdbuf();
  CHECK(first == buf2.str());
  CHECK(first.find(" L  R17a_0_0") != std::string::npos);
  CHECK(first.find(" E  R17c_0") != std::string::npos);
  CHECK(first.find("'INTORG'") != std::string::npos);
  CHECK(first.find("'INTEND'") != std::string::npos);
  CHECK(first.find(" FX BND") != std::string::npos);
  std::remove(path.c_str());
}

TEST_CASE("solution import round-trips a solved point", "[solver]") {
  LinearProgram lp = toy_interval(0.25, 0.75, false);
  auto res = solve_lp(lp);
  REQUIRE(res.status == SolveResult::Status::Feasible);

  std::string path = "toy_solution.txt";
  {
    std::ofstream out(path);
    out << "# solver output\n";
    out << "x " << res.point[0] << "\n";
    out << "ghost 3.0\n";
  }
  auto imported = import_solution(lp, path);
  CHECK(imported.status == SolveResult::Status::Feasible);
  CHECK(imported.point[0] == Catch::Approx(res.point[0]));
  CHECK(imported.message.find("unknown") != std::string::npos);

  {
    std::ofstream out(path);
    out << "x 5.0\n";  // violates x <= 0.75
  }
  CHECK(import_solution(lp, path).status == SolveResult::Status::Infeasible);
  std::remove(path.c_str());
}
