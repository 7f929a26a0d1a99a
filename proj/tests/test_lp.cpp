#include <catch_amalgamated.hpp>

#include "decompdual/lp.hpp"
#include "decompdual/rng.hpp"
#include "oracles.hpp"

using namespace decompdual;

TEST_CASE("single variable box") {
  LPProblem p;
  p.addVar(-1.0, 0.0, 1.0);
  auto s = solve_lp(p);
  REQUIRE(s.status == LPStatus::Optimal);
  REQUIRE_THAT(s.value, Catch::Matchers::WithinAbs(-1.0, 1e-12));
  REQUIRE_THAT(s.x[0], Catch::Matchers::WithinAbs(1.0, 1e-12));
}

TEST_CASE("simplex face") {
  LPProblem p;
  p.addVar(-1.0, 0.0, 1.0);
  p.addVar(-1.0, 0.0, 1.0);
  p.addRow({{0, 1.0}, {1, 1.0}}, RowSense::LE, 1.0);
  auto s = solve_lp(p);
  REQUIRE(s.status == LPStatus::Optimal);
  REQUIRE_THAT(s.value, Catch::Matchers::WithinAbs(-1.0, 1e-12));
}

TEST_CASE("equality row") {
  LPProblem p;
  p.addVar(1.0, 0.0, 10.0);
  p.addVar(2.0, 0.0, 10.0);
  p.addRow({{0, 1.0}, {1, 1.0}}, RowSense::EQ, 3.0);
  auto s = solve_lp(p);
  REQUIRE(s.status == LPStatus::Optimal);
  REQUIRE_THAT(s.value, Catch::Matchers::WithinAbs(3.0, 1e-10));
  REQUIRE_THAT(s.x[0], Catch::Matchers::WithinAbs(3.0, 1e-10));
}

TEST_CASE("infeasible") {
  LPProblem p;
  p.addVar(0.0, 0.0, 1.0);
  p.addRow({{0, 1.0}}, RowSense::EQ, 2.0);
  auto s = solve_lp(p);
  REQUIRE(s.status == LPStatus::Infeasible);
}

TEST_CASE("unbounded") {
  LPProblem p;
  p.addVar(-1.0, 0.0, kInf);
  auto s = solve_lp(p);
  REQUIRE(s.status == LPStatus::Unbounded);
}

TEST_CASE("free variables") {
  // min |lambda|-style epigraph: min t s.t. t >= lambda, t >= -lambda.
  LPProblem p;
  int lam = p.addVar(0.0, -kInf, kInf);
  int t = p.addVar(1.0, -kInf, kInf);
  p.addRow({{lam, 1.0}, {t, -1.0}}, RowSense::LE, 0.0);
  p.addRow({{lam, -1.0}, {t, -1.0}}, RowSense::LE, 0.0);
  auto s = solve_lp(p);
  REQUIRE(s.status == LPStatus::Optimal);
  REQUIRE_THAT(s.value, Catch::Matchers::WithinAbs(0.0, 1e-10));
}

TEST_CASE("free variable with shifted optimum") {
  // min t s.t. t >= (lam - 3), t >= (3 - lam), floor t >= -10
  LPProblem p;
  int lam = p.addVar(0.0, -kInf, kInf);
  int t = p.addVar(1.0, -10.0, kInf);
  p.addRow({{lam, 1.0}, {t, -1.0}}, RowSense::LE, 3.0);
  p.addRow({{lam, -1.0}, {t, -1.0}}, RowSense::LE, -3.0);
  auto s = solve_lp(p);
  REQUIRE(s.status == LPStatus::Optimal);
  REQUIRE_THAT(s.value, Catch::Matchers::WithinAbs(0.0, 1e-10));
  REQUIRE_THAT(s.x[lam], Catch::Matchers::WithinAbs(3.0, 1e-9));
}

static LPProblem randomLP(SplitMix64& rng, int n, int m, bool withEq) {
  LPProblem p;
  for (int j = 0; j < n; ++j)
    p.addVar(rng.uniform(-1.0, 1.0), 0.0, rng.nextBelow(2) ? 1.0 : 2.0);
  for (int i = 0; i < m; ++i) {
    std::vector<std::pair<int, double>> a;
    for (int j = 0; j < n; ++j)
      if (rng.nextDouble() < 0.6) a.emplace_back(j, rng.uniform(-1.0, 1.0));
    if (a.empty()) a.emplace_back(static_cast<int>(rng.nextBelow(n)), 1.0);
    RowSense s = withEq && rng.nextDouble() < 0.25 ? RowSense::EQ : RowSense::LE;
    p.addRow(std::move(a), s, rng.uniform(-0.5, 2.0));
  }
  return p;
}

TEST_CASE("random LPs match basic-solution enumeration") {
  SplitMix64 rng(20240601);
  int feasCount = 0, infeasCount = 0;
  for (int trial = 0; trial < 200; ++trial) {
    LPProblem p = randomLP(rng, 8, 5, trial % 2 == 1);
    auto oracle = ddtest::enumerate_lp(p);
    auto s = solve_lp(p);
    INFO("trial " << trial);
    if (oracle.feasible) {
      ++feasCount;
      REQUIRE(s.status == LPStatus::Optimal);
      REQUIRE_THAT(s.value, Catch::Matchers::WithinAbs(oracle.value, 1e-9));
    } else {
      ++infeasCount;
      REQUIRE(s.status == LPStatus::Infeasible);
    }
  }
  // Make sure the suite exercised both outcomes.
  REQUIRE(feasCount > 50);
  REQUIRE(infeasCount > 5);
}

TEST_CASE("warm start reproduces cold-start optimum under bound changes") {
  SplitMix64 rng(77);
  for (int trial = 0; trial < 50; ++trial) {
    LPProblem p = randomLP(rng, 8, 5, false);
    auto first = solve_lp(p);
    if (first.status != LPStatus::Optimal) continue;
    // Tighten a variable the way branch-and-bound does.
    int j = static_cast<int>(rng.nextBelow(8));
    p.lo[j] = p.hi[j] = rng.nextBelow(2) ? p.hi[j] : 0.0;
    auto cold = solve_lp(p);
    auto warmed = solve_lp(p, &first.basis);
    REQUIRE(cold.status == warmed.status);
    if (cold.status == LPStatus::Optimal)
      REQUIRE_THAT(warmed.value, Catch::Matchers::WithinAbs(cold.value, 1e-8));
  }
}

TEST_CASE("degenerate LP still terminates") {
  // Many redundant rows through the same vertex.
  LPProblem p;
  p.addVar(-1.0, 0.0, 1.0);
  p.addVar(-1.0, 0.0, 1.0);
  for (int i = 0; i < 12; ++i) p.addRow({{0, 1.0}, {1, 1.0}}, RowSense::LE, 1.0);
  p.addRow({{0, 1.0}}, RowSense::LE, 1.0);
  p.addRow({{1, 1.0}}, RowSense::LE, 1.0);
  auto s = solve_lp(p);
  REQUIRE(s.status == LPStatus::Optimal);
  REQUIRE_THAT(s.value, Catch::Matchers::WithinAbs(-1.0, 1e-10));
}

TEST_CASE("stress: equality-heavy and degenerate LPs match enumeration") {
  SplitMix64 rng(909090);
  int feas = 0;
  for (int trial = 0; trial < 150; ++trial) {
    LPProblem p;
    int n = 6 + static_cast<int>(rng.nextBelow(3));
    for (int j = 0; j < n; ++j)
      p.addVar(rng.uniform(-1.0, 1.0), 0.0, 1.0 + rng.nextBelow(2));
    int m = 4 + static_cast<int>(rng.nextBelow(3));
    for (int i = 0; i < m; ++i) {
      std::vector<std::pair<int, double>> a;
      for (int j = 0; j < n; ++j)
        if (rng.nextDouble() < 0.5) a.emplace_back(j, rng.uniform(-1.0, 1.0));
      if (a.empty()) a.emplace_back(0, 1.0);
      RowSense s = rng.nextDouble() < 0.4 ? RowSense::EQ : RowSense::LE;
      double rhs = rng.uniform(-0.4, 1.6);
      p.addRow(a, s, rhs);
      // Deliberate degeneracy: sometimes duplicate the row verbatim.
      if (rng.nextDouble() < 0.25) p.addRow(a, s, rhs);
    }
    auto oracle = ddtest::enumerate_lp(p);
    auto sol = solve_lp(p);
    INFO("trial " << trial);
    if (oracle.feasible) {
      ++feas;
      REQUIRE(sol.status == LPStatus::Optimal);
      REQUIRE_THAT(sol.value, Catch::Matchers::WithinAbs(oracle.value, 1e-8));
    } else {
      REQUIRE(sol.status == LPStatus::Infeasible);
    }
  }
  REQUIRE(feas > 20);
}
