#include <catch_amalgamated.hpp>

#include "decompdual/duals.hpp"
#include "decompdual/instances.hpp"
#include "decompdual/rng.hpp"
#include "decompdual/subsolve.hpp"
#include "decompdual/verify.hpp"

using namespace decompdual;

namespace {

DualIterate randomLambda(SplitMix64& rng, const Instance& inst, double span) {
  DualIterate it;
  for (std::size_t ei = 0; ei < inst.edges.size(); ++ei)
    for (std::size_t pi = 0; pi < inst.edges[ei].pairs.size(); ++pi)
      it.setLambda(static_cast<int>(ei), static_cast<int>(pi),
                   rng.uniform(-span, span));
  return it;
}

}  // namespace

TEST_CASE("classical evaluation at zero multipliers decouples") {
  auto g = gen_random_packing(2, 3, 1, 31);
  BlockSolver solver(g);
  DualEvaluator eval(solver);
  auto r = eval.evalClassical(DualIterate{});
  REQUIRE_FALSE(r.infeasible);
  double expect = 0.0;
  for (int i = 0; i < 2; ++i) {
    SubproblemQuery q;
    q.blockIdx = i;
    q.xCost = g.blocks[i].c;
    q.yCost = g.blocks[i].d;
    expect += solver.solveMip(q).value;
  }
  REQUIRE_THAT(r.value, Catch::Matchers::WithinAbs(expect, 1e-9));
}

TEST_CASE("three-block cycle: coupled optimum 1, classical dual 0") {
  auto c = canned("three-block-cycle");
  BlockSolver solver(c.inst);
  auto bf = brute_force_opt(solver);
  REQUIRE(bf.feasible);
  REQUIRE_THAT(bf.value, Catch::Matchers::WithinAbs(1.0, 1e-9));
  auto hull = dual_oracle_hull_lp(c.inst, HullFamily::Classical);
  REQUIRE(hull.status == HullValue::Status::Finite);
  REQUIRE_THAT(hull.value, Catch::Matchers::WithinAbs(0.0, 1e-8));
  // Full per-edge monomial family coincides with the classical dual here
  // (every edge shares a single variable), so the gap persists.
  auto fam = build_monomial_family(c.inst, 1);
  auto hullM = dual_oracle_hull_lp(c.inst, HullFamily::Monomials, &fam);
  REQUIRE_THAT(hullM.value, Catch::Matchers::WithinAbs(0.0, 1e-8));
}

TEST_CASE("weak duality and subgradient validity for the classical dual") {
  SplitMix64 rng(2025);
  for (int trial = 0; trial < 10; ++trial) {
    auto inst = gen_random_packing(2, 3, 1, 100 + trial);
    BlockSolver solver(inst);
    DualEvaluator eval(solver);
    double opt = brute_force_opt(solver).value;
    auto hull = dual_oracle_hull_lp(inst, HullFamily::Classical);
    for (int probe = 0; probe < 10; ++probe) {
      auto it = randomLambda(rng, inst, 1.0);
      auto r = eval.evalClassical(it);
      REQUIRE(r.value <= opt + 1e-7);
      REQUIRE(r.value <= hull.value + 1e-7);
      // Concavity: L(it + delta) <= L(it) + <g, delta>.
      auto delta = randomLambda(rng, inst, 0.3);
      DualIterate moved = it;
      axpy(moved.v, 1.0, delta.v);
      auto r2 = eval.evalClassical(moved);
      REQUIRE(r2.value <= r.value + dot(r.subgrad, delta.v) + 1e-9);
    }
  }
}

TEST_CASE("monomial dual with lambda folded into singletons matches classical") {
  SplitMix64 rng(7);
  auto inst = gen_random_packing(2, 3, 1, 55);
  BlockSolver solver(inst);
  DualEvaluator eval(solver);
  auto fam = build_monomial_family(inst, 2);
  for (int probe = 0; probe < 8; ++probe) {
    auto lam = randomLambda(rng, inst, 0.8);
    DualIterate folded;
    for (const auto& [k, v] : lam.v) {
      REQUIRE(k.kind == DualKey::Kind::Lambda);
      folded.setMuMonomial(k.edge, 1u << k.index, v);
    }
    auto a = eval.evalClassical(lam);
    auto b = eval.evalMonomial(fam, folded);
    REQUIRE_THAT(b.value, Catch::Matchers::WithinAbs(a.value, 1e-9));
  }
}

TEST_CASE("vertex dual with zero penalties equals classical") {
  SplitMix64 rng(8);
  auto inst = gen_random_packing(2, 3, 1, 66);
  BlockSolver solver(inst);
  DualEvaluator eval(solver);
  for (int probe = 0; probe < 5; ++probe) {
    auto lam = randomLambda(rng, inst, 0.8);
    auto a = eval.evalClassical(lam);
    auto b = eval.evalVertex(lam);
    REQUIRE_THAT(b.value, Catch::Matchers::WithinAbs(a.value, 1e-9));
  }
}

TEST_CASE("opposite-cost instance is tight at lambda = eps") {
  auto c = canned("prop3-epsilon(6,0.01)");
  BlockSolver solver(c.inst);
  DualEvaluator eval(solver);
  DualIterate it;
  for (int p = 0; p < 6; ++p) it.setLambda(0, p, 0.01);
  auto r = eval.evalVertex(it);
  REQUIRE_THAT(r.value, Catch::Matchers::WithinAbs(0.0, 1e-12));
  REQUIRE_THAT(brute_force_opt(solver).value, Catch::Matchers::WithinAbs(0.0, 1e-12));
}

TEST_CASE("vertex subgradients stay within the structural norm bound") {
  SplitMix64 rng(9);
  for (int trial = 0; trial < 10; ++trial) {
    auto inst = gen_random_packing(2, 4, 1, 200 + trial);
    BlockSolver solver(inst);
    DualEvaluator eval(solver);
    int n = 4;
    DualIterate it = randomLambda(rng, inst, 0.5);
    for (int s = 0; s < 2; ++s)
      it.setMuVertex(0, rng.nextBelow(1ull << n), rng.uniform(-0.5, 0.5));
    auto r = eval.evalVertex(it);
    REQUIRE(normSq(r.subgrad) <= n + 2 + 1e-12);
    int vertexSupport = 0;
    for (const auto& [k, v] : r.subgrad)
      if (k.kind == DualKey::Kind::Vertex) ++vertexSupport;
    REQUIRE(vertexSupport <= 2);
  }
}

TEST_CASE("V-dual rejects non-star coupling") {
  // A path of three blocks with different shared sets per edge.
  Instance inst;
  for (int i = 0; i < 3; ++i) {
    Block b;
    b.id = i;
    b.nBin = 2;
    b.c = {-1.0, -0.5};
    inst.blocks.push_back(b);
  }
  inst.edges.push_back({0, 1, {{1, 0, 10}}});
  inst.edges.push_back({1, 2, {{1, 0, 20}}});
  canonicalize(inst);
  BlockSolver solver(inst);
  DualEvaluator eval(solver);
  REQUIRE_THROWS_AS(eval.evalVertex(DualIterate{}), std::invalid_argument);
}

TEST_CASE("primal recovery from consistent candidates") {
  auto inst = gen_random_packing(3, 3, 1, 77);
  BlockSolver solver(inst);
  auto bf = brute_force_opt(solver);
  // Feeding an optimal block solution recovers exactly OPT.
  std::vector<PrimalCandidate> cands{{0, bf.blockSolutions[0].x}};
  auto pb = recover_primal_bound(solver, cands);
  REQUIRE(pb.found);
  REQUIRE_THAT(pb.value, Catch::Matchers::WithinAbs(bf.value, 1e-9));
}

TEST_CASE("primal recovery upper-bounds the optimum on random stars") {
  SplitMix64 rng(10);
  for (int trial = 0; trial < 10; ++trial) {
    auto inst = gen_random_packing(3, 3, 1, 300 + trial);
    BlockSolver solver(inst);
    auto bf = brute_force_opt(solver);
    std::vector<PrimalCandidate> cands;
    for (int i = 0; i < 3; ++i) {
      std::vector<double> x(inst.blocks[i].nBin);
      for (auto& v : x) v = rng.nextBelow(2) ? 1.0 : 0.0;
      cands.push_back({i, x});
    }
    auto pb = recover_primal_bound(solver, cands);
    if (pb.found) REQUIRE(pb.value >= bf.value - 1e-9);
  }
}

TEST_CASE("scenario decomposition terminates immediately on consensus") {
  // Two identical blocks whose unconstrained optima already agree.
  Instance inst;
  for (int i = 0; i < 2; ++i) {
    Block b;
    b.id = i;
    b.nBin = 2;
    b.c = {-1.0, -2.0};
    inst.blocks.push_back(b);
  }
  inst.edges.push_back({0, 1, {{0, 0, 0}, {1, 1, 1}}});
  canonicalize(inst);
  BlockSolver solver(inst);
  SDAOptions opts;
  opts.budget = 50;
  auto st = run_sda(solver, opts);
  REQUIRE(st.iterations == 1);
  REQUIRE_THAT(st.UB - st.LB, Catch::Matchers::WithinAbs(0.0, 1e-9));
  REQUIRE_THAT(st.UB, Catch::Matchers::WithinAbs(-6.0, 1e-9));
}

TEST_CASE("scenario decomposition stalls exponentially on the eps instance") {
  auto c = canned("prop3-epsilon(6,0.01)");
  BlockSolver solver(c.inst);
  SDAOptions opts;
  opts.budget = 8;  // 2^{n-3}
  opts.tol = 1e-9;
  auto st = run_sda(solver, opts);
  REQUIRE(st.iterations == 8);
  for (auto [lb, ub] : st.history) REQUIRE(ub - lb >= 2 * 0.01 - 1e-9);
}

TEST_CASE("scenario decomposition reaches the optimum on small instances") {
  for (int trial = 0; trial < 8; ++trial) {
    auto inst = gen_random_packing(2, 3, 1, 400 + trial);
    BlockSolver solver(inst);
    double opt = brute_force_opt(solver).value;
    SDAOptions opts;
    opts.budget = 200;
    auto st = run_sda(solver, opts);
    REQUIRE_THAT(st.UB, Catch::Matchers::WithinAbs(opt, 1e-9));
    REQUIRE(st.LB >= st.UB - 1e-9);
  }
}

TEST_CASE("SDA bound sequences are monotone") {
  auto inst = gen_random_packing(2, 4, 1, 500);
  BlockSolver solver(inst);
  SDAOptions opts;
  opts.budget = 100;
  auto st = run_sda(solver, opts);
  for (std::size_t i = 1; i < st.history.size(); ++i) {
    REQUIRE(st.history[i].first >= st.history[i - 1].first - 1e-12);
    REQUIRE(st.history[i].second <= st.history[i - 1].second + 1e-12);
  }
}

TEST_CASE("parallel evaluation matches sequential") {
  auto inst = gen_random_packing(3, 4, 1, 600);
  BlockSolver solver(inst);
  DualEvaluator seq(solver, 1);
  DualEvaluator par(solver, 3);
  SplitMix64 rng(11);
  for (int probe = 0; probe < 5; ++probe) {
    auto it = randomLambda(rng, inst, 1.0);
    auto a = seq.evalClassical(it);
    auto b = par.evalClassical(it);
    REQUIRE_THAT(b.value, Catch::Matchers::WithinAbs(a.value, 0.0));
    REQUIRE(a.subgrad == b.subgrad);
  }
}

TEST_CASE("scenario decomposition with subgradient steps still finds the optimum") {
  for (int trial = 0; trial < 6; ++trial) {
    auto inst = gen_random_packing(2, 3, 1, 700 + trial);
    BlockSolver solver(inst);
    double opt = brute_force_opt(solver).value;
    SDAOptions opts;
    opts.policy = SDAOptions::LambdaPolicy::Subgradient;
    opts.budget = 200;
    auto st = run_sda(solver, opts);
    REQUIRE_THAT(st.UB, Catch::Matchers::WithinAbs(opt, 1e-9));
    for (std::size_t i = 1; i < st.history.size(); ++i) {
      REQUIRE(st.history[i].first >= st.history[i - 1].first - 1e-12);
      REQUIRE(st.history[i].second <= st.history[i - 1].second + 1e-12);
    }
  }
}

TEST_CASE("scenario decomposition works on star instances") {
  for (int trial = 0; trial < 4; ++trial) {
    auto inst = gen_random_packing(3, 3, 1, 800 + trial);
    BlockSolver solver(inst);
    double opt = brute_force_opt(solver).value;
    SDAOptions opts;
    opts.budget = 300;
    auto st = run_sda(solver, opts);
    REQUIRE_THAT(st.UB, Catch::Matchers::WithinAbs(opt, 1e-9));
  }
}

TEST_CASE("primal recovery skips candidates infeasible in a neighbour") {
  // Block 1 forbids the all-ones pair that block 0 would pick greedily.
  Instance inst;
  Block b0;
  b0.id = 0;
  b0.nBin = 2;
  b0.c = {-1.0, -1.0};
  Block b1;
  b1.id = 1;
  b1.nBin = 2;
  b1.c = {0.0, 0.0};
  b1.rows.push_back({{{0, 1.0}, {1, 1.0}}, {}, 1.0});
  inst.blocks = {b0, b1};
  inst.edges.push_back({0, 1, {{0, 0, 0}, {1, 1, 1}}});
  canonicalize(inst);
  BlockSolver solver(inst);
  std::vector<PrimalCandidate> cands;
  cands.push_back({0, {1.0, 1.0}});  // infeasible in block 1
  auto none = recover_primal_bound(solver, cands);
  REQUIRE_FALSE(none.found);
  cands.push_back({0, {1.0, 0.0}});
  auto some = recover_primal_bound(solver, cands);
  REQUIRE(some.found);
  REQUIRE_THAT(some.value, Catch::Matchers::WithinAbs(-1.0, 1e-12));
}

TEST_CASE("single-block instances evaluate and brute-force cleanly") {
  Instance inst;
  Block b;
  b.id = 0;
  b.nBin = 3;
  b.nCont = 1;
  b.c = {-1.0, -0.5, -0.25};
  b.d = {-0.125};
  b.rows.push_back({{{0, 1.0}, {1, 1.0}}, {{0, 2.0}}, 1.5});
  inst.blocks = {b};
  canonicalize(inst);
  BlockSolver solver(inst);
  DualEvaluator eval(solver);
  auto r = eval.evalClassical(DualIterate{});
  auto bf = brute_force_opt(solver);
  REQUIRE(bf.feasible);
  REQUIRE_THAT(r.value, Catch::Matchers::WithinAbs(bf.value, 1e-9));
  REQUIRE(r.subgrad.empty());
}
