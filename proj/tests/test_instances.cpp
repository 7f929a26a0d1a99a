#include <catch_amalgamated.hpp>

#include "decompdual/instances.hpp"
#include "decompdual/json_io.hpp"
#include "decompdual/verify.hpp"

using namespace decompdual;

TEST_CASE("edge-free star stable set has the obvious optimum") {
  GenConfig cfg;
  cfg.blocks = 2;
  cfg.nodesPerBlock = 4;
  cfg.sharedVars = 2;
  cfg.densityLo = 0.01;  // floor(d*6) = 0 edges
  cfg.densityHi = 0.02;
  cfg.seed = 5;
  auto inst = gen_stab(cfg);
  for (const auto& b : inst.blocks) REQUIRE(b.rows.empty());
  BlockSolver solver(inst);
  REQUIRE_THAT(brute_force_opt(solver).value,
               Catch::Matchers::WithinAbs(-8.0, 1e-12));
}

TEST_CASE("path stable set validates and has a finite optimum") {
  GenConfig cfg;
  cfg.blocks = 3;
  cfg.nodesPerBlock = 6;
  cfg.sharedVars = 2;
  cfg.topology = GenConfig::Topology::Path;
  cfg.seed = 11;
  auto inst = gen_stab(cfg);
  auto rep = validate_instance(inst);
  CAPTURE(rep.violations);
  REQUIRE(rep.ok());
  REQUIRE(is_packing(inst));
  BlockSolver solver(inst);
  auto bf = brute_force_opt(solver);
  REQUIRE(bf.feasible);
  REQUIRE(std::isfinite(bf.value));
}

TEST_CASE("fixed seed reproduces byte-identical JSON") {
  GenConfig cfg;
  cfg.seed = 42;
  cfg.blocks = 3;
  cfg.nodesPerBlock = 8;
  cfg.sharedVars = 3;
  auto a = instance_to_json(gen_stab(cfg)).dump();
  auto b = instance_to_json(gen_stab(cfg)).dump();
  REQUIRE(a == b);
}

TEST_CASE("generated packing instances satisfy their contract") {
  for (int seed = 0; seed < 20; ++seed) {
    auto inst = gen_random_packing(2, 3, 1, seed);
    auto rep = validate_instance(inst);
    CAPTURE(seed, rep.violations);
    REQUIRE(rep.ok());
    REQUIRE(is_packing(inst));
    REQUIRE(inst.meta == InstanceTag::Packing);
    // Recourse: every block-feasible shared assignment extends everywhere.
    BlockSolver solver(inst);
    const auto& bc = solver.coupling();
    for (std::uint64_t key = 0; key < (1ull << 3); ++key) {
      std::vector<char> feas(2);
      for (int i = 0; i < 2; ++i) {
        SubproblemQuery q;
        q.blockIdx = i;
        q.xCost = inst.blocks[i].c;
        q.yCost = inst.blocks[i].d;
        q.fixedVertex = key;
        feas[i] = solver.solveMip(q).status == SubproblemResult::Status::Optimal;
      }
      REQUIRE(feas[0] == feas[1]);
    }
  }
}

TEST_CASE("generated covering instances are feasible with the right signs") {
  for (int seed = 0; seed < 100; ++seed) {
    auto inst = gen_random_covering(2 + seed % 2, 3, 1, seed);
    REQUIRE(is_covering(inst));
    REQUIRE(inst.meta == InstanceTag::Covering);
    BlockSolver solver(inst);
    auto bf = brute_force_opt(solver);
    CAPTURE(seed);
    REQUIRE(bf.feasible);
  }
}

TEST_CASE("every generated instance passes validation") {
  for (int seed = 0; seed < 10; ++seed) {
    REQUIRE(validate_instance(gen_random_packing(3, 3, 1, seed)).ok());
    REQUIRE(validate_instance(gen_random_covering(3, 3, 1, seed)).ok());
    GenConfig cfg;
    cfg.seed = seed;
    REQUIRE(validate_instance(gen_stab(cfg)).ok());
  }
}

TEST_CASE("canned values match brute force") {
  auto p3 = canned("prop3-epsilon(5,0.02)");
  BlockSolver s3(p3.inst);
  REQUIRE_THAT(brute_force_opt(s3).value,
               Catch::Matchers::WithinAbs(p3.known["opt"], 1e-12));

  auto ts = canned("two-stage(3,3)");
  BlockSolver sts(ts.inst);
  auto bf = brute_force_opt(sts);
  REQUIRE(bf.feasible);
  REQUIRE(is_packing(ts.inst));

  REQUIRE_THROWS_AS(canned("no-such-instance"), std::invalid_argument);
}
