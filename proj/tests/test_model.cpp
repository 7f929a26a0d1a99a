#include <catch_amalgamated.hpp>

#include <bit>
#include <sstream>

#include "decompdual/json_io.hpp"
#include "decompdual/lp.hpp"
#include "decompdual/model.hpp"
#include "decompdual/rng.hpp"

using namespace decompdual;

namespace {

Instance twoBlockToy() {
  Instance inst;
  Block b0;
  b0.id = 0;
  b0.nBin = 2;
  b0.nCont = 1;
  b0.c = {-1.0, -1.0};
  b0.d = {-0.5};
  b0.rows.push_back({{{0, 1.0}, {1, 1.0}}, {{0, 1.0}}, 2.0});
  Block b1;
  b1.id = 1;
  b1.nBin = 2;
  b1.nCont = 0;
  b1.c = {-0.25, -0.25};
  b1.rows.push_back({{{0, 2.0}, {1, 1.0}}, {}, 2.0});
  inst.blocks = {b0, b1};
  CouplingEdge e;
  e.blockA = 0;
  e.blockB = 1;
  e.pairs = {{0, 0, 0}, {1, 1, 1}};
  inst.edges = {e};
  inst.meta = InstanceTag::Packing;
  canonicalize(inst);
  return inst;
}

}  // namespace

TEST_CASE("well-formed two-block instance validates cleanly") {
  auto rep = validate_instance(twoBlockToy());
  CAPTURE(rep.violations);
  REQUIRE(rep.ok());
}

TEST_CASE("cycle of edges is flagged as non-forest") {
  Instance inst;
  for (int i = 0; i < 3; ++i) {
    Block b;
    b.id = i;
    b.nBin = 2;
    b.c = {0.0, 0.0};
    inst.blocks.push_back(b);
  }
  inst.edges.push_back({0, 1, {{0, 0, 10}}});
  inst.edges.push_back({1, 2, {{1, 0, 11}}});
  inst.edges.push_back({2, 0, {{1, 1, 12}}});
  canonicalize(inst);
  auto rep = validate_instance(inst);
  bool found = false;
  for (const auto& v : rep.violations) found |= v == "edges not a forest";
  REQUIRE(found);
}

TEST_CASE("coupling a continuous coordinate is a violation") {
  Instance inst = twoBlockToy();
  inst.edges[0].pairs.push_back({2, 0, 7});  // local 2 in block 0 is the y var
  auto rep = validate_instance(inst);
  bool found = false;
  for (const auto& v : rep.violations)
    found |= v.find("coupling on non-binary variable") != std::string::npos;
  REQUIRE(found);
}

TEST_CASE("monomial family sizes") {
  Instance inst;
  Block b0, b1;
  b0.id = 0;
  b1.id = 1;
  b0.nBin = b1.nBin = 3;
  b0.c = b1.c = {0, 0, 0};
  inst.blocks = {b0, b1};
  inst.edges.push_back({0, 1, {{0, 0, 0}, {1, 1, 1}, {2, 2, 2}}});
  canonicalize(inst);

  REQUIRE(build_monomial_family(inst, 1).perEdge[0].size() == 3);
  REQUIRE(build_monomial_family(inst, 2).perEdge[0].size() == 6);
  // k = n: all nonempty subsets, counted against direct enumeration.
  auto fam = build_monomial_family(inst, 3);
  std::size_t expected = 0;
  for (std::uint32_t m = 1; m < 8; ++m) ++expected;
  REQUIRE(fam.perEdge[0].size() == expected);
  REQUIRE(expected == 7);  // 2^3 - 1

  REQUIRE_THROWS_AS(build_monomial_family(inst, 0), std::invalid_argument);
}

TEST_CASE("monomial families are down-closed") {
  Instance inst;
  Block b0, b1;
  b0.id = 0;
  b1.id = 1;
  b0.nBin = b1.nBin = 5;
  b0.c = b1.c = std::vector<double>(5, 0.0);
  inst.blocks = {b0, b1};
  CouplingEdge e{0, 1, {}};
  for (int j = 0; j < 5; ++j) e.pairs.push_back({j, j, j});
  inst.edges = {e};
  canonicalize(inst);
  for (int k = 1; k <= 5; ++k) {
    auto fam = build_monomial_family(inst, k);
    REQUIRE(family_is_down_closed(fam));
    for (auto s : fam.perEdge[0]) REQUIRE(std::popcount(s) <= k);
  }
}

TEST_CASE("recourse augmentation copies restricted rows") {
  Instance inst = twoBlockToy();
  auto out = augment_recourse(inst);
  // Block 0 row restricted to matched coords lands in block 1 and vice versa.
  REQUIRE(out.blocks[0].rows.size() == 2);
  REQUIRE(out.blocks[1].rows.size() == 2);
  const auto& gained = out.blocks[0].rows[1];
  REQUIRE(gained.rhs == 2.0);
  REQUIRE(gained.ax.size() == 2);
  REQUIRE(gained.ay.empty());
}

TEST_CASE("recourse augmentation rejects non-two-block input") {
  Instance inst = twoBlockToy();
  Block b2;
  b2.id = 2;
  b2.nBin = 1;
  b2.c = {-1.0};
  inst.blocks.push_back(b2);
  inst.edges.push_back({1, 2, {{0, 0, 5}}});
  REQUIRE_THROWS_AS(augment_recourse(inst), std::invalid_argument);
}

TEST_CASE("augmented packing pair satisfies relatively complete recourse") {
  SplitMix64 rng(99);
  for (int trial = 0; trial < 20; ++trial) {
    Instance inst;
    int n = 3;
    for (int bi = 0; bi < 2; ++bi) {
      Block b;
      b.id = bi;
      b.nBin = n;
      b.c = {-rng.nextDouble(), -rng.nextDouble(), -rng.nextDouble()};
      int rows = 1 + static_cast<int>(rng.nextBelow(2));
      for (int r = 0; r < rows; ++r) {
        Block::Row row;
        for (int j = 0; j < n; ++j)
          if (rng.nextDouble() < 0.7) row.ax.emplace_back(j, rng.nextDouble());
        row.rhs = rng.uniform(0.3, 1.5);
        b.rows.push_back(row);
      }
      inst.blocks.push_back(b);
    }
    CouplingEdge e{0, 1, {}};
    for (int j = 0; j < n; ++j) e.pairs.push_back({j, j, j});
    inst.edges = {e};
    inst.meta = InstanceTag::Packing;
    canonicalize(inst);
    auto aug = augment_recourse(inst);

    auto feasible = [&](const Block& b, std::uint32_t mask) {
      for (const auto& row : b.rows) {
        double lhs = 0.0;
        for (auto [j, v] : row.ax) lhs += v * ((mask >> j) & 1);
        if (lhs > row.rhs + 1e-9) return false;
      }
      return true;
    };
    // Every x feasible for one augmented block extends to the other.
    for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
      if (feasible(aug.blocks[0], mask)) REQUIRE(feasible(aug.blocks[1], mask));
      if (feasible(aug.blocks[1], mask)) REQUIRE(feasible(aug.blocks[0], mask));
    }
    // Coupled optimum unchanged: brute force over shared assignments.
    auto coupledOpt = [&](const Instance& i2) {
      double best = kInf;
      for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
        if (!feasible(i2.blocks[0], mask) || !feasible(i2.blocks[1], mask)) continue;
        double v = 0.0;
        for (int j = 0; j < n; ++j)
          if ((mask >> j) & 1) v += i2.blocks[0].c[j] + i2.blocks[1].c[j];
        best = std::min(best, v);
      }
      return best;
    };
    REQUIRE_THAT(coupledOpt(aug), Catch::Matchers::WithinAbs(coupledOpt(inst), 1e-12));
  }
}

TEST_CASE("instance JSON round trip") {
  Instance inst = twoBlockToy();
  auto j = instance_to_json(inst);
  Instance back = instance_from_json(j);
  REQUIRE(back.blocks.size() == 2);
  REQUIRE(back.edges.size() == 1);
  REQUIRE(back.edges[0].pairs.size() == 2);
  REQUIRE(back.meta == InstanceTag::Packing);
  REQUIRE(instance_to_json(back).dump() == j.dump());
}

TEST_CASE("unknown JSON fields are rejected") {
  auto j = instance_to_json(twoBlockToy());
  j["extra"] = 1;
  REQUIRE_THROWS(instance_from_json(j));
  auto j2 = instance_to_json(twoBlockToy());
  j2["blocks"][0]["bogus"] = true;
  REQUIRE_THROWS(instance_from_json(j2));
}
