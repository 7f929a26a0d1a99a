#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "decompdual/model.hpp"
#include "decompdual/rng.hpp"

namespace decompdual {

struct GenConfig {
  int blocks = 4;
  int nodesPerBlock = 20;
  double densityLo = 0.1;
  double densityHi = 0.15;
  int sharedVars = 7;
  enum class Topology { Star, Path };
  Topology topology = Topology::Star;
  std::uint64_t seed = 1;
};

// Maximum-cardinality stable set blocks on random graphs, coupled in a star
// (every block shares its first `sharedVars` nodes with block 0) or a path
// (each block's trailing window is the next block's leading window). Edge
// counts follow floor(d*n*(n-1)/2) with pairs sampled with replacement.
inline Instance gen_stab(const GenConfig& cfg) {
  if (cfg.blocks < 2) throw std::invalid_argument("need at least two blocks");
  if (cfg.sharedVars > cfg.nodesPerBlock)
    throw std::invalid_argument("sharedVars exceeds nodesPerBlock");
  if (cfg.topology == GenConfig::Topology::Path &&
      2 * cfg.sharedVars > cfg.nodesPerBlock)
    throw std::invalid_argument("path coupling needs 2*sharedVars <= nodesPerBlock");
  if (!(cfg.densityLo > 0.0) || cfg.densityLo > cfg.densityHi || cfg.densityHi >= 1.0)
    throw std::invalid_argument("density range must satisfy 0 < lo <= hi < 1");

  SplitMix64 rng(cfg.seed);
  Instance inst;
  const int n = cfg.nodesPerBlock;
  for (int bi = 0; bi < cfg.blocks; ++bi) {
    Block b;
    b.id = bi;
    b.nBin = n;
    b.c.assign(n, -1.0);
    double d = rng.uniform(cfg.densityLo, cfg.densityHi);
    int edgeCount = static_cast<int>(d * n * (n - 1) / 2);
    std::set<std::pair<int, int>> edges;
    for (int t = 0; t < edgeCount; ++t) {
      int u = static_cast<int>(rng.nextBelow(n));
      int v = static_cast<int>(rng.nextBelow(n - 1));
      if (v >= u) ++v;
      edges.insert({std::min(u, v), std::max(u, v)});
    }
    for (auto [u, v] : edges)
      b.rows.push_back({{{u, 1.0}, {v, 1.0}}, {}, 1.0});
    inst.blocks.push_back(std::move(b));
  }
  if (cfg.topology == GenConfig::Topology::Star) {
    for (int bi = 1; bi < cfg.blocks; ++bi) {
      CouplingEdge e{0, bi, {}};
      for (int j = 0; j < cfg.sharedVars; ++j) e.pairs.push_back({j, j, j});
      inst.edges.push_back(std::move(e));
    }
  } else {
    int offset = cfg.nodesPerBlock - cfg.sharedVars;
    for (int bi = 0; bi + 1 < cfg.blocks; ++bi) {
      CouplingEdge e{bi, bi + 1, {}};
      for (int j = 0; j < cfg.sharedVars; ++j)
        e.pairs.push_back({offset + j, j, static_cast<std::int64_t>(bi) * cfg.sharedVars + j});
      inst.edges.push_back(std::move(e));
    }
  }
  inst.meta = InstanceTag::Packing;
  canonicalize(inst);
  return inst;
}

inline Instance gen_random_packing(int nBlocks, int nBin, int nCont,
                                   std::uint64_t seed) {
  SplitMix64 rng(seed);
  Instance inst;
  for (int bi = 0; bi < nBlocks; ++bi) {
    Block b;
    b.id = bi;
    b.nBin = nBin;
    b.nCont = nCont;
    for (int j = 0; j < nBin; ++j) b.c.push_back(-rng.uniform(0.1, 1.0));
    for (int j = 0; j < nCont; ++j) b.d.push_back(-rng.uniform(0.1, 1.0));
    int nRows = 1 + static_cast<int>(rng.nextBelow(2));
    std::vector<char> covered(nCont, 0);
    for (int r = 0; r < nRows; ++r) {
      Block::Row row;
      double sum = 0.0;
      for (int j = 0; j < nBin; ++j)
        if (rng.nextDouble() < 0.7) {
          double v = rng.uniform(0.1, 1.0);
          row.ax.emplace_back(j, v);
          sum += v;
        }
      for (int j = 0; j < nCont; ++j)
        if (rng.nextDouble() < 0.7) {
          double v = rng.uniform(0.2, 1.0);
          row.ay.emplace_back(j, v);
          covered[j] = 1;
          sum += v;
        }
      row.rhs = rng.uniform(0.4, 0.8) * std::max(sum, 1.0);
      b.rows.push_back(std::move(row));
    }
    // A continuous variable outside every row would make the block
    // unbounded; give each one a capacity row.
    for (int j = 0; j < nCont; ++j)
      if (!covered[j]) b.rows.push_back({{}, {{j, 1.0}}, rng.uniform(0.5, 2.0)});
    inst.blocks.push_back(std::move(b));
  }
  for (int bi = 1; bi < nBlocks; ++bi) {
    CouplingEdge e{0, bi, {}};
    for (int j = 0; j < nBin; ++j) e.pairs.push_back({j, j, j});
    inst.edges.push_back(std::move(e));
  }
  inst.meta = InstanceTag::Packing;
  canonicalize(inst);
  // Relatively complete recourse: every block receives every other block's
  // rows restricted to the (fully shared) binaries. Dropping the remaining
  // nonnegative terms only weakens a packing row, so the optimum is
  // unchanged while any block-feasible assignment now extends everywhere.
  std::vector<Block::Row> shared;
  for (const auto& b : inst.blocks)
    for (const auto& row : b.rows) {
      Block::Row nr;
      nr.rhs = row.rhs;
      nr.ax = row.ax;
      if (!nr.ax.empty()) shared.push_back(std::move(nr));
    }
  for (std::size_t bi = 0; bi < inst.blocks.size(); ++bi)
    for (const auto& row : shared) inst.blocks[bi].rows.push_back(row);
  return inst;
}

inline Instance gen_random_covering(int nBlocks, int nBin, int nCont,
                                    std::uint64_t seed) {
  SplitMix64 rng(seed);
  Instance inst;
  for (int bi = 0; bi < nBlocks; ++bi) {
    Block b;
    b.id = bi;
    b.nBin = nBin;
    b.nCont = nCont;
    for (int j = 0; j < nBin; ++j) b.c.push_back(rng.uniform(0.1, 1.0));
    for (int j = 0; j < nCont; ++j) b.d.push_back(rng.uniform(0.1, 1.0));
    int nRows = 1 + static_cast<int>(rng.nextBelow(2));
    for (int r = 0; r < nRows; ++r) {
      Block::Row row;
      double sum = 0.0;
      for (int j = 0; j < nBin; ++j)
        if (rng.nextDouble() < 0.7) {
          double v = -rng.uniform(0.1, 1.0);
          row.ax.emplace_back(j, v);
          sum += v;
        }
      for (int j = 0; j < nCont; ++j)
        if (rng.nextDouble() < 0.5) row.ay.emplace_back(j, -rng.uniform(0.2, 1.0));
      // rhs above the all-ones binary point keeps every block feasible.
      row.rhs = rng.uniform(0.3, 0.9) * sum;
      b.rows.push_back(std::move(row));
    }
    inst.blocks.push_back(std::move(b));
  }
  for (int bi = 1; bi < nBlocks; ++bi) {
    CouplingEdge e{0, bi, {}};
    for (int j = 0; j < nBin; ++j) e.pairs.push_back({j, j, j});
    inst.edges.push_back(std::move(e));
  }
  inst.meta = InstanceTag::Covering;
  canonicalize(inst);
  return inst;
}

struct CannedInstance {
  Instance inst;
  std::map<std::string, double> known;
};

// Exact instances with pinned reference values.
//  - three-block-cycle: three parity blocks whose couplings form an odd
//    cycle; the coupled optimum is 1 while the classical dual sticks at 0.
//  - appendix-d-packing / -covering: the worst-case two-block pairs with
//    OPT -1 / +1 and level-1 monomial duals at -1.25 / 0.75.
//  - prop3-epsilon(n,eps): opposite-sign costs on fully coupled blocks.
//  - two-stage(Z,n): Z identical packing scenarios sharing all binaries.
inline CannedInstance canned(const std::string& request) {
  std::string name = request;
  std::vector<double> args;
  auto paren = request.find('(');
  if (paren != std::string::npos) {
    name = request.substr(0, paren);
    std::string inner = request.substr(paren + 1);
    if (inner.empty() || inner.back() != ')')
      throw std::invalid_argument("malformed canned instance arguments: " + request);
    inner.pop_back();
    std::size_t pos = 0;
    while (pos < inner.size()) {
      auto comma = inner.find(',', pos);
      std::string tok = inner.substr(pos, comma == std::string::npos ? std::string::npos
                                                                     : comma - pos);
      args.push_back(std::stod(tok));
      if (comma == std::string::npos) break;
      pos = comma + 1;
    }
  }

  CannedInstance out;
  if (name == "three-block-cycle") {
    // Blocks pay t1 = [a != b], t2 = [b != c], t3 = [c == a]; any binary
    // assignment pays at least one unit around the odd cycle, while the
    // per-edge marginals can all be made consistent fractionally at cost 0.
    Instance inst;
    auto mkBlock = [&](int id) {
      Block b;
      b.id = id;
      b.nBin = 2;
      b.nCont = 1;
      b.c = {0.0, 0.0};
      b.d = {1.0};
      return b;
    };
    Block b0 = mkBlock(0);  // t >= |a - b|
    b0.rows.push_back({{{0, 1.0}, {1, -1.0}}, {{0, -1.0}}, 0.0});
    b0.rows.push_back({{{0, -1.0}, {1, 1.0}}, {{0, -1.0}}, 0.0});
    Block b1 = mkBlock(1);  // t >= |b - c|
    b1.rows.push_back({{{0, 1.0}, {1, -1.0}}, {{0, -1.0}}, 0.0});
    b1.rows.push_back({{{0, -1.0}, {1, 1.0}}, {{0, -1.0}}, 0.0});
    Block b2 = mkBlock(2);  // t >= 1 - c - a and t >= c + a - 1
    b2.rows.push_back({{{0, -1.0}, {1, -1.0}}, {{0, -1.0}}, -1.0});
    b2.rows.push_back({{{0, 1.0}, {1, 1.0}}, {{0, -1.0}}, 1.0});
    inst.blocks = {b0, b1, b2};
    inst.edges.push_back({0, 1, {{1, 0, 1}}});  // b
    inst.edges.push_back({1, 2, {{1, 0, 2}}});  // c
    inst.edges.push_back({0, 2, {{0, 1, 0}}});  // a
    inst.meta = InstanceTag::General;
    canonicalize(inst);
    out.inst = std::move(inst);
    out.known["opt"] = 1.0;
    out.known["classical_dual"] = 0.0;
    return out;
  }
  if (name == "appendix-d-packing") {
    Instance inst;
    Block b0;
    b0.id = 0;
    b0.nBin = 3;  // x1, x2, private y1 (binary)
    b0.c = {-0.25, -0.25, -0.5};
    b0.rows.push_back({{{0, 1.0}, {1, 1.0}, {2, 1.0}}, {}, 2.0});
    Block b1;
    b1.id = 1;
    b1.nBin = 3;  // x3, x4, private y2 (binary)
    b1.c = {-0.25, -0.25, -0.5};
    b1.rows.push_back({{{0, 1.0}, {1, 1.0}, {2, 2.0}}, {}, 2.0});
    inst.blocks = {b0, b1};
    inst.edges.push_back({0, 1, {{0, 0, 0}, {1, 1, 1}}});
    inst.meta = InstanceTag::Packing;
    canonicalize(inst);
    out.inst = std::move(inst);
    out.known["opt"] = -1.0;
    out.known["dual_m1_at_most"] = -1.25;
    return out;
  }
  if (name == "appendix-d-covering") {
    Instance inst;
    Block b0;
    b0.id = 0;
    b0.nBin = 3;
    b0.c = {0.25, 0.25, 0.0};
    b0.rows.push_back({{{0, -1.0}, {1, -1.0}, {2, -1.0}}, {}, -2.0});
    Block b1;
    b1.id = 1;
    b1.nBin = 3;
    b1.c = {0.25, 0.25, 0.5};
    b1.rows.push_back({{{0, -1.0}, {1, -1.0}, {2, -2.0}}, {}, -2.0});
    inst.blocks = {b0, b1};
    inst.edges.push_back({0, 1, {{0, 0, 0}, {1, 1, 1}}});
    inst.meta = InstanceTag::Covering;
    canonicalize(inst);
    out.inst = std::move(inst);
    out.known["opt"] = 1.0;
    out.known["dual_m1_at_most"] = 0.75;
    return out;
  }
  if (name == "prop3-epsilon") {
    if (args.size() != 2) throw std::invalid_argument("prop3-epsilon needs (n, eps)");
    int n = static_cast<int>(args[0]);
    double eps = args[1];
    Instance inst;
    Block b0;
    b0.id = 0;
    b0.nBin = n;
    b0.c.assign(n, -eps);
    Block b1;
    b1.id = 1;
    b1.nBin = n;
    b1.c.assign(n, eps);
    inst.blocks = {b0, b1};
    CouplingEdge e{0, 1, {}};
    for (int j = 0; j < n; ++j) e.pairs.push_back({j, j, j});
    inst.edges = {e};
    inst.meta = InstanceTag::General;
    canonicalize(inst);
    out.inst = std::move(inst);
    out.known["opt"] = 0.0;
    out.known["n"] = n;
    out.known["eps"] = eps;
    return out;
  }
  if (name == "two-stage") {
    if (args.size() != 2) throw std::invalid_argument("two-stage needs (Z, n)");
    int Z = static_cast<int>(args[0]);
    int n = static_cast<int>(args[1]);
    if (Z < 2 || n < 1) throw std::invalid_argument("two-stage needs Z >= 2, n >= 1");
    Instance inst;
    for (int bi = 0; bi < Z; ++bi) {
      Block b;
      b.id = bi;
      b.nBin = n;
      b.nCont = 1;
      b.c.assign(n, -1.0);
      b.d = {-0.5};
      Block::Row row;
      for (int j = 0; j < n; ++j) row.ax.emplace_back(j, 1.0);
      row.ay.emplace_back(0, 2.0);
      row.rhs = n;
      b.rows.push_back(std::move(row));
      inst.blocks.push_back(std::move(b));
    }
    for (int bi = 1; bi < Z; ++bi) {
      CouplingEdge e{0, bi, {}};
      for (int j = 0; j < n; ++j) e.pairs.push_back({j, j, j});
      inst.edges.push_back(std::move(e));
    }
    inst.meta = InstanceTag::Packing;
    canonicalize(inst);
    out.inst = std::move(inst);
    out.known["Z"] = Z;
    out.known["n"] = n;
    return out;
  }
  throw std::invalid_argument("unknown canned instance: " + request);
}

}  // namespace decompdual
