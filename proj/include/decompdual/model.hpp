#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace decompdual {

// One block of a block-structured mixed-binary program:
//   min c'x + d'y  s.t. rows (ax'x + ay'y <= rhs), x in {0,1}^nBin, y >= 0.
struct Block {
  int id = 0;
  int nBin = 0;
  int nCont = 0;
  std::vector<double> c;
  std::vector<double> d;
  struct Row {
    std::vector<std::pair<int, double>> ax;
    std::vector<std::pair<int, double>> ay;
    double rhs = 0.0;
  };
  std::vector<Row> rows;
};

// Matched binary coordinates between two blocks; every pair carries the
// global variable identity the two local copies represent.
struct CouplingEdge {
  int blockA = 0;
  int blockB = 0;
  struct VarPair {
    int localA = 0;
    int localB = 0;
    std::int64_t globalId = 0;
  };
  std::vector<VarPair> pairs;
};

enum class InstanceTag { None, Packing, Covering, General };

struct Instance {
  std::vector<Block> blocks;
  std::vector<CouplingEdge> edges;
  InstanceTag meta = InstanceTag::None;

  int blockIndex(int id) const {
    for (std::size_t i = 0; i < blocks.size(); ++i)
      if (blocks[i].id == id) return static_cast<int>(i);
    return -1;
  }
};

// Orients every edge lower-id -> higher-id and sorts pairs by global id.
// All evaluators assume this form; loaders and generators call it once.
inline void canonicalize(Instance& inst) {
  for (auto& e : inst.edges) {
    if (e.blockA > e.blockB) {
      std::swap(e.blockA, e.blockB);
      for (auto& p : e.pairs) std::swap(p.localA, p.localB);
    }
    std::sort(e.pairs.begin(), e.pairs.end(),
              [](const auto& a, const auto& b) { return a.globalId < b.globalId; });
  }
}

struct ValidationReport {
  std::vector<std::string> violations;
  std::vector<std::string> warnings;
  bool ok() const { return violations.empty(); }
};

namespace detail {
struct UnionFind {
  std::vector<int> parent;
  explicit UnionFind(int n) : parent(n) {
    for (int i = 0; i < n; ++i) parent[i] = i;
  }
  int find(int a) {
    while (parent[a] != a) a = parent[a] = parent[parent[a]];
    return a;
  }
  bool unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    parent[a] = b;
    return true;
  }
};
}  // namespace detail

inline ValidationReport validate_instance(const Instance& inst) {
  ValidationReport rep;
  auto bad = [&](std::string s) { rep.violations.push_back(std::move(s)); };

  std::set<int> ids;
  for (const auto& b : inst.blocks) {
    std::string tag = "block " + std::to_string(b.id) + ": ";
    if (!ids.insert(b.id).second) bad(tag + "duplicate block id");
    if (b.nBin < 0 || b.nCont < 0) bad(tag + "negative variable count");
    if (static_cast<int>(b.c.size()) != b.nBin) bad(tag + "cost row c size mismatch");
    if (static_cast<int>(b.d.size()) != b.nCont) bad(tag + "cost row d size mismatch");
    for (double v : b.c)
      if (!std::isfinite(v)) bad(tag + "non-finite cost");
    for (double v : b.d)
      if (!std::isfinite(v)) bad(tag + "non-finite cost");
    for (std::size_t r = 0; r < b.rows.size(); ++r) {
      const auto& row = b.rows[r];
      std::string rt = tag + "row " + std::to_string(r) + ": ";
      if (!std::isfinite(row.rhs)) bad(rt + "non-finite rhs");
      for (auto [j, v] : row.ax) {
        if (j < 0 || j >= b.nBin) bad(rt + "x index out of bounds");
        if (!std::isfinite(v)) bad(rt + "non-finite coefficient");
      }
      for (auto [j, v] : row.ay) {
        if (j < 0 || j >= b.nCont) bad(rt + "y index out of bounds");
        if (!std::isfinite(v)) bad(rt + "non-finite coefficient");
      }
    }
  }

  detail::UnionFind uf(static_cast<int>(inst.blocks.size()));
  bool forest = true;
  std::map<std::pair<int, int>, std::int64_t> localBinding;  // (blockIdx, local) -> gid
  std::map<std::int64_t, std::set<int>> gidBlocks;
  for (std::size_t ei = 0; ei < inst.edges.size(); ++ei) {
    const auto& e = inst.edges[ei];
    std::string tag = "edge " + std::to_string(ei) + ": ";
    int ia = inst.blockIndex(e.blockA), ib = inst.blockIndex(e.blockB);
    if (ia < 0 || ib < 0) {
      bad(tag + "unknown block id");
      continue;
    }
    if (ia == ib) {
      bad(tag + "self-loop");
      continue;
    }
    if (!uf.unite(ia, ib)) forest = false;
    std::set<std::int64_t> seen;
    for (const auto& p : e.pairs) {
      if (!seen.insert(p.globalId).second) bad(tag + "duplicate pair");
      auto checkEnd = [&](int blockIdx, int local) {
        const Block& b = inst.blocks[blockIdx];
        if (local < 0 || local >= b.nBin + b.nCont) {
          bad(tag + "pair index out of bounds");
        } else if (local >= b.nBin) {
          bad(tag + "coupling on non-binary variable");
        } else {
          auto [it, inserted] = localBinding.emplace(std::make_pair(blockIdx, local), p.globalId);
          if (!inserted && it->second != p.globalId)
            bad(tag + "local coordinate bound to two global ids");
        }
      };
      checkEnd(ia, p.localA);
      checkEnd(ib, p.localB);
      gidBlocks[p.globalId].insert(ia);
      gidBlocks[p.globalId].insert(ib);
    }
  }
  if (!forest) bad("edges not a forest");

  // Subtree property of shared ids is fully validated in the structure
  // module; here we only warn when an id spans blocks that no single edge
  // connects, since evaluation remains well defined either way.
  if (forest) {
    for (const auto& [gid, bset] : gidBlocks) {
      std::set<int> reachable;
      for (const auto& e : inst.edges) {
        bool carries = false;
        for (const auto& p : e.pairs) carries |= p.globalId == gid;
        if (!carries) continue;
        reachable.insert(inst.blockIndex(e.blockA));
        reachable.insert(inst.blockIndex(e.blockB));
      }
      // Connectivity of the gid-carrying edge set.
      std::map<int, int> comp;
      int nextComp = 0;
      for (const auto& e : inst.edges) {
        bool carries = false;
        for (const auto& p : e.pairs) carries |= p.globalId == gid;
        if (!carries) continue;
        int a = inst.blockIndex(e.blockA), b = inst.blockIndex(e.blockB);
        int ca = comp.count(a) ? comp[a] : -1;
        int cb = comp.count(b) ? comp[b] : -1;
        if (ca < 0 && cb < 0) {
          comp[a] = comp[b] = nextComp++;
        } else if (ca < 0) {
          comp[a] = cb;
        } else if (cb < 0) {
          comp[b] = ca;
        } else if (ca != cb) {
          for (auto& [k, v] : comp)
            if (v == cb) v = ca;
        }
      }
      std::set<int> comps;
      for (auto& [k, v] : comp) comps.insert(v);
      if (comps.size() > 1)
        rep.warnings.push_back("global id " + std::to_string(gid) +
                               " spans disconnected edges (subtree property "
                               "not checkable here)");
    }
  }
  return rep;
}

// Per-block view of the coupling: matched local coordinates sorted by global
// id. Bit s of a block's vertex key is the value of matched[s].
struct BlockCoupling {
  std::vector<std::vector<std::pair<std::int64_t, int>>> matched;  // (gid, local)

  int matchedCount(int blockIdx) const {
    return static_cast<int>(matched[blockIdx].size());
  }
  int bitOf(int blockIdx, std::int64_t gid) const {
    const auto& v = matched[blockIdx];
    for (std::size_t s = 0; s < v.size(); ++s)
      if (v[s].first == gid) return static_cast<int>(s);
    return -1;
  }
};

inline BlockCoupling build_coupling(const Instance& inst) {
  BlockCoupling bc;
  bc.matched.resize(inst.blocks.size());
  std::vector<std::map<std::int64_t, int>> maps(inst.blocks.size());
  for (const auto& e : inst.edges) {
    int ia = inst.blockIndex(e.blockA), ib = inst.blockIndex(e.blockB);
    for (const auto& p : e.pairs) {
      maps[ia][p.globalId] = p.localA;
      maps[ib][p.globalId] = p.localB;
    }
  }
  for (std::size_t i = 0; i < maps.size(); ++i)
    for (auto [gid, local] : maps[i]) bc.matched[i].emplace_back(gid, local);
  return bc;
}

// Monomial families per edge, each subset stored as a bitmask over the
// edge's pair indices (pairs are in global-id order after canonicalize).
struct MonomialFamily {
  int k = 0;
  std::vector<std::vector<std::uint32_t>> perEdge;
};

inline MonomialFamily build_monomial_family(const Instance& inst, int k) {
  if (k < 1) throw std::invalid_argument("monomial family needs k >= 1");
  MonomialFamily fam;
  fam.k = k;
  fam.perEdge.resize(inst.edges.size());
  for (std::size_t ei = 0; ei < inst.edges.size(); ++ei) {
    int np = static_cast<int>(inst.edges[ei].pairs.size());
    if (np > 30) throw std::invalid_argument("edge too wide for monomial enumeration");
    std::vector<std::uint32_t>& out = fam.perEdge[ei];
    for (std::uint32_t mask = 1; mask < (1u << np); ++mask)
      if (std::popcount(mask) <= k) out.push_back(mask);
    std::sort(out.begin(), out.end(), [](std::uint32_t a, std::uint32_t b) {
      int pa = std::popcount(a), pb = std::popcount(b);
      return pa != pb ? pa < pb : a < b;
    });
  }
  return fam;
}

inline bool family_is_down_closed(const MonomialFamily& fam) {
  for (const auto& edgeFam : fam.perEdge) {
    std::set<std::uint32_t> present(edgeFam.begin(), edgeFam.end());
    for (std::uint32_t s : edgeFam) {
      for (int b = 0; b < 32; ++b) {
        if (!((s >> b) & 1)) continue;
        std::uint32_t sub = s & ~(1u << b);
        if (sub != 0 && !present.count(sub)) return false;
      }
    }
  }
  return true;
}

// phi bounds the magnitude of any block's optimal completion value; the
// subgradient step-size heuristics use it as their scale constant.
struct InstanceStats {
  double phi = 0.0;
  int nCoupled = 0;
};

inline bool is_packing(const Instance& inst) {
  for (const auto& b : inst.blocks) {
    for (double v : b.c)
      if (v > 0) return false;
    for (double v : b.d)
      if (v > 0) return false;
    for (const auto& r : b.rows) {
      if (r.rhs < 0) return false;
      for (auto [j, v] : r.ax)
        if (v < 0) return false;
      for (auto [j, v] : r.ay)
        if (v < 0) return false;
    }
  }
  return true;
}

inline bool is_covering(const Instance& inst) {
  for (const auto& b : inst.blocks) {
    for (double v : b.c)
      if (v < 0) return false;
    for (double v : b.d)
      if (v < 0) return false;
    for (const auto& r : b.rows) {
      if (r.rhs > 0) return false;
      for (auto [j, v] : r.ax)
        if (v > 0) return false;
      for (auto [j, v] : r.ay)
        if (v > 0) return false;
    }
  }
  return true;
}

// Cross-copies each block's rows, restricted to the matched coordinates,
// into the opposite block. For packing data the dropped (nonnegative) terms
// only weaken the row, so the restricted row is implied for every coupled
// feasible point and the optimum is unchanged; afterwards any block-feasible
// shared assignment extends to the other block with y = 0 and free binaries
// at 0 (relatively complete recourse).
inline Instance augment_recourse(const Instance& inst) {
  if (inst.blocks.size() != 2 || inst.edges.size() != 1)
    throw std::invalid_argument("recourse augmentation expects a two-block instance");
  if (!is_packing(inst))
    throw std::invalid_argument("recourse augmentation applies to packing instances");
  Instance out = inst;
  const CouplingEdge& e = inst.edges[0];
  int ia = inst.blockIndex(e.blockA), ib = inst.blockIndex(e.blockB);
  auto crossCopy = [&](int srcIdx, bool srcIsA) {
    int dstIdx = srcIsA ? ib : ia;
    std::map<int, int> map;  // src local -> dst local
    for (const auto& p : e.pairs)
      map[srcIsA ? p.localA : p.localB] = srcIsA ? p.localB : p.localA;
    for (const auto& row : inst.blocks[srcIdx].rows) {
      Block::Row nr;
      nr.rhs = row.rhs;
      for (auto [j, v] : row.ax) {
        auto it = map.find(j);
        if (it != map.end()) nr.ax.emplace_back(it->second, v);
      }
      if (!nr.ax.empty()) out.blocks[dstIdx].rows.push_back(std::move(nr));
    }
  };
  crossCopy(ia, true);
  crossCopy(ib, false);
  return out;
}

}  // namespace decompdual
