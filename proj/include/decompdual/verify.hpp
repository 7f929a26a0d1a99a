#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "decompdual/duals.hpp"
#include "decompdual/lp.hpp"
#include "decompdual/model.hpp"
#include "decompdual/structure.hpp"
#include "decompdual/subsolve.hpp"

namespace decompdual {

// ---------------------------------------------------------------------------
// Brute force over consistent coupled assignments.

struct BruteForceResult {
  bool feasible = false;
  double value = kInf;
  std::map<std::int64_t, int> sharedAssign;
  std::vector<EvalResult::BlockSol> blockSolutions;
};

inline BruteForceResult brute_force_opt(BlockSolver& solver, int capBits = 24) {
  const Instance& inst = solver.instance();
  const BlockCoupling& bc = solver.coupling();
  std::vector<std::int64_t> gids;
  for (const auto& m : bc.matched)
    for (auto [gid, local] : m) gids.push_back(gid);
  std::sort(gids.begin(), gids.end());
  gids.erase(std::unique(gids.begin(), gids.end()), gids.end());
  const int G = static_cast<int>(gids.size());
  if (G > capBits)
    throw std::invalid_argument("coupled binary count exceeds brute-force budget");
  std::map<std::int64_t, int> gpos;
  for (int i = 0; i < G; ++i) gpos[gids[i]] = i;

  const int nb = static_cast<int>(inst.blocks.size());
  // Per block: map each assignment of its matched coordinates to the exact
  // completion value (+inf when infeasible).
  std::vector<std::vector<double>> table(nb);
  std::vector<std::vector<int>> bitOfGlobal(nb);
  for (int i = 0; i < nb; ++i) {
    const auto& matched = bc.matched[i];
    const int m = static_cast<int>(matched.size());
    bitOfGlobal[i].resize(m);
    for (int s = 0; s < m; ++s) bitOfGlobal[i][s] = gpos[matched[s].first];
    table[i].assign(1ull << m, kInf);
    for (std::uint64_t key = 0; key < (1ull << m); ++key) {
      SubproblemQuery q;
      q.blockIdx = i;
      q.xCost = inst.blocks[i].c;
      q.yCost = inst.blocks[i].d;
      q.fixedVertex = key;
      auto r = solver.solveMip(q);
      if (r.status == SubproblemResult::Status::Optimal) table[i][key] = r.value;
    }
  }

  BruteForceResult best;
  std::uint64_t bestMask = 0;
  for (std::uint64_t mask = 0; mask < (1ull << G); ++mask) {
    double total = 0.0;
    bool ok = true;
    for (int i = 0; i < nb && ok; ++i) {
      std::uint64_t key = 0;
      for (std::size_t s = 0; s < bitOfGlobal[i].size(); ++s)
        if ((mask >> bitOfGlobal[i][s]) & 1) key |= 1ull << s;
      double v = table[i][key];
      if (!std::isfinite(v))
        ok = false;
      else
        total += v;
    }
    if (ok && total < best.value - 1e-12) {
      best.feasible = true;
      best.value = total;
      bestMask = mask;
    } else if (ok && !best.feasible) {
      best.feasible = true;
      best.value = total;
      bestMask = mask;
    }
  }
  if (best.feasible) {
    for (int i = 0; i < G; ++i) best.sharedAssign[gids[i]] = (bestMask >> i) & 1;
    best.blockSolutions.resize(nb);
    for (int i = 0; i < nb; ++i) {
      std::uint64_t key = 0;
      for (std::size_t s = 0; s < bitOfGlobal[i].size(); ++s)
        if ((bestMask >> bitOfGlobal[i][s]) & 1) key |= 1ull << s;
      SubproblemQuery q;
      q.blockIdx = i;
      q.xCost = inst.blocks[i].c;
      q.yCost = inst.blocks[i].d;
      q.fixedVertex = key;
      auto r = solver.solveMip(q);
      best.blockSolutions[i] = {r.xStar, r.yStar, r.value};
    }
  }
  return best;
}

// ---------------------------------------------------------------------------
// Hull-LP primal characterization: an optimizer-free ground truth for every
// dual value. Each block's feasible binary points (with their best
// continuous completion) enter a convex-weight LP whose linking rows equate
// the chosen family's coordinates across every edge.

enum class HullFamily { Classical, Monomials, Vertices };

struct HullValue {
  enum class Status { Finite, Infeasible, Unbounded };
  Status status = Status::Finite;
  double value = 0.0;
};

inline HullValue dual_oracle_hull_lp(const Instance& inst, HullFamily family,
                                     const MonomialFamily* fam = nullptr,
                                     bool affineSumRows = false,
                                     int capBits = 12) {
  if (family == HullFamily::Monomials && fam == nullptr)
    throw std::invalid_argument("monomial hull oracle needs a family");
  const int nb = static_cast<int>(inst.blocks.size());

  struct Point {
    std::uint64_t mask;
    double value;
  };
  std::vector<std::vector<Point>> pts(nb);
  for (int i = 0; i < nb; ++i) {
    const Block& b = inst.blocks[i];
    if (b.nBin > capBits)
      throw std::invalid_argument("block too large for hull enumeration");
    for (std::uint64_t mask = 0; mask < (1ull << b.nBin); ++mask) {
      double base = 0.0;
      for (int j = 0; j < b.nBin; ++j)
        if ((mask >> j) & 1) base += b.c[j];
      LPProblem lp;
      for (int j = 0; j < b.nCont; ++j) lp.addVar(b.d[j], 0.0, kInf);
      bool infeas = false;
      for (const auto& row : b.rows) {
        double lhs = 0.0;
        for (auto [j, v] : row.ax) lhs += v * (((mask >> j) & 1) ? 1.0 : 0.0);
        if (row.ay.empty()) {
          if (lhs > row.rhs + 1e-9) infeas = true;
        } else {
          lp.addRow(row.ay, RowSense::LE, row.rhs - lhs);
        }
      }
      if (infeas) continue;
      if (b.nCont > 0) {
        auto sol = solve_lp(lp);
        if (sol.status == LPStatus::Infeasible) continue;
        if (sol.status == LPStatus::Unbounded)
          return {HullValue::Status::Unbounded, -kInf};
        if (sol.status != LPStatus::Optimal)
          throw std::runtime_error("hull completion LP stalled");
        base += sol.value;
      }
      pts[i].push_back({mask, base});
    }
    if (pts[i].empty()) return {HullValue::Status::Infeasible, kInf};
  }

  LPProblem lp;
  std::vector<int> colBase(nb);
  for (int i = 0; i < nb; ++i) {
    colBase[i] = lp.n;
    for (const auto& pt : pts[i]) lp.addVar(pt.value, 0.0, kInf);
  }
  for (int i = 0; i < nb; ++i) {
    std::vector<std::pair<int, double>> a;
    for (std::size_t p = 0; p < pts[i].size(); ++p)
      a.emplace_back(colBase[i] + static_cast<int>(p), 1.0);
    lp.addRow(std::move(a), RowSense::EQ, 1.0);
  }

  for (std::size_t ei = 0; ei < inst.edges.size(); ++ei) {
    const auto& e = inst.edges[ei];
    int ia = inst.blockIndex(e.blockA), ib = inst.blockIndex(e.blockB);
    const int np = static_cast<int>(e.pairs.size());
    auto addMatchRow = [&](auto&& coordA, auto&& coordB) {
      std::vector<std::pair<int, double>> a;
      for (std::size_t p = 0; p < pts[ia].size(); ++p) {
        double v = coordA(pts[ia][p].mask);
        if (v != 0.0) a.emplace_back(colBase[ia] + static_cast<int>(p), v);
      }
      for (std::size_t p = 0; p < pts[ib].size(); ++p) {
        double v = coordB(pts[ib][p].mask);
        if (v != 0.0) a.emplace_back(colBase[ib] + static_cast<int>(p), -v);
      }
      lp.addRow(std::move(a), RowSense::EQ, 0.0);
    };
    if (family == HullFamily::Classical) {
      for (int p = 0; p < np; ++p) {
        int la = e.pairs[p].localA, lb = e.pairs[p].localB;
        addMatchRow([la](std::uint64_t m) { return (m >> la) & 1 ? 1.0 : 0.0; },
                    [lb](std::uint64_t m) { return (m >> lb) & 1 ? 1.0 : 0.0; });
      }
    } else if (family == HullFamily::Monomials) {
      for (std::uint32_t subset : fam->perEdge[ei]) {
        addMatchRow(
            [&, subset](std::uint64_t m) {
              double prod = 1.0;
              for (int s = 0; s < np; ++s)
                if ((subset >> s) & 1)
                  prod *= (m >> e.pairs[s].localA) & 1 ? 1.0 : 0.0;
              return prod;
            },
            [&, subset](std::uint64_t m) {
              double prod = 1.0;
              for (int s = 0; s < np; ++s)
                if ((subset >> s) & 1)
                  prod *= (m >> e.pairs[s].localB) & 1 ? 1.0 : 0.0;
              return prod;
            });
      }
    } else {
      for (std::uint64_t vtx = 0; vtx < (1ull << np); ++vtx) {
        addMatchRow(
            [&, vtx](std::uint64_t m) {
              for (int s = 0; s < np; ++s)
                if ((std::uint64_t)((m >> e.pairs[s].localA) & 1) != ((vtx >> s) & 1))
                  return 0.0;
              return 1.0;
            },
            [&, vtx](std::uint64_t m) {
              for (int s = 0; s < np; ++s)
                if ((std::uint64_t)((m >> e.pairs[s].localB) & 1) != ((vtx >> s) & 1))
                  return 0.0;
              return 1.0;
            });
      }
    }
    if (affineSumRows) {
      addMatchRow(
          [&](std::uint64_t m) {
            double s = 0.0;
            for (int p = 0; p < np; ++p) s += (m >> e.pairs[p].localA) & 1 ? 1.0 : 0.0;
            return s;
          },
          [&](std::uint64_t m) {
            double s = 0.0;
            for (int p = 0; p < np; ++p) s += (m >> e.pairs[p].localB) & 1 ? 1.0 : 0.0;
            return s;
          });
    }
  }

  auto sol = solve_lp(lp);
  if (sol.status == LPStatus::Infeasible) return {HullValue::Status::Infeasible, kInf};
  if (sol.status != LPStatus::Optimal)
    throw std::runtime_error("hull LP did not reach optimality");
  return {HullValue::Status::Finite, sol.value};
}

// No-gain check: appending a dualized affine coupling row leaves
// the classical hull value unchanged.
inline bool check_affine_redundancy(const Instance& inst, double tol = 1e-6) {
  auto base = dual_oracle_hull_lp(inst, HullFamily::Classical);
  auto extra = dual_oracle_hull_lp(inst, HullFamily::Classical, nullptr, true);
  if (base.status != extra.status) return false;
  if (base.status != HullValue::Status::Finite) return true;
  return std::fabs(base.value - extra.value) <= tol;
}

// ---------------------------------------------------------------------------
// Good and k-good variable sets over a tree decomposition.

struct GoodSetReport {
  std::set<int> W;
  std::vector<std::vector<int>> components;  // bag indices per component
  enum class Class { Neither, Good, KGood };
  Class classification = Class::Neither;
  bool good() const { return classification != Class::Neither; }
  bool kGood() const { return classification == Class::KGood; }
};

inline GoodSetReport classify_good(const TreeDecomposition& td,
                                   const std::set<int>& W, int k) {
  GoodSetReport rep;
  rep.W = W;
  const int nb = static_cast<int>(td.bags.size());
  std::vector<char> occupied(nb, 0);
  for (int t = 0; t < nb; ++t)
    for (int v : td.bags[t])
      if (W.count(v)) occupied[t] = 1;
  std::vector<std::vector<int>> adj(nb);
  for (auto [a, b] : td.edges)
    if (occupied[a] && occupied[b]) {
      adj[a].push_back(b);
      adj[b].push_back(a);
    }
  std::vector<char> seen(nb, 0);
  bool allCond1 = true, allGood = true;
  for (int t = 0; t < nb; ++t) {
    if (!occupied[t] || seen[t]) continue;
    std::vector<int> comp{t};
    seen[t] = 1;
    for (std::size_t qi = 0; qi < comp.size(); ++qi)
      for (int u : adj[comp[qi]])
        if (!seen[u]) {
          seen[u] = 1;
          comp.push_back(u);
        }
    // Condition 1: all component edges have small W-intersection.
    bool cond1 = true;
    for (int a : comp)
      for (int b : adj[a]) {
        if (b < a) continue;
        int inter = 0;
        for (int v : td.bags[a])
          if (W.count(v) && td.bags[b].count(v)) ++inter;
        cond1 &= inter <= k;
      }
    // Condition 2: some bag dominates every W-trace in the component.
    bool cond2 = false;
    for (int cand : comp) {
      bool dominates = true;
      for (int other : comp) {
        for (int v : td.bags[other])
          if (W.count(v) && !td.bags[cand].count(v)) dominates = false;
      }
      cond2 |= dominates;
    }
    allCond1 &= cond1;
    allGood &= cond1 || cond2;
    rep.components.push_back(std::move(comp));
  }
  rep.classification = allCond1  ? GoodSetReport::Class::KGood
                       : allGood ? GoodSetReport::Class::Good
                                 : GoodSetReport::Class::Neither;
  return rep;
}

// Fractional covering LPs over the good / k-good sets (enumerated when not
// supplied). Returns (eta_k, theta_k).
inline std::pair<double, double> compute_eta_theta(
    const TreeDecomposition& td, int k,
    const std::vector<std::set<int>>* suppliedSets = nullptr, int capVars = 16) {
  std::set<int> universeSet;
  for (const auto& bag : td.bags) universeSet.insert(bag.begin(), bag.end());
  std::vector<int> universe(universeSet.begin(), universeSet.end());
  const int u = static_cast<int>(universe.size());

  std::vector<std::pair<std::set<int>, GoodSetReport::Class>> candidates;
  if (suppliedSets) {
    for (const auto& W : *suppliedSets)
      candidates.emplace_back(W, classify_good(td, W, k).classification);
  } else {
    if (u > capVars)
      throw std::invalid_argument(
          "too many variables for good-set enumeration; supply candidates");
    for (std::uint32_t mask = 1; mask < (1u << u); ++mask) {
      std::set<int> W;
      for (int i = 0; i < u; ++i)
        if ((mask >> i) & 1) W.insert(universe[i]);
      auto cls = classify_good(td, W, k).classification;
      if (cls != GoodSetReport::Class::Neither) candidates.emplace_back(W, cls);
    }
  }

  auto solveCover = [&](bool kGoodOnly) {
    LPProblem lp;
    std::vector<const std::set<int>*> cols;
    for (const auto& [W, cls] : candidates) {
      if (kGoodOnly && cls != GoodSetReport::Class::KGood) continue;
      cols.push_back(&W);
      lp.addVar(1.0, 0.0, kInf);
    }
    std::map<int, int> varRow;
    for (int i = 0; i < u; ++i) varRow[universe[i]] = i;
    std::vector<std::vector<std::pair<int, double>>> rows(u);
    for (std::size_t c = 0; c < cols.size(); ++c)
      for (int v : *cols[c]) rows[varRow[v]].emplace_back(static_cast<int>(c), -1.0);
    for (int i = 0; i < u; ++i) lp.addRow(std::move(rows[i]), RowSense::LE, -1.0);
    auto sol = solve_lp(lp);
    if (sol.status != LPStatus::Optimal)
      throw std::runtime_error("covering LP failed (no feasible fractional cover)");
    return sol.value;
  };
  return {solveCover(false), solveCover(true)};
}

// Closed forms for the symmetric two-stage layout with Z scenario blocks
// sharing n binaries, at level k (t = k/n): eta = 2 + (2t - Zt - 1)/(Z - t),
// theta = 1/t.
inline std::pair<double, double> two_stage_eta_theta(int Z, int n, int k) {
  double t = static_cast<double>(k) / n;
  double eta = 2.0 + (2.0 * t - Z * t - 1.0) / (Z - t);
  double theta = 1.0 / t;
  return {eta, theta};
}

// Builds the tree decomposition a block instance induces: one bag per block
// holding the shared ids of its matched coordinates plus fresh ids for its
// private variables (binary and continuous alike). `sharedIds`, when given,
// receives the universe ids of the coupled variables.
inline TreeDecomposition td_from_instance(const Instance& inst,
                                          std::set<int>* sharedIds = nullptr) {
  BlockCoupling bc = build_coupling(inst);
  TreeDecomposition td;
  std::map<std::int64_t, int> gidVar;
  int next = 0;
  for (const auto& m : bc.matched)
    for (auto [gid, local] : m)
      if (!gidVar.count(gid)) gidVar[gid] = next++;
  if (sharedIds)
    for (auto& [gid, id] : gidVar) sharedIds->insert(id);
  for (std::size_t i = 0; i < inst.blocks.size(); ++i) {
    std::set<int> bag;
    const Block& b = inst.blocks[i];
    std::vector<char> isMatched(b.nBin, 0);
    for (auto [gid, local] : bc.matched[i]) {
      bag.insert(gidVar[gid]);
      isMatched[local] = 1;
    }
    for (int j = 0; j < b.nBin; ++j)
      if (!isMatched[j]) bag.insert(next++);
    for (int j = 0; j < b.nCont; ++j) bag.insert(next++);
    td.bags.push_back(std::move(bag));
  }
  detail::UnionFind uf(static_cast<int>(inst.blocks.size()));
  for (const auto& e : inst.edges) {
    int ia = inst.blockIndex(e.blockA), ib = inst.blockIndex(e.blockB);
    if (!uf.unite(ia, ib))
      throw std::invalid_argument("instance coupling graph is not a tree");
    td.edges.emplace_back(ia, ib);
  }
  return td;
}

struct EtaTheta {
  double eta = 0.0;
  double theta = 0.0;
  bool restricted = false;  // candidate families used instead of enumeration
};

// Covering-LP values for an instance's induced decomposition. Past the
// enumeration cap, two-stage-shaped instances (all bags share one coupled
// set) fall back to the analytic candidate families: every bag itself, plus
// S union all-private for each coupled subset with |S| <= k. Restricted
// families can only enlarge the LP values, which weakens both bound
// factors in the sound direction.
inline EtaTheta eta_theta_for_instance(const Instance& inst, int k,
                                       int capVars = 16) {
  std::set<int> shared;
  TreeDecomposition td = td_from_instance(inst, &shared);
  std::set<int> universe;
  for (const auto& bag : td.bags) universe.insert(bag.begin(), bag.end());
  EtaTheta out;
  if (static_cast<int>(universe.size()) <= capVars) {
    auto [eta, theta] = compute_eta_theta(td, k);
    out.eta = eta;
    out.theta = theta;
    return out;
  }
  for (const auto& bag : td.bags)
    if (!std::includes(bag.begin(), bag.end(), shared.begin(), shared.end()))
      throw std::invalid_argument(
          "good-set enumeration over budget and the instance is not "
          "two-stage shaped; supply candidate families");
  std::vector<int> sharedVec(shared.begin(), shared.end());
  if (sharedVec.size() > 24)
    throw std::invalid_argument("coupled set too large for candidate families");
  std::set<int> privates;
  for (int v : universe)
    if (!shared.count(v)) privates.insert(v);
  std::vector<std::set<int>> cands;
  for (const auto& bag : td.bags) cands.push_back(bag);
  for (std::uint32_t mask = 1; mask < (1u << sharedVec.size()); ++mask) {
    if (std::popcount(mask) > k) continue;
    std::set<int> W(privates);
    for (std::size_t i = 0; i < sharedVec.size(); ++i)
      if ((mask >> i) & 1) W.insert(sharedVec[i]);
    cands.push_back(std::move(W));
  }
  auto [eta, theta] = compute_eta_theta(td, k, &cands);
  out.eta = eta;
  out.theta = theta;
  out.restricted = true;
  return out;
}

// ---------------------------------------------------------------------------
// Certificates for the packing/covering multiplicative bounds.

struct BoundCertificate {
  std::string kind;
  int k = 0;
  double t = 0.0;
  double factor = 0.0;  // certified multiplier applied to OPT
  std::optional<double> etaK, thetaK;
  int tau = 0;
  double dual = 0.0, opt = 0.0;
  double observedRatio = 0.0;
  bool pass = false;
};

inline BoundCertificate check_bounds(const Instance& inst, int k, double dualValue,
                                     double optValue, double tol = 1e-6) {
  if (inst.meta != InstanceTag::Packing && inst.meta != InstanceTag::Covering)
    throw std::invalid_argument("bound certificates need a packing or covering tag");
  const bool packing = inst.meta == InstanceTag::Packing;
  BoundCertificate cert;
  cert.k = k;
  cert.dual = dualValue;
  cert.opt = optValue;
  int n = 0;
  for (const auto& e : inst.edges) n = std::max(n, static_cast<int>(e.pairs.size()));
  cert.t = n > 0 ? static_cast<double>(k) / n : 1.0;

  if (inst.blocks.size() == 2) {
    cert.kind = packing ? "packing-two-block" : "covering-two-block";
    cert.factor = packing ? 2.0 + 1.0 / (cert.t - 2.0) : 1.0 / (2.0 - cert.t);
    cert.tau = 2;
  } else {
    TreeDecomposition td = td_from_instance(inst);
    EtaTheta et = eta_theta_for_instance(inst, k);
    cert.etaK = et.eta;
    cert.thetaK = et.theta;
    cert.tau = bag_multiplicity(td);
    cert.kind = packing ? "packing-tree" : "covering-tree";
    if (et.restricted) cert.kind += "-restricted";
    cert.factor =
        packing ? et.eta : et.theta / (1.0 - cert.tau + cert.tau * et.theta);
  }
  cert.observedRatio = optValue != 0.0 ? dualValue / optValue : 1.0;
  cert.pass = dualValue >= cert.factor * optValue - tol && dualValue <= optValue + tol;
  return cert;
}

}  // namespace decompdual
