#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <stdexcept>
#include <vector>

#include "decompdual/lp.hpp"
#include "decompdual/model.hpp"

namespace decompdual {

struct SubproblemQuery {
  int blockIdx = 0;
  std::vector<double> xCost;  // adjusted binary costs (lambda folded in)
  std::vector<double> yCost;
  // Monomial objective terms, each key a sorted list of binary locals.
  std::map<std::vector<int>, double> monomialCost;
  // Vertex penalties over the block's matched coordinates (already signed
  // and scaled by the caller). Keys use the canonical global-id bit order.
  std::map<std::uint64_t, double> vertexPenalty;
  std::set<std::uint64_t> excluded;
  std::optional<std::uint64_t> fixedVertex;
  // Individual binary pins (local index -> 0/1); used by cross-fixing.
  std::vector<std::pair<int, int>> fixedBinaries;
};

struct SubproblemResult {
  enum class Status { Optimal, Infeasible };
  Status status = Status::Infeasible;
  std::vector<double> xStar;
  std::vector<double> yStar;
  double value = 0.0;
};

// Exact block sub-problem solves: LP-relaxation branch-and-bound over the
// binaries with most-fractional branching, monomial objective terms handled
// by exact binary linearization, excluded vertices removed with no-good
// cuts, and the vertex-penalized form evaluated in the original space by
// splitting on the penalty support.
class BlockSolver {
 public:
  explicit BlockSolver(const Instance& inst)
      : inst_(inst), coupling_(build_coupling(inst)) {}

  const Instance& instance() const { return inst_; }
  const BlockCoupling& coupling() const { return coupling_; }

  struct Stats {
    long long mipSolves = 0;
    long long bnbNodes = 0;
  };
  Stats stats() const { return {mipSolves_.load(), bnbNodes_.load()}; }

  SubproblemResult solve(const SubproblemQuery& q) {
    if (q.vertexPenalty.empty()) return solveMip(q);
    return solveVertexPenalized(q);
  }

  // Branch and bound; vertexPenalty must be empty here.
  SubproblemResult solveMip(const SubproblemQuery& q) {
    const Block& b = inst_.blocks[q.blockIdx];
    const auto& matched = coupling_.matched[q.blockIdx];
    if (!q.vertexPenalty.empty())
      throw std::invalid_argument("solveMip cannot take vertex penalties");

    LPProblem p;
    for (int j = 0; j < b.nBin; ++j) p.addVar(q.xCost[j], 0.0, 1.0);
    for (int j = 0; j < b.nCont; ++j) p.addVar(q.yCost[j], 0.0, kInf);
    std::vector<std::pair<std::vector<int>, double>> monos;
    for (const auto& [subset, coef] : q.monomialCost) {
      for (int j : subset)
        if (j < 0 || j >= b.nBin)
          throw std::invalid_argument("monomial references a non-binary coordinate");
      if (subset.size() == 1) {
        p.c[subset[0]] += coef;  // singleton monomial is the variable itself
      } else if (coef != 0.0) {
        monos.emplace_back(subset, coef);
      }
    }
    for (const auto& r : b.rows) {
      std::vector<std::pair<int, double>> a;
      for (auto [j, v] : r.ax) a.emplace_back(j, v);
      for (auto [j, v] : r.ay) a.emplace_back(b.nBin + j, v);
      p.addRow(std::move(a), RowSense::LE, r.rhs);
    }
    // w_S = prod_{j in S} x_j via w <= x_j and w >= sum x_j - |S| + 1.
    for (const auto& [subset, coef] : monos) {
      int w = p.addVar(coef, 0.0, 1.0);
      for (int j : subset) p.addRow({{w, 1.0}, {j, -1.0}}, RowSense::LE, 0.0);
      std::vector<std::pair<int, double>> a{{w, -1.0}};
      for (int j : subset) a.emplace_back(j, 1.0);
      p.addRow(std::move(a), RowSense::LE, static_cast<double>(subset.size()) - 1.0);
    }
    for (std::uint64_t v : q.excluded) {
      // No-good cut removing exactly v from the matched hypercube.
      std::vector<std::pair<int, double>> a;
      double ones = 0.0;
      for (std::size_t s = 0; s < matched.size(); ++s) {
        bool bit = (v >> s) & 1;
        a.emplace_back(matched[s].second, bit ? 1.0 : -1.0);
        ones += bit ? 1.0 : 0.0;
      }
      if (a.empty()) return infeasibleResult();  // excluding the empty assignment
      p.addRow(std::move(a), RowSense::LE, ones - 1.0);
    }
    if (q.fixedVertex) {
      for (std::size_t s = 0; s < matched.size(); ++s) {
        double bit = (*q.fixedVertex >> s) & 1 ? 1.0 : 0.0;
        p.lo[matched[s].second] = p.hi[matched[s].second] = bit;
      }
    }
    for (auto [local, bit] : q.fixedBinaries) {
      if (local < 0 || local >= b.nBin)
        throw std::invalid_argument("fixed binary out of range");
      p.lo[local] = p.hi[local] = bit ? 1.0 : 0.0;
    }

    mipSolves_.fetch_add(1, std::memory_order_relaxed);
    BnB bnb{p, b.nBin, b.nCont, q, this};
    bnb.run();
    SubproblemResult res;
    if (!bnb.hasIncumbent) return res;
    res.status = SubproblemResult::Status::Optimal;
    res.xStar.assign(bnb.bestX.begin(), bnb.bestX.begin() + b.nBin);
    res.yStar.assign(bnb.bestX.begin() + b.nBin, bnb.bestX.begin() + b.nBin + b.nCont);
    res.value = exactValue(q, res.xStar, res.yStar);
    return res;
  }

  // Algorithm: split on the support V of the vertex penalties. Outside V the
  // penalties vanish, so the block optimum with V excluded competes against
  // each v in V solved with the matched coordinates fixed (plus its penalty).
  // Ties keep the excluded-branch solution (strict '<').
  SubproblemResult solveVertexPenalized(const SubproblemQuery& q) {
    const Block& b = inst_.blocks[q.blockIdx];
    const auto& matched = coupling_.matched[q.blockIdx];
    if (matched.size() > 62)
      throw std::invalid_argument("vertex keys limited to 62 matched coordinates");

    SubproblemQuery qa = q;
    qa.vertexPenalty.clear();
    for (const auto& [v, coef] : q.vertexPenalty)
      if (coef != 0.0) qa.excluded.insert(v);
    SubproblemResult best = solveMip(qa);

    // Private costs must be the base block costs for the completion cache to
    // apply; dual adjustments only ever touch matched coordinates.
    std::vector<char> isMatched(b.nBin, 0);
    for (auto [gid, local] : matched) isMatched[local] = 1;
    bool cacheable = true;
    for (int j = 0; j < b.nBin; ++j)
      if (!isMatched[j] && q.xCost[j] != b.c[j]) cacheable = false;
    for (int j = 0; j < b.nCont; ++j)
      if (q.yCost[j] != b.d[j]) cacheable = false;

    for (const auto& [v, coef] : q.vertexPenalty) {
      if (coef == 0.0) continue;
      if (q.excluded.count(v)) continue;
      Completion comp = fixedCompletion(q.blockIdx, v, q, cacheable);
      if (!comp.feasible) continue;
      double matchedCost = 0.0;
      for (std::size_t s = 0; s < matched.size(); ++s)
        if ((v >> s) & 1) matchedCost += q.xCost[matched[s].second];
      double monoCost = 0.0;
      for (const auto& [subset, mcoef] : q.monomialCost) {
        double prod = 1.0;
        for (int j : subset) {
          if (!isMatched[j])
            throw std::invalid_argument(
                "vertex-penalized queries support monomials on matched "
                "coordinates only");
          int s = bitIndex(matched, j);
          prod *= (v >> s) & 1 ? 1.0 : 0.0;
        }
        monoCost += mcoef * prod;
      }
      double value = matchedCost + comp.privateValue + monoCost + coef;
      if (best.status != SubproblemResult::Status::Optimal ||
          value < best.value) {
        best.status = SubproblemResult::Status::Optimal;
        best.value = value;
        best.xStar = comp.xFull;
        best.yStar = comp.y;
      }
    }
    return best;
  }

  void clearCache() {
    std::lock_guard<std::mutex> lock(cacheMutex_);
    cache_.clear();
  }

  // Objective recomputed from the reported solution; monomials use the exact
  // bit products rather than the LP's auxiliary variables.
  double exactValue(const SubproblemQuery& q, const std::vector<double>& x,
                    const std::vector<double>& y) const {
    double v = 0.0;
    for (std::size_t j = 0; j < x.size(); ++j) v += q.xCost[j] * x[j];
    for (std::size_t j = 0; j < y.size(); ++j) v += q.yCost[j] * y[j];
    for (const auto& [subset, coef] : q.monomialCost) {
      double prod = 1.0;
      for (int j : subset) prod *= x[j] > 0.5 ? 1.0 : 0.0;
      v += coef * prod;
    }
    return v;
  }

 private:
  struct Completion {
    bool feasible = false;
    std::vector<double> xFull;  // matched bits + private argmin
    std::vector<double> y;
    double privateValue = 0.0;  // base-cost value of the private part
  };

  static SubproblemResult infeasibleResult() { return SubproblemResult{}; }

  static int bitIndex(const std::vector<std::pair<std::int64_t, int>>& matched,
                      int local) {
    for (std::size_t s = 0; s < matched.size(); ++s)
      if (matched[s].second == local) return static_cast<int>(s);
    throw std::logic_error("local coordinate is not matched");
  }

  Completion fixedCompletion(int blockIdx, std::uint64_t v,
                             const SubproblemQuery& q, bool cacheable) {
    if (cacheable) {
      std::lock_guard<std::mutex> lock(cacheMutex_);
      auto it = cache_.find({blockIdx, v});
      if (it != cache_.end()) return it->second;
    }
    const Block& b = inst_.blocks[blockIdx];
    // Cached completions run under the base costs (valid because the dual
    // adjustments never touch private coordinates); uncacheable queries
    // carry their own private costs and must be solved with them.
    SubproblemQuery fq;
    fq.blockIdx = blockIdx;
    fq.xCost = cacheable ? b.c : q.xCost;
    fq.yCost = cacheable ? b.d : q.yCost;
    fq.fixedVertex = v;
    SubproblemResult r = solveMip(fq);
    Completion comp;
    if (r.status == SubproblemResult::Status::Optimal) {
      comp.feasible = true;
      comp.xFull = r.xStar;
      comp.y = r.yStar;
      const auto& matched = coupling_.matched[blockIdx];
      std::vector<char> isMatched(b.nBin, 0);
      for (auto [gid, local] : matched) isMatched[local] = 1;
      double pv = 0.0;
      for (int j = 0; j < b.nBin; ++j)
        if (!isMatched[j]) pv += fq.xCost[j] * r.xStar[j];
      for (int j = 0; j < b.nCont; ++j) pv += fq.yCost[j] * r.yStar[j];
      comp.privateValue = pv;
    }
    if (cacheable) {
      std::lock_guard<std::mutex> lock(cacheMutex_);
      cache_.emplace(std::make_pair(blockIdx, v), comp);
    }
    return comp;
  }

  // Depth-first branch and bound on the [0,1] relaxation.
  struct BnB {
    LPProblem& p;
    int nBin;
    int nCont;
    const SubproblemQuery& q;
    BlockSolver* owner;

    bool hasIncumbent = false;
    double bestValue = kInf;
    std::vector<double> bestX;

    void run() {
      LPBasis root;
      dive(root, 0);
    }

    void dive(const LPBasis& parentBasis, int depth) {
      owner->bnbNodes_.fetch_add(1, std::memory_order_relaxed);
      LPSolution sol = solve_lp(p, parentBasis.valid ? &parentBasis : nullptr);
      if (sol.status == LPStatus::Infeasible) return;
      if (sol.status == LPStatus::Unbounded)
        throw std::runtime_error("block sub-problem is unbounded");
      if (sol.status == LPStatus::Stalled)
        throw std::runtime_error("simplex stalled in branch and bound");
      if (hasIncumbent && sol.value > bestValue + 1e-9) return;  // keep ties

      int branchVar = -1;
      double bestFrac = 1e-7;
      for (int j = 0; j < nBin; ++j) {
        double f = std::fabs(sol.x[j] - std::round(sol.x[j]));
        double dist = 0.5 - std::fabs(sol.x[j] - 0.5);
        if (f > 1e-7 && dist > bestFrac) {
          bestFrac = dist;
          branchVar = j;
        }
      }
      if (branchVar < 0) {
        // Integral: candidate incumbent. Lexicographic preference among
        // encountered equal-value solutions keeps results reproducible.
        std::vector<double> x(sol.x);
        for (int j = 0; j < nBin; ++j) x[j] = std::round(x[j]);
        std::vector<double> xb(x.begin(), x.begin() + nBin);
        std::vector<double> yb(x.begin() + nBin, x.begin() + nBin + nCont);
        double value = owner->exactValue(q, xb, yb);
        if (!hasIncumbent || value < bestValue - 1e-9 ||
            (value < bestValue + 1e-9 && lexSmaller(x))) {
          bestValue = hasIncumbent ? std::min(bestValue, value) : value;
          bestX = x;
          hasIncumbent = true;
        }
        return;
      }
      double lo = p.lo[branchVar], hi = p.hi[branchVar];
      p.lo[branchVar] = p.hi[branchVar] = 0.0;
      dive(sol.basis, depth + 1);
      p.lo[branchVar] = p.hi[branchVar] = 1.0;
      dive(sol.basis, depth + 1);
      p.lo[branchVar] = lo;
      p.hi[branchVar] = hi;
    }

    bool lexSmaller(const std::vector<double>& x) const {
      for (int j = 0; j < nBin; ++j) {
        double a = x[j], b = bestX[j];
        if (a < b - 0.5) return true;
        if (a > b + 0.5) return false;
      }
      return false;
    }
  };

  const Instance& inst_;
  BlockCoupling coupling_;
  std::map<std::pair<int, std::uint64_t>, Completion> cache_;
  std::mutex cacheMutex_;
  std::atomic<long long> mipSolves_{0};
  std::atomic<long long> bnbNodes_{0};
};

// Exhaustive desk-scale scan: phi is the largest |optimal completion value|
// over every binary assignment of every block.
inline InstanceStats compute_instance_stats(BlockSolver& solver,
                                            int capBits = 20) {
  const Instance& inst = solver.instance();
  InstanceStats stats;
  std::set<std::int64_t> gids;
  for (const auto& e : inst.edges)
    for (const auto& p : e.pairs) gids.insert(p.globalId);
  stats.nCoupled = static_cast<int>(gids.size());
  for (std::size_t i = 0; i < inst.blocks.size(); ++i) {
    const Block& b = inst.blocks[i];
    if (b.nBin > capBits)
      throw std::invalid_argument("block too large for the stats scan");
    for (std::uint64_t mask = 0; mask < (1ull << b.nBin); ++mask) {
      SubproblemQuery q;
      q.blockIdx = static_cast<int>(i);
      q.xCost = b.c;
      q.yCost = b.d;
      for (int j = 0; j < b.nBin; ++j)
        q.fixedBinaries.emplace_back(j, static_cast<int>((mask >> j) & 1));
      auto r = solver.solveMip(q);
      if (r.status == SubproblemResult::Status::Optimal)
        stats.phi = std::max(stats.phi, std::fabs(r.value));
    }
  }
  return stats;
}

// Convenience wrappers matching the operation names.
inline SubproblemResult solve_block_mip(BlockSolver& solver,
                                        const SubproblemQuery& q) {
  return solver.solveMip(q);
}
inline SubproblemResult solve_vl_subproblem(BlockSolver& solver,
                                            const SubproblemQuery& q) {
  return solver.solveVertexPenalized(q);
}

}  // namespace decompdual
