#pragma once

#include <atomic>
#include <bit>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <thread>
#include <vector>

#include "decompdual/model.hpp"
#include "decompdual/subsolve.hpp"

namespace decompdual {

// One multiplier coordinate. Lambda entries are keyed by (edge, pair index),
// monomial entries by (edge, subset mask over the edge's pairs), vertex
// entries by (edge, assignment key over the edge's pairs). The lower-id
// block of every canonical edge receives the + sign.
struct DualKey {
  enum class Kind : std::uint8_t { Lambda = 0, Monomial = 1, Vertex = 2 };
  Kind kind = Kind::Lambda;
  int edge = 0;
  std::uint64_t index = 0;

  friend bool operator<(const DualKey& a, const DualKey& b) {
    if (a.kind != b.kind) return a.kind < b.kind;
    if (a.edge != b.edge) return a.edge < b.edge;
    return a.index < b.index;
  }
  friend bool operator==(const DualKey& a, const DualKey& b) {
    return a.kind == b.kind && a.edge == b.edge && a.index == b.index;
  }
};

using DualVector = std::map<DualKey, double>;

struct DualIterate {
  DualVector v;

  double get(const DualKey& k) const {
    auto it = v.find(k);
    return it == v.end() ? 0.0 : it->second;
  }
  void setLambda(int edge, int pair, double val) {
    v[DualKey{DualKey::Kind::Lambda, edge, static_cast<std::uint64_t>(pair)}] = val;
  }
  void setMuMonomial(int edge, std::uint32_t subset, double val) {
    v[DualKey{DualKey::Kind::Monomial, edge, subset}] = val;
  }
  void setMuVertex(int edge, std::uint64_t vertex, double val) {
    v[DualKey{DualKey::Kind::Vertex, edge, vertex}] = val;
  }
};

inline DualVector& axpy(DualVector& out, double a, const DualVector& g) {
  for (const auto& [k, val] : g) {
    double nv = (out.count(k) ? out[k] : 0.0) + a * val;
    if (nv == 0.0)
      out.erase(k);
    else
      out[k] = nv;
  }
  return out;
}

inline double dot(const DualVector& a, const DualVector& b) {
  double s = 0.0;
  const DualVector& small = a.size() <= b.size() ? a : b;
  const DualVector& large = a.size() <= b.size() ? b : a;
  for (const auto& [k, val] : small) {
    auto it = large.find(k);
    if (it != large.end()) s += val * it->second;
  }
  return s;
}

inline double normSq(const DualVector& a) {
  double s = 0.0;
  for (const auto& [k, val] : a) s += val * val;
  return s;
}

struct EvalResult {
  double value = 0.0;
  bool infeasible = false;  // some block infeasible: dual reads +inf
  DualVector subgrad;
  struct BlockSol {
    std::vector<double> x, y;
    double value = 0.0;
  };
  std::vector<BlockSol> blockSolutions;
};

enum class DualMethod { Classical, Monomial, Vertex };

// Evaluates the dual functions by assembling per-block queries from a dual
// iterate, solving the blocks (optionally in parallel), and reducing values
// and subgradients in fixed block order.
class DualEvaluator {
 public:
  DualEvaluator(BlockSolver& solver, int jobs = 1)
      : solver_(solver), jobs_(jobs) {}

  const Instance& instance() const { return solver_.instance(); }

  EvalResult evalClassical(const DualIterate& it) {
    return evaluate(DualMethod::Classical, it, nullptr, 1.0);
  }

  EvalResult evalMonomial(const MonomialFamily& fam, const DualIterate& it) {
    return evaluate(DualMethod::Monomial, it, &fam, 1.0);
  }

  EvalResult evalVertex(const DualIterate& it, double vcutScale = 1.0) {
    requireStarWithCommonSharedSet("V-Lagrangian evaluation");
    return evaluate(DualMethod::Vertex, it, nullptr, vcutScale);
  }

  // Star check shared by the V-dual and the scenario decomposition loop:
  // every edge must carry the same global-id set, so vertex keys mean the
  // same assignment in every block.
  void requireStarWithCommonSharedSet(const std::string& who) const {
    const Instance& inst = instance();
    if (inst.edges.empty()) throw std::invalid_argument(who + ": no coupling edges");
    std::vector<std::int64_t> gids;
    for (const auto& p : inst.edges[0].pairs) gids.push_back(p.globalId);
    for (const auto& e : inst.edges) {
      std::vector<std::int64_t> g2;
      for (const auto& p : e.pairs) g2.push_back(p.globalId);
      if (g2 != gids)
        throw std::invalid_argument(
            who + ": requires a two-block or star instance whose edges all "
                  "share one set of coupled variables");
    }
    if (inst.edges.size() > 1) {
      // Star: one block common to all edges.
      int center = -1;
      for (int cand : {inst.edges[0].blockA, inst.edges[0].blockB}) {
        bool all = true;
        for (const auto& e : inst.edges)
          all &= e.blockA == cand || e.blockB == cand;
        if (all) center = cand;
      }
      if (center < 0)
        throw std::invalid_argument(
            who + ": requires a two-block or star instance");
    }
  }

 private:
  BlockSolver& solver_;
  int jobs_;

  EvalResult evaluate(DualMethod method, const DualIterate& it,
                      const MonomialFamily* fam, double scale) {
    const Instance& inst = instance();
    const int nb = static_cast<int>(inst.blocks.size());

    std::vector<SubproblemQuery> queries(nb);
    for (int i = 0; i < nb; ++i) {
      queries[i].blockIdx = i;
      queries[i].xCost = inst.blocks[i].c;
      queries[i].yCost = inst.blocks[i].d;
    }
    for (std::size_t ei = 0; ei < inst.edges.size(); ++ei) {
      const auto& e = inst.edges[ei];
      int ia = inst.blockIndex(e.blockA), ib = inst.blockIndex(e.blockB);
      for (std::size_t pi = 0; pi < e.pairs.size(); ++pi) {
        double lam = it.get({DualKey::Kind::Lambda, static_cast<int>(ei), pi});
        if (lam == 0.0) continue;
        queries[ia].xCost[e.pairs[pi].localA] += lam;
        queries[ib].xCost[e.pairs[pi].localB] -= lam;
      }
    }
    if (method == DualMethod::Monomial) {
      for (std::size_t ei = 0; ei < inst.edges.size(); ++ei) {
        const auto& e = inst.edges[ei];
        int ia = inst.blockIndex(e.blockA), ib = inst.blockIndex(e.blockB);
        auto applyMu = [&](std::uint32_t subset, double mu) {
          if (mu == 0.0) return;
          std::vector<int> la, lb;
          for (int s = 0; s < static_cast<int>(e.pairs.size()); ++s) {
            if (!((subset >> s) & 1)) continue;
            la.push_back(e.pairs[s].localA);
            lb.push_back(e.pairs[s].localB);
          }
          std::sort(la.begin(), la.end());
          std::sort(lb.begin(), lb.end());
          queries[ia].monomialCost[la] += mu;
          queries[ib].monomialCost[lb] -= mu;
        };
        if (fam) {
          for (std::uint32_t subset : fam->perEdge[ei])
            applyMu(subset, it.get({DualKey::Kind::Monomial, static_cast<int>(ei), subset}));
        } else {
          for (const auto& [k, mu] : it.v)
            if (k.kind == DualKey::Kind::Monomial && k.edge == static_cast<int>(ei))
              applyMu(static_cast<std::uint32_t>(k.index), mu);
        }
      }
    }
    if (method == DualMethod::Vertex) {
      for (const auto& [k, mu] : it.v) {
        if (k.kind != DualKey::Kind::Vertex || mu == 0.0) continue;
        const auto& e = inst.edges[k.edge];
        int ia = inst.blockIndex(e.blockA), ib = inst.blockIndex(e.blockB);
        queries[ia].vertexPenalty[k.index] += scale * mu;
        queries[ib].vertexPenalty[k.index] -= scale * mu;
      }
      for (auto& q : queries) {
        for (auto i2 = q.vertexPenalty.begin(); i2 != q.vertexPenalty.end();)
          i2 = i2->second == 0.0 ? q.vertexPenalty.erase(i2) : std::next(i2);
      }
    }

    std::vector<SubproblemResult> results(nb);
    solveAll(queries, results);

    EvalResult res;
    res.blockSolutions.resize(nb);
    for (int i = 0; i < nb; ++i) {
      if (results[i].status != SubproblemResult::Status::Optimal) {
        res.infeasible = true;
        res.value = kInf;
        return res;
      }
      res.blockSolutions[i] = {results[i].xStar, results[i].yStar, results[i].value};
      res.value += results[i].value;
    }

    // Subgradients from the block argmins. Lambda coordinates of the M-dual
    // participate only when the caller carries them; the default M-dual
    // folds them into the singleton monomials.
    bool reportLambda = method != DualMethod::Monomial;
    if (!reportLambda)
      for (const auto& [k, val] : it.v)
        reportLambda |= k.kind == DualKey::Kind::Lambda;
    for (std::size_t ei = 0; ei < inst.edges.size(); ++ei) {
      const auto& e = inst.edges[ei];
      int ia = inst.blockIndex(e.blockA), ib = inst.blockIndex(e.blockB);
      const auto& xa = results[ia].xStar;
      const auto& xb = results[ib].xStar;
      if (reportLambda) {
        for (std::size_t pi = 0; pi < e.pairs.size(); ++pi) {
          double g = xa[e.pairs[pi].localA] - xb[e.pairs[pi].localB];
          if (g != 0.0)
            res.subgrad[{DualKey::Kind::Lambda, static_cast<int>(ei), pi}] = g;
        }
      }
      if (method == DualMethod::Monomial && fam) {
        for (std::uint32_t subset : fam->perEdge[ei]) {
          double pa = 1.0, pb = 1.0;
          for (int s = 0; s < static_cast<int>(e.pairs.size()); ++s) {
            if (!((subset >> s) & 1)) continue;
            pa *= xa[e.pairs[s].localA] > 0.5 ? 1.0 : 0.0;
            pb *= xb[e.pairs[s].localB] > 0.5 ? 1.0 : 0.0;
          }
          double g = pa - pb;
          if (g != 0.0)
            res.subgrad[{DualKey::Kind::Monomial, static_cast<int>(ei), subset}] = g;
        }
      }
      if (method == DualMethod::Vertex) {
        std::uint64_t keyA = 0, keyB = 0;
        for (std::size_t s = 0; s < e.pairs.size(); ++s) {
          if (xa[e.pairs[s].localA] > 0.5) keyA |= 1ull << s;
          if (xb[e.pairs[s].localB] > 0.5) keyB |= 1ull << s;
        }
        if (keyA != keyB) {
          res.subgrad[{DualKey::Kind::Vertex, static_cast<int>(ei), keyA}] += scale;
          res.subgrad[{DualKey::Kind::Vertex, static_cast<int>(ei), keyB}] -= scale;
        }
      }
    }
    return res;
  }

  void solveAll(const std::vector<SubproblemQuery>& queries,
                std::vector<SubproblemResult>& results) {
    const int nb = static_cast<int>(queries.size());
    if (jobs_ <= 1 || nb <= 1) {
      for (int i = 0; i < nb; ++i) results[i] = solver_.solve(queries[i]);
      return;
    }
    // Fixed slot per block keeps the reduction order independent of the
    // thread schedule.
    std::vector<std::thread> pool;
    std::atomic<int> nextIdx{0};
    int workers = std::min(jobs_, nb);
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&]() {
        while (true) {
          int i = nextIdx.fetch_add(1);
          if (i >= nb) return;
          results[i] = solver_.solve(queries[i]);
        }
      });
    }
    for (auto& t : pool) t.join();
  }
};

// ---------------------------------------------------------------------------
// Primal recovery by cross-fixing.

struct PrimalCandidate {
  int blockIdx = 0;
  std::vector<double> x;
};

struct PrimalBound {
  bool found = false;
  double value = kInf;
  std::vector<EvalResult::BlockSol> blockSolutions;
};

// Fixes a candidate's matched coordinates, walks the coupling graph
// breadth-first, and solves every block with all propagated pins applied;
// each solved block pins its own matched coordinates for its neighbours.
inline PrimalBound recover_primal_bound(BlockSolver& solver,
                                        const std::vector<PrimalCandidate>& cands) {
  const Instance& inst = solver.instance();
  const BlockCoupling& bc = solver.coupling();
  const int nb = static_cast<int>(inst.blocks.size());
  PrimalBound best;

  std::vector<std::vector<int>> adj(nb);
  for (const auto& e : inst.edges) {
    int ia = inst.blockIndex(e.blockA), ib = inst.blockIndex(e.blockB);
    adj[ia].push_back(ib);
    adj[ib].push_back(ia);
  }
  for (auto& a : adj) std::sort(a.begin(), a.end());

  for (const auto& cand : cands) {
    std::map<std::int64_t, int> gidVal;
    for (const auto& [gid, local] : bc.matched[cand.blockIdx])
      gidVal[gid] = cand.x[local] > 0.5 ? 1 : 0;

    std::vector<EvalResult::BlockSol> sols(nb);
    double total = 0.0;
    bool ok = true;
    std::vector<char> visited(nb, 0);
    std::vector<int> order;
    // BFS from the candidate block, then any unreached blocks in id order.
    std::vector<int> queue{cand.blockIdx};
    visited[cand.blockIdx] = 1;
    for (std::size_t qi = 0; qi < queue.size(); ++qi) {
      int u = queue[qi];
      order.push_back(u);
      for (int vtx : adj[u])
        if (!visited[vtx]) {
          visited[vtx] = 1;
          queue.push_back(vtx);
        }
    }
    for (int i = 0; i < nb; ++i)
      if (!visited[i]) order.push_back(i);

    for (int u : order) {
      SubproblemQuery q;
      q.blockIdx = u;
      q.xCost = inst.blocks[u].c;
      q.yCost = inst.blocks[u].d;
      for (const auto& [gid, local] : bc.matched[u]) {
        auto it = gidVal.find(gid);
        if (it != gidVal.end()) q.fixedBinaries.emplace_back(local, it->second);
      }
      auto r = solver.solveMip(q);
      if (r.status != SubproblemResult::Status::Optimal) {
        ok = false;
        break;
      }
      for (const auto& [gid, local] : bc.matched[u])
        gidVal.emplace(gid, r.xStar[local] > 0.5 ? 1 : 0);
      sols[u] = {r.xStar, r.yStar, r.value};
      total += r.value;
    }
    if (ok && total < best.value - 1e-12) {
      best.found = true;
      best.value = total;
      best.blockSolutions = sols;
    } else if (ok && !best.found) {
      best.found = true;
      best.value = total;
      best.blockSolutions = sols;
    }
  }
  return best;
}

// Coupled bound with every shared coordinate pinned to a constant bit; the
// all-zero pin always succeeds on packing-style instances and backstops
// candidates whose cross-fixes are infeasible.
inline PrimalBound fixed_shared_bound(BlockSolver& solver, int bit) {
  const Instance& inst = solver.instance();
  const BlockCoupling& bc = solver.coupling();
  PrimalBound out;
  std::vector<EvalResult::BlockSol> sols(inst.blocks.size());
  double total = 0.0;
  for (std::size_t i = 0; i < inst.blocks.size(); ++i) {
    SubproblemQuery q;
    q.blockIdx = static_cast<int>(i);
    q.xCost = inst.blocks[i].c;
    q.yCost = inst.blocks[i].d;
    for (const auto& [gid, local] : bc.matched[i])
      q.fixedBinaries.emplace_back(local, bit);
    auto r = solver.solveMip(q);
    if (r.status != SubproblemResult::Status::Optimal) return out;
    sols[i] = {r.xStar, r.yStar, r.value};
    total += r.value;
  }
  out.found = true;
  out.value = total;
  out.blockSolutions = std::move(sols);
  return out;
}

// ---------------------------------------------------------------------------
// Scenario decomposition.

struct SDAOptions {
  enum class LambdaPolicy { FixedZero, Subgradient };
  LambdaPolicy policy = LambdaPolicy::FixedZero;
  int budget = 1000;
  double tol = 1e-9;
};

struct SDAState {
  std::set<std::uint64_t> removed;
  double UB = kInf;
  double LB = -kInf;
  PrimalBound incumbent;
  int iterations = 0;
  bool infeasibleStop = false;
  std::vector<std::pair<double, double>> history;  // (LB, UB) after each pass
};

// Instead of pricing the shared assignments, each round removes the block
// argmins from every block and cross-fixes them for an upper bound; an
// infeasible restricted block certifies that the incumbent is optimal.
inline SDAState run_sda(BlockSolver& solver, const SDAOptions& opts) {
  const Instance& inst = solver.instance();
  const BlockCoupling& bc = solver.coupling();
  DualEvaluator eval(solver);
  eval.requireStarWithCommonSharedSet("scenario decomposition");
  const int nb = static_cast<int>(inst.blocks.size());

  SDAState st;
  DualIterate lambda;
  while (st.iterations < opts.budget && st.UB - st.LB > opts.tol) {
    // Restricted block minima under the current exclusions.
    std::vector<SubproblemResult> results(nb);
    bool anyInfeasible = false;
    std::vector<SubproblemQuery> queries(nb);
    for (int i = 0; i < nb; ++i) {
      queries[i].blockIdx = i;
      queries[i].xCost = inst.blocks[i].c;
      queries[i].yCost = inst.blocks[i].d;
      queries[i].excluded = st.removed;
    }
    for (std::size_t ei = 0; ei < inst.edges.size(); ++ei) {
      const auto& e = inst.edges[ei];
      int ia = inst.blockIndex(e.blockA), ib = inst.blockIndex(e.blockB);
      for (std::size_t pi = 0; pi < e.pairs.size(); ++pi) {
        double l = lambda.get({DualKey::Kind::Lambda, static_cast<int>(ei), pi});
        if (l == 0.0) continue;
        queries[ia].xCost[e.pairs[pi].localA] += l;
        queries[ib].xCost[e.pairs[pi].localB] -= l;
      }
    }
    for (int i = 0; i < nb; ++i) {
      results[i] = solver.solveMip(queries[i]);
      anyInfeasible |= results[i].status != SubproblemResult::Status::Optimal;
    }
    ++st.iterations;
    if (anyInfeasible) {
      // Every remaining assignment of some block is gone: the incumbent
      // upper bound is the optimum.
      st.infeasibleStop = true;
      st.LB = st.UB;
      st.history.emplace_back(st.LB, st.UB);
      break;
    }
    double lbCand = 0.0;
    for (int i = 0; i < nb; ++i) lbCand += results[i].value;
    st.LB = std::max(st.LB, lbCand);

    // Cross-fix every argmin for the upper bound.
    std::vector<PrimalCandidate> cands;
    for (int i = 0; i < nb; ++i) cands.push_back({i, results[i].xStar});
    PrimalBound pb = recover_primal_bound(solver, cands);
    if (pb.found && pb.value < st.UB) {
      st.UB = pb.value;
      st.incumbent = pb;
    }

    // Remove the shared assignments just seen.
    for (int i = 0; i < nb; ++i) {
      std::uint64_t key = 0;
      const auto& matched = bc.matched[i];
      for (std::size_t s = 0; s < matched.size(); ++s)
        if (results[i].xStar[matched[s].second] > 0.5) key |= 1ull << s;
      st.removed.insert(key);
    }

    if (opts.policy == SDAOptions::LambdaPolicy::Subgradient) {
      // One Polyak step toward the restricted dual.
      DualVector g;
      for (std::size_t ei = 0; ei < inst.edges.size(); ++ei) {
        const auto& e = inst.edges[ei];
        int ia = inst.blockIndex(e.blockA), ib = inst.blockIndex(e.blockB);
        for (std::size_t pi = 0; pi < e.pairs.size(); ++pi) {
          double gv = results[ia].xStar[e.pairs[pi].localA] -
                      results[ib].xStar[e.pairs[pi].localB];
          if (gv != 0.0)
            g[{DualKey::Kind::Lambda, static_cast<int>(ei), pi}] = gv;
        }
      }
      double gn = normSq(g);
      if (gn > 1e-14 && std::isfinite(st.UB)) {
        double step = (st.UB - lbCand) / gn;
        if (step > 0) axpy(lambda.v, step, g);
      }
    }
    st.history.emplace_back(st.LB, st.UB);
  }
  if (st.UB <= st.LB) st.LB = st.UB;
  return st;
}

}  // namespace decompdual
