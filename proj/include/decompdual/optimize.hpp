#pragma once

#include <chrono>
#include <cmath>
#include <functional>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "decompdual/duals.hpp"
#include "decompdual/lp.hpp"
#include "decompdual/qp.hpp"

namespace decompdual {

// The optimizers maximize a concave dual L through its evaluation oracle by
// minimizing f = -L internally. Iterates live in the sparse multiplier
// space; master problems densify only the coordinates some cut touches, and
// untouched coordinates provably stay at the center, so the restriction is
// exact.

using DualFn = std::function<EvalResult(const DualIterate&)>;

struct TraceRow {
  int iter = 0;
  double value = 0.0;   // L at the iterate
  double lb = 0.0;      // best dual value so far (lower bound on max L)
  double ub = 0.0;      // cut-model bound (upper bound on max L)
  double normG = 0.0;
  int muNnz = 0;
  double seconds = 0.0;
};

// One linearization of f = -L kept by the bundle.
struct Cut {
  DualVector point;
  double value = 0.0;  // f at the point
  DualVector subgrad;
};

struct OptimizerState {
  double bestValue = -kInf;  // best L seen
  double modelBound = kInf;  // upper bound on max L from the model
  DualIterate bestIterate;
  DualIterate iterate;
  int iterations = 0;
  int evaluations = 0;
  bool optimal = false;
  bool infeasibleDual = false;
  std::vector<Cut> cuts;
  std::vector<TraceRow> trace;
};

struct SubgradRule {
  enum class Kind { FixedStep, Polyak };
  Kind kind = Kind::Polyak;
  double value = 0.0;  // step size, or the Polyak target on the L scale

  static SubgradRule fixedStep(double mu) { return {Kind::FixedStep, mu}; }
  static SubgradRule polyak(double targetL) { return {Kind::Polyak, targetL}; }
};

namespace detail {

struct BundleCut {
  DualVector point;
  double fval = 0.0;  // f = -L at the point
  DualVector grad;    // subgradient of f
};

struct CoordSpace {
  std::vector<DualKey> keys;
  std::map<DualKey, int> index;

  void absorb(const DualVector& v) {
    for (const auto& [k, val] : v)
      if (!index.count(k)) {
        index[k] = static_cast<int>(keys.size());
        keys.push_back(k);
      }
  }
  std::vector<double> densify(const DualVector& v) const {
    std::vector<double> out(keys.size(), 0.0);
    for (const auto& [k, val] : v) {
      auto it = index.find(k);
      if (it != index.end()) out[it->second] = val;
    }
    return out;
  }
  DualVector sparsify(const std::vector<double>& dense,
                      const DualVector& offActive) const {
    DualVector out;
    for (const auto& [k, val] : offActive)
      if (!index.count(k) && val != 0.0) out[k] = val;
    for (std::size_t i = 0; i < keys.size(); ++i)
      if (dense[i] != 0.0) out[keys[i]] = dense[i];
    return out;
  }
};

inline int muSupport(const DualVector& v) {
  int c = 0;
  for (const auto& [k, val] : v)
    if (k.kind != DualKey::Kind::Lambda && val != 0.0) ++c;
  return c;
}

// Model LP over the active coordinates: min t s.t. t >= floor and
// t >= cut_j(lambda). Returns the optimal value and the minimizing lambda
// (used as a feasible start for the level projection).
inline std::pair<double, std::vector<double>> modelMinimum(
    const std::vector<BundleCut>& cuts, const CoordSpace& space, double floorF,
    bool nonnegMu = false) {
  LPProblem p;
  const int d = static_cast<int>(space.keys.size());
  for (int i = 0; i < d; ++i) {
    bool bounded = nonnegMu && space.keys[i].kind != DualKey::Kind::Lambda;
    p.addVar(0.0, bounded ? 0.0 : -kInf, kInf);
  }
  int t = p.addVar(1.0, -kInf, kInf);
  p.addRow({{t, -1.0}}, RowSense::LE, -floorF);
  for (const auto& c : cuts) {
    std::vector<std::pair<int, double>> a;
    double e = c.fval - dot(c.grad, c.point);
    for (const auto& [k, val] : c.grad) {
      auto it = space.index.find(k);
      if (it != space.index.end() && val != 0.0) a.emplace_back(it->second, val);
    }
    a.emplace_back(t, -1.0);
    p.addRow(std::move(a), RowSense::LE, -e);
  }
  auto sol = solve_lp(p);
  if (sol.status != LPStatus::Optimal)
    throw std::runtime_error("bundle model LP failed");
  return {sol.value, std::vector<double>(sol.x.begin(), sol.x.begin() + d)};
}

inline std::vector<DenseCut> densifyCuts(const std::vector<BundleCut>& cuts,
                                         const CoordSpace& space) {
  std::vector<DenseCut> out;
  for (const auto& c : cuts) {
    DenseCut dc;
    dc.g = space.densify(c.grad);
    dc.e = c.fval - dot(c.grad, c.point);
    out.push_back(std::move(dc));
  }
  return out;
}

inline std::vector<int> muCoordinates(const CoordSpace& space) {
  std::vector<int> out;
  for (std::size_t i = 0; i < space.keys.size(); ++i)
    if (space.keys[i].kind != DualKey::Kind::Lambda)
      out.push_back(static_cast<int>(i));
  return out;
}

}  // namespace detail

struct OptimizeOptions {
  int budget = 200;
  double tol = 1e-6;
  DualIterate start;
  // Upper bound on max L (e.g. a feasible primal value); the bundle floors
  // and the default Polyak target come from here.
  double primalUpperBound = kInf;
  double levelAlpha = 0.3;
  bool nonnegativeMu = false;
  std::function<void(const TraceRow&)> onTrace;
};

inline OptimizerState subgradient_maximize(const DualFn& evalFn,
                                           const SubgradRule& rule,
                                           const OptimizeOptions& opts) {
  if (rule.kind == SubgradRule::Kind::Polyak && !std::isfinite(rule.value) &&
      !std::isfinite(opts.primalUpperBound))
    throw std::invalid_argument("Polyak stepping needs a finite target");
  OptimizerState st;
  st.iterate = opts.start;
  auto t0 = std::chrono::steady_clock::now();
  for (int iter = 0; iter < opts.budget; ++iter) {
    EvalResult r = evalFn(st.iterate);
    ++st.evaluations;
    ++st.iterations;
    if (r.infeasible) {
      st.infeasibleDual = true;
      break;
    }
    if (r.value > st.bestValue) {
      st.bestValue = r.value;
      st.bestIterate = st.iterate;
    }
    double gn = normSq(r.subgrad);
    TraceRow row{iter + 1, r.value, st.bestValue, st.modelBound, std::sqrt(gn),
                 detail::muSupport(st.iterate.v),
                 std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
                     .count()};
    st.trace.push_back(row);
    if (opts.onTrace) opts.onTrace(row);
    if (gn <= 1e-18) {
      st.optimal = true;  // no ascent direction: the iterate is optimal
      st.modelBound = r.value;
      break;
    }
    double step;
    if (rule.kind == SubgradRule::Kind::FixedStep) {
      step = rule.value;
    } else {
      double target = rule.value;
      if (!std::isfinite(target)) target = opts.primalUpperBound;
      step = std::max(0.0, (target - r.value) / gn);
      if (step == 0.0) {
        st.optimal = true;
        break;
      }
    }
    axpy(st.iterate.v, step, r.subgrad);  // ascent on L
    if (opts.nonnegativeMu) {
      for (auto it = st.iterate.v.begin(); it != st.iterate.v.end();) {
        if (it->first.kind != DualKey::Kind::Lambda && it->second < 0.0)
          it = st.iterate.v.erase(it);
        else
          ++it;
      }
    }
  }
  return st;
}

namespace detail {

enum class BundleKind { Proximal, Level };

inline OptimizerState bundle_maximize(BundleKind kind, const DualFn& evalFn,
                                      const OptimizeOptions& opts) {
  if (!std::isfinite(opts.primalUpperBound))
    throw std::invalid_argument(
        "bundle methods need a finite primal upper bound for the model floor");
  OptimizerState st;
  st.iterate = opts.start;
  const double floorF = -opts.primalUpperBound;  // lower bound on f = -L
  double lbF = floorF;                            // model bound on min f
  double ubF = kInf;                              // best f seen
  std::vector<BundleCut> cuts;
  CoordSpace space;
  space.absorb(opts.start.v);
  std::vector<double> lastSolution;

  auto t0 = std::chrono::steady_clock::now();
  for (int iter = 0; iter < opts.budget; ++iter) {
    EvalResult r = evalFn(st.iterate);
    ++st.evaluations;
    ++st.iterations;
    if (r.infeasible) {
      st.infeasibleDual = true;
      break;
    }
    double f = -r.value;
    DualVector gradF;
    axpy(gradF, -1.0, r.subgrad);
    if (f < ubF) {
      ubF = f;
      st.bestValue = r.value;
      st.bestIterate = st.iterate;
    }
    // Parallel cuts are dominated by the one with the larger offset; dual
    // evaluations revisit argmin pairs constantly, so this prunes a lot.
    {
      double eNew = f - dot(gradF, st.iterate.v);
      bool handled = false;
      for (auto& c : cuts) {
        if (c.grad != gradF) continue;
        double eOld = c.fval - dot(c.grad, c.point);
        if (eNew > eOld + 1e-14) {
          c.point = st.iterate.v;
          c.fval = f;
        }
        handled = true;
        break;
      }
      if (!handled) cuts.push_back({st.iterate.v, f, gradF});
    }
    space.absorb(st.iterate.v);
    space.absorb(gradF);

    // Refresh the model bound (monotone by construction).
    auto [modelVal, modelArg] = modelMinimum(cuts, space, floorF, opts.nonnegativeMu);
    lbF = std::max(lbF, modelVal);
    st.modelBound = -lbF;

    double gn = std::sqrt(normSq(r.subgrad));
    TraceRow row{iter + 1, r.value, st.bestValue, st.modelBound, gn,
                 muSupport(st.iterate.v),
                 std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
                     .count()};
    st.trace.push_back(row);
    if (opts.onTrace) opts.onTrace(row);

    if (ubF - lbF <= opts.tol * std::max(1.0, std::fabs(ubF))) {
      st.optimal = true;
      break;
    }
    if (iter + 1 >= opts.budget) break;

    // Drop the loosest inactive cut when the bundle outgrows its cap.
    if (cuts.size() > 500) {
      auto center = space.densify(st.iterate.v);
      std::size_t worst = 0;
      double worstSlack = -1.0;
      for (std::size_t j = 0; j + 1 < cuts.size(); ++j) {
        double v = cuts[j].fval - dot(cuts[j].grad, cuts[j].point);
        auto g = space.densify(cuts[j].grad);
        for (std::size_t i = 0; i < g.size(); ++i) v += g[i] * center[i];
        double slack = f - v;
        if (slack > worstSlack) {
          worstSlack = slack;
          worst = j;
        }
      }
      cuts.erase(cuts.begin() + worst);
    }

    auto dense = detail::densifyCuts(cuts, space);
    auto center = space.densify(st.iterate.v);
    std::vector<int> nonneg;
    if (opts.nonnegativeMu) nonneg = detail::muCoordinates(space);
    const std::vector<int>* nnp = opts.nonnegativeMu ? &nonneg : nullptr;
    QPResult master;
    if (kind == BundleKind::Proximal) {
      double alpha = normSq(r.subgrad) > 1e-16 ? (f - lbF) / normSq(r.subgrad) : 1.0;
      if (lastSolution.size() < center.size())
        lastSolution.resize(center.size(), 0.0);
      master = solve_prox_master(dense, center, alpha, lbF, nnp, &lastSolution);
      if (!master.ok)
        throw std::runtime_error("proximal master failed: " + master.error);
      lastSolution.assign(master.z.begin(), master.z.begin() + center.size());
    } else {
      double level = opts.levelAlpha * lbF + (1.0 - opts.levelAlpha) * ubF;
      if (modelArg.size() < space.keys.size()) modelArg.resize(space.keys.size(), 0.0);
      master = solve_level_master(dense, center, level, &modelArg, nnp);
      if (!master.ok && master.error == "empty level set") {
        // Stale bounds; refresh against the best value and retry once.
        level = opts.levelAlpha * lbF + (1.0 - opts.levelAlpha) * (ubF + 1e-12);
        master = solve_level_master(dense, center, level, &modelArg, nnp);
      }
      if (!master.ok)
        throw std::runtime_error("level master failed: " + master.error);
      lastSolution.assign(master.z.begin(), master.z.begin() + center.size());
    }
    st.iterate.v = space.sparsify(lastSolution, st.iterate.v);
  }
  for (const auto& c : cuts) st.cuts.push_back({c.point, c.fval, c.grad});
  return st;
}

}  // namespace detail

inline OptimizerState proximal_bundle_maximize(const DualFn& evalFn,
                                               const OptimizeOptions& opts) {
  return detail::bundle_maximize(detail::BundleKind::Proximal, evalFn, opts);
}

inline OptimizerState level_bundle_maximize(const DualFn& evalFn,
                                            const OptimizeOptions& opts) {
  return detail::bundle_maximize(detail::BundleKind::Level, evalFn, opts);
}

inline DualFn make_dual_fn(DualEvaluator& eval, DualMethod method,
                           const MonomialFamily* fam = nullptr,
                           double vcutScale = 1.0) {
  switch (method) {
    case DualMethod::Classical:
      return [&eval](const DualIterate& it) { return eval.evalClassical(it); };
    case DualMethod::Monomial:
      if (!fam) throw std::invalid_argument("monomial dual needs a family");
      return [&eval, fam](const DualIterate& it) {
        return eval.evalMonomial(*fam, it);
      };
    case DualMethod::Vertex:
      return [&eval, vcutScale](const DualIterate& it) {
        return eval.evalVertex(it, vcutScale);
      };
  }
  throw std::logic_error("unreachable");
}

// Warm-start carry-over: a classical iterate re-enters the monomial dual on
// the singleton coordinates (w_{j} = x_j) and the vertex dual unchanged,
// with zeros appended for every new multiplier.
inline DualIterate extend_for_method(const DualIterate& classic,
                                     DualMethod method) {
  if (method != DualMethod::Monomial) return classic;
  DualIterate out;
  for (const auto& [k, v] : classic.v) {
    if (k.kind == DualKey::Kind::Lambda)
      out.setMuMonomial(k.edge, 1u << k.index, v);
    else
      out.v[k] = v;
  }
  return out;
}

}  // namespace decompdual
