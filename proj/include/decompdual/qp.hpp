#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "decompdual/lp.hpp"

namespace decompdual {

// One linearization in master-problem coordinates: the model piece reads
// e + g'lambda (e folds the cut's anchor point into the constant).
struct DenseCut {
  std::vector<double> g;
  double e = 0.0;
};

struct QPResult {
  bool ok = false;
  std::vector<double> z;  // lambda, then t for the prox master
  double stationarity = 0.0;
  double primalFeas = 0.0;
  double complementarity = 0.0;
  int iterations = 0;
  std::string error;
};

namespace detail {

inline bool denseSolveInPlace(std::vector<double>& A, std::vector<double>& b,
                              int n) {
  for (int col = 0; col < n; ++col) {
    int piv = -1;
    double best = 1e-12;
    for (int r = col; r < n; ++r) {
      double v = std::fabs(A[static_cast<std::size_t>(r) * n + col]);
      if (v > best) best = v, piv = r;
    }
    if (piv < 0) return false;
    if (piv != col) {
      for (int k = 0; k < n; ++k)
        std::swap(A[static_cast<std::size_t>(piv) * n + k],
                  A[static_cast<std::size_t>(col) * n + k]);
      std::swap(b[piv], b[col]);
    }
    for (int r = 0; r < n; ++r) {
      if (r == col) continue;
      double f = A[static_cast<std::size_t>(r) * n + col] /
                 A[static_cast<std::size_t>(col) * n + col];
      if (f == 0.0) continue;
      for (int k = col; k < n; ++k)
        A[static_cast<std::size_t>(r) * n + k] -=
            f * A[static_cast<std::size_t>(col) * n + k];
      b[r] -= f * b[col];
    }
  }
  for (int i = 0; i < n; ++i) b[i] /= A[static_cast<std::size_t>(i) * n + i];
  return true;
}

// Primal active-set method for  min 1/2 z'Qz + q'z  s.t.  G z <= h, with Q
// diagonal PSD (strictly positive on the lambda block, zero on t). Requires
// a feasible start; blocking rows added during a move are automatically
// independent of the working set, so no explicit rank bookkeeping is needed.
struct ActiveSetQP {
  int dim = 0;
  std::vector<double> qdiag, qlin;
  std::vector<std::vector<double>> G;
  std::vector<double> h;

  QPResult solve(std::vector<double> z, std::vector<int> working) {
    QPResult res;
    const int mRows = static_cast<int>(G.size());
    const int maxIter = 120 + 12 * mRows;
    std::vector<double> nu;
    std::set<int> ignored;  // near-dependent rows, constant on the manifold
    for (int iter = 0; iter < maxIter; ++iter) {
      res.iterations = iter + 1;
      std::vector<double> zEq;
      if (!solveEQP(working, zEq, nu)) {
        res.error = "singular KKT system in working-set subproblem";
        fillResiduals(res, z, working, nu);
        return res;
      }
      double moveNorm = 0.0;
      for (int k = 0; k < dim; ++k)
        moveNorm = std::max(moveNorm, std::fabs(zEq[k] - z[k]));
      if (moveNorm <= 1e-11 * (1.0 + absMax(z))) {
        // Stationary on the working set; check multiplier signs.
        int worst = -1;
        double worstVal = -1e-9;
        for (std::size_t k = 0; k < working.size(); ++k)
          if (nu[k] < worstVal) worstVal = nu[k], worst = static_cast<int>(k);
        if (worst < 0) {
          res.ok = true;
          res.z = z;
          fillResiduals(res, z, working, nu);
          return res;
        }
        working.erase(working.begin() + worst);
        nu.erase(nu.begin() + worst);
        ignored.clear();
        continue;
      }
      // Step toward the EQP optimum until a new row blocks.
      double beta = 1.0;
      int blocking = -1;
      for (int r = 0; r < mRows; ++r) {
        if (ignored.count(r)) continue;
        bool inW = false;
        for (int wRow : working)
          if (wRow == r) {
            inW = true;
            break;
          }
        if (inW) continue;
        double gd = 0.0, gz = 0.0, gn = 0.0;
        for (int k = 0; k < dim; ++k) {
          gd += G[r][k] * (zEq[k] - z[k]);
          gz += G[r][k] * z[k];
          gn += G[r][k] * G[r][k];
        }
        if (gd <= 1e-11 * (1.0 + std::sqrt(gn) * moveNorm)) continue;
        double cap = (h[r] - gz) / gd;
        if (cap < beta - 1e-14) {
          beta = std::max(0.0, cap);
          blocking = r;
        }
      }
      for (int k = 0; k < dim; ++k) z[k] += beta * (zEq[k] - z[k]);
      // A blocking row that lies in the span of the working rows keeps a
      // constant value on the working manifold, so once touched it can
      // never block again; skipping it preserves the full-rank invariant.
      if (blocking >= 0) {
        if (dependentOnWorking(working, blocking)) {
          ignored.insert(blocking);
        } else {
          working.push_back(blocking);
          ignored.clear();
        }
      }
    }
    res.error = "active-set iteration limit";
    fillResiduals(res, z, working, nu);
    return res;
  }

  bool dependentOnWorking(const std::vector<int>& working, int row) const {
    const int k = static_cast<int>(working.size());
    double gn = 0.0;
    for (int i = 0; i < dim; ++i) gn += G[row][i] * G[row][i];
    if (k == 0) return gn <= 1e-20;
    // Least squares onto the span of the working rows via normal equations.
    std::vector<double> gram(static_cast<std::size_t>(k) * k, 0.0);
    std::vector<double> rhs(k, 0.0);
    for (int a = 0; a < k; ++a) {
      for (int b = 0; b < k; ++b) {
        double s = 0.0;
        for (int i = 0; i < dim; ++i) s += G[working[a]][i] * G[working[b]][i];
        gram[static_cast<std::size_t>(a) * k + b] = s;
      }
      double s = 0.0;
      for (int i = 0; i < dim; ++i) s += G[working[a]][i] * G[row][i];
      rhs[a] = s;
    }
    if (!denseSolveInPlace(gram, rhs, k)) return true;
    double resid = 0.0;
    for (int i = 0; i < dim; ++i) {
      double v = G[row][i];
      for (int a = 0; a < k; ++a) v -= rhs[a] * G[working[a]][i];
      resid += v * v;
    }
    return resid <= 1e-14 * (1.0 + gn);
  }

 private:
  static double absMax(const std::vector<double>& v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::fabs(x));
    return m;
  }

  bool solveEQP(const std::vector<int>& working, std::vector<double>& zOut,
                std::vector<double>& nuOut) const {
    const int k = static_cast<int>(working.size());
    const int n = dim + k;
    std::vector<double> K(static_cast<std::size_t>(n) * n, 0.0);
    std::vector<double> rhs(n, 0.0);
    for (int i = 0; i < dim; ++i) {
      K[static_cast<std::size_t>(i) * n + i] = qdiag[i];
      rhs[i] = -qlin[i];
    }
    for (int a = 0; a < k; ++a) {
      const auto& row = G[working[a]];
      for (int i = 0; i < dim; ++i) {
        K[static_cast<std::size_t>(i) * n + dim + a] = row[i];
        K[static_cast<std::size_t>(dim + a) * n + i] = row[i];
      }
      rhs[dim + a] = h[working[a]];
    }
    if (!denseSolveInPlace(K, rhs, n)) return false;
    zOut.assign(rhs.begin(), rhs.begin() + dim);
    nuOut.assign(rhs.begin() + dim, rhs.end());
    return true;
  }

  void fillResiduals(QPResult& res, const std::vector<double>& z,
                     const std::vector<int>& working,
                     const std::vector<double>& nu) const {
    if (res.z.empty()) res.z = z;
    double stat = 0.0;
    for (int i = 0; i < dim; ++i) {
      double g = qdiag[i] * z[i] + qlin[i];
      for (std::size_t a = 0; a < working.size() && a < nu.size(); ++a)
        g += nu[a] * G[working[a]][i];
      stat = std::max(stat, std::fabs(g));
    }
    double pf = 0.0, comp = 0.0;
    for (std::size_t r = 0; r < G.size(); ++r) {
      double gz = 0.0;
      for (int i = 0; i < dim; ++i) gz += G[r][i] * z[i];
      pf = std::max(pf, gz - h[r]);
    }
    for (std::size_t a = 0; a < working.size() && a < nu.size(); ++a) {
      double gz = 0.0;
      for (int i = 0; i < dim; ++i) gz += G[working[a]][i] * z[i];
      comp = std::max(comp, std::fabs(nu[a] * (gz - h[working[a]])));
    }
    res.stationarity = stat;
    res.primalFeas = pf;
    res.complementarity = comp;
  }
};

}  // namespace detail

// Proximal master:  min ||lam - center||^2 + alpha t
//                   s.t. t >= lbFloor, t >= e_j + g_j'lam,
//                        lam_i >= 0 for i in nonnegVars.
// Variable layout: z = (lam_0..lam_{d-1}, t). `startLambda` (when given)
// seeds the search near the previous master's solution.
inline QPResult solve_prox_master(const std::vector<DenseCut>& cuts,
                                  const std::vector<double>& center,
                                  double alpha, double lbFloor,
                                  const std::vector<int>* nonnegVars = nullptr,
                                  const std::vector<double>* startLambda = nullptr) {
  const int d = static_cast<int>(center.size());
  detail::ActiveSetQP qp;
  qp.dim = d + 1;
  qp.qdiag.assign(d + 1, 2.0);
  qp.qdiag[d] = 0.0;
  qp.qlin.assign(d + 1, 0.0);
  for (int i = 0; i < d; ++i) qp.qlin[i] = -2.0 * center[i];
  qp.qlin[d] = alpha;
  // Row 0 is the floor: -t <= -lbFloor.
  {
    std::vector<double> row(d + 1, 0.0);
    row[d] = -1.0;
    qp.G.push_back(std::move(row));
    qp.h.push_back(-lbFloor);
  }
  for (const auto& c : cuts) {
    std::vector<double> row(c.g);
    row.resize(d, 0.0);
    row.push_back(-1.0);
    qp.G.push_back(std::move(row));
    qp.h.push_back(-c.e);
  }
  if (nonnegVars) {
    for (int i : *nonnegVars) {
      std::vector<double> row(d + 1, 0.0);
      row[i] = -1.0;
      qp.G.push_back(std::move(row));
      qp.h.push_back(0.0);
    }
  }
  // Feasible start: a lambda (the center, or the caller's hint clipped to
  // the bounds) with t at the model value there.
  std::vector<double> z(center);
  if (startLambda && startLambda->size() == static_cast<std::size_t>(d))
    z = *startLambda;
  if (nonnegVars)
    for (int i : *nonnegVars) z[i] = std::max(0.0, z[i]);
  double t0 = lbFloor;
  int active = 0;
  for (std::size_t j = 0; j < cuts.size(); ++j) {
    double v = cuts[j].e;
    for (std::size_t k = 0; k < cuts[j].g.size(); ++k)
      v += cuts[j].g[k] * z[k];
    if (v > t0) {
      t0 = v;
      active = static_cast<int>(j) + 1;
    }
  }
  z.push_back(t0);
  return qp.solve(std::move(z), {active});
}

// Level master:  min ||lam - center||^2  s.t. e_j + g_j'lam <= level.
// `feasStart` must satisfy the constraints (the caller typically passes the
// minimizer of the cut model); when absent an LP finds one.
inline QPResult solve_level_master(const std::vector<DenseCut>& cuts,
                                   const std::vector<double>& center,
                                   double level,
                                   const std::vector<double>* feasStart = nullptr,
                                   const std::vector<int>* nonnegVars = nullptr) {
  const int d = static_cast<int>(center.size());
  detail::ActiveSetQP qp;
  qp.dim = d;
  qp.qdiag.assign(d, 2.0);
  qp.qlin.assign(d, 0.0);
  for (int i = 0; i < d; ++i) qp.qlin[i] = -2.0 * center[i];
  if (nonnegVars) {
    for (int i : *nonnegVars) {
      std::vector<double> row(d, 0.0);
      row[i] = -1.0;
      qp.G.push_back(std::move(row));
      qp.h.push_back(0.0);
    }
  }
  for (const auto& c : cuts) {
    bool zero = true;
    for (double v : c.g)
      if (v != 0.0) zero = false;
    if (zero) {
      if (c.e > level + 1e-9) {
        QPResult res;
        res.error = "empty level set";
        return res;
      }
      continue;  // constant cut below the level: vacuous
    }
    std::vector<double> row(c.g);
    row.resize(d, 0.0);
    qp.G.push_back(std::move(row));
    qp.h.push_back(level - c.e);
  }

  auto feasible = [&](const std::vector<double>& z) {
    for (std::size_t r = 0; r < qp.G.size(); ++r) {
      double gz = 0.0;
      for (int i = 0; i < d; ++i) gz += qp.G[r][i] * z[i];
      if (gz > qp.h[r] + 1e-9) return false;
    }
    return true;
  };

  std::vector<double> z(center);
  if (!feasible(z) && feasStart && feasStart->size() == static_cast<std::size_t>(d) &&
      feasible(*feasStart)) {
    z = *feasStart;
  }
  if (!feasible(z)) {
    // Phase-1 LP: minimize the worst constraint violation.
    LPProblem p;
    for (int i = 0; i < d; ++i) p.addVar(0.0, -kInf, kInf);
    int s = p.addVar(1.0, 0.0, kInf);
    for (std::size_t r = 0; r < qp.G.size(); ++r) {
      std::vector<std::pair<int, double>> a;
      for (int i = 0; i < d; ++i)
        if (qp.G[r][i] != 0.0) a.emplace_back(i, qp.G[r][i]);
      a.emplace_back(s, -1.0);
      p.addRow(std::move(a), RowSense::LE, qp.h[r]);
    }
    auto sol = solve_lp(p);
    if (sol.status != LPStatus::Optimal || sol.value > 1e-8) {
      QPResult res;
      res.error = "empty level set";
      return res;
    }
    z.assign(sol.x.begin(), sol.x.begin() + d);
  }
  return qp.solve(std::move(z), {});
}

}  // namespace decompdual
