#pragma once

// Test-only oracles. Everything here is deliberately brute-force and kept
// independent of the solver code paths it is used to check.

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

#include "decompdual/lp.hpp"

namespace ddtest {

// Solves a dense square system by Gaussian elimination with partial
// pivoting. Returns false if (numerically) singular.
inline bool denseSolve(std::vector<double> A, std::vector<double> b, int n,
                       std::vector<double>& out) {
  for (int col = 0; col < n; ++col) {
    int piv = -1;
    double best = 1e-11;
    for (int r = col; r < n; ++r) {
      double v = std::fabs(A[r * n + col]);
      if (v > best) best = v, piv = r;
    }
    if (piv < 0) return false;
    if (piv != col) {
      for (int k = 0; k < n; ++k) std::swap(A[piv * n + k], A[col * n + k]);
      std::swap(b[piv], b[col]);
    }
    for (int r = 0; r < n; ++r) {
      if (r == col) continue;
      double f = A[r * n + col] / A[col * n + col];
      if (f == 0.0) continue;
      for (int k = col; k < n; ++k) A[r * n + k] -= f * A[col * n + k];
      b[r] -= f * b[col];
    }
  }
  out.resize(n);
  for (int i = 0; i < n; ++i) out[i] = b[i] / A[i * n + i];
  return true;
}

struct EnumLPResult {
  bool feasible = false;
  double value = std::numeric_limits<double>::infinity();
  std::vector<double> x;
};

// Basic-solution enumeration for an LP whose structural variables all have
// finite bounds: every vertex has m basic columns (slacks included) and the
// remaining columns at one of their bounds.
inline EnumLPResult enumerate_lp(const decompdual::LPProblem& p,
                                 double tol = 1e-7) {
  using decompdual::RowSense;
  const int n = p.n;
  const int m = static_cast<int>(p.rows.size());
  const int tot = n + m;
  std::vector<double> dense(static_cast<std::size_t>(m) * tot, 0.0);
  std::vector<double> rhs(m);
  std::vector<double> lo(tot), hi(tot);
  for (int j = 0; j < n; ++j) lo[j] = p.lo[j], hi[j] = p.hi[j];
  for (int i = 0; i < m; ++i) {
    for (auto [j, v] : p.rows[i].coeffs) dense[i * tot + j] += v;
    dense[i * tot + n + i] = 1.0;
    rhs[i] = p.rows[i].rhs;
    lo[n + i] = 0.0;
    hi[n + i] = p.rows[i].sense == RowSense::LE
                    ? std::numeric_limits<double>::infinity()
                    : 0.0;
  }

  EnumLPResult best;
  std::vector<int> comb(m);
  // Iterate subsets of size m of [0, tot).
  std::vector<int> idx(m);
  for (int i = 0; i < m; ++i) idx[i] = i;
  auto advance = [&]() -> bool {
    int i = m - 1;
    while (i >= 0 && idx[i] == tot - m + i) --i;
    if (i < 0) return false;
    ++idx[i];
    for (int k = i + 1; k < m; ++k) idx[k] = idx[k - 1] + 1;
    return true;
  };
  if (m == 0) {
    // Pure box problem: each variable at its cost-minimizing bound.
    best.feasible = true;
    best.value = 0;
    best.x.resize(n);
    for (int j = 0; j < n; ++j) {
      best.x[j] = p.c[j] >= 0 ? p.lo[j] : p.hi[j];
      best.value += p.c[j] * best.x[j];
    }
    return best;
  }
  do {
    std::vector<char> isBasic(tot, 0);
    for (int i = 0; i < m; ++i) isBasic[idx[i]] = 1;
    // Nonbasic structural columns get 2 bound choices; slacks sit at 0.
    std::vector<int> freeChoice;
    for (int j = 0; j < n; ++j)
      if (!isBasic[j]) freeChoice.push_back(j);
    const int nc = static_cast<int>(freeChoice.size());
    if (nc > 24) continue;  // guard; test sizes stay far below this
    for (std::uint32_t mask = 0; mask < (1u << nc); ++mask) {
      std::vector<double> xval(tot, 0.0);
      bool ok = true;
      for (int t = 0; t < nc; ++t) {
        int j = freeChoice[t];
        double v = (mask >> t) & 1 ? hi[j] : lo[j];
        if (!std::isfinite(v)) {
          ok = false;
          break;
        }
        xval[j] = v;
      }
      if (!ok) continue;
      std::vector<double> B(static_cast<std::size_t>(m) * m);
      std::vector<double> r(rhs);
      for (int i = 0; i < m; ++i)
        for (int k = 0; k < m; ++k) B[i * m + k] = dense[i * tot + idx[k]];
      for (int j = 0; j < tot; ++j)
        if (!isBasic[j] && xval[j] != 0.0)
          for (int i = 0; i < m; ++i) r[i] -= dense[i * tot + j] * xval[j];
      std::vector<double> xb;
      if (!denseSolve(B, r, m, xb)) continue;
      for (int i = 0; i < m && ok; ++i) {
        xval[idx[i]] = xb[i];
        if (xb[i] < lo[idx[i]] - tol || xb[i] > hi[idx[i]] + tol) ok = false;
      }
      if (!ok) continue;
      double v = 0.0;
      for (int j = 0; j < n; ++j) v += p.c[j] * xval[j];
      if (!best.feasible || v < best.value) {
        best.feasible = true;
        best.value = v;
        best.x.assign(xval.begin(), xval.begin() + n);
      }
    }
  } while (advance());
  return best;
}

}  // namespace ddtest

#include "decompdual/model.hpp"
#include "decompdual/subsolve.hpp"

namespace ddtest {

// Full enumeration of one block sub-problem: all binary assignments, LP for
// the continuous part. Understands fixed vertices, exclusions, monomial
// terms and vertex penalties, so it can check every query type.
inline decompdual::SubproblemResult enumerate_block(
    const decompdual::Instance& inst, const decompdual::BlockCoupling& bc,
    const decompdual::SubproblemQuery& q) {
  using namespace decompdual;
  const Block& b = inst.blocks[q.blockIdx];
  const auto& matched = bc.matched[q.blockIdx];
  SubproblemResult best;
  for (std::uint64_t mask = 0; mask < (1ull << b.nBin); ++mask) {
    std::vector<double> x(b.nBin);
    for (int j = 0; j < b.nBin; ++j) x[j] = (mask >> j) & 1 ? 1.0 : 0.0;
    std::uint64_t key = 0;
    for (std::size_t s = 0; s < matched.size(); ++s)
      if (x[matched[s].second] > 0.5) key |= 1ull << s;
    if (q.fixedVertex && key != *q.fixedVertex) continue;
    if (q.excluded.count(key)) continue;
    bool pinned = true;
    for (auto [local, bit] : q.fixedBinaries)
      if ((x[local] > 0.5 ? 1 : 0) != bit) pinned = false;
    if (!pinned) continue;
    double value = 0.0;
    for (int j = 0; j < b.nBin; ++j) value += q.xCost[j] * x[j];
    std::vector<double> y(b.nCont, 0.0);
    if (b.nCont > 0 || !b.rows.empty()) {
      LPProblem lp;
      for (int j = 0; j < b.nCont; ++j) lp.addVar(q.yCost[j], 0.0, decompdual::kInf);
      bool rowInfeas = false;
      for (const auto& row : b.rows) {
        double lhs = 0.0;
        std::vector<std::pair<int, double>> a;
        for (auto [j, v] : row.ax) lhs += v * x[j];
        for (auto [j, v] : row.ay) a.emplace_back(j, v);
        if (a.empty()) {
          if (lhs > row.rhs + 1e-9) rowInfeas = true;
        } else {
          lp.addRow(std::move(a), RowSense::LE, row.rhs - lhs);
        }
      }
      if (rowInfeas) continue;
      if (lp.n > 0 || !lp.rows.empty()) {
        auto sol = solve_lp(lp);
        if (sol.status == LPStatus::Infeasible) continue;
        if (sol.status != LPStatus::Optimal) continue;
        value += sol.value;
        y = sol.x;
      }
    }
    for (const auto& [subset, coef] : q.monomialCost) {
      double prod = 1.0;
      for (int j : subset) prod *= x[j];
      value += coef * prod;
    }
    auto it = q.vertexPenalty.find(key);
    if (it != q.vertexPenalty.end()) value += it->second;
    if (best.status != SubproblemResult::Status::Optimal || value < best.value - 1e-12) {
      best.status = SubproblemResult::Status::Optimal;
      best.value = value;
      best.xStar = x;
      best.yStar = y;
    }
  }
  return best;
}

}  // namespace ddtest
