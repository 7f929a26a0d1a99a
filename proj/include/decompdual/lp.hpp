#pragma once

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

namespace decompdual {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

enum class LPStatus { Optimal, Infeasible, Unbounded, Stalled };

enum class RowSense : char { LE = 'L', EQ = 'E' };

struct LPRow {
  std::vector<std::pair<int, double>> coeffs;  // (column, value), column < n
  double rhs = 0.0;
  RowSense sense = RowSense::LE;
};

// min c'x  s.t. rows (<= or =), lo <= x <= hi (entries may be +-inf).
struct LPProblem {
  int n = 0;
  std::vector<double> c;
  std::vector<double> lo, hi;
  std::vector<LPRow> rows;

  int addVar(double cost, double lower, double upper) {
    c.push_back(cost);
    lo.push_back(lower);
    hi.push_back(upper);
    return n++;
  }
  void addRow(std::vector<std::pair<int, double>> a, RowSense s, double rhs) {
    rows.push_back(LPRow{std::move(a), rhs, s});
  }
};

// Snapshot of a simplex basis, usable to warm-start a later solve of a
// problem with the same row/column layout (bounds may differ).
struct LPBasis {
  std::vector<int> basic;         // one column per row, in [0, n+m)
  std::vector<std::uint8_t> atUpper;  // per column; meaningful when nonbasic
  bool valid = false;
};

struct LPSolution {
  LPStatus status = LPStatus::Stalled;
  double value = 0.0;
  std::vector<double> x;  // structural variables only
  int pivots = 0;
  LPBasis basis;
};

// Bounded-variable primal simplex, dense. Phase 1 minimizes the total bound
// violation of the basic variables starting from an arbitrary basis (the
// all-slack basis by default), which is also what makes warm starts from a
// parent node's basis cheap. Dantzig pricing with a Bland fallback after a
// run of degenerate pivots.
class SimplexSolver {
 public:
  double feasTol = 1e-9;
  double costTol = 1e-9;
  double pivotTol = 1e-10;
  int blandThreshold = 50;
  int refactorEvery = 64;

  LPSolution solve(const LPProblem& p, const LPBasis* warm = nullptr) {
    setup(p);
    if (warm && warm->valid && static_cast<int>(warm->basic.size()) == m_ &&
        static_cast<int>(warm->atUpper.size()) == nTot_) {
      loadBasis(*warm);
    } else {
      slackBasis();
    }
    if (!refactorize()) slackBasis(), refactorize();

    LPSolution sol;
    sol.x.assign(n_, 0.0);
    int pivots = 0;
    const int maxPivots = 2000 + 60 * (m_ + n_);

    // Phase 1: drive the basic infeasibility to zero.
    int degenerateRun = 0;
    while (true) {
      computeBasics();
      double viol = totalViolation();
      if (viol <= feasTol * (1.0 + m_)) break;
      if (pivots >= maxPivots) return finish(sol, LPStatus::Stalled, pivots);
      std::vector<double> cb(m_);
      for (int i = 0; i < m_; ++i) {
        int j = basic_[i];
        cb[i] = xval_[j] < lo_[j] - feasTol ? -1.0
              : xval_[j] > hi_[j] + feasTol ? 1.0
                                            : 0.0;
      }
      btran(cb, y_);
      int q = -1, dir = 0;
      pickEntering(y_, /*realCosts=*/false, degenerateRun >= blandThreshold, q,
                   dir);
      if (q < 0) return finish(sol, LPStatus::Infeasible, pivots);
      if (!stepPhase1(q, dir, degenerateRun)) {
        return finish(sol, LPStatus::Stalled, pivots);
      }
      ++pivots;
      if (pivots % refactorEvery == 0 && !refactorize())
        return finish(sol, LPStatus::Stalled, pivots);
    }

    // Phase 2.
    degenerateRun = 0;
    while (true) {
      if (pivots >= maxPivots) return finish(sol, LPStatus::Stalled, pivots);
      std::vector<double> cb(m_);
      for (int i = 0; i < m_; ++i) cb[i] = cost_[basic_[i]];
      btran(cb, y_);
      int q = -1, dir = 0;
      pickEntering(y_, /*realCosts=*/true, degenerateRun >= blandThreshold, q,
                   dir);
      if (q < 0) break;  // optimal
      bool unbounded = false;
      if (!stepPhase2(q, dir, degenerateRun, unbounded)) {
        if (unbounded) return finish(sol, LPStatus::Unbounded, pivots);
        return finish(sol, LPStatus::Stalled, pivots);
      }
      ++pivots;
      if (pivots % refactorEvery == 0) {
        if (!refactorize()) return finish(sol, LPStatus::Stalled, pivots);
        computeBasics();
      }
    }
    // Clean recompute before reporting.
    if (refactorize()) computeBasics();
    return finish(sol, LPStatus::Optimal, pivots);
  }

 private:
  int n_ = 0, m_ = 0, nTot_ = 0;
  std::vector<double> cost_, lo_, hi_, rhs_;
  std::vector<double> dense_;  // m x n structural coefficients, row-major
  std::vector<int> basic_;
  std::vector<std::int8_t> state_;  // 0 nonbasic@lo/zero, 1 nonbasic@hi, 2 basic
  std::vector<double> xval_;
  std::vector<double> binv_;  // m x m row-major
  std::vector<double> y_, w_;

  double a(int i, int j) const {
    return j < n_ ? dense_[static_cast<std::size_t>(i) * n_ + j]
                  : (j - n_ == i ? 1.0 : 0.0);
  }

  void setup(const LPProblem& p) {
    n_ = p.n;
    m_ = static_cast<int>(p.rows.size());
    nTot_ = n_ + m_;
    cost_.assign(nTot_, 0.0);
    lo_.assign(nTot_, 0.0);
    hi_.assign(nTot_, 0.0);
    rhs_.assign(m_, 0.0);
    dense_.assign(static_cast<std::size_t>(m_) * n_, 0.0);
    for (int j = 0; j < n_; ++j) {
      cost_[j] = p.c[j];
      lo_[j] = p.lo[j];
      hi_[j] = p.hi[j];
    }
    for (int i = 0; i < m_; ++i) {
      const LPRow& r = p.rows[i];
      rhs_[i] = r.rhs;
      for (auto [j, v] : r.coeffs)
        dense_[static_cast<std::size_t>(i) * n_ + j] += v;
      int s = n_ + i;
      lo_[s] = 0.0;
      hi_[s] = r.sense == RowSense::LE ? kInf : 0.0;
    }
    xval_.assign(nTot_, 0.0);
    y_.assign(m_, 0.0);
    w_.assign(m_, 0.0);
  }

  void slackBasis() {
    basic_.resize(m_);
    state_.assign(nTot_, 0);
    for (int j = 0; j < n_; ++j) state_[j] = nonbasicStateFor(j);
    for (int i = 0; i < m_; ++i) {
      basic_[i] = n_ + i;
      state_[n_ + i] = 2;
    }
  }

  std::int8_t nonbasicStateFor(int j) const {
    if (std::isfinite(lo_[j])) return 0;
    if (std::isfinite(hi_[j])) return 1;
    return 0;  // free: rests at zero
  }

  void loadBasis(const LPBasis& b) {
    basic_ = b.basic;
    state_.assign(nTot_, 0);
    std::vector<char> isBasic(nTot_, 0);
    for (int j : basic_) isBasic[j] = 1;
    for (int j = 0; j < nTot_; ++j) {
      if (isBasic[j]) {
        state_[j] = 2;
      } else if (b.atUpper[j] && std::isfinite(hi_[j])) {
        state_[j] = 1;
      } else {
        state_[j] = nonbasicStateFor(j);
      }
    }
  }

  // Rebuild binv_ from the current basis. Returns false (and repairs the
  // basis with slacks) when the basis matrix is singular.
  bool refactorize() {
    binv_.assign(static_cast<std::size_t>(m_) * m_, 0.0);
    std::vector<double> mat(static_cast<std::size_t>(m_) * m_, 0.0);
    for (int i = 0; i < m_; ++i) {
      binv_[static_cast<std::size_t>(i) * m_ + i] = 1.0;
      for (int r = 0; r < m_; ++r) mat[static_cast<std::size_t>(r) * m_ + i] = a(r, basic_[i]);
    }
    // Gauss-Jordan with partial pivoting on [mat | binv].
    for (int col = 0; col < m_; ++col) {
      int piv = -1;
      double best = 1e-11;
      for (int r = col; r < m_; ++r) {
        double v = std::fabs(mat[static_cast<std::size_t>(r) * m_ + col]);
        if (v > best) best = v, piv = r;
      }
      if (piv < 0) {
        // Singular: swap the offending basic column for the row's slack and
        // restart. (Rare; happens when a warm basis no longer has full rank.)
        repairBasis();
        return refactorizeNoRepair();
      }
      if (piv != col) {
        for (int k = 0; k < m_; ++k) {
          std::swap(mat[static_cast<std::size_t>(piv) * m_ + k], mat[static_cast<std::size_t>(col) * m_ + k]);
          std::swap(binv_[static_cast<std::size_t>(piv) * m_ + k], binv_[static_cast<std::size_t>(col) * m_ + k]);
        }
      }
      double d = mat[static_cast<std::size_t>(col) * m_ + col];
      for (int k = 0; k < m_; ++k) {
        mat[static_cast<std::size_t>(col) * m_ + k] /= d;
        binv_[static_cast<std::size_t>(col) * m_ + k] /= d;
      }
      for (int r = 0; r < m_; ++r) {
        if (r == col) continue;
        double f = mat[static_cast<std::size_t>(r) * m_ + col];
        if (f == 0.0) continue;
        for (int k = 0; k < m_; ++k) {
          mat[static_cast<std::size_t>(r) * m_ + k] -= f * mat[static_cast<std::size_t>(col) * m_ + k];
          binv_[static_cast<std::size_t>(r) * m_ + k] -= f * binv_[static_cast<std::size_t>(col) * m_ + k];
        }
      }
    }
    return true;
  }

  void repairBasis() { slackBasis(); }

  bool refactorizeNoRepair() {
    // Second attempt after repair; the slack basis is always nonsingular.
    binv_.assign(static_cast<std::size_t>(m_) * m_, 0.0);
    for (int i = 0; i < m_; ++i) binv_[static_cast<std::size_t>(i) * m_ + i] = 1.0;
    return true;
  }

  void computeBasics() {
    // x_B = Binv (b - N x_N)
    for (int j = 0; j < nTot_; ++j) {
      if (state_[j] == 2) continue;
      xval_[j] = state_[j] == 1 ? hi_[j] : (std::isfinite(lo_[j]) ? lo_[j] : 0.0);
    }
    std::vector<double> r(rhs_);
    for (int j = 0; j < n_; ++j) {
      if (state_[j] == 2 || xval_[j] == 0.0) continue;
      double v = xval_[j];
      const double* colp = dense_.data() + j;
      for (int i = 0; i < m_; ++i) r[i] -= colp[static_cast<std::size_t>(i) * n_] * v;
    }
    for (int i = 0; i < m_; ++i) {
      int s = n_ + i;
      if (state_[s] != 2 && xval_[s] != 0.0) r[i] -= xval_[s];
    }
    for (int i = 0; i < m_; ++i) {
      double v = 0.0;
      const double* row = binv_.data() + static_cast<std::size_t>(i) * m_;
      for (int k = 0; k < m_; ++k) v += row[k] * r[k];
      xval_[basic_[i]] = v;
    }
  }

  double totalViolation() const {
    double t = 0.0;
    for (int i = 0; i < m_; ++i) {
      int j = basic_[i];
      if (xval_[j] < lo_[j]) t += lo_[j] - xval_[j];
      if (xval_[j] > hi_[j]) t += xval_[j] - hi_[j];
    }
    return t;
  }

  void btran(const std::vector<double>& cb, std::vector<double>& y) const {
    for (int k = 0; k < m_; ++k) {
      double v = 0.0;
      for (int i = 0; i < m_; ++i) v += cb[i] * binv_[static_cast<std::size_t>(i) * m_ + k];
      y[k] = v;
    }
  }

  void ftran(int q) {
    for (int i = 0; i < m_; ++i) {
      double v = 0.0;
      const double* row = binv_.data() + static_cast<std::size_t>(i) * m_;
      if (q < n_) {
        const double* colp = dense_.data() + q;
        for (int k = 0; k < m_; ++k) v += row[k] * colp[static_cast<std::size_t>(k) * n_];
      } else {
        v = row[q - n_];
      }
      w_[i] = v;
    }
  }

  // Entering choice shared by both phases. realCosts selects phase-2 reduced
  // costs c_j - y'A_j; phase 1 uses -y'A_j.
  void pickEntering(const std::vector<double>& y, bool realCosts, bool bland,
                    int& q, int& dir) const {
    q = -1;
    dir = 0;
    double best = costTol;
    for (int j = 0; j < nTot_; ++j) {
      if (state_[j] == 2) continue;
      if (lo_[j] == hi_[j]) continue;  // fixed, never enters
      double yaj = 0.0;
      if (j < n_) {
        const double* colp = dense_.data() + j;
        for (int i = 0; i < m_; ++i) yaj += y[i] * colp[static_cast<std::size_t>(i) * n_];
      } else {
        yaj = y[j - n_];
      }
      double d = (realCosts ? cost_[j] : 0.0) - yaj;
      bool canUp = state_[j] == 0;    // at lower bound or free-at-zero
      bool canDown = state_[j] == 1;  // at upper bound
      if (!std::isfinite(lo_[j]) && !std::isfinite(hi_[j])) canUp = canDown = true;
      if (canUp && d < -best) {
        q = j;
        dir = +1;
        if (bland) return;
        best = -d;
      } else if (canDown && d > best) {
        q = j;
        dir = -1;
        if (bland) return;
        best = d;
      }
    }
  }

  // Ratio test and pivot for phase 1. Infeasible basics block at the bound
  // they are approaching (short-step rule); feasible basics block normally.
  bool stepPhase1(int q, int dir, int& degenerateRun) {
    ftran(q);
    double tBest = kInf;
    int leave = -1, leaveToUpper = 0;
    // Entering variable's own range.
    if (std::isfinite(lo_[q]) && std::isfinite(hi_[q])) {
      tBest = hi_[q] - lo_[q];
      leave = -2;  // bound flip
    }
    for (int i = 0; i < m_; ++i) {
      double delta = -dir * w_[i];  // d x_basic[i] / d t
      if (std::fabs(delta) <= pivotTol) continue;
      int j = basic_[i];
      double t = kInf;
      int toUpper = 0;
      if (xval_[j] < lo_[j] - feasTol) {
        if (delta > 0) t = (lo_[j] - xval_[j]) / delta, toUpper = 0;
      } else if (xval_[j] > hi_[j] + feasTol) {
        if (delta < 0) t = (hi_[j] - xval_[j]) / delta, toUpper = 1;
      } else {
        if (delta > 0 && std::isfinite(hi_[j]))
          t = std::max(0.0, (hi_[j] - xval_[j]) / delta), toUpper = 1;
        else if (delta < 0 && std::isfinite(lo_[j]))
          t = std::max(0.0, (lo_[j] - xval_[j]) / delta), toUpper = 0;
      }
      if (t < tBest - 1e-12 || (t < tBest + 1e-12 && leave >= 0 && j < basic_[leave])) {
        tBest = t;
        leave = i;
        leaveToUpper = toUpper;
      }
    }
    if (!std::isfinite(tBest)) return false;  // cannot happen with positive violation
    applyStep(q, dir, tBest, leave, leaveToUpper, degenerateRun);
    return true;
  }

  bool stepPhase2(int q, int dir, int& degenerateRun, bool& unbounded) {
    ftran(q);
    double tBest = kInf;
    int leave = -1, leaveToUpper = 0;
    if (std::isfinite(lo_[q]) && std::isfinite(hi_[q])) {
      tBest = hi_[q] - lo_[q];
      leave = -2;
    }
    for (int i = 0; i < m_; ++i) {
      double delta = -dir * w_[i];
      if (std::fabs(delta) <= pivotTol) continue;
      int j = basic_[i];
      double t = kInf;
      int toUpper = 0;
      if (delta > 0 && std::isfinite(hi_[j]))
        t = std::max(0.0, (hi_[j] - xval_[j]) / delta), toUpper = 1;
      else if (delta < 0 && std::isfinite(lo_[j]))
        t = std::max(0.0, (lo_[j] - xval_[j]) / delta), toUpper = 0;
      if (t < tBest - 1e-12 || (t < tBest + 1e-12 && leave >= 0 && j < basic_[leave])) {
        tBest = t;
        leave = i;
        leaveToUpper = toUpper;
      }
    }
    if (!std::isfinite(tBest)) {
      unbounded = true;
      return false;
    }
    applyStep(q, dir, tBest, leave, leaveToUpper, degenerateRun);
    return true;
  }

  void applyStep(int q, int dir, double t, int leave, int leaveToUpper,
                 int& degenerateRun) {
    degenerateRun = t <= 1e-11 ? degenerateRun + 1 : 0;
    // Move entering variable and update basics.
    xval_[q] += dir * t;
    for (int i = 0; i < m_; ++i) xval_[basic_[i]] -= dir * t * w_[i];
    if (leave == -2) {             // bound flip, basis unchanged
      state_[q] = dir > 0 ? 1 : 0;
      return;
    }
    int out = basic_[leave];
    state_[out] = static_cast<std::int8_t>(leaveToUpper);
    xval_[out] = leaveToUpper ? hi_[out] : lo_[out];
    basic_[leave] = q;
    state_[q] = 2;
    // Product-form update of Binv: eliminate w_ against row `leave`.
    double piv = w_[leave];
    double* lrow = binv_.data() + static_cast<std::size_t>(leave) * m_;
    for (int k = 0; k < m_; ++k) lrow[k] /= piv;
    for (int i = 0; i < m_; ++i) {
      if (i == leave) continue;
      double f = w_[i];
      if (f == 0.0) continue;
      double* row = binv_.data() + static_cast<std::size_t>(i) * m_;
      for (int k = 0; k < m_; ++k) row[k] -= f * lrow[k];
    }
  }

  LPSolution finish(LPSolution& sol, LPStatus st, int pivots) {
    sol.status = st;
    sol.pivots = pivots;
    double v = 0.0;
    for (int j = 0; j < n_; ++j) {
      sol.x[j] = xval_[j];
      v += cost_[j] * xval_[j];
    }
    sol.value = v;
    sol.basis.basic = basic_;
    sol.basis.atUpper.assign(nTot_, 0);
    for (int j = 0; j < nTot_; ++j) sol.basis.atUpper[j] = state_[j] == 1;
    sol.basis.valid = st == LPStatus::Optimal;
    return sol;
  }
};

inline LPSolution solve_lp(const LPProblem& p, const LPBasis* warm = nullptr) {
  SimplexSolver s;
  return s.solve(p, warm);
}

}  // namespace decompdual
