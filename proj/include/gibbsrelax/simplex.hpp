#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <vector>

#include "gibbsrelax/common.hpp"

namespace gibbsrelax {

// max c.x subject to A x = b, x >= 0. Rows may be redundant; b any sign.
struct LpProblem {
  std::size_t nvars = 0;
  std::vector<std::vector<double>> A;
  std::vector<double> b;
};

enum class LpStatus { optimal, infeasible, unbounded, iteration_limit };

struct LpResult {
  LpStatus status = LpStatus::optimal;
  double value = 0.0;
  std::vector<double> x;
  int pivots = 0;
};

// Dense full-tableau simplex. Phase 1 runs once at construction; maximize()
// re-prices a new objective from the current basis, so successive calls with
// nearby objectives warm-start. Deterministic: Dantzig entering with
// lowest-index ties, falling back to Bland's rule on degenerate stalls.
//
// A caller that already knows the support of one feasible point can pass it as
// a hint; phase 1 then reduces to Gaussian elimination (pivot the support in,
// complete the basis with largest-magnitude pivots, deactivate rows that
// eliminate to zero). This sidesteps the degenerate-pivot stalls that plague
// simplex phase 1 on mostly-zero right-hand sides.
class SimplexSolver {
 public:
  explicit SimplexSolver(const LpProblem& p) : SimplexSolver(p, {}) {}

  SimplexSolver(const LpProblem& p, std::vector<std::size_t> support_hint)
      : n_(p.nvars),
        m_(p.A.size()),
        orig_(std::make_shared<LpProblem>(p)),
        b_cur_(p.b),
        hint_(std::move(support_hint)) {
    for (const auto& row : p.A)
      if (row.size() != n_) throw invalid_input_error("simplex: row length mismatch");
    if (p.b.size() != m_) throw invalid_input_error("simplex: rhs length mismatch");
    for (std::size_t j : hint_)
      if (j >= n_) throw invalid_input_error("simplex: support hint out of range");
    rebuild();
  }

  bool feasible() const { return feasible_; }
  std::size_t rows() const { return m_; }
  std::size_t vars() const { return n_; }

  // Reduced costs of the last objective passed to maximize(), one per
  // structural column (entry n is the negated objective value). For a dual
  // problem these carry the complementary primal solution.
  const std::vector<double>& reduced_costs() const { return cost_; }

  // Structural columns of the current basis, one per active row.
  std::vector<int> basic_columns() const {
    std::vector<int> out;
    out.reserve(m_);
    for (std::size_t i = 0; i < m_; ++i)
      if (active_[i] && basis_[i] < int(n_)) out.push_back(basis_[i]);
    return out;
  }

  // Row multipliers y with B^T y = c_B for the current basis, indexed by
  // original row (zero on deactivated rows). Against these, every basic
  // column prices to reduced cost zero; a caller holding columns outside
  // this problem can price them the same way. Fails if any active row still
  // carries an artificial or the basis matrix is singular.
  bool row_duals(const std::vector<double>& c, std::vector<double>& y) const {
    if (!feasible_ || c.size() != n_) return false;
    std::vector<std::size_t> act;
    act.reserve(m_);
    for (std::size_t i = 0; i < m_; ++i)
      if (active_[i]) {
        if (basis_[i] >= int(n_)) return false;
        act.push_back(i);
      }
    std::size_t m = act.size();
    std::vector<double> M(m * m);  // M = B^T
    std::vector<double> z(m);
    for (std::size_t k = 0; k < m; ++k) {
      for (std::size_t r = 0; r < m; ++r)
        M[k * m + r] = orig_->A[act[r]][std::size_t(basis_[act[k]])];
      z[k] = c[std::size_t(basis_[act[k]])];
    }
    for (std::size_t k = 0; k < m; ++k) {
      std::size_t p = k;
      for (std::size_t i = k + 1; i < m; ++i)
        if (std::abs(M[i * m + k]) > std::abs(M[p * m + k])) p = i;
      if (std::abs(M[p * m + k]) < 1e-12) return false;
      if (p != k) {
        for (std::size_t j = 0; j < m; ++j) std::swap(M[p * m + j], M[k * m + j]);
        std::swap(z[p], z[k]);
      }
      double inv = 1.0 / M[k * m + k];
      for (std::size_t i = k + 1; i < m; ++i) {
        double f = M[i * m + k] * inv;
        if (f == 0.0) continue;
        M[i * m + k] = 0.0;
        for (std::size_t j = k + 1; j < m; ++j) M[i * m + j] -= f * M[k * m + j];
        z[i] -= f * z[k];
      }
    }
    for (std::size_t k = m; k-- > 0;) {
      double s = z[k];
      for (std::size_t j = k + 1; j < m; ++j) s -= M[k * m + j] * z[j];
      z[k] = s / M[k * m + k];
    }
    y.assign(m_, 0.0);
    for (std::size_t r = 0; r < m; ++r) y[act[r]] = z[r];
    return true;
  }

  LpResult maximize(const std::vector<double>& c, int max_pivots = 2000000) {
    if (c.size() != n_) throw invalid_input_error("simplex: objective length mismatch");
    LpResult res;
    if (!feasible_) {
      res.status = LpStatus::infeasible;
      return res;
    }
    price(c);
    res.status = run_pivots(c, max_pivots, res.pivots);
    extract(c, res);
    if (!residual_ok()) {
      // Numerical drift: rebuild from the original problem and re-solve once.
      rebuild();
      price(c);
      int extra = 0;
      res.status = run_pivots(c, max_pivots, extra);
      res.pivots += extra;
      extract(c, res);
    }
    return res;
  }

  // Re-solves after replacing the right-hand side, keeping the current basis.
  // Reduced costs stay optimal under a rhs change, so only dual-simplex pivots
  // are needed to restore feasibility; for nearby rhs vectors this takes a
  // handful of pivots instead of a full phase 1. The objective must be the one
  // most recently passed to maximize() for the warm path to apply cleanly.
  LpResult reoptimize(const std::vector<double>& c, std::vector<double> b_new,
                      int max_pivots = 2000000) {
    if (c.size() != n_) throw invalid_input_error("simplex: objective length mismatch");
    if (b_new.size() != m_) throw invalid_input_error("simplex: rhs length mismatch");
    LpResult res;
    bool reused = feasible_ && basis_solve_rhs(b_new);
    b_cur_ = std::move(b_new);
    if (!reused) return rebuild_and_solve(c, max_pivots, res);
    price(c);
    res.status = dual_pivots(max_pivots, res.pivots);
    if (res.status == LpStatus::optimal)
      res.status = run_pivots(c, max_pivots, res.pivots);
    if (res.status != LpStatus::optimal && res.status != LpStatus::unbounded)
      return rebuild_and_solve(c, max_pivots, res);
    extract(c, res);
    if (!residual_ok()) return rebuild_and_solve(c, max_pivots, res);
    return res;
  }

 private:
  static constexpr double kPivTol = 1e-9;
  static constexpr double kOptTol = 1e-7;

  std::size_t n_, m_;
  std::shared_ptr<const LpProblem> orig_;  // rhs may go stale; b_cur_ is authoritative
  std::vector<double> b_cur_;
  std::vector<std::size_t> hint_;      // support of a known feasible point, may be empty
  std::size_t width_ = 0;              // n_ + 1 (structural columns + rhs)
  std::vector<double> tab_;            // m_ rows, row-major
  std::vector<double> cost_;           // reduced-cost row, width_
  std::vector<int> basis_;             // basic column per row; >= n_ means artificial
  std::vector<char> active_;           // redundant rows get deactivated
  std::vector<char> in_basis_;         // structural columns currently basic
  bool feasible_ = false;
  std::vector<double> lu_;             // packed LU of the basis matrix
  std::vector<std::size_t> lu_perm_;
  std::uint64_t basis_gen_ = 0;        // bumped on any basis change
  std::uint64_t lu_gen_ = ~std::uint64_t(0);

  double* row(std::size_t i) { return tab_.data() + i * width_; }
  const double* row(std::size_t i) const { return tab_.data() + i * width_; }

  void rebuild() {
    if (!hint_.empty() && build_from_support()) return;
    build_and_phase1();
  }

  LpResult& rebuild_and_solve(const std::vector<double>& c, int max_pivots, LpResult& res) {
    rebuild();
    if (!feasible_) {
      res.status = LpStatus::infeasible;
      return res;
    }
    price(c);
    int extra = 0;
    res.status = run_pivots(c, max_pivots, extra);
    res.pivots += extra;
    extract(c, res);
    return res;
  }

  // Writes B^{-1} b_new into the rhs column via a dense LU solve of the basis.
  // Requires every row active with a structural basic column; the original
  // rows' sign normalization cancels out of B^{-1} b. The factorization is
  // cached against the basis generation, so repeat calls on an unchanged
  // basis only pay the two triangular solves. Returns false when the basis
  // cannot be reused.
  bool basis_solve_rhs(const std::vector<double>& b_new) {
    for (std::size_t i = 0; i < m_; ++i)
      if (!active_[i] || basis_[i] >= int(n_)) return false;
    std::size_t m = m_;
    if (lu_gen_ != basis_gen_) {
      lu_.resize(m * m);
      lu_perm_.resize(m);
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t k = 0; k < m; ++k)
          lu_[i * m + k] = orig_->A[i][std::size_t(basis_[k])];
      for (std::size_t k = 0; k < m; ++k) {
        std::size_t p = k;
        for (std::size_t i = k + 1; i < m; ++i)
          if (std::abs(lu_[i * m + k]) > std::abs(lu_[p * m + k])) p = i;
        if (std::abs(lu_[p * m + k]) < 1e-12) return false;
        lu_perm_[k] = p;
        if (p != k)
          for (std::size_t j = 0; j < m; ++j) std::swap(lu_[p * m + j], lu_[k * m + j]);
        double inv = 1.0 / lu_[k * m + k];
        for (std::size_t i = k + 1; i < m; ++i) {
          double f = lu_[i * m + k] * inv;
          lu_[i * m + k] = f;
          if (f == 0.0) continue;
          for (std::size_t j = k + 1; j < m; ++j) lu_[i * m + j] -= f * lu_[k * m + j];
        }
      }
      lu_gen_ = basis_gen_;
    }
    std::vector<double> z(b_new);
    // All row swaps first, then the forward solve: the stored multipliers
    // sit in their final (fully permuted) rows.
    for (std::size_t k = 0; k < m; ++k)
      if (lu_perm_[k] != k) std::swap(z[k], z[lu_perm_[k]]);
    for (std::size_t k = 0; k < m; ++k) {
      double zk = z[k];
      if (zk == 0.0) continue;
      for (std::size_t i = k + 1; i < m; ++i) z[i] -= lu_[i * m + k] * zk;
    }
    for (std::size_t k = m; k-- > 0;) {
      double s = z[k];
      for (std::size_t j = k + 1; j < m; ++j) s -= lu_[k * m + j] * z[j];
      z[k] = s / lu_[k * m + k];
    }
    for (std::size_t i = 0; i < m; ++i) row(i)[n_] = z[i];
    return true;
  }

  double total_infeasibility() const {
    double s = 0.0;
    for (std::size_t i = 0; i < m_; ++i)
      if (active_[i] && row(i)[n_] < 0.0) s -= row(i)[n_];
    return s;
  }

  // Dual simplex: drives negative rhs entries out while reduced costs stay
  // optimal. Reduced costs within tolerance of zero count as zero in the
  // ratio test; picking a raw positive one would break the optimality
  // invariant the whole method rests on. The leaving row is picked by devex
  // pricing, the entering column by a two-pass ratio test whose tolerance
  // shrinks with pivot magnitude, so degenerate steps land on large stable
  // pivots. Bland's rule takes over on long stalls, and the loop gives up
  // when infeasibility grows instead of shrinking, leaving the caller to
  // rebuild from scratch.
  LpStatus dual_pivots(int max_pivots, int& pivots) {
    int stall = 0;
    bool bland = false;
    double inf0 = total_infeasibility();
    std::vector<double> dw(m_, 1.0);  // devex reference weights
    int end = pivots + std::min(max_pivots - pivots, 5000);
    for (; pivots < end; ++pivots) {
      std::size_t pr = m_;
      double best_score = 0.0;
      int low_id = std::numeric_limits<int>::max();
      for (std::size_t i = 0; i < m_; ++i) {
        if (!active_[i]) continue;
        double v = row(i)[n_];
        if (v >= -1e-9) continue;
        if (bland ? basis_[i] < low_id : v * v / dw[i] > best_score) {
          best_score = v * v / dw[i];
          low_id = basis_[i];
          pr = i;
        }
      }
      if (pr >= m_) return LpStatus::optimal;
      std::size_t pc = n_;
      if (bland) {
        double best_ratio = std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < n_; ++j) {
          if (in_basis_[j]) continue;
          double a = row(pr)[j];
          if (a >= -kPivTol) continue;
          double ratio = std::min(cost_[j], 0.0) / a;
          if (ratio < best_ratio - 1e-12) {
            best_ratio = ratio;
            pc = j;
          }
        }
      } else {
        // Pass 1: tightest ratio. Pass 2: among columns within a slack that
        // scales as 1/|a|, the largest magnitude wins.
        const double* pr_row = row(pr);
        double min_ratio = std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < n_; ++j) {
          if (in_basis_[j]) continue;
          double a = pr_row[j];
          if (a >= -kPivTol) continue;
          double ratio = std::min(cost_[j], 0.0) / a;
          if (ratio < min_ratio) min_ratio = ratio;
        }
        if (min_ratio < std::numeric_limits<double>::infinity()) {
          double best_mag = 0.0;
          for (std::size_t j = 0; j < n_; ++j) {
            if (in_basis_[j]) continue;
            double a = pr_row[j];
            if (a >= -kPivTol) continue;
            if (std::min(cost_[j], 0.0) >= a * min_ratio - kOptTol && -a > best_mag) {
              best_mag = -a;
              pc = j;
            }
          }
        }
      }
      if (pc >= n_) return LpStatus::infeasible;
      double arq = row(pr)[pc];
      double gr = std::max(dw[pr] / (arq * arq), 1.0);
      for (std::size_t i = 0; i < m_; ++i) {
        if (i == pr || !active_[i]) continue;
        double aiq = row(i)[pc];
        if (aiq != 0.0) dw[i] = std::max(dw[i], aiq * aiq * gr);
      }
      dw[pr] = gr;
      bool degen = std::min(cost_[pc], 0.0) / arq <= 1e-12;
      pivot(pr, pc);
      if ((pivots & 63) == 63 && total_infeasibility() > 16.0 * inf0 + 1e-6)
        return LpStatus::iteration_limit;
      if (degen) {
        if (++stall > 100) bland = true;
      } else {
        stall = 0;
        bland = false;
      }
    }
    return LpStatus::iteration_limit;
  }

  void build_tableau() {
    width_ = n_ + 1;
    tab_.assign(m_ * width_, 0.0);
    basis_.resize(m_);
    active_.assign(m_, 1);
    in_basis_.assign(n_, 0);
    cost_.assign(width_, 0.0);
    for (std::size_t i = 0; i < m_; ++i) {
      double s = (b_cur_[i] < 0.0) ? -1.0 : 1.0;
      for (std::size_t j = 0; j < n_; ++j) row(i)[j] = s * orig_->A[i][j];
      row(i)[n_] = s * b_cur_[i];
      basis_[i] = int(n_ + i);
    }
    ++basis_gen_;
  }

  void build_and_phase1() {
    build_tableau();
    // Phase 1: maximize -sum(artificials); artificial columns are implicit
    // (column n_+i is e_i under the artificial basis).
    for (std::size_t j = 0; j <= n_; ++j) {
      double s = 0.0;
      for (std::size_t i = 0; i < m_; ++i) s += row(i)[j];
      cost_[j] = s;  // reduced cost 0 - (-1)*sum
    }
    int pivots = 0;
    LpStatus st = run_pivots_phase1(pivots);
    double infeas = 0.0;
    for (std::size_t i = 0; i < m_; ++i)
      if (basis_[i] >= int(n_)) infeas += row(i)[n_];
    if (st != LpStatus::optimal || infeas > 1e-6 * std::max(1.0, norm_b())) {
      feasible_ = false;
      return;
    }
    // Drive leftover zero-level artificials out, or deactivate redundant rows.
    for (std::size_t i = 0; i < m_; ++i) {
      if (basis_[i] < int(n_)) continue;
      std::size_t jb = n_;
      for (std::size_t j = 0; j < n_; ++j)
        if (!in_basis_[j] && std::abs(row(i)[j]) > 1e-7) {
          jb = j;
          break;
        }
      if (jb < n_)
        pivot(i, jb);
      else
        active_[i] = 0;
    }
    feasible_ = true;
  }

  // Elimination-based phase 1 from a known feasible support. The basic
  // solution of any nonsingular basis containing the support is that feasible
  // point itself, so no ratio tests are needed; redundant rows show up as
  // all-zero rows and are deactivated. Returns false if the hint fails to
  // produce a nonnegative basic solution.
  bool build_from_support() {
    build_tableau();
    double scale = std::max(1.0, norm_b());
    for (std::size_t j : hint_) {
      if (in_basis_[j]) continue;
      std::size_t best = m_;
      double mag = 1e-7;
      for (std::size_t i = 0; i < m_; ++i) {
        if (!active_[i] || basis_[i] < int(n_)) continue;
        double a = std::abs(row(i)[j]);
        if (a > mag) {
          mag = a;
          best = i;
        }
      }
      if (best < m_) pivot(best, j);
    }
    for (std::size_t i = 0; i < m_; ++i) {
      if (!active_[i] || basis_[i] < int(n_)) continue;
      std::size_t jb = n_;
      double mag = 1e-7;
      for (std::size_t j = 0; j < n_; ++j) {
        if (in_basis_[j]) continue;
        double a = std::abs(row(i)[j]);
        if (a > mag) {
          mag = a;
          jb = j;
        }
      }
      if (jb < n_) {
        pivot(i, jb);
      } else if (std::abs(row(i)[n_]) <= 1e-6 * scale) {
        active_[i] = 0;
      } else {
        return false;
      }
    }
    for (std::size_t i = 0; i < m_; ++i) {
      if (!active_[i] || basis_[i] >= int(n_)) continue;
      double v = row(i)[n_];
      if (v < 0.0) {
        if (v < -1e-7 * scale) return false;
        row(i)[n_] = 0.0;
      }
    }
    feasible_ = true;
    return true;
  }

  double norm_b() const {
    double s = 0.0;
    for (double v : b_cur_) s = std::max(s, std::abs(v));
    return s;
  }

  // Reduced costs of `c` under the current basis.
  void price(const std::vector<double>& c) {
    for (std::size_t j = 0; j <= n_; ++j) cost_[j] = (j < n_) ? c[j] : 0.0;
    for (std::size_t i = 0; i < m_; ++i) {
      if (!active_[i] || basis_[i] >= int(n_)) continue;
      double cb = c[std::size_t(basis_[i])];
      if (cb == 0.0) continue;
      const double* r = row(i);
      for (std::size_t j = 0; j <= n_; ++j) cost_[j] -= cb * r[j];
    }
    // cost_[n_] now holds -objective value.
  }

  void pivot(std::size_t pr, std::size_t pc) {
    double* prow = row(pr);
    double inv = 1.0 / prow[pc];
    for (std::size_t j = 0; j <= n_; ++j) prow[j] *= inv;
    prow[pc] = 1.0;
    for (std::size_t i = 0; i < m_; ++i) {
      if (i == pr || !active_[i]) continue;
      double f = row(i)[pc];
      if (f == 0.0) continue;
      double* r = row(i);
      for (std::size_t j = 0; j <= n_; ++j) r[j] -= f * prow[j];
      r[pc] = 0.0;
    }
    double f = cost_[pc];
    if (f != 0.0) {
      for (std::size_t j = 0; j <= n_; ++j) cost_[j] -= f * prow[j];
      cost_[pc] = 0.0;
    }
    if (basis_[pr] < int(n_)) in_basis_[std::size_t(basis_[pr])] = 0;
    basis_[pr] = int(pc);
    in_basis_[pc] = 1;
    ++basis_gen_;
  }

  // Returns the leaving row for entering column pc, or m_ if unbounded. Ties
  // break toward the largest pivot magnitude for stability; in Bland mode they
  // break toward the lowest basis index, which is what the anti-cycling
  // guarantee needs.
  std::size_t ratio_test(std::size_t pc, bool bland) const {
    std::size_t best = m_;
    double best_ratio = std::numeric_limits<double>::infinity();
    double best_mag = 0.0;
    int best_id = std::numeric_limits<int>::max();
    for (std::size_t i = 0; i < m_; ++i) {
      if (!active_[i]) continue;
      double a = row(i)[pc];
      if (a <= kPivTol) continue;
      double rhs = row(i)[n_];
      double ratio = (rhs <= 0.0) ? 0.0 : rhs / a;
      bool better;
      if (ratio < best_ratio - 1e-12)
        better = true;
      else if (ratio > best_ratio + 1e-12)
        better = false;
      else
        better = bland ? basis_[i] < best_id : a > best_mag;
      if (better) {
        best = i;
        best_ratio = ratio;
        best_mag = a;
        best_id = basis_[i];
      }
    }
    return best;
  }

  std::size_t entering_dantzig(double tol) const {
    std::size_t best = n_;
    double best_rc = tol;
    for (std::size_t j = 0; j < n_; ++j) {
      if (in_basis_[j]) continue;
      if (cost_[j] > best_rc) {
        best_rc = cost_[j];
        best = j;
      }
    }
    return best;
  }

  std::size_t entering_bland(double tol) const {
    for (std::size_t j = 0; j < n_; ++j)
      if (!in_basis_[j] && cost_[j] > tol) return j;
    return n_;
  }

  LpStatus run_pivots(const std::vector<double>& c, int max_pivots, int& pivots) {
    double tol = kOptTol;
    for (double v : c) tol = std::max(tol, kOptTol * std::abs(v));
    return pivot_loop(tol, max_pivots, pivots);
  }

  LpStatus run_pivots_phase1(int& pivots) {
    double tol = kOptTol;
    return pivot_loop(tol, 5000000, pivots);
  }

  LpStatus pivot_loop(double tol, int max_pivots, int& pivots) {
    int stall = 0;
    bool bland = false;
    for (; pivots < max_pivots; ++pivots) {
      std::size_t pc = bland ? entering_bland(tol) : entering_dantzig(tol);
      if (pc >= n_) return LpStatus::optimal;
      std::size_t pr = ratio_test(pc, bland);
      if (pr >= m_) return LpStatus::unbounded;
      double step = row(pr)[n_] / row(pr)[pc];
      pivot(pr, pc);
      if (row(pr)[n_] < 0.0 && row(pr)[n_] > -1e-9) row(pr)[n_] = 0.0;
      if (step <= 1e-12) {
        if (++stall > 100) bland = true;
      } else {
        stall = 0;
        bland = false;
      }
    }
    return LpStatus::iteration_limit;
  }

  void extract(const std::vector<double>& c, LpResult& res) const {
    res.x.assign(n_, 0.0);
    for (std::size_t i = 0; i < m_; ++i) {
      if (!active_[i] || basis_[i] >= int(n_)) continue;
      double v = row(i)[n_];
      res.x[std::size_t(basis_[i])] = (v < 0.0 && v > -1e-9) ? 0.0 : v;
    }
    CompensatedSum acc;
    for (std::size_t j = 0; j < n_; ++j) acc.add(c[j] * res.x[j]);
    res.value = acc.value();
  }

  // Residual of the current basic solution against the original system.
  bool residual_ok() const {
    double scale = std::max(1.0, norm_b());
    std::vector<double> x(n_, 0.0);
    for (std::size_t i = 0; i < m_; ++i)
      if (active_[i] && basis_[i] < int(n_)) x[std::size_t(basis_[i])] = row(i)[n_];
    for (std::size_t i = 0; i < m_; ++i) {
      CompensatedSum acc;
      for (std::size_t j = 0; j < n_; ++j)
        if (x[j] != 0.0) acc.add(orig_->A[i][j] * x[j]);
      if (std::abs(acc.value() - b_cur_[i]) > 1e-6 * scale) return false;
    }
    return true;
  }
};

// One-shot solve.
inline LpResult lp_solve(const LpProblem& p, const std::vector<double>& c) {
  SimplexSolver s(p);
  return s.maximize(c);
}

}  // namespace gibbsrelax
