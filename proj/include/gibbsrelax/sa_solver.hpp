#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "gibbsrelax/common.hpp"
#include "gibbsrelax/local_family.hpp"
#include "gibbsrelax/model.hpp"
#include "gibbsrelax/simplex.hpp"

namespace gibbsrelax {

// Guarantee for the level-(r+k) relaxation of an order-k model:
// the relaxed value exceeds log Z by at most this much.
inline double relaxation_gap_bound(int n, int k, int q, double mrf_frobenius, int r) {
  if (r < 1) throw invalid_input_error("relaxation_gap_bound: r >= 1 required");
  return std::sqrt(4.0 * std::log(double(q)) / double(r)) * double(k) *
         std::pow(double(n), double(k) / 2.0) * mrf_frobenius / std::sqrt(factorial(k));
}

struct SaOptions {
  double eps = 1e-3;             // target certified duality gap
  int max_fw_iterations = 10000;
  int max_alternations = 8;
  std::size_t cell_cap = 100000;
  double entropy_enum_cap = 1e5; // exhaustive set search below this count
};

struct SaSolveReport {
  LocalFamily family;
  double upper_bound = 0.0;   // certified: >= log Z
  double objective = 0.0;     // pseudo energy + min-set pseudo entropy at family
  std::vector<int> entropy_set;
  double duality_gap = 0.0;
  int fw_iterations = 0;
  int lp_calls = 0;
  int alternations = 0;
  bool converged = false;
  std::vector<double> objective_trace;  // surrogate value per alternation
  double eps = 0.0;
};

namespace detail {

// One concave entropy piece of the fixed-set surrogate: coeff * H of the
// marginal obtained by accumulating the designated table through `pattern`.
struct EntropyTerm {
  std::size_t offset = 0;  // cell offset of the designated table
  std::vector<std::uint32_t> pattern;
  std::size_t msize = 0;
  double coeff = 0.0;
};

struct SurrogatePlan {
  const SaPolytope* P = nullptr;
  std::vector<double> lin;
  std::vector<EntropyTerm> terms;
};

inline std::vector<std::uint32_t> cell_pattern(const SaPolytope& P, const std::vector<int>& S,
                                               const std::vector<int>& U) {
  std::vector<int> pos;
  for (int v : U) {
    auto it = std::lower_bound(S.begin(), S.end(), v);
    pos.push_back(int(it - S.begin()));
  }
  std::vector<std::uint32_t> pat(std::size_t(P.table_cells));
  Assignment x(static_cast<std::size_t>(P.level));
  for (std::uint64_t c = 0; c < P.table_cells; ++c) {
    std::uint64_t rem = c;
    for (int t = P.level - 1; t >= 0; --t) {
      x[size_t(t)] = std::uint8_t(rem % std::uint64_t(P.q));
      rem /= std::uint64_t(P.q);
    }
    std::uint64_t idx = 0;
    for (int p : pos) idx = idx * std::uint64_t(P.q) + x[size_t(p)];
    pat[c] = std::uint32_t(idx);
  }
  return pat;
}

inline std::size_t designated_offset(const SaPolytope& P, const std::vector<int>& U,
                                     std::vector<int>& S_out) {
  S_out = covering_subset(P.n, P.level, U);
  auto it = std::lower_bound(P.subsets.begin(), P.subsets.end(), S_out);
  return std::size_t(it - P.subsets.begin()) * std::size_t(P.table_cells);
}

// Surrogate for conditioning set S:
//   G(mu) = <lin, mu> + sum_{i not in S} H(X_{S+i}) - (n-|S|-1) H(X_S),
// each marginal read from its designated (lex-smallest covering) table.
inline SurrogatePlan make_plan(const SaPolytope& P, const Mrf& m, const std::vector<int>& S) {
  SurrogatePlan plan;
  plan.P = &P;
  plan.lin.assign(P.ncells, 0.0);
  for (const MrfEdge& e : m.edges) {
    std::vector<int> cov;
    std::size_t off = designated_offset(P, e.vertices, cov);
    std::vector<std::uint32_t> pat = cell_pattern(P, cov, e.vertices);
    for (std::uint64_t c = 0; c < P.table_cells; ++c)
      plan.lin[off + c] += e.table[pat[c]];
  }
  for (int i = 0; i < m.n; ++i) {
    bool all_zero = true;
    for (double h : m.fields[size_t(i)])
      if (h != 0.0) all_zero = false;
    if (all_zero) continue;
    std::vector<int> cov;
    std::size_t off = designated_offset(P, {i}, cov);
    std::vector<std::uint32_t> pat = cell_pattern(P, cov, {i});
    for (std::uint64_t c = 0; c < P.table_cells; ++c)
      plan.lin[off + c] += m.fields[size_t(i)][pat[c]];
  }
  auto add_term = [&](const std::vector<int>& U, double coeff) {
    EntropyTerm t;
    std::vector<int> cov;
    t.offset = designated_offset(P, U, cov);
    t.pattern = cell_pattern(P, cov, U);
    t.msize = ipow(std::uint64_t(P.q), unsigned(U.size()));
    t.coeff = coeff;
    plan.terms.push_back(std::move(t));
  };
  for (int i = 0; i < P.n; ++i) {
    if (std::binary_search(S.begin(), S.end(), i)) continue;
    add_term(sorted_union(S, {i}), 1.0);
  }
  if (!S.empty()) add_term(S, -double(P.n - int(S.size()) - 1));
  return plan;
}

inline void term_marginal(const EntropyTerm& t, const std::vector<double>& x,
                          std::vector<double>& out) {
  out.assign(t.msize, 0.0);
  for (std::size_t c = 0; c < t.pattern.size(); ++c) out[t.pattern[c]] += x[t.offset + c];
}

inline double plan_value(const SurrogatePlan& plan, const std::vector<double>& x) {
  CompensatedSum acc;
  for (std::size_t i = 0; i < x.size(); ++i) acc.add(plan.lin[i] * x[i]);
  std::vector<double> m;
  for (const EntropyTerm& t : plan.terms) {
    term_marginal(t, x, m);
    CompensatedSum h;
    for (double p : m)
      if (p > 0.0) h.add(-p * std::log(p));
    acc.add(t.coeff * h.value());
  }
  return acc.value();
}

constexpr double kEntropyGradClamp = 1e-12;

inline void plan_gradient(const SurrogatePlan& plan, const std::vector<double>& x,
                          std::vector<double>& g) {
  g = plan.lin;
  std::vector<double> m;
  for (const EntropyTerm& t : plan.terms) {
    term_marginal(t, x, m);
    for (std::size_t c = 0; c < t.pattern.size(); ++c) {
      double p = std::max(m[t.pattern[c]], kEntropyGradClamp);
      g[t.offset + c] += t.coeff * (-(std::log(p) + 1.0));
    }
  }
}

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
  CompensatedSum acc;
  for (std::size_t i = 0; i < a.size(); ++i) acc.add(a[i] * b[i]);
  return acc.value();
}

// Fourier coefficients of the cell encoding for binary alphabets. Letter 0 is
// spin +1; cell (S, x) carries 2^{-level} * chi_T(x) for every T subseteq S,
// reported with T as a vertex bitmask. Visits every (T, cell) pair once.
template <class F>
inline void moment_coeffs(const SaPolytope& P, F&& f) {
  double scale = 1.0 / double(P.table_cells);
  for (std::size_t s = 0; s < P.subsets.size(); ++s) {
    const std::vector<int>& verts = P.subsets[s];
    std::vector<std::uint32_t> vbit(verts.size());
    for (std::size_t p = 0; p < verts.size(); ++p)
      vbit[p] = std::uint32_t(1) << std::uint32_t(verts[p]);
    for (std::uint64_t idx = 0; idx < P.table_cells; ++idx) {
      // Local bit p set when the letter at position p is 1 (spin -1);
      // position 0 is the most significant digit of the cell index.
      std::uint32_t lm = 0;
      for (int p = 0; p < P.level; ++p)
        if ((idx >> (P.level - 1 - p)) & 1u) lm |= std::uint32_t(1) << p;
      std::size_t cell = s * std::size_t(P.table_cells) + idx;
      for (std::uint32_t T = 0; T < (std::uint32_t(1) << P.level); ++T) {
        double sign = (std::popcount(T & lm) & 1) ? -scale : scale;
        std::uint32_t gm = 0;
        for (int p = 0; p < P.level; ++p)
          if ((T >> p) & 1u) gm |= vbit[std::size_t(p)];
        f(gm, cell, sign);
      }
    }
  }
}

// For q = 2 the polytope has moment coordinates: a family is a member iff all
// of its tables are inverse Fourier transforms of one correlation vector y_T
// over |T| <= level with y_empty = 1. Maximizing a linear functional of the
// cells is then an LP in y with one inequality per cell, whose dual
//   min lambda  s.t.  G^T mu = lambda e_empty - G^T c,  mu >= 0
// has one row per moment and a generic right-hand side. That shape avoids the
// degenerate stalling the cell-form primal (thousands of all-zero rows)
// inflicts on simplex; the optimal cells reappear as negated reduced costs.
struct MomentDual {
  int n = 0;
  int level = 0;
  std::size_t nmoments = 0;
  std::vector<int> moment_row;  // vertex mask -> row index, -1 beyond level
  LpProblem lp;                 // rhs is a placeholder, filled per objective
  std::vector<int> col_rows;    // sparse columns of lp.A, 2^level rows per cell
};

inline std::shared_ptr<const MomentDual> moment_dual(const SaPolytope& P) {
  static std::mutex mu;
  static std::map<std::pair<int, int>, std::shared_ptr<const MomentDual>> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto key = std::make_pair(P.n, P.level);
  auto it = cache.find(key);
  if (it != cache.end()) return it->second;

  auto D = std::make_shared<MomentDual>();
  D->n = P.n;
  D->level = P.level;
  D->moment_row.assign(std::size_t(1) << P.n, -1);
  for (std::uint32_t mask = 0; mask < (std::uint32_t(1) << P.n); ++mask)
    if (std::popcount(mask) <= P.level) {
      D->moment_row[mask] = int(D->nmoments);
      ++D->nmoments;
    }
  D->lp.nvars = P.ncells + 2;
  D->lp.A.assign(D->nmoments, std::vector<double>(D->lp.nvars, 0.0));
  D->lp.b.assign(D->nmoments, 0.0);
  D->col_rows.reserve(P.ncells * std::size_t(P.table_cells));
  moment_coeffs(P, [&](std::uint32_t gm, std::size_t cell, double coeff) {
    D->lp.A[std::size_t(D->moment_row[gm])][cell] = coeff;
    int r = D->moment_row[gm] + 1;  // sign carries the coefficient's sign
    D->col_rows.push_back(coeff > 0.0 ? r : -r);
  });
  std::size_t empty_row = std::size_t(D->moment_row[0]);
  D->lp.A[empty_row][P.ncells] = -1.0;     // lambda+
  D->lp.A[empty_row][P.ncells + 1] = 1.0;  // lambda-
  cache[key] = D;
  return D;
}

// Linear-maximization oracle over the polytope. Binary models go through the
// moment dual; other alphabets, oversized masks, and any dual solve that fails
// its self-checks fall back to warm-started simplex on the cell encoding.
// When the global assignment space is small, maximize_integral offers a cheap
// inexact step: the best point-mass family, certified only by the loose
// per-table bound.
class SaOracle {
 public:
  explicit SaOracle(std::shared_ptr<const SaPolytope> P) : P_(std::move(P)) {
    if (P_->q == 2 && P_->n <= 20) dual_ = moment_dual(*P_);
    double na = std::pow(double(P_->q), P_->n);
    if (na <= 4096.0 && na * double(P_->subsets.size()) <= double(1 << 22)) {
      nassign_ = std::size_t(na + 0.5);
      icell_.resize(P_->subsets.size());
      for (std::size_t s = 0; s < P_->subsets.size(); ++s) {
        icell_[s].resize(nassign_);
        for (std::size_t a = 0; a < nassign_; ++a) {
          std::uint64_t idx = 0;
          for (int v : P_->subsets[s]) {
            std::size_t div = 1;
            for (int t = 0; t < v; ++t) div *= std::size_t(P_->q);
            idx = idx * std::uint64_t(P_->q) + (a / div) % std::size_t(P_->q);
          }
          icell_[s][a] = std::uint32_t(idx);
        }
      }
    }
  }

  struct Result {
    std::shared_ptr<const std::vector<double>> v;  // optimal vertex cells
    double bound = 0.0;                            // certified max of c over the polytope
  };

  Result maximize(const std::vector<double>& c) {
    if (c.size() != P_->ncells)
      throw invalid_input_error("sa oracle: objective length mismatch");
    if (dual_) {
      std::optional<Result> r = dual_solve(c);
      if (r) return *std::move(r);
    }
    return cell_solve(c);
  }

  bool has_integral() const { return nassign_ > 0; }

  // Best point-mass family. Valid polytope member, but in general not the
  // linear maximizer; bound sums each table's best cell, which upper-bounds
  // the polytope maximum by ignoring the consistency ties.
  Result maximize_integral(const std::vector<double>& c) {
    if (c.size() != P_->ncells)
      throw invalid_input_error("sa oracle: objective length mismatch");
    std::size_t best_a = 0;
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t a = 0; a < nassign_; ++a) {
      double val = 0.0;
      for (std::size_t s = 0; s < P_->subsets.size(); ++s)
        val += c[s * std::size_t(P_->table_cells) + icell_[s][a]];
      if (val > best) {
        best = val;
        best_a = a;
      }
    }
    Result out;
    auto v = std::make_shared<std::vector<double>>(P_->ncells, 0.0);
    CompensatedSum loose;
    for (std::size_t s = 0; s < P_->subsets.size(); ++s) {
      const double* tc = c.data() + s * std::size_t(P_->table_cells);
      loose.add(*std::max_element(tc, tc + P_->table_cells));
      (*v)[s * std::size_t(P_->table_cells) + icell_[s][best_a]] = 1.0;
    }
    out.v = std::move(v);
    out.bound = loose.value();
    return out;
  }

 private:
  std::shared_ptr<const SaPolytope> P_;
  std::shared_ptr<const MomentDual> dual_;
  std::optional<SimplexSolver> dsolver_;  // persistent: rhs changes per call
  std::vector<double> cd_;                // fixed dual objective
  std::optional<SimplexSolver> cell_;
  std::size_t nassign_ = 0;               // assignment count when integral steps apply
  std::vector<std::vector<std::uint32_t>> icell_;

  std::optional<Result> dual_solve(const std::vector<double>& c) {
    std::vector<double> b(dual_->nmoments, 0.0);
    const double scale = 1.0 / double(P_->table_cells);
    std::size_t pos = 0;
    for (std::size_t cell = 0; cell < P_->ncells; ++cell) {
      double w = scale * c[cell];
      for (std::uint64_t t = 0; t < P_->table_cells; ++t, ++pos) {
        int e = dual_->col_rows[pos];
        if (e > 0)
          b[std::size_t(e) - 1] -= w;
        else
          b[std::size_t(-e) - 1] += w;
      }
    }
    LpResult lr;
    if (!dsolver_) {
      LpProblem prob = dual_->lp;
      prob.b = b;
      cd_.assign(prob.nvars, 0.0);
      cd_[P_->ncells] = -1.0;
      cd_[P_->ncells + 1] = 1.0;
      dsolver_.emplace(prob);
      if (!dsolver_->feasible()) {
        dsolver_.reset();
        return std::nullopt;
      }
      lr = dsolver_->maximize(cd_);
    } else {
      lr = dsolver_->reoptimize(cd_, std::move(b));
    }
    if (lr.status != LpStatus::optimal) {
      dsolver_.reset();
      return std::nullopt;
    }
    auto v = std::make_shared<std::vector<double>>(P_->ncells, 0.0);
    const std::vector<double>& rc = dsolver_->reduced_costs();
    for (std::size_t j = 0; j < P_->ncells; ++j) (*v)[j] = std::max(0.0, -rc[j]);
    // The complementary solution must still put mass one on every table.
    for (std::size_t s = 0; s < P_->subsets.size(); ++s) {
      CompensatedSum acc;
      for (std::uint64_t i = 0; i < P_->table_cells; ++i)
        acc.add((*v)[s * std::size_t(P_->table_cells) + i]);
      if (std::abs(acc.value() - 1.0) > 1e-6) {
        dsolver_.reset();
        return std::nullopt;
      }
    }
    Result out;
    out.v = std::move(v);
    out.bound = std::max(-lr.value, dot(c, *out.v));
    return out;
  }

  Result cell_solve(const std::vector<double>& c) {
    if (!cell_) cell_.emplace(*P_->feasible);
    LpResult lr = cell_->maximize(c);
    if (lr.status != LpStatus::optimal)
      throw std::runtime_error("sa solver: lp oracle did not reach optimality");
    Result out;
    out.v = std::make_shared<const std::vector<double>>(std::move(lr.x));
    out.bound = dot(c, *out.v);
    return out;
  }
};

// Maximize G along mu + gamma*d for gamma in [0, gmax], where d is described
// by its linear part and per-term marginal differences. G is concave in
// gamma, so bisection on the derivative sign suffices.
inline double line_search(const SurrogatePlan& plan, double lin_d,
                          const std::vector<std::vector<double>>& m_mu,
                          const std::vector<std::vector<double>>& m_d, double gmax) {
  auto deriv = [&](double gamma) {
    CompensatedSum acc;
    acc.add(lin_d);
    for (std::size_t t = 0; t < plan.terms.size(); ++t) {
      const double coeff = plan.terms[t].coeff;
      for (std::size_t i = 0; i < m_mu[t].size(); ++i) {
        double dm = m_d[t][i];
        if (dm == 0.0) continue;
        double p = std::max(m_mu[t][i] + gamma * dm, kEntropyGradClamp);
        acc.add(coeff * (-(std::log(p) + 1.0)) * dm);
      }
    }
    return acc.value();
  };
  if (deriv(gmax) >= 0.0) return gmax;
  double lo = 0.0, hi = gmax;
  for (int it = 0; it < 60; ++it) {
    double mid = 0.5 * (lo + hi);
    if (deriv(mid) >= 0.0)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

struct Atom {
  double w = 0.0;
  std::shared_ptr<const std::vector<double>> v;
};

struct FwState {
  std::vector<double> x;
  std::vector<Atom> atoms;
};

struct FwResult {
  double value = 0.0;
  double certified_gap = 0.0;
  int iterations = 0;
  int lp_calls = 0;
  bool converged = false;
};

inline void rebuild_from_atoms(FwState& st) {
  std::fill(st.x.begin(), st.x.end(), 0.0);
  for (const Atom& a : st.atoms)
    for (std::size_t i = 0; i < st.x.size(); ++i) st.x[i] += a.w * (*a.v)[i];
}

// Away-step Frank-Wolfe with a lazy vertex cache. While the cheap integral
// oracle keeps making headway its point-mass vertices drive the steps; once
// its gain stalls relative to the remaining gap the exact LP oracle takes
// over, consulted only when no cached atom clears the adaptive threshold.
// The final gap is always certified by a true LP solve at the iterate.
inline FwResult fw_maximize(const SurrogatePlan& plan, SaOracle& lp_oracle, FwState& st,
                            double eps, int max_iters, int* lp_calls_total) {
  FwResult res;
  std::vector<double> g;
  std::vector<double> m_mu, m_pt;
  std::vector<std::vector<double>> mm, md;
  double phi = -1.0;  // lazy threshold; set after the first true gap
  bool integral = lp_oracle.has_integral();
  auto oracle = [&](const std::vector<double>& grad) {
    SaOracle::Result out = lp_oracle.maximize(grad);
    ++res.lp_calls;
    if (lp_calls_total) ++(*lp_calls_total);
    return out;
  };
  for (int it = 0; it < max_iters; ++it) {
    ++res.iterations;
    plan_gradient(plan, st.x, g);
    double g_mu = dot(g, st.x);

    std::size_t best_a = 0, worst_a = 0;
    double best_s = -std::numeric_limits<double>::infinity();
    double worst_s = std::numeric_limits<double>::infinity();
    for (std::size_t a = 0; a < st.atoms.size(); ++a) {
      double s = dot(g, *st.atoms[a].v);
      if (s > best_s) {
        best_s = s;
        best_a = a;
      }
      if (s < worst_s) {
        worst_s = s;
        worst_a = a;
      }
    }
    double cache_fw_score = best_s - g_mu;
    double away_score = g_mu - worst_s;

    std::shared_ptr<const std::vector<double>> fw_v;
    std::size_t fw_atom = st.atoms.size();  // index if the vertex is cached
    bool have_fw = false;
    if (integral) {
      SaOracle::Result out = lp_oracle.maximize_integral(g);
      double step_gain = dot(g, *out.v) - g_mu;
      double loose_gap = std::max(out.bound - g_mu, step_gain);
      if (loose_gap <= eps) {
        res.certified_gap = std::max(loose_gap, 0.0);
        res.converged = true;
        break;
      }
      if (step_gain > std::max(loose_gap / 4.0, 8.0 * eps)) {
        if (step_gain >= cache_fw_score) {
          fw_v = out.v;
          have_fw = true;
          cache_fw_score = step_gain;
        } else {
          fw_v = st.atoms[best_a].v;
          fw_atom = best_a;
          have_fw = true;
        }
      } else {
        integral = false;  // integral steps no longer help; use the LP
      }
    }
    if (!integral) {
      if (phi >= 0.0 && cache_fw_score >= phi) {
        fw_v = st.atoms[best_a].v;
        fw_atom = best_a;
        have_fw = true;
      }
      if (!have_fw && (phi < 0.0 || away_score < phi)) {
        auto out = oracle(g);
        double step_gain = dot(g, *out.v) - g_mu;
        double true_gap = std::max(out.bound - g_mu, step_gain);
        res.certified_gap = std::max(true_gap, 0.0);
        if (true_gap <= eps) {
          res.converged = true;
          break;
        }
        phi = (phi < 0.0) ? true_gap / 2.0 : std::min(phi, std::max(true_gap / 2.0, eps));
        fw_v = out.v;
        have_fw = true;
        cache_fw_score = step_gain;
      }
    }

    bool away = !have_fw || (st.atoms.size() > 1 && away_score > cache_fw_score);
    const std::vector<double>& target = away ? *st.atoms[worst_a].v : *fw_v;
    double gmax = 1.0;
    if (away) {
      double w = st.atoms[worst_a].w;
      if (w >= 1.0 - 1e-15) continue;  // single-atom away direction is zero
      gmax = w / (1.0 - w);
    }
    // Direction d = target - mu for a forward step, mu - target for away.
    mm.assign(plan.terms.size(), {});
    md.assign(plan.terms.size(), {});
    for (std::size_t t = 0; t < plan.terms.size(); ++t) {
      term_marginal(plan.terms[t], st.x, mm[t]);
      term_marginal(plan.terms[t], target, m_pt);
      md[t].resize(m_pt.size());
      for (std::size_t i = 0; i < m_pt.size(); ++i) {
        double d = m_pt[i] - mm[t][i];
        md[t][i] = away ? -d : d;
      }
    }
    double lin_d = dot(plan.lin, target) - dot(plan.lin, st.x);
    if (away) lin_d = -lin_d;
    double gamma = line_search(plan, lin_d, mm, md, gmax);
    if (gamma <= 0.0) {
      phi = std::max(phi / 2.0, eps);
      continue;
    }

    if (away) {
      for (Atom& a : st.atoms) a.w *= (1.0 + gamma);
      st.atoms[worst_a].w -= gamma;
      for (std::size_t i = 0; i < st.x.size(); ++i)
        st.x[i] = (1.0 + gamma) * st.x[i] - gamma * target[i];
    } else {
      for (Atom& a : st.atoms) a.w *= (1.0 - gamma);
      if (fw_atom < st.atoms.size())
        st.atoms[fw_atom].w += gamma;
      else
        st.atoms.push_back({gamma, fw_v});
      for (std::size_t i = 0; i < st.x.size(); ++i)
        st.x[i] = (1.0 - gamma) * st.x[i] + gamma * target[i];
    }
    st.atoms.erase(std::remove_if(st.atoms.begin(), st.atoms.end(),
                                  [](const Atom& a) { return a.w <= 1e-14; }),
                   st.atoms.end());
    if ((it & 63) == 63) rebuild_from_atoms(st);
  }
  if (!res.converged) {
    // Certify the gap at the final iterate.
    plan_gradient(plan, st.x, g);
    auto out = oracle(g);
    res.certified_gap = std::max(out.bound - dot(g, st.x), 0.0);
    res.converged = res.certified_gap <= eps;
  }
  res.value = plan_value(plan, st.x);
  return res;
}

}  // namespace detail

// Alternating maximization: Frank-Wolfe on the fixed-set surrogate, then
// re-select the minimizing entropy set, until the set stabilizes. Every
// surrogate maximum upper-bounds the relaxed value, hence log Z; the report
// keeps the smallest certified bound seen.
inline SaSolveReport solve_sa(const Mrf& m, int r_entropy, const SaOptions& opt = {}) {
  validate_mrf(m);
  if (r_entropy < 1) throw invalid_input_error("solve_sa: r_entropy >= 1 required");
  int level = r_entropy + m.k;
  if (level > m.n)
    throw invalid_input_error("solve_sa: r_entropy + k exceeds n");
  auto P = sa_polytope(m.n, m.q, level, opt.cell_cap);

  SaSolveReport rep;
  rep.eps = opt.eps;
  detail::SaOracle lp_oracle(P);

  detail::FwState st;
  st.x = cells_from_family(*P, uniform_family(m.n, m.q, level));
  st.atoms.push_back({1.0, std::make_shared<const std::vector<double>>(st.x)});

  std::vector<int> S;
  std::vector<std::vector<int>> visited;
  double best_upper = std::numeric_limits<double>::infinity();
  bool fw_ok = false, stable = false;
  int fw_budget = opt.max_fw_iterations;
  for (int round = 0; round < opt.max_alternations; ++round) {
    visited.push_back(S);
    rep.alternations = round + 1;
    detail::SurrogatePlan plan = detail::make_plan(*P, m, S);
    detail::FwResult fw =
        detail::fw_maximize(plan, lp_oracle, st, opt.eps / 2.0, fw_budget, &rep.lp_calls);
    rep.fw_iterations += fw.iterations;
    fw_budget = std::max(fw_budget - fw.iterations, 100);
    fw_ok = fw.converged;
    rep.duality_gap = fw.certified_gap;
    rep.objective_trace.push_back(fw.value);
    best_upper = std::min(best_upper, fw.value + fw.certified_gap);

    LocalFamily fam = family_from_cells(*P, st.x);
    EntropySetChoice choice = min_pseudo_entropy_set(fam, r_entropy, opt.entropy_enum_cap);
    // Stable when re-selection returns the current set or gains less than a
    // fraction of eps. Revisiting any earlier set means the alternation
    // cycles; every visited surrogate already contributed an upper bound, so
    // stop rather than repeat.
    bool cycled = std::find(visited.begin(), visited.end(), choice.set) != visited.end();
    stable = choice.set == S || choice.value >= pseudo_entropy(fam, S) - 0.1 * opt.eps;
    if (stable || cycled || round + 1 == opt.max_alternations) {
      rep.family = std::move(fam);
      rep.entropy_set = choice.set;
      rep.objective = pseudo_expectation_energy(rep.family, m) + choice.value;
      break;
    }
    S = choice.set;
  }
  rep.upper_bound = best_upper;
  rep.converged = fw_ok && stable;
  return rep;
}

inline SaSolveReport solve_sa(const IsingModel& m, int r_entropy, const SaOptions& opt = {}) {
  return solve_sa(ising_to_mrf(m), r_entropy, opt);
}

}  // namespace gibbsrelax
