#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <tuple>
#include <vector>

#include "gibbsrelax/common.hpp"
#include "gibbsrelax/distribution.hpp"
#include "gibbsrelax/info.hpp"
#include "gibbsrelax/model.hpp"
#include "gibbsrelax/simplex.hpp"

namespace gibbsrelax {

inline std::vector<std::vector<int>> subsets_of_size(int n, int k) {
  std::vector<std::vector<int>> out;
  if (k == 0) {
    out.push_back({});
    return out;
  }
  if (k > n) return out;
  std::vector<int> c = first_combination(k);
  do {
    out.push_back(c);
  } while (next_combination(c, n));
  return out;
}

// One joint table per size-`level` subset; subsets in lexicographic order.
struct LocalFamily {
  int n = 0;
  int q = 2;
  int level = 0;
  std::vector<std::vector<int>> subsets;
  std::vector<std::vector<double>> tables;  // each of length q^level
};

// Lexicographically smallest size-`level` sorted superset of U.
inline std::vector<int> covering_subset(int n, int level, const std::vector<int>& U) {
  if (int(U.size()) > level) throw invalid_input_error("covering_subset: |U| > level");
  std::vector<int> S;
  int extras = level - int(U.size());
  size_t u = 0;
  for (int v = 0; v < n && int(S.size()) < level; ++v) {
    if (u < U.size() && U[u] == v) {
      S.push_back(v);
      ++u;
    } else if (extras > 0) {
      S.push_back(v);
      --extras;
    }
  }
  if (int(S.size()) != level) throw invalid_input_error("covering_subset: no superset exists");
  return S;
}

inline std::size_t family_subset_index(const LocalFamily& f, const std::vector<int>& S) {
  auto it = std::lower_bound(f.subsets.begin(), f.subsets.end(), S);
  if (it == f.subsets.end() || *it != S)
    throw invalid_input_error("family_subset_index: subset not present");
  return std::size_t(it - f.subsets.begin());
}

// Marginal on U read from the lexicographically smallest covering table.
inline JointDistribution marginal_from_family(const LocalFamily& f, const std::vector<int>& U) {
  std::vector<int> S = covering_subset(f.n, f.level, U);
  const std::vector<double>& t = f.tables[family_subset_index(f, S)];
  std::vector<int> pos;
  for (int v : U) {
    auto it = std::lower_bound(S.begin(), S.end(), v);
    pos.push_back(int(it - S.begin()));
  }
  JointDistribution out;
  out.scope = U;
  out.q = f.q;
  out.probs.assign(ipow(std::uint64_t(f.q), unsigned(U.size())), 0.0);
  Assignment x(static_cast<std::size_t>(f.level));
  for (std::uint64_t c = 0; c < t.size(); ++c) {
    std::uint64_t rem = c;
    for (int tpos = f.level - 1; tpos >= 0; --tpos) {
      x[size_t(tpos)] = std::uint8_t(rem % std::uint64_t(f.q));
      rem /= std::uint64_t(f.q);
    }
    std::uint64_t idx = 0;
    for (int p : pos) idx = idx * std::uint64_t(f.q) + x[size_t(p)];
    out.probs[idx] += t[c];
  }
  return out;
}

inline JointDistribution family_marginal_of(const LocalFamily& f, std::size_t s,
                                            const std::vector<int>& U);

struct FamilyViolation {
  std::string kind;       // "shape", "negative", "sum", "compat"
  std::vector<int> where; // subset indices involved
  double magnitude = 0.0;
};

struct ValidationReport {
  bool ok = true;
  std::vector<FamilyViolation> violations;
  double max_negative = 0.0;
  double max_sum_deviation = 0.0;
  double max_compat_deviation = 0.0;
};

// Checks shape, per-table simplex membership, and pairwise marginal
// compatibility on intersections. Empty violation list iff valid.
inline ValidationReport validate_local_family(const LocalFamily& f, double entry_tol = 1e-9,
                                              double sum_tol = 1e-7, double compat_tol = 1e-7) {
  ValidationReport rep;
  auto fail = [&](std::string kind, std::vector<int> where, double mag) {
    rep.ok = false;
    rep.violations.push_back({std::move(kind), std::move(where), mag});
  };
  if (f.n < 1 || f.q < 2 || f.level < 1 || f.level > f.n) {
    fail("shape", {}, 0.0);
    return rep;
  }
  std::vector<std::vector<int>> want = subsets_of_size(f.n, f.level);
  if (f.subsets != want || f.tables.size() != want.size()) {
    fail("shape", {}, 0.0);
    return rep;
  }
  std::uint64_t cells = ipow(std::uint64_t(f.q), unsigned(f.level));
  for (std::size_t s = 0; s < f.tables.size(); ++s) {
    if (f.tables[s].size() != cells) {
      fail("shape", {int(s)}, 0.0);
      return rep;
    }
    double neg = 0.0;
    CompensatedSum sum;
    for (double p : f.tables[s]) {
      if (p < 0.0) neg = std::max(neg, -p);
      sum.add(p);
    }
    if (neg > entry_tol) fail("negative", {int(s)}, neg);
    rep.max_negative = std::max(rep.max_negative, neg);
    double dev = std::abs(sum.value() - 1.0);
    if (dev > sum_tol) fail("sum", {int(s)}, dev);
    rep.max_sum_deviation = std::max(rep.max_sum_deviation, dev);
  }
  if (!rep.ok) return rep;
  for (std::size_t a = 0; a < f.subsets.size(); ++a)
    for (std::size_t b = a + 1; b < f.subsets.size(); ++b) {
      std::vector<int> inter;
      std::set_intersection(f.subsets[a].begin(), f.subsets[a].end(), f.subsets[b].begin(),
                            f.subsets[b].end(), std::back_inserter(inter));
      if (inter.empty()) continue;
      JointDistribution ma = family_marginal_of(f, a, inter);
      JointDistribution mb = family_marginal_of(f, b, inter);
      double dev = 0.0;
      for (std::size_t i = 0; i < ma.probs.size(); ++i)
        dev = std::max(dev, std::abs(ma.probs[i] - mb.probs[i]));
      rep.max_compat_deviation = std::max(rep.max_compat_deviation, dev);
      if (dev > compat_tol) fail("compat", {int(a), int(b)}, dev);
    }
  return rep;
}

// Marginal of table `s` onto U (U subset of f.subsets[s]).
inline JointDistribution family_marginal_of(const LocalFamily& f, std::size_t s,
                                            const std::vector<int>& U) {
  const std::vector<int>& S = f.subsets[s];
  std::vector<int> pos;
  for (int v : U) {
    auto it = std::lower_bound(S.begin(), S.end(), v);
    if (it == S.end() || *it != v)
      throw invalid_input_error("family_marginal_of: U not inside subset");
    pos.push_back(int(it - S.begin()));
  }
  JointDistribution out;
  out.scope = U;
  out.q = f.q;
  out.probs.assign(ipow(std::uint64_t(f.q), unsigned(U.size())), 0.0);
  const std::vector<double>& t = f.tables[s];
  Assignment x(static_cast<std::size_t>(f.level));
  for (std::uint64_t c = 0; c < t.size(); ++c) {
    std::uint64_t rem = c;
    for (int tpos = f.level - 1; tpos >= 0; --tpos) {
      x[size_t(tpos)] = std::uint8_t(rem % std::uint64_t(f.q));
      rem /= std::uint64_t(f.q);
    }
    std::uint64_t idx = 0;
    for (int p : pos) idx = idx * std::uint64_t(f.q) + x[size_t(p)];
    out.probs[idx] += t[c];
  }
  return out;
}

// Size-`level` marginals of a full-scope joint; always compatible.
inline LocalFamily embed_distribution(const JointDistribution& d, int level) {
  int n = int(d.scope.size());
  for (int i = 0; i < n; ++i)
    if (d.scope[size_t(i)] != i)
      throw invalid_input_error("embed_distribution: scope must be {0..n-1}");
  if (level < 1 || level > n) throw invalid_input_error("embed_distribution: need 1 <= level <= n");
  LocalFamily f;
  f.n = n;
  f.q = d.q;
  f.level = level;
  f.subsets = subsets_of_size(n, level);
  f.tables.reserve(f.subsets.size());
  for (const auto& S : f.subsets) f.tables.push_back(marginal(d, S).probs);
  return f;
}

// E~[energy]: every hyperedge and field read from its covering table.
inline double pseudo_expectation_energy(const LocalFamily& f, const Mrf& m) {
  if (f.n != m.n || f.q != m.q)
    throw invalid_input_error("pseudo_expectation_energy: family does not match model");
  if (f.level < m.k)
    throw invalid_input_error("pseudo_expectation_energy: level < k leaves edges uncovered");
  CompensatedSum acc;
  for (const MrfEdge& e : m.edges) {
    JointDistribution mg = marginal_from_family(f, e.vertices);
    for (std::size_t c = 0; c < e.table.size(); ++c) acc.add(e.table[c] * mg.probs[c]);
  }
  for (int i = 0; i < m.n; ++i) {
    JointDistribution mg = marginal_from_family(f, {i});
    for (int a = 0; a < m.q; ++a) acc.add(m.fields[size_t(i)][size_t(a)] * mg.probs[size_t(a)]);
  }
  return acc.value();
}

// Entropy surrogate H(X_S) + sum_{i not in S} H(X_i | X_S); upper-bounds the
// true entropy of any distribution with these marginals. Needs |S| < level.
inline double pseudo_entropy(const LocalFamily& f, const std::vector<int>& S) {
  if (int(S.size()) + 1 > f.level)
    throw invalid_input_error("pseudo_entropy: need |S| + 1 <= level");
  double hs = S.empty() ? 0.0 : entropy(marginal_from_family(f, S));
  CompensatedSum acc;
  acc.add(hs);
  for (int i = 0; i < f.n; ++i) {
    if (std::binary_search(S.begin(), S.end(), i)) continue;
    std::vector<int> Si = sorted_union(S, {i});
    acc.add(entropy(marginal_from_family(f, Si)) - hs);
  }
  return acc.value();
}

struct EntropySetChoice {
  std::vector<int> set;
  double value = 0.0;
  bool exhaustive = true;
};

// min over |S| <= r of pseudo_entropy; exhaustive when C(n,r) is small,
// greedy vertex-by-vertex otherwise.
inline EntropySetChoice min_pseudo_entropy_set(const LocalFamily& f, int r,
                                               double exhaustive_cap = 1e5) {
  r = std::min(r, f.level - 1);
  if (r < 0) throw invalid_input_error("min_pseudo_entropy_set: level too small");
  EntropySetChoice best;
  best.set = {};
  best.value = pseudo_entropy(f, {});
  if (binom(f.n, r) <= exhaustive_cap) {
    for (int t = 1; t <= r; ++t)
      for (const auto& S : subsets_of_size(f.n, t)) {
        double v = pseudo_entropy(f, S);
        if (v < best.value - 1e-12) {
          best.value = v;
          best.set = S;
        }
      }
    return best;
  }
  best.exhaustive = false;
  std::vector<int> S;
  for (int t = 0; t < r; ++t) {
    double cur = best.value;
    std::vector<int> pick;
    for (int v = 0; v < f.n; ++v) {
      if (std::binary_search(S.begin(), S.end(), v)) continue;
      std::vector<int> cand = sorted_union(S, {v});
      double val = pseudo_entropy(f, cand);
      if (val < cur - 1e-12) {
        cur = val;
        pick = cand;
      }
    }
    if (pick.empty()) break;
    S = pick;
    best.set = S;
    best.value = cur;
  }
  return best;
}

// Uniform family: every table constant 1/q^level; feasible for every level.
inline LocalFamily uniform_family(int n, int q, int level) {
  LocalFamily f;
  f.n = n;
  f.q = q;
  f.level = level;
  f.subsets = subsets_of_size(n, level);
  std::uint64_t cells = ipow(std::uint64_t(q), unsigned(level));
  f.tables.assign(f.subsets.size(), std::vector<double>(cells, 1.0 / double(cells)));
  return f;
}

// Equality system of the local-marginal polytope in cell variables: one
// sum-to-one row for the first subset, plus rows tying each (level-1)-subset
// marginal to its lexicographically smallest covering table. Transitivity
// makes every pair of tables compatible on every shared subset.
struct SaPolytope {
  int n = 0, q = 0, level = 0;
  std::vector<std::vector<int>> subsets;
  std::uint64_t table_cells = 0;
  std::size_t ncells = 0;
  LpProblem lp;
  std::shared_ptr<const SimplexSolver> feasible;  // snapshot after phase 1
};

namespace detail {

inline void add_marginal_row(std::vector<double>& row, const std::vector<int>& S,
                             std::size_t table_offset, const std::vector<int>& W,
                             std::uint64_t w_index, int q, int level, double sign) {
  // Adds sign * (marginal of table S onto W at assignment w_index).
  std::vector<int> pos;
  for (int v : W) {
    auto it = std::lower_bound(S.begin(), S.end(), v);
    pos.push_back(int(it - S.begin()));
  }
  std::uint64_t cells = ipow(std::uint64_t(q), unsigned(level));
  Assignment x(static_cast<std::size_t>(level));
  for (std::uint64_t c = 0; c < cells; ++c) {
    std::uint64_t rem = c;
    for (int t = level - 1; t >= 0; --t) {
      x[size_t(t)] = std::uint8_t(rem % std::uint64_t(q));
      rem /= std::uint64_t(q);
    }
    std::uint64_t idx = 0;
    for (int p : pos) idx = idx * std::uint64_t(q) + x[size_t(p)];
    if (idx == w_index) row[table_offset + c] += sign;
  }
}

}  // namespace detail

inline std::shared_ptr<const SaPolytope> build_sa_polytope(int n, int q, int level,
                                                           std::size_t cell_cap = 100000) {
  if (level < 1 || level > n) throw invalid_input_error("sa polytope: need 1 <= level <= n");
  auto P = std::make_shared<SaPolytope>();
  P->n = n;
  P->q = q;
  P->level = level;
  P->subsets = subsets_of_size(n, level);
  P->table_cells = ipow(std::uint64_t(q), unsigned(level));
  P->ncells = P->subsets.size() * std::size_t(P->table_cells);
  if (P->ncells > cell_cap)
    throw size_limit_error("sa polytope: " + std::to_string(P->ncells) +
                           " cells exceed cap " + std::to_string(cell_cap));
  std::uint64_t wcells = ipow(std::uint64_t(q), unsigned(level - 1));
  std::vector<std::vector<int>> wsubs = subsets_of_size(n, level - 1);
  std::size_t nrows = 1 + wsubs.size() * std::size_t(n - level) * wcells;
  if ((nrows + 1) * (P->ncells + 1) > 60000000)
    throw size_limit_error("sa polytope: tableau too large");

  P->lp.nvars = P->ncells;
  P->lp.A.reserve(nrows);
  P->lp.b.reserve(nrows);
  {
    std::vector<double> row(P->ncells, 0.0);
    for (std::uint64_t c = 0; c < P->table_cells; ++c) row[c] = 1.0;
    P->lp.A.push_back(std::move(row));
    P->lp.b.push_back(1.0);
  }
  auto subset_offset = [&](const std::vector<int>& S) {
    auto it = std::lower_bound(P->subsets.begin(), P->subsets.end(), S);
    return std::size_t(it - P->subsets.begin()) * std::size_t(P->table_cells);
  };
  for (const auto& W : wsubs) {
    std::vector<int> rep = covering_subset(n, level, W);
    std::size_t rep_off = subset_offset(rep);
    for (int v = 0; v < n; ++v) {
      if (std::binary_search(W.begin(), W.end(), v)) continue;
      std::vector<int> S = sorted_union(W, {v});
      if (S == rep) continue;
      std::size_t off = subset_offset(S);
      for (std::uint64_t w = 0; w < wcells; ++w) {
        std::vector<double> row(P->ncells, 0.0);
        detail::add_marginal_row(row, S, off, W, w, q, level, 1.0);
        detail::add_marginal_row(row, rep, rep_off, W, w, q, level, -1.0);
        P->lp.A.push_back(std::move(row));
        P->lp.b.push_back(0.0);
      }
    }
  }
  // The all-zeros point-mass family is a vertex; its support seeds phase 1.
  std::vector<std::size_t> support;
  support.reserve(P->subsets.size());
  for (std::size_t s = 0; s < P->subsets.size(); ++s)
    support.push_back(s * std::size_t(P->table_cells));
  P->feasible = std::make_shared<const SimplexSolver>(P->lp, support);
  if (!P->feasible->feasible())
    throw std::logic_error("sa polytope: phase 1 failed on a feasible system");
  return P;
}

// Cached per structure; phase 1 runs once and solvers are copied from the
// snapshot for each solve.
inline std::shared_ptr<const SaPolytope> sa_polytope(int n, int q, int level,
                                                     std::size_t cell_cap = 100000) {
  static std::mutex mu;
  static std::map<std::tuple<int, int, int>, std::shared_ptr<const SaPolytope>> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto key = std::make_tuple(n, q, level);
  auto it = cache.find(key);
  if (it != cache.end()) return it->second;
  auto P = build_sa_polytope(n, q, level, cell_cap);
  cache[key] = P;
  return P;
}

// Family from a flat cell vector (tiny negatives clamped to zero).
inline LocalFamily family_from_cells(const SaPolytope& P, const std::vector<double>& x) {
  LocalFamily f;
  f.n = P.n;
  f.q = P.q;
  f.level = P.level;
  f.subsets = P.subsets;
  f.tables.resize(P.subsets.size());
  for (std::size_t s = 0; s < P.subsets.size(); ++s) {
    const double* base = x.data() + s * std::size_t(P.table_cells);
    f.tables[s].assign(base, base + P.table_cells);
    for (double& v : f.tables[s])
      if (v < 0.0 && v > -1e-7) v = 0.0;
  }
  return f;
}

inline std::vector<double> cells_from_family(const SaPolytope& P, const LocalFamily& f) {
  if (f.n != P.n || f.q != P.q || f.level != P.level || f.subsets != P.subsets)
    throw invalid_input_error("cells_from_family: family does not match polytope");
  std::vector<double> x(P.ncells);
  for (std::size_t s = 0; s < f.tables.size(); ++s)
    std::copy(f.tables[s].begin(), f.tables[s].end(),
              x.begin() + std::ptrdiff_t(s * std::size_t(P.table_cells)));
  return x;
}

}  // namespace gibbsrelax
