#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "gibbsrelax/common.hpp"
#include "gibbsrelax/model.hpp"

namespace gibbsrelax {

// Distribution over assignments of `scope` (sorted global vertex ids),
// row-major with the first scope vertex most significant.
struct JointDistribution {
  std::vector<int> scope;
  int q = 2;
  std::vector<double> probs;
};

inline void validate_joint(const JointDistribution& d, double tol = 1e-9) {
  if (d.q < 2) throw invalid_input_error("joint: q must be >= 2");
  for (size_t i = 1; i < d.scope.size(); ++i)
    if (d.scope[i - 1] >= d.scope[i])
      throw invalid_input_error("joint: scope must be strictly increasing");
  std::uint64_t want = ipow(std::uint64_t(d.q), unsigned(d.scope.size()));
  if (d.probs.size() != want) throw invalid_input_error("joint: table length != q^|scope|");
  CompensatedSum s;
  for (double p : d.probs) {
    if (!(p >= -1e-12) || !std::isfinite(p))
      throw invalid_input_error("joint: negative or non-finite probability");
    s.add(p);
  }
  if (std::abs(s.value() - 1.0) > tol)
    throw invalid_input_error("joint: probabilities do not sum to 1");
}

// Product of per-vertex marginals over all n vertices.
struct ProductDistribution {
  int q = 2;
  std::vector<std::vector<double>> marginals;
};

inline void validate_product(const ProductDistribution& d, double tol = 1e-9) {
  if (d.q < 2) throw invalid_input_error("product: q must be >= 2");
  for (const auto& m : d.marginals) {
    if (m.size() != size_t(d.q)) throw invalid_input_error("product: marginal size != q");
    double s = 0.0;
    for (double p : m) {
      if (!(p >= -1e-12) || !std::isfinite(p))
        throw invalid_input_error("product: negative or non-finite probability");
      s += p;
    }
    if (std::abs(s - 1.0) > tol)
      throw invalid_input_error("product: marginal does not sum to 1");
  }
}

inline void index_to_assignment(std::uint64_t idx, int n, int q, Assignment& out) {
  out.resize(size_t(n));
  for (int t = n - 1; t >= 0; --t) {
    out[size_t(t)] = std::uint8_t(idx % std::uint64_t(q));
    idx /= std::uint64_t(q);
  }
}

inline std::uint64_t assignment_to_index(const Assignment& x, int q) {
  std::uint64_t idx = 0;
  for (std::uint8_t a : x) idx = idx * std::uint64_t(q) + a;
  return idx;
}

namespace detail {

// Visits all spin configurations by Gray code; energies updated in O(n) per
// step. visit(canonical_index, energy). Canonical index has vertex 0 as the
// most significant bit and bit value = letter.
template <typename Visit>
void enumerate_ising_energies(const IsingModel& m, Visit visit) {
  int n = m.n;
  std::uint64_t total = checked_state_count(2, n);
  std::vector<double> s(size_t(n), 1.0);  // all letters 0 -> spin +1
  // local[i] = sum_j J_ij s_j + h_i, kept in sync with s.
  std::vector<double> local(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    CompensatedSum acc;
    for (int j = 0; j < n; ++j) acc.add(m.J[size_t(i)][size_t(j)] * s[size_t(j)]);
    acc.add(m.h[size_t(i)]);
    local[size_t(i)] = acc.value();
  }
  double e = energy(m, s);
  std::uint64_t gray = 0;
  visit(std::uint64_t(0), e);
  for (std::uint64_t i = 1; i < total; ++i) {
    std::uint64_t g = i ^ (i >> 1);
    std::uint64_t diff = g ^ gray;
    int bit = 0;
    while (((diff >> bit) & 1) == 0) ++bit;
    int v = n - 1 - bit;  // canonical: vertex v occupies bit (n-1-v)
    double old = s[size_t(v)];
    e += -2.0 * old * local[size_t(v)];
    s[size_t(v)] = -old;
    double delta = -2.0 * old;
    for (int j = 0; j < n; ++j) local[size_t(j)] += m.J[size_t(j)][size_t(v)] * delta;
    gray = g;
    visit(g, e);
  }
}

}  // namespace detail

// Exact log partition function by full enumeration (max-shifted log-sum-exp,
// compensated summation). Refuses when q^n exceeds the enumeration cap.
inline double exact_free_energy(const Mrf& m) {
  validate_mrf(m);
  std::uint64_t total = checked_state_count(m.q, m.n);
  double mx = -std::numeric_limits<double>::infinity();
  Assignment x;
  for (std::uint64_t i = 0; i < total; ++i) {
    index_to_assignment(i, m.n, m.q, x);
    mx = std::max(mx, energy(m, x));
  }
  CompensatedSum acc;
  for (std::uint64_t i = 0; i < total; ++i) {
    index_to_assignment(i, m.n, m.q, x);
    acc.add(std::exp(energy(m, x) - mx));
  }
  return mx + std::log(acc.value());
}

inline double exact_free_energy(const IsingModel& m) {
  validate_ising(m);
  double mx = -std::numeric_limits<double>::infinity();
  detail::enumerate_ising_energies(m, [&](std::uint64_t, double e) { mx = std::max(mx, e); });
  CompensatedSum acc;
  detail::enumerate_ising_energies(m, [&](std::uint64_t, double e) { acc.add(std::exp(e - mx)); });
  return mx + std::log(acc.value());
}

// Maximum energy and (first-found in enumeration order) maximizer.
struct EnergyArgmax {
  double value = 0.0;
  Assignment argmax;
};

inline EnergyArgmax max_energy(const Mrf& m) {
  validate_mrf(m);
  std::uint64_t total = checked_state_count(m.q, m.n);
  EnergyArgmax best;
  best.value = -std::numeric_limits<double>::infinity();
  Assignment x;
  for (std::uint64_t i = 0; i < total; ++i) {
    index_to_assignment(i, m.n, m.q, x);
    double e = energy(m, x);
    if (e > best.value) {
      best.value = e;
      best.argmax = x;
    }
  }
  return best;
}

inline EnergyArgmax max_energy(const IsingModel& m) {
  validate_ising(m);
  EnergyArgmax best;
  best.value = -std::numeric_limits<double>::infinity();
  std::uint64_t best_idx = 0;
  detail::enumerate_ising_energies(m, [&](std::uint64_t idx, double e) {
    if (e > best.value) {
      best.value = e;
      best_idx = idx;
    }
  });
  index_to_assignment(best_idx, m.n, 2, best.argmax);
  return best;
}

// Exact Gibbs measure P(x) = exp(energy(x) - F), scope {0..n-1}.
inline JointDistribution exact_gibbs(const Mrf& m) {
  validate_mrf(m);
  std::uint64_t total = checked_state_count(m.q, m.n);
  JointDistribution d;
  d.q = m.q;
  d.scope.resize(size_t(m.n));
  for (int i = 0; i < m.n; ++i) d.scope[size_t(i)] = i;
  d.probs.resize(total);
  Assignment x;
  double mx = -std::numeric_limits<double>::infinity();
  for (std::uint64_t i = 0; i < total; ++i) {
    index_to_assignment(i, m.n, m.q, x);
    d.probs[i] = energy(m, x);
    mx = std::max(mx, d.probs[i]);
  }
  CompensatedSum acc;
  for (double e : d.probs) acc.add(std::exp(e - mx));
  double logz = mx + std::log(acc.value());
  for (double& e : d.probs) e = std::exp(e - logz);
  return d;
}

inline JointDistribution exact_gibbs(const IsingModel& m) {
  validate_ising(m);
  std::uint64_t total = checked_state_count(2, m.n);
  JointDistribution d;
  d.q = 2;
  d.scope.resize(size_t(m.n));
  for (int i = 0; i < m.n; ++i) d.scope[size_t(i)] = i;
  d.probs.resize(total);
  double mx = -std::numeric_limits<double>::infinity();
  detail::enumerate_ising_energies(m, [&](std::uint64_t idx, double e) {
    d.probs[idx] = e;
    mx = std::max(mx, e);
  });
  CompensatedSum acc;
  for (double e : d.probs) acc.add(std::exp(e - mx));
  double logz = mx + std::log(acc.value());
  for (double& e : d.probs) e = std::exp(e - logz);
  return d;
}

// Marginal of d on `sub` (subset of d.scope, sorted).
inline JointDistribution marginal(const JointDistribution& d, const std::vector<int>& sub) {
  int ns = int(d.scope.size());
  std::vector<int> pos;
  for (int v : sub) {
    auto it = std::lower_bound(d.scope.begin(), d.scope.end(), v);
    if (it == d.scope.end() || *it != v)
      throw invalid_input_error("marginal: vertex not in scope");
    pos.push_back(int(it - d.scope.begin()));
  }
  for (size_t i = 1; i < pos.size(); ++i)
    if (pos[i - 1] >= pos[i]) throw invalid_input_error("marginal: subset must be sorted");
  JointDistribution out;
  out.scope = sub;
  out.q = d.q;
  out.probs.assign(ipow(std::uint64_t(d.q), unsigned(sub.size())), 0.0);
  Assignment x;
  for (std::uint64_t i = 0; i < d.probs.size(); ++i) {
    index_to_assignment(i, ns, d.q, x);
    std::uint64_t idx = 0;
    for (int p : pos) idx = idx * std::uint64_t(d.q) + x[size_t(p)];
    out.probs[idx] += d.probs[i];
  }
  return out;
}

inline double expected_energy(const Mrf& m, const JointDistribution& d) {
  if (int(d.scope.size()) != m.n || d.q != m.q)
    throw invalid_input_error("expected_energy: joint does not match model");
  CompensatedSum acc;
  Assignment x;
  for (std::uint64_t i = 0; i < d.probs.size(); ++i) {
    if (d.probs[i] == 0.0) continue;
    index_to_assignment(i, m.n, m.q, x);
    acc.add(d.probs[i] * energy(m, x));
  }
  return acc.value();
}

inline double expected_energy(const IsingModel& m, const JointDistribution& d) {
  if (int(d.scope.size()) != m.n || d.q != 2)
    throw invalid_input_error("expected_energy: joint does not match model");
  CompensatedSum acc;
  detail::enumerate_ising_energies(m, [&](std::uint64_t idx, double e) {
    if (d.probs[idx] != 0.0) acc.add(d.probs[idx] * e);
  });
  return acc.value();
}

// Spin means and pair moments E[s_i s_j] of a full-scope binary joint.
struct SpinMoments {
  std::vector<double> mean;                  // E[s_i]
  std::vector<std::vector<double>> second;   // E[s_i s_j], diagonal 1
};

inline SpinMoments spin_moments(const JointDistribution& d) {
  if (d.q != 2) throw invalid_input_error("spin_moments: needs q == 2");
  int n = int(d.scope.size());
  SpinMoments mo;
  mo.mean.assign(size_t(n), 0.0);
  mo.second.assign(size_t(n), std::vector<double>(size_t(n), 0.0));
  std::vector<double> s(static_cast<std::size_t>(n));
  Assignment x;
  for (std::uint64_t i = 0; i < d.probs.size(); ++i) {
    double p = d.probs[i];
    if (p == 0.0) continue;
    index_to_assignment(i, n, 2, x);
    for (int t = 0; t < n; ++t) s[size_t(t)] = spin_of_letter(x[size_t(t)]);
    for (int a = 0; a < n; ++a) {
      mo.mean[size_t(a)] += p * s[size_t(a)];
      for (int b = a + 1; b < n; ++b) mo.second[size_t(a)][size_t(b)] += p * s[size_t(a)] * s[size_t(b)];
    }
  }
  for (int a = 0; a < n; ++a) {
    mo.second[size_t(a)][size_t(a)] = 1.0;
    for (int b = a + 1; b < n; ++b) mo.second[size_t(b)][size_t(a)] = mo.second[size_t(a)][size_t(b)];
  }
  return mo;
}

// Marginal tables for every subset of a full-scope joint, by summing one
// vertex at a time from larger subsets (total work O(3^n) for q=2).
// Masks use bit v for vertex v. Intended for n <= ~14.
class SubsetMarginals {
 public:
  explicit SubsetMarginals(const JointDistribution& d, int max_table_size = -1)
      : n_(int(d.scope.size())), q_(d.q) {
    for (int i = 0; i < n_; ++i)
      if (d.scope[size_t(i)] != i)
        throw invalid_input_error("SubsetMarginals: scope must be {0..n-1}");
    if (n_ > 20) throw size_limit_error("SubsetMarginals: n too large");
    keep_ = (max_table_size < 0) ? n_ : max_table_size;
    std::uint32_t full = (n_ >= 32) ? 0 : ((1u << n_) - 1);
    tables_.resize(std::size_t(full) + 1);
    entropy_.assign(std::size_t(full) + 1, 0.0);
    tables_[full] = d.probs;
    entropy_[full] = table_entropy(d.probs);
    // Shrink by popcount, computing each subset from a parent one larger.
    std::vector<std::vector<std::uint32_t>> by_size(size_t(n_) + 1);
    for (std::uint32_t m = 0; m <= full; ++m) by_size[size_t(popcount(m))].push_back(m);
    for (int s = n_ - 1; s >= 0; --s) {
      for (std::uint32_t m : by_size[size_t(s)]) {
        std::uint32_t missing = full & ~m;
        int v = lowest_bit(missing);
        std::uint32_t parent = m | (1u << v);
        tables_[m] = sum_out(tables_[parent], parent, v);
        entropy_[m] = table_entropy(tables_[m]);
      }
      // Free tables above the retention size once their children are done.
      if (s + 1 > keep_) {
        for (std::uint32_t m : by_size[size_t(s + 1)]) std::vector<double>().swap(tables_[m]);
      }
    }
  }

  int n() const { return n_; }
  int q() const { return q_; }

  // Entropy of the marginal on `mask` (natural log).
  double entropy(std::uint32_t mask) const { return entropy_[mask]; }

  // Marginal table on `mask`, row-major with lowest vertex most significant.
  // Only valid when popcount(mask) <= retained size.
  const std::vector<double>& table(std::uint32_t mask) const {
    if (tables_[mask].empty() && mask != 0)
      throw invalid_input_error("SubsetMarginals: table not retained");
    return tables_[mask];
  }

  static int popcount(std::uint32_t m) {
    int c = 0;
    while (m) {
      m &= m - 1;
      ++c;
    }
    return c;
  }

 private:
  static int lowest_bit(std::uint32_t m) {
    int b = 0;
    while (((m >> b) & 1) == 0) ++b;
    return b;
  }

  static double table_entropy(const std::vector<double>& t) {
    CompensatedSum acc;
    for (double p : t)
      if (p > 0.0) acc.add(-p * std::log(p));
    return acc.value();
  }

  // Sums vertex v out of the table over `mask` (v in mask).
  std::vector<double> sum_out(const std::vector<double>& t, std::uint32_t mask, int v) const {
    int sz = popcount(mask);
    // Position of v among sorted vertices of mask; stride of the last vertex is 1.
    int pos = 0;
    for (int u = 0; u < v; ++u)
      if ((mask >> u) & 1) ++pos;
    std::uint64_t stride = ipow(std::uint64_t(q_), unsigned(sz - 1 - pos));
    std::uint64_t out_size = t.size() / std::uint64_t(q_);
    std::vector<double> out(out_size, 0.0);
    std::uint64_t block = stride * std::uint64_t(q_);
    for (std::uint64_t base = 0, obase = 0; base < t.size(); base += block, obase += stride)
      for (std::uint64_t lo = 0; lo < stride; ++lo) {
        double s = 0.0;
        for (int a = 0; a < q_; ++a) s += t[base + std::uint64_t(a) * stride + lo];
        out[obase + lo] = s;
      }
    return out;
  }

  int n_;
  int q_;
  int keep_;
  std::vector<std::vector<double>> tables_;
  std::vector<double> entropy_;
};

}  // namespace gibbsrelax
