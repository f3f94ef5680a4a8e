#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "gibbsrelax/common.hpp"
#include "gibbsrelax/distribution.hpp"

namespace gibbsrelax {

// Shannon entropy in nats; 0 log 0 = 0.
inline double entropy(const std::vector<double>& probs) {
  CompensatedSum acc;
  for (double p : probs) {
    if (p < -1e-12 || !std::isfinite(p))
      throw invalid_input_error("entropy: negative or non-finite probability");
    if (p > 0.0) acc.add(-p * std::log(p));
  }
  return acc.value();
}

inline double entropy(const JointDistribution& d) { return entropy(d.probs); }

inline double binary_entropy(double p) {
  if (!(p >= 0.0 && p <= 1.0)) throw invalid_input_error("binary_entropy: p outside [0,1]");
  double h = 0.0;
  if (p > 0.0) h -= p * std::log(p);
  if (p < 1.0) h -= (1.0 - p) * std::log(1.0 - p);
  return h;
}

// KL(p || q); +inf when p puts mass where q has none.
inline double kl(const std::vector<double>& p, const std::vector<double>& q) {
  if (p.size() != q.size()) throw invalid_input_error("kl: length mismatch");
  CompensatedSum acc;
  for (size_t i = 0; i < p.size(); ++i) {
    if (p[i] < -1e-12 || q[i] < -1e-12) throw invalid_input_error("kl: negative probability");
    if (p[i] <= 0.0) continue;
    if (q[i] <= 0.0) return std::numeric_limits<double>::infinity();
    acc.add(p[i] * std::log(p[i] / q[i]));
  }
  return acc.value();
}

inline double kl(const JointDistribution& p, const JointDistribution& q) {
  if (p.scope != q.scope || p.q != q.q) throw invalid_input_error("kl: scope mismatch");
  return kl(p.probs, q.probs);
}

// Total variation distance (1/2) sum |p - q|.
inline double tv(const std::vector<double>& p, const std::vector<double>& q) {
  if (p.size() != q.size()) throw invalid_input_error("tv: length mismatch");
  CompensatedSum acc;
  for (size_t i = 0; i < p.size(); ++i) acc.add(std::abs(p[i] - q[i]));
  return 0.5 * acc.value();
}

inline double tv(const JointDistribution& p, const JointDistribution& q) {
  if (p.scope != q.scope || p.q != q.q) throw invalid_input_error("tv: scope mismatch");
  return tv(p.probs, q.probs);
}

// Spin covariance Cov(s_i, s_j) of two binary variables in d's scope.
inline double covariance(const JointDistribution& d, int i, int j) {
  if (d.q != 2) throw invalid_input_error("covariance: needs q == 2");
  JointDistribution mi = marginal(d, {std::min(i, j), std::max(i, j)});
  double e11 = mi.probs[0] - mi.probs[1] - mi.probs[2] + mi.probs[3];
  double ei = mi.probs[0] + mi.probs[1] - mi.probs[2] - mi.probs[3];
  double ej = mi.probs[0] - mi.probs[1] + mi.probs[2] - mi.probs[3];
  return e11 - ei * ej;
}

inline std::vector<int> sorted_union(const std::vector<int>& a, const std::vector<int>& b) {
  std::vector<int> u;
  std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(u));
  return u;
}

// H(X_A | X_S) = H(X_{A u S}) - H(X_S); overlap with S contributes zero.
inline double conditional_entropy(const JointDistribution& d, const std::vector<int>& A,
                                  const std::vector<int>& S) {
  double hs = S.empty() ? 0.0 : entropy(marginal(d, S));
  return entropy(marginal(d, sorted_union(A, S))) - hs;
}

// Multivariate mutual information of X_R given X_S by inclusion-exclusion:
// I = sum_{m>=1} (-1)^{m-1} sum_{|T|=m, T subset R} H(X_T | X_S).
inline double multivariate_mi(const JointDistribution& d, const std::vector<int>& R,
                              const std::vector<int>& S = {}) {
  if (R.empty()) throw invalid_input_error("multivariate_mi: empty variable set");
  int r = int(R.size());
  CompensatedSum acc;
  for (int m = 1; m <= r; ++m) {
    double sign = (m % 2 == 1) ? 1.0 : -1.0;
    std::vector<int> c = first_combination(m);
    do {
      std::vector<int> T(static_cast<std::size_t>(m));
      for (int t = 0; t < m; ++t) T[size_t(t)] = R[size_t(c[size_t(t)])];
      acc.add(sign * conditional_entropy(d, T, S));
    } while (next_combination(c, r));
  }
  return acc.value();
}

// Total correlation C(X_F | X_S) = sum_{j in F} H(X_j|X_S) - H(X_F|X_S).
inline double total_correlation(const JointDistribution& d, const std::vector<int>& F,
                                const std::vector<int>& S = {}) {
  if (F.empty()) return 0.0;
  CompensatedSum acc;
  for (int j : F) acc.add(conditional_entropy(d, {j}, S));
  acc.add(-conditional_entropy(d, F, S));
  return acc.value();
}

// Both sides of the inclusion-exclusion identity
//   E_{F ~ C(V,k)}[C(X_F|X_S)]
//     = sum_{r=2}^{k} C(k,r) (-1)^r E_{R ~ C(V,r)}[I(X_R|X_S)],
// computed through independent combinatorial routes.
struct IdentityCheck {
  double lhs = 0.0;
  double rhs = 0.0;
};

inline IdentityCheck corr_info_identity_check(const JointDistribution& d, int k,
                                              const std::vector<int>& S = {}) {
  int n = int(d.scope.size());
  if (k < 2 || k > n) throw invalid_input_error("corr_info_identity_check: need 2 <= k <= |V|");
  IdentityCheck out;
  {
    CompensatedSum acc;
    std::vector<int> c = first_combination(k);
    do {
      std::vector<int> F(static_cast<std::size_t>(k));
      for (int t = 0; t < k; ++t) F[size_t(t)] = d.scope[size_t(c[size_t(t)])];
      acc.add(total_correlation(d, F, S));
    } while (next_combination(c, n));
    out.lhs = acc.value() / binom(n, k);
  }
  {
    CompensatedSum acc;
    for (int r = 2; r <= k; ++r) {
      CompensatedSum inner;
      std::vector<int> c = first_combination(r);
      do {
        std::vector<int> R(static_cast<std::size_t>(r));
        for (int t = 0; t < r; ++t) R[size_t(t)] = d.scope[size_t(c[size_t(t)])];
        inner.add(multivariate_mi(d, R, S));
      } while (next_combination(c, n));
      double sign = (r % 2 == 0) ? 1.0 : -1.0;
      acc.add(sign * binom(k, r) * inner.value() / binom(n, r));
    }
    out.rhs = acc.value();
  }
  return out;
}

}  // namespace gibbsrelax
