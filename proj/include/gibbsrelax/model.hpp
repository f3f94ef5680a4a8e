#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <set>
#include <utility>
#include <vector>

#include "gibbsrelax/common.hpp"
#include "gibbsrelax/rng.hpp"

namespace gibbsrelax {

// Assignment over the alphabet {0,...,q-1}, one letter per vertex.
using Assignment = std::vector<std::uint8_t>;

// Letter 0 maps to spin +1, letter 1 to spin -1.
inline double spin_of_letter(std::uint8_t a) { return a == 0 ? 1.0 : -1.0; }
inline std::uint8_t letter_of_spin(double s) { return s > 0 ? 0 : 1; }

// Order-k potential on sorted vertices; table is row-major in vertex order
// (first vertex most significant), length q^k.
struct MrfEdge {
  std::vector<int> vertices;
  std::vector<double> table;
};

// Order-k Markov random field on n vertices over alphabet {0..q-1}.
// fields[i][a] is the unary potential of letter a at vertex i.
struct Mrf {
  int n = 0;
  int q = 2;
  int k = 2;
  std::vector<MrfEdge> edges;
  std::vector<std::vector<double>> fields;
};

// Ising model: symmetric J with zero diagonal, energy sum_{i<j} J_ij x_i x_j
// + sum_i h_i x_i over spins x in {-1,+1}^n.
struct IsingModel {
  int n = 0;
  std::vector<std::vector<double>> J;
  std::vector<double> h;
};

inline void validate_mrf(const Mrf& m) {
  if (m.n < 1) throw invalid_input_error("mrf: n must be >= 1");
  if (m.q < 2) throw invalid_input_error("mrf: q must be >= 2");
  if (m.k < 2 || m.k > m.n) throw invalid_input_error("mrf: need 2 <= k <= n");
  std::uint64_t tbl = ipow(std::uint64_t(m.q), unsigned(m.k));
  std::set<std::vector<int>> seen;
  for (const MrfEdge& e : m.edges) {
    if (int(e.vertices.size()) != m.k)
      throw invalid_input_error("mrf: edge arity differs from k");
    for (int v : e.vertices)
      if (v < 0 || v >= m.n) throw invalid_input_error("mrf: edge vertex out of range");
    for (size_t i = 1; i < e.vertices.size(); ++i)
      if (e.vertices[i - 1] >= e.vertices[i])
        throw invalid_input_error("mrf: edge vertices must be strictly increasing");
    if (e.table.size() != tbl) throw invalid_input_error("mrf: edge table length != q^k");
    for (double x : e.table)
      if (!std::isfinite(x)) throw invalid_input_error("mrf: non-finite edge potential");
    if (!seen.insert(e.vertices).second)
      throw invalid_input_error("mrf: duplicate edge vertex set");
  }
  if (m.fields.size() != size_t(m.n)) throw invalid_input_error("mrf: fields size != n");
  for (const auto& f : m.fields) {
    if (f.size() != size_t(m.q)) throw invalid_input_error("mrf: field row size != q");
    for (double x : f)
      if (!std::isfinite(x)) throw invalid_input_error("mrf: non-finite field");
  }
}

inline void validate_ising(const IsingModel& m) {
  if (m.n < 1) throw invalid_input_error("ising: n must be >= 1");
  if (m.J.size() != size_t(m.n)) throw invalid_input_error("ising: J size != n");
  for (const auto& row : m.J)
    if (row.size() != size_t(m.n)) throw invalid_input_error("ising: J row size != n");
  if (m.h.size() != size_t(m.n)) throw invalid_input_error("ising: h size != n");
  for (int i = 0; i < m.n; ++i) {
    if (m.J[i][i] != 0.0) throw invalid_input_error("ising: J diagonal must be zero");
    if (!std::isfinite(m.h[i])) throw invalid_input_error("ising: non-finite field");
    for (int j = 0; j < m.n; ++j) {
      if (!std::isfinite(m.J[i][j])) throw invalid_input_error("ising: non-finite coupling");
      if (std::abs(m.J[i][j] - m.J[j][i]) > 1e-12 * std::max(1.0, std::abs(m.J[i][j])))
        throw invalid_input_error("ising: J must be symmetric");
    }
  }
}

// Index of x_E in a row-major edge table (first vertex most significant).
inline std::uint64_t edge_table_index(const MrfEdge& e, const Assignment& x, int q) {
  std::uint64_t idx = 0;
  for (int v : e.vertices) idx = idx * std::uint64_t(q) + x[size_t(v)];
  return idx;
}

inline double energy(const Mrf& m, const Assignment& x) {
  if (x.size() != size_t(m.n)) throw invalid_input_error("energy: assignment size != n");
  for (std::uint8_t a : x)
    if (a >= m.q) throw invalid_input_error("energy: letter out of alphabet");
  CompensatedSum acc;
  for (const MrfEdge& e : m.edges) acc.add(e.table[edge_table_index(e, x, m.q)]);
  for (int i = 0; i < m.n; ++i) acc.add(m.fields[size_t(i)][x[size_t(i)]]);
  return acc.value();
}

inline double energy(const IsingModel& m, const std::vector<double>& spins) {
  if (spins.size() != size_t(m.n)) throw invalid_input_error("energy: spin vector size != n");
  CompensatedSum acc;
  for (int i = 0; i < m.n; ++i) {
    for (int j = i + 1; j < m.n; ++j) acc.add(m.J[i][j] * spins[i] * spins[j]);
    acc.add(m.h[i] * spins[i]);
  }
  return acc.value();
}

inline double energy(const IsingModel& m, const Assignment& x) {
  std::vector<double> s(x.size());
  for (size_t i = 0; i < x.size(); ++i) s[i] = spin_of_letter(x[i]);
  return energy(m, s);
}

// Each pair {i<j} with J_ij != 0 becomes one order-2 edge J_ij x_i x_j.
inline Mrf ising_to_mrf(const IsingModel& m) {
  validate_ising(m);
  Mrf out;
  out.n = m.n;
  out.q = 2;
  out.k = 2;
  out.fields.assign(size_t(m.n), std::vector<double>(2, 0.0));
  for (int i = 0; i < m.n; ++i) {
    out.fields[size_t(i)][0] = m.h[size_t(i)];
    out.fields[size_t(i)][1] = -m.h[size_t(i)];
  }
  for (int i = 0; i < m.n; ++i)
    for (int j = i + 1; j < m.n; ++j) {
      if (m.J[i][j] == 0.0) continue;
      MrfEdge e;
      e.vertices = {i, j};
      double w = m.J[i][j];
      // Cells ordered (x_i, x_j) = (0,0),(0,1),(1,0),(1,1); spins ++,+-,-+,--.
      e.table = {w, -w, -w, w};
      out.edges.push_back(std::move(e));
    }
  return out;
}

// Exact decomposition of a q=2, k=2 MRF as Ising couplings + fields +
// additive constant: f(s_i,s_j) = c + a s_i + b s_j + w s_i s_j.
struct IsingWithOffset {
  IsingModel model;
  double offset = 0.0;
};

inline IsingWithOffset mrf_to_ising(const Mrf& m) {
  validate_mrf(m);
  if (m.q != 2 || m.k != 2)
    throw invalid_input_error("mrf_to_ising: needs q == 2 and k == 2");
  IsingWithOffset out;
  out.model.n = m.n;
  out.model.J.assign(size_t(m.n), std::vector<double>(size_t(m.n), 0.0));
  out.model.h.assign(size_t(m.n), 0.0);
  CompensatedSum offset;
  for (const MrfEdge& e : m.edges) {
    int i = e.vertices[0], j = e.vertices[1];
    double fpp = e.table[0], fpm = e.table[1], fmp = e.table[2], fmm = e.table[3];
    double w = 0.25 * (fpp - fpm - fmp + fmm);
    double a = 0.25 * (fpp + fpm - fmp - fmm);
    double b = 0.25 * (fpp - fpm + fmp - fmm);
    double c = 0.25 * (fpp + fpm + fmp + fmm);
    out.model.J[size_t(i)][size_t(j)] += w;
    out.model.J[size_t(j)][size_t(i)] += w;
    out.model.h[size_t(i)] += a;
    out.model.h[size_t(j)] += b;
    offset.add(c);
  }
  for (int i = 0; i < m.n; ++i) {
    double f0 = m.fields[size_t(i)][0], f1 = m.fields[size_t(i)][1];
    out.model.h[size_t(i)] += 0.5 * (f0 - f1);
    offset.add(0.5 * (f0 + f1));
  }
  out.offset = offset.value();
  return out;
}

// Full-matrix convention: sqrt(sum_{i,j} J_ij^2), both triangles counted.
inline double frobenius_interaction_norm(const IsingModel& m) {
  CompensatedSum acc;
  for (const auto& row : m.J)
    for (double v : row) acc.add(v * v);
  return std::sqrt(acc.value());
}

// Hyperedge convention: sqrt(sum_E ||f_E||_inf^2).
inline double frobenius_interaction_norm(const Mrf& m) {
  CompensatedSum acc;
  for (const MrfEdge& e : m.edges) {
    double mx = 0.0;
    for (double v : e.table) mx = std::max(mx, std::abs(v));
    acc.add(mx * mx);
  }
  return std::sqrt(acc.value());
}

// Schatten-4 norm (sum_i sigma_i^4)^{1/4} = ||J^T J||_F^{1/2}.
inline double schatten4(const std::vector<std::vector<double>>& J) {
  size_t n = J.size();
  for (const auto& row : J)
    if (row.size() != n) throw invalid_input_error("schatten4: matrix not square");
  double fro2 = 0.0;
  for (size_t i = 0; i < n; ++i)
    for (size_t j = 0; j < n; ++j) {
      CompensatedSum dot;
      for (size_t t = 0; t < n; ++t) dot.add(J[t][i] * J[t][j]);
      double v = dot.value();
      fro2 += v * v;
    }
  return std::sqrt(std::sqrt(fro2));
}

inline double schatten4(const IsingModel& m) { return schatten4(m.J); }

// SK couplings J_ij = (beta/sqrt(n)) g_ij, g symmetric i.i.d. noise.
enum class NoiseKind { gaussian, rademacher };

inline IsingModel sk_sample(int n, double beta, NoiseKind noise, std::uint64_t seed) {
  if (n < 1) throw invalid_input_error("sk_sample: n must be >= 1");
  IsingModel m;
  m.n = n;
  m.J.assign(size_t(n), std::vector<double>(size_t(n), 0.0));
  m.h.assign(size_t(n), 0.0);
  Rng rng(seed);
  double scale = beta / std::sqrt(double(n));
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      double g = (noise == NoiseKind::gaussian) ? rng.normal() : rng.rademacher();
      m.J[size_t(i)][size_t(j)] = scale * g;
      m.J[size_t(j)][size_t(i)] = scale * g;
    }
  return m;
}

inline IsingModel curie_weiss(int n, double beta, double field = 0.0) {
  if (n < 1) throw invalid_input_error("curie_weiss: n must be >= 1");
  IsingModel m;
  m.n = n;
  m.J.assign(size_t(n), std::vector<double>(size_t(n), beta / double(n)));
  for (int i = 0; i < n; ++i) m.J[size_t(i)][size_t(i)] = 0.0;
  m.h.assign(size_t(n), field);
  return m;
}

// Antiferromagnetic couplings -beta*n/m on each graph edge.
inline IsingModel ising_from_maxcut(int n, const std::vector<std::pair<int, int>>& graph_edges,
                                    double beta) {
  if (n < 1) throw invalid_input_error("ising_from_maxcut: n must be >= 1");
  if (graph_edges.empty()) throw invalid_input_error("ising_from_maxcut: empty edge list");
  IsingModel m;
  m.n = n;
  m.J.assign(size_t(n), std::vector<double>(size_t(n), 0.0));
  m.h.assign(size_t(n), 0.0);
  double w = -beta * double(n) / double(graph_edges.size());
  for (auto [i, j] : graph_edges) {
    if (i == j || i < 0 || j < 0 || i >= n || j >= n)
      throw invalid_input_error("ising_from_maxcut: bad edge");
    m.J[size_t(i)][size_t(j)] += w;
    m.J[size_t(j)][size_t(i)] += w;
  }
  return m;
}

// Lifts an order-k MRF to order ell: g_F = (1/C(n-k, ell-k)) sum_{E subset F} f_E.
// The total potential is unchanged pointwise, so the distribution is unchanged.
inline Mrf lift_mrf(const Mrf& m, int ell) {
  validate_mrf(m);
  if (ell < m.k || ell > m.n) throw invalid_input_error("lift_mrf: need k <= ell <= n");
  Mrf out;
  out.n = m.n;
  out.q = m.q;
  out.k = ell;
  out.fields = m.fields;
  if (ell == m.k) {
    out.edges = m.edges;
    return out;
  }
  std::uint64_t cells = ipow(std::uint64_t(m.q), unsigned(ell));
  if (binom(m.n, ell) * double(cells) > 5e7)
    throw size_limit_error("lift_mrf: lifted model too large");
  double denom = binom(m.n - m.k, ell - m.k);

  // Edge lookup by sorted vertex mask.
  std::vector<std::pair<std::uint64_t, const MrfEdge*>> by_mask;
  for (const MrfEdge& e : m.edges) by_mask.emplace_back(mask_of(e.vertices), &e);
  std::sort(by_mask.begin(), by_mask.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  auto find_edge = [&](std::uint64_t mask) -> const MrfEdge* {
    auto it = std::lower_bound(by_mask.begin(), by_mask.end(), mask,
                               [](const auto& a, std::uint64_t v) { return a.first < v; });
    if (it != by_mask.end() && it->first == mask) return it->second;
    return nullptr;
  };

  std::vector<int> F = first_combination(ell);
  do {
    MrfEdge g;
    g.vertices = F;
    g.table.assign(cells, 0.0);
    bool any = false;
    std::vector<int> sub = first_combination(m.k);  // positions within F
    do {
      std::uint64_t mask = 0;
      for (int p : sub) mask |= std::uint64_t(1) << F[size_t(p)];
      const MrfEdge* e = find_edge(mask);
      if (e == nullptr) continue;
      any = true;
      Assignment xF(static_cast<std::size_t>(ell));
      for (std::uint64_t c = 0; c < cells; ++c) {
        std::uint64_t rem = c;
        for (int t = ell - 1; t >= 0; --t) {
          xF[size_t(t)] = std::uint8_t(rem % std::uint64_t(m.q));
          rem /= std::uint64_t(m.q);
        }
        std::uint64_t sub_idx = 0;
        for (int p : sub) sub_idx = sub_idx * std::uint64_t(m.q) + xF[size_t(p)];
        g.table[c] += e->table[sub_idx];
      }
    } while (next_combination(sub, ell));
    if (any) {
      for (double& v : g.table) v /= denom;
      out.edges.push_back(std::move(g));
    }
  } while (next_combination(F, m.n));
  return out;
}

}  // namespace gibbsrelax
