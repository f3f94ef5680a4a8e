#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "gibbsrelax/common.hpp"
#include "gibbsrelax/distribution.hpp"
#include "gibbsrelax/info.hpp"
#include "gibbsrelax/model.hpp"
#include "gibbsrelax/rng.hpp"

namespace gibbsrelax {

// Mean-field objective sum_{i<j} J_ij x_i x_j + sum_i h_i x_i
// + sum_i H((1+x_i)/2) over x in [-1,1]^n; every value lower-bounds log Z.
inline double mf_objective(const IsingModel& m, const std::vector<double>& x) {
  if (x.size() != size_t(m.n)) throw invalid_input_error("mf_objective: size mismatch");
  CompensatedSum acc;
  for (int i = 0; i < m.n; ++i) {
    double xi = x[size_t(i)];
    if (std::abs(xi) > 1.0 + 1e-12) throw invalid_input_error("mf_objective: x outside [-1,1]");
    xi = std::clamp(xi, -1.0, 1.0);
    for (int j = i + 1; j < m.n; ++j) acc.add(m.J[size_t(i)][size_t(j)] * xi * x[size_t(j)]);
    acc.add(m.h[size_t(i)] * xi);
    acc.add(binary_entropy(0.5 * (1.0 + xi)));
  }
  return acc.value();
}

// E_nu[energy] + sum_i H(nu_i) for a product distribution on a k-MRF.
inline double mf_objective(const Mrf& m, const ProductDistribution& nu) {
  if (int(nu.marginals.size()) != m.n || nu.q != m.q)
    throw invalid_input_error("mf_objective: product does not match model");
  CompensatedSum acc;
  Assignment xE(static_cast<std::size_t>(m.k));
  std::uint64_t cells = ipow(std::uint64_t(m.q), unsigned(m.k));
  for (const MrfEdge& e : m.edges) {
    for (std::uint64_t c = 0; c < cells; ++c) {
      std::uint64_t rem = c;
      for (int t = m.k - 1; t >= 0; --t) {
        xE[size_t(t)] = std::uint8_t(rem % std::uint64_t(m.q));
        rem /= std::uint64_t(m.q);
      }
      double w = e.table[c];
      if (w == 0.0) continue;
      double p = 1.0;
      for (int t = 0; t < m.k; ++t) p *= nu.marginals[size_t(e.vertices[size_t(t)])][xE[size_t(t)]];
      acc.add(w * p);
    }
  }
  for (int i = 0; i < m.n; ++i) {
    for (int a = 0; a < m.q; ++a)
      acc.add(m.fields[size_t(i)][size_t(a)] * nu.marginals[size_t(i)][size_t(a)]);
    acc.add(entropy(nu.marginals[size_t(i)]));
  }
  return acc.value();
}

struct MfIterateResult {
  std::vector<double> x;
  int iterations = 0;
  bool converged = false;
};

// Damped fixpoint iteration x <- (1-d) x + d tanh(Jx + h).
inline MfIterateResult mf_iterate(const IsingModel& m, std::vector<double> x,
                                  double damping = 0.5, double tol = 1e-10,
                                  int max_iters = 10000) {
  if (x.size() != size_t(m.n)) throw invalid_input_error("mf_iterate: size mismatch");
  if (!(damping > 0.0 && damping <= 1.0)) throw invalid_input_error("mf_iterate: damping in (0,1]");
  MfIterateResult out;
  std::vector<double> field(size_t(m.n));
  for (int it = 0; it < max_iters; ++it) {
    double delta = 0.0;
    for (int i = 0; i < m.n; ++i) {
      CompensatedSum acc;
      for (int j = 0; j < m.n; ++j) acc.add(m.J[size_t(i)][size_t(j)] * x[size_t(j)]);
      acc.add(m.h[size_t(i)]);
      field[size_t(i)] = acc.value();
    }
    for (int i = 0; i < m.n; ++i) {
      double nx = (1.0 - damping) * x[size_t(i)] + damping * std::tanh(field[size_t(i)]);
      delta = std::max(delta, std::abs(nx - x[size_t(i)]));
      x[size_t(i)] = nx;
    }
    ++out.iterations;
    if (delta <= tol) {
      out.converged = true;
      break;
    }
  }
  out.x = std::move(x);
  return out;
}

// Per-vertex fixpoint residual |x_i - tanh(J_i . x + h_i)|.
inline std::vector<double> mf_residual(const IsingModel& m, const std::vector<double>& x) {
  if (x.size() != size_t(m.n)) throw invalid_input_error("mf_residual: size mismatch");
  std::vector<double> r(size_t(m.n));
  for (int i = 0; i < m.n; ++i) {
    CompensatedSum acc;
    for (int j = 0; j < m.n; ++j) acc.add(m.J[size_t(i)][size_t(j)] * x[size_t(j)]);
    acc.add(m.h[size_t(i)]);
    r[size_t(i)] = std::abs(x[size_t(i)] - std::tanh(acc.value()));
  }
  return r;
}

struct MeanFieldSolution {
  ProductDistribution marginals;
  std::vector<double> means;  // spin view, q == 2 only
  double objective = 0.0;
  bool converged = false;
  int iterations = 0;
  int restarts_used = 0;
  double max_residual = 0.0;
};

// Multi-restart damped fixpoint iteration: all-zeros start first, then
// `restarts` uniform starts seeded by (seed, restart index). Best objective
// wins; ties keep the earlier start.
inline MeanFieldSolution mf_optimize(const IsingModel& m, int restarts = 50,
                                     std::uint64_t seed = 0, double damping = 0.5,
                                     double tol = 1e-10, int max_iters = 10000) {
  validate_ising(m);
  MeanFieldSolution best;
  best.objective = -std::numeric_limits<double>::infinity();
  for (int r = 0; r <= restarts; ++r) {
    std::vector<double> x0(size_t(m.n), 0.0);
    if (r > 0) {
      Rng rng(child_seed(seed, std::uint64_t(r - 1)));
      for (double& v : x0) v = rng.uniform(-1.0, 1.0);
    }
    MfIterateResult res = mf_iterate(m, std::move(x0), damping, tol, max_iters);
    double obj = mf_objective(m, res.x);
    if (obj > best.objective) {
      best.objective = obj;
      best.means = res.x;
      best.converged = res.converged;
      best.iterations = res.iterations;
    }
  }
  best.restarts_used = restarts;
  double mr = 0.0;
  for (double v : mf_residual(m, best.means)) mr = std::max(mr, v);
  best.max_residual = mr;
  best.marginals.q = 2;
  best.marginals.marginals.resize(size_t(m.n));
  for (int i = 0; i < m.n; ++i) {
    double p0 = 0.5 * (1.0 + best.means[size_t(i)]);
    best.marginals.marginals[size_t(i)] = {p0, 1.0 - p0};
  }
  return best;
}

namespace detail {

// One round-robin sweep of exact coordinate maximization; returns max change.
inline double coord_ascent_sweep(const Mrf& m, std::vector<std::vector<double>>& nu) {
  std::uint64_t cells = ipow(std::uint64_t(m.q), unsigned(m.k));
  Assignment xE(static_cast<std::size_t>(m.k));
  double delta = 0.0;
  for (int i = 0; i < m.n; ++i) {
    std::vector<double> L = m.fields[size_t(i)];
    for (const MrfEdge& e : m.edges) {
      auto it = std::find(e.vertices.begin(), e.vertices.end(), i);
      if (it == e.vertices.end()) continue;
      int pos = int(it - e.vertices.begin());
      for (std::uint64_t c = 0; c < cells; ++c) {
        std::uint64_t rem = c;
        for (int t = m.k - 1; t >= 0; --t) {
          xE[size_t(t)] = std::uint8_t(rem % std::uint64_t(m.q));
          rem /= std::uint64_t(m.q);
        }
        double w = e.table[c];
        if (w == 0.0) continue;
        double p = 1.0;
        for (int t = 0; t < m.k; ++t)
          if (t != pos) p *= nu[size_t(e.vertices[size_t(t)])][xE[size_t(t)]];
        L[xE[size_t(pos)]] += w * p;
      }
    }
    // Softmax: exact blockwise maximizer of <nu_i, L> + H(nu_i).
    double mx = *std::max_element(L.begin(), L.end());
    double z = 0.0;
    for (double v : L) z += std::exp(v - mx);
    for (int a = 0; a < m.q; ++a) {
      double p = std::exp(L[size_t(a)] - mx) / z;
      delta = std::max(delta, std::abs(p - nu[size_t(i)][size_t(a)]));
      nu[size_t(i)][size_t(a)] = p;
    }
  }
  return delta;
}

}  // namespace detail

// General-alphabet mean-field ascent. For q=2, k=2 models the exact Ising
// decomposition is used (fixpoint iteration path); otherwise blockwise
// coordinate ascent on marginals from a uniform start plus random restarts.
inline MeanFieldSolution mf_optimize(const Mrf& m, int restarts = 50, std::uint64_t seed = 0,
                                     double damping = 0.5, double tol = 1e-10,
                                     int max_iters = 10000) {
  validate_mrf(m);
  if (m.q == 2 && m.k == 2) {
    IsingWithOffset iso = mrf_to_ising(m);
    MeanFieldSolution sol = mf_optimize(iso.model, restarts, seed, damping, tol, max_iters);
    sol.objective += iso.offset;
    return sol;
  }
  MeanFieldSolution best;
  best.objective = -std::numeric_limits<double>::infinity();
  for (int r = 0; r <= restarts; ++r) {
    std::vector<std::vector<double>> nu(size_t(m.n),
                                        std::vector<double>(size_t(m.q), 1.0 / double(m.q)));
    if (r > 0) {
      Rng rng(child_seed(seed, std::uint64_t(r - 1)));
      for (auto& row : nu) {
        double s = 0.0;
        for (double& v : row) {
          v = rng.uniform() + 1e-3;
          s += v;
        }
        for (double& v : row) v /= s;
      }
    }
    int iters = 0;
    bool conv = false;
    double delta = 0.0;
    for (; iters < max_iters; ++iters) {
      delta = detail::coord_ascent_sweep(m, nu);
      if (delta <= tol) {
        conv = true;
        break;
      }
    }
    ProductDistribution pd;
    pd.q = m.q;
    pd.marginals = nu;
    double obj = mf_objective(m, pd);
    if (obj > best.objective) {
      best.objective = obj;
      best.marginals = std::move(pd);
      best.converged = conv;
      best.iterations = iters;
      best.max_residual = delta;
    }
  }
  best.restarts_used = restarts;
  if (m.q == 2) {
    best.means.resize(size_t(m.n));
    for (int i = 0; i < m.n; ++i)
      best.means[size_t(i)] = best.marginals.marginals[size_t(i)][0] -
                              best.marginals.marginals[size_t(i)][1];
  }
  return best;
}

// Var(J_i . X) for each vertex under mu, plus the Cauchy-Schwarz bound
// (1/n) sum_i Var(J_i . X) <= ||J||_{S4}^2 sqrt(E_{j,k}[Cov(X_j,X_k)^2])
// (ordered pairs including the diagonal), asserted internally.
inline std::vector<double> local_field_variance(const IsingModel& m, const JointDistribution& d) {
  validate_ising(m);
  if (int(d.scope.size()) != m.n || d.q != 2)
    throw invalid_input_error("local_field_variance: joint does not match model");
  SpinMoments mo = spin_moments(d);
  int n = m.n;
  std::vector<std::vector<double>> cov(static_cast<std::size_t>(n), std::vector<double>(static_cast<std::size_t>(n)));
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b)
      cov[size_t(a)][size_t(b)] = mo.second[size_t(a)][size_t(b)] - mo.mean[size_t(a)] * mo.mean[size_t(b)];
  std::vector<double> var(size_t(n), 0.0);
  for (int i = 0; i < n; ++i) {
    CompensatedSum acc;
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b)
        acc.add(m.J[size_t(i)][size_t(a)] * m.J[size_t(i)][size_t(b)] * cov[size_t(a)][size_t(b)]);
    var[size_t(i)] = acc.value();
  }
  double avg_var = 0.0;
  for (double v : var) avg_var += v;
  avg_var /= double(n);
  double cov_sq = 0.0;
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b) cov_sq += cov[size_t(a)][size_t(b)] * cov[size_t(a)][size_t(b)];
  cov_sq /= double(n) * double(n);
  double s4 = schatten4(m);
  if (avg_var > s4 * s4 * std::sqrt(cov_sq) + 1e-9)
    throw std::logic_error("local_field_variance: Schatten-4 bound violated");
  return var;
}

}  // namespace gibbsrelax
