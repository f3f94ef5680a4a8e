#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "gibbsrelax/common.hpp"
#include "gibbsrelax/distribution.hpp"
#include "gibbsrelax/meanfield.hpp"
#include "gibbsrelax/model.hpp"
#include "gibbsrelax/rng.hpp"
#include "gibbsrelax/rounding.hpp"

namespace gibbsrelax {

// Replica-symmetric limit of F/n for the SK model at inverse temperature
// beta; exact in the high-temperature regime.
inline double rs_prediction(double beta) { return std::log(2.0) + beta * beta / 4.0; }

// Largest absolute eigenvalue of a symmetric matrix. Power iteration on
// J + cI and -J + cI with c = ||J||_F; the shift makes both matrices
// positive semidefinite so the iteration converges to the top eigenvalue.
inline double spectral_norm(const std::vector<std::vector<double>>& J, double rel_tol = 1e-8) {
  std::size_t n = J.size();
  double scale = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (J[i].size() != n) throw invalid_input_error("spectral_norm: matrix not square");
    for (std::size_t j = 0; j < n; ++j) scale = std::max(scale, std::abs(J[i][j]));
  }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (std::abs(J[i][j] - J[j][i]) > 1e-12 * std::max(1.0, scale))
        throw invalid_input_error("spectral_norm: matrix not symmetric");
  if (n == 0 || scale == 0.0) return 0.0;
  double c = 0.0;
  {
    CompensatedSum fs;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) fs.add(J[i][j] * J[i][j]);
    c = std::sqrt(fs.value());
  }
  auto top_eig = [&](double sign) {
    std::vector<double> v(n), w(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = 1.0 + double(i + 1) / double(n + 1);
    double nv = 0.0;
    for (double x : v) nv += x * x;
    nv = std::sqrt(nv);
    for (double& x : v) x /= nv;
    double lambda = 0.0;
    for (int it = 0; it < 200000; ++it) {
      for (std::size_t i = 0; i < n; ++i) {
        double s = c * v[i];
        for (std::size_t j = 0; j < n; ++j) s += sign * J[i][j] * v[j];
        w[i] = s;
      }
      double nw = 0.0, ray = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        nw += w[i] * w[i];
        ray += w[i] * v[i];
      }
      nw = std::sqrt(nw);
      if (nw == 0.0) return 0.0;  // started in the kernel of a PSD matrix
      for (std::size_t i = 0; i < n; ++i) v[i] = w[i] / nw;
      if (it > 0 && std::abs(ray - lambda) <= rel_tol * std::max(std::abs(ray), 1e-300))
        return ray;
      lambda = ray;
    }
    return lambda;
  };
  double hi = std::max(top_eig(1.0), top_eig(-1.0)) - c;
  return std::max(hi, 0.0);
}

enum class SkMethod { exact, sandwich };

struct SkExperimentResult {
  int n = 0;
  double beta = 0.0;
  int trials = 0;
  NoiseKind noise = NoiseKind::gaussian;
  SkMethod method = SkMethod::exact;
  std::uint64_t seed = 0;
  std::vector<double> f_over_n;       // sandwich mode: interval midpoint
  std::vector<double> lower_over_n;   // sandwich mode only
  std::vector<double> upper_over_n;   // sandwich mode only
  std::vector<double> mf_over_n;
  std::vector<double> spectral_norms; // of J / beta, the variance-1/n coupling matrix
  double mean_f = 0.0, std_f = 0.0;
  double mean_mf = 0.0, std_mf = 0.0;
  double mean_norm = 0.0, std_norm = 0.0;
};

namespace detail {

inline void mean_std(const std::vector<double>& v, double& mean, double& sd) {
  if (v.empty()) {
    mean = sd = 0.0;
    return;
  }
  CompensatedSum s;
  for (double x : v) s.add(x);
  mean = s.value() / double(v.size());
  if (v.size() < 2) {
    sd = 0.0;
    return;
  }
  CompensatedSum s2;
  for (double x : v) s2.add((x - mean) * (x - mean));
  sd = std::sqrt(s2.value() / double(v.size() - 1));
}

}  // namespace detail

// Seeded SK trials: per-trial free energy density (exact enumeration or the
// relaxation sandwich), mean-field optimum density, and the spectral norm of
// J / beta, whose entries have variance 1/n so the norm sits at the
// semicircle edge 2 for large n.
inline SkExperimentResult sk_experiment(int n, double beta, int trials,
                                        NoiseKind noise = NoiseKind::gaussian,
                                        std::uint64_t seed = 0,
                                        SkMethod method = SkMethod::exact, int r_entropy = 2) {
  if (n < 2) throw invalid_input_error("sk_experiment: n >= 2 required");
  if (trials < 1) throw invalid_input_error("sk_experiment: trials >= 1 required");
  if (method == SkMethod::exact && n > 20)
    throw size_limit_error("sk_experiment: exact mode limited to n <= 20");
  SkExperimentResult res;
  res.n = n;
  res.beta = beta;
  res.trials = trials;
  res.noise = noise;
  res.method = method;
  res.seed = seed;
  for (int trial = 0; trial < trials; ++trial) {
    std::uint64_t ts = child_seed(seed, std::uint64_t(trial));
    IsingModel m = sk_sample(n, beta, noise, ts);
    double f;
    if (method == SkMethod::exact) {
      f = exact_free_energy(m);
    } else {
      PipelineReport pipe = sa_meanfield(m, r_entropy);
      res.lower_over_n.push_back(pipe.lower_bound / n);
      res.upper_over_n.push_back(pipe.upper_bound / n);
      f = 0.5 * (pipe.lower_bound + pipe.upper_bound);
    }
    res.f_over_n.push_back(f / n);
    MeanFieldSolution mf = mf_optimize(m, 50, child_seed(ts, 1));
    res.mf_over_n.push_back(mf.objective / n);
    if (beta != 0.0) {
      std::vector<std::vector<double>> normalized = m.J;
      for (auto& row : normalized)
        for (double& x : row) x /= beta;
      res.spectral_norms.push_back(spectral_norm(normalized));
    } else {
      res.spectral_norms.push_back(0.0);
    }
  }
  detail::mean_std(res.f_over_n, res.mean_f, res.std_f);
  detail::mean_std(res.mf_over_n, res.mean_mf, res.std_mf);
  detail::mean_std(res.spectral_norms, res.mean_norm, res.std_norm);
  return res;
}

struct KappaSweepResult {
  int n = 0;
  int t_max = 0;
  std::vector<double> values;  // index t: min over |S| <= t of avg |cond cov|
  std::vector<double> scaled;  // sqrt(t) * values[t]
  std::vector<std::vector<int>> argmin_sets;
};

// Exact minimum over conditioning sets of the average absolute conditional
// pair covariance, for each budget t. Nonincreasing in t by construction.
inline KappaSweepResult kappa_sweep(const IsingModel& m, int t_max) {
  validate_ising(m);
  if (m.n > 14) throw size_limit_error("kappa_sweep: n > 14");
  if (t_max < 0 || t_max > 5) throw invalid_input_error("kappa_sweep: need 0 <= t_max <= 5");
  if (t_max > m.n) t_max = m.n;
  KappaSweepResult res;
  res.n = m.n;
  res.t_max = t_max;
  JointDistribution gibbs = exact_gibbs(m);
  SubsetMarginals sm(gibbs);
  double best = std::numeric_limits<double>::infinity();
  std::vector<int> best_S;
  for (int t = 0; t <= t_max; ++t) {
    if (t == 0) {
      best = conditional_covariance_stats(sm, {}).avg_abs_cov;
      best_S = {};
    } else {
      std::vector<int> c = first_combination(t);
      do {
        double v = conditional_covariance_stats(sm, c).avg_abs_cov;
        if (v < best) {
          best = v;
          best_S = c;
        }
      } while (next_combination(c, m.n));
    }
    res.values.push_back(best);
    res.scaled.push_back(std::sqrt(double(t)) * best);
    res.argmin_sets.push_back(best_S);
  }
  return res;
}

}  // namespace gibbsrelax
