#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "gibbsrelax/common.hpp"
#include "gibbsrelax/distribution.hpp"
#include "gibbsrelax/model.hpp"
#include "gibbsrelax/rng.hpp"
#include "gibbsrelax/rounding.hpp"

namespace gibbsrelax {

// Induced k-MRF on Q with interactions scaled by (n/s)^{k-1}. Fields are
// restricted but not rescaled; only interaction functions carry the factor.
inline Mrf induce_rescaled(const Mrf& m, const std::vector<int>& Q) {
  int s = int(Q.size());
  if (s < m.k) throw invalid_input_error("induce_rescaled: |Q| < k");
  std::vector<int> pos(std::size_t(m.n), -1);
  for (int i = 0; i < s; ++i) {
    int v = Q[std::size_t(i)];
    if (v < 0 || v >= m.n || pos[std::size_t(v)] != -1)
      throw invalid_input_error("induce_rescaled: Q must be distinct vertices of the model");
    if (i > 0 && Q[std::size_t(i - 1)] >= v)
      throw invalid_input_error("induce_rescaled: Q must be sorted");
    pos[std::size_t(v)] = i;
  }
  double scale = std::pow(double(m.n) / double(s), double(m.k - 1));
  Mrf out;
  out.n = s;
  out.q = m.q;
  out.k = m.k;
  for (const MrfEdge& e : m.edges) {
    bool inside = true;
    for (int v : e.vertices)
      if (pos[std::size_t(v)] < 0) inside = false;
    if (!inside) continue;
    MrfEdge ne;
    for (int v : e.vertices) ne.vertices.push_back(pos[std::size_t(v)]);
    ne.table = e.table;
    for (double& x : ne.table) x *= scale;
    out.edges.push_back(std::move(ne));
  }
  out.fields.resize(std::size_t(s));
  for (int i = 0; i < s; ++i) out.fields[std::size_t(i)] = m.fields[std::size_t(Q[std::size_t(i)])];
  return out;
}

enum class SubsampleInner { exact, pipeline };

struct SubsampleEstimate {
  double estimate = 0.0;  // median of per-repetition (n/s) F_Q
  int n = 0, s = 0, k = 0;
  int repetitions = 0;
  double delta = 0.05;
  std::uint64_t seed = 0;
  SubsampleInner inner = SubsampleInner::exact;
  std::vector<double> values;
  // Error-bound template |F - estimate| <= C_q k^4 eps (T_F + T_inf + T_omega)
  // with the constant C_q unspecified; reported, never asserted.
  double epsilon_report = 0.1;
  double omega = 0.0;           // k^7 log(1/eps) / eps^8
  double term_frobenius = 0.0;  // n^{k/2} ||J||_F
  double term_infinity = 0.0;   // eps n^k ||J||_inf
  double term_omega = 0.0;      // omega n / s
  double template_value = 0.0;  // k^4 eps (sum of the three terms)
};

// Median over seeded repetitions of the rescaled induced free energy.
// repetitions <= 0 selects ceil(48 log(1/delta)); even counts are bumped to
// the next odd so the median is a sample value.
inline SubsampleEstimate subsample_estimate(const Mrf& m, int s, int repetitions = 0,
                                            double delta = 0.05, std::uint64_t seed = 0,
                                            SubsampleInner inner = SubsampleInner::exact,
                                            int pipeline_r = 2, double epsilon_report = 0.1) {
  validate_mrf(m);
  if (s < m.k || s > m.n) throw invalid_input_error("subsample_estimate: need k <= s <= n");
  if (!(delta > 0.0 && delta < 1.0))
    throw invalid_input_error("subsample_estimate: delta in (0,1) required");
  SubsampleEstimate out;
  out.n = m.n;
  out.s = s;
  out.k = m.k;
  out.delta = delta;
  out.seed = seed;
  out.inner = inner;
  out.epsilon_report = epsilon_report;
  if (repetitions <= 0) repetitions = int(std::ceil(48.0 * std::log(1.0 / delta)));
  if (repetitions % 2 == 0) ++repetitions;
  out.repetitions = repetitions;
  for (int rep = 0; rep < repetitions; ++rep) {
    Rng rng(child_seed(seed, std::uint64_t(rep)));
    std::vector<int> Q = detail::sample_subset(rng, m.n, s);
    Mrf induced = induce_rescaled(m, Q);
    double fq;
    if (inner == SubsampleInner::exact) {
      fq = exact_free_energy(induced);
    } else {
      PipelineReport pipe = sa_meanfield(induced, pipeline_r);
      fq = 0.5 * (pipe.lower_bound + pipe.upper_bound);
    }
    out.values.push_back(double(m.n) / double(s) * fq);
  }
  std::vector<double> sorted = out.values;
  std::sort(sorted.begin(), sorted.end());
  out.estimate = sorted[sorted.size() / 2];

  double eps = epsilon_report;
  out.omega = std::pow(double(m.k), 7.0) * std::log(1.0 / eps) / std::pow(eps, 8.0);
  double frob = frobenius_interaction_norm(m);
  double linf = 0.0;
  for (const MrfEdge& e : m.edges)
    for (double x : e.table) linf = std::max(linf, std::abs(x));
  out.term_frobenius = std::pow(double(m.n), double(m.k) / 2.0) * frob;
  out.term_infinity = eps * std::pow(double(m.n), double(m.k)) * linf;
  out.term_omega = out.omega * double(m.n) / double(s);
  out.template_value = std::pow(double(m.k), 4.0) * eps *
                       (out.term_frobenius + out.term_infinity + out.term_omega);
  return out;
}

}  // namespace gibbsrelax
