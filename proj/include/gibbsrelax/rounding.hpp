#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "gibbsrelax/common.hpp"
#include "gibbsrelax/distribution.hpp"
#include "gibbsrelax/info.hpp"
#include "gibbsrelax/local_family.hpp"
#include "gibbsrelax/meanfield.hpp"
#include "gibbsrelax/model.hpp"
#include "gibbsrelax/rng.hpp"
#include "gibbsrelax/sa_solver.hpp"

namespace gibbsrelax {

// Uniform access to subset marginals and entropies of either an exact joint
// distribution or a local-marginal family.
class EntropySource {
 public:
  explicit EntropySource(const JointDistribution& d) : sm_(SubsetMarginals(d)) {
    n_ = int(d.scope.size());
    q_ = d.q;
    max_subset_ = n_;
  }
  explicit EntropySource(LocalFamily f) : family_(std::move(f)) {
    n_ = family_->n;
    q_ = family_->q;
    max_subset_ = family_->level;
  }

  int n() const { return n_; }
  int q() const { return q_; }
  int max_subset() const { return max_subset_; }
  bool exact_joint() const { return sm_.has_value(); }

  double subset_entropy(const std::vector<int>& U) const {
    if (sm_) return sm_->entropy(mask_of(U));
    std::uint64_t key = mask_of(U);
    auto it = entropy_cache_.find(key);
    if (it != entropy_cache_.end()) return it->second;
    double h = entropy(marginal_from_family(*family_, U));
    entropy_cache_.emplace(key, h);
    return h;
  }

  JointDistribution subset_marginal(const std::vector<int>& U) const {
    if (sm_) {
      JointDistribution d;
      d.scope = U;
      d.q = q_;
      d.probs = sm_->table(mask_of(U));
      return d;
    }
    return marginal_from_family(*family_, U);
  }

 private:
  int n_ = 0, q_ = 2, max_subset_ = 0;
  std::optional<SubsetMarginals> sm_;
  std::optional<LocalFamily> family_;
  mutable std::unordered_map<std::uint64_t, double> entropy_cache_;
};

// E_{F ~ C(comp(S), k)} [C(X_F | X_S)] where C is total correlation.
inline double avg_conditional_total_correlation(const EntropySource& src,
                                                const std::vector<int>& S, int k) {
  if (int(S.size()) + k > src.max_subset())
    throw invalid_input_error("conditioning: |S| + k exceeds available marginal order");
  std::vector<int> comp;
  for (int v = 0; v < src.n(); ++v)
    if (!std::binary_search(S.begin(), S.end(), v)) comp.push_back(v);
  if (int(comp.size()) < k) throw invalid_input_error("conditioning: fewer than k free vertices");
  double hS = src.subset_entropy(S);
  std::vector<double> hcond(comp.size());
  for (std::size_t i = 0; i < comp.size(); ++i)
    hcond[i] = src.subset_entropy(sorted_union(S, {comp[i]})) - hS;
  CompensatedSum acc;
  std::uint64_t count = 0;
  std::vector<int> c = first_combination(k);
  do {
    std::vector<int> F;
    double singles = 0.0;
    for (int idx : c) {
      F.push_back(comp[size_t(idx)]);
      singles += hcond[size_t(idx)];
    }
    double hF = src.subset_entropy(sorted_union(S, F)) - hS;
    acc.add(singles - hF);
    ++count;
  } while (next_combination(c, int(comp.size())));
  return acc.value() / double(count);
}

// Both sides of the averaging step: total correlation averaged over all
// k-subsets of V is at most the average over k-subsets avoiding S, because
// vertices inside S contribute nothing given X_S.
inline IdentityCheck conditioning_average_check(const EntropySource& src,
                                                const std::vector<int>& S, int k) {
  double hS = src.subset_entropy(S);
  CompensatedSum acc;
  std::uint64_t count = 0;
  std::vector<int> c = first_combination(k);
  do {
    std::vector<int> F(c.begin(), c.end());
    double singles = 0.0;
    for (int v : F) singles += src.subset_entropy(sorted_union(S, {v})) - hS;
    double hF = src.subset_entropy(sorted_union(S, F)) - hS;
    acc.add(singles - hF);
    ++count;
  } while (next_combination(c, src.n()));
  IdentityCheck chk;
  chk.lhs = acc.value() / double(count);
  chk.rhs = avg_conditional_total_correlation(src, S, k);
  return chk;
}

enum class ConditioningMode { sweep, greedy };

struct ConditioningReport {
  std::vector<int> set;
  int t = 0;
  double avg_total_correlation = 0.0;
  double avg_cov_sq = std::numeric_limits<double>::quiet_NaN();  // exact binary joints only
  std::vector<double> weights;  // P(x_S) in canonical assignment order
  double bound = 0.0;           // k^2 log q / ell
  bool met_bound = false;
  bool sampled = false;
  int samples = 0;
  ConditioningMode mode = ConditioningMode::sweep;
  int ell = 0;
  int k = 0;
};

struct CovarianceStats {
  double avg_abs_cov = 0.0;
  double avg_cov_sq = 0.0;
};

// Exact E over x_S and unordered vertex pairs of |Cov| and Cov^2 given
// X_S = x_S. Pairs meeting S contribute zero. Binary joints only.
inline CovarianceStats conditional_covariance_stats(const SubsetMarginals& sm,
                                                    const std::vector<int>& S) {
  int n = sm.n();
  if (sm.q() != 2) throw invalid_input_error("conditional_covariance_stats: binary only");
  if (n < 2) return {};
  const std::vector<double>& pS = sm.table(mask_of(S));
  std::vector<int> comp;
  for (int v = 0; v < n; ++v)
    if (!std::binary_search(S.begin(), S.end(), v)) comp.push_back(v);
  double npairs = double(binom(n, 2));
  CompensatedSum abs_acc, sq_acc;
  for (std::size_t ui = 0; ui < comp.size(); ++ui)
    for (std::size_t vi = ui + 1; vi < comp.size(); ++vi) {
      int u = comp[ui], v = comp[vi];
      std::vector<int> Uuv = sorted_union(S, {u, v});
      const std::vector<double>& pUV = sm.table(mask_of(Uuv));
      // Positions of u, v inside the sorted union determine the strides of
      // the pair block for a fixed x_S.
      std::size_t pu = 0, pv = 0;
      for (std::size_t i = 0; i < Uuv.size(); ++i) {
        if (Uuv[i] == u) pu = i;
        if (Uuv[i] == v) pv = i;
      }
      int m = int(Uuv.size());
      for (std::size_t is = 0; is < pS.size(); ++is) {
        double w = pS[is];
        if (w <= 0.0) continue;
        // Rebuild the base index of (x_S, x_u=0, x_v=0) in the union table.
        std::uint64_t base = 0;
        {
          std::uint64_t rem = is;
          std::vector<int> digits(S.size());
          for (int i = int(S.size()) - 1; i >= 0; --i) {
            digits[size_t(i)] = int(rem % 2);
            rem /= 2;
          }
          std::size_t si = 0;
          for (int i = 0; i < m; ++i) {
            base <<= 1;
            if (std::size_t(i) != pu && std::size_t(i) != pv) base |= std::uint64_t(digits[si++]);
          }
        }
        std::uint64_t bu = std::uint64_t(1) << (m - 1 - int(pu));
        std::uint64_t bv = std::uint64_t(1) << (m - 1 - int(pv));
        double p00 = pUV[base] / w;
        double p01 = pUV[base | bv] / w;
        double p10 = pUV[base | bu] / w;
        double p11 = pUV[base | bu | bv] / w;
        double mu_u = p00 + p01 - p10 - p11;  // letter 0 is spin +1
        double mu_v = p00 + p10 - p01 - p11;
        double e_uv = p00 - p01 - p10 + p11;
        double cov = e_uv - mu_u * mu_v;
        double tv = 0.5 * (std::abs(p00 - 0.25 * (1 + mu_u) * (1 + mu_v)) +
                           std::abs(p01 - 0.25 * (1 + mu_u) * (1 - mu_v)) +
                           std::abs(p10 - 0.25 * (1 - mu_u) * (1 + mu_v)) +
                           std::abs(p11 - 0.25 * (1 - mu_u) * (1 - mu_v)));
        if (std::abs(std::abs(cov) - 2.0 * tv) > 1e-9)
          throw std::logic_error("conditional covariance / TV identity violated");
        abs_acc.add(w * std::abs(cov));
        sq_acc.add(w * cov * cov);
      }
    }
  CovarianceStats out;
  out.avg_abs_cov = abs_acc.value() / npairs;
  out.avg_cov_sq = sq_acc.value() / npairs;
  return out;
}

inline CovarianceStats conditional_covariance_stats(const JointDistribution& d,
                                                    const std::vector<int>& S) {
  if (int(d.scope.size()) > 14)
    throw size_limit_error("conditional_covariance_stats: n > 14");
  SubsetMarginals sm(d);
  return conditional_covariance_stats(sm, S);
}

namespace detail {

inline std::vector<int> sample_subset(Rng& rng, int n, int t) {
  std::vector<int> pool(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) pool[size_t(i)] = i;
  for (int i = 0; i < t; ++i) {
    std::size_t j = i + rng.uniform_index(std::size_t(n - i));
    std::swap(pool[size_t(i)], pool[j]);
  }
  std::vector<int> out(pool.begin(), pool.begin() + t);
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace detail

// Sweep mode: scan t = 0..ell; the first level whose average over conditioning
// sets meets k^2 log q / ell is taken, with the best set at that level.
// Greedy mode: grow S by the vertex giving the largest drop. Exhaustive
// enumeration of C(n,t) sets below `exhaustive_cap`, seeded sampling above.
inline ConditioningReport select_conditioning_set(
    const EntropySource& src, int ell, int k,
    ConditioningMode mode = ConditioningMode::sweep, std::uint64_t seed = 0x5eed5eed5eedULL,
    double exhaustive_cap = 1e5, int sample_count = 2000) {
  int n = src.n();
  if (k < 2) throw invalid_input_error("select_conditioning_set: k >= 2 required");
  if (ell < 0 || ell + k > n)
    throw invalid_input_error("select_conditioning_set: need 0 <= ell <= n - k");
  if (ell + k > src.max_subset())
    throw invalid_input_error("select_conditioning_set: source order below ell + k");
  ConditioningReport rep;
  rep.mode = mode;
  rep.ell = ell;
  rep.k = k;
  rep.bound = ell > 0 ? double(k) * double(k) * std::log(double(src.q())) / double(ell)
                      : std::numeric_limits<double>::infinity();

  auto finish = [&](std::vector<int> S, double value) {
    rep.set = std::move(S);
    rep.t = int(rep.set.size());
    rep.avg_total_correlation = value;
    rep.met_bound = value <= rep.bound + 1e-9;
    rep.weights = src.subset_marginal(rep.set).probs;
    return rep;
  };

  if (mode == ConditioningMode::greedy) {
    std::vector<int> S;
    double cur = avg_conditional_total_correlation(src, S, k);
    while (cur > rep.bound + 1e-9 && int(S.size()) < ell) {
      std::vector<int> pick;
      double best = std::numeric_limits<double>::infinity();
      for (int v = 0; v < n; ++v) {
        if (std::binary_search(S.begin(), S.end(), v)) continue;
        std::vector<int> cand = sorted_union(S, {v});
        double val = avg_conditional_total_correlation(src, cand, k);
        if (val < best) {
          best = val;
          pick = cand;
        }
      }
      if (pick.empty()) break;
      S = std::move(pick);
      cur = best;
    }
    return finish(std::move(S), cur);
  }

  std::vector<int> fallback_set;
  double fallback_val = std::numeric_limits<double>::infinity();
  for (int t = 0; t <= ell; ++t) {
    double level_sum = 0.0;
    std::uint64_t level_cnt = 0;
    std::vector<int> best_S;
    double best_val = std::numeric_limits<double>::infinity();
    bool level_sampled = binom(n, t) > exhaustive_cap;
    auto visit = [&](const std::vector<int>& S) {
      double v = avg_conditional_total_correlation(src, S, k);
      level_sum += v;
      ++level_cnt;
      if (v < best_val) {
        best_val = v;
        best_S = S;
      }
    };
    if (!level_sampled) {
      if (t == 0) {
        visit({});
      } else {
        std::vector<int> c = first_combination(t);
        do {
          visit(c);
        } while (next_combination(c, n));
      }
    } else {
      rep.sampled = true;
      rep.samples = sample_count;
      Rng rng(child_seed(seed, std::uint64_t(t)));
      for (int s = 0; s < sample_count; ++s) visit(detail::sample_subset(rng, n, t));
    }
    double avg = level_sum / double(level_cnt);
    if (avg <= rep.bound + 1e-9) return finish(std::move(best_S), best_val);
    if (best_val < fallback_val) {
      fallback_val = best_val;
      fallback_set = best_S;
    }
  }
  if (!rep.sampled)
    throw std::logic_error("conditioning sweep: no level met the bound under exhaustive search");
  return finish(std::move(fallback_set), fallback_val);
}

inline ConditioningReport select_conditioning_set(const JointDistribution& d, int ell, int k,
                                                  ConditioningMode mode = ConditioningMode::sweep,
                                                  std::uint64_t seed = 0x5eed5eed5eedULL) {
  EntropySource src(d);
  ConditioningReport rep = select_conditioning_set(src, ell, k, mode, seed);
  if (d.q == 2 && int(d.scope.size()) <= 14) {
    CovarianceStats st = conditional_covariance_stats(d, rep.set);
    rep.avg_cov_sq = st.avg_cov_sq;
  }
  return rep;
}

inline ConditioningReport select_conditioning_set(const LocalFamily& f, int ell, int k,
                                                  ConditioningMode mode = ConditioningMode::sweep,
                                                  std::uint64_t seed = 0x5eed5eed5eedULL) {
  EntropySource src(f);
  return select_conditioning_set(src, ell, k, mode, seed);
}

struct RoundedCandidate {
  Assignment x_S;
  double weight = 0.0;  // P(x_S)
  ProductDistribution nu;
  double objective = std::numeric_limits<double>::quiet_NaN();
};

struct RoundedOutput {
  std::vector<int> set;
  std::vector<RoundedCandidate> candidates;
  int best = -1;
  double mixture_value = std::numeric_limits<double>::quiet_NaN();
  int skipped = 0;  // zero-probability branches
};

// One conditional product per assignment of S with positive probability:
// free vertices get the conditional single-vertex marginals, pinned vertices
// get point masses.
inline RoundedOutput round_to_products(const EntropySource& src, const std::vector<int>& S) {
  int n = src.n(), q = src.q();
  RoundedOutput out;
  out.set = S;
  std::vector<double> pS = src.subset_marginal(S).probs;
  std::vector<std::vector<double>> joins;  // per free vertex, table over S+{j}
  std::vector<int> comp;
  std::vector<std::size_t> jpos;  // position of j inside sorted S+{j}
  for (int j = 0; j < n; ++j) {
    if (std::binary_search(S.begin(), S.end(), j)) continue;
    comp.push_back(j);
    std::vector<int> Sj = sorted_union(S, {j});
    joins.push_back(src.subset_marginal(Sj).probs);
    jpos.push_back(std::size_t(std::lower_bound(Sj.begin(), Sj.end(), j) - Sj.begin()));
  }
  for (std::size_t is = 0; is < pS.size(); ++is) {
    if (pS[is] <= 1e-12) {
      ++out.skipped;
      continue;
    }
    RoundedCandidate cand;
    cand.weight = pS[is];
    cand.x_S.resize(S.size());
    {
      std::uint64_t rem = is;
      for (int i = int(S.size()) - 1; i >= 0; --i) {
        cand.x_S[size_t(i)] = std::uint8_t(rem % std::uint64_t(q));
        rem /= std::uint64_t(q);
      }
    }
    cand.nu.q = q;
    cand.nu.marginals.assign(std::size_t(n), std::vector<double>(std::size_t(q), 0.0));
    for (std::size_t i = 0; i < S.size(); ++i)
      cand.nu.marginals[std::size_t(S[i])][cand.x_S[i]] = 1.0;
    for (std::size_t ci = 0; ci < comp.size(); ++ci) {
      int j = comp[ci];
      int m = int(S.size()) + 1;
      // Base index of (x_S, x_j = 0) inside the S+{j} table.
      std::uint64_t base = 0, rem = is;
      std::vector<int> digits(S.size());
      for (int i = int(S.size()) - 1; i >= 0; --i) {
        digits[size_t(i)] = int(rem % std::uint64_t(q));
        rem /= std::uint64_t(q);
      }
      std::size_t si = 0;
      for (int i = 0; i < m; ++i) {
        base *= std::uint64_t(q);
        if (std::size_t(i) != jpos[ci]) base += std::uint64_t(digits[si++]);
      }
      std::uint64_t stride = ipow(std::uint64_t(q), unsigned(m - 1 - int(jpos[ci])));
      double tot = 0.0;
      for (int a = 0; a < q; ++a) {
        double p = std::max(joins[ci][base + std::uint64_t(a) * stride], 0.0);
        cand.nu.marginals[std::size_t(j)][std::size_t(a)] = p;
        tot += p;
      }
      for (int a = 0; a < q; ++a) {
        if (tot > 0.0)
          cand.nu.marginals[std::size_t(j)][std::size_t(a)] /= tot;
        else
          cand.nu.marginals[std::size_t(j)][std::size_t(a)] = 1.0 / double(q);
      }
    }
    out.candidates.push_back(std::move(cand));
  }
  return out;
}

inline RoundedOutput round_to_products(const JointDistribution& d, const std::vector<int>& S) {
  return round_to_products(EntropySource(d), S);
}

inline RoundedOutput round_to_products(const LocalFamily& f, const std::vector<int>& S) {
  return round_to_products(EntropySource(f), S);
}

// Scores every candidate by the mean-field objective, marks the best (lowest
// index on ties) and fills the mixture value
//   sum_{x_S} P(x_S) (E_nu[energy] + H(nu)) + H(X_S).
inline void best_product(const Mrf& m, RoundedOutput& out) {
  if (out.candidates.empty()) throw invalid_input_error("best_product: no candidates");
  CompensatedSum mix;
  std::vector<double> w;
  for (auto& cand : out.candidates) {
    cand.objective = mf_objective(m, cand.nu);
    mix.add(cand.weight * cand.objective);
    w.push_back(cand.weight);
  }
  double hw = 0.0;
  for (double p : w)
    if (p > 0.0) hw -= p * std::log(p);
  out.mixture_value = mix.value() + hw;
  out.best = 0;
  for (std::size_t i = 1; i < out.candidates.size(); ++i)
    if (out.candidates[i].objective > out.candidates[std::size_t(out.best)].objective)
      out.best = int(i);
}

struct PipelineReport {
  SaSolveReport sa;
  ConditioningReport conditioning;
  RoundedOutput rounded;
  double lower_bound = 0.0;  // best rounded product objective, <= log Z
  double upper_bound = 0.0;  // certified relaxation bound, >= log Z
  double gap_bound = 0.0;    // sqrt(4 log q / r) k n^{k/2} ||J||_F / sqrt(k!)
  double upper_gap_bound = 0.0;  // guarantee on upper_bound - log Z
  double lower_gap_bound = 0.0;  // guarantee on log Z - lower_bound
  int r_entropy = 0;
  double eps = 0.0;
};

// Relax, select a conditioning set on the relaxed family, round to conditional
// products, keep the best. lower_bound <= log Z <= upper_bound always; the two
// gap guarantees hold by the relaxation analysis.
inline PipelineReport sa_meanfield(const Mrf& m, int r_entropy, double eps = 1e-3,
                                   const SaOptions& base = {}) {
  PipelineReport rep;
  rep.r_entropy = r_entropy;
  rep.eps = eps;
  SaOptions opt = base;
  opt.eps = eps;
  rep.sa = solve_sa(m, r_entropy, opt);
  EntropySource src(rep.sa.family);
  rep.conditioning = select_conditioning_set(src, r_entropy, m.k);
  rep.rounded = round_to_products(src, rep.conditioning.set);
  best_product(m, rep.rounded);
  rep.lower_bound = rep.rounded.candidates[std::size_t(rep.rounded.best)].objective;
  rep.upper_bound = rep.sa.upper_bound;
  rep.gap_bound =
      relaxation_gap_bound(m.n, m.k, m.q, frobenius_interaction_norm(m), r_entropy);
  rep.upper_gap_bound = rep.gap_bound + eps;
  rep.lower_gap_bound = rep.gap_bound + double(r_entropy) * std::log(double(m.q)) + eps;
  return rep;
}

inline PipelineReport sa_meanfield(const IsingModel& m, int r_entropy, double eps = 1e-3,
                                   const SaOptions& base = {}) {
  return sa_meanfield(ising_to_mrf(m), r_entropy, eps, base);
}

struct WitnessReport {
  double free_energy = 0.0;  // exact log Z
  double value = 0.0;        // best product objective
  double gap = 0.0;          // free_energy - value
  double bound = 0.0;        // 3 n^{2/3} ||J||_F^{2/3}
  bool trivial_regime = false;
  double epsilon = 0.0;
  int ell = 0;
  double rounded_value = 0.0;
  double argmax_value = 0.0;
  ConditioningReport conditioning;
  ProductDistribution nu;
};

// Constructive mean-field witness: condition the exact Gibbs measure on a set
// chosen by the sweep at ell ~ (n ||J||_F)^{2/3} / log 2, round to products,
// and keep the better of the best conditional product and the point mass at
// the maximum-energy state. The gap to log Z is at most 3 n^{2/3}||J||_F^{2/3}.
inline WitnessReport pinned_meanfield_witness(const IsingModel& model) {
  validate_ising(model);
  WitnessReport rep;
  int n = model.n;
  double A = frobenius_interaction_norm(model);
  rep.bound = 3.0 * std::pow(double(n), 2.0 / 3.0) * std::pow(A, 2.0 / 3.0);
  rep.trivial_regime = rep.bound >= double(n) * std::log(2.0);
  if (A > 0.0) {
    rep.epsilon = std::pow(double(n) * A, -1.0 / 3.0);
    double raw = 1.0 / (rep.epsilon * rep.epsilon * std::log(2.0));
    rep.ell = int(std::min<long long>(std::max<long long>(llround(raw), 0), n - 2));
  }
  JointDistribution gibbs = exact_gibbs(model);
  rep.free_energy = exact_free_energy(model);
  EntropySource src(gibbs);
  if (n >= 2) {
    rep.conditioning = select_conditioning_set(src, rep.ell, 2);
    if (n <= 14)
      rep.conditioning.avg_cov_sq = conditional_covariance_stats(gibbs, rep.conditioning.set).avg_cov_sq;
  } else {
    rep.conditioning.met_bound = true;
    rep.conditioning.bound = std::numeric_limits<double>::infinity();
  }
  RoundedOutput rounded = round_to_products(src, rep.conditioning.set);
  Mrf mrf = ising_to_mrf(model);
  best_product(mrf, rounded);
  rep.rounded_value = rounded.candidates[std::size_t(rounded.best)].objective;

  EnergyArgmax am = max_energy(model);
  rep.argmax_value = am.value;
  if (rep.argmax_value > rep.rounded_value) {
    rep.value = rep.argmax_value;
    rep.nu.q = 2;
    rep.nu.marginals.assign(std::size_t(n), {0.0, 0.0});
    for (int i = 0; i < n; ++i) rep.nu.marginals[std::size_t(i)][am.argmax[std::size_t(i)]] = 1.0;
  } else {
    rep.value = rep.rounded_value;
    rep.nu = rounded.candidates[std::size_t(rounded.best)].nu;
  }
  rep.gap = rep.free_energy - rep.value;
  if (rep.gap > rep.bound + 1e-9)
    throw std::logic_error("pinned mean-field witness exceeded its guarantee");
  return rep;
}

}  // namespace gibbsrelax
