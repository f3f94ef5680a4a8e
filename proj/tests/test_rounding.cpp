#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "gibbsrelax/rounding.hpp"
#include "test_util.hpp"

using namespace gibbsrelax;

namespace {

// All n spins equal, each sign with probability 1/2.
JointDistribution all_equal(int n) {
  JointDistribution d;
  d.q = 2;
  d.scope.resize(size_t(n));
  for (int i = 0; i < n; ++i) d.scope[size_t(i)] = i;
  d.probs.assign(std::uint64_t(1) << n, 0.0);
  d.probs.front() = 0.5;
  d.probs.back() = 0.5;
  return d;
}

JointDistribution independent(int n, std::uint64_t seed) {
  Rng rng(seed);
  JointDistribution d;
  d.q = 2;
  d.scope.resize(size_t(n));
  for (int i = 0; i < n; ++i) d.scope[size_t(i)] = i;
  std::vector<double> p1(static_cast<std::size_t>(n));
  for (double& v : p1) v = rng.uniform(0.1, 0.9);
  d.probs.assign(std::uint64_t(1) << n, 0.0);
  Assignment x;
  for (std::uint64_t i = 0; i < d.probs.size(); ++i) {
    index_to_assignment(i, n, 2, x);
    double p = 1.0;
    for (int v = 0; v < n; ++v) p *= (x[size_t(v)] == 0) ? p1[size_t(v)] : 1.0 - p1[size_t(v)];
    d.probs[i] = p;
  }
  return d;
}

}  // namespace

TEST_CASE("average conditional total correlation matches the direct sum") {
  JointDistribution d = testutil::random_joint(6, 2, 44);
  EntropySource src(d);
  for (const auto& S : {std::vector<int>{}, {2}, {0, 5}}) {
    for (int k : {2, 3}) {
      std::vector<int> comp;
      for (int v = 0; v < 6; ++v)
        if (!std::binary_search(S.begin(), S.end(), v)) comp.push_back(v);
      double direct = 0.0;
      int cnt = 0;
      std::vector<int> c = first_combination(k);
      do {
        std::vector<int> F;
        for (int idx : c) F.push_back(comp[size_t(idx)]);
        direct += total_correlation(d, F, S);
        ++cnt;
      } while (next_combination(c, int(comp.size())));
      direct /= cnt;
      REQUIRE(avg_conditional_total_correlation(src, S, k) ==
              Catch::Approx(direct).margin(1e-11));
    }
  }
}

TEST_CASE("averaging over all subsets never exceeds the off-set average") {
  JointDistribution d = exact_gibbs(testutil::random_ising(6, 1.0, 2, 0.2));
  EntropySource src(d);
  for (const auto& S : {std::vector<int>{}, {1}, {0, 4}}) {
    IdentityCheck chk = conditioning_average_check(src, S, 2);
    REQUIRE(chk.lhs <= chk.rhs + 1e-12);
  }
  IdentityCheck empty_set = conditioning_average_check(src, {}, 2);
  REQUIRE(empty_set.lhs == Catch::Approx(empty_set.rhs).margin(1e-12));
}

TEST_CASE("independent spins need no conditioning") {
  JointDistribution d = independent(6, 5);
  ConditioningReport rep = select_conditioning_set(d, 3, 2);
  REQUIRE(rep.t == 0);
  REQUIRE(rep.set.empty());
  REQUIRE(rep.met_bound);
  REQUIRE(rep.avg_total_correlation == Catch::Approx(0.0).margin(1e-10));
  REQUIRE(rep.avg_cov_sq == Catch::Approx(0.0).margin(1e-10));
  REQUIRE(rep.weights == std::vector<double>{1.0});
}

TEST_CASE("perfectly aligned spins need one pin") {
  JointDistribution d = all_equal(8);
  // Level 0 average is log 2 per pair, above 4 log 2 / 5; pinning any single
  // vertex makes the rest deterministic.
  ConditioningReport rep = select_conditioning_set(d, 5, 2);
  REQUIRE(rep.t == 1);
  REQUIRE(rep.met_bound);
  REQUIRE(rep.avg_total_correlation == Catch::Approx(0.0).margin(1e-10));
  REQUIRE(rep.bound == Catch::Approx(4.0 * std::log(2.0) / 5.0).margin(1e-12));
  REQUIRE(rep.weights.size() == 2);
}

TEST_CASE("sampled sweep levels") {
  JointDistribution d = all_equal(8);
  EntropySource src(d);
  ConditioningReport rep =
      select_conditioning_set(src, 5, 2, ConditioningMode::sweep, 7, 1.0, 50);
  REQUIRE(rep.sampled);
  REQUIRE(rep.samples == 50);
  REQUIRE(rep.t == 1);
  REQUIRE(rep.met_bound);
}

TEST_CASE("greedy conditioning") {
  JointDistribution d = all_equal(8);
  ConditioningReport rep = select_conditioning_set(d, 5, 2, ConditioningMode::greedy);
  REQUIRE(rep.mode == ConditioningMode::greedy);
  REQUIRE(rep.t == 1);
  REQUIRE(rep.met_bound);
  ConditioningReport none = select_conditioning_set(independent(6, 9), 3, 2,
                                                    ConditioningMode::greedy);
  REQUIRE(none.t == 0);
}

TEST_CASE("conditioning input checks") {
  JointDistribution d = testutil::random_joint(5, 2, 3);
  EntropySource src(d);
  REQUIRE_THROWS_AS(select_conditioning_set(src, 2, 1), invalid_input_error);
  REQUIRE_THROWS_AS(select_conditioning_set(src, 4, 2), invalid_input_error);
  LocalFamily f = embed_distribution(d, 2);
  REQUIRE_THROWS_AS(select_conditioning_set(f, 1, 2), invalid_input_error);
}

TEST_CASE("covariance statistics on and off the product case") {
  CovarianceStats zero = conditional_covariance_stats(independent(5, 7), {});
  REQUIRE(zero.avg_abs_cov == Catch::Approx(0.0).margin(1e-12));
  REQUIRE(zero.avg_cov_sq == Catch::Approx(0.0).margin(1e-12));

  CovarianceStats one = conditional_covariance_stats(all_equal(2), {});
  REQUIRE(one.avg_abs_cov == Catch::Approx(1.0).margin(1e-12));
  REQUIRE(one.avg_cov_sq == Catch::Approx(1.0).margin(1e-12));

  // Conditioning on the aligned block kills every pair.
  CovarianceStats pinned = conditional_covariance_stats(all_equal(5), {0});
  REQUIRE(pinned.avg_cov_sq == Catch::Approx(0.0).margin(1e-12));

  JointDistribution q3 = testutil::random_joint(3, 3, 1);
  REQUIRE_THROWS_AS(conditional_covariance_stats(q3, {}), invalid_input_error);
  JointDistribution big;
  big.q = 2;
  big.scope.resize(15);
  for (int i = 0; i < 15; ++i) big.scope[size_t(i)] = i;
  big.probs.assign(std::uint64_t(1) << 15, 1.0 / double(std::uint64_t(1) << 15));
  REQUIRE_THROWS_AS(conditional_covariance_stats(big, {}), size_limit_error);
}

TEST_CASE("covariances square below twice the selected correlation level") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    JointDistribution g = exact_gibbs(testutil::random_ising(7, 0.9, seed, 0.2));
    ConditioningReport rep = select_conditioning_set(g, 3, 2);
    REQUIRE_FALSE(std::isnan(rep.avg_cov_sq));
    REQUIRE(rep.avg_cov_sq <= 2.0 * rep.avg_total_correlation + 1e-9);
  }
}

TEST_CASE("rounded branches carry the exact conditional marginals") {
  JointDistribution g = exact_gibbs(testutil::random_ising(6, 1.0, 11, 0.3));
  std::vector<int> S = {1, 3};
  RoundedOutput out = round_to_products(g, S);
  REQUIRE(out.candidates.size() == 4);
  REQUIRE(out.skipped == 0);
  JointDistribution pS = marginal(g, S);
  Assignment x;
  for (const RoundedCandidate& cand : out.candidates) {
    std::uint64_t is = assignment_to_index(cand.x_S, 2);
    REQUIRE(cand.weight == Catch::Approx(pS.probs[is]).margin(1e-12));
    // Pinned vertices are point masses.
    REQUIRE(cand.nu.marginals[1][cand.x_S[0]] == 1.0);
    REQUIRE(cand.nu.marginals[3][cand.x_S[1]] == 1.0);
    for (int j : {0, 2, 4, 5}) {
      double mass[2] = {0.0, 0.0};
      for (std::uint64_t i = 0; i < g.probs.size(); ++i) {
        index_to_assignment(i, 6, 2, x);
        if (x[1] == cand.x_S[0] && x[3] == cand.x_S[1]) mass[x[size_t(j)]] += g.probs[i];
      }
      double tot = mass[0] + mass[1];
      REQUIRE(cand.nu.marginals[size_t(j)][0] == Catch::Approx(mass[0] / tot).margin(1e-9));
      REQUIRE(cand.nu.marginals[size_t(j)][1] == Catch::Approx(mass[1] / tot).margin(1e-9));
    }
  }
}

TEST_CASE("zero-probability branches are skipped") {
  RoundedOutput out = round_to_products(all_equal(4), {0, 1});
  REQUIRE(out.candidates.size() == 2);
  REQUIRE(out.skipped == 2);
}

TEST_CASE("the best branch beats the entropy-corrected mixture") {
  IsingModel m = testutil::random_ising(6, 1.1, 13, 0.2);
  Mrf mrf = ising_to_mrf(m);
  JointDistribution g = exact_gibbs(m);
  double f = exact_free_energy(m);
  for (const auto& S : {std::vector<int>{}, {2}, {0, 4}}) {
    RoundedOutput out = round_to_products(g, S);
    best_product(mrf, out);
    REQUIRE(out.best >= 0);
    double best_obj = out.candidates[size_t(out.best)].objective;
    double hS = S.empty() ? 0.0 : entropy(marginal(g, S));
    // The mixture value is a product-mixture lower bound on log Z; dropping
    // the branch entropy keeps the best branch within H(X_S) of it.
    REQUIRE(out.mixture_value <= f + 1e-9);
    REQUIRE(best_obj >= out.mixture_value - hS - 1e-9);
    REQUIRE(best_obj <= f + 1e-9);
  }
  RoundedOutput empty;
  REQUIRE_THROWS_AS(best_product(mrf, empty), invalid_input_error);
}

TEST_CASE("pipeline collapses on the trivial model") {
  IsingModel z = testutil::random_ising(5, 0.0, 0);
  PipelineReport rep = sa_meanfield(z, 2);
  double want = 5.0 * std::log(2.0);
  REQUIRE(rep.lower_bound == Catch::Approx(want).margin(1e-9));
  REQUIRE(rep.upper_bound >= want - 1e-9);
  REQUIRE(rep.upper_bound <= want + rep.eps + 1e-9);
  REQUIRE(rep.gap_bound == 0.0);
}

TEST_CASE("pipeline sandwich on small models") {
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    IsingModel m = testutil::random_ising(6, 0.8, seed + 80, 0.3);
    Mrf mrf = ising_to_mrf(m);
    PipelineReport rep = sa_meanfield(mrf, 2);
    double f = exact_free_energy(m);
    INFO("seed " << seed);
    REQUIRE(rep.lower_bound <= f + 1e-6);
    REQUIRE(rep.upper_bound >= f - 1e-6);
    REQUIRE(rep.upper_bound - f <= rep.upper_gap_bound + 1e-6);
    REQUIRE(f - rep.lower_bound <= rep.lower_gap_bound + 1e-6);
    REQUIRE(rep.gap_bound ==
            Catch::Approx(relaxation_gap_bound(6, 2, 2, frobenius_interaction_norm(mrf), 2))
                .margin(1e-12));
    REQUIRE(rep.rounded.best >= 0);
  }
}

TEST_CASE("pinned witness honors its guarantee") {
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    IsingModel m = testutil::random_ising(7, 0.6, seed + 120, 0.2);
    WitnessReport rep = pinned_meanfield_witness(m);
    REQUIRE(rep.free_energy == Catch::Approx(exact_free_energy(m)).margin(1e-10));
    REQUIRE(rep.value <= rep.free_energy + 1e-9);
    REQUIRE(rep.gap <= rep.bound + 1e-9);
    REQUIRE(rep.value >= rep.argmax_value - 1e-12);
    REQUIRE(rep.value >= rep.rounded_value - 1e-12);
    REQUIRE(rep.trivial_regime == (rep.bound >= 7.0 * std::log(2.0)));
    REQUIRE_NOTHROW(validate_product(rep.nu));
  }
}

TEST_CASE("pinned witness of the trivial model is exact") {
  IsingModel z = testutil::random_ising(6, 0.0, 0);
  WitnessReport rep = pinned_meanfield_witness(z);
  REQUIRE(rep.bound == 0.0);
  REQUIRE(rep.ell == 0);
  REQUIRE(rep.gap == Catch::Approx(0.0).margin(1e-10));
  REQUIRE(rep.value == Catch::Approx(6.0 * std::log(2.0)).margin(1e-10));
}

TEST_CASE("pinned witness under a strong field pins to the ground state") {
  IsingModel m = testutil::random_ising(5, 0.3, 1);
  m.h = {4.0, -4.0, 4.0, 4.0, -4.0};
  WitnessReport rep = pinned_meanfield_witness(m);
  REQUIRE(rep.gap <= rep.bound + 1e-9);
  REQUIRE(rep.value <= rep.free_energy + 1e-9);
}
