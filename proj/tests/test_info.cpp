#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "gibbsrelax/info.hpp"
#include "gibbsrelax/model.hpp"
#include "test_util.hpp"

using namespace gibbsrelax;

namespace {

// Joint over {0,1,2,3} that factorizes across the blocks {0,1} x {2,3}.
JointDistribution two_block_product(std::uint64_t seed) {
  JointDistribution a = testutil::random_joint(2, 2, seed);
  JointDistribution b = testutil::random_joint(2, 2, seed + 1000);
  JointDistribution d;
  d.q = 2;
  d.scope = {0, 1, 2, 3};
  d.probs.resize(16);
  for (size_t i = 0; i < 4; ++i)
    for (size_t j = 0; j < 4; ++j) d.probs[i * 4 + j] = a.probs[i] * b.probs[j];
  return d;
}

JointDistribution product_of_marginals(const JointDistribution& d, int i, int j) {
  JointDistribution pi = marginal(d, {i});
  JointDistribution pj = marginal(d, {j});
  JointDistribution out;
  out.q = 2;
  out.scope = {i, j};
  out.probs = {pi.probs[0] * pj.probs[0], pi.probs[0] * pj.probs[1],
               pi.probs[1] * pj.probs[0], pi.probs[1] * pj.probs[1]};
  return out;
}

}  // namespace

TEST_CASE("entropy examples") {
  REQUIRE(entropy(std::vector<double>{1.0, 0.0, 0.0}) == 0.0);
  REQUIRE(entropy(std::vector<double>{0.25, 0.25, 0.25, 0.25}) ==
          Catch::Approx(std::log(4.0)).margin(1e-14));
  REQUIRE(entropy(std::vector<double>{0.5, 0.25, 0.25}) ==
          Catch::Approx(1.5 * std::log(2.0)).margin(1e-14));
  REQUIRE_THROWS_AS(entropy(std::vector<double>{1.5, -0.5}), invalid_input_error);
}

TEST_CASE("binary entropy") {
  REQUIRE(binary_entropy(0.0) == 0.0);
  REQUIRE(binary_entropy(1.0) == 0.0);
  REQUIRE(binary_entropy(0.5) == Catch::Approx(std::log(2.0)).margin(1e-14));
  for (double p : {0.1, 0.25, 0.4}) {
    REQUIRE(binary_entropy(p) == Catch::Approx(binary_entropy(1.0 - p)).margin(1e-14));
    REQUIRE(binary_entropy(p) == Catch::Approx(entropy(std::vector<double>{p, 1.0 - p})).margin(1e-14));
  }
  REQUIRE_THROWS_AS(binary_entropy(-0.1), invalid_input_error);
  REQUIRE_THROWS_AS(binary_entropy(1.1), invalid_input_error);
}

TEST_CASE("KL examples") {
  std::vector<double> u = {0.5, 0.5};
  REQUIRE(kl(u, u) == 0.0);
  REQUIRE(kl({1.0, 0.0}, u) == Catch::Approx(std::log(2.0)).margin(1e-14));
  REQUIRE(std::isinf(kl({0.5, 0.5}, {1.0, 0.0})));
  std::vector<double> p = {0.8, 0.2}, q = {0.3, 0.7};
  REQUIRE(kl(p, q) != Catch::Approx(kl(q, p)).margin(1e-6));
  REQUIRE_THROWS_AS(kl(p, std::vector<double>{1.0}), invalid_input_error);
}

TEST_CASE("TV examples") {
  REQUIRE(tv({1.0, 0.0}, {0.0, 1.0}) == Catch::Approx(1.0).margin(1e-14));
  REQUIRE(tv({0.7, 0.3}, {0.5, 0.5}) == Catch::Approx(0.2).margin(1e-14));
  REQUIRE(tv({0.25, 0.75}, {0.25, 0.75}) == 0.0);
}

TEST_CASE("Pinsker inequality on random pairs") {
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    JointDistribution p = testutil::random_joint(3, 2, seed);
    JointDistribution q = testutil::random_joint(3, 2, seed + 5000);
    double d = tv(p, q);
    REQUIRE(kl(p.probs, q.probs) >= 2.0 * d * d - 1e-12);
  }
}

TEST_CASE("spin covariance equals twice the TV to the product") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    JointDistribution d = testutil::random_joint(4, 2, seed);
    for (int i = 0; i < 4; ++i)
      for (int j = i + 1; j < 4; ++j) {
        double c = covariance(d, i, j);
        double t = tv(marginal(d, {i, j}), product_of_marginals(d, i, j));
        REQUIRE(std::abs(c) == Catch::Approx(2.0 * t).margin(1e-12));
      }
  }
}

TEST_CASE("covariance is bounded by sqrt(2 I)") {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    JointDistribution d = testutil::random_joint(4, 2, seed + 300);
    for (int i = 0; i < 4; ++i)
      for (int j = i + 1; j < 4; ++j) {
        double mi = multivariate_mi(d, {i, j});
        REQUIRE(std::abs(covariance(d, i, j)) <= std::sqrt(2.0 * mi) + 1e-9);
      }
  }
}

TEST_CASE("expectation gap is bounded by 2 M TV") {
  Rng rng(77);
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    JointDistribution p = testutil::random_joint(3, 2, seed + 900);
    JointDistribution q = testutil::random_joint(3, 2, seed + 1800);
    std::vector<double> f(8);
    double big = 0.0;
    for (double& v : f) {
      v = rng.uniform(-3.0, 3.0);
      big = std::max(big, std::abs(v));
    }
    double ep = 0.0, eq = 0.0;
    for (size_t i = 0; i < 8; ++i) {
      ep += p.probs[i] * f[i];
      eq += q.probs[i] * f[i];
    }
    REQUIRE(std::abs(ep - eq) <= 2.0 * big * tv(p, q) + 1e-12);
  }
}

TEST_CASE("conditional entropy") {
  JointDistribution d = testutil::random_joint(4, 2, 10);
  // Conditioning cannot increase entropy.
  REQUIRE(conditional_entropy(d, {0}, {1, 2}) <= entropy(marginal(d, {0})) + 1e-12);
  REQUIRE(conditional_entropy(d, {0, 3}, {1}) >= -1e-12);
  // A variable carries no information about itself.
  REQUIRE(conditional_entropy(d, {1}, {1, 2}) == Catch::Approx(0.0).margin(1e-12));
  // Chain rule: H(0,1) = H(1) + H(0 | 1).
  REQUIRE(entropy(marginal(d, {0, 1})) ==
          Catch::Approx(entropy(marginal(d, {1})) + conditional_entropy(d, {0}, {1})).margin(1e-12));
}

TEST_CASE("pairwise mutual information") {
  JointDistribution prod = two_block_product(4);
  REQUIRE(multivariate_mi(prod, {0, 2}) == Catch::Approx(0.0).margin(1e-12));
  REQUIRE(multivariate_mi(prod, {1, 3}) == Catch::Approx(0.0).margin(1e-12));
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    JointDistribution d = testutil::random_joint(3, 2, seed + 50);
    // I(X;Y) >= 0 and symmetric in its definition through entropies.
    double i01 = multivariate_mi(d, {0, 1});
    REQUIRE(i01 >= -1e-12);
    double want = entropy(marginal(d, {0})) + entropy(marginal(d, {1})) - entropy(marginal(d, {0, 1}));
    REQUIRE(i01 == Catch::Approx(want).margin(1e-12));
    // Conditional MI from the entropy identity.
    double i01_2 = multivariate_mi(d, {0, 1}, {2});
    double want_c = conditional_entropy(d, {0}, {2}) + conditional_entropy(d, {1}, {2}) -
                    conditional_entropy(d, {0, 1}, {2});
    REQUIRE(i01_2 == Catch::Approx(want_c).margin(1e-12));
    REQUIRE(i01_2 >= -1e-12);
  }
}

TEST_CASE("triple information identity") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    JointDistribution d = testutil::random_joint(3, 2, seed + 200);
    double i3 = multivariate_mi(d, {0, 1, 2});
    double want = multivariate_mi(d, {0, 1}) - multivariate_mi(d, {0, 1}, {2});
    REQUIRE(i3 == Catch::Approx(want).margin(1e-11));
  }
}

TEST_CASE("total correlation is a KL to the product") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    JointDistribution d = testutil::random_joint(3, 2, seed + 400);
    JointDistribution pm;
    pm.q = 2;
    pm.scope = {0, 1, 2};
    pm.probs.assign(8, 1.0);
    for (int v = 0; v < 3; ++v) {
      JointDistribution mv = marginal(d, {v});
      for (size_t i = 0; i < 8; ++i) pm.probs[i] *= mv.probs[(i >> (2 - v)) & 1];
    }
    REQUIRE(total_correlation(d, {0, 1, 2}) == Catch::Approx(kl(d, pm)).margin(1e-11));
  }
}

TEST_CASE("total correlation of a product is zero") {
  JointDistribution prod = two_block_product(8);
  REQUIRE(total_correlation(prod, {0, 1, 2, 3}) ==
          Catch::Approx(total_correlation(prod, {0, 1}) + total_correlation(prod, {2, 3}))
              .margin(1e-12));
  JointDistribution u;
  u.q = 2;
  u.scope = {0, 1, 2};
  u.probs.assign(8, 0.125);
  REQUIRE(total_correlation(u, {0, 1, 2}) == Catch::Approx(0.0).margin(1e-14));
}

TEST_CASE("overlap with the conditioning set drops out") {
  JointDistribution d = testutil::random_joint(4, 2, 600);
  double with_overlap = total_correlation(d, {0, 1, 2}, {2, 3});
  double without = total_correlation(d, {0, 1}, {2, 3});
  REQUIRE(with_overlap == Catch::Approx(without).margin(1e-11));
}

TEST_CASE("total correlation grows with the set") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    JointDistribution d = testutil::random_joint(4, 2, seed + 700);
    REQUIRE(total_correlation(d, {0, 1, 2}) >= total_correlation(d, {0, 1}) - 1e-12);
    REQUIRE(total_correlation(d, {0, 1, 2, 3}) >= total_correlation(d, {0, 1, 2}) - 1e-12);
  }
}

TEST_CASE("correlation-information identity on random joints") {
  for (std::uint64_t seed = 0; seed < 25; ++seed) {
    JointDistribution d = testutil::random_joint(5, 2, seed + 800);
    for (int k : {2, 3, 4}) {
      IdentityCheck c = corr_info_identity_check(d, k);
      REQUIRE(c.lhs == Catch::Approx(c.rhs).margin(1e-9));
    }
    IdentityCheck cc = corr_info_identity_check(d, 3, {4});
    REQUIRE(cc.lhs == Catch::Approx(cc.rhs).margin(1e-9));
  }
  JointDistribution d3 = testutil::random_joint(4, 3, 900);
  IdentityCheck c3 = corr_info_identity_check(d3, 3);
  REQUIRE(c3.lhs == Catch::Approx(c3.rhs).margin(1e-9));
}

TEST_CASE("identity input validation") {
  JointDistribution d = testutil::random_joint(3, 2, 1);
  REQUIRE_THROWS_AS(corr_info_identity_check(d, 1), invalid_input_error);
  REQUIRE_THROWS_AS(corr_info_identity_check(d, 4), invalid_input_error);
  REQUIRE_THROWS_AS(multivariate_mi(d, {}), invalid_input_error);
}
