#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "gibbsrelax/spinglass.hpp"
#include "test_util.hpp"

using namespace gibbsrelax;

TEST_CASE("replica-symmetric prediction") {
  REQUIRE(rs_prediction(0.0) == Catch::Approx(std::log(2.0)).margin(1e-15));
  REQUIRE(rs_prediction(0.4) == Catch::Approx(std::log(2.0) + 0.04).margin(1e-15));
  REQUIRE(rs_prediction(1.0) == Catch::Approx(std::log(2.0) + 0.25).margin(1e-15));
}

TEST_CASE("spectral norm of simple matrices") {
  REQUIRE(spectral_norm(std::vector<std::vector<double>>{}) == 0.0);
  REQUIRE(spectral_norm({{0.0, 0.0}, {0.0, 0.0}}) == 0.0);
  REQUIRE(spectral_norm({{3.0, 0.0, 0.0}, {0.0, -5.0, 0.0}, {0.0, 0.0, 1.0}}) ==
          Catch::Approx(5.0).epsilon(1e-7));
  REQUIRE(spectral_norm({{0.0, 1.0}, {1.0, 0.0}}) == Catch::Approx(1.0).epsilon(1e-7));
  REQUIRE_THROWS_AS(spectral_norm({{0.0, 1.0}}), invalid_input_error);
  REQUIRE_THROWS_AS(spectral_norm({{0.0, 1.0}, {2.0, 0.0}}), invalid_input_error);
}

TEST_CASE("spectral norm matches a dense eigensolve") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    IsingModel m = testutil::random_ising(8, 1.0, seed + 30);
    double want = 0.0;
    for (double ev : testutil::jacobi_eigenvalues(m.J)) want = std::max(want, std::abs(ev));
    double got = spectral_norm(m.J, 1e-10);
    REQUIRE(got == Catch::Approx(want).epsilon(1e-6));
    // Absolute homogeneity.
    std::vector<std::vector<double>> scaled = m.J;
    for (auto& row : scaled)
      for (double& x : row) x *= -2.5;
    REQUIRE(spectral_norm(scaled, 1e-10) == Catch::Approx(2.5 * got).epsilon(1e-6));
  }
}

TEST_CASE("infinite-temperature trials are exactly uniform") {
  SkExperimentResult res = sk_experiment(6, 0.0, 3, NoiseKind::gaussian, 5);
  REQUIRE(res.trials == 3);
  for (double f : res.f_over_n) REQUIRE(f == Catch::Approx(std::log(2.0)).margin(1e-12));
  for (double s : res.spectral_norms) REQUIRE(s == 0.0);
  REQUIRE(res.mean_f == Catch::Approx(std::log(2.0)).margin(1e-12));
  REQUIRE(res.std_f == Catch::Approx(0.0).margin(1e-12));
}

TEST_CASE("experiments are reproducible") {
  SkExperimentResult a = sk_experiment(7, 0.8, 4, NoiseKind::rademacher, 99);
  SkExperimentResult b = sk_experiment(7, 0.8, 4, NoiseKind::rademacher, 99);
  REQUIRE(a.f_over_n == b.f_over_n);
  REQUIRE(a.mf_over_n == b.mf_over_n);
  REQUIRE(a.spectral_norms == b.spectral_norms);
  SkExperimentResult c = sk_experiment(7, 0.8, 4, NoiseKind::rademacher, 100);
  REQUIRE(a.f_over_n != c.f_over_n);
}

TEST_CASE("free energy dominates the mean-field optimum") {
  SkExperimentResult res = sk_experiment(8, 1.0, 5, NoiseKind::gaussian, 17);
  for (int t = 0; t < res.trials; ++t)
    REQUIRE(res.f_over_n[size_t(t)] >= res.mf_over_n[size_t(t)] - 1e-9);
}

TEST_CASE("sandwich mode brackets the exact value") {
  SkExperimentResult sw = sk_experiment(6, 0.5, 2, NoiseKind::gaussian, 41, SkMethod::sandwich);
  SkExperimentResult ex = sk_experiment(6, 0.5, 2, NoiseKind::gaussian, 41, SkMethod::exact);
  REQUIRE(sw.lower_over_n.size() == 2);
  REQUIRE(sw.upper_over_n.size() == 2);
  for (int t = 0; t < 2; ++t) {
    INFO("trial " << t);
    REQUIRE(sw.lower_over_n[size_t(t)] <= ex.f_over_n[size_t(t)] + 1e-7);
    REQUIRE(sw.upper_over_n[size_t(t)] >= ex.f_over_n[size_t(t)] - 1e-7);
    REQUIRE(sw.f_over_n[size_t(t)] ==
            Catch::Approx(0.5 * (sw.lower_over_n[size_t(t)] + sw.upper_over_n[size_t(t)]))
                .margin(1e-12));
  }
}

TEST_CASE("experiment input checks") {
  REQUIRE_THROWS_AS(sk_experiment(1, 1.0, 1), invalid_input_error);
  REQUIRE_THROWS_AS(sk_experiment(4, 1.0, 0), invalid_input_error);
  REQUIRE_THROWS_AS(sk_experiment(21, 1.0, 1), size_limit_error);
}

TEST_CASE("decoupled spins have no conditional covariance at any budget") {
  IsingModel z = testutil::random_ising(5, 0.0, 0);
  KappaSweepResult res = kappa_sweep(z, 3);
  REQUIRE(res.values.size() == 4);
  for (double v : res.values) REQUIRE(v == Catch::Approx(0.0).margin(1e-12));
  for (double v : res.scaled) REQUIRE(v == Catch::Approx(0.0).margin(1e-12));
}

TEST_CASE("one pin decouples the deep ferromagnet") {
  IsingModel cw = curie_weiss(6, 10.0);
  KappaSweepResult res = kappa_sweep(cw, 1);
  REQUIRE(res.values[0] == Catch::Approx(1.0).margin(1e-6));
  REQUIRE(res.values[1] <= 1e-6);
  REQUIRE(res.argmin_sets[1].size() == 1);
}

TEST_CASE("the sweep is nonincreasing and consistent") {
  IsingModel m = testutil::random_ising(7, 1.2, 8, 0.3);
  KappaSweepResult res = kappa_sweep(m, 3);
  REQUIRE(res.t_max == 3);
  for (int t = 0; t + 1 < int(res.values.size()); ++t)
    REQUIRE(res.values[size_t(t) + 1] <= res.values[size_t(t)] + 1e-15);
  for (int t = 0; t < int(res.values.size()); ++t) {
    REQUIRE(int(res.argmin_sets[size_t(t)].size()) <= t);
    REQUIRE(res.scaled[size_t(t)] ==
            Catch::Approx(std::sqrt(double(t)) * res.values[size_t(t)]).margin(1e-15));
  }
}

TEST_CASE("budgets clamp at the vertex count") {
  IsingModel m = testutil::random_ising(3, 1.0, 2);
  KappaSweepResult res = kappa_sweep(m, 5);
  REQUIRE(res.values.size() == 4);
  // Conditioning on everything leaves no pairs.
  REQUIRE(res.values[3] == 0.0);
}

TEST_CASE("sweep input checks") {
  IsingModel big = testutil::random_ising(15, 0.0, 0);
  REQUIRE_THROWS_AS(kappa_sweep(big, 1), size_limit_error);
  IsingModel m = testutil::random_ising(8, 1.0, 0);
  REQUIRE_THROWS_AS(kappa_sweep(m, 6), invalid_input_error);
  REQUIRE_THROWS_AS(kappa_sweep(m, -1), invalid_input_error);
}
