#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "gibbsrelax/sa_solver.hpp"
#include "test_util.hpp"

using namespace gibbsrelax;

TEST_CASE("relaxation gap bound formula") {
  // sqrt(4 log q / r) * k * n^{k/2} * frob / sqrt(k!)
  REQUIRE(relaxation_gap_bound(4, 2, 2, 1.0, 4) == Catch::Approx(4.709640090061898).margin(1e-9));
  REQUIRE(relaxation_gap_bound(5, 3, 2, 0.7, 1) == Catch::Approx(15.960312931010465).margin(1e-9));
  REQUIRE(relaxation_gap_bound(4, 2, 2, 2.0, 4) ==
          Catch::Approx(2.0 * relaxation_gap_bound(4, 2, 2, 1.0, 4)).margin(1e-12));
  REQUIRE(relaxation_gap_bound(4, 2, 2, 1.0, 1) ==
          Catch::Approx(2.0 * relaxation_gap_bound(4, 2, 2, 1.0, 4)).margin(1e-12));
  REQUIRE_THROWS_AS(relaxation_gap_bound(4, 2, 2, 1.0, 0), invalid_input_error);
}

TEST_CASE("zero model solves to n log 2 immediately") {
  IsingModel z = testutil::random_ising(5, 0.0, 0);
  SaSolveReport rep = solve_sa(z, 2);
  double want = 5.0 * std::log(2.0);
  REQUIRE(rep.upper_bound >= want - 1e-9);
  REQUIRE(rep.upper_bound <= want + rep.eps + 1e-9);
  REQUIRE(rep.converged);
  REQUIRE(validate_local_family(rep.family).ok);
}

TEST_CASE("the relaxation upper-bounds the free energy") {
  for (std::uint64_t seed = 0; seed < 12; ++seed) {
    IsingModel m = testutil::random_ising(6, 0.7, seed, 0.3);
    SaSolveReport rep = solve_sa(m, 2);
    double f = exact_free_energy(m);
    INFO("seed " << seed);
    REQUIRE(rep.upper_bound >= f - 1e-6);
    REQUIRE(rep.duality_gap >= 0.0);
    REQUIRE(int(rep.entropy_set.size()) <= 2);
    REQUIRE(rep.fw_iterations > 0);
    REQUIRE(rep.alternations >= 1);
    REQUIRE(rep.objective_trace.size() == size_t(rep.alternations));
  }
}

TEST_CASE("the returned family is feasible to tight tolerance") {
  IsingModel m = testutil::random_ising(6, 1.0, 3, 0.2);
  SaSolveReport rep = solve_sa(m, 2);
  ValidationReport v = validate_local_family(rep.family, 1e-7, 1e-6, 1e-6);
  REQUIRE(v.ok);
  REQUIRE(v.max_compat_deviation <= 1e-6);
  REQUIRE(v.max_sum_deviation <= 1e-6);
}

TEST_CASE("reported objective is recomputable from the family") {
  IsingModel m = testutil::random_ising(5, 0.8, 9, 0.4);
  Mrf mrf = ising_to_mrf(m);
  SaSolveReport rep = solve_sa(mrf, 2);
  double again = pseudo_expectation_energy(rep.family, mrf) +
                 pseudo_entropy(rep.family, rep.entropy_set);
  REQUIRE(rep.objective == Catch::Approx(again).margin(1e-9));
  // The family's objective cannot beat the certified bound.
  REQUIRE(rep.objective <= rep.upper_bound + 1e-6);
}

TEST_CASE("a deeper hierarchy level cannot loosen the bound") {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    IsingModel m = testutil::random_ising(6, 0.8, seed + 60, 0.2);
    SaSolveReport r2 = solve_sa(m, 2);
    SaSolveReport r3 = solve_sa(m, 3);
    REQUIRE(r3.upper_bound <= r2.upper_bound + 2.0 * r2.eps + 1e-6);
  }
}

TEST_CASE("strongly coupled pairs saturate at the true value") {
  // Two-spin chain as seen through the relaxation at n=3: the level covers
  // the whole model, so the bound should sit within eps of log Z.
  IsingModel m;
  m.n = 3;
  m.J = {{0.0, 1.5, 0.0}, {1.5, 0.0, -0.8}, {0.0, -0.8, 0.0}};
  m.h = {0.2, 0.0, -0.1};
  SaSolveReport rep = solve_sa(m, 1);
  double f = exact_free_energy(m);
  REQUIRE(rep.upper_bound >= f - 1e-6);
  REQUIRE(rep.upper_bound <= f + rep.eps + 1e-6);
}

TEST_CASE("midpoint concavity of the entropy surrogate") {
  JointDistribution d1 = testutil::random_joint(5, 2, 71);
  JointDistribution d2 = testutil::random_joint(5, 2, 72);
  LocalFamily f1 = embed_distribution(d1, 3);
  LocalFamily f2 = embed_distribution(d2, 3);
  LocalFamily mix = f1;
  for (size_t s = 0; s < mix.tables.size(); ++s)
    for (size_t c = 0; c < mix.tables[s].size(); ++c)
      mix.tables[s][c] = 0.5 * (f1.tables[s][c] + f2.tables[s][c]);
  for (const auto& S : {std::vector<int>{}, {0}, {1, 4}}) {
    double lhs = pseudo_entropy(mix, S);
    double rhs = 0.5 * (pseudo_entropy(f1, S) + pseudo_entropy(f2, S));
    REQUIRE(lhs >= rhs - 1e-10);
  }
}

TEST_CASE("the two model forms give the same answer") {
  IsingModel m = testutil::random_ising(5, 0.6, 17, 0.3);
  SaSolveReport a = solve_sa(m, 2);
  SaSolveReport b = solve_sa(ising_to_mrf(m), 2);
  REQUIRE(a.upper_bound == Catch::Approx(b.upper_bound).margin(1e-12));
  REQUIRE(a.entropy_set == b.entropy_set);
}

TEST_CASE("solver input limits") {
  IsingModel m = testutil::random_ising(4, 0.5, 1);
  REQUIRE_THROWS_AS(solve_sa(m, 0), invalid_input_error);
  IsingModel tiny = testutil::random_ising(2, 0.5, 1);
  REQUIRE_THROWS_AS(solve_sa(tiny, 2), invalid_input_error);
  SaOptions opt;
  opt.cell_cap = 10;
  REQUIRE_THROWS_AS(solve_sa(m, 2, opt), size_limit_error);
}
