#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <limits>
#include <vector>

#include "gibbsrelax/common.hpp"
#include "gibbsrelax/rng.hpp"
#include "gibbsrelax/simplex.hpp"
#include "test_util.hpp"

using namespace gibbsrelax;

namespace {

// Solves the m x m system B z = rhs by Gaussian elimination with partial
// pivoting; false on (near-)singularity.
bool dense_solve(std::vector<std::vector<double>> B, std::vector<double> rhs,
                 std::vector<double>& z) {
  size_t m = B.size();
  for (size_t k = 0; k < m; ++k) {
    size_t p = k;
    for (size_t i = k + 1; i < m; ++i)
      if (std::abs(B[i][k]) > std::abs(B[p][k])) p = i;
    if (std::abs(B[p][k]) < 1e-10) return false;
    std::swap(B[p], B[k]);
    std::swap(rhs[p], rhs[k]);
    for (size_t i = k + 1; i < m; ++i) {
      double f = B[i][k] / B[k][k];
      if (f == 0.0) continue;
      for (size_t j = k; j < m; ++j) B[i][j] -= f * B[k][j];
      rhs[i] -= f * rhs[k];
    }
  }
  z.assign(m, 0.0);
  for (size_t k = m; k-- > 0;) {
    double s = rhs[k];
    for (size_t j = k + 1; j < m; ++j) s -= B[k][j] * z[j];
    z[k] = s / B[k][k];
  }
  return true;
}

// Best objective over all basic feasible solutions, by enumerating bases.
double brute_force_lp(const LpProblem& p, const std::vector<double>& c) {
  size_t m = p.A.size();
  int n = int(p.nvars);
  double best = -std::numeric_limits<double>::infinity();
  std::vector<int> cols = first_combination(int(m));
  do {
    std::vector<std::vector<double>> B(m, std::vector<double>(m));
    for (size_t i = 0; i < m; ++i)
      for (size_t k = 0; k < m; ++k) B[i][k] = p.A[i][size_t(cols[k])];
    std::vector<double> z;
    if (!dense_solve(B, p.b, z)) continue;
    bool ok = true;
    for (double v : z)
      if (v < -1e-9) ok = false;
    if (!ok) continue;
    double val = 0.0;
    for (size_t k = 0; k < m; ++k) val += c[size_t(cols[k])] * z[k];
    best = std::max(best, val);
  } while (next_combination(cols, n));
  return best;
}

}  // namespace

TEST_CASE("small LP with slack variables") {
  // max 3a + 2b subject to a + b <= 4, a + 3b <= 6.
  LpProblem p;
  p.nvars = 4;
  p.A = {{1, 1, 1, 0}, {1, 3, 0, 1}};
  p.b = {4, 6};
  LpResult r = lp_solve(p, {3, 2, 0, 0});
  REQUIRE(r.status == LpStatus::optimal);
  REQUIRE(r.value == Catch::Approx(12.0).margin(1e-9));
  REQUIRE(r.x[0] == Catch::Approx(4.0).margin(1e-9));
  REQUIRE(r.x[1] == Catch::Approx(0.0).margin(1e-9));
}

TEST_CASE("redundant rows are tolerated") {
  LpProblem p;
  p.nvars = 3;
  p.A = {{1, 1, 1}, {2, 2, 2}};
  p.b = {1, 2};
  LpResult r = lp_solve(p, {1, 2, 3});
  REQUIRE(r.status == LpStatus::optimal);
  REQUIRE(r.value == Catch::Approx(3.0).margin(1e-9));
}

TEST_CASE("negative right-hand sides are normalized") {
  LpProblem p;
  p.nvars = 2;
  p.A = {{-1, 0}, {0, 1}};
  p.b = {-2, 3};
  LpResult r = lp_solve(p, {1, 1});
  REQUIRE(r.status == LpStatus::optimal);
  REQUIRE(r.x[0] == Catch::Approx(2.0).margin(1e-9));
  REQUIRE(r.x[1] == Catch::Approx(3.0).margin(1e-9));
}

TEST_CASE("infeasible system") {
  LpProblem p;
  p.nvars = 2;
  p.A = {{1, 1}, {1, 1}};
  p.b = {1, 3};
  SimplexSolver s(p);
  REQUIRE_FALSE(s.feasible());
  REQUIRE(s.maximize({1, 0}).status == LpStatus::infeasible);
}

TEST_CASE("unbounded ray") {
  LpProblem p;
  p.nvars = 2;
  p.A = {{1, -1}};
  p.b = {0};
  LpResult r = lp_solve(p, {1, 0});
  REQUIRE(r.status == LpStatus::unbounded);
}

TEST_CASE("pivot budget exhaustion is reported") {
  LpProblem p;
  p.nvars = 4;
  p.A = {{1, 1, 1, 0}, {1, 3, 0, 1}};
  p.b = {4, 6};
  SimplexSolver s(p);
  LpResult r = s.maximize({3, 2, 0, 0}, 0);
  REQUIRE(r.status == LpStatus::iteration_limit);
}

TEST_CASE("input validation") {
  LpProblem p;
  p.nvars = 2;
  p.A = {{1, 1, 1}};
  p.b = {1};
  REQUIRE_THROWS_AS(SimplexSolver{p}, invalid_input_error);
  p.A = {{1, 1}};
  p.b = {1, 2};
  REQUIRE_THROWS_AS(SimplexSolver{p}, invalid_input_error);
  p.b = {1};
  SimplexSolver s(p);
  REQUIRE_THROWS_AS(s.maximize({1, 2, 3}), invalid_input_error);
}

TEST_CASE("random LPs against basis enumeration") {
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    Rng rng(seed + 4000);
    size_t n = 7;  // 6 structural + 1 slack for the bounding row
    LpProblem p;
    p.nvars = n;
    p.A.assign(4, std::vector<double>(n, 0.0));
    for (size_t i = 0; i < 3; ++i)
      for (size_t j = 0; j < 6; ++j) p.A[i][j] = rng.uniform(-1.0, 1.0);
    for (size_t j = 0; j < 6; ++j) p.A[3][j] = 1.0;
    p.A[3][6] = 1.0;
    // Right-hand side from a random nonnegative point, so the LP is feasible,
    // and a bounding row, so it is bounded.
    std::vector<double> x0(n, 0.0);
    double tot = 0.0;
    for (size_t j = 0; j < 6; ++j) {
      x0[j] = rng.uniform(0.0, 1.0);
      tot += x0[j];
    }
    x0[6] = 1.0;
    p.b.assign(4, 0.0);
    for (size_t i = 0; i < 3; ++i) {
      double s = 0.0;
      for (size_t j = 0; j < n; ++j) s += p.A[i][j] * x0[j];
      p.b[i] = s;
    }
    p.b[3] = tot + 1.0;
    std::vector<double> c(n, 0.0);
    for (size_t j = 0; j < 6; ++j) c[j] = rng.uniform(-2.0, 2.0);

    LpResult r = lp_solve(p, c);
    REQUIRE(r.status == LpStatus::optimal);
    REQUIRE(r.value == Catch::Approx(brute_force_lp(p, c)).margin(1e-6));
    // The returned point satisfies the constraints.
    for (size_t i = 0; i < 4; ++i) {
      double s = 0.0;
      for (size_t j = 0; j < n; ++j) s += p.A[i][j] * r.x[j];
      REQUIRE(s == Catch::Approx(p.b[i]).margin(1e-7));
    }
    for (double v : r.x) REQUIRE(v >= -1e-9);
  }
}

TEST_CASE("warm restart after a right-hand side change") {
  Rng rng(9001);
  size_t n = 7;
  LpProblem p;
  p.nvars = n;
  p.A.assign(4, std::vector<double>(n, 0.0));
  for (size_t i = 0; i < 3; ++i)
    for (size_t j = 0; j < 6; ++j) p.A[i][j] = rng.uniform(-1.0, 1.0);
  for (size_t j = 0; j < 7; ++j) p.A[3][j] = 1.0;
  auto rhs_from = [&](std::vector<double> x0) {
    std::vector<double> b(4, 0.0);
    for (size_t i = 0; i < 4; ++i)
      for (size_t j = 0; j < n; ++j) b[i] += p.A[i][j] * x0[j];
    return b;
  };
  std::vector<double> x0(n, 0.5);
  p.b = rhs_from(x0);
  std::vector<double> c = {1.0, -0.5, 0.3, 0.8, -1.2, 0.4, 0.0};

  SimplexSolver warm(p);
  LpResult first = warm.maximize(c);
  REQUIRE(first.status == LpStatus::optimal);

  for (int t = 0; t < 10; ++t) {
    std::vector<double> x1(n);
    for (double& v : x1) v = rng.uniform(0.1, 1.0);
    std::vector<double> b_new = rhs_from(x1);
    LpResult wr = warm.reoptimize(c, b_new);
    LpProblem p2 = p;
    p2.b = b_new;
    LpResult fresh = lp_solve(p2, c);
    REQUIRE(wr.status == LpStatus::optimal);
    REQUIRE(wr.value == Catch::Approx(fresh.value).margin(1e-7));
  }
}

TEST_CASE("duals certify optimality") {
  Rng rng(5150);
  size_t n = 7;
  LpProblem p;
  p.nvars = n;
  p.A.assign(4, std::vector<double>(n, 0.0));
  for (size_t i = 0; i < 3; ++i)
    for (size_t j = 0; j < 6; ++j) p.A[i][j] = rng.uniform(-1.0, 1.0);
  for (size_t j = 0; j < 7; ++j) p.A[3][j] = 1.0;
  std::vector<double> x0 = {0.2, 0.4, 0.1, 0.5, 0.3, 0.2, 0.3};
  p.b.assign(4, 0.0);
  for (size_t i = 0; i < 4; ++i)
    for (size_t j = 0; j < n; ++j) p.b[i] += p.A[i][j] * x0[j];
  std::vector<double> c = {0.7, -0.2, 1.1, 0.4, -0.9, 0.6, 0.0};

  SimplexSolver s(p);
  LpResult r = s.maximize(c);
  REQUIRE(r.status == LpStatus::optimal);
  std::vector<double> y;
  REQUIRE(s.row_duals(c, y));
  // Dual feasibility: every column prices out nonpositive at a maximum.
  for (size_t j = 0; j < n; ++j) {
    double rc = c[j];
    for (size_t i = 0; i < 4; ++i) rc -= y[i] * p.A[i][j];
    REQUIRE(rc <= 1e-7);
  }
  // Strong duality: y.b equals the optimal value.
  double yb = 0.0;
  for (size_t i = 0; i < 4; ++i) yb += y[i] * p.b[i];
  REQUIRE(yb == Catch::Approx(r.value).margin(1e-7));
  // Basic columns price to zero.
  for (int j : s.basic_columns()) {
    double rc = c[size_t(j)];
    for (size_t i = 0; i < 4; ++i) rc -= y[i] * p.A[i][size_t(j)];
    REQUIRE(rc == Catch::Approx(0.0).margin(1e-8));
  }
}

TEST_CASE("a support hint reproduces the cold-start answer") {
  Rng rng(77);
  size_t n = 7;
  LpProblem p;
  p.nvars = n;
  p.A.assign(4, std::vector<double>(n, 0.0));
  for (size_t i = 0; i < 3; ++i)
    for (size_t j = 0; j < 6; ++j) p.A[i][j] = rng.uniform(-1.0, 1.0);
  for (size_t j = 0; j < 7; ++j) p.A[3][j] = 1.0;
  std::vector<double> x0 = {0.3, 0.1, 0.6, 0.2, 0.5, 0.4, 0.2};
  p.b.assign(4, 0.0);
  for (size_t i = 0; i < 4; ++i)
    for (size_t j = 0; j < n; ++j) p.b[i] += p.A[i][j] * x0[j];
  std::vector<double> c = {0.4, 0.9, -0.3, 0.2, 0.8, -0.6, 0.0};

  LpResult cold = lp_solve(p, c);
  REQUIRE(cold.status == LpStatus::optimal);

  std::vector<std::size_t> hint = {0, 1, 2, 3, 4, 5, 6};  // support of x0
  SimplexSolver hinted(p, hint);
  REQUIRE(hinted.feasible());
  LpResult hr = hinted.maximize(c);
  REQUIRE(hr.status == LpStatus::optimal);
  REQUIRE(hr.value == Catch::Approx(cold.value).margin(1e-7));
}
