#include <doctest.h>

#include <cmath>
#include <random>

#include "dense_tableau_oracle.hpp"
#include "mmot/lp.hpp"

using namespace mmot;

namespace {

StandardLP make_lp(const std::vector<std::vector<double>>& a, std::vector<double> b,
                   std::vector<double> c) {
  StandardLP lp;
  lp.objective = std::move(c);
  lp.rhs = std::move(b);
  lp.constraints.resize(static_cast<Eigen::Index>(a.size()), static_cast<Eigen::Index>(lp.objective.size()));
  std::vector<Eigen::Triplet<double>> trip;
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < a[i].size(); ++j) {
      if (a[i][j] != 0.0) trip.emplace_back(static_cast<int>(i), static_cast<int>(j), a[i][j]);
    }
  }
  lp.constraints.setFromTriplets(trip.begin(), trip.end());
  return lp;
}

// Rows: x11+x12, x21+x22, x11+x21, x12+x22.
std::vector<std::vector<double>> transport_2x2() {
  return {{1, 1, 0, 0}, {0, 0, 1, 1}, {1, 0, 1, 0}, {0, 1, 0, 1}};
}

void check_certificate(const StandardLP& lp, const LPSolution& sol) {
  REQUIRE(sol.status == LPStatus::optimal);
  const auto cert = certify(lp, sol);
  double rhs_norm = 0, cost_norm = 1;
  for (double v : lp.rhs) rhs_norm = std::max(rhs_norm, std::abs(v));
  for (double v : lp.objective) cost_norm = std::max(cost_norm, std::abs(v));
  CHECK(cert.primal_residual <= 1e-9 * (1 + rhs_norm));
  CHECK(cert.min_primal >= -1e-12);
  CHECK(cert.min_reduced_cost >= -1e-9 * cost_norm);
  CHECK(cert.relative_gap <= 1e-8);
}

// Feasible by construction (b = A x0 with x0 >= 0), bounded by positive costs
// unless `signed_costs`.
struct Random {
  std::vector<std::vector<double>> a;
  std::vector<double> b, c;
};

Random random_lp(std::mt19937_64& rng, bool signed_costs) {
  std::uniform_int_distribution<int> rows(1, 8), extra(0, 20), small(-3, 3);
  std::uniform_real_distribution<double> cost(signed_costs ? -2.0 : 0.0, 5.0), pos(0.0, 1.0);
  std::bernoulli_distribution zero(0.4);
  Random r;
  const int m = rows(rng), n = m + extra(rng);
  r.a.assign(m, std::vector<double>(n, 0.0));
  for (auto& row : r.a) for (auto& v : row) v = zero(rng) ? 0.0 : small(rng);
  // Occasionally duplicate a row to make the system rank deficient.
  if (m > 1 && zero(rng)) r.a[m - 1] = r.a[0];
  std::vector<double> x0(n);
  for (auto& v : x0) v = zero(rng) ? 0.0 : pos(rng);
  r.b.assign(m, 0.0);
  for (int i = 0; i < m; ++i) for (int j = 0; j < n; ++j) r.b[i] += r.a[i][j] * x0[j];
  for (auto& v : r.b) v = std::round(v * 1024) / 1024;  // keep b exact-ish; may break feasibility
  r.c.resize(n);
  for (auto& v : r.c) v = cost(rng);
  return r;
}

}  // namespace

TEST_CASE("2x2 transport polytope picks the antidiagonal") {
  const double big = 1e3;
  const auto lp = make_lp(transport_2x2(), {0.5, 0.5, 0.5, 0.5}, {big, 1, 1, big});
  const auto sol = solve_lp(lp);
  check_certificate(lp, sol);
  CHECK(sol.objective_value == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(sol.primal[0] == doctest::Approx(0.0).scale(1));
  CHECK(sol.primal[1] == doctest::Approx(0.5));
  CHECK(sol.primal[2] == doctest::Approx(0.5));
  CHECK(sol.primal[3] == doctest::Approx(0.0).scale(1));
  // One-parameter family x11 = t: cost = 2 big t + 2 (0.5 - t), minimised at t = 0.
  const auto o = oracle::solve(transport_2x2(), {0.5, 0.5, 0.5, 0.5}, {big, 1, 1, big});
  CHECK(o.value == doctest::Approx(1.0));
}

TEST_CASE("zero objective gives value zero at a feasible vertex") {
  const auto lp = make_lp(transport_2x2(), {0.3, 0.7, 0.6, 0.4}, {0, 0, 0, 0});
  const auto sol = solve_lp(lp);
  check_certificate(lp, sol);
  CHECK(sol.objective_value == 0.0);
}

TEST_CASE("unequal marginal sums are infeasible with a Farkas certificate") {
  const auto a = transport_2x2();
  const std::vector<double> b{0.5, 0.5, 0.7, 0.5};
  const auto lp = make_lp(a, b, {1, 1, 1, 1});
  const auto sol = solve_lp(lp);
  CHECK(sol.status == LPStatus::infeasible);
  REQUIRE(sol.certificate.size() == b.size());
  double yb = 0;
  for (std::size_t i = 0; i < b.size(); ++i) yb += sol.certificate[i] * b[i];
  CHECK(yb > 1e-9);
  for (std::size_t j = 0; j < 4; ++j) {
    double ya = 0;
    for (std::size_t i = 0; i < b.size(); ++i) ya += sol.certificate[i] * a[i][j];
    CHECK(ya <= 1e-9);
  }
}

TEST_CASE("unbounded problems return a descent ray") {
  const std::vector<std::vector<double>> a{{1, -1, 0}, {0, 0, 1}};
  const auto lp = make_lp(a, {0, 1}, {-1, 0, 1});
  const auto sol = solve_lp(lp);
  CHECK(sol.status == LPStatus::unbounded);
  REQUIRE(sol.certificate.size() == 3);
  double cd = 0;
  for (int j = 0; j < 3; ++j) {
    CHECK(sol.certificate[j] >= -1e-12);
    cd += lp.objective[j] * sol.certificate[j];
  }
  CHECK(cd < 0);
  for (const auto& row : a) {
    double ad = 0;
    for (int j = 0; j < 3; ++j) ad += row[j] * sol.certificate[j];
    CHECK(std::abs(ad) <= 1e-12);
  }
}

TEST_CASE("random LPs agree with the dense tableau oracle") {
  std::mt19937_64 rng(1234);
  SimplexOptions bland;
  bland.degenerate_switch = 1;
  int optimal = 0, infeasible = 0, unbounded = 0;
  for (int trial = 0; trial < 400; ++trial) {
    const auto r = random_lp(rng, trial % 3 == 0);
    const auto o = oracle::solve(r.a, r.b, r.c);
    const auto lp = make_lp(r.a, r.b, r.c);
    for (const auto& options : {SimplexOptions{}, bland}) {
      const auto sol = solve_lp(lp, options);
      switch (o.status) {
        case oracle::Status::optimal:
          check_certificate(lp, sol);
          CHECK(sol.objective_value == doctest::Approx(o.value).epsilon(1e-9).scale(1));
          break;
        case oracle::Status::infeasible:
          CHECK(sol.status == LPStatus::infeasible);
          break;
        case oracle::Status::unbounded:
          CHECK(sol.status == LPStatus::unbounded);
          break;
      }
    }
    optimal += o.status == oracle::Status::optimal;
    infeasible += o.status == oracle::Status::infeasible;
    unbounded += o.status == oracle::Status::unbounded;
  }
  MESSAGE("optimal " << optimal << " infeasible " << infeasible << " unbounded " << unbounded);
  CHECK(optimal > 200);
  CHECK(unbounded > 0);
}

TEST_CASE("incremental column pool matches a one-shot solve") {
  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 50; ++trial) {
    const auto r = random_lp(rng, false);
    const auto o = oracle::solve(r.a, r.b, r.c);
    if (o.status != oracle::Status::optimal) continue;
    RevisedSimplex simplex(r.b);
    const std::size_t n = r.c.size();
    auto column = [&](std::size_t j) {
      std::vector<RevisedSimplex::Entry> e;
      for (std::size_t i = 0; i < r.a.size(); ++i) {
        if (r.a[i][j] != 0) e.emplace_back(static_cast<int>(i), r.a[i][j]);
      }
      return e;
    };
    for (std::size_t j = 0; j < n / 2; ++j) simplex.add_column(r.c[j], column(j));
    simplex.run();
    for (std::size_t j = n / 2; j < n; ++j) simplex.add_column(r.c[j], column(j));
    LPStatus st = simplex.run();
    if (simplex.phase() == 1) st = simplex.run();
    REQUIRE(st == LPStatus::optimal);
    CHECK(simplex.objective() == doctest::Approx(o.value).epsilon(1e-9).scale(1));
    simplex.refactor();
    CHECK(simplex.objective() == doctest::Approx(o.value).epsilon(1e-9).scale(1));
  }
}
