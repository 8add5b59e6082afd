#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include "mmot/column_generation.hpp"
#include "mmot/error.hpp"
#include "mmot/mmot.hpp"

using namespace mmot;

namespace {

ErrorKind kind_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("no error raised");
  return ErrorKind::InvalidConfig;
}

const GridSpec kGrid(3, 4.0, 3);

DiscreteMeasure two_point() {
  return discretize(FiniteAtomic{{{0, 0, 0}, {2, 0, 0}}, {0.5, 0.5}}, kGrid);
}

DiscreteMeasure triangle() {
  const double h = std::sqrt(3.0) / 2;
  return discretize(FiniteAtomic{{{0, 0, 0}, {1, 0, 0}, {0.5, h, 0}}, {1, 1, 1}}, kGrid);
}

// Exhaustive plan cost, independent of TransportPlan::cost.
double enumerate_cost(const TransportPlan& plan, const CostEvaluator& cost) {
  double total = 0;
  for (const auto& [t, w] : plan.atoms()) total += w * cost(t);
  return total;
}

double max_marginal_change(const TransportPlan& a, const TransportPlan& b) {
  double worst = 0;
  for (int k = 0; k < a.marginals(); ++k) worst = std::max(worst, max_abs_difference(a.marginal(k), b.marginal(k)));
  return worst;
}

}  // namespace

TEST_CASE("symmetrization examples") {
  const auto m = two_point();
  const auto cells = m.cells();
  const PotentialVector same(kGrid, cells, {{0.3, -0.1}, {0.3, -0.1}});
  const auto s = symmetrize_potentials(same);
  REQUIRE(s.symmetrized);
  CHECK(*s.symmetrized == std::vector<double>{0.3, -0.1});

  const PotentialVector u(kGrid, cells, {{0.5, 0.0}, {0.0, 0.0}});
  const auto su = symmetrize_potentials(u);
  CHECK((*su.symmetrized)[0] == 0.25);
  CHECK((*su.symmetrized)[1] == 0.0);
  CHECK(dual_objective(u, m.atoms()) == 0.25);
  CHECK(dual_objective(su, m.atoms()) == 0.25);
}

TEST_CASE("symmetrization preserves objective and feasibility") {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> val(-2.0, 2.0), wt(0.1, 1.0), pos(-1.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 2 + trial % 2;
    const GridSpec g(2, 1.0, 2);
    FiniteAtomic atoms;
    for (int i = 0; i < 4; ++i) {
      atoms.points.push_back({pos(rng), pos(rng)});
      atoms.weights.push_back(wt(rng));
    }
    const auto m = discretize(atoms, g);
    const CostEvaluator cost(CostModel::coulomb(n), g);
    std::vector<std::vector<double>> values(n, std::vector<double>(m.size()));
    for (auto& row : values) for (auto& v : row) v = val(rng);
    // Shift into feasibility: subtract the worst violation evenly.
    const PotentialVector raw(g, m.cells(), values);
    const double excess = max_dual_violation(raw, cost);
    for (auto& row : values) for (auto& v : row) v -= excess / n;
    const PotentialVector u(g, m.cells(), values);
    REQUIRE(max_dual_violation(u, cost) <= 1e-12);

    const auto s = symmetrize_potentials(u);
    CHECK(std::abs(dual_objective(s, m.atoms()) - dual_objective(u, m.atoms())) <= 1e-12);
    const PotentialVector sym(g, m.cells(), std::vector<std::vector<double>>(n, *s.symmetrized));
    CHECK(max_dual_violation(sym, cost) <= 1e-12);
    double direct = 0;
    for (std::size_t c = 0; c < m.size(); ++c) direct += (*s.symmetrized)[c] * m.weight_vector()[c];
    CHECK(std::abs(n * direct - dual_objective(u, m.atoms())) <= 1e-12);
  }
}

TEST_CASE("verify_duality on the two-point optimum") {
  const auto m = two_point();
  const CostEvaluator cost(CostModel::coulomb(2), m, CostMode::pointwise);
  const auto sol = solve_mmot(m, cost);
  const auto report = verify_duality(sol.plan, sol.potentials, cost, {}, &m);
  CHECK(report.primal_value == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(report.relative_gap <= 1e-12);
  CHECK(report.max_slackness_violation <= 1e-12);
  CHECK(report.max_dual_violation <= 1e-12);
  const auto sym = symmetrize_potentials(sol.potentials);
  CHECK((*sym.symmetrized)[0] == doctest::Approx(0.25).epsilon(1e-12));
  CHECK((*sym.symmetrized)[1] == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(report.diagonal_clearance_alpha == doctest::Approx(2.0 - kGrid.side()));
  REQUIRE(report.bound_params);
  CHECK(report.potential_bound_satisfied);
  CHECK(to_key_value(report).find("relative_gap=") != std::string::npos);
  CHECK(to_json(report).find("\"primal_value\"") != std::string::npos);
}

TEST_CASE("verify_duality with a product plan and with zero potentials") {
  const auto m = triangle();
  const CostEvaluator cost(CostModel::coulomb(2), m, CostMode::cell_lower);
  const auto sol = solve_mmot(m, cost);
  const auto product = product_plan(m, 2);
  const double product_cost = enumerate_cost(product, cost);
  const auto r = verify_duality(product, sol.potentials, cost);
  CHECK(r.primal_value == doctest::Approx(product_cost).epsilon(1e-14));
  CHECK(r.dual_value == doctest::Approx(sol.value).epsilon(1e-12));
  CHECK(r.relative_gap == doctest::Approx((product_cost - sol.value) / (1 + product_cost)).epsilon(1e-12));
  CHECK(r.relative_gap > 0);

  const PotentialVector zero(kGrid, m.cells(), std::vector<std::vector<double>>(2, std::vector<double>(3, 0.0)));
  const auto z = verify_duality(sol.plan, zero, cost);
  CHECK(z.dual_value == 0.0);
  CHECK(z.relative_gap == doctest::Approx(sol.value / (1 + sol.value)));

  const PotentialVector wrong(kGrid, m.cells(), std::vector<std::vector<double>>(3, std::vector<double>(3, 0.0)));
  CHECK(kind_of([&] { verify_duality(sol.plan, wrong, cost); }) == ErrorKind::DimensionMismatch);
}

TEST_CASE("diagonal clearance") {
  const auto m = two_point();
  const auto c = m.cells();
  const TransportPlan anti(kGrid, 2, {{{c[0], c[1]}, 0.5}, {{c[1], c[0]}, 0.5}});
  CHECK(diagonal_clearance(anti, 4.0) == inf_dist(c[0], c[1], kGrid));
  const TransportPlan diag(kGrid, 2, {{{c[0], c[0]}, 0.25}, {{c[1], c[1]}, 0.25},
                                      {{c[0], c[1]}, 0.25}, {{c[1], c[0]}, 0.25}});
  CHECK(diagonal_clearance(diag, 4.0) == 0.0);
  // Only the atom at the origin lies in [-1, 1]^3, and no tuple lies there entirely.
  CHECK(diagonal_clearance(anti, 1.0) == std::numeric_limits<double>::max());
}

TEST_CASE("product plans") {
  const auto m = two_point();
  const auto p = product_plan(m, 2);
  CHECK(p.size() == 4);
  for (const auto& [t, w] : p.atoms()) CHECK(w == 0.25);
  const auto one = discretize(FiniteAtomic{{{0, 0, 0}}, {1.0}}, kGrid);
  const auto p1 = product_plan(one, 2);
  REQUIRE(p1.size() == 1);
  CHECK(p1.atoms().begin()->second == 1.0);
  const auto p3 = product_plan(triangle(), 3);
  CHECK(p3.size() == 27);
  for (const auto& [t, w] : p3.atoms()) CHECK(w == doctest::Approx(1.0 / 27).epsilon(1e-15));
  CHECK(max_marginal_change(p3, p3) == 0.0);
  const CostEvaluator cost(CostModel::coulomb(3), triangle(), CostMode::cell_lower);
  CHECK(product_plan_cost(triangle(), cost) == doctest::Approx(enumerate_cost(p3, cost)).epsilon(1e-13));
}

TEST_CASE("bound formulas") {
  CHECK(cost_upper_bound(2, 1.0, 0.0) == 1.0);
  CHECK(cost_upper_bound(3, 0.5, -1.0) == 9.0);
  CHECK(cost_upper_bound(3, 0.5, 0.25) == doctest::Approx(cost_upper_bound(3, 0.5, 0.0) - 3 * 0.25));
  CHECK(potential_bound(2, 1.0, 0.0) == 4.0);
  CHECK(potential_bound(2, 1.0, 1.0) == 3.0);
  CHECK(potential_bound(3, 0.25, 0.0) == 2 * potential_bound(3, 0.5, 0.0));
}

TEST_CASE("bound parameters on the two-point optimum") {
  const auto m = two_point();
  const CostEvaluator cost(CostModel::coulomb(2), m, CostMode::pointwise);
  const auto sol = solve_mmot(m, cost);
  const auto b = bound_parameters(sol.plan, m, cost.model(), 0.0, 0.1);
  CHECK(b.k == 0.25);
  CHECK(b.alpha == doctest::Approx(2.0 - kGrid.side()));
  CHECK(b.r <= b.alpha / 4);
  CHECK(b.r <= 1.0);
  // Each atom sits at a cell corner: its cube captures (r/side)^3 of its cell,
  // so the threshold solves (r/side)^3 = 0.1/4.
  const double expected = kGrid.side() * std::cbrt(0.025);
  CHECK(b.r == doctest::Approx(expected).epsilon(1e-9));

  const auto c = m.cells();
  const TransportPlan diag(kGrid, 2, {{{c[0], c[0]}, 0.5}, {{c[1], c[1]}, 0.5}});
  CHECK(kind_of([&] { bound_parameters(diag, m, cost.model(), 0.0, 0.1); }) == ErrorKind::NoOffDiagonalSupport);
  CHECK(kind_of([&] { bound_parameters(sol.plan, m, cost.model(), 0.0, 1.5); }) == ErrorKind::InvalidConfig);
}

TEST_CASE("swap_improve undoes a diagonal-loaded two-point plan") {
  const auto m = two_point();
  const auto c = m.cells();
  const CostEvaluator cost(CostModel::coulomb(2), kGrid);
  const TransportPlan diag(kGrid, 2, {{{c[0], c[0]}, 0.5}, {{c[1], c[1]}, 0.5}});
  const auto res = swap_improve(diag, cost, {{c[0], c[0]}, {c[1], c[1]}}, {0.5, 0.5});
  REQUIRE(res.plan.size() == 2);
  CHECK(res.plan.atoms().at({c[0], c[1]}) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(res.plan.atoms().at({c[1], c[0]}) == doctest::Approx(0.5).epsilon(1e-15));
  const double diameter_term = 1.0 / sup_dist(c[0], c[0], kGrid);
  CHECK(enumerate_cost(diag, cost) == doctest::Approx(diameter_term));
  CHECK(res.cost == doctest::Approx(1.0 / sup_dist(c[0], c[1], kGrid)).epsilon(1e-14));
  CHECK(res.cost < enumerate_cost(diag, cost));
  CHECK(max_marginal_change(diag, res.plan) <= 1e-15);

}

TEST_CASE("swap_improve on a three-point plan with diagonal mass") {
  const auto m = triangle();
  const auto c = m.cells();
  const CostEvaluator cost(CostModel::coulomb(3), kGrid);
  // Mostly the symmetric optimum, with some mass parked on the diagonal.
  std::map<CellTuple, double> atoms;
  std::vector<std::size_t> perm{0, 1, 2};
  const double eps = 0.05;
  do {
    atoms[{c[perm[0]], c[perm[1]], c[perm[2]]}] = (1.0 - 3 * eps) / 6;
  } while (std::next_permutation(perm.begin(), perm.end()));
  for (int i = 0; i < 3; ++i) atoms[{c[i], c[i], c[i]}] = eps;
  const TransportPlan plan(kGrid, 3, atoms);
  const std::vector<CellTuple> centers{{c[0], c[0], c[0]}, {c[1], c[1], c[1]}, {c[2], c[2], c[2]}};
  const auto res = swap_improve(plan, cost, centers, {0.25, 0.25, 0.25});
  CHECK(max_marginal_change(plan, res.plan) <= 1e-12);
  CHECK(res.cost < enumerate_cost(plan, cost));
  CHECK(res.cost == doctest::Approx(enumerate_cost(res.plan, cost)).epsilon(1e-14));
  CHECK(diagonal_clearance(res.plan, 4.0) > 0);
}

TEST_CASE("swap_improve balances unequal pieces") {
  const auto m = two_point();
  const auto c = m.cells();
  const CostEvaluator cost(CostModel::coulomb(2), kGrid);
  const TransportPlan plan(kGrid, 2, {{{c[0], c[0]}, 0.3}, {{c[1], c[1]}, 0.3},
                                      {{c[0], c[1]}, 0.2}, {{c[1], c[0]}, 0.2}});
  const auto res = swap_improve(plan, cost, {{c[0], c[0]}, {c[1], c[1]}}, {0.5, 0.5});
  CHECK(res.plan.size() == 2);
  CHECK(res.plan.atoms().at({c[0], c[1]}) == doctest::Approx(0.5));
  CHECK(max_marginal_change(plan, res.plan) <= 1e-15);

}

TEST_CASE("swap_improve rebuilds product-form blocks as cross products") {
  // Two clusters of two atoms; the plan puts each cluster's product on the diagonal block.
  const auto m = discretize(FiniteAtomic{{{0, 0, 0}, {0.25, 0, 0}, {2, 0, 0}, {2.25, 0, 0}}, {1, 1, 1, 1}}, kGrid);
  const auto c = m.cells();
  REQUIRE(c.size() == 4);
  std::map<CellTuple, double> atoms;
  for (int blk = 0; blk < 2; ++blk) {
    for (int i = 0; i < 2; ++i) {
      for (int j = 0; j < 2; ++j) atoms[{c[2 * blk + i], c[2 * blk + j]}] = 0.125;
    }
  }
  const TransportPlan plan(kGrid, 2, atoms);
  const CostEvaluator cost(CostModel::coulomb(2), kGrid);
  const auto res = swap_improve(plan, cost, {{c[0], c[0]}, {c[2], c[2]}}, {0.5, 0.5});
  CHECK(res.plan.size() == 8);
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 2; ++j) {
      CHECK(res.plan.atoms().at({c[i], c[2 + j]}) == doctest::Approx(0.125).epsilon(1e-15));
      CHECK(res.plan.atoms().at({c[2 + j], c[i]}) == doctest::Approx(0.125).epsilon(1e-15));
    }
  }
  CHECK(max_marginal_change(plan, res.plan) <= 1e-15);
  CHECK(res.cost < enumerate_cost(plan, cost));
}

TEST_CASE("swap_improve errors") {
  const auto m = two_point();
  const auto c = m.cells();
  const CostEvaluator cost(CostModel::coulomb(2), kGrid);
  const TransportPlan diag(kGrid, 2, {{{c[0], c[0]}, 0.5}, {{c[1], c[1]}, 0.5}});
  CHECK(kind_of([&] { swap_improve(diag, cost, {{c[0], c[0]}, {c[1], c[1]}}, {1.5, 1.5}); }) ==
        ErrorKind::OverlappingNeighborhoods);
  CHECK(kind_of([&] { swap_improve(diag, cost, {{c[0], c[1]}, {c[1], c[0]}}, {0.5, 0.5}); }) ==
        ErrorKind::OverlappingNeighborhoods);
  const TransportPlan anti(kGrid, 2, {{{c[0], c[1]}, 0.5}, {{c[1], c[0]}, 0.5}});
  CHECK(kind_of([&] { swap_improve(anti, cost, {{c[0], c[0]}, {c[1], c[1]}}, {0.5, 0.5}); }) ==
        ErrorKind::EmptyRestriction);
  CHECK(kind_of([&] { swap_improve(diag, cost, {{c[0], c[0]}}, {0.5}); }) == ErrorKind::DimensionMismatch);
}

TEST_CASE("plan and potential files round-trip") {
  const auto m = triangle();
  const CostEvaluator cost(CostModel::coulomb(3), m, CostMode::pointwise);
  const auto sol = solve_mmot(m, cost);
  std::stringstream pbuf, ubuf;
  write_plan(pbuf, sol.plan);
  const auto plan = read_plan(pbuf);
  CHECK(plan.atoms() == sol.plan.atoms());
  write_potentials(ubuf, sol.potentials);
  const auto u = read_potentials(ubuf);
  CHECK(u.values() == sol.potentials.values());
  CHECK(u.cells() == sol.potentials.cells());
}

TEST_CASE("optimal support is tight under permutation") {
  const auto m = discretize(UniformBall{{0, 0}, 1.0}, GridSpec(2, 1.0, 2));
  const CostEvaluator cost(CostModel::coulomb(3), m.grid());
  const auto sol = solve_mmot(m, cost);
  const auto sym = symmetrize_potentials(sol.potentials);
  const double tol = 1e-7 * (1 + sol.value);
  for (const auto& [t, w] : sol.plan.atoms()) {
    auto perm = t;
    std::sort(perm.begin(), perm.end());
    do {
      double s = 0;
      for (const auto& cell : perm) s += (*sym.symmetrized)[*sym.index_of(cell)];
      CHECK(std::abs(cost(perm) - s) <= tol);
    } while (std::next_permutation(perm.begin(), perm.end()));
  }
}
