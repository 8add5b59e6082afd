#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "mmot/cost.hpp"
#include "mmot/lp.hpp"
#include "mmot/measure.hpp"
#include "mmot/plan.hpp"

namespace mmot {

struct ColumnGenerationOptions {
  int threads = 0;              // 0: hardware concurrency
  std::size_t batch = 50;       // violated columns added per pricing round
  double pricing_tolerance = 1e-9;  // relative to the problem's cost scale
  std::size_t full_seed_limit = 4096;  // seed every tuple when the product is this small
  long max_rounds = 1'000'000;
  /// solve_mmot only: replace the vertex dual by the centered symmetric one.
  bool center_potentials = true;
  SimplexOptions simplex;
};

struct ColumnGenerationStats {
  long rounds = 0;
  long simplex_iterations = 0;
  std::size_t columns = 0;
  std::size_t seed_columns = 0;
  std::size_t tuples_scanned = 0;
};

/// Multi-index transport LP: marginal i has weights[i] over indices 0..m_i-1;
/// cost maps one index per marginal to a finite value or +inf (column excluded).
struct TransportProblem {
  std::vector<std::vector<double>> weights;
  std::function<double(std::span<const std::uint32_t>)> cost;
  double cost_scale = 1.0;
};

struct TransportSolution {
  std::vector<std::vector<std::uint32_t>> tuples;  // plan support
  std::vector<double> mass;                        // matching plan weights
  std::vector<std::vector<double>> potentials;     // [marginal][index]
  double primal_value = 0.0;
  double dual_value = 0.0;
  ColumnGenerationStats stats;
};

/// Column generation over the product index set. Rows: every index of the
/// first marginal and all but the last index of the others; the dropped rows
/// get potential 0. Throws Infeasible when no finite-cost plan exists.
TransportSolution solve_transport(const TransportProblem& problem,
                                  const ColumnGenerationOptions& options = {},
                                  const std::vector<std::vector<std::uint32_t>>& warm_start = {});

struct PricedColumn {
  CellTuple tuple;
  double reduced_cost;
};

/// Every support tuple with cost(t) - sum_i u_i(t_i) < -tolerance, in
/// lexicographic index order.
std::vector<PricedColumn> price_columns(const PotentialVector& duals,
                                        const std::function<double(const CellTuple&)>& cost,
                                        double tolerance, int threads = 1);

struct MMOTSolution {
  TransportPlan plan;
  PotentialVector potentials;
  double value = 0.0;
  double dual_value = 0.0;
  ColumnGenerationStats stats;
};

/// All N marginals equal `measure`. Throws InsufficientSupport when the
/// measure has fewer than N atoms. With center_potentials every marginal gets
/// the same potential: starting from the mean of the vertex duals, it moves
/// toward the least-norm potential that keeps each plan atom tight, as far as
/// dual feasibility over all tuples allows. Optimality is preserved along the
/// way, and the result no longer depends on which degenerate vertex the
/// simplex stopped at.
MMOTSolution solve_mmot(const DiscreteMeasure& measure, const CostEvaluator& cost,
                        const ColumnGenerationOptions& options = {},
                        const std::vector<CellTuple>& warm_start = {});

int resolve_threads(int requested);

}  // namespace mmot
