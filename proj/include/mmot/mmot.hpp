#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "mmot/column_generation.hpp"
#include "mmot/cost.hpp"
#include "mmot/measure.hpp"
#include "mmot/plan.hpp"

namespace mmot {

/// Adds the per-cell mean over marginals. For a permutation-invariant cost the
/// mean is again dual feasible and N * sum_x u(x) rho(x) equals the original
/// dual objective.
PotentialVector symmetrize_potentials(const PotentialVector& u);

/// Mean over marginals of u_i(x), weighted by rho: N * sum_x mean(x) rho(x).
double dual_objective(const PotentialVector& u, const std::map<CellIndex, double>& rho);

/// Largest value of sum_i u_i(t_i) - cost(t) over all tuples of the potential's
/// cells, clamped below at 0.
double max_dual_violation(const PotentialVector& u, const CostEvaluator& cost, int threads = 1);

/// Smallest inf_dist between two cells of one atom, over atoms whose cells lie
/// inside [-R, R]^d. Returns the largest double when no atom lies there.
double diagonal_clearance(const TransportPlan& plan, double R);

TransportPlan product_plan(const DiscreteMeasure& measure, int marginals);
/// Cost of the independent coupling, from pair expectations (no enumeration).
double product_plan_cost(const DiscreteMeasure& measure, const CostEvaluator& cost);

/// N(N-1)/(2r) - N l.
double cost_upper_bound(int marginals, double r, double l);
/// 2N(N-1)^2/r - (N-1)^2 k.
double potential_bound(int marginals, double r, double k);

struct BoundParameters {
  double r = 0.0;
  double k = 0.0;
  double alpha = 0.0;  // clearance of the selected atom
  double mass = 0.0;   // plan mass inside the window
  CellTuple atom;
};

/// Picks the plan atom inside [-R, R]^d with the largest pairwise cell
/// clearance; k is the pointwise cost at its sites divided by N, and
/// r = min(alpha/4, largest radius whose N cubes around the sites carry less
/// than m_fraction * M / 4 of the measure, spread uniformly over each cell).
BoundParameters bound_parameters(const TransportPlan& plan, const DiscreteMeasure& measure,
                                 const CostModel& model, double R, double m_fraction);

struct SwapResult {
  TransportPlan plan;
  double cost;
};

/// Restricts the plan to the N neighborhoods {t : max_k |t_k - centers[i]_k| < radii[i]}
/// (distances between cell centers), balances them to a common mass, and
/// replaces them by cyclically shifted products of their slot marginals.
SwapResult swap_improve(const TransportPlan& plan, const CostEvaluator& cost,
                        const std::vector<CellTuple>& centers, const std::vector<double>& radii);

struct DualityReport {
  double primal_value = 0.0;
  double dual_value = 0.0;
  double relative_gap = 0.0;
  double max_slackness_violation = 0.0;
  double max_dual_violation = 0.0;
  double cost_scale = 1.0;  // (number of pairs) * (largest finite pair term)
  double diagonal_clearance_alpha = 0.0;
  double potential_sup = 0.0;  // max |symmetrized u| over the potential's cells
  std::optional<BoundParameters> bound_params;
  double potential_bound = 0.0;
  bool potential_bound_satisfied = false;
};

struct VerifyOptions {
  double window = 0.0;  // R for clearance and bound; 0 means the grid window
  double m_fraction = 0.1;
  int threads = 1;
};

/// Recomputes primal and dual values, slackness on the plan support, dual
/// feasibility over all tuples, clearance and the potential bound. `measure`
/// supplies the sites for k; the plan's marginal is used when it is null.
DualityReport verify_duality(const TransportPlan& plan, const PotentialVector& u,
                             const CostEvaluator& cost, const VerifyOptions& options = {},
                             const DiscreteMeasure* measure = nullptr);

std::string to_key_value(const DualityReport& report);
std::string to_json(const DualityReport& report);

}  // namespace mmot
