#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "mmot/column_generation.hpp"
#include "mmot/cost.hpp"
#include "mmot/measure.hpp"
#include "mmot/mmot.hpp"

namespace mmot {

struct ConvergenceRow {
  int level = 0;
  bool ok = false;
  std::string error;  // set when the level's solve failed
  double primal = 0.0;
  double dual = 0.0;
  double gap = 0.0;
  double alpha = 0.0;
  double pot_sup = 0.0;
  double bound = 0.0;  // NaN when bound parameters are unavailable
  double r = 0.0;
  double k = 0.0;
  double slackness = 0.0;
  std::size_t support = 0;  // atoms of the discretized measure
  double ms = 0.0;
};

struct ConvergenceTable {
  std::vector<ConvergenceRow> rows;
  double reference_upper = 0.0;  // product-plan cost at the finest solved level
};

struct ConvergeConfig {
  DensitySpec density;
  int marginals = 2;
  double exponent = 1.0;
  int first_level = 1;
  int last_level = 1;  // empty range when last < first
  double R = 1.0;
  int dim = 3;
  std::optional<CostMode> mode;  // unset: pointwise for atomic densities, cell_lower otherwise
  int samples = 4;
  double m_fraction = 0.1;
  bool warm_start = true;
  bool timing = true;
  ColumnGenerationOptions solver;
};

CostModel make_cost_model(int marginals, double exponent);
CostMode resolve_mode(const std::optional<CostMode>& mode, const DensitySpec& density);

/// One independent solve per level, warm-started from the children of the
/// previous level's plan support. Solver errors mark the row failed.
ConvergenceTable converge(const ConvergeConfig& config);

/// Violated table invariants: failed rows, decreasing primal values (beyond a
/// 1e-10 relative slack), gaps above gap_tol, values above the product-plan
/// bracket, and potential bounds that do not hold.
std::vector<std::string> check_table(const ConvergenceTable& table, double gap_tol);

/// (max r - min r) / min r over successful rows; 0 for fewer than two rows.
double r_variation(const ConvergenceTable& table);

/// CSV with header level,primal,dual,gap,alpha,pot_sup,bound,ms.
void write_csv(std::ostream& out, const ConvergenceTable& table);
/// One key=value block per row, blocks separated by blank lines.
void write_key_value(std::ostream& out, const ConvergenceTable& table);

struct SwapLogEntry {
  int round = 0;
  CellTuple anchor;
  double radius = 0.0;
  double cost_before = 0.0;
  double cost_after = 0.0;
};

struct SwapSearchResult {
  TransportPlan plan;
  double cost;
  std::vector<SwapLogEntry> log;
};

/// Greedy search: anchors are plan atoms in ascending order of center
/// clearance; companions are the next atoms sharing no cell with the chosen
/// ones; radii sweep down from half the separation. A move is kept only if the
/// cost drops by more than 1e-9 (1 + |cost|).
SwapSearchResult swap_search(const TransportPlan& plan, const CostEvaluator& cost, int max_rounds);

/// The identity coupling sum_x rho(x) delta_(x, ..., x).
TransportPlan diagonal_plan(const DiscreteMeasure& measure, int marginals);

}  // namespace mmot
