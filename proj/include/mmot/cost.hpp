#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "mmot/grid.hpp"
#include "mmot/measure.hpp"

namespace mmot {

/// Repulsive pair cost sum_{i<j} |x_i - x_j|^-s over N marginals (s = 1 is Coulomb).
class CostModel {
 public:
  enum class Kind { coulomb, power };

  static CostModel coulomb(int marginals);
  static CostModel power(int marginals, double exponent);

  Kind kind() const { return kind_; }
  int marginals() const { return marginals_; }
  double exponent() const { return exponent_; }

  /// dist^-s; +inf at dist == 0.
  double pair_term(double dist) const;

 private:
  CostModel(Kind kind, int marginals, double exponent);
  Kind kind_;
  int marginals_;
  double exponent_;
};

/// One cell per marginal.
using CellTuple = std::vector<CellIndex>;

/// Adds pair terms in ascending order. The result depends only on the multiset
/// of terms, so tuple costs are exactly permutation invariant and termwise
/// dominance carries over to the sums.
double sum_pair_terms(std::span<double> terms);

double pointwise_cost(const CostModel& model, std::span<const Point> points);

/// Separable lower bound of the cost over the product cell:
/// sum_{i<j} sup_dist(cell_i, cell_j)^-s. Always finite.
double cell_cost_lower(const CostModel& model, const CellTuple& tuple, const GridSpec& grid);

bool is_permutation_invariant_check(const CostModel& model, const CellTuple& tuple,
                                    const GridSpec& grid);

enum class CostMode {
  cell_lower,  ///< piecewise-constant dyadic approximation (the default)
  pointwise,   ///< exact cost at the measure's representative sites
};

/// Cost of a cell tuple under a chosen mode. In pointwise mode the cost is
/// evaluated at the measure's sites and is +inf on repeated cells.
class CostEvaluator {
 public:
  CostEvaluator(CostModel model, GridSpec grid);
  CostEvaluator(CostModel model, const DiscreteMeasure& measure, CostMode mode);

  const CostModel& model() const { return model_; }
  const GridSpec& grid() const { return grid_; }
  CostMode mode() const { return mode_; }
  int marginals() const { return model_.marginals(); }

  double pair(const CellIndex& a, const CellIndex& b) const;
  double operator()(const CellTuple& tuple) const;

 private:
  CostModel model_;
  GridSpec grid_;
  CostMode mode_;
  std::optional<DiscreteMeasure> measure_;
};

/// Dense pair-cost matrix over an indexed cell list; the solver's fast path.
class PairCostTable {
 public:
  PairCostTable(const CostEvaluator& cost, std::vector<CellIndex> cells);

  std::size_t size() const { return cells_.size(); }
  int marginals() const { return marginals_; }
  const std::vector<CellIndex>& cells() const { return cells_; }

  double pair(std::size_t a, std::size_t b) const { return table_[a * cells_.size() + b]; }
  double tuple_cost(std::span<const std::uint32_t> index) const;
  /// Largest finite tuple cost bound: (number of pairs) * (largest finite pair term).
  double cost_scale() const { return scale_; }

 private:
  std::vector<CellIndex> cells_;
  int marginals_;
  std::vector<double> table_;
  double scale_ = 1.0;
};

}  // namespace mmot
