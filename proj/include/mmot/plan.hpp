#pragma once

#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mmot/cost.hpp"
#include "mmot/grid.hpp"
#include "mmot/measure.hpp"

namespace mmot {

/// Discrete coupling: positive weights on N-tuples of cells summing to 1, with
/// all N marginals equal (within 1e-10 per cell).
class TransportPlan {
 public:
  TransportPlan(GridSpec grid, int marginals, std::map<CellTuple, double> atoms);

  const GridSpec& grid() const { return grid_; }
  int marginals() const { return marginals_; }
  const std::map<CellTuple, double>& atoms() const { return atoms_; }
  std::size_t size() const { return atoms_.size(); }

  std::map<CellIndex, double> marginal(int slot) const;
  /// Largest per-cell difference between any marginal and the first one.
  double marginal_spread() const;
  double cost(const CostEvaluator& cost) const;
  /// The common marginal as a measure (first slot).
  DiscreteMeasure marginal_measure() const;

 private:
  GridSpec grid_;
  int marginals_;
  std::map<CellTuple, double> atoms_;
};

/// Largest per-cell difference between two cell-weight maps.
double max_abs_difference(const std::map<CellIndex, double>& a,
                          const std::map<CellIndex, double>& b);

/// Dual variables u_i(cell), one row per marginal over a fixed cell list.
class PotentialVector {
 public:
  PotentialVector(GridSpec grid, std::vector<CellIndex> cells,
                  std::vector<std::vector<double>> values);

  const GridSpec& grid() const { return grid_; }
  int marginals() const { return static_cast<int>(values_.size()); }
  const std::vector<CellIndex>& cells() const { return cells_; }
  const std::vector<std::vector<double>>& values() const { return values_; }

  std::optional<std::size_t> index_of(const CellIndex& cell) const;
  double at(int marginal, const CellIndex& cell) const;

  /// Mean over marginals, when computed by symmetrize_potentials.
  std::optional<std::vector<double>> symmetrized;

 private:
  GridSpec grid_;
  std::vector<CellIndex> cells_;
  std::vector<std::vector<double>> values_;
  std::map<CellIndex, std::size_t> index_;
};

/// Text format:
///   mmot-plan v1 level=<n> halfwidth=<R> dim=<d> N=<N>
///   <N groups of d integers> <weight>
void write_plan(std::ostream& out, const TransportPlan& plan);
TransportPlan read_plan(std::istream& in);
void save_plan(const std::string& path, const TransportPlan& plan);
TransportPlan load_plan(const std::string& path);

/// Text format:
///   mmot-potentials v1 level=<n> halfwidth=<R> dim=<d> N=<N>
///   <d integers> <u_1> ... <u_N>
void write_potentials(std::ostream& out, const PotentialVector& u);
PotentialVector read_potentials(std::istream& in);
void save_potentials(const std::string& path, const PotentialVector& u);
PotentialVector load_potentials(const std::string& path);

}  // namespace mmot
