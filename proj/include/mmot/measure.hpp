#pragma once

#include <iosfwd>
#include <map>
#include <string>
#include <variant>
#include <vector>

#include "mmot/grid.hpp"

namespace mmot {

struct UniformBall {
  Point center;
  double radius = 1.0;
};

/// Gaussian density restricted to the grid window.
struct TruncatedGaussian {
  Point center;
  double sigma = 0.5;
};

struct FiniteAtomic {
  std::vector<Point> points;
  std::vector<double> weights;
};

using DensitySpec = std::variant<UniformBall, TruncatedGaussian, FiniteAtomic>;

bool is_atomic(const DensitySpec& spec);

/// Probability weights on grid cells. Every stored weight is positive and the
/// total is 1 within 1e-12.
///
/// Each cell also has a representative site: the cell center, or for atoms
/// placed by a finite-atomic density the (mass-weighted) atom location.
class DiscreteMeasure {
 public:
  DiscreteMeasure(GridSpec grid, std::map<CellIndex, double> weights,
                  std::map<CellIndex, Point> sites = {});

  const GridSpec& grid() const { return grid_; }
  const std::map<CellIndex, double>& atoms() const { return weights_; }
  std::size_t size() const { return weights_.size(); }

  /// Support cells in lexicographic order; index positions are used by the solver.
  std::vector<CellIndex> cells() const;
  std::vector<double> weight_vector() const;
  double weight(const CellIndex& cell) const;
  Point site(const CellIndex& cell) const;
  bool has_custom_sites() const { return !sites_.empty(); }

  friend bool operator==(const DiscreteMeasure& a, const DiscreteMeasure& b) {
    return a.grid_ == b.grid_ && a.weights_ == b.weights_;
  }

 private:
  GridSpec grid_;
  std::map<CellIndex, double> weights_;
  std::map<CellIndex, Point> sites_;
};

/// Scales weights so they sum to 1. A no-op when they already sum to exactly 1,
/// which makes repeated application stable.
void renormalize(std::map<CellIndex, double>& weights);
double total_mass(const std::map<CellIndex, double>& weights);

/// Cell weights from midpoint quadrature on samples_per_axis^dim subcells per
/// cell (smooth presets), or exact placement via cell_of (atomic preset).
DiscreteMeasure discretize(const DensitySpec& density, const GridSpec& grid,
                           int samples_per_axis = 4);

std::size_t support_cardinality(const DiscreteMeasure& measure);

/// Text format:
///   mmot-measure v1 level=<n> halfwidth=<R> dim=<d>
///   <i1> ... <id> <weight>
DiscreteMeasure read_measure(std::istream& in);
DiscreteMeasure load_measure(const std::string& path);
void write_measure(std::ostream& out, const DiscreteMeasure& measure);
void save_measure(const std::string& path, const DiscreteMeasure& measure);

}  // namespace mmot
