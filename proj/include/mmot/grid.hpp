#pragma once

#include <compare>
#include <cstdint>
#include <span>
#include <vector>

namespace mmot {

using Point = std::vector<double>;

/// Dyadic grid of cells of side 2^-level tiling the window [-R, R]^dim.
class GridSpec {
 public:
  GridSpec(int level, double window_halfwidth, int dimension = 3);

  int level() const { return level_; }
  double halfwidth() const { return halfwidth_; }
  int dim() const { return dim_; }

  /// Cell side 2^-level (exact).
  double side() const { return side_; }
  /// R * 2^level; the window spans cell indices [1 - K, K] on each axis.
  std::int64_t half_cells() const { return half_cells_; }
  std::int64_t lowest_index() const { return 1 - half_cells_; }
  std::int64_t highest_index() const { return half_cells_; }

  GridSpec refined() const { return GridSpec(level_ + 1, halfwidth_, dim_); }

  friend bool operator==(const GridSpec&, const GridSpec&) = default;

 private:
  int level_;
  double halfwidth_;
  int dim_;
  double side_;
  std::int64_t half_cells_;
};

/// Lattice index a of the half-open cell [(a-1)/2^n, a/2^n) per axis.
struct CellIndex {
  std::vector<std::int64_t> coords;

  CellIndex() = default;
  explicit CellIndex(std::vector<std::int64_t> c) : coords(std::move(c)) {}
  CellIndex(std::initializer_list<std::int64_t> c) : coords(c) {}

  std::size_t dim() const { return coords.size(); }

  friend auto operator<=>(const CellIndex&, const CellIndex&) = default;
  friend bool operator==(const CellIndex&, const CellIndex&) = default;
};

bool contains(const GridSpec& grid, const CellIndex& cell);

/// Throws PointOutsideWindow unless every coordinate lies in [-R, R].
CellIndex cell_of(std::span<const double> point, const GridSpec& grid);

double cell_lower(std::int64_t a, const GridSpec& grid);
double cell_upper(std::int64_t a, const GridSpec& grid);
Point cell_center(const CellIndex& cell, const GridSpec& grid);

/// Largest distance between points of the two closed cells.
double sup_dist(const CellIndex& a, const CellIndex& b, const GridSpec& grid);
/// Smallest distance between points of the two closed cells.
double inf_dist(const CellIndex& a, const CellIndex& b, const GridSpec& grid);

/// The 2^dim cells at level+1 covering `cell`.
std::vector<CellIndex> children(const CellIndex& cell, const GridSpec& grid);
CellIndex parent(const CellIndex& cell);

/// All cells of the window, in lexicographic order.
std::vector<CellIndex> all_cells(const GridSpec& grid);

}  // namespace mmot
