#include "mmot/grid.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "mmot/error.hpp"

namespace mmot {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::PointOutsideWindow: return "PointOutsideWindow";
    case ErrorKind::SupportOutsideWindow: return "SupportOutsideWindow";
    case ErrorKind::ZeroMass: return "ZeroMass";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::NormalizationError: return "NormalizationError";
    case ErrorKind::NegativeWeight: return "NegativeWeight";
    case ErrorKind::NumericalBreakdown: return "NumericalBreakdown";
    case ErrorKind::InsufficientSupport: return "InsufficientSupport";
    case ErrorKind::Infeasible: return "Infeasible";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::OverlappingNeighborhoods: return "OverlappingNeighborhoods";
    case ErrorKind::EmptyRestriction: return "EmptyRestriction";
    case ErrorKind::NoOffDiagonalSupport: return "NoOffDiagonalSupport";
    case ErrorKind::InvalidConfig: return "InvalidConfig";
  }
  return "Unknown";
}

GridSpec::GridSpec(int level, double window_halfwidth, int dimension)
    : level_(level), halfwidth_(window_halfwidth), dim_(dimension) {
  if (level < 0 || level > 40) {
    fail(ErrorKind::InvalidConfig, "grid level must lie in [0, 40]");
  }
  if (dimension < 1) {
    fail(ErrorKind::InvalidConfig, "grid dimension must be positive");
  }
  if (!(window_halfwidth > 0) || !std::isfinite(window_halfwidth)) {
    fail(ErrorKind::InvalidConfig, "window halfwidth must be positive");
  }
  side_ = std::ldexp(1.0, -level);
  const double cells = std::ldexp(window_halfwidth, level);
  if (cells != std::floor(cells) || cells > 1e15) {
    std::ostringstream msg;
    msg << "window halfwidth " << window_halfwidth
        << " does not tile into cells of side 2^-" << level;
    fail(ErrorKind::InvalidConfig, msg.str());
  }
  half_cells_ = static_cast<std::int64_t>(cells);
}

bool contains(const GridSpec& grid, const CellIndex& cell) {
  if (static_cast<int>(cell.dim()) != grid.dim()) return false;
  for (auto a : cell.coords) {
    if (a < grid.lowest_index() || a > grid.highest_index()) return false;
  }
  return true;
}

CellIndex cell_of(std::span<const double> point, const GridSpec& grid) {
  if (static_cast<int>(point.size()) != grid.dim()) {
    fail(ErrorKind::DimensionMismatch, "point dimension differs from grid dimension");
  }
  CellIndex cell;
  cell.coords.reserve(point.size());
  for (double x : point) {
    if (!(x >= -grid.halfwidth() && x <= grid.halfwidth())) {
      std::ostringstream msg;
      msg << "coordinate " << x << " outside window [-" << grid.halfwidth() << ", "
          << grid.halfwidth() << "]";
      fail(ErrorKind::PointOutsideWindow, msg.str());
    }
    auto a = static_cast<std::int64_t>(std::floor(std::ldexp(x, grid.level()))) + 1;
    if (a > grid.highest_index()) a = grid.highest_index();
    cell.coords.push_back(a);
  }
  return cell;
}

double cell_lower(std::int64_t a, const GridSpec& grid) {
  return std::ldexp(static_cast<double>(a - 1), -grid.level());
}

double cell_upper(std::int64_t a, const GridSpec& grid) {
  return std::ldexp(static_cast<double>(a), -grid.level());
}

Point cell_center(const CellIndex& cell, const GridSpec& grid) {
  Point p(cell.dim());
  for (std::size_t k = 0; k < cell.dim(); ++k) {
    p[k] = std::ldexp(static_cast<double>(2 * cell.coords[k] - 1), -grid.level() - 1);
  }
  return p;
}

namespace {

// Per axis the extremal gaps between the closed cells, in units of the side,
// are |a-b|+1 (sup) and max(0, |a-b|-1) (inf). Sums of squares stay exact
// integers, so only the final square root rounds.
double dyadic_norm(const CellIndex& a, const CellIndex& b, const GridSpec& grid, int shift) {
  if (a.dim() != b.dim()) {
    fail(ErrorKind::DimensionMismatch, "cells of different dimension");
  }
  double sum = 0.0;
  for (std::size_t k = 0; k < a.dim(); ++k) {
    std::int64_t gap = std::llabs(a.coords[k] - b.coords[k]) + shift;
    if (gap < 0) gap = 0;
    sum += static_cast<double>(gap * gap);
  }
  return std::ldexp(std::sqrt(sum), -grid.level());
}

}  // namespace

double sup_dist(const CellIndex& a, const CellIndex& b, const GridSpec& grid) {
  return dyadic_norm(a, b, grid, +1);
}

double inf_dist(const CellIndex& a, const CellIndex& b, const GridSpec& grid) {
  return dyadic_norm(a, b, grid, -1);
}

std::vector<CellIndex> children(const CellIndex& cell, const GridSpec& /*grid*/) {
  const std::size_t d = cell.dim();
  std::vector<CellIndex> out;
  out.reserve(std::size_t{1} << d);
  for (std::size_t mask = 0; mask < (std::size_t{1} << d); ++mask) {
    CellIndex child;
    child.coords.resize(d);
    for (std::size_t k = 0; k < d; ++k) {
      child.coords[k] = 2 * cell.coords[k] - ((mask >> k) & 1 ? 0 : 1);
    }
    out.push_back(std::move(child));
  }
  return out;
}

CellIndex parent(const CellIndex& cell) {
  CellIndex p;
  p.coords.reserve(cell.dim());
  for (auto b : cell.coords) {
    std::int64_t n = b + 1;
    p.coords.push_back(n >= 0 ? n / 2 : -((-n + 1) / 2));
  }
  return p;
}

std::vector<CellIndex> all_cells(const GridSpec& grid) {
  const std::int64_t lo = grid.lowest_index();
  const std::int64_t width = grid.highest_index() - lo + 1;
  std::vector<CellIndex> out;
  std::int64_t total = 1;
  for (int k = 0; k < grid.dim(); ++k) total *= width;
  out.reserve(static_cast<std::size_t>(total));
  std::vector<std::int64_t> c(grid.dim(), lo);
  for (std::int64_t i = 0; i < total; ++i) {
    out.emplace_back(c);
    for (int k = grid.dim() - 1; k >= 0; --k) {
      if (++c[k] <= grid.highest_index()) break;
      c[k] = lo;
    }
  }
  return out;
}

}  // namespace mmot
