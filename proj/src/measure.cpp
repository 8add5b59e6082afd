#include "mmot/measure.hpp"

#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "mmot/error.hpp"
#include "mmot/text_format.hpp"

namespace mmot {

bool is_atomic(const DensitySpec& spec) {
  return std::holds_alternative<FiniteAtomic>(spec);
}

DiscreteMeasure::DiscreteMeasure(GridSpec grid, std::map<CellIndex, double> weights,
                                 std::map<CellIndex, Point> sites)
    : grid_(std::move(grid)), weights_(std::move(weights)), sites_(std::move(sites)) {
  if (weights_.empty()) fail(ErrorKind::ZeroMass, "measure has no atoms");
  for (const auto& [cell, w] : weights_) {
    if (!contains(grid_, cell)) {
      fail(ErrorKind::SupportOutsideWindow, "measure atom outside grid window");
    }
    if (!(w > 0) || !std::isfinite(w)) {
      fail(ErrorKind::NegativeWeight, "measure weights must be positive and finite");
    }
  }
  if (std::abs(total_mass(weights_) - 1.0) > 1e-12) {
    fail(ErrorKind::NormalizationError, "measure weights do not sum to 1");
  }
  for (const auto& [cell, p] : sites_) {
    if (!weights_.contains(cell) || static_cast<int>(p.size()) != grid_.dim()) {
      fail(ErrorKind::DimensionMismatch, "site given for a cell outside the support");
    }
  }
}

std::vector<CellIndex> DiscreteMeasure::cells() const {
  std::vector<CellIndex> out;
  out.reserve(weights_.size());
  for (const auto& [cell, w] : weights_) out.push_back(cell);
  return out;
}

std::vector<double> DiscreteMeasure::weight_vector() const {
  std::vector<double> out;
  out.reserve(weights_.size());
  for (const auto& [cell, w] : weights_) out.push_back(w);
  return out;
}

double DiscreteMeasure::weight(const CellIndex& cell) const {
  auto it = weights_.find(cell);
  return it == weights_.end() ? 0.0 : it->second;
}

Point DiscreteMeasure::site(const CellIndex& cell) const {
  auto it = sites_.find(cell);
  return it == sites_.end() ? cell_center(cell, grid_) : it->second;
}

double total_mass(const std::map<CellIndex, double>& weights) {
  // Neumaier summation in key order.
  double sum = 0.0, comp = 0.0;
  for (const auto& [cell, w] : weights) {
    double t = sum + w;
    comp += std::abs(sum) >= std::abs(w) ? (sum - t) + w : (w - t) + sum;
    sum = t;
  }
  return sum + comp;
}

void renormalize(std::map<CellIndex, double>& weights) {
  double total = total_mass(weights);
  if (total == 1.0) return;
  if (!(total > 0) || !std::isfinite(total)) {
    fail(ErrorKind::ZeroMass, "cannot renormalize weights with non-positive total");
  }
  for (auto& [cell, w] : weights) w /= total;
  // Push the rounding residual into the largest weight until the sum is exact.
  auto largest = weights.begin();
  for (auto it = weights.begin(); it != weights.end(); ++it) {
    if (it->second > largest->second) largest = it;
  }
  for (int attempt = 0; attempt < 4; ++attempt) {
    double residual = 1.0 - total_mass(weights);
    if (residual == 0.0) break;
    largest->second += residual;
  }
}

namespace {

void require_dim(const Point& p, const GridSpec& grid, const char* what) {
  if (static_cast<int>(p.size()) != grid.dim()) {
    fail(ErrorKind::DimensionMismatch,
         std::string(what) + " has dimension " + std::to_string(p.size()) + ", grid has " +
             std::to_string(grid.dim()));
  }
}

// Calls fn(cell) for every cell in the index box [lo, hi].
template <class Fn>
void for_each_cell_in_box(const GridSpec& grid, std::vector<std::int64_t> lo,
                          std::vector<std::int64_t> hi, Fn&& fn) {
  const int d = grid.dim();
  std::vector<std::int64_t> c = lo;
  for (;;) {
    fn(CellIndex(c));
    int k = d - 1;
    for (; k >= 0; --k) {
      if (++c[k] <= hi[k]) break;
      c[k] = lo[k];
    }
    if (k < 0) return;
  }
}

// Mean of f over the q^d midpoint subsamples of a cell.
template <class F>
double subsample_mean(const CellIndex& cell, const GridSpec& grid, int q, F&& f) {
  const int d = grid.dim();
  const double h = grid.side() / q;
  std::vector<int> j(d, 0);
  Point x(d);
  double sum = 0.0;
  long count = 0;
  for (;;) {
    for (int k = 0; k < d; ++k) {
      x[k] = cell_lower(cell.coords[k], grid) + (j[k] + 0.5) * h;
    }
    sum += f(x);
    ++count;
    int k = d - 1;
    for (; k >= 0; --k) {
      if (++j[k] < q) break;
      j[k] = 0;
    }
    if (k < 0) break;
  }
  return sum / static_cast<double>(count);
}

double squared_distance(const Point& a, const Point& b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += (a[k] - b[k]) * (a[k] - b[k]);
  return s;
}

DiscreteMeasure discretize_ball(const UniformBall& ball, const GridSpec& grid, int q) {
  require_dim(ball.center, grid, "ball center");
  if (!(ball.radius > 0)) fail(ErrorKind::InvalidConfig, "ball radius must be positive");
  std::vector<std::int64_t> lo(grid.dim()), hi(grid.dim());
  for (int k = 0; k < grid.dim(); ++k) {
    double a = ball.center[k] - ball.radius, b = ball.center[k] + ball.radius;
    if (a < -grid.halfwidth() || b > grid.halfwidth()) {
      fail(ErrorKind::SupportOutsideWindow, "ball is not contained in the window");
    }
    const GridSpec axis(grid.level(), grid.halfwidth(), 1);
    lo[k] = cell_of(std::vector<double>{a}, axis).coords[0];
    hi[k] = cell_of(std::vector<double>{b}, axis).coords[0];
  }
  const double r2 = ball.radius * ball.radius;
  std::map<CellIndex, double> weights;
  for_each_cell_in_box(grid, lo, hi, [&](const CellIndex& cell) {
    double frac = subsample_mean(cell, grid, q, [&](const Point& x) {
      return squared_distance(x, ball.center) <= r2 ? 1.0 : 0.0;
    });
    if (frac > 0) weights.emplace(cell, frac);
  });
  if (weights.empty()) fail(ErrorKind::ZeroMass, "ball contains no quadrature point");
  renormalize(weights);
  return DiscreteMeasure(grid, std::move(weights));
}

DiscreteMeasure discretize_gaussian(const TruncatedGaussian& g, const GridSpec& grid, int q) {
  require_dim(g.center, grid, "gaussian center");
  if (!(g.sigma > 0)) fail(ErrorKind::InvalidConfig, "gaussian sigma must be positive");
  std::vector<std::int64_t> lo(grid.dim(), grid.lowest_index());
  std::vector<std::int64_t> hi(grid.dim(), grid.highest_index());
  const double inv = 1.0 / (2.0 * g.sigma * g.sigma);
  std::map<CellIndex, double> weights;
  for_each_cell_in_box(grid, lo, hi, [&](const CellIndex& cell) {
    double mean = subsample_mean(cell, grid, q, [&](const Point& x) {
      return std::exp(-squared_distance(x, g.center) * inv);
    });
    if (mean > 0) weights.emplace(cell, mean);
  });
  if (weights.empty()) fail(ErrorKind::ZeroMass, "gaussian underflows on every cell");
  renormalize(weights);
  return DiscreteMeasure(grid, std::move(weights));
}

DiscreteMeasure discretize_atoms(const FiniteAtomic& atoms, const GridSpec& grid) {
  if (atoms.points.size() != atoms.weights.size()) {
    fail(ErrorKind::DimensionMismatch, "atom points and weights differ in length");
  }
  std::map<CellIndex, double> weights;
  std::map<CellIndex, Point> moments;
  for (std::size_t i = 0; i < atoms.points.size(); ++i) {
    const Point& p = atoms.points[i];
    double w = atoms.weights[i];
    require_dim(p, grid, "atom");
    if (w < 0 || !std::isfinite(w)) fail(ErrorKind::NegativeWeight, "atom weight is negative");
    CellIndex cell;
    try {
      cell = cell_of(p, grid);
    } catch (const Error& e) {
      fail(ErrorKind::SupportOutsideWindow, e.what());
    }
    if (w == 0) continue;
    weights[cell] += w;
    auto& m = moments[cell];
    m.resize(p.size(), 0.0);
    for (std::size_t k = 0; k < p.size(); ++k) m[k] += w * p[k];
  }
  if (weights.empty()) fail(ErrorKind::ZeroMass, "atomic density has zero mass");
  std::map<CellIndex, Point> sites;
  for (auto& [cell, m] : moments) {
    const double w = weights.at(cell);
    for (auto& v : m) v /= w;
    sites.emplace(cell, std::move(m));
  }
  renormalize(weights);
  return DiscreteMeasure(grid, std::move(weights), std::move(sites));
}

}  // namespace

DiscreteMeasure discretize(const DensitySpec& density, const GridSpec& grid,
                           int samples_per_axis) {
  if (samples_per_axis < 1) {
    fail(ErrorKind::InvalidConfig, "samples per axis must be positive");
  }
  return std::visit(
      [&](const auto& spec) -> DiscreteMeasure {
        using T = std::decay_t<decltype(spec)>;
        if constexpr (std::is_same_v<T, UniformBall>) {
          return discretize_ball(spec, grid, samples_per_axis);
        } else if constexpr (std::is_same_v<T, TruncatedGaussian>) {
          return discretize_gaussian(spec, grid, samples_per_axis);
        } else {
          return discretize_atoms(spec, grid);
        }
      },
      density);
}

std::size_t support_cardinality(const DiscreteMeasure& measure) { return measure.size(); }

DiscreteMeasure read_measure(std::istream& in) {
  std::string line;
  if (!next_content_line(in, line)) fail(ErrorKind::ParseError, "empty measure file");
  auto header = parse_header(line, "mmot-measure");
  const int level = static_cast<int>(parse_integer(header_field(header, "level")));
  const double halfwidth = parse_double(header_field(header, "halfwidth"));
  const int dim = static_cast<int>(parse_integer(header_field(header, "dim")));
  GridSpec grid = [&] {
    try {
      return GridSpec(level, halfwidth, dim);
    } catch (const Error& e) {
      fail(ErrorKind::ParseError, std::string("bad grid in header: ") + e.what());
    }
  }();

  std::map<CellIndex, double> weights;
  while (next_content_line(in, line)) {
    auto tokens = split_ws(line);
    if (static_cast<int>(tokens.size()) != dim + 1) {
      fail(ErrorKind::ParseError, "expected " + std::to_string(dim + 1) + " fields: '" + line + "'");
    }
    CellIndex cell;
    for (int k = 0; k < dim; ++k) cell.coords.push_back(parse_integer(tokens[k]));
    if (!contains(grid, cell)) fail(ErrorKind::SupportOutsideWindow, "cell outside window: '" + line + "'");
    double w = parse_double(tokens[dim]);
    if (w < 0) fail(ErrorKind::NegativeWeight, "negative weight: '" + line + "'");
    if (!std::isfinite(w)) fail(ErrorKind::ParseError, "non-finite weight: '" + line + "'");
    if (weights.contains(cell)) fail(ErrorKind::ParseError, "duplicate cell: '" + line + "'");
    if (w > 0) weights.emplace(std::move(cell), w);
  }
  if (weights.empty()) fail(ErrorKind::ZeroMass, "measure file has no positive weights");
  double total = total_mass(weights);
  if (std::abs(total - 1.0) > 1e-9) {
    std::ostringstream msg;
    msg << "weights sum to " << format_double(total) << ", more than 1e-9 away from 1";
    fail(ErrorKind::NormalizationError, msg.str());
  }
  renormalize(weights);
  return DiscreteMeasure(grid, std::move(weights));
}

DiscreteMeasure load_measure(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::ParseError, "cannot open measure file '" + path + "'");
  return read_measure(in);
}

void write_measure(std::ostream& out, const DiscreteMeasure& measure) {
  const auto& g = measure.grid();
  out << "mmot-measure v1 level=" << g.level() << " halfwidth=" << format_double(g.halfwidth())
      << " dim=" << g.dim() << '\n';
  for (const auto& [cell, w] : measure.atoms()) {
    for (auto a : cell.coords) out << a << ' ';
    out << format_double(w) << '\n';
  }
}

void save_measure(const std::string& path, const DiscreteMeasure& measure) {
  std::ofstream out(path);
  if (!out) fail(ErrorKind::ParseError, "cannot write measure file '" + path + "'");
  write_measure(out, measure);
}

}  // namespace mmot
