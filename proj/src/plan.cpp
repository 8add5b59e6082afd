#include "mmot/plan.hpp"

#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>

#include "mmot/error.hpp"
#include "mmot/text_format.hpp"

namespace mmot {

TransportPlan::TransportPlan(GridSpec grid, int marginals, std::map<CellTuple, double> atoms)
    : grid_(std::move(grid)), marginals_(marginals), atoms_(std::move(atoms)) {
  if (marginals_ < 1) fail(ErrorKind::InvalidConfig, "plan needs at least one marginal");
  if (atoms_.empty()) fail(ErrorKind::ZeroMass, "plan has no atoms");
  double total = 0.0;
  for (const auto& [tuple, w] : atoms_) {
    if (static_cast<int>(tuple.size()) != marginals_) {
      fail(ErrorKind::DimensionMismatch, "plan atom has the wrong number of cells");
    }
    for (const auto& cell : tuple) {
      if (!contains(grid_, cell)) fail(ErrorKind::SupportOutsideWindow, "plan cell outside window");
    }
    if (!(w > 0) || !std::isfinite(w)) {
      fail(ErrorKind::NegativeWeight, "plan weights must be positive and finite");
    }
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-10) {
    fail(ErrorKind::NormalizationError, "plan weights sum to " + format_double(total));
  }
  if (marginal_spread() > 1e-10) {
    fail(ErrorKind::NormalizationError, "plan marginals differ by more than 1e-10");
  }
}

std::map<CellIndex, double> TransportPlan::marginal(int slot) const {
  std::map<CellIndex, double> out;
  for (const auto& [tuple, w] : atoms_) out[tuple[slot]] += w;
  return out;
}

double max_abs_difference(const std::map<CellIndex, double>& a,
                          const std::map<CellIndex, double>& b) {
  double worst = 0.0;
  for (const auto& [cell, w] : a) {
    auto it = b.find(cell);
    worst = std::max(worst, std::abs(w - (it == b.end() ? 0.0 : it->second)));
  }
  for (const auto& [cell, w] : b) {
    if (!a.contains(cell)) worst = std::max(worst, std::abs(w));
  }
  return worst;
}

double TransportPlan::marginal_spread() const {
  const auto first = marginal(0);
  double worst = 0.0;
  for (int i = 1; i < marginals_; ++i) worst = std::max(worst, max_abs_difference(first, marginal(i)));
  return worst;
}

double TransportPlan::cost(const CostEvaluator& cost) const {
  double total = 0.0;
  for (const auto& [tuple, w] : atoms_) total += w * cost(tuple);
  return total;
}

DiscreteMeasure TransportPlan::marginal_measure() const {
  auto weights = marginal(0);
  renormalize(weights);
  return DiscreteMeasure(grid_, std::move(weights));
}

PotentialVector::PotentialVector(GridSpec grid, std::vector<CellIndex> cells,
                                 std::vector<std::vector<double>> values)
    : grid_(std::move(grid)), cells_(std::move(cells)), values_(std::move(values)) {
  for (std::size_t c = 0; c < cells_.size(); ++c) {
    if (!index_.emplace(cells_[c], c).second) {
      fail(ErrorKind::DimensionMismatch, "duplicate cell in potential");
    }
  }
  for (const auto& row : values_) {
    if (row.size() != cells_.size()) {
      fail(ErrorKind::DimensionMismatch, "potential row length differs from cell count");
    }
  }
}

std::optional<std::size_t> PotentialVector::index_of(const CellIndex& cell) const {
  auto it = index_.find(cell);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

double PotentialVector::at(int marginal, const CellIndex& cell) const {
  auto idx = index_of(cell);
  if (!idx) fail(ErrorKind::DimensionMismatch, "potential is not defined on this cell");
  return values_.at(marginal)[*idx];
}

namespace {

void write_grid_header(std::ostream& out, const char* magic, const GridSpec& g, int n) {
  out << magic << " v1 level=" << g.level() << " halfwidth=" << format_double(g.halfwidth())
      << " dim=" << g.dim() << " N=" << n << '\n';
}

struct GridHeader {
  GridSpec grid;
  int marginals;
};

GridHeader read_grid_header(std::istream& in, const char* magic) {
  std::string line;
  if (!next_content_line(in, line)) fail(ErrorKind::ParseError, std::string("empty ") + magic + " file");
  auto h = parse_header(line, magic);
  const int level = static_cast<int>(parse_integer(header_field(h, "level")));
  const double halfwidth = parse_double(header_field(h, "halfwidth"));
  const int dim = static_cast<int>(parse_integer(header_field(h, "dim")));
  const int n = static_cast<int>(parse_integer(header_field(h, "N")));
  if (n < 1) fail(ErrorKind::ParseError, "N must be positive");
  try {
    return {GridSpec(level, halfwidth, dim), n};
  } catch (const Error& e) {
    fail(ErrorKind::ParseError, std::string("bad grid in header: ") + e.what());
  }
}

CellIndex parse_cell(const std::vector<std::string_view>& tokens, std::size_t first, int dim) {
  CellIndex cell;
  for (int k = 0; k < dim; ++k) cell.coords.push_back(parse_integer(tokens[first + k]));
  return cell;
}

}  // namespace

void write_plan(std::ostream& out, const TransportPlan& plan) {
  write_grid_header(out, "mmot-plan", plan.grid(), plan.marginals());
  for (const auto& [tuple, w] : plan.atoms()) {
    for (const auto& cell : tuple) {
      for (auto a : cell.coords) out << a << ' ';
    }
    out << format_double(w) << '\n';
  }
}

TransportPlan read_plan(std::istream& in) {
  auto [grid, n] = read_grid_header(in, "mmot-plan");
  const int d = grid.dim();
  std::map<CellTuple, double> atoms;
  std::string line;
  while (next_content_line(in, line)) {
    auto tokens = split_ws(line);
    if (static_cast<int>(tokens.size()) != n * d + 1) {
      fail(ErrorKind::ParseError, "expected " + std::to_string(n * d + 1) + " fields: '" + line + "'");
    }
    CellTuple tuple;
    for (int i = 0; i < n; ++i) tuple.push_back(parse_cell(tokens, i * d, d));
    double w = parse_double(tokens.back());
    if (w < 0) fail(ErrorKind::NegativeWeight, "negative plan weight: '" + line + "'");
    if (w > 0) atoms[std::move(tuple)] += w;
  }
  return TransportPlan(grid, n, std::move(atoms));
}

void save_plan(const std::string& path, const TransportPlan& plan) {
  std::ofstream out(path);
  if (!out) fail(ErrorKind::ParseError, "cannot write plan file '" + path + "'");
  write_plan(out, plan);
}

TransportPlan load_plan(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::ParseError, "cannot open plan file '" + path + "'");
  return read_plan(in);
}

void write_potentials(std::ostream& out, const PotentialVector& u) {
  write_grid_header(out, "mmot-potentials", u.grid(), u.marginals());
  for (std::size_t c = 0; c < u.cells().size(); ++c) {
    for (auto a : u.cells()[c].coords) out << a << ' ';
    for (int i = 0; i < u.marginals(); ++i) {
      out << format_double(u.values()[i][c]) << (i + 1 < u.marginals() ? ' ' : '\n');
    }
  }
}

PotentialVector read_potentials(std::istream& in) {
  auto [grid, n] = read_grid_header(in, "mmot-potentials");
  const int d = grid.dim();
  std::vector<CellIndex> cells;
  std::vector<std::vector<double>> values(n);
  std::string line;
  while (next_content_line(in, line)) {
    auto tokens = split_ws(line);
    if (static_cast<int>(tokens.size()) != d + n) {
      fail(ErrorKind::ParseError, "expected " + std::to_string(d + n) + " fields: '" + line + "'");
    }
    cells.push_back(parse_cell(tokens, 0, d));
    for (int i = 0; i < n; ++i) values[i].push_back(parse_double(tokens[d + i]));
  }
  return PotentialVector(grid, std::move(cells), std::move(values));
}

void save_potentials(const std::string& path, const PotentialVector& u) {
  std::ofstream out(path);
  if (!out) fail(ErrorKind::ParseError, "cannot write potentials file '" + path + "'");
  write_potentials(out, u);
}

PotentialVector load_potentials(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::ParseError, "cannot open potentials file '" + path + "'");
  return read_potentials(in);
}

}  // namespace mmot
