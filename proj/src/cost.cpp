#include "mmot/cost.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mmot/error.hpp"

namespace mmot {

CostModel::CostModel(Kind kind, int marginals, double exponent)
    : kind_(kind), marginals_(marginals), exponent_(exponent) {
  if (marginals < 2) fail(ErrorKind::InvalidConfig, "need at least 2 marginals");
  if (!(exponent > 0) || !std::isfinite(exponent)) {
    fail(ErrorKind::InvalidConfig, "cost exponent must be positive");
  }
}

CostModel CostModel::coulomb(int marginals) { return CostModel(Kind::coulomb, marginals, 1.0); }

CostModel CostModel::power(int marginals, double exponent) {
  return CostModel(Kind::power, marginals, exponent);
}

double CostModel::pair_term(double dist) const {
  if (dist == 0.0) return std::numeric_limits<double>::infinity();
  if (exponent_ == 1.0) return 1.0 / dist;
  return std::pow(dist, -exponent_);
}

double sum_pair_terms(std::span<double> terms) {
  std::sort(terms.begin(), terms.end());
  double sum = 0.0;
  for (double t : terms) sum += t;
  return sum;
}

namespace {

double euclidean(const Point& a, const Point& b) {
  if (a.size() != b.size()) fail(ErrorKind::DimensionMismatch, "points of different dimension");
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    double d = a[k] - b[k];
    s += d * d;
  }
  return std::sqrt(s);
}

void check_arity(const CostModel& model, std::size_t n) {
  if (static_cast<int>(n) != model.marginals()) {
    fail(ErrorKind::DimensionMismatch, "tuple length differs from the number of marginals");
  }
}

}  // namespace

double pointwise_cost(const CostModel& model, std::span<const Point> points) {
  check_arity(model, points.size());
  std::vector<double> terms;
  terms.reserve(points.size() * (points.size() - 1) / 2);
  for (std::size_t i = 0; i < points.size(); ++i) {
    for (std::size_t j = i + 1; j < points.size(); ++j) {
      terms.push_back(model.pair_term(euclidean(points[i], points[j])));
    }
  }
  return sum_pair_terms(terms);
}

double cell_cost_lower(const CostModel& model, const CellTuple& tuple, const GridSpec& grid) {
  check_arity(model, tuple.size());
  std::vector<double> terms;
  terms.reserve(tuple.size() * (tuple.size() - 1) / 2);
  for (std::size_t i = 0; i < tuple.size(); ++i) {
    for (std::size_t j = i + 1; j < tuple.size(); ++j) {
      terms.push_back(model.pair_term(sup_dist(tuple[i], tuple[j], grid)));
    }
  }
  return sum_pair_terms(terms);
}

bool is_permutation_invariant_check(const CostModel& model, const CellTuple& tuple,
                                    const GridSpec& grid) {
  const double reference = cell_cost_lower(model, tuple, grid);
  std::vector<std::size_t> order(tuple.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  CellTuple permuted(tuple.size());
  do {
    for (std::size_t i = 0; i < order.size(); ++i) permuted[i] = tuple[order[i]];
    if (cell_cost_lower(model, permuted, grid) != reference) return false;
  } while (std::next_permutation(order.begin(), order.end()));
  return true;
}

CostEvaluator::CostEvaluator(CostModel model, GridSpec grid)
    : model_(model), grid_(std::move(grid)), mode_(CostMode::cell_lower) {}

CostEvaluator::CostEvaluator(CostModel model, const DiscreteMeasure& measure, CostMode mode)
    : model_(model), grid_(measure.grid()), mode_(mode) {
  if (mode == CostMode::pointwise) measure_.emplace(measure);
}

double CostEvaluator::pair(const CellIndex& a, const CellIndex& b) const {
  if (mode_ == CostMode::cell_lower) return model_.pair_term(sup_dist(a, b, grid_));
  if (a == b) return std::numeric_limits<double>::infinity();
  return model_.pair_term(euclidean(measure_->site(a), measure_->site(b)));
}

double CostEvaluator::operator()(const CellTuple& tuple) const {
  check_arity(model_, tuple.size());
  std::vector<double> terms;
  terms.reserve(tuple.size() * (tuple.size() - 1) / 2);
  for (std::size_t i = 0; i < tuple.size(); ++i) {
    for (std::size_t j = i + 1; j < tuple.size(); ++j) terms.push_back(pair(tuple[i], tuple[j]));
  }
  return sum_pair_terms(terms);
}

PairCostTable::PairCostTable(const CostEvaluator& cost, std::vector<CellIndex> cells)
    : cells_(std::move(cells)), marginals_(cost.marginals()) {
  const std::size_t m = cells_.size();
  table_.resize(m * m);
  double largest = 0.0;
  for (std::size_t a = 0; a < m; ++a) {
    for (std::size_t b = a; b < m; ++b) {
      double v = cost.pair(cells_[a], cells_[b]);
      table_[a * m + b] = v;
      table_[b * m + a] = v;
      if (std::isfinite(v)) largest = std::max(largest, v);
    }
  }
  const double pairs = marginals_ * (marginals_ - 1) / 2.0;
  scale_ = std::max(1.0, pairs * largest);
}

double PairCostTable::tuple_cost(std::span<const std::uint32_t> index) const {
  double terms[64];
  std::vector<double> spill;
  const std::size_t n = index.size();
  const std::size_t count = n * (n - 1) / 2;
  std::span<double> out(terms, std::min<std::size_t>(count, 64));
  if (count > 64) {
    spill.resize(count);
    out = spill;
  }
  std::size_t t = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) out[t++] = pair(index[i], index[j]);
  }
  return sum_pair_terms(out);
}

}  // namespace mmot
