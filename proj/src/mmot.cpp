#include "mmot/mmot.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "mmot/error.hpp"
#include "mmot/text_format.hpp"

namespace mmot {

namespace {

/// Compensated running sum.
class Accumulator {
 public:
  void add(double v) {
    const double t = sum_ + v;
    comp_ += std::abs(sum_) >= std::abs(v) ? (sum_ - t) + v : (v - t) + sum_;
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

double distance(const Point& a, const Point& b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += (a[k] - b[k]) * (a[k] - b[k]);
  return std::sqrt(s);
}

bool cell_inside(const CellIndex& cell, const GridSpec& grid, double R) {
  for (auto a : cell.coords) {
    if (cell_lower(a, grid) < -R || cell_upper(a, grid) > R) return false;
  }
  return true;
}

double atom_clearance(const CellTuple& tuple, const GridSpec& grid) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < tuple.size(); ++i) {
    for (std::size_t j = i + 1; j < tuple.size(); ++j) {
      best = std::min(best, inf_dist(tuple[i], tuple[j], grid));
    }
  }
  return best;
}

double resolve_window(double R, const GridSpec& grid) {
  if (R == 0.0) return grid.halfwidth();
  if (!(R > 0) || R > grid.halfwidth()) {
    fail(ErrorKind::InvalidConfig, "clearance window must lie in (0, grid halfwidth]");
  }
  return R;
}

}  // namespace

PotentialVector symmetrize_potentials(const PotentialVector& u) {
  PotentialVector out = u;
  const int n = u.marginals();
  std::vector<double> mean(u.cells().size(), 0.0);
  for (std::size_t c = 0; c < mean.size(); ++c) {
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += u.values()[i][c];
    mean[c] = s / n;
  }
  out.symmetrized = std::move(mean);
  return out;
}

double dual_objective(const PotentialVector& u, const std::map<CellIndex, double>& rho) {
  Accumulator total;
  for (std::size_t c = 0; c < u.cells().size(); ++c) {
    auto it = rho.find(u.cells()[c]);
    if (it == rho.end()) continue;
    for (int i = 0; i < u.marginals(); ++i) total.add(u.values()[i][c] * it->second);
  }
  return total.value();
}

double max_dual_violation(const PotentialVector& u, const CostEvaluator& cost, int threads) {
  const int n = u.marginals();
  if (n != cost.marginals()) fail(ErrorKind::DimensionMismatch, "potential and cost disagree on N");
  const std::size_t m = u.cells().size();
  if (m == 0) return 0.0;
  const PairCostTable table(cost, u.cells());
  const auto& vals = u.values();
  threads = std::max(1, std::min<int>(resolve_threads(threads), static_cast<int>(m)));
  std::vector<double> worst(threads, 0.0);

  // Thread t owns the tuples whose first index is congruent to t.
  auto work = [&](int t) {
    std::vector<std::uint32_t> d(n, 0);
    for (std::size_t first = t; first < m; first += threads) {
      std::fill(d.begin(), d.end(), 0);
      d[0] = static_cast<std::uint32_t>(first);
      for (;;) {
        double s = 0.0;
        for (int i = 0; i < n; ++i) s += vals[i][d[i]];
        worst[t] = std::max(worst[t], s - table.tuple_cost(d));
        int i = n - 1;
        while (i > 0 && ++d[i] == m) d[i--] = 0;
        if (i == 0) break;
      }
    }
  };
  if (threads == 1) {
    work(0);
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(work, t);
    for (auto& th : pool) th.join();
  }
  return *std::max_element(worst.begin(), worst.end());
}

double diagonal_clearance(const TransportPlan& plan, double R) {
  double alpha = std::numeric_limits<double>::max();
  for (const auto& [tuple, w] : plan.atoms()) {
    bool inside = true;
    for (const auto& cell : tuple) inside = inside && cell_inside(cell, plan.grid(), R);
    if (inside) alpha = std::min(alpha, atom_clearance(tuple, plan.grid()));
  }
  return alpha;
}

TransportPlan product_plan(const DiscreteMeasure& measure, int marginals) {
  if (marginals < 1) fail(ErrorKind::InvalidConfig, "product plan needs at least one marginal");
  const auto cells = measure.cells();
  const auto w = measure.weight_vector();
  const std::size_t m = cells.size();
  double count = std::pow(static_cast<double>(m), marginals);
  if (count > 1e7) fail(ErrorKind::InvalidConfig, "product plan too large to materialize");
  std::map<CellTuple, double> atoms;
  std::vector<std::size_t> d(marginals, 0);
  for (;;) {
    CellTuple tuple;
    double weight = 1.0;
    for (auto c : d) {
      tuple.push_back(cells[c]);
      weight *= w[c];
    }
    atoms.emplace(std::move(tuple), weight);
    int i = marginals - 1;
    while (i >= 0 && ++d[i] == m) d[i--] = 0;
    if (i < 0) break;
  }
  return TransportPlan(measure.grid(), marginals, std::move(atoms));
}

double product_plan_cost(const DiscreteMeasure& measure, const CostEvaluator& cost) {
  const auto cells = measure.cells();
  const auto w = measure.weight_vector();
  Accumulator expected_pair;
  for (std::size_t a = 0; a < cells.size(); ++a) {
    for (std::size_t b = 0; b < cells.size(); ++b) {
      expected_pair.add(w[a] * w[b] * cost.pair(cells[a], cells[b]));
    }
  }
  const int n = cost.marginals();
  return n * (n - 1) / 2.0 * expected_pair.value();
}

double cost_upper_bound(int marginals, double r, double l) {
  if (!(r > 0)) fail(ErrorKind::InvalidConfig, "r must be positive");
  const double n = marginals;
  return n * (n - 1) / (2 * r) - n * l;
}

double potential_bound(int marginals, double r, double k) {
  if (!(r > 0)) fail(ErrorKind::InvalidConfig, "r must be positive");
  const double n = marginals;
  return 2 * n * (n - 1) * (n - 1) / r - (n - 1) * (n - 1) * k;
}

BoundParameters bound_parameters(const TransportPlan& plan, const DiscreteMeasure& measure,
                                 const CostModel& model, double R, double m_fraction) {
  const GridSpec& grid = plan.grid();
  R = resolve_window(R, grid);
  if (!(m_fraction > 0 && m_fraction < 1)) fail(ErrorKind::InvalidConfig, "M fraction must lie in (0, 1)");
  if (!(measure.grid() == grid)) fail(ErrorKind::DimensionMismatch, "plan and measure use different grids");

  BoundParameters out;
  double best_weight = 0.0;
  bool found = false;
  for (const auto& [tuple, w] : plan.atoms()) {
    bool inside = true;
    for (const auto& cell : tuple) inside = inside && cell_inside(cell, grid, R);
    if (!inside) continue;
    out.mass += w;
    const double clearance = atom_clearance(tuple, grid);
    if (!found || clearance > out.alpha || (clearance == out.alpha && w > best_weight)) {
      found = true;
      out.alpha = clearance;
      out.atom = tuple;
      best_weight = w;
    }
  }
  if (!found || !(out.alpha > 0)) {
    fail(ErrorKind::NoOffDiagonalSupport, "no plan atom in the window is separated from the diagonal");
  }

  std::vector<Point> sites;
  for (const auto& cell : out.atom) sites.push_back(measure.site(cell));
  out.k = pointwise_cost(model, sites) / model.marginals();

  // Measure of the union-bound sum of N cubes [x - r, x + r]^d, each atom
  // spread uniformly over its cell.
  const auto cells = measure.cells();
  const auto w = measure.weight_vector();
  const double side = grid.side();
  auto cube_mass = [&](double r) {
    Accumulator total;
    for (const auto& x : sites) {
      for (std::size_t c = 0; c < cells.size(); ++c) {
        double fraction = 1.0;
        for (std::size_t k = 0; k < x.size() && fraction > 0; ++k) {
          const double lo = cell_lower(cells[c].coords[k], grid);
          const double hi = cell_upper(cells[c].coords[k], grid);
          fraction *= std::max(0.0, std::min(hi, x[k] + r) - std::max(lo, x[k] - r)) / side;
        }
        if (fraction > 0) total.add(w[c] * fraction);
      }
    }
    return total.value();
  };

  const double target = m_fraction * out.mass / 4;
  double hi = out.alpha / 4;
  if (cube_mass(hi) < target) {
    out.r = hi;
    return out;
  }
  double lo = hi / 2;
  for (int i = 0; i < 1000 && !(cube_mass(lo) < target); ++i) {
    hi = lo;
    lo /= 2;
  }
  for (int i = 0; i < 60; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (cube_mass(mid) < target) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  out.r = lo;
  return out;
}

SwapResult swap_improve(const TransportPlan& plan, const CostEvaluator& cost,
                        const std::vector<CellTuple>& centers, const std::vector<double>& radii) {
  const int n = plan.marginals();
  const GridSpec& grid = plan.grid();
  if (static_cast<int>(centers.size()) != n || static_cast<int>(radii.size()) != n) {
    fail(ErrorKind::DimensionMismatch, "swap needs one center tuple and radius per marginal");
  }
  std::vector<std::vector<Point>> cc(n);
  for (int i = 0; i < n; ++i) {
    if (static_cast<int>(centers[i].size()) != n) {
      fail(ErrorKind::DimensionMismatch, "center tuple has the wrong arity");
    }
    if (!(radii[i] > 0) || !std::isfinite(radii[i])) {
      fail(ErrorKind::InvalidConfig, "swap radii must be positive");
    }
    for (const auto& cell : centers[i]) cc[i].push_back(cell_center(cell, grid));
  }
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      for (const auto& p : cc[i]) {
        for (const auto& q : cc[j]) {
          if (distance(p, q) < radii[i] + radii[j]) {
            fail(ErrorKind::OverlappingNeighborhoods, "swap neighborhoods are not separated");
          }
        }
      }
    }
  }

  // piece[i]: atoms of the plan in neighborhood i.
  std::vector<std::vector<std::pair<CellTuple, double>>> piece(n);
  std::vector<double> piece_mass(n, 0.0);
  for (const auto& [tuple, w] : plan.atoms()) {
    for (int i = 0; i < n; ++i) {
      double spread = 0.0;
      for (int k = 0; k < n; ++k) spread = std::max(spread, distance(cell_center(tuple[k], grid), cc[i][k]));
      if (spread < radii[i]) {
        piece[i].emplace_back(tuple, w);
        piece_mass[i] += w;
        break;
      }
    }
  }
  for (int i = 0; i < n; ++i) {
    if (!(piece_mass[i] > 0)) fail(ErrorKind::EmptyRestriction, "swap neighborhood carries no mass");
  }
  const double mu = *std::min_element(piece_mass.begin(), piece_mass.end());

  auto atoms = plan.atoms();
  // nu[i][k]: slot-k marginal of the balanced piece lambda_i P_i (total mass mu).
  std::vector<std::vector<std::map<CellIndex, double>>> nu(n, std::vector<std::map<CellIndex, double>>(n));
  for (int i = 0; i < n; ++i) {
    const double lambda = mu / piece_mass[i];
    for (const auto& [tuple, w] : piece[i]) {
      for (int k = 0; k < n; ++k) nu[i][k][tuple[k]] += lambda * w;
      const double rest = w * (1.0 - lambda);
      if (rest > 0) {
        atoms[tuple] = rest;
      } else {
        atoms.erase(tuple);
      }
    }
  }

  // Cyclic rebuild: product i takes slot k from piece (i + k) mod N.
  const double norm = std::pow(mu, n - 1);
  for (int i = 0; i < n; ++i) {
    std::vector<std::vector<std::pair<CellIndex, double>>> factors(n);
    for (int k = 0; k < n; ++k) {
      const auto& marginal = nu[(i + k) % n][k];
      factors[k].assign(marginal.begin(), marginal.end());
    }
    std::vector<std::size_t> d(n, 0);
    for (;;) {
      CellTuple tuple;
      double w = 1.0 / norm;
      for (int k = 0; k < n; ++k) {
        tuple.push_back(factors[k][d[k]].first);
        w *= factors[k][d[k]].second;
      }
      atoms[std::move(tuple)] += w;
      int k = n - 1;
      while (k >= 0 && ++d[k] == factors[k].size()) d[k--] = 0;
      if (k < 0) break;
    }
  }
  TransportPlan out(grid, n, std::move(atoms));
  const double c = out.cost(cost);
  return {std::move(out), c};
}

DualityReport verify_duality(const TransportPlan& plan, const PotentialVector& u,
                             const CostEvaluator& cost, const VerifyOptions& options,
                             const DiscreteMeasure* measure) {
  const int n = plan.marginals();
  if (!(plan.grid() == u.grid()) || !(cost.grid() == plan.grid())) {
    fail(ErrorKind::DimensionMismatch, "plan, potentials and cost use different grids");
  }
  if (u.marginals() != n || cost.marginals() != n) {
    fail(ErrorKind::DimensionMismatch, "plan, potentials and cost disagree on N");
  }
  const double R = resolve_window(options.window, plan.grid());

  DualityReport rep;
  rep.primal_value = plan.cost(cost);
  Accumulator dual;
  for (int i = 0; i < n; ++i) {
    for (const auto& [cell, w] : plan.marginal(i)) dual.add(u.at(i, cell) * w);
  }
  rep.dual_value = dual.value();
  rep.relative_gap = std::abs(rep.primal_value - rep.dual_value) / (1 + std::abs(rep.primal_value));
  for (const auto& [tuple, w] : plan.atoms()) {
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += u.at(i, tuple[i]);
    rep.max_slackness_violation = std::max(rep.max_slackness_violation, cost(tuple) - s);
  }
  rep.max_dual_violation = max_dual_violation(u, cost, options.threads);
  rep.cost_scale = PairCostTable(cost, u.cells()).cost_scale();
  rep.diagonal_clearance_alpha = diagonal_clearance(plan, R);

  const auto sym = symmetrize_potentials(u);
  for (double v : *sym.symmetrized) rep.potential_sup = std::max(rep.potential_sup, std::abs(v));

  try {
    const DiscreteMeasure rho = measure ? *measure : plan.marginal_measure();
    rep.bound_params = bound_parameters(plan, rho, cost.model(), R, options.m_fraction);
    rep.potential_bound = potential_bound(n, rep.bound_params->r, rep.bound_params->k);
    rep.potential_bound_satisfied = rep.potential_sup <= rep.potential_bound;
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::NoOffDiagonalSupport) throw;
    rep.potential_bound = std::numeric_limits<double>::infinity();
    rep.potential_bound_satisfied = false;
  }
  return rep;
}

std::string to_key_value(const DualityReport& r) {
  std::ostringstream out;
  out << "primal_value=" << format_double(r.primal_value) << '\n'
      << "dual_value=" << format_double(r.dual_value) << '\n'
      << "relative_gap=" << format_double(r.relative_gap) << '\n'
      << "max_slackness_violation=" << format_double(r.max_slackness_violation) << '\n'
      << "max_dual_violation=" << format_double(r.max_dual_violation) << '\n'
      << "cost_scale=" << format_double(r.cost_scale) << '\n'
      << "diagonal_clearance_alpha=" << format_double(r.diagonal_clearance_alpha) << '\n'
      << "potential_sup=" << format_double(r.potential_sup) << '\n'
      << "potential_bound=" << format_double(r.potential_bound) << '\n'
      << "potential_bound_satisfied=" << (r.potential_bound_satisfied ? "true" : "false") << '\n';
  if (r.bound_params) {
    out << "bound_r=" << format_double(r.bound_params->r) << '\n'
        << "bound_k=" << format_double(r.bound_params->k) << '\n';
  }
  return out.str();
}

std::string to_json(const DualityReport& r) {
  // JSON has no infinity; non-finite values become null.
  auto num = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); };
  nlohmann::json j;
  j["primal_value"] = num(r.primal_value);
  j["dual_value"] = num(r.dual_value);
  j["relative_gap"] = num(r.relative_gap);
  j["max_slackness_violation"] = num(r.max_slackness_violation);
  j["max_dual_violation"] = num(r.max_dual_violation);
  j["cost_scale"] = num(r.cost_scale);
  j["diagonal_clearance_alpha"] = num(r.diagonal_clearance_alpha);
  j["potential_sup"] = num(r.potential_sup);
  j["potential_bound"] = num(r.potential_bound);
  j["potential_bound_satisfied"] = r.potential_bound_satisfied;
  if (r.bound_params) {
    j["bound_r"] = num(r.bound_params->r);
    j["bound_k"] = num(r.bound_params->k);
  }
  return j.dump(2);
}

}  // namespace mmot
