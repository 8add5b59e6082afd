#include "mmot/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <ostream>
#include <set>

#include "mmot/error.hpp"
#include "mmot/text_format.hpp"

namespace mmot {

CostModel make_cost_model(int marginals, double exponent) {
  return exponent == 1.0 ? CostModel::coulomb(marginals) : CostModel::power(marginals, exponent);
}

CostMode resolve_mode(const std::optional<CostMode>& mode, const DensitySpec& density) {
  if (mode) return *mode;
  return is_atomic(density) ? CostMode::pointwise : CostMode::cell_lower;
}

namespace {

constexpr std::size_t kWarmStartCap = 200'000;

std::vector<CellTuple> refine_support(const TransportPlan& plan, const GridSpec& fine) {
  std::vector<CellTuple> out;
  for (const auto& [tuple, w] : plan.atoms()) {
    std::vector<std::vector<CellIndex>> kids;
    for (const auto& cell : tuple) kids.push_back(children(cell, plan.grid()));
    std::vector<std::size_t> d(tuple.size(), 0);
    for (;;) {
      if (out.size() >= kWarmStartCap) return out;
      CellTuple t;
      for (std::size_t i = 0; i < d.size(); ++i) t.push_back(kids[i][d[i]]);
      bool inside = true;
      for (const auto& cell : t) inside = inside && contains(fine, cell);
      if (inside) out.push_back(std::move(t));
      int i = static_cast<int>(d.size()) - 1;
      while (i >= 0 && ++d[i] == kids[i].size()) d[i--] = 0;
      if (i < 0) break;
    }
  }
  return out;
}

}  // namespace

ConvergenceTable converge(const ConvergeConfig& config) {
  const CostModel model = make_cost_model(config.marginals, config.exponent);
  const CostMode mode = resolve_mode(config.mode, config.density);
  ConvergenceTable table;
  std::optional<TransportPlan> previous;
  double finest_upper = std::numeric_limits<double>::quiet_NaN();

  for (int level = config.first_level; level <= config.last_level; ++level) {
    ConvergenceRow row;
    row.level = level;
    const auto start = std::chrono::steady_clock::now();
    try {
      const GridSpec grid(level, config.R, config.dim);
      const DiscreteMeasure measure = discretize(config.density, grid, config.samples);
      row.support = measure.size();
      const CostEvaluator cost(model, measure, mode);
      std::vector<CellTuple> warm;
      if (config.warm_start && previous && previous->grid().level() + 1 == level) {
        warm = refine_support(*previous, grid);
      }
      const MMOTSolution sol = solve_mmot(measure, cost, config.solver, warm);
      row.primal = sol.plan.cost(cost);
      row.dual = sol.dual_value;
      row.gap = std::abs(row.primal - row.dual) / (1 + std::abs(row.primal));
      row.alpha = diagonal_clearance(sol.plan, config.R);
      const auto sym = symmetrize_potentials(sol.potentials);
      for (double v : *sym.symmetrized) row.pot_sup = std::max(row.pot_sup, std::abs(v));
      for (const auto& [tuple, w] : sol.plan.atoms()) {
        double s = 0.0;
        for (int i = 0; i < config.marginals; ++i) s += sol.potentials.at(i, tuple[i]);
        row.slackness = std::max(row.slackness, cost(tuple) - s);
      }
      try {
        const auto bp = bound_parameters(sol.plan, measure, model, config.R, config.m_fraction);
        row.r = bp.r;
        row.k = bp.k;
        row.bound = potential_bound(config.marginals, bp.r, bp.k);
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::NoOffDiagonalSupport) throw;
        row.r = row.k = row.bound = std::numeric_limits<double>::quiet_NaN();
      }
      finest_upper = product_plan_cost(measure, cost);
      previous = sol.plan;
      row.ok = true;
    } catch (const Error& e) {
      row.error = std::string(to_string(e.kind())) + ": " + e.what();
      previous.reset();
    }
    if (config.timing) {
      row.ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    }
    table.rows.push_back(std::move(row));
  }
  table.reference_upper = finest_upper;
  return table;
}

std::vector<std::string> check_table(const ConvergenceTable& table, double gap_tol) {
  std::vector<std::string> issues;
  const ConvergenceRow* last = nullptr;
  for (const auto& row : table.rows) {
    const std::string tag = "level " + std::to_string(row.level) + ": ";
    if (!row.ok) {
      issues.push_back(tag + "solve failed (" + row.error + ")");
      continue;
    }
    if (!(row.gap <= gap_tol)) issues.push_back(tag + "gap " + format_double(row.gap) + " above tolerance");
    if (last && row.primal < last->primal - 1e-10 * (1 + std::abs(last->primal))) {
      issues.push_back(tag + "primal value decreased from " + format_double(last->primal) + " to " +
                       format_double(row.primal));
    }
    if (std::isfinite(table.reference_upper) &&
        row.primal > table.reference_upper + 1e-10 * (1 + std::abs(table.reference_upper))) {
      issues.push_back(tag + "primal value exceeds the product-plan bracket");
    }
    if (std::isfinite(row.bound) && !(row.pot_sup <= row.bound)) {
      issues.push_back(tag + "potential sup-norm exceeds the bound");
    }
    last = &row;
  }
  return issues;
}

double r_variation(const ConvergenceTable& table) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = 0.0;
  int count = 0;
  for (const auto& row : table.rows) {
    if (!row.ok || !std::isfinite(row.r)) continue;
    lo = std::min(lo, row.r);
    hi = std::max(hi, row.r);
    ++count;
  }
  return count < 2 ? 0.0 : (hi - lo) / lo;
}

void write_csv(std::ostream& out, const ConvergenceTable& table) {
  out << "level,primal,dual,gap,alpha,pot_sup,bound,ms\n";
  for (const auto& row : table.rows) {
    out << row.level;
    if (row.ok) {
      for (double v : {row.primal, row.dual, row.gap, row.alpha, row.pot_sup, row.bound}) {
        out << ',' << format_double(v);
      }
    } else {
      out << ",nan,nan,nan,nan,nan,nan";
    }
    out << ',' << format_double(row.ms) << '\n';
  }
}

void write_key_value(std::ostream& out, const ConvergenceTable& table) {
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto& row = table.rows[i];
    if (i) out << '\n';
    out << "level=" << row.level << '\n' << "status=" << (row.ok ? "ok" : "failed") << '\n';
    if (!row.ok) {
      out << "error=" << row.error << '\n';
      continue;
    }
    out << "primal=" << format_double(row.primal) << '\n'
        << "dual=" << format_double(row.dual) << '\n'
        << "gap=" << format_double(row.gap) << '\n'
        << "alpha=" << format_double(row.alpha) << '\n'
        << "pot_sup=" << format_double(row.pot_sup) << '\n'
        << "bound=" << format_double(row.bound) << '\n'
        << "r=" << format_double(row.r) << '\n'
        << "k=" << format_double(row.k) << '\n'
        << "slackness=" << format_double(row.slackness) << '\n'
        << "support=" << row.support << '\n'
        << "ms=" << format_double(row.ms) << '\n';
  }
  out << "\nreference_upper=" << format_double(table.reference_upper) << '\n';
}

TransportPlan diagonal_plan(const DiscreteMeasure& measure, int marginals) {
  std::map<CellTuple, double> atoms;
  for (const auto& [cell, w] : measure.atoms()) atoms.emplace(CellTuple(marginals, cell), w);
  return TransportPlan(measure.grid(), marginals, std::move(atoms));
}

SwapSearchResult swap_search(const TransportPlan& plan, const CostEvaluator& cost, int max_rounds) {
  SwapSearchResult result{plan, plan.cost(cost), {}};
  const GridSpec& grid = plan.grid();
  const int n = plan.marginals();

  auto center_distance = [&](const CellIndex& a, const CellIndex& b) {
    const Point p = cell_center(a, grid), q = cell_center(b, grid);
    double s = 0.0;
    for (std::size_t k = 0; k < p.size(); ++k) s += (p[k] - q[k]) * (p[k] - q[k]);
    return std::sqrt(s);
  };

  for (int round = 1; round <= max_rounds; ++round) {
    std::vector<std::pair<double, CellTuple>> anchors;
    for (const auto& [tuple, w] : result.plan.atoms()) {
      double clearance = std::numeric_limits<double>::infinity();
      for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) clearance = std::min(clearance, center_distance(tuple[i], tuple[j]));
      }
      anchors.emplace_back(clearance, tuple);
    }
    std::stable_sort(anchors.begin(), anchors.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });

    bool improved = false;
    for (std::size_t a = 0; a < anchors.size() && !improved; ++a) {
      std::vector<CellTuple> chosen{anchors[a].second};
      std::set<CellIndex> used(chosen[0].begin(), chosen[0].end());
      for (std::size_t b = 0; b < anchors.size() && static_cast<int>(chosen.size()) < n; ++b) {
        if (b == a) continue;
        const auto& t = anchors[b].second;
        if (std::any_of(t.begin(), t.end(), [&](const CellIndex& c) { return used.contains(c); })) continue;
        chosen.push_back(t);
        used.insert(t.begin(), t.end());
      }
      if (static_cast<int>(chosen.size()) < n) continue;

      double separation = std::numeric_limits<double>::infinity();
      for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
          for (const auto& p : chosen[i]) {
            for (const auto& q : chosen[j]) separation = std::min(separation, center_distance(p, q));
          }
        }
      }
      std::optional<SwapResult> best;
      double best_radius = 0.0;
      double radius = separation / 2;
      for (int step = 0; step <= 6; ++step, radius /= 2) {
        try {
          auto trial = swap_improve(result.plan, cost, chosen, std::vector<double>(n, radius));
          if (!best || trial.cost < best->cost) {
            best = std::move(trial);
            best_radius = radius;
          }
        } catch (const Error& e) {
          if (e.kind() != ErrorKind::EmptyRestriction && e.kind() != ErrorKind::OverlappingNeighborhoods) throw;
        }
      }
      if (best && best->cost < result.cost - 1e-9 * (1 + std::abs(result.cost))) {
        result.log.push_back({round, anchors[a].second, best_radius, result.cost, best->cost});
        result.plan = std::move(best->plan);
        result.cost = best->cost;
        improved = true;
      }
    }
    if (!improved) break;
  }
  return result;
}

}  // namespace mmot
