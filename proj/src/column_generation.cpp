#include "mmot/column_generation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <thread>
#include <unordered_set>

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseCore>

#include "mmot/error.hpp"

namespace mmot {

int resolve_threads(int requested) {
  if (requested > 0) return requested;
  return static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
}

namespace {

constexpr double kMassFloor = 1e-14;

/// Mixed-radix enumeration of index tuples; the first slot is most significant.
class TupleSpace {
 public:
  explicit TupleSpace(std::vector<std::uint32_t> sizes) : sizes_(std::move(sizes)) {
    total_ = 1;
    for (auto m : sizes_) {
      if (m == 0) fail(ErrorKind::InvalidConfig, "marginal with no indices");
      if (total_ > (std::uint64_t{1} << 62) / m) {
        fail(ErrorKind::InvalidConfig, "tuple space too large to enumerate");
      }
      total_ *= m;
    }
  }

  std::uint64_t total() const { return total_; }
  std::size_t slots() const { return sizes_.size(); }
  std::uint32_t size(std::size_t slot) const { return sizes_[slot]; }

  void decode(std::uint64_t index, std::vector<std::uint32_t>& digits) const {
    digits.resize(sizes_.size());
    for (std::size_t i = sizes_.size(); i-- > 0;) {
      digits[i] = static_cast<std::uint32_t>(index % sizes_[i]);
      index /= sizes_[i];
    }
  }

  std::uint64_t encode(std::span<const std::uint32_t> digits) const {
    std::uint64_t index = 0;
    for (std::size_t i = 0; i < sizes_.size(); ++i) index = index * sizes_[i] + digits[i];
    return index;
  }

  /// Advances to the next index, wrapping from the last tuple to the first.
  void increment(std::vector<std::uint32_t>& digits) const {
    for (std::size_t i = sizes_.size(); i-- > 0;) {
      if (++digits[i] < sizes_[i]) return;
      digits[i] = 0;
    }
  }

 private:
  std::vector<std::uint32_t> sizes_;
  std::uint64_t total_;
};

struct Hit {
  std::uint64_t index;
  double reduced_cost;
};

using ReducedCost = std::function<double(std::span<const std::uint32_t>)>;

struct ScanResult {
  std::vector<Hit> hits;
  std::uint64_t next_offset = 0;
  std::uint64_t scanned = 0;
};

/// First `limit` tuples (cyclically from `offset`) whose reduced cost is below
/// -tolerance. Work is split into fixed chunks, so the result does not depend
/// on the thread count.
ScanResult cyclic_scan(const TupleSpace& space, std::uint64_t offset, std::size_t limit,
                       int threads, const ReducedCost& reduced, double tolerance) {
  constexpr std::uint64_t chunk = 1 << 15;
  const std::uint64_t total = space.total();
  ScanResult result;
  result.next_offset = offset;
  std::vector<std::vector<Hit>> parts(threads);
  std::vector<std::uint64_t> counted(threads);

  auto work = [&](std::uint64_t done, int t) {
    parts[t].clear();
    counted[t] = 0;
    const std::uint64_t begin = done + t * chunk;
    if (begin >= total) return;
    const std::uint64_t end = std::min(begin + chunk, total);
    std::vector<std::uint32_t> digits;
    space.decode((offset + begin) % total, digits);
    for (std::uint64_t k = begin; k < end; ++k) {
      const double d = reduced(digits);
      ++counted[t];
      if (d < -tolerance) {
        parts[t].push_back({space.encode(digits), d});
        if (parts[t].size() >= limit) return;
      }
      space.increment(digits);
    }
  };

  for (std::uint64_t done = 0; done < total; done += threads * chunk) {
    if (threads == 1) {
      work(done, 0);
    } else {
      std::vector<std::thread> pool;
      for (int t = 0; t < threads; ++t) pool.emplace_back(work, done, t);
      for (auto& th : pool) th.join();
    }
    for (int t = 0; t < threads; ++t) {
      result.scanned += counted[t];
      for (const auto& hit : parts[t]) {
        result.hits.push_back(hit);
        if (result.hits.size() >= limit) {
          result.next_offset = (hit.index + 1) % total;
          return result;
        }
      }
    }
  }
  return result;
}

/// Staircase (north-west corner) plan over rotated index orders: a column set
/// that contains a feasible plan whenever the rotation keeps its tuples finite.
std::vector<std::vector<std::uint32_t>> staircase(const std::vector<std::vector<double>>& w) {
  const std::size_t n = w.size();
  std::vector<std::uint32_t> shift(n), pos(n, 0);
  std::vector<double> left(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto m = static_cast<std::uint32_t>(w[i].size());
    shift[i] = static_cast<std::uint32_t>((i * ((m + n - 1) / n)) % m);
    left[i] = w[i][shift[i]];
  }
  std::vector<std::vector<std::uint32_t>> out;
  for (;;) {
    std::vector<std::uint32_t> tuple(n);
    for (std::size_t i = 0; i < n; ++i) {
      tuple[i] = static_cast<std::uint32_t>((pos[i] + shift[i]) % w[i].size());
    }
    out.push_back(std::move(tuple));
    const double delta = *std::min_element(left.begin(), left.end());
    bool finished = false;
    for (std::size_t i = 0; i < n; ++i) {
      left[i] -= delta;
      if (left[i] > 1e-13) continue;
      if (pos[i] + 1 == w[i].size()) {
        finished = true;
      } else {
        ++pos[i];
        left[i] = w[i][(pos[i] + shift[i]) % w[i].size()];
      }
    }
    if (finished) break;
  }
  return out;
}

double neumaier_dot(const std::vector<double>& a, const std::vector<double>& b) {
  double sum = 0.0, comp = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double v = a[i] * b[i];
    const double t = sum + v;
    comp += std::abs(sum) >= std::abs(v) ? (sum - t) + v : (v - t) + sum;
    sum = t;
  }
  return sum + comp;
}

/// Least-norm point of {v : sum_k v(t_k) = sum_k base(t_k) for every support
/// tuple t}, then the longest step from base toward it that keeps
/// sum_k v(t_k) <= cost(t) on every finite tuple. CGLS started at zero stays in
/// the row space, so its limit is the least-norm solution. Empty when the mean
/// of the vertex duals is not tight on the support, which leaves no optimal
/// segment to move along.
std::optional<std::vector<double>> centered_potential(const TupleSpace& space,
                                       const std::vector<std::vector<std::uint32_t>>& support,
                                       const std::vector<std::vector<double>>& potentials,
                                       const ReducedCost& cost, double scale, int threads) {
  const std::size_t n = space.slots();
  const std::size_t m = space.size(0);
  std::vector<double> base(m, 0.0);
  for (std::size_t c = 0; c < m; ++c) {
    for (std::size_t i = 0; i < n; ++i) base[c] += potentials[i][c];
    base[c] /= static_cast<double>(n);
  }
  if (support.empty()) return base;
  const double tight_tol = 1e-12 * std::max(1.0, scale);
  for (const auto& t : support) {
    double level = 0.0;
    for (auto c : t) level += base[c];
    if (std::abs(cost(t) - level) > tight_tol) return std::nullopt;
  }

  std::vector<Eigen::Triplet<double>> entries;
  for (std::size_t r = 0; r < support.size(); ++r) {
    for (auto c : support[r]) entries.emplace_back(static_cast<int>(r), static_cast<int>(c), 1.0);
  }
  Eigen::SparseMatrix<double> tight(static_cast<Eigen::Index>(support.size()), static_cast<Eigen::Index>(m));
  tight.setFromTriplets(entries.begin(), entries.end());  // duplicates add up
  const Eigen::Map<const Eigen::VectorXd> b0(base.data(), static_cast<Eigen::Index>(m));
  const Eigen::VectorXd rhs = tight * b0;
  Eigen::LeastSquaresConjugateGradient<Eigen::SparseMatrix<double>, Eigen::IdentityPreconditioner> cgls;
  cgls.setTolerance(1e-15);
  cgls.setMaxIterations(static_cast<Eigen::Index>(20 * m + 100));
  cgls.compute(tight);
  const Eigen::VectorXd target = cgls.solve(rhs);
  const double rhs_norm = rhs.cwiseAbs().maxCoeff();
  if (!target.allFinite() || (tight * target - rhs).cwiseAbs().maxCoeff() > 1e-12 * (1.0 + rhs_norm)) {
    return base;
  }

  std::vector<double> delta(m);
  for (std::size_t c = 0; c < m; ++c) delta[c] = target[static_cast<Eigen::Index>(c)] - base[c];
  const double negligible = 1e-15 * std::max(1.0, scale);
  const std::uint64_t total = space.total();
  std::vector<double> step(threads, 1.0);
  auto work = [&](int t) {
    const std::uint64_t begin = total * t / threads, end = total * (t + 1) / threads;
    if (begin >= end) return;
    std::vector<std::uint32_t> digits;
    space.decode(begin, digits);
    for (std::uint64_t k = begin; k < end; ++k, space.increment(digits)) {
      double rise = 0.0, level = 0.0;
      for (auto c : digits) {
        rise += delta[c];
        level += base[c];
      }
      if (rise <= negligible) continue;
      const double c = cost(digits);
      if (!std::isfinite(c)) continue;
      step[t] = std::min(step[t], std::max(0.0, c - level) / rise);
    }
  };
  if (threads == 1) {
    work(0);
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(work, t);
    for (auto& th : pool) th.join();
  }
  const double lambda = *std::min_element(step.begin(), step.end());
  std::vector<double> out(m);
  for (std::size_t c = 0; c < m; ++c) out[c] = base[c] + lambda * delta[c];
  return out;
}

}  // namespace

TransportSolution solve_transport(const TransportProblem& problem,
                                  const ColumnGenerationOptions& options,
                                  const std::vector<std::vector<std::uint32_t>>& warm_start) {
  const std::size_t n = problem.weights.size();
  if (n < 2) fail(ErrorKind::InvalidConfig, "transport problem needs at least two marginals");
  if (!problem.cost) fail(ErrorKind::InvalidConfig, "transport problem has no cost");
  std::vector<std::uint32_t> sizes;
  for (const auto& w : problem.weights) {
    for (double v : w) {
      if (!(v >= 0) || !std::isfinite(v)) fail(ErrorKind::NegativeWeight, "marginal weights must be nonnegative");
    }
    sizes.push_back(static_cast<std::uint32_t>(w.size()));
  }
  const TupleSpace space(sizes);
  const int threads = resolve_threads(options.threads);

  // Row layout: slot 0 keeps all its rows, later slots drop their last index.
  std::vector<int> row_base(n, 0);
  std::vector<double> rhs(problem.weights[0]);
  for (std::size_t i = 1; i < n; ++i) {
    row_base[i] = static_cast<int>(rhs.size());
    rhs.insert(rhs.end(), problem.weights[i].begin(), problem.weights[i].end() - 1);
  }
  auto row_of = [&](std::size_t slot, std::uint32_t c) -> int {
    if (slot > 0 && c + 1 == sizes[slot]) return -1;
    return row_base[slot] + static_cast<int>(c);
  };

  RevisedSimplex simplex(rhs, options.simplex);
  std::vector<std::uint64_t> column_index;
  std::unordered_set<std::uint64_t> pooled;
  std::vector<std::uint32_t> digits;

  auto add = [&](std::uint64_t index) {
    if (pooled.contains(index)) return false;
    space.decode(index, digits);
    const double c = problem.cost(digits);
    if (!std::isfinite(c)) return false;
    std::vector<RevisedSimplex::Entry> entries;
    for (std::size_t i = 0; i < n; ++i) {
      const int r = row_of(i, digits[i]);
      if (r >= 0) entries.emplace_back(r, 1.0);
    }
    simplex.add_column(c, std::move(entries));
    column_index.push_back(index);
    pooled.insert(index);
    return true;
  };

  if (space.total() <= options.full_seed_limit) {
    for (std::uint64_t t = 0; t < space.total(); ++t) add(t);
  } else {
    for (const auto& tuple : staircase(problem.weights)) add(space.encode(tuple));
  }
  for (const auto& tuple : warm_start) {
    if (tuple.size() != n) fail(ErrorKind::DimensionMismatch, "warm-start tuple has the wrong arity");
    for (std::size_t i = 0; i < n; ++i) {
      if (tuple[i] >= sizes[i]) fail(ErrorKind::DimensionMismatch, "warm-start index out of range");
    }
    add(space.encode(tuple));
  }

  TransportSolution sol;
  sol.stats.seed_columns = column_index.size();
  std::vector<std::vector<double>> u(n);
  for (std::size_t i = 0; i < n; ++i) u[i].assign(sizes[i], 0.0);
  auto load_potentials = [&] {
    const auto y = simplex.duals();
    for (std::size_t i = 0; i < n; ++i) {
      for (std::uint32_t c = 0; c < sizes[i]; ++c) {
        const int r = row_of(i, c);
        u[i][c] = r >= 0 ? y[r] : 0.0;
      }
    }
  };
  auto potential_sum = [&](std::span<const std::uint32_t> d) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += u[i][d[i]];
    return s;
  };
  const ReducedCost phase_two = [&](std::span<const std::uint32_t> d) {
    return problem.cost(d) - potential_sum(d);
  };
  const ReducedCost phase_one = [&](std::span<const std::uint32_t> d) {
    if (!std::isfinite(problem.cost(d))) return std::numeric_limits<double>::infinity();
    return -potential_sum(d);
  };

  std::uint64_t offset = 0;
  for (;;) {
    if (sol.stats.rounds >= options.max_rounds) {
      fail(ErrorKind::NumericalBreakdown, "column generation round limit reached");
    }
    ++sol.stats.rounds;
    const LPStatus status = simplex.run();
    if (status == LPStatus::unbounded) {
      fail(ErrorKind::NumericalBreakdown, "transport LP reported unbounded");
    }
    load_potentials();
    const bool phase_one_active = simplex.phase() == 1;
    const double tol = options.pricing_tolerance * (phase_one_active ? 1.0 : problem.cost_scale);
    auto scan = cyclic_scan(space, offset, options.batch, threads,
                            phase_one_active ? phase_one : phase_two, tol);
    sol.stats.tuples_scanned += scan.scanned;
    offset = scan.next_offset;
    if (scan.hits.empty()) {
      if (phase_one_active) {
        fail(ErrorKind::Infeasible, "no finite-cost plan matches the marginals");
      }
      break;
    }
    bool added = false;
    for (const auto& hit : scan.hits) added |= add(hit.index);
    if (!added) fail(ErrorKind::NumericalBreakdown, "pricing returned only pooled columns");
  }

  simplex.refactor();
  load_potentials();
  const auto x = simplex.primal();
  for (std::size_t j = 0; j < x.size(); ++j) {
    // Degenerate basics carry roundoff residue; far below the 1e-10 marginal tolerance.
    if (x[j] <= kMassFloor) continue;
    space.decode(column_index[j], digits);
    sol.tuples.push_back(digits);
    sol.mass.push_back(x[j]);
  }
  sol.primal_value = simplex.objective();
  sol.potentials = u;
  for (std::size_t i = 0; i < n; ++i) sol.dual_value += neumaier_dot(u[i], problem.weights[i]);
  sol.stats.columns = column_index.size();
  sol.stats.simplex_iterations = simplex.iterations();
  return sol;
}

std::vector<PricedColumn> price_columns(const PotentialVector& duals,
                                        const std::function<double(const CellTuple&)>& cost,
                                        double tolerance, int threads) {
  const auto& cells = duals.cells();
  const int n = duals.marginals();
  if (cells.empty() || n == 0) return {};
  const TupleSpace space(std::vector<std::uint32_t>(n, static_cast<std::uint32_t>(cells.size())));
  const auto& u = duals.values();
  const ReducedCost reduced = [&](std::span<const std::uint32_t> d) {
    CellTuple tuple;
    double s = 0.0;
    for (int i = 0; i < n; ++i) {
      tuple.push_back(cells[d[i]]);
      s += u[i][d[i]];
    }
    return cost(tuple) - s;
  };
  auto scan = cyclic_scan(space, 0, std::numeric_limits<std::size_t>::max(),
                          resolve_threads(threads), reduced, tolerance);
  std::vector<PricedColumn> out;
  std::vector<std::uint32_t> digits;
  for (const auto& hit : scan.hits) {
    space.decode(hit.index, digits);
    CellTuple tuple;
    for (auto c : digits) tuple.push_back(cells[c]);
    out.push_back({std::move(tuple), hit.reduced_cost});
  }
  return out;
}

MMOTSolution solve_mmot(const DiscreteMeasure& measure, const CostEvaluator& cost,
                        const ColumnGenerationOptions& options,
                        const std::vector<CellTuple>& warm_start) {
  const int n = cost.marginals();
  if (!(cost.grid() == measure.grid())) {
    fail(ErrorKind::DimensionMismatch, "cost and measure use different grids");
  }
  if (support_cardinality(measure) < static_cast<std::size_t>(n)) {
    fail(ErrorKind::InsufficientSupport,
         "measure has " + std::to_string(measure.size()) + " atoms but N = " + std::to_string(n));
  }
  const auto cells = measure.cells();
  const PairCostTable table(cost, cells);
  TransportProblem problem;
  problem.weights.assign(n, measure.weight_vector());
  problem.cost = [&table](std::span<const std::uint32_t> d) { return table.tuple_cost(d); };
  problem.cost_scale = table.cost_scale();

  std::map<CellIndex, std::uint32_t> position;
  for (std::size_t c = 0; c < cells.size(); ++c) position.emplace(cells[c], static_cast<std::uint32_t>(c));
  std::vector<std::vector<std::uint32_t>> warm;
  for (const auto& tuple : warm_start) {
    if (static_cast<int>(tuple.size()) != n) continue;
    std::vector<std::uint32_t> d;
    for (const auto& cell : tuple) {
      auto it = position.find(cell);
      if (it == position.end()) break;
      d.push_back(it->second);
    }
    if (static_cast<int>(d.size()) == n) warm.push_back(std::move(d));
  }

  auto sol = solve_transport(problem, options, warm);
  if (options.center_potentials) {
    std::vector<std::uint32_t> sizes(n, static_cast<std::uint32_t>(cells.size()));
    const auto u = centered_potential(TupleSpace(sizes), sol.tuples, sol.potentials, problem.cost,
                                      problem.cost_scale, resolve_threads(options.threads));
    if (u) {
      sol.potentials.assign(n, *u);
      sol.dual_value = n * neumaier_dot(*u, problem.weights[0]);
    }
  }
  std::map<CellTuple, double> atoms;
  for (std::size_t k = 0; k < sol.tuples.size(); ++k) {
    CellTuple tuple;
    for (auto c : sol.tuples[k]) tuple.push_back(cells[c]);
    atoms[std::move(tuple)] += sol.mass[k];
  }
  return MMOTSolution{TransportPlan(measure.grid(), n, std::move(atoms)),
                      PotentialVector(measure.grid(), cells, std::move(sol.potentials)),
                      sol.primal_value, sol.dual_value, sol.stats};
}

}  // namespace mmot
