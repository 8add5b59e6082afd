#include "mmot/lp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "mmot/error.hpp"

namespace mmot {

const char* to_string(LPStatus status) {
  switch (status) {
    case LPStatus::optimal: return "optimal";
    case LPStatus::infeasible: return "infeasible";
    case LPStatus::unbounded: return "unbounded";
  }
  return "unknown";
}

RevisedSimplex::RevisedSimplex(std::vector<double> rhs, SimplexOptions options)
    : opt_(options), rhs_(std::move(rhs)) {
  const int m = rows();
  row_sign_.assign(m, 1.0);
  for (int r = 0; r < m; ++r) {
    if (!std::isfinite(rhs_[r])) fail(ErrorKind::InvalidConfig, "rhs entries must be finite");
    if (rhs_[r] < 0) {
      row_sign_[r] = -1.0;
      rhs_[r] = -rhs_[r];
    }
  }
  basis_.resize(m);
  for (int r = 0; r < m; ++r) basis_[r] = artificial(r);
  binv_ = Eigen::MatrixXd::Identity(m, m);
  xb_ = Eigen::Map<const Eigen::VectorXd>(rhs_.data(), m);
}

int RevisedSimplex::add_column(double cost, std::vector<Entry> entries) {
  if (!std::isfinite(cost)) fail(ErrorKind::InvalidConfig, "column costs must be finite");
  for (auto& [row, value] : entries) {
    if (row < 0 || row >= rows()) fail(ErrorKind::DimensionMismatch, "column row out of range");
    value *= row_sign_[row];
  }
  columns_.push_back({cost, std::move(entries)});
  basic_row_.push_back(-1);
  cost_scale_ = std::max(cost_scale_, std::abs(cost));
  return columns() - 1;
}

double RevisedSimplex::phase_cost(int var) const {
  if (is_artificial(var)) return phase_ == 1 ? 1.0 : 0.0;
  return phase_ == 1 ? 0.0 : columns_[var].cost;
}

long RevisedSimplex::bland_key(int var) const {
  return is_artificial(var) ? static_cast<long>(-var - 1) : rows() + static_cast<long>(var);
}

Eigen::VectorXd RevisedSimplex::compute_duals() const {
  const int m = rows();
  Eigen::VectorXd cb(m);
  for (int r = 0; r < m; ++r) cb[r] = phase_cost(basis_[r]);
  return binv_.transpose() * cb;
}

double RevisedSimplex::reduced_cost(int j, const Eigen::VectorXd& y) const {
  double d = phase_cost(j);
  for (const auto& [row, value] : columns_[j].entries) d -= y[row] * value;
  return d;
}

int RevisedSimplex::choose_entering(const Eigen::VectorXd& y) {
  const int n = columns();
  const double tol = opt_.optimality_tolerance * (phase_ == 1 ? 1.0 : cost_scale_);
  if (bland_) {
    for (int j = 0; j < n; ++j) {
      if (basic_row_[j] < 0 && reduced_cost(j, y) < -tol) return j;
    }
    return -1;
  }
  // Partial Dantzig pricing over segments of the pool, starting at the cursor.
  const int segment = n <= 2048 ? std::max(n, 1) : std::max(256, n / 8);
  int best = -1;
  double best_d = -tol;
  int scanned = 0;
  int j = n > 0 ? price_cursor_ % n : 0;
  while (scanned < n) {
    const int stop = std::min(scanned + segment, n);
    for (; scanned < stop; ++scanned, j = (j + 1) % n) {
      if (basic_row_[j] >= 0) continue;
      double d = reduced_cost(j, y);
      if (d < best_d) {
        best_d = d;
        best = j;
      }
    }
    if (best >= 0) break;
  }
  price_cursor_ = j;
  return best;
}

Eigen::VectorXd RevisedSimplex::ftran(int j) const {
  Eigen::VectorXd alpha = Eigen::VectorXd::Zero(rows());
  for (const auto& [row, value] : columns_[j].entries) alpha += value * binv_.col(row);
  return alpha;
}

void RevisedSimplex::pivot(int r, int entering, const Eigen::VectorXd& alpha, double dq) {
  const double p = alpha[r];
  if (std::abs(p) < opt_.breakdown_tolerance) {
    fail(ErrorKind::NumericalBreakdown, "pivot magnitude below breakdown tolerance");
  }
  const double theta = xb_[r] / p;
  xb_ -= theta * alpha;
  xb_[r] = theta;
  for (int i = 0; i < rows(); ++i) {
    if (xb_[i] < 0 && xb_[i] > -opt_.feasibility_tolerance) xb_[i] = 0.0;
  }
  // Rank-1 update of the inverse, touching only rows where alpha is nonzero.
  const Eigen::RowVectorXd pivot_row = binv_.row(r) / p;
  for (int i = 0; i < rows(); ++i) {
    if (i != r && alpha[i] != 0.0) binv_.row(i).noalias() -= alpha[i] * pivot_row;
  }
  binv_.row(r) = pivot_row;
  if (y_valid_) y_.noalias() += dq * pivot_row.transpose();
  const int leaving = basis_[r];
  if (!is_artificial(leaving)) basic_row_[leaving] = -1;
  basis_[r] = entering;
  basic_row_[entering] = r;
  ++iterations_;
  if (++since_refactor_ >= opt_.refactor_interval) refactor();
}

void RevisedSimplex::refactor() {
  const int m = rows();
  std::vector<Eigen::Triplet<double>> triplets;
  for (int r = 0; r < m; ++r) {
    const int var = basis_[r];
    if (is_artificial(var)) {
      triplets.emplace_back(-var - 1, r, 1.0);
    } else {
      for (const auto& [row, value] : columns_[var].entries) triplets.emplace_back(row, r, value);
    }
  }
  Eigen::SparseMatrix<double> basis(m, m);
  basis.setFromTriplets(triplets.begin(), triplets.end());
  basis.makeCompressed();
  Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> lu;
  lu.compute(basis);
  if (lu.info() != Eigen::Success) fail(ErrorKind::NumericalBreakdown, "basis matrix became singular");
  const Eigen::MatrixXd inverse = lu.solve(Eigen::MatrixXd::Identity(m, m));
  binv_ = inverse;
  // A near-singular basis shows up as a poor inverse.
  const double residual = m > 0 ? (basis * inverse - Eigen::MatrixXd::Identity(m, m)).cwiseAbs().maxCoeff() : 0.0;
  if (!(residual <= 1e-6)) fail(ErrorKind::NumericalBreakdown, "basis matrix is numerically singular");
  xb_ = binv_ * Eigen::Map<const Eigen::VectorXd>(rhs_.data(), m);
  y_valid_ = false;
  for (int i = 0; i < m; ++i) {
    if (xb_[i] < -1e3 * opt_.feasibility_tolerance) {
      fail(ErrorKind::NumericalBreakdown, "lost primal feasibility after refactorisation");
    }
    if (xb_[i] < 0) xb_[i] = 0.0;
  }
  since_refactor_ = 0;
}

double RevisedSimplex::infeasibility() const {
  double s = 0.0;
  for (int r = 0; r < rows(); ++r) {
    if (is_artificial(basis_[r])) s += xb_[r];
  }
  return s;
}

void RevisedSimplex::finish_phase_one() {
  phase_ = 2;
  y_valid_ = false;
  bland_ = false;
  degenerate_run_ = 0;
  // Pivot zero-level artificials out wherever a structural column reaches their row.
  for (int r = 0; r < rows(); ++r) {
    if (!is_artificial(basis_[r])) continue;
    const Eigen::RowVectorXd row = binv_.row(r);
    int best = -1;
    double best_abs = opt_.pivot_tolerance;
    for (int j = 0; j < columns(); ++j) {
      if (basic_row_[j] >= 0) continue;
      double v = 0.0;
      for (const auto& [i, value] : columns_[j].entries) v += row[i] * value;
      if (std::abs(v) > best_abs) {
        best_abs = std::abs(v);
        best = j;
      }
    }
    if (best >= 0) {
      xb_[r] = 0.0;
      pivot(r, best, ftran(best), 0.0);
    }
  }
}

LPStatus RevisedSimplex::run() {
  ray_.clear();
  const int m = rows();
  for (;;) {
    if (iterations_ >= opt_.max_iterations) {
      fail(ErrorKind::NumericalBreakdown, "simplex iteration limit reached");
    }
    if (phase_ == 1 && infeasibility() <= opt_.feasibility_tolerance) finish_phase_one();

    if (!y_valid_) {
      y_ = compute_duals();
      y_valid_ = true;
    }
    const int q = choose_entering(y_);
    if (q < 0) {
      if (phase_ == 1) return LPStatus::infeasible;
      return LPStatus::optimal;
    }
    const Eigen::VectorXd alpha = ftran(q);

    // Ratio test. Ties go to a zero-level artificial, then to Bland's order in
    // Bland mode, otherwise to the lexicographically smallest row of
    // [B^-1] / alpha_r, which rules out cycling under Dantzig pricing.
    double best_theta = std::numeric_limits<double>::infinity();
    std::vector<double> theta(m, -1.0);
    for (int r = 0; r < m; ++r) {
      const double a = alpha[r];
      if (phase_ == 2 && is_artificial(basis_[r])) {
        // Zero-level artificials on redundant rows must stay at zero.
        if (std::abs(a) <= opt_.pivot_tolerance) continue;
        theta[r] = 0.0;
      } else {
        if (a <= opt_.pivot_tolerance) continue;
        theta[r] = std::max(xb_[r], 0.0) / a;
      }
      best_theta = std::min(best_theta, theta[r]);
    }
    int leave = -1;
    auto lex_less = [&](int r1, int r2) {
      for (int k = 0; k < m; ++k) {
        const double v1 = binv_(r1, k) / alpha[r1];
        const double v2 = binv_(r2, k) / alpha[r2];
        if (v1 < v2 - 1e-12) return true;
        if (v1 > v2 + 1e-12) return false;
      }
      return r1 < r2;
    };
    for (int r = 0; r < m; ++r) {
      if (theta[r] < 0 || theta[r] > best_theta + 1e-12) continue;
      if (leave < 0) {
        leave = r;
        continue;
      }
      const bool art_r = phase_ == 2 && is_artificial(basis_[r]);
      const bool art_l = phase_ == 2 && is_artificial(basis_[leave]);
      bool take;
      if (art_r != art_l) {
        take = art_r;
      } else if (art_r) {
        take = std::abs(alpha[r]) > std::abs(alpha[leave]);
      } else if (bland_) {
        take = bland_key(basis_[r]) < bland_key(basis_[leave]);
      } else {
        take = lex_less(r, leave);
      }
      if (take) leave = r;
    }
    if (leave < 0) {
      if (phase_ == 1) {
        fail(ErrorKind::NumericalBreakdown, "phase one reported an unbounded direction");
      }
      ray_.assign(columns(), 0.0);
      ray_[q] = 1.0;
      for (int r = 0; r < m; ++r) {
        if (!is_artificial(basis_[r])) ray_[basis_[r]] = -alpha[r];
      }
      return LPStatus::unbounded;
    }
    if (is_artificial(basis_[leave]) && phase_ == 2) xb_[leave] = 0.0;

    if (theta[leave] <= 1e-12) {
      if (opt_.degenerate_switch > 0 && ++degenerate_run_ >= opt_.degenerate_switch) bland_ = true;
    } else {
      degenerate_run_ = 0;
      bland_ = false;
    }
    pivot(leave, q, alpha, reduced_cost(q, y_));
  }
}

std::vector<double> RevisedSimplex::duals() const {
  Eigen::VectorXd y = compute_duals();
  std::vector<double> out(rows());
  for (int r = 0; r < rows(); ++r) out[r] = row_sign_[r] * y[r];
  return out;
}

std::vector<double> RevisedSimplex::primal() const {
  std::vector<double> x(columns(), 0.0);
  for (int r = 0; r < rows(); ++r) {
    if (!is_artificial(basis_[r])) x[basis_[r]] = std::max(xb_[r], 0.0);
  }
  return x;
}

double RevisedSimplex::objective() const {
  double v = 0.0;
  for (int r = 0; r < rows(); ++r) {
    if (!is_artificial(basis_[r])) v += columns_[basis_[r]].cost * std::max(xb_[r], 0.0);
  }
  return v;
}

LPSolution solve_lp(const StandardLP& problem, const SimplexOptions& options) {
  const auto& a = problem.constraints;
  if (static_cast<std::size_t>(a.rows()) != problem.rhs.size() ||
      static_cast<std::size_t>(a.cols()) != problem.objective.size()) {
    fail(ErrorKind::DimensionMismatch, "LP dimensions are inconsistent");
  }
  RevisedSimplex simplex(problem.rhs, options);
  for (int j = 0; j < a.outerSize(); ++j) {
    std::vector<RevisedSimplex::Entry> entries;
    for (Eigen::SparseMatrix<double>::InnerIterator it(a, j); it; ++it) {
      if (it.value() != 0.0) entries.emplace_back(static_cast<int>(it.row()), it.value());
    }
    simplex.add_column(problem.objective[j], std::move(entries));
  }
  LPSolution sol;
  sol.status = simplex.run();
  if (sol.status == LPStatus::optimal) simplex.refactor();
  sol.primal = simplex.primal();
  sol.dual = simplex.duals();
  sol.iterations = simplex.iterations();
  if (sol.status == LPStatus::optimal) {
    sol.objective_value = simplex.objective();
  } else if (sol.status == LPStatus::infeasible) {
    sol.objective_value = std::numeric_limits<double>::infinity();
    sol.certificate = sol.dual;
  } else {
    sol.objective_value = -std::numeric_limits<double>::infinity();
    sol.certificate = simplex.ray();
  }
  return sol;
}

LPCertificate certify(const StandardLP& problem, const LPSolution& solution) {
  const auto& a = problem.constraints;
  LPCertificate cert;
  std::vector<double> ax(problem.rhs.size(), 0.0);
  double primal_obj = 0.0;
  cert.min_primal = std::numeric_limits<double>::infinity();
  cert.min_reduced_cost = std::numeric_limits<double>::infinity();
  for (int j = 0; j < a.outerSize(); ++j) {
    double d = problem.objective[j];
    for (Eigen::SparseMatrix<double>::InnerIterator it(a, j); it; ++it) {
      ax[it.row()] += it.value() * solution.primal[j];
      d -= it.value() * solution.dual[it.row()];
    }
    primal_obj += problem.objective[j] * solution.primal[j];
    cert.min_primal = std::min(cert.min_primal, solution.primal[j]);
    cert.min_reduced_cost = std::min(cert.min_reduced_cost, d);
  }
  double dual_obj = 0.0;
  for (std::size_t r = 0; r < ax.size(); ++r) {
    cert.primal_residual = std::max(cert.primal_residual, std::abs(ax[r] - problem.rhs[r]));
    dual_obj += solution.dual[r] * problem.rhs[r];
  }
  cert.relative_gap = std::abs(primal_obj - dual_obj) / (1.0 + std::abs(primal_obj));
  return cert;
}

}  // namespace mmot
