#pragma once

#include <Eigen/Dense>
#include <Eigen/SparseCore>
#include <Eigen/SparseLU>
#include <cstdint>
#include <utility>
#include <vector>

namespace mmot {

/// min c.x  subject to  A x = b,  x >= 0.
struct StandardLP {
  std::vector<double> objective;
  Eigen::SparseMatrix<double> constraints;  // rows = equality constraints
  std::vector<double> rhs;
};

enum class LPStatus { optimal, infeasible, unbounded };

const char* to_string(LPStatus status);

struct LPSolution {
  LPStatus status = LPStatus::infeasible;
  std::vector<double> primal;  // one value per column
  std::vector<double> dual;    // one multiplier per constraint row
  double objective_value = 0.0;
  /// infeasible: y with y.A <= 0 and y.b > 0.  unbounded: ray d >= 0 with A d = 0, c.d < 0.
  std::vector<double> certificate;
  long iterations = 0;
};

struct SimplexOptions {
  double pivot_tolerance = 1e-9;       // smallest |alpha| accepted in the ratio test
  double breakdown_tolerance = 1e-12;  // singular-basis threshold
  double feasibility_tolerance = 1e-9;
  double optimality_tolerance = 1e-11;  // relative to the largest |cost|
  int refactor_interval = 128;
  /// Consecutive degenerate pivots before switching to Bland's rule; 0 never
  /// switches. The lexicographic ratio test already prevents cycling, and
  /// Bland's rule stalls badly on degenerate transport bases.
  int degenerate_switch = 0;
  long max_iterations = 10'000'000;
};

/// Residuals of an optimal LP solution.
struct LPCertificate {
  double primal_residual = 0.0;     // max |A x - b|
  double min_primal = 0.0;          // min x_j
  double min_reduced_cost = 0.0;    // min c_j - y.a_j
  double relative_gap = 0.0;        // |c.x - y.b| / (1 + |c.x|)
};

LPSolution solve_lp(const StandardLP& problem, const SimplexOptions& options = {});
LPCertificate certify(const StandardLP& problem, const LPSolution& solution);

/// Two-phase revised simplex on a growing column pool. Phase one minimises the
/// sum of one artificial per row; artificials never re-enter once they leave.
/// Rows whose artificial cannot be pivoted out are redundant and keep a zero
/// artificial in the basis. The basis inverse is kept dense and refactorised
/// every `refactor_interval` pivots.
class RevisedSimplex {
 public:
  using Entry = std::pair<int, double>;

  explicit RevisedSimplex(std::vector<double> rhs, SimplexOptions options = {});

  int rows() const { return static_cast<int>(rhs_.size()); }
  int columns() const { return static_cast<int>(columns_.size()); }

  /// Returns the new column's index.
  int add_column(double cost, std::vector<Entry> entries);

  /// Optimises the current phase over the pool. Returns `infeasible` while phase
  /// one cannot reach zero with the columns present.
  LPStatus run();

  int phase() const { return phase_; }
  /// Multipliers for the current phase objective, in the caller's row signs.
  std::vector<double> duals() const;
  std::vector<double> primal() const;
  double objective() const;
  /// Phase one objective (sum of artificials).
  double infeasibility() const;
  std::vector<double> ray() const { return ray_; }
  long iterations() const { return iterations_; }

  /// Recomputes the basis inverse and basic values from scratch.
  void refactor();

 private:
  struct Column {
    double cost;
    std::vector<Entry> entries;  // sign-adjusted
  };

  static int artificial(int row) { return -(row + 1); }
  static bool is_artificial(int var) { return var < 0; }
  double phase_cost(int var) const;
  long bland_key(int var) const;

  Eigen::VectorXd compute_duals() const;
  double reduced_cost(int j, const Eigen::VectorXd& y) const;
  int choose_entering(const Eigen::VectorXd& y);
  Eigen::VectorXd ftran(int j) const;
  /// dq: reduced cost of the entering column, used to update the cached duals.
  void pivot(int row, int entering, const Eigen::VectorXd& alpha, double dq);
  void finish_phase_one();

  SimplexOptions opt_;
  std::vector<double> rhs_;  // nonnegative after sign adjustment
  std::vector<double> row_sign_;
  std::vector<Column> columns_;
  std::vector<int> basis_;        // variable per row
  std::vector<int> basic_row_;    // row per structural column, -1 if nonbasic
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> binv_;
  Eigen::VectorXd xb_;
  Eigen::VectorXd y_;  // duals of the current phase, valid when y_valid_
  bool y_valid_ = false;
  int phase_ = 1;
  double cost_scale_ = 1.0;
  bool bland_ = false;
  int degenerate_run_ = 0;
  int since_refactor_ = 0;
  int price_cursor_ = 0;
  long iterations_ = 0;
  std::vector<double> ray_;
};

}  // namespace mmot
