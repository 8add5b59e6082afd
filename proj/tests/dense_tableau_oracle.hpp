#pragma once

// Full-tableau two-phase simplex with Bland's rule, written independently of
// the library's revised simplex. Dense and slow; meant for a few hundred columns.

#include <cmath>
#include <limits>
#include <vector>

namespace oracle {

enum class Status { optimal, infeasible, unbounded };

struct Result {
  Status status = Status::infeasible;
  double value = 0.0;
  std::vector<double> x;
};

class Tableau {
 public:
  Tableau(std::vector<std::vector<double>> a, std::vector<double> b) : m_(b.size()) {
    n_ = m_ ? a[0].size() : 0;
    width_ = n_ + m_ + 1;
    t_.assign((m_ + 1) * width_, 0.0);
    basis_.resize(m_);
    for (std::size_t i = 0; i < m_; ++i) {
      const double sign = b[i] < 0 ? -1.0 : 1.0;
      for (std::size_t j = 0; j < n_; ++j) at(i, j) = sign * a[i][j];
      at(i, n_ + i) = 1.0;
      at(i, width_ - 1) = sign * b[i];
      basis_[i] = n_ + i;
    }
  }

  Result solve(const std::vector<double>& c) {
    Result res;
    // Phase one: minimise the artificial sum.
    std::vector<double> c1(n_ + m_, 0.0);
    for (std::size_t i = 0; i < m_; ++i) c1[n_ + i] = 1.0;
    load_objective(c1);
    iterate(n_ + m_);
    if (-at(m_, width_ - 1) > 1e-9) return res;
    // Drive zero-level artificials out where a structural pivot exists.
    for (std::size_t i = 0; i < m_; ++i) {
      if (basis_[i] < n_) continue;
      for (std::size_t j = 0; j < n_; ++j) {
        if (std::abs(at(i, j)) > 1e-9) {
          pivot(i, j);
          break;
        }
      }
    }
    std::vector<double> c2(n_ + m_, 0.0);
    for (std::size_t j = 0; j < n_; ++j) c2[j] = c[j];
    load_objective(c2);
    if (!iterate(n_)) {
      res.status = Status::unbounded;
      return res;
    }
    res.status = Status::optimal;
    res.x.assign(n_, 0.0);
    for (std::size_t i = 0; i < m_; ++i) {
      if (basis_[i] < n_) res.x[basis_[i]] = at(i, width_ - 1);
    }
    res.value = 0.0;
    for (std::size_t j = 0; j < n_; ++j) res.value += c[j] * res.x[j];
    return res;
  }

 private:
  double& at(std::size_t i, std::size_t j) { return t_[i * width_ + j]; }

  // Objective row holds reduced costs; its last entry is minus the value.
  void load_objective(const std::vector<double>& c) {
    for (std::size_t j = 0; j < width_; ++j) at(m_, j) = j < c.size() ? c[j] : 0.0;
    for (std::size_t i = 0; i < m_; ++i) {
      const double cb = c[basis_[i]];
      if (cb == 0.0) continue;
      for (std::size_t j = 0; j < width_; ++j) at(m_, j) -= cb * at(i, j);
    }
  }

  void pivot(std::size_t r, std::size_t q) {
    const double p = at(r, q);
    for (std::size_t j = 0; j < width_; ++j) at(r, j) /= p;
    for (std::size_t i = 0; i <= m_; ++i) {
      if (i == r) continue;
      const double f = at(i, q);
      if (f == 0.0) continue;
      for (std::size_t j = 0; j < width_; ++j) at(i, j) -= f * at(r, j);
    }
    basis_[r] = q;
  }

  // Bland: smallest improving column, then the smallest basic variable among ties.
  // Only columns below `allowed` may enter. Returns false on an unbounded ray.
  bool iterate(std::size_t allowed) {
    for (;;) {
      std::size_t q = allowed;
      for (std::size_t j = 0; j < allowed; ++j) {
        if (at(m_, j) < -1e-11) {
          q = j;
          break;
        }
      }
      if (q == allowed) return true;
      std::size_t r = m_;
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < m_; ++i) {
        if (at(i, q) <= 1e-11) continue;
        const double ratio = at(i, width_ - 1) / at(i, q);
        if (ratio < best - 1e-12 || (std::abs(ratio - best) <= 1e-12 && basis_[i] < basis_[r])) {
          best = ratio;
          r = i;
        }
      }
      if (r == m_) return false;
      pivot(r, q);
    }
  }

  std::size_t m_, n_, width_;
  std::vector<double> t_;
  std::vector<std::size_t> basis_;
};

inline Result solve(const std::vector<std::vector<double>>& a, const std::vector<double>& b,
                    const std::vector<double>& c) {
  return Tableau(a, b).solve(c);
}

}  // namespace oracle
