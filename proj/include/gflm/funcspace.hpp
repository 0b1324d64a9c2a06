#pragma once

// Discretized function space over [0,1]: uniform grids, trapezoid quadrature,
// the derivative-based roughness penalty and (weighted) covariance kernels.

#include <Eigen/Dense>

#include <cstddef>
#include <optional>
#include <span>

namespace gflm {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Uniform grid of `size()` points with first point 0 and last point 1.
class Grid {
 public:
  explicit Grid(std::size_t count);

  /// Validates externally supplied points (e.g. a CSV header row) and
  /// returns the equivalent uniform grid.
  static Grid from_points(std::span<const double> points, double rel_tol = 1e-12);

  std::size_t size() const noexcept { return count_; }
  double step() const noexcept { return 1.0 / static_cast<double>(count_ - 1); }
  double operator[](std::size_t i) const noexcept {
    return i + 1 == count_ ? 1.0 : static_cast<double>(i) * step();
  }
  Vec points() const;
  Vec trapezoid_weights() const;
  /// Index of the grid point closest to z (z clamped to [0,1]).
  std::size_t nearest(double z) const;

  bool operator==(const Grid&) const = default;

 private:
  std::size_t count_;
};

class GridFunction {
 public:
  GridFunction(Grid grid, Vec values);

  template <class F>
  static GridFunction sample(const Grid& grid, F&& f) {
    Vec v(static_cast<Eigen::Index>(grid.size()));
    for (std::size_t i = 0; i < grid.size(); ++i) v[static_cast<Eigen::Index>(i)] = f(grid[i]);
    return GridFunction(grid, std::move(v));
  }

  const Grid& grid() const noexcept { return grid_; }
  const Vec& values() const noexcept { return values_; }

 private:
  Grid grid_;
  Vec values_;
};

/// n curves on a shared grid with responses and optional positive weights B(X_i).
class CurveDataset {
 public:
  CurveDataset(Grid grid, Mat curves, Vec responses, std::optional<Vec> weights = std::nullopt);

  const Grid& grid() const noexcept { return grid_; }
  const Mat& curves() const noexcept { return curves_; }
  const Vec& responses() const noexcept { return responses_; }
  const std::optional<Vec>& weights() const noexcept { return weights_; }
  Eigen::Index n() const noexcept { return curves_.rows(); }

  CurveDataset with_weights(Vec weights) const;

 private:
  Grid grid_;
  Mat curves_;
  Vec responses_;
  std::optional<Vec> weights_;
};

class CovKernel {
 public:
  CovKernel(Grid grid, Mat values, double symmetry_tol = 1e-10);

  const Grid& grid() const noexcept { return grid_; }
  const Mat& values() const noexcept { return values_; }

 private:
  Grid grid_;
  Mat values_;
};

double integrate(const GridFunction& f);

/// m-th derivative on the grid by finite differences: centred stencils of
/// second-order accuracy in the interior, one-sided stencils at the ends.
Vec derivative(const Grid& grid, const Vec& values, int order);

/// J(f,g) = ∫ f^(m) g^(m).
double penalty_J(const GridFunction& f, const GridFunction& g, int m);

CovKernel empirical_cov(const CurveDataset& data);

/// C(s,t) = min(s,t), the Brownian-motion covariance.
CovKernel brownian_kernel(const Grid& grid);

/// V(f,g) = ∫∫ C(s,t) f(t) g(s) ds dt by double trapezoid quadrature.
double V_form(const CovKernel& C, const GridFunction& f, const GridFunction& g);

/// Gram matrix of V over the columns of `funcs` (T×N values on C's grid).
Mat V_gram(const CovKernel& C, const Mat& funcs);

/// Finite-difference weights (Fornberg) for the `order`-th derivative at x0
/// from nodes x.
Vec fd_weights(double x0, std::span<const double> x, int order);

}  // namespace gflm
