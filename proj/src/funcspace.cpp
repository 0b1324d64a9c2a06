#include "gflm/funcspace.hpp"

#include "gflm/errors.hpp"

#include <algorithm>
#include <numeric>
#include <cmath>
#include <string>
#include <vector>

namespace gflm {

namespace {

void require_finite(const Vec& v, const char* what) {
  if (!v.allFinite()) throw InvalidInput(std::string(what) + ": non-finite value");
}

void require_same_grid(const Grid& a, const Grid& b) {
  if (!(a == b))
    throw GridMismatch("grid mismatch: " + std::to_string(a.size()) + " vs " +
                       std::to_string(b.size()) + " points");
}

}  // namespace

Grid::Grid(std::size_t count) : count_(count) {
  if (count < 2) throw InvalidInput("grid needs at least 2 points");
}

Grid Grid::from_points(std::span<const double> points, double rel_tol) {
  if (points.size() < 2) throw InvalidInput("grid needs at least 2 points");
  Grid g(points.size());
  const double h = g.step();
  if (std::abs(points.front()) > rel_tol || std::abs(points.back() - 1.0) > rel_tol)
    throw InvalidInput("grid must start at 0 and end at 1");
  for (std::size_t i = 1; i < points.size(); ++i) {
    const double d = points[i] - points[i - 1];
    if (!(std::abs(d - h) <= rel_tol * h + 1e-15))
      throw InvalidInput("grid spacing is not uniform at index " + std::to_string(i));
  }
  return g;
}

Vec Grid::points() const {
  Vec p(static_cast<Eigen::Index>(count_));
  for (std::size_t i = 0; i < count_; ++i) p[static_cast<Eigen::Index>(i)] = (*this)[i];
  return p;
}

Vec Grid::trapezoid_weights() const {
  Vec w = Vec::Constant(static_cast<Eigen::Index>(count_), step());
  w[0] *= 0.5;
  w[w.size() - 1] *= 0.5;
  return w;
}

std::size_t Grid::nearest(double z) const {
  z = std::clamp(z, 0.0, 1.0);
  return static_cast<std::size_t>(std::lround(z / step()));
}

GridFunction::GridFunction(Grid grid, Vec values) : grid_(grid), values_(std::move(values)) {
  if (static_cast<std::size_t>(values_.size()) != grid_.size())
    throw InvalidInput("grid function length " + std::to_string(values_.size()) +
                       " does not match grid size " + std::to_string(grid_.size()));
  require_finite(values_, "grid function");
}

CurveDataset::CurveDataset(Grid grid, Mat curves, Vec responses, std::optional<Vec> weights)
    : grid_(grid), curves_(std::move(curves)), responses_(std::move(responses)), weights_(std::move(weights)) {
  if (static_cast<std::size_t>(curves_.cols()) != grid_.size())
    throw InvalidInput("curve length does not match grid size");
  if (curves_.rows() != responses_.size())
    throw InvalidInput("number of curves (" + std::to_string(curves_.rows()) +
                       ") differs from number of responses (" + std::to_string(responses_.size()) + ")");
  if (!curves_.allFinite()) throw InvalidInput("curves: non-finite value");
  require_finite(responses_, "responses");
  if (weights_) {
    if (weights_->size() != responses_.size()) throw InvalidInput("weights length mismatch");
    if (!(weights_->array() > 0.0).all() || !weights_->allFinite())
      throw InvalidInput("weights must be strictly positive");
  }
}

CurveDataset CurveDataset::with_weights(Vec weights) const {
  return CurveDataset(grid_, curves_, responses_, std::move(weights));
}

CovKernel::CovKernel(Grid grid, Mat values, double symmetry_tol) : grid_(grid), values_(std::move(values)) {
  const auto T = static_cast<Eigen::Index>(grid_.size());
  if (values_.rows() != T || values_.cols() != T) throw InvalidInput("kernel shape does not match grid");
  if (!values_.allFinite()) throw InvalidInput("kernel: non-finite value");
  const double scale = std::max(values_.cwiseAbs().maxCoeff(), 1e-300);
  if ((values_ - values_.transpose()).cwiseAbs().maxCoeff() > symmetry_tol * scale)
    throw InvalidInput("kernel is not symmetric");
}

double integrate(const GridFunction& f) {
  // Sum first and divide by T-1 once, so constants integrate to exactly 1.
  const Vec& v = f.values();
  const Eigen::Index last = v.size() - 1;
  const double inner = last > 1 ? v.segment(1, last - 1).sum() : 0.0;
  return (inner + 0.5 * (v[0] + v[last])) / static_cast<double>(last);
}

Vec fd_weights(double x0, std::span<const double> x, int order) {
  // Fornberg (1988) recursion.
  const int n = static_cast<int>(x.size()) - 1;
  std::vector<std::vector<double>> c(x.size(), std::vector<double>(static_cast<std::size_t>(order) + 1, 0.0));
  double c1 = 1.0;
  double c4 = x[0] - x0;
  c[0][0] = 1.0;
  for (int i = 1; i <= n; ++i) {
    const int mn = std::min(i, order);
    double c2 = 1.0;
    const double c5 = c4;
    c4 = x[static_cast<std::size_t>(i)] - x0;
    for (int j = 0; j < i; ++j) {
      const double c3 = x[static_cast<std::size_t>(i)] - x[static_cast<std::size_t>(j)];
      c2 *= c3;
      if (j == i - 1) {
        for (int k = mn; k >= 1; --k)
          c[i][k] = c1 * (k * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
        c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
      }
      for (int k = mn; k >= 1; --k) c[j][k] = (c4 * c[j][k] - k * c[j][k - 1]) / c3;
      c[j][0] = c4 * c[j][0] / c3;
    }
    c1 = c2;
  }
  Vec w(n + 1);
  for (int i = 0; i <= n; ++i) w[i] = c[i][order];
  return w;
}

Vec derivative(const Grid& grid, const Vec& values, int order) {
  if (order < 0) throw InvalidInput("derivative order must be nonnegative");
  if (order == 0) return values;
  const auto T = static_cast<int>(grid.size());
  if (T < 2 * order + 3)
    throw ResolutionError("grid of " + std::to_string(T) + " points too coarse for derivative order " +
                          std::to_string(order) + " (need " + std::to_string(2 * order + 3) + ")");
  // Centred stencil of width 2*ceil(order/2)+1 has second-order accuracy;
  // a one-sided stencil needs order+2 nodes for the same accuracy.
  const int half = (order + 1) / 2;
  const int one_sided = order + 2;
  const double h = grid.step();

  // Stencils are translation invariant on a uniform grid, so build them once
  // in units of h and rescale.
  std::vector<double> central_nodes;
  for (int j = -half; j <= half; ++j) central_nodes.push_back(j);
  const Vec central = fd_weights(0.0, central_nodes, order);
  std::vector<double> side_nodes(static_cast<std::size_t>(one_sided));
  for (int j = 0; j < one_sided; ++j) side_nodes[static_cast<std::size_t>(j)] = j;

  const double scale = std::pow(h, -order);
  Vec out(T);
  for (int i = 0; i < T; ++i) {
    double acc = 0.0;
    if (i - half >= 0 && i + half < T) {
      for (int j = -half; j <= half; ++j) acc += central[j + half] * values[i + j];
    } else {
      const int start = i - half < 0 ? 0 : T - one_sided;
      const Vec w = fd_weights(static_cast<double>(i - start), side_nodes, order);
      for (int j = 0; j < one_sided; ++j) acc += w[j] * values[start + j];
    }
    out[i] = acc * scale;
  }
  return out;
}

double penalty_J(const GridFunction& f, const GridFunction& g, int m) {
  if (m < 1) throw InvalidInput("penalty order m must be >= 1");
  require_same_grid(f.grid(), g.grid());
  const Grid& grid = f.grid();
  const Vec df = derivative(grid, f.values(), m);
  const Vec dg = derivative(grid, g.values(), m);
  return grid.trapezoid_weights().dot(df.cwiseProduct(dg));
}

CovKernel empirical_cov(const CurveDataset& data) {
  if (data.n() == 0) throw InvalidInput("empirical_cov: empty dataset");
  // Accumulate in a canonical row order (lexicographic on weight, then curve
  // values) so the result is bit-identical under any permutation of the rows.
  const Mat& raw = data.curves();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(data.n()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    if (data.weights() && (*data.weights())[a] != (*data.weights())[b])
      return (*data.weights())[a] < (*data.weights())[b];
    for (Eigen::Index j = 0; j < raw.cols(); ++j)
      if (raw(a, j) != raw(b, j)) return raw(a, j) < raw(b, j);
    return false;
  });
  Mat X(raw.rows(), raw.cols());
  for (std::size_t i = 0; i < order.size(); ++i) X.row(static_cast<Eigen::Index>(i)) = raw.row(order[i]);
  Mat C;
  if (data.weights()) {
    Vec w(data.n());
    for (std::size_t i = 0; i < order.size(); ++i) w[static_cast<Eigen::Index>(i)] = (*data.weights())[order[i]];
    const Mat WX = w.asDiagonal() * X;
    C.noalias() = X.transpose() * WX;
  } else {
    C = Mat::Zero(X.cols(), X.cols());
    C.selfadjointView<Eigen::Lower>().rankUpdate(X.transpose());
    C = C.selfadjointView<Eigen::Lower>();
  }
  C /= static_cast<double>(data.n());
  // Symmetrize exactly so downstream eigen-solvers see a symmetric matrix.
  C = 0.5 * (C + C.transpose()).eval();
  return CovKernel(data.grid(), std::move(C));
}

CovKernel brownian_kernel(const Grid& grid) {
  const auto T = static_cast<Eigen::Index>(grid.size());
  Mat C(T, T);
  for (Eigen::Index j = 0; j < T; ++j)
    for (Eigen::Index i = 0; i < T; ++i) C(i, j) = grid[static_cast<std::size_t>(std::min(i, j))];
  return CovKernel(grid, std::move(C));
}

double V_form(const CovKernel& C, const GridFunction& f, const GridFunction& g) {
  require_same_grid(C.grid(), f.grid());
  require_same_grid(C.grid(), g.grid());
  const Vec w = C.grid().trapezoid_weights();
  const Vec wf = w.cwiseProduct(f.values());
  const Vec wg = w.cwiseProduct(g.values());
  return wg.dot(C.values() * wf);
}

Mat V_gram(const CovKernel& C, const Mat& funcs) {
  if (static_cast<std::size_t>(funcs.rows()) != C.grid().size()) throw GridMismatch("V_gram: grid mismatch");
  const Vec w = C.grid().trapezoid_weights();
  const Mat WF = w.asDiagonal() * funcs;
  Mat G = WF.transpose() * (C.values() * WF);
  return 0.5 * (G + G.transpose());
}

}  // namespace gflm
