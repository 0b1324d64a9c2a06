#include "gflm/fit.hpp"

#include "gflm/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace gflm {

std::string_view to_string(Loss loss) {
  return loss == Loss::L2 ? "l2" : "logistic";
}

Loss parse_loss(std::string_view name) {
  if (name == "l2") return Loss::L2;
  if (name == "logistic") return Loss::Logistic;
  throw UsageError("unknown loss '" + std::string(name) + "' (expected l2 or logistic)");
}

Design make_design(const CurveDataset& data, EigenSystemPtr es) {
  if (!es) throw InvalidInput("make_design: null eigen-system");
  Design d;
  d.omega = design_matrix(data, *es).omega;
  d.y = data.responses();
  d.es = std::move(es);
  return d;
}

namespace {

double h_of(double lambda, const EigenSystem& es) {
  return std::pow(lambda, 1.0 / (2.0 * es.k));
}

void check_lambda(double lambda) {
  if (!(lambda > 0) || !std::isfinite(lambda)) throw InvalidInput("lambda must be positive and finite");
}

// Solves M x = r for symmetric positive definite M after symmetric diagonal
// scaling; the eigenvalues ρ span many decades so unscaled Cholesky loses
// accuracy on the high-frequency block.
class ScaledCholesky {
 public:
  explicit ScaledCholesky(const Mat& M) {
    s_ = M.diagonal();
    for (Eigen::Index i = 0; i < s_.size(); ++i) {
      if (!(s_[i] > 0)) throw RankError("normal matrix is singular (zero column with zero penalty)");
      s_[i] = 1.0 / std::sqrt(s_[i]);
    }
    llt_.compute(s_.asDiagonal() * M * s_.asDiagonal());
    if (llt_.info() != Eigen::Success) throw RankError("normal matrix is not positive definite");
  }
  Vec solve(const Vec& r) const { return s_.asDiagonal() * llt_.solve(s_.asDiagonal() * r); }
  Mat solve(const Mat& R) const { return s_.asDiagonal() * llt_.solve(s_.asDiagonal() * R); }

 private:
  Vec s_;
  Eigen::LLT<Mat> llt_;
};

struct L2Pieces {
  Mat gram;  ///< ΩcᵀΩc
  Vec rhs;   ///< Ωcᵀyc
  Vec col_mean;
  double y_mean = 0.0;
  Mat omega_c;
  Vec y_c;
};

L2Pieces l2_pieces(const Design& d, bool with_intercept) {
  L2Pieces p;
  if (with_intercept) {
    p.col_mean = d.omega.colwise().mean();
    p.y_mean = d.y.mean();
    p.omega_c = d.omega.rowwise() - p.col_mean.transpose();
    p.y_c = d.y.array() - p.y_mean;
  } else {
    p.col_mean = Vec::Zero(d.size());
    p.omega_c = d.omega;
    p.y_c = d.y;
  }
  p.gram = p.omega_c.transpose() * p.omega_c;
  p.rhs = p.omega_c.transpose() * p.y_c;
  return p;
}

PenalizedFit make_fit(const Design& d, Loss loss, double lambda, bool with_intercept, double alpha, Vec b) {
  PenalizedFit f;
  f.alpha = alpha;
  f.b = std::move(b);
  f.lambda = lambda;
  f.loss = loss;
  f.es = d.es;
  f.with_intercept = with_intercept;
  f.h = h_of(lambda, *d.es);
  f.n = d.n();
  return f;
}

void check_binary(const Vec& y) {
  for (Eigen::Index i = 0; i < y.size(); ++i)
    if (y[i] != 0.0 && y[i] != 1.0)
      throw InvalidInput("logistic loss needs responses in {0,1}; found " + std::to_string(y[i]) + " at row " +
                         std::to_string(i));
}

// Columns [1, Ω] (intercept) or Ω, and the matching penalty diagonal.
struct GlmSystem {
  Mat Z;
  Vec pen;
};

GlmSystem glm_system(const Design& d, bool with_intercept) {
  GlmSystem s;
  const Eigen::Index off = with_intercept ? 1 : 0;
  s.Z.resize(d.n(), d.size() + off);
  if (with_intercept) s.Z.col(0).setOnes();
  s.Z.rightCols(d.size()) = d.omega;
  s.pen = Vec::Zero(d.size() + off);
  s.pen.tail(d.size()) = d.es->rho;
  return s;
}

Vec probabilities(const Vec& eta) {
  return eta.unaryExpr([](double a) { return logistic(a); });
}

}  // namespace

PenalizedFit fit_l2(const Design& d, double lambda, bool with_intercept) {
  check_lambda(lambda);
  const L2Pieces p = l2_pieces(d, with_intercept);
  const double n = static_cast<double>(d.n());
  Mat M = p.gram;
  M.diagonal() += n * lambda * d.es->rho;
  Vec b = ScaledCholesky(M).solve(p.rhs);
  const double alpha = with_intercept ? p.y_mean - p.col_mean.dot(b) : 0.0;
  return make_fit(d, Loss::L2, lambda, with_intercept, alpha, std::move(b));
}

PenalizedFit fit_l2(const CurveDataset& data, EigenSystemPtr es, double lambda, bool with_intercept) {
  return fit_l2(make_design(data, std::move(es)), lambda, with_intercept);
}

GenericFit fit_penalized(const Mat& Z, const Vec& y, const Mat& P, double lambda, Loss loss, bool with_intercept,
                         const Vec* offset, const GlmOptions& opts, const Vec* start) {
  if (lambda < 0 || !std::isfinite(lambda)) throw InvalidInput("lambda must be nonnegative and finite");
  if (Z.rows() != y.size() || P.rows() != Z.cols() || P.cols() != Z.cols())
    throw InvalidInput("fit_penalized: dimension mismatch");
  if (loss == Loss::Logistic) check_binary(y);
  const double n = static_cast<double>(y.size());
  const Eigen::Index q = Z.cols();
  const Eigen::Index off = with_intercept ? 1 : 0;
  const Vec base = offset ? *offset : Vec::Zero(y.size());

  Mat A(Z.rows(), q + off);
  if (with_intercept) A.col(0).setOnes();
  A.rightCols(q) = Z;
  Mat pen = Mat::Zero(q + off, q + off);
  pen.bottomRightCorner(q, q) = P;

  auto objective = [&](const Vec& theta) {
    const Vec eta = base + A * theta;
    double ll = 0.0;
    if (loss == Loss::L2) {
      ll = -0.5 * (y - eta).squaredNorm();
    } else {
      for (Eigen::Index i = 0; i < eta.size(); ++i) ll += y[i] * eta[i] - log1pexp(eta[i]);
    }
    return ll / n - 0.5 * lambda * theta.dot(pen * theta);
  };
  auto unpack = [&](const Vec& theta, double obj, int iters) {
    GenericFit g;
    g.alpha = with_intercept ? theta[0] : 0.0;
    g.coef = theta.tail(q);
    g.objective = obj;
    g.iterations = iters;
    return g;
  };

  if (q + off == 0) return unpack(Vec(), objective(Vec()), 0);

  if (loss == Loss::L2) {
    Mat M = A.transpose() * A / n + lambda * pen;
    const Vec theta = ScaledCholesky(M).solve(Vec(A.transpose() * (y - base) / n));
    return unpack(theta, objective(theta), 1);
  }

  Vec theta = Vec::Zero(q + off);
  if (start && start->size() == theta.size()) {
    theta = *start;
  } else if (with_intercept) {
    const double ybar = std::clamp(y.mean(), 1e-6, 1.0 - 1e-6);
    theta[0] = std::log(ybar / (1.0 - ybar)) - base.mean();
  }
  double obj = objective(theta);
  int iter = 0;
  double gnorm = std::numeric_limits<double>::infinity();
  for (; iter <= opts.max_iter; ++iter) {
    const Vec p = probabilities(base + A * theta);
    const Vec grad = A.transpose() * (y - p) / n - lambda * (pen * theta);
    gnorm = grad.cwiseAbs().maxCoeff();
    if (gnorm < opts.grad_tol || iter == opts.max_iter) break;
    const Vec w = p.array() * (1.0 - p.array());
    Mat H = A.transpose() * w.asDiagonal() * A / n + lambda * pen;
    const Vec step = ScaledCholesky(H).solve(grad);
    double t = 1.0;
    bool accepted = false;
    for (int k = 0; k <= opts.max_halvings; ++k, t *= 0.5) {
      const Vec cand = theta + t * step;
      const double cobj = objective(cand);
      // Accept ties at rounding level; the score test above decides convergence.
      if (std::isfinite(cobj) && cobj >= obj - 4 * std::numeric_limits<double>::epsilon() * std::abs(obj)) {
        theta = cand;
        obj = cobj;
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      std::ostringstream msg;
      msg << "logistic fit: step halving exhausted at iteration " << iter << " (objective " << obj
          << ", score max-norm " << gnorm << ", lambda " << lambda << ")";
      throw ConvergenceError(msg.str());
    }
  }
  if (!(gnorm < opts.grad_tol)) {
    std::ostringstream msg;
    msg << "logistic fit did not converge in " << opts.max_iter << " iterations (score max-norm " << gnorm
        << ", lambda " << lambda << ")";
    throw ConvergenceError(msg.str());
  }
  return unpack(theta, obj, iter);
}

PenalizedFit fit_glm(const Design& d, double lambda, bool with_intercept, const GlmOptions& opts,
                     const PenalizedFit* warm) {
  check_lambda(lambda);
  std::optional<Vec> start;
  if (warm && warm->b.size() == d.size()) {
    start = Vec(d.size() + (with_intercept ? 1 : 0));
    start->tail(d.size()) = warm->b;
    if (with_intercept) (*start)[0] = warm->alpha;
  }
  const Mat P = d.es->rho.asDiagonal();
  const GenericFit g =
      fit_penalized(d.omega, d.y, P, lambda, Loss::Logistic, with_intercept, nullptr, opts, start ? &*start : nullptr);
  PenalizedFit f = make_fit(d, Loss::Logistic, lambda, with_intercept, g.alpha, g.coef);
  f.iterations = g.iterations;
  const Vec p = probabilities((d.omega * f.b).array() + f.alpha);
  f.mean_B = (p.array() * (1.0 - p.array())).mean();
  return f;
}

PenalizedFit fit_glm(const CurveDataset& data, EigenSystemPtr es, double lambda, bool with_intercept,
                     const GlmOptions& opts) {
  return fit_glm(make_design(data, std::move(es)), lambda, with_intercept, opts);
}

PenalizedFit fit(const Design& d, Loss loss, double lambda, bool with_intercept) {
  return loss == Loss::L2 ? fit_l2(d, lambda, with_intercept) : fit_glm(d, lambda, with_intercept);
}

double score_norm(const Design& d, Loss loss, double alpha, const Vec& b, double lambda, bool with_intercept) {
  const Vec eta = (d.omega * b).array() + alpha;
  const Vec resid = loss == Loss::L2 ? Vec(d.y - eta) : Vec(d.y - probabilities(eta));
  const double n = static_cast<double>(d.n());
  Vec g = d.omega.transpose() * resid / n - lambda * d.es->rho.cwiseProduct(b);
  double out = g.cwiseAbs().maxCoeff();
  if (with_intercept) out = std::max(out, std::abs(resid.sum() / n));
  return out;
}

Vec log_grid(double lo, double hi, int count) {
  if (count < 1 || !(lo > 0) || !(hi >= lo)) throw InvalidInput("log_grid: need count >= 1 and 0 < lo <= hi");
  Vec g(count);
  if (count == 1) {
    g[0] = lo;
    return g;
  }
  const double a = std::log(lo), b = std::log(hi);
  for (int i = 0; i < count; ++i) g[i] = std::exp(a + (b - a) * i / (count - 1));
  g[count - 1] = hi;
  return g;
}

Vec default_lambda_grid() { return log_grid(1e-10, 1.0, 40); }

GcvTrace gcv_select(const Design& d, const Vec& lambda_grid, Loss loss, bool with_intercept) {
  if (lambda_grid.size() == 0) throw InvalidInput("gcv_select: empty lambda grid");
  const double n = static_cast<double>(d.n());
  GcvTrace tr;
  tr.lambdas = lambda_grid;
  tr.scores = Vec::Constant(lambda_grid.size(), std::numeric_limits<double>::quiet_NaN());

  if (loss == Loss::L2) {
    const L2Pieces p = l2_pieces(d, with_intercept);
    for (Eigen::Index j = 0; j < lambda_grid.size(); ++j) {
      check_lambda(lambda_grid[j]);
      Mat M = p.gram;
      M.diagonal() += n * lambda_grid[j] * d.es->rho;
      const ScaledCholesky chol(M);
      const Vec b = chol.solve(p.rhs);
      const double tr_hat = p.omega_c.rows() < p.omega_c.cols()
                                ? (p.omega_c.transpose().cwiseProduct(chol.solve(Mat(p.omega_c.transpose())))).sum()
                                : chol.solve(p.gram).trace();
      const double df = tr_hat + (with_intercept ? 1.0 : 0.0);
      const double rss = (p.y_c - p.omega_c * b).squaredNorm();
      const double denom = (n - df) / n;
      tr.scores[j] = (rss / n) / (denom * denom);
    }
  } else {
    // Warm-start from the most heavily penalized end.
    std::vector<Eigen::Index> order(static_cast<std::size_t>(lambda_grid.size()));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return lambda_grid[a] > lambda_grid[b]; });
    const GlmSystem s = glm_system(d, with_intercept);
    std::optional<PenalizedFit> prev;
    for (const Eigen::Index j : order) {
      PenalizedFit f;
      try {
        f = fit_glm(d, lambda_grid[j], with_intercept, {}, prev ? &*prev : nullptr);
      } catch (const ConvergenceError&) {
        continue;
      }
      Vec theta(s.Z.cols());
      if (with_intercept) theta[0] = f.alpha;
      theta.tail(d.size()) = f.b;
      const Vec p = probabilities(s.Z * theta);
      const Vec w = (p.array() * (1.0 - p.array())).max(1e-12);
      const Mat ZtWZ = s.Z.transpose() * w.asDiagonal() * s.Z;
      Mat M = ZtWZ;
      M.diagonal() += n * lambda_grid[j] * s.pen;
      const double df = ScaledCholesky(M).solve(ZtWZ).trace();
      const double pearson = ((d.y - p).array().square() / w.array()).sum();
      const double denom = (n - df) / n;
      tr.scores[j] = (pearson / n) / (denom * denom);
      prev = std::move(f);
    }
  }

  Eigen::Index best = -1;
  for (Eigen::Index j = 0; j < tr.scores.size(); ++j)
    if (std::isfinite(tr.scores[j]) && (best < 0 || tr.scores[j] < tr.scores[best])) best = j;
  if (best < 0) throw NumericalError("gcv_select: no finite GCV score on the lambda grid");
  tr.chosen = best;
  return tr;
}

PenalizedFit fit_gcv(const Design& d, const Vec& lambda_grid, Loss loss, bool with_intercept, GcvTrace* trace) {
  GcvTrace tr = gcv_select(d, lambda_grid, loss, with_intercept);
  PenalizedFit f = fit(d, loss, tr.chosen_lambda(), with_intercept);
  if (trace) *trace = std::move(tr);
  return f;
}

Vec basis_coordinates(const EigenSystem& es, const GridFunction& x) {
  if (!(x.grid() == es.grid)) throw GridMismatch("basis_coordinates: grid mismatch");
  return es.phi.transpose() * es.grid.trapezoid_weights().cwiseProduct(x.values());
}

double predict_linear(const PenalizedFit& fit, const GridFunction& x0) {
  return fit.alpha + basis_coordinates(*fit.es, x0).dot(fit.b);
}

double predict_mean(const PenalizedFit& fit, const GridFunction& x0) {
  const double a = predict_linear(fit, x0);
  return fit.loss == Loss::L2 ? a : logistic(a);
}

double logistic(double a) {
  if (a >= 0) return 1.0 / (1.0 + std::exp(-a));
  const double e = std::exp(a);
  return e / (1.0 + e);
}

double log1pexp(double a) {
  return a > 0 ? a + std::log1p(std::exp(-a)) : std::log1p(std::exp(a));
}

double penalized_loglik(const Design& d, Loss loss, double alpha, const Vec& b, double lambda) {
  const Vec eta = (d.omega * b).array() + alpha;
  double ll = 0.0;
  if (loss == Loss::L2) {
    ll = -0.5 * (d.y - eta).squaredNorm();
  } else {
    for (Eigen::Index i = 0; i < eta.size(); ++i) ll += d.y[i] * eta[i] - log1pexp(eta[i]);
  }
  return ll / static_cast<double>(d.n()) - 0.5 * lambda * b.dot(d.es->rho.cwiseProduct(b));
}

}  // namespace gflm
