#pragma once

// Penalized likelihood estimation in an eigen-basis:
//   maximize (1/n) Σ ℓ(Y_i; α + Ω_i b) − (λ/2) bᵀΛb,   Λ = diag(ρ).

#include "gflm/eigensys.hpp"

#include <string_view>

namespace gflm {

enum class Loss { L2, Logistic };

std::string_view to_string(Loss loss);
Loss parse_loss(std::string_view name);

/// Data projected onto an eigen-system; reused across λ values.
struct Design {
  EigenSystemPtr es;
  Mat omega;  ///< n×N
  Vec y;

  Eigen::Index n() const noexcept { return omega.rows(); }
  Eigen::Index size() const noexcept { return omega.cols(); }
};

Design make_design(const CurveDataset& data, EigenSystemPtr es);

struct PenalizedFit {
  double alpha = 0.0;
  Vec b;
  double lambda = 0.0;
  Loss loss = Loss::L2;
  EigenSystemPtr es;
  bool with_intercept = false;
  double h = 0.0;  ///< λ^{1/(2k)}
  int iterations = 0;
  Eigen::Index n = 0;
  double mean_B = 1.0;  ///< (1/n) Σ B̂(X_i) at the fit; 1 for the ℓ2 loss

  Vec beta() const { return es->phi * b; }
  GridFunction beta_function() const { return GridFunction(es->grid, beta()); }
};

PenalizedFit fit_l2(const Design& d, double lambda, bool with_intercept = false);
PenalizedFit fit_l2(const CurveDataset& data, EigenSystemPtr es, double lambda, bool with_intercept = false);

struct GlmOptions {
  double grad_tol = 1e-8;
  int max_iter = 100;
  int max_halvings = 30;
};

/// Logistic loss by damped Newton. `warm` seeds the iterate.
PenalizedFit fit_glm(const Design& d, double lambda, bool with_intercept = false, const GlmOptions& opts = {},
                     const PenalizedFit* warm = nullptr);
PenalizedFit fit_glm(const CurveDataset& data, EigenSystemPtr es, double lambda, bool with_intercept = false,
                     const GlmOptions& opts = {});

PenalizedFit fit(const Design& d, Loss loss, double lambda, bool with_intercept = false);

struct GenericFit {
  double alpha = 0.0;
  Vec coef;
  double objective = 0.0;  ///< penalized log-likelihood at the solution
  int iterations = 0;
};

/// Maximizes (1/n) Σ ℓ(Y_i; offset_i + α + Z_i c) − (λ/2) cᵀPc for an arbitrary
/// design Z and symmetric PSD penalty P. `start` is (α, c) or c.
GenericFit fit_penalized(const Mat& Z, const Vec& y, const Mat& P, double lambda, Loss loss, bool with_intercept,
                         const Vec* offset = nullptr, const GlmOptions& opts = {}, const Vec* start = nullptr);

/// Max-norm of the penalized score at (α, b).
double score_norm(const Design& d, Loss loss, double alpha, const Vec& b, double lambda, bool with_intercept);

struct GcvTrace {
  Vec lambdas;
  Vec scores;
  Eigen::Index chosen = 0;

  double chosen_lambda() const { return lambdas[chosen]; }
};

/// `count` log-spaced values from lo to hi inclusive.
Vec log_grid(double lo, double hi, int count);
Vec default_lambda_grid();

/// GCV(λ) = (1/n)‖(I−A_λ)Y‖² / ((1/n)tr(I−A_λ))². For the logistic loss the
/// same form is evaluated on Pearson residuals with the weighted hat matrix
/// at the converged fit.
GcvTrace gcv_select(const Design& d, const Vec& lambda_grid, Loss loss, bool with_intercept = false);

/// Fit at the GCV-chosen λ.
PenalizedFit fit_gcv(const Design& d, const Vec& lambda_grid, Loss loss, bool with_intercept = false,
                     GcvTrace* trace = nullptr);

/// x_ν = ∫ x φ_ν for every basis function.
Vec basis_coordinates(const EigenSystem& es, const GridFunction& x);

/// α̂ + ∫ x0 β̂.
double predict_linear(const PenalizedFit& fit, const GridFunction& x0);
/// F(α̂ + ∫ x0 β̂), F the identity or the logistic CDF.
double predict_mean(const PenalizedFit& fit, const GridFunction& x0);

double logistic(double a);
/// log(1 + e^a) without overflow.
double log1pexp(double a);

/// ℓ_{n,λ}(α, b) = (1/n) Σ ℓ(Y_i; α + Ω_i b) − (λ/2) bᵀΛb.
double penalized_loglik(const Design& d, Loss loss, double alpha, const Vec& b, double lambda);

}  // namespace gflm
