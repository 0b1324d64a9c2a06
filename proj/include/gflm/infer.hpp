#pragma once

// Asymptotic inference on a penalized fit: intervals for the conditional mean,
// the next response and the slope at a point; the functional-contrast test;
// the penalized likelihood ratio test and its composite-null variant.

#include "gflm/fit.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace gflm {

enum class IntervalKind { ConditionalMean, Prediction, PointwiseSlope };

std::string_view to_string(IntervalKind kind);

struct IntervalReport {
  double center = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  double level = 0.95;
  double sigma_n = 0.0;
  IntervalKind kind = IntervalKind::ConditionalMean;

  double width() const noexcept { return upper - lower; }
  bool covers(double v) const noexcept { return lower <= v && v <= upper; }
};

enum class CalibrationMode { Asymptotic, MonteCarlo };

struct Calibration {
  CalibrationMode mode = CalibrationMode::Asymptotic;
  int reps = 10000;
  std::uint64_t seed = 0;
  unsigned threads = 1;
};

struct TestReport {
  std::string name;
  double statistic = 0.0;
  std::map<std::string, double> null_params;
  double p_value = 1.0;
  std::map<double, bool> reject_at;
  Calibration calibration;
};

/// Levels at which every report records a decision.
inline const std::vector<double> kReportLevels{0.01, 0.05, 0.10};

void fill_decisions(TestReport& r, const std::vector<double>& levels = kReportLevels);

/// Upper α/2 standard normal quantile for a two-sided interval of `level`.
double z_two_sided(double level);

struct CiOptions {
  /// (1+λρ)^{-2} in σ_n² when true; (1+λρ)^{-1} otherwise.
  bool squared_denominator = true;
  /// Constant term E{B(X)}^{-1}. Defaults to 1/fit.mean_B when the fit has an
  /// intercept and 0 otherwise; an explicit value is used even without one.
  std::optional<double> noise_scale;
  /// Drop the constant term in every case.
  bool drop_constant = false;
};

IntervalReport ci_conditional_mean(const PenalizedFit& fit, const GridFunction& x0, double level,
                                   const CiOptions& opts = {});

IntervalReport prediction_interval(const PenalizedFit& fit, const GridFunction& x0, double level,
                                   double noise_var, const CiOptions& opts = {});

IntervalReport pointwise_ci_slope(const PenalizedFit& fit, double z, double level);

TestReport contrast_test(const PenalizedFit& fit, const GridFunction& w, double c);

struct NullConstants {
  double sigma1_sq = 0.0;
  double sigma2_sq = 0.0;
  double sigma2 = 0.0;  ///< σ² = σ_1²/σ_2²
  double u_n = 0.0;     ///< h^{-1} σ_1⁴/σ_2²
  double h = 0.0;
  double tail1 = 0.0;  ///< estimated Σ_{ν>N} d_ν
  double tail2 = 0.0;  ///< estimated Σ_{ν>N} d_ν²
  Eigen::Index N = 0;
};

struct ConstantsOptions {
  double tail_tol = 1e-6;  ///< relative tail bound above which truncation is an error
  Eigen::Index skip = 0;   ///< leading basis functions left out of the sums
};

/// σ_l² = h Σ_{ν≤N} (1+λρ_ν)^{-l}, λ = h^{2k}. Analytic systems get a tail
/// estimate from ρ_ν ≈ ρ_N (ν/N)^{2k}; empirical systems are finite rank.
NullConstants null_constants(const EigenSystem& es, double h, Eigen::Index N = -1, const ConstantsOptions& = {});

struct ConstantsRow {
  std::string method;
  double sigma1_sq, sigma2_sq, sigma2, u_n_h;
};

struct ConstantsReport {
  double h = 0.0;
  double c = 0.0;
  int k = 0;
  std::vector<ConstantsRow> rows;
};

/// The four ways of evaluating the PLRT null constants, side by side:
/// the Brownian-kernel eigenvalues; a power-law sequence ρ_ν = (cν)^{2k};
/// the continuum integral c^{-1}∫_0^∞(1+x^{2k})^{-l}dx; published constants.
ConstantsReport constants_report(int m = 2, double h = 0.01, double c = 3.141592653589793, int eigen_count = 400);

/// Null value θ0 = (α0, β0) for the PLRT. An empty b0 means β0 = 0; with an
/// intercept in the model α0 is profiled out.
struct NullHypothesis {
  Vec b0;
  double alpha0 = 0.0;
};

struct PlrtOptions {
  bool with_intercept = false;
  Calibration calibration;
  ConstantsOptions constants;
};

/// Raw PLRT = ℓ_{n,λ}(θ0) − ℓ_{n,λ}(θ̂) by the likelihood-difference route.
double plrt_value(const Design& d, Loss loss, double lambda, const NullHypothesis& h0 = {},
                  bool with_intercept = false);

/// −(1/2n) YᵀΩ(ΩᵀΩ + nλΛ)^{-1}ΩᵀY.
double plrt_quadratic_form(const Design& d, double lambda);

TestReport plrt(const Design& d, Loss loss, double lambda, const NullHypothesis& h0 = {},
                const PlrtOptions& opts = {});

/// J(t^a, t^b) for monomials, a, b = 0..j.
Mat monomial_penalty(int j, int m);

TestReport plrt_composite(const CurveDataset& data, const Design& d, Loss loss, double lambda, int poly_order,
                          const PlrtOptions& opts = {});

}  // namespace gflm
