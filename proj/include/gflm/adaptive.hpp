#pragma once

// Adaptive max-test over smoothness levels k = 1..k_n built on the empirical
// eigen-design (ΩᵀΩ = nI), with Gumbel or Monte Carlo calibration.

#include "gflm/infer.hpp"

#include <cstdint>
#include <map>
#include <string_view>

namespace gflm {

enum class AtVariant { Gauss, SubGauss };
enum class AtCalibration { Gumbel, MonteCarlo };

std::string_view to_string(AtVariant v);
std::string_view to_string(AtCalibration c);

struct AdaptiveConfig {
  int k_n = 0;  ///< 0 selects default_kn(n)
  double c0 = 1.0;
  AtVariant variant = AtVariant::Gauss;
  AtCalibration calibration = AtCalibration::MonteCarlo;
  int reps = 10000;
  std::uint64_t seed = 0;
  unsigned threads = 1;
};

struct AdaptiveReport {
  Vec tau;
  double AT_star = 0.0;
  double B_n = 0.0;
  double AT = 0.0;
  double p_value = 1.0;
  std::map<double, bool> reject_at;
  int k_n = 0;
  double c0 = 1.0;
  AtVariant variant = AtVariant::Gauss;
  AtCalibration calibration = AtCalibration::MonteCarlo;
  int reps = 0;
  std::uint64_t seed = 0;
  Eigen::Index N = 0;
};

/// λ_k = c0^{2k} n^{-4k/(4k+1)} (log log n)^{2k/(4k+1)}.
double lambda_schedule(Eigen::Index n, int k, double c0);

/// max(2, round((log n)^{0.4})).
int default_kn(Eigen::Index n);

/// d_ν(k) = 1/(1 + λ_k ν^{2k}), ν = 1..N.
Vec shrinkage_weights(Eigen::Index N, Eigen::Index n, int k, double c0);

/// τ_k = (−2n·PLRT_k − Σd_ν) / (2Σd_ν²)^{1/2}; Ω must satisfy (1/n)ΩᵀΩ = I.
double tau_gauss(const Vec& y, const Mat& omega, int k, double c0, double ortho_tol = 1e-6);

/// Same numerator with denominator (2Σ_{i≠j} a_ij²)^{1/2}, A_k = n^{-1}Ω D_k Ωᵀ.
double tau_subgauss(const Vec& y, const Mat& omega, int k, double c0, double ortho_tol = 1e-6);

/// Positive root of 2πB²exp(B²) = k_n².
double solve_Bn(int k_n);

/// c_α = −log(−log(1−α)).
double gumbel_critical(double alpha);

/// AT = B_n (max τ − B_n).
double at_from_tau(const Vec& tau, double B_n);

struct MomentDiagnostic {
  double value;
  double threshold;
  bool pass;
};

/// max_ν Σ_i ω_iν⁴ against n^{8/5}(log log n)^{-14/5}.
MomentDiagnostic moment_diagnostic(const Mat& omega);

AdaptiveReport adaptive_test(const CurveDataset& data, const AdaptiveConfig& config, double alpha = 0.05);

/// Same, on a precomputed empirical design.
AdaptiveReport adaptive_test(const Vec& y, const Mat& omega, const AdaptiveConfig& config, double alpha = 0.05);

/// Sorted simulated null sample of AT under Gaussian noise; depends only on
/// (N, n, k_n, c0, reps, seed) and is cached per process.
std::shared_ptr<const std::vector<double>> gaussian_at_null(Eigen::Index N, Eigen::Index n, int k_n, double c0,
                                                            int reps, std::uint64_t seed, unsigned threads);

}  // namespace gflm
