#pragma once

// Bases (ρ_ν, φ_ν) that diagonalize V and J simultaneously:
//   V(φ_ν, φ_μ) = δ_νμ,   J(φ_ν, φ_μ) = ρ_ν δ_νμ.
// Built either from the Brownian-kernel boundary value problem or from the
// spectral decomposition of a sample covariance.

#include "gflm/funcspace.hpp"

#include <memory>

namespace gflm {

enum class Provenance { Analytic, Empirical };

struct EigenSystem {
  Grid grid{2};
  Vec rho;        ///< nondecreasing, ≥ 0
  Mat phi;        ///< T×N, column ν is φ_ν on the grid
  int m = 2;      ///< penalty order
  int k = 3;      ///< ρ_ν ≍ ν^{2k}
  Provenance provenance = Provenance::Analytic;
  int null_dim = 0;           ///< leading block with ρ = 0 (analytic route only)
  double kernel_scale = 1.0;  ///< basis is orthonormal for kernel_scale · C
  Vec zeta;                   ///< covariance eigenvalues (empirical route only)

  Eigen::Index size() const noexcept { return rho.size(); }
  GridFunction eigenfunction(Eigen::Index nu) const { return GridFunction(grid, phi.col(nu)); }
};

using EigenSystemPtr = std::shared_ptr<const EigenSystem>;

struct DesignMatrix {
  Mat omega;  ///< n×N, ω_iν = ∫ X_i φ_ν
};

struct AnalyticOptions {
  /// Prepend the m-dimensional ρ = 0 block (V-orthonormalized polynomials of
  /// degree < m). Off by default so that index 0 is the first positive root.
  bool include_null_space = false;
  double rel_width = 1e-10;  ///< bisection stopping width, relative in ρ
};

/// log|det M(ρ)| and its sign, M the boundary-condition matrix of
///   (-1)^{m+1} g^{(2m+2)} = ρ g,
///   g^{(j)}(0) = g^{(j)}(1) = 0 (j = m+2..2m+1),  g(0) = g'(1) = 0.
struct SignedLogDet {
  double log_abs;
  int sign;
};
SignedLogDet boundary_determinant(int m, double rho);

/// Positive eigenvalues of the Brownian-kernel problem, found by scanning
/// ω = ρ^{1/(2m+2)} for sign changes of det M and bisecting.
Vec brownian_eigenvalues(int m, int count, double rel_width = 1e-10);

/// g and its first `max_order` derivatives at the points t, for the nullspace
/// solution of the boundary problem at ρ (an eigenvalue). Column j holds
/// g^{(j)}/ρ^{j/(2m+2)}; the scale of g is arbitrary.
Mat bvp_solution(int m, double rho, const Vec& t, int max_order);

/// Eigen-system for C(s,t) = min(s,t): N positive-root pairs (plus the ρ = 0
/// block if requested), φ_ν = g''_ν / sqrt(V(g''_ν, g''_ν)).
EigenSystem solve_bvp_analytic(int m, int N, const Grid& grid, const AnalyticOptions& opts = {});

/// Number of sample-covariance eigenvalues above rank_tol · ζ_1.
int empirical_rank(const CurveDataset& data, double rank_tol = 1e-12);

/// φ̂_ν = ψ̂_ν / sqrt(ζ̂_ν) from Ĉ(s,t) = n^{-1} Σ w_i X_i(s) X_i(t); rho is
/// filled with ν^{2k}.
EigenSystem empirical_eigensystem(const CurveDataset& data, int N, int k, double rank_tol = 1e-12);

/// Design matrix of the full-rank empirical system without forming φ̂:
/// Ω = √n D^{-1/2} U, U the eigenvectors of the weighted curve Gram matrix.
DesignMatrix empirical_design(const CurveDataset& data, double rank_tol = 1e-12);

DesignMatrix design_matrix(const CurveDataset& data, const EigenSystem& es);

/// The same basis re-normalized for the kernel c · C: φ/√c, ρ/c.
EigenSystem rescale_for_kernel(const EigenSystem& es, double c);

/// Flips each column so that its first entry above `threshold` in magnitude is positive.
void canonicalize_signs(Mat& phi, double threshold = 1e-10);

}  // namespace gflm
