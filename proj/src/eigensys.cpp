#include "gflm/eigensys.hpp"

#include "gflm/errors.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <Eigen/SVD>

#include <cmath>
#include <complex>
#include <numbers>
#include <string>
#include <vector>

namespace gflm {

namespace {

using cplx = std::complex<double>;

// One real solution component Re/Im(exp(ω z (t - shift))). Growing modes are
// anchored at t = 1 so every component is bounded by 1 on [0,1].
struct Mode {
  cplx z;
  double shift;
  bool imag_part;
};

std::vector<Mode> real_modes(int m) {
  const int p = 2 * m + 2;
  // z^p = (-1)^{m+1}: odd multiples of π/p when the right side is -1.
  const double offset = (m + 1) % 2 == 1 ? 1.0 : 0.0;
  std::vector<Mode> modes;
  for (int j = 0; j < p; ++j) {
    const double angle = std::numbers::pi * (2.0 * j + offset) / p;
    const cplx z = std::polar(1.0, angle);
    const double shift = z.real() > 1e-12 ? 1.0 : 0.0;
    if (z.imag() > 1e-12) {
      modes.push_back({z, shift, false});
      modes.push_back({z, shift, true});
    } else if (std::abs(z.imag()) <= 1e-12) {
      modes.push_back({cplx(z.real(), 0.0), shift, false});
    }
  }
  return modes;
}

// d^j/dt^j of the mode divided by ω^j.
double mode_derivative(const Mode& md, double omega, double t, int j) {
  const cplx v = std::pow(md.z, j) * std::exp(omega * md.z * (t - md.shift));
  return md.imag_part ? v.imag() : v.real();
}

Mat boundary_matrix(int m, double omega, const std::vector<Mode>& modes) {
  const int p = 2 * m + 2;
  Mat M(p, p);
  int row = 0;
  auto fill = [&](double t, int j) {
    for (int c = 0; c < p; ++c) M(row, c) = mode_derivative(modes[static_cast<std::size_t>(c)], omega, t, j);
    ++row;
  };
  for (int j = m + 2; j <= 2 * m + 1; ++j) {
    fill(0.0, j);
    fill(1.0, j);
  }
  fill(0.0, 0);
  fill(1.0, 1);
  return M;
}

SignedLogDet signed_log_det(const Mat& M) {
  Eigen::PartialPivLU<Mat> lu(M);
  const Mat& U = lu.matrixLU();
  double log_abs = 0.0;
  int sign = static_cast<int>(lu.permutationP().determinant());
  for (Eigen::Index i = 0; i < U.rows(); ++i) {
    const double d = U(i, i);
    if (d == 0.0) return {-std::numeric_limits<double>::infinity(), 0};
    log_abs += std::log(std::abs(d));
    if (d < 0) sign = -sign;
  }
  return {log_abs, sign};
}

int det_sign(int m, double omega, const std::vector<Mode>& modes) {
  return signed_log_det(boundary_matrix(m, omega, modes)).sign;
}

Vec null_coefficients(int m, double omega, const std::vector<Mode>& modes, int nu) {
  const int p = 2 * m + 2;
  const Mat M = boundary_matrix(m, omega, modes);
  Eigen::JacobiSVD<Mat> svd(M, Eigen::ComputeFullV);
  const Vec& sv = svd.singularValues();
  if (!(sv[p - 2] > 1e-8 * sv[0]))
    throw NumericalError("degenerate eigenvalue at nu=" + std::to_string(nu) +
                         ": boundary matrix nullspace has dimension > 1");
  return svd.matrixV().col(p - 1);
}

}  // namespace

SignedLogDet boundary_determinant(int m, double rho) {
  if (m < 1) throw InvalidInput("penalty order m must be >= 1");
  if (!(rho > 0)) throw InvalidInput("boundary_determinant needs rho > 0");
  const auto modes = real_modes(m);
  const double omega = std::pow(rho, 1.0 / (2 * m + 2));
  return signed_log_det(boundary_matrix(m, omega, modes));
}

Vec brownian_eigenvalues(int m, int count, double rel_width) {
  if (m < 1) throw InvalidInput("penalty order m must be >= 1");
  if (count < 1) throw InvalidInput("number of eigenvalues must be >= 1");
  const int p = 2 * m + 2;
  const auto modes = real_modes(m);
  const double step = std::numbers::pi / 16.0;
  const double omega_max = std::numbers::pi * (count + 2 * m + 6);
  Vec out(count);
  int found = 0;
  double lo = 0.5;
  int s_lo = det_sign(m, lo, modes);
  while (found < count) {
    const double hi = lo + step;
    if (hi > omega_max) {
      const double seed = std::pow(std::numbers::pi * (found + 1), p);
      throw NumericalError("failed to bracket eigenvalue nu=" + std::to_string(found + 1) +
                           " (seed " + std::to_string(seed) + ")");
    }
    const int s_hi = det_sign(m, hi, modes);
    if (s_hi != 0 && s_lo != 0 && s_hi != s_lo) {
      double a = lo, b = hi;
      int sa = s_lo;
      while ((b - a) / a > rel_width / p) {
        const double c = 0.5 * (a + b);
        const int sc = det_sign(m, c, modes);
        if (sc == 0) { a = b = c; break; }
        if (sc == sa) a = c; else b = c;
      }
      out[found++] = std::pow(0.5 * (a + b), p);
    }
    lo = hi;
    s_lo = s_hi;
  }
  return out;
}

Mat bvp_solution(int m, double rho, const Vec& t, int max_order) {
  if (m < 1) throw InvalidInput("penalty order m must be >= 1");
  if (!(rho > 0)) throw InvalidInput("bvp_solution needs rho > 0");
  const int p = 2 * m + 2;
  const auto modes = real_modes(m);
  const double omega = std::pow(rho, 1.0 / p);
  const Vec a = null_coefficients(m, omega, modes, 0);
  Mat out(t.size(), max_order + 1);
  for (int j = 0; j <= max_order; ++j)
    for (Eigen::Index i = 0; i < t.size(); ++i) {
      double v = 0.0;
      for (int c = 0; c < p; ++c) v += a[c] * mode_derivative(modes[static_cast<std::size_t>(c)], omega, t[i], j);
      out(i, j) = v;
    }
  return out;
}

void canonicalize_signs(Mat& phi, double threshold) {
  for (Eigen::Index c = 0; c < phi.cols(); ++c) {
    for (Eigen::Index r = 0; r < phi.rows(); ++r) {
      if (std::abs(phi(r, c)) > threshold) {
        if (phi(r, c) < 0) phi.col(c) *= -1.0;
        break;
      }
    }
  }
}

EigenSystem solve_bvp_analytic(int m, int N, const Grid& grid, const AnalyticOptions& opts) {
  if (m < 1) throw InvalidInput("penalty order m must be >= 1");
  if (N < 1) throw InvalidInput("number of eigenpairs must be >= 1");
  const int p = 2 * m + 2;
  const auto modes = real_modes(m);
  const Vec rho_pos = brownian_eigenvalues(m, N, opts.rel_width);
  const auto T = static_cast<Eigen::Index>(grid.size());
  const Vec t = grid.points();
  const int null_dim = opts.include_null_space ? m : 0;

  Mat Y(T, null_dim + N);
  for (int d = 0; d < null_dim; ++d) Y.col(d) = t.array().pow(static_cast<double>(d)).matrix();

  for (int nu = 0; nu < N; ++nu) {
    const double omega = std::pow(rho_pos[nu], 1.0 / p);
    const Vec a = null_coefficients(m, omega, modes, nu + 1);
    for (Eigen::Index i = 0; i < T; ++i) {
      double y = 0.0;
      for (int c = 0; c < p; ++c) y += a[c] * mode_derivative(modes[static_cast<std::size_t>(c)], omega, t[i], 2);
      Y(i, null_dim + nu) = y;
    }
  }

  const CovKernel C = brownian_kernel(grid);
  Mat phi(T, null_dim + N);
  if (null_dim > 0) {
    // V-orthonormalize the monomials: Φ0 = P L^{-T} with V_gram(P) = L Lᵀ.
    const Mat P = Y.leftCols(null_dim);
    Eigen::LLT<Mat> llt(V_gram(C, P));
    if (llt.info() != Eigen::Success) throw NumericalError("null-space Gram matrix not positive definite");
    phi.leftCols(null_dim) = llt.matrixU().solve<Eigen::OnTheRight>(P);
  }
  const Mat Ypos = Y.rightCols(N);
  const Vec norms = V_gram(C, Ypos).diagonal();
  for (int nu = 0; nu < N; ++nu) {
    if (!(norms[nu] > 0)) throw NumericalError("eigenfunction with nonpositive V-norm at nu=" + std::to_string(nu + 1));
    phi.col(null_dim + nu) = Ypos.col(nu) / std::sqrt(norms[nu]);
  }
  canonicalize_signs(phi);

  EigenSystem es;
  es.grid = grid;
  es.rho = Vec::Zero(null_dim + N);
  es.rho.tail(N) = rho_pos;
  es.phi = std::move(phi);
  es.m = m;
  es.k = m + 1;
  es.provenance = Provenance::Analytic;
  es.null_dim = null_dim;
  return es;
}

namespace {

// Eigenpairs of the n×n matrix K = D^{1/2} X W Xᵀ D^{1/2} / n, descending.
struct SampleSpectrum {
  Vec zeta;
  Mat U;
};

SampleSpectrum sample_spectrum(const CurveDataset& data) {
  if (data.n() == 0) throw InvalidInput("empirical eigensystem: empty dataset");
  const Vec w = data.grid().trapezoid_weights();
  Mat Xs = data.curves() * w.cwiseSqrt().asDiagonal();
  if (data.weights()) Xs = data.weights()->cwiseSqrt().asDiagonal() * Xs;
  Mat K = Mat::Zero(data.n(), data.n());
  K.selfadjointView<Eigen::Lower>().rankUpdate(Xs, 1.0 / static_cast<double>(data.n()));
  Eigen::SelfAdjointEigenSolver<Mat> eig(K);  // reads the lower triangle
  if (eig.info() != Eigen::Success) throw NumericalError("sample covariance eigen-decomposition failed");
  SampleSpectrum s;
  s.zeta = eig.eigenvalues().reverse();
  s.U = eig.eigenvectors().rowwise().reverse();
  return s;
}

int rank_of(const Vec& zeta, double rank_tol) {
  if (zeta.size() == 0 || !(zeta[0] > 0)) return 0;
  int r = 0;
  while (r < zeta.size() && zeta[r] > rank_tol * zeta[0]) ++r;
  return r;
}

}  // namespace

int empirical_rank(const CurveDataset& data, double rank_tol) {
  return rank_of(sample_spectrum(data).zeta, rank_tol);
}

EigenSystem empirical_eigensystem(const CurveDataset& data, int N, int k, double rank_tol) {
  if (N < 1) throw InvalidInput("number of eigenpairs must be >= 1");
  if (k < 1) throw InvalidInput("rho growth exponent k must be >= 1");
  SampleSpectrum s = sample_spectrum(data);
  const int rank = rank_of(s.zeta, rank_tol);
  if (N > rank)
    throw RankError("requested " + std::to_string(N) + " eigenfunctions but sample covariance has numerical rank " +
                    std::to_string(rank));
  const double n = static_cast<double>(data.n());
  // ψ_ν = Xᵀ D^{1/2} u_ν / sqrt(n ζ_ν) is L²-orthonormal; φ_ν = ψ_ν / sqrt(ζ_ν).
  Mat U = s.U.leftCols(N);
  if (data.weights()) U = data.weights()->cwiseSqrt().asDiagonal() * U;
  Mat phi = data.curves().transpose() * U;
  for (int nu = 0; nu < N; ++nu) phi.col(nu) /= s.zeta[nu] * std::sqrt(n);
  canonicalize_signs(phi);

  EigenSystem es;
  es.grid = data.grid();
  es.rho.resize(N);
  for (int nu = 0; nu < N; ++nu) es.rho[nu] = std::pow(static_cast<double>(nu + 1), 2.0 * k);
  es.phi = std::move(phi);
  es.m = k;
  es.k = k;
  es.provenance = Provenance::Empirical;
  es.zeta = s.zeta.head(N);
  return es;
}

DesignMatrix empirical_design(const CurveDataset& data, double rank_tol) {
  const SampleSpectrum s = sample_spectrum(data);
  const int rank = rank_of(s.zeta, rank_tol);
  if (rank < 1) throw RankError("sample covariance is numerically zero");
  Mat omega = std::sqrt(static_cast<double>(data.n())) * s.U.leftCols(rank);
  if (data.weights()) omega = data.weights()->cwiseSqrt().cwiseInverse().asDiagonal() * omega;
  return {std::move(omega)};
}

DesignMatrix design_matrix(const CurveDataset& data, const EigenSystem& es) {
  if (!(data.grid() == es.grid)) throw GridMismatch("design_matrix: dataset and eigen-system grids differ");
  const Vec w = data.grid().trapezoid_weights();
  return {data.curves() * (w.asDiagonal() * es.phi)};
}

EigenSystem rescale_for_kernel(const EigenSystem& es, double c) {
  if (!(c > 0) || !std::isfinite(c)) throw InvalidInput("kernel scale must be positive");
  EigenSystem out = es;
  out.phi /= std::sqrt(c);
  out.rho /= c;
  out.kernel_scale *= c;
  return out;
}

}  // namespace gflm
