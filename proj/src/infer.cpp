#include "gflm/infer.hpp"

#include "gflm/errors.hpp"
#include "gflm/parallel.hpp"
#include "gflm/rng.hpp"

#include <boost/math/distributions/normal.hpp>
#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include <cmath>
#include <limits>
#include <random>
#include <sstream>

namespace gflm {

namespace {

void check_level(double level) {
  if (!(level > 0.0 && level < 1.0)) throw InvalidInput("level must lie in (0,1)");
}

Vec shrink(const EigenSystem& es, double lambda, int power) {
  return (1.0 + lambda * es.rho.array()).pow(-power).matrix();
}

double sigma_n_sq(const PenalizedFit& fit, const Vec& x, const CiOptions& opts) {
  double constant = 0.0;
  if (opts.drop_constant) {
    constant = 0.0;
  } else if (opts.noise_scale) {
    constant = *opts.noise_scale;
  } else if (fit.with_intercept) {
    constant = 1.0 / fit.mean_B;
  }
  const Vec d = shrink(*fit.es, fit.lambda, opts.squared_denominator ? 2 : 1);
  return constant + x.cwiseAbs2().dot(d);
}

double mean_derivative(const PenalizedFit& fit, const GridFunction& x0) {
  if (fit.loss == Loss::L2) return 1.0;
  const double p = predict_mean(fit, x0);
  return p * (1.0 - p);
}

double chi2_upper_tail(double stat, double dof) {
  if (!(dof > 0)) throw NumericalError("chi-square calibration needs positive degrees of freedom");
  if (stat <= 0) return 1.0;
  return boost::math::gamma_q(0.5 * dof, 0.5 * stat);
}

// Σ_{ν>N} (1+λρ_ν)^{-l} with ρ_ν ≈ ρ_N (ν/N)^{2k}: N ∫_1^∞ (1 + a u^{2k})^{-l} du.
double power_tail(double a, double count, int k, int l) {
  boost::math::quadrature::exp_sinh<double> integrator;
  auto f = [&](double u) { return std::pow(1.0 + a * std::pow(u, 2.0 * k), -l); };
  return count * integrator.integrate([&](double v) { return f(1.0 + v); }, 0.0,
                                      std::numeric_limits<double>::infinity());
}

double profile_alpha(const Vec& y, const Vec& offset, Loss loss) {
  const GenericFit g = fit_penalized(Mat(y.size(), 0), y, Mat(0, 0), 0.0, loss, true, &offset);
  return g.alpha;
}

struct NullFit {
  double alpha;
  Vec b;
};

NullFit null_fit(const Design& d, Loss loss, const NullHypothesis& h0, bool with_intercept) {
  NullFit nf;
  nf.b = h0.b0.size() == 0 ? Vec::Zero(d.size()) : h0.b0;
  if (nf.b.size() != d.size()) throw InvalidInput("null coefficient vector has the wrong length");
  nf.alpha = with_intercept ? profile_alpha(d.y, d.omega * nf.b, loss) : h0.alpha0;
  return nf;
}

Vec simulate_response(const Vec& eta, Loss loss, Rng& rng) {
  Vec y(eta.size());
  if (loss == Loss::L2) {
    std::normal_distribution<double> z;
    for (Eigen::Index i = 0; i < y.size(); ++i) y[i] = eta[i] + z(rng);
  } else {
    std::uniform_real_distribution<double> u;
    for (Eigen::Index i = 0; i < y.size(); ++i) y[i] = u(rng) < logistic(eta[i]) ? 1.0 : 0.0;
  }
  return y;
}

// p = (1 + #{T* ≥ T}) / (R + 1) over R simulated null statistics.
template <class Stat>
double monte_carlo_p(double observed, const Vec& eta0, Loss loss, const Calibration& cal, Stat&& stat) {
  if (cal.reps < 1) throw InvalidInput("Monte Carlo calibration needs reps >= 1");
  std::vector<double> sims(static_cast<std::size_t>(cal.reps));
  parallel_for(sims.size(), cal.threads, [&](std::size_t r) {
    Rng rng = make_rng(cal.seed, streams::plrt_null, r);
    sims[r] = stat(simulate_response(eta0, loss, rng));
  });
  std::size_t exceed = 0;
  for (const double s : sims) exceed += s >= observed ? 1 : 0;
  return (1.0 + static_cast<double>(exceed)) / (static_cast<double>(cal.reps) + 1.0);
}

void add_constants(TestReport& r, const NullConstants& nc) {
  r.null_params["u_n"] = nc.u_n;
  r.null_params["sigma2"] = nc.sigma2;
  r.null_params["sigma1_sq"] = nc.sigma1_sq;
  r.null_params["sigma2_sq"] = nc.sigma2_sq;
  r.null_params["h"] = nc.h;
  r.null_params["tail1"] = nc.tail1;
  r.null_params["tail2"] = nc.tail2;
  r.null_params["N"] = static_cast<double>(nc.N);
}

}  // namespace

std::string_view to_string(IntervalKind kind) {
  switch (kind) {
    case IntervalKind::ConditionalMean: return "conditional-mean";
    case IntervalKind::Prediction: return "prediction";
    case IntervalKind::PointwiseSlope: return "pointwise-slope";
  }
  return "";
}

void fill_decisions(TestReport& r, const std::vector<double>& levels) {
  for (const double a : levels) r.reject_at[a] = r.p_value <= a;
}

double z_two_sided(double level) {
  check_level(level);
  return boost::math::quantile(boost::math::normal_distribution<double>(), 0.5 + 0.5 * level);
}

IntervalReport ci_conditional_mean(const PenalizedFit& fit, const GridFunction& x0, double level,
                                   const CiOptions& opts) {
  const double z = z_two_sided(level);
  const Vec x = basis_coordinates(*fit.es, x0);
  IntervalReport r;
  r.kind = IntervalKind::ConditionalMean;
  r.level = level;
  r.sigma_n = std::sqrt(std::max(0.0, sigma_n_sq(fit, x, opts)));
  r.center = predict_mean(fit, x0);
  const double half = z * r.sigma_n * mean_derivative(fit, x0) / std::sqrt(static_cast<double>(fit.n));
  r.lower = r.center - half;
  r.upper = r.center + half;
  return r;
}

IntervalReport prediction_interval(const PenalizedFit& fit, const GridFunction& x0, double level, double noise_var,
                                   const CiOptions& opts) {
  if (fit.loss != Loss::L2) throw InvalidInput("prediction intervals are defined for the l2 loss only");
  if (!(noise_var > 0) || !std::isfinite(noise_var)) throw InvalidInput("noise variance must be positive");
  const double z = z_two_sided(level);
  const Vec x = basis_coordinates(*fit.es, x0);
  IntervalReport r;
  r.kind = IntervalKind::Prediction;
  r.level = level;
  r.sigma_n = std::sqrt(std::max(0.0, sigma_n_sq(fit, x, opts)));
  r.center = predict_mean(fit, x0);
  const double est = r.sigma_n / std::sqrt(static_cast<double>(fit.n));
  const double half = z * std::sqrt(noise_var + est * est);
  r.lower = r.center - half;
  r.upper = r.center + half;
  return r;
}

IntervalReport pointwise_ci_slope(const PenalizedFit& fit, double z, double level) {
  const double q = z_two_sided(level);
  const EigenSystem& es = *fit.es;
  const auto idx = static_cast<Eigen::Index>(es.grid.nearest(z));
  const Vec phi_z = es.phi.row(idx).transpose();
  IntervalReport r;
  r.kind = IntervalKind::PointwiseSlope;
  r.level = level;
  r.sigma_n = std::sqrt(phi_z.cwiseAbs2().dot(shrink(es, fit.lambda, 2)));
  r.center = phi_z.dot(fit.b);
  const double half = q * r.sigma_n / std::sqrt(static_cast<double>(fit.n));
  r.lower = r.center - half;
  r.upper = r.center + half;
  return r;
}

TestReport contrast_test(const PenalizedFit& fit, const GridFunction& w, double c) {
  const EigenSystem& es = *fit.es;
  const Vec wv = basis_coordinates(es, w);
  const double scale = std::sqrt(es.grid.trapezoid_weights().dot(w.values().cwiseAbs2())) *
                       std::sqrt((es.phi.cwiseAbs2().transpose() * es.grid.trapezoid_weights()).maxCoeff());
  if (!(wv.cwiseAbs().maxCoeff() > 1e-12 * scale) || scale == 0.0)
    throw NumericalError("degenerate contrast: w is numerically orthogonal to every basis function");
  const double denom = std::sqrt(wv.cwiseAbs2().dot(shrink(es, fit.lambda, 2)));
  const double contrast = wv.dot(fit.b);
  TestReport r;
  r.name = "CT";
  r.statistic = std::sqrt(static_cast<double>(fit.n)) * (contrast - c) / denom;
  r.p_value = std::erfc(std::abs(r.statistic) / std::sqrt(2.0));
  r.null_params["contrast"] = contrast;
  r.null_params["c"] = c;
  r.null_params["denominator"] = denom;
  fill_decisions(r);
  return r;
}

NullConstants null_constants(const EigenSystem& es, double h, Eigen::Index N, const ConstantsOptions& opts) {
  if (!(h > 0) || !std::isfinite(h)) throw InvalidInput("null_constants: h must be positive");
  if (N < 0) N = es.size();
  if (N > es.size() || N <= opts.skip) throw InvalidInput("null_constants: N out of range");
  const double lambda = std::pow(h, 2.0 * es.k);
  double s1 = 0.0, s2 = 0.0;
  for (Eigen::Index nu = opts.skip; nu < N; ++nu) {
    const double d = 1.0 / (1.0 + lambda * es.rho[nu]);
    s1 += d;
    s2 += d * d;
  }
  NullConstants nc;
  nc.h = h;
  nc.N = N;
  if (es.provenance == Provenance::Analytic) {
    const double rho_N = es.rho[N - 1];
    const double count = static_cast<double>(N - es.null_dim);
    if (!(rho_N > 0) || count < 1) throw TruncationError("null_constants: no positive eigenvalue to extrapolate from");
    nc.tail1 = power_tail(lambda * rho_N, count, es.k, 1);
    nc.tail2 = power_tail(lambda * rho_N, count, es.k, 2);
    if (nc.tail1 > opts.tail_tol * s1 || nc.tail2 > opts.tail_tol * s2) {
      std::ostringstream msg;
      msg << "basis truncated at N=" << N << " is too small for h=" << h << ": tail estimate " << nc.tail1 / s1
          << " of the sum exceeds " << opts.tail_tol;
      throw TruncationError(msg.str());
    }
  }
  nc.sigma1_sq = h * s1;
  nc.sigma2_sq = h * s2;
  nc.sigma2 = s1 / s2;
  nc.u_n = s1 * s1 / s2;
  return nc;
}

ConstantsReport constants_report(int m, double h, double c, int eigen_count) {
  const int k = m + 1;
  const double lambda = std::pow(h, 2.0 * k);
  ConstantsReport rep;
  rep.h = h;
  rep.c = c;
  rep.k = k;
  auto row = [](std::string name, double s1, double s2) {
    return ConstantsRow{std::move(name), s1, s2, s1 / s2, s1 * s1 / s2};
  };

  {
    const Vec rho = brownian_eigenvalues(m, eigen_count);
    double s1 = 0.0, s2 = 0.0;
    for (Eigen::Index nu = 0; nu < rho.size(); ++nu) {
      const double d = 1.0 / (1.0 + lambda * rho[nu]);
      s1 += d;
      s2 += d * d;
    }
    const double a = lambda * rho[rho.size() - 1];
    s1 += power_tail(a, static_cast<double>(eigen_count), k, 1);
    s2 += power_tail(a, static_cast<double>(eigen_count), k, 2);
    rep.rows.push_back(row("eigen-sum", h * s1, h * s2));
  }
  {
    // Sum until λ(cν)^{2k} is far beyond 1, then close with the tail integral.
    const auto count = static_cast<long>(std::ceil(1e3 / (c * h)));
    double s1 = 0.0, s2 = 0.0;
    for (long nu = 1; nu <= count; ++nu) {
      const double d = 1.0 / (1.0 + lambda * std::pow(c * static_cast<double>(nu), 2.0 * k));
      s1 += d;
      s2 += d * d;
    }
    const double a = lambda * std::pow(c * static_cast<double>(count), 2.0 * k);
    s1 += power_tail(a, static_cast<double>(count), k, 1);
    s2 += power_tail(a, static_cast<double>(count), k, 2);
    rep.rows.push_back(row("power-law-sum", h * s1, h * s2));
  }
  {
    // ∫_0^∞ (1+x^p)^{-l} dx = Γ(1+1/p) Γ(l−1/p) / Γ(l).
    const double p = 2.0 * k;
    auto integral = [&](int l) {
      return std::tgamma(1.0 + 1.0 / p) * std::tgamma(l - 1.0 / p) / std::tgamma(static_cast<double>(l)) / c;
    };
    rep.rows.push_back(row("continuum", integral(1), integral(2)));
  }
  rep.rows.push_back(ConstantsRow{"published", 0.2876697, 0.2662496, 1.080451, 0.3108129});
  return rep;
}

double plrt_value(const Design& d, Loss loss, double lambda, const NullHypothesis& h0, bool with_intercept) {
  const NullFit nf = null_fit(d, loss, h0, with_intercept);
  const PenalizedFit full = fit(d, loss, lambda, with_intercept);
  return penalized_loglik(d, loss, nf.alpha, nf.b, lambda) - penalized_loglik(d, loss, full.alpha, full.b, lambda);
}

double plrt_quadratic_form(const Design& d, double lambda) {
  const double n = static_cast<double>(d.n());
  Mat M = d.omega.transpose() * d.omega;
  M.diagonal() += n * lambda * d.es->rho;
  const Vec r = d.omega.transpose() * d.y;
  return -r.dot(M.ldlt().solve(r)) / (2.0 * n);
}

TestReport plrt(const Design& d, Loss loss, double lambda, const NullHypothesis& h0, const PlrtOptions& opts) {
  const double h = std::pow(lambda, 1.0 / (2.0 * d.es->k));
  ConstantsOptions copt = opts.constants;
  if (opts.calibration.mode == CalibrationMode::MonteCarlo) copt.tail_tol = std::numeric_limits<double>::infinity();
  const NullConstants nc = null_constants(*d.es, h, -1, copt);
  const double n = static_cast<double>(d.n());
  const double raw = plrt_value(d, loss, lambda, h0, opts.with_intercept);

  TestReport r;
  r.name = "PLRT";
  r.statistic = -2.0 * n * nc.sigma2 * raw;
  r.calibration = opts.calibration;
  r.null_params["plrt"] = raw;
  r.null_params["lambda"] = lambda;
  add_constants(r, nc);
  if (opts.calibration.mode == CalibrationMode::Asymptotic) {
    r.p_value = chi2_upper_tail(r.statistic, nc.u_n);
  } else {
    const NullFit nf = null_fit(d, loss, h0, opts.with_intercept);
    const Vec eta0 = (d.omega * nf.b).array() + nf.alpha;
    r.p_value = monte_carlo_p(r.statistic, eta0, loss, opts.calibration, [&](Vec y) {
      Design sim{d.es, d.omega, std::move(y)};
      return -2.0 * n * nc.sigma2 * plrt_value(sim, loss, lambda, h0, opts.with_intercept);
    });
  }
  fill_decisions(r);
  return r;
}

Mat monomial_penalty(int j, int m) {
  if (j < 0) throw InvalidInput("polynomial order must be >= 0");
  auto falling = [](int a, int m_) {
    double f = 1.0;
    for (int i = 0; i < m_; ++i) f *= a - i;
    return f;
  };
  Mat D = Mat::Zero(j + 1, j + 1);
  for (int a = m; a <= j; ++a)
    for (int b = m; b <= j; ++b) D(a, b) = falling(a, m) * falling(b, m) / (a + b - 2 * m + 1);
  return D;
}

TestReport plrt_composite(const CurveDataset& data, const Design& d, Loss loss, double lambda, int poly_order,
                          const PlrtOptions& opts) {
  if (poly_order < 0) throw InvalidInput("polynomial order must be >= 0");
  if (poly_order > 8)
    throw NumericalError("polynomial null of order " + std::to_string(poly_order) +
                         " is too ill-conditioned (order must be <= 8)");
  const EigenSystem& es = *d.es;
  if (!(data.grid() == es.grid)) throw GridMismatch("plrt_composite: grid mismatch");
  const Vec t = es.grid.points();
  const Vec w = es.grid.trapezoid_weights();
  Mat P(t.size(), poly_order + 1);
  for (int l = 0; l <= poly_order; ++l) P.col(l) = t.array().pow(static_cast<double>(l)).matrix();
  const Mat Z = data.curves() * (w.asDiagonal() * P);
  const Mat D = monomial_penalty(poly_order, es.m);
  const double n = static_cast<double>(d.n());
  const double h = std::pow(lambda, 1.0 / (2.0 * es.k));

  ConstantsOptions copt = opts.constants;
  // Polynomials of degree < m span the zero-penalty block, which the null fit absorbs.
  if (poly_order >= es.m - 1) copt.skip = std::max<Eigen::Index>(copt.skip, es.null_dim);
  if (opts.calibration.mode == CalibrationMode::MonteCarlo) copt.tail_tol = std::numeric_limits<double>::infinity();
  const NullConstants nc = null_constants(es, h, -1, copt);

  auto raw_stat = [&](const Vec& y) {
    const GenericFit g = fit_penalized(Z, y, D, lambda, loss, opts.with_intercept);
    const PenalizedFit full = fit(Design{d.es, d.omega, y}, loss, lambda, opts.with_intercept);
    const Design dy{d.es, d.omega, y};
    return g.objective - penalized_loglik(dy, loss, full.alpha, full.b, lambda);
  };

  TestReport r;
  r.name = "PLRT-composite";
  const double raw = raw_stat(d.y);
  r.statistic = -2.0 * n * nc.sigma2 * raw;
  r.calibration = opts.calibration;
  r.null_params["plrt"] = raw;
  r.null_params["lambda"] = lambda;
  r.null_params["poly_order"] = poly_order;
  add_constants(r, nc);
  if (opts.calibration.mode == CalibrationMode::Asymptotic) {
    r.p_value = chi2_upper_tail(r.statistic, nc.u_n);
  } else {
    const GenericFit g0 = fit_penalized(Z, d.y, D, lambda, loss, opts.with_intercept);
    const Vec eta0 = (Z * g0.coef).array() + g0.alpha;
    r.p_value = monte_carlo_p(r.statistic, eta0, loss, opts.calibration,
                              [&](const Vec& y) { return -2.0 * n * nc.sigma2 * raw_stat(y); });
  }
  fill_decisions(r);
  return r;
}

}  // namespace gflm
