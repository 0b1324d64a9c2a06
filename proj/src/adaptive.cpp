#include "gflm/adaptive.hpp"

#include "gflm/errors.hpp"
#include "gflm/parallel.hpp"
#include "gflm/rng.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <random>
#include <tuple>

namespace gflm {

namespace {

void check_orthonormal(const Mat& omega, double tol) {
  const double n = static_cast<double>(omega.rows());
  const Mat G = omega.transpose() * omega / n;
  const double err = (G - Mat::Identity(G.rows(), G.cols())).cwiseAbs().maxCoeff();
  if (!(err <= tol))
    throw InvalidInput("design is not orthonormal ((1/n)ΩᵀΩ deviates from I by " + std::to_string(err) +
                       "); the adaptive test needs the empirical eigen-design");
}

// Per-k pieces shared by every evaluation on a fixed design.
struct Level {
  Vec d;
  double sum_d = 0.0;
  double denom = 0.0;
};

std::vector<Level> levels(const Mat& omega, int k_n, double c0, AtVariant variant) {
  const Eigen::Index n = omega.rows();
  const Eigen::Index N = omega.cols();
  std::vector<Level> out;
  for (int k = 1; k <= k_n; ++k) {
    Level lv;
    lv.d = shrinkage_weights(N, n, k, c0);
    lv.sum_d = lv.d.sum();
    const double sum_d2 = lv.d.squaredNorm();
    if (variant == AtVariant::Gauss) {
      lv.denom = std::sqrt(2.0 * sum_d2);
    } else {
      const Vec a_diag = omega.cwiseAbs2() * lv.d / static_cast<double>(n);
      const double off = sum_d2 - a_diag.squaredNorm();
      if (!(off > 1e-12 * sum_d2))
        throw NumericalError("sub-Gaussian statistic is degenerate: A_k has no off-diagonal mass (spiked design)");
      lv.denom = std::sqrt(2.0 * off);
    }
    out.push_back(std::move(lv));
  }
  return out;
}

Vec taus_from_projection(const Vec& eta, const std::vector<Level>& lv) {
  Vec tau(static_cast<Eigen::Index>(lv.size()));
  const Vec eta2 = eta.cwiseAbs2();
  for (std::size_t k = 0; k < lv.size(); ++k)
    tau[static_cast<Eigen::Index>(k)] = (lv[k].d.dot(eta2) - lv[k].sum_d) / lv[k].denom;
  return tau;
}

double tail_p(const std::vector<double>& sorted, double observed) {
  const auto it = std::lower_bound(sorted.begin(), sorted.end(), observed);
  const auto exceed = static_cast<double>(sorted.end() - it);
  return (1.0 + exceed) / (static_cast<double>(sorted.size()) + 1.0);
}

}  // namespace

std::string_view to_string(AtVariant v) { return v == AtVariant::Gauss ? "gauss" : "subgauss"; }
std::string_view to_string(AtCalibration c) { return c == AtCalibration::Gumbel ? "gumbel" : "monte-carlo"; }

double lambda_schedule(Eigen::Index n, int k, double c0) {
  if (n < 16) throw InvalidInput("lambda_schedule needs n >= 16 so that log log n > 0");
  if (k < 1) throw InvalidInput("smoothness level k must be >= 1");
  if (!(c0 > 0)) throw InvalidInput("c0 must be positive");
  const double nn = static_cast<double>(n);
  const double kk = static_cast<double>(k);
  return std::pow(c0, 2.0 * kk) * std::pow(nn, -4.0 * kk / (4.0 * kk + 1.0)) *
         std::pow(std::log(std::log(nn)), 2.0 * kk / (4.0 * kk + 1.0));
}

int default_kn(Eigen::Index n) {
  return std::max(2, static_cast<int>(std::lround(std::pow(std::log(static_cast<double>(n)), 0.4))));
}

Vec shrinkage_weights(Eigen::Index N, Eigen::Index n, int k, double c0) {
  const double lam = lambda_schedule(n, k, c0);
  Vec d(N);
  for (Eigen::Index nu = 0; nu < N; ++nu) d[nu] = 1.0 / (1.0 + lam * std::pow(static_cast<double>(nu + 1), 2.0 * k));
  return d;
}

double tau_gauss(const Vec& y, const Mat& omega, int k, double c0, double ortho_tol) {
  check_orthonormal(omega, ortho_tol);
  if (y.size() != omega.rows()) throw InvalidInput("response length does not match design");
  const Vec eta = omega.transpose() * y / std::sqrt(static_cast<double>(omega.rows()));
  const Vec d = shrinkage_weights(omega.cols(), omega.rows(), k, c0);
  return (d.dot(eta.cwiseAbs2()) - d.sum()) / std::sqrt(2.0 * d.squaredNorm());
}

double tau_subgauss(const Vec& y, const Mat& omega, int k, double c0, double ortho_tol) {
  check_orthonormal(omega, ortho_tol);
  if (y.size() != omega.rows()) throw InvalidInput("response length does not match design");
  const Vec eta = omega.transpose() * y / std::sqrt(static_cast<double>(omega.rows()));
  Level lv = levels(omega, k, c0, AtVariant::SubGauss).back();
  // levels() builds k = 1..k; only the last entry is the requested one.
  return (lv.d.dot(eta.cwiseAbs2()) - lv.sum_d) / lv.denom;
}

double solve_Bn(int k_n) {
  if (k_n < 1) throw InvalidInput("k_n must be >= 1");
  // f(B) = log(2π) + 2 log B + B² − 2 log k_n is increasing on B > 0.
  const double target = 2.0 * std::log(static_cast<double>(k_n)) - std::log(2.0 * std::numbers::pi);
  auto f = [&](double B) { return 2.0 * std::log(B) + B * B - target; };
  double lo = 1e-8, hi = 1.0;
  while (f(hi) < 0) hi *= 2.0;
  double B = 0.5 * (lo + hi);
  for (int it = 0; it < 200; ++it) {
    const double fb = f(B);
    if (fb < 0) lo = B; else hi = B;
    const double step = fb / (2.0 / B + 2.0 * B);
    double next = B - step;
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::abs(next - B) <= 1e-15 * B) {
      B = next;
      break;
    }
    B = next;
  }
  return B;
}

double gumbel_critical(double alpha) {
  if (!(alpha > 0 && alpha < 1)) throw InvalidInput("alpha must lie in (0,1)");
  return -std::log(-std::log(1.0 - alpha));
}

double at_from_tau(const Vec& tau, double B_n) {
  return B_n * (tau.maxCoeff() - B_n);
}

MomentDiagnostic moment_diagnostic(const Mat& omega) {
  const double n = static_cast<double>(omega.rows());
  MomentDiagnostic m;
  m.value = omega.array().pow(4).colwise().sum().maxCoeff();
  m.threshold = std::pow(n, 1.6) * std::pow(std::log(std::log(n)), -2.8);
  m.pass = m.value < m.threshold;
  return m;
}

std::shared_ptr<const std::vector<double>> gaussian_at_null(Eigen::Index N, Eigen::Index n, int k_n, double c0,
                                                            int reps, std::uint64_t seed, unsigned threads) {
  using Key = std::tuple<Eigen::Index, Eigen::Index, int, std::uint64_t, int, std::uint64_t>;
  static std::mutex mu;
  static std::map<Key, std::shared_ptr<const std::vector<double>>> cache;
  const Key key{N, n, k_n, std::bit_cast<std::uint64_t>(c0), reps, seed};
  {
    std::lock_guard lock(mu);
    if (auto it = cache.find(key); it != cache.end()) return it->second;
  }
  if (reps < 1) throw InvalidInput("Monte Carlo calibration needs reps >= 1");
  std::vector<Level> lv;
  for (int k = 1; k <= k_n; ++k) {
    Level l;
    l.d = shrinkage_weights(N, n, k, c0);
    l.sum_d = l.d.sum();
    l.denom = std::sqrt(2.0 * l.d.squaredNorm());
    lv.push_back(std::move(l));
  }
  const double B = solve_Bn(k_n);
  auto sims = std::make_shared<std::vector<double>>(static_cast<std::size_t>(reps));
  parallel_for(sims->size(), threads, [&](std::size_t r) {
    Rng rng = make_rng(seed, streams::at_null, r);
    std::normal_distribution<double> z;
    Vec eta(N);
    for (Eigen::Index i = 0; i < N; ++i) eta[i] = z(rng);
    (*sims)[r] = at_from_tau(taus_from_projection(eta, lv), B);
  });
  std::sort(sims->begin(), sims->end());
  std::lock_guard lock(mu);
  return cache.emplace(key, std::move(sims)).first->second;
}

AdaptiveReport adaptive_test(const Vec& y, const Mat& omega, const AdaptiveConfig& config, double alpha) {
  const Eigen::Index n = omega.rows();
  const Eigen::Index N = omega.cols();
  if (y.size() != n) throw InvalidInput("response length does not match design");
  if (n < 16) throw InvalidInput("adaptive test needs n >= 16");
  const int k_n = config.k_n > 0 ? config.k_n : default_kn(n);
  if (config.calibration == AtCalibration::Gumbel && k_n < 2)
    throw UsageError("Gumbel calibration needs k_n >= 2");
  if (!(config.c0 > 0)) throw InvalidInput("c0 must be positive");
  check_orthonormal(omega, 1e-6);

  const std::vector<Level> lv = levels(omega, k_n, config.c0, config.variant);
  const double sqrt_n = std::sqrt(static_cast<double>(n));
  const Vec eta = omega.transpose() * y / sqrt_n;

  AdaptiveReport r;
  r.tau = taus_from_projection(eta, lv);
  r.AT_star = r.tau.maxCoeff();
  r.B_n = solve_Bn(k_n);
  r.AT = at_from_tau(r.tau, r.B_n);
  r.k_n = k_n;
  r.c0 = config.c0;
  r.variant = config.variant;
  r.calibration = config.calibration;
  r.N = N;

  if (config.calibration == AtCalibration::Gumbel) {
    r.p_value = 1.0 - std::exp(-std::exp(-r.AT));
  } else {
    r.reps = config.reps;
    r.seed = config.seed;
    if (config.variant == AtVariant::Gauss) {
      r.p_value = tail_p(*gaussian_at_null(N, n, k_n, config.c0, config.reps, config.seed, config.threads), r.AT);
    } else {
      // Sign-flip randomization of the observed responses.
      if (config.reps < 1) throw InvalidInput("Monte Carlo calibration needs reps >= 1");
      std::vector<double> sims(static_cast<std::size_t>(config.reps));
      parallel_for(sims.size(), config.threads, [&](std::size_t rep) {
        Rng rng = make_rng(config.seed, streams::at_null, rep);
        std::bernoulli_distribution coin;
        Vec ys(n);
        for (Eigen::Index i = 0; i < n; ++i) ys[i] = coin(rng) ? y[i] : -y[i];
        const Vec e = omega.transpose() * ys / sqrt_n;
        sims[rep] = at_from_tau(taus_from_projection(e, lv), r.B_n);
      });
      std::sort(sims.begin(), sims.end());
      r.p_value = tail_p(sims, r.AT);
    }
  }
  for (const double a : kReportLevels) r.reject_at[a] = r.p_value <= a;
  if (!r.reject_at.contains(alpha)) r.reject_at[alpha] = r.p_value <= alpha;
  return r;
}

AdaptiveReport adaptive_test(const CurveDataset& data, const AdaptiveConfig& config, double alpha) {
  return adaptive_test(data.responses(), empirical_design(data).omega, config, alpha);
}

}  // namespace gflm
