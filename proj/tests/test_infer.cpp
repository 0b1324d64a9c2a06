#include "gflm/errors.hpp"
#include "gflm/infer.hpp"
#include "support.hpp"

#include <boost/math/distributions/chi_squared.hpp>

#include <algorithm>

using namespace gflm;

namespace {

EigenSystemPtr brownian(int N = 50, bool null_space = true) { return brownian_system(2, N, Grid(1000), null_space); }

Design empirical_design_of(const CurveDataset& data, int N) {
  return make_design(data, std::make_shared<const EigenSystem>(empirical_eigensystem(data, N, 3)));
}

struct Moments {
  double mean, var;
};

Moments moments(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m += x;
  m /= static_cast<double>(v.size());
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return {m, s / static_cast<double>(v.size() - 1)};
}

// Responses from the given linear predictor plus standard normal noise.
Vec responses(const Vec& eta, std::mt19937_64& rng) { return eta + gflm::testing::gaussian_vec(eta.size(), rng); }

}  // namespace

TEST_SUITE("infer") {

TEST_CASE("normal quantile and level checks") {
  CHECK(z_two_sided(0.95) == doctest::Approx(1.959964).epsilon(1e-6));
  CHECK_THROWS_AS(z_two_sided(1.0), InvalidInput);
  CHECK_THROWS_AS(z_two_sided(0.0), InvalidInput);
}

TEST_CASE("conditional-mean interval at a zero curve with intercept") {
  const Sample s = gen_setting1(100, 1.0, 1.0, 1);
  const PenalizedFit f = fit_l2(s.data, brownian(), 1e-6, true);
  const GridFunction zero(s.data.grid(), Vec::Zero(1000));
  const IntervalReport r = ci_conditional_mean(f, zero, 0.95);
  CHECK(r.center == f.alpha);
  CHECK(r.sigma_n == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(r.width() == doctest::Approx(2.0 * 1.959963984540054 / 10.0).epsilon(1e-12));
  CHECK_THROWS_AS(ci_conditional_mean(f, zero, 1.5), InvalidInput);
}

TEST_CASE("interval invariants and width scaling") {
  const Sample s = gen_setting1(100, 1.0, 1.0, 2);
  PenalizedFit f = fit_l2(s.data, brownian(), 1e-7);
  for (const CiOptions& o : {CiOptions{}, CiOptions{.squared_denominator = false},
                             CiOptions{.noise_scale = 1.0}, CiOptions{.drop_constant = true}}) {
    const IntervalReport r = ci_conditional_mean(f, s.x0, 0.9, o);
    CHECK(r.lower <= r.center);
    CHECK(r.center <= r.upper);
    CHECK(r.width() > 0.0);
  }
  const double w1 = ci_conditional_mean(f, s.x0, 0.95).width();
  f.n *= 2;
  const double w2 = ci_conditional_mean(f, s.x0, 0.95).width();
  CHECK(w2 * std::sqrt(2.0) == doctest::Approx(w1).epsilon(1e-14));
}

TEST_CASE("interval variance options") {
  const Sample s = gen_setting1(100, 1.0, 1.0, 3);
  const PenalizedFit f = fit_l2(s.data, brownian(), 1e-7);
  const Vec x = basis_coordinates(*f.es, s.x0);
  const Vec d = (1.0 + f.lambda * f.es->rho.array()).inverse().matrix();
  const double sq = x.cwiseAbs2().dot(d.cwiseAbs2());
  const double lin = x.cwiseAbs2().dot(d);
  CHECK(ci_conditional_mean(f, s.x0, 0.95).sigma_n == doctest::Approx(std::sqrt(sq)).epsilon(1e-12));
  CHECK(ci_conditional_mean(f, s.x0, 0.95, {.squared_denominator = false}).sigma_n ==
        doctest::Approx(std::sqrt(lin)).epsilon(1e-12));
  CHECK(ci_conditional_mean(f, s.x0, 0.95, {.noise_scale = 1.0}).sigma_n ==
        doctest::Approx(std::sqrt(1.0 + sq)).epsilon(1e-12));
  CHECK(ci_conditional_mean(f, s.x0, 0.95, {.noise_scale = 1.0, .drop_constant = true}).sigma_n ==
        doctest::Approx(std::sqrt(sq)).epsilon(1e-12));
}

TEST_CASE("prediction interval") {
  const Sample s = gen_setting1(100, 1.0, 1.0, 4);
  PenalizedFit f = fit_l2(s.data, brownian(), 1e-7);
  const GridFunction zero(s.data.grid(), Vec::Zero(1000));
  const double z = z_two_sided(0.95);
  CHECK(prediction_interval(f, zero, 0.95, 1.0).width() == doctest::Approx(2.0 * z).epsilon(1e-14));
  f.n = 1'000'000'000'000;
  CHECK(prediction_interval(f, s.x0, 0.95, 2.0).width() == doctest::Approx(2.0 * z * std::sqrt(2.0)).epsilon(1e-9));
  CHECK_THROWS_AS(prediction_interval(f, zero, 0.95, 0.0), InvalidInput);
  f.loss = Loss::Logistic;
  CHECK_THROWS_AS(prediction_interval(f, zero, 0.95, 1.0), InvalidInput);
}

TEST_CASE("pointwise slope interval") {
  const Sample s = gen_setting1(100, 1.0, 1.0, 5);
  for (double h : {0.05, 0.1, 0.2}) {
    const double lambda = std::pow(h, 6.0);
    const IntervalReport a = pointwise_ci_slope(fit_l2(s.data, brownian(50), lambda), 0.5, 0.95);
    const IntervalReport b = pointwise_ci_slope(fit_l2(s.data, brownian(100), lambda), 0.5, 0.95);
    INFO("h = " << h);
    CHECK(a.sigma_n > 0.0);
    CHECK(std::abs(a.sigma_n - b.sigma_n) < 1e-3 * b.sigma_n);
    CHECK(a.kind == IntervalKind::PointwiseSlope);
  }
  const PenalizedFit f = fit_l2(s.data, brownian(), 1e-6);
  for (double z : {0.1, 0.37, 0.9}) CHECK(pointwise_ci_slope(f, z, 0.95).sigma_n > 0.0);
}

TEST_CASE("contrast test: exact hypothesis value gives zero") {
  const Sample s = gen_setting1(100, 1.0, 1.0, 6);
  const PenalizedFit f = fit_l2(s.data, brownian(), 1e-6);
  const GridFunction w = GridFunction::sample(s.data.grid(), [](double t) { return 1.0 + t; });
  const double c = integrate(GridFunction(s.data.grid(), w.values().cwiseProduct(f.beta())));
  const TestReport r = contrast_test(f, w, c);
  CHECK(std::abs(r.statistic) < 1e-8);
  CHECK(r.p_value == doctest::Approx(1.0).epsilon(1e-8));
  CHECK_FALSE(r.reject_at.at(0.05));
}

TEST_CASE("contrast test is invariant under rescaling") {
  const Sample s = gen_setting1(100, 1.0, 1.0, 7);
  const PenalizedFit f = fit_l2(s.data, brownian(), 1e-6);
  const GridFunction w = GridFunction::sample(s.data.grid(), [](double t) { return std::cos(3.0 * t); });
  const TestReport a = contrast_test(f, w, 0.2);
  for (double c : {0.01, 3.0, 250.0}) {
    const TestReport b = contrast_test(f, GridFunction(w.grid(), c * w.values()), 0.2 * c);
    CHECK(b.statistic == doctest::Approx(a.statistic).epsilon(1e-12));
  }
}

TEST_CASE("single-frequency contrast") {
  const Grid g(1000);
  const auto es = brownian(20, false);
  const Sample s = gen_setting1(100, 1.0, 1.0, 8);
  const double lambda = 1e-7;
  const PenalizedFit f = fit_l2(s.data, es, lambda);
  const Mat C = brownian_kernel(g).values();
  const Vec wq = g.trapezoid_weights();
  for (int nu : {0, 2, 5}) {
    // w = C φ_ν, so ∫ w φ_μ = V(φ_ν, φ_μ) = δ_νμ
    const Vec w = C * wq.cwiseProduct(es->phi.col(nu));
    const TestReport r = contrast_test(f, GridFunction(g, w), 0.0);
    CHECK(r.null_params.at("denominator") == doctest::Approx(1.0 / (1.0 + lambda * es->rho[nu])).epsilon(1e-3));
  }
  CHECK_THROWS_AS(contrast_test(f, GridFunction(g, Vec::Zero(1000)), 0.0), NumericalError);
}

TEST_CASE("null constants in the unpenalized limit") {
  EigenSystem es;
  es.grid = Grid(10);
  es.rho = Vec::Zero(7);
  es.phi = Mat::Zero(10, 7);
  es.k = 3;
  es.provenance = Provenance::Empirical;
  const NullConstants nc = null_constants(es, 0.2, -1);
  CHECK(nc.sigma1_sq == doctest::Approx(0.2 * 7));
  CHECK(nc.sigma2_sq == doctest::Approx(0.2 * 7));
  CHECK(nc.sigma2 == doctest::Approx(1.0));
  CHECK(nc.u_n == doctest::Approx(7.0));
  CHECK_THROWS_AS(null_constants(es, 0.0), InvalidInput);
}

TEST_CASE("null constants: truncation guard") {
  const auto es = brownian(10, false);
  CHECK_THROWS_AS(null_constants(*es, 1e-3), TruncationError);
  const auto wide = brownian(50, false);
  const NullConstants nc = null_constants(*wide, 0.2);
  CHECK(nc.tail1 <= 1e-6 * nc.sigma1_sq / 0.2);
  CHECK(nc.tail1 > 0.0);
}

TEST_CASE("constants report: eigen sums against the continuum integral") {
  const ConstantsReport rep = constants_report(2, 0.01, gflm::testing::kPi);
  REQUIRE(rep.rows.size() == 4);
  const auto& eig = rep.rows[0];
  const auto& pow_law = rep.rows[1];
  const auto& cont = rep.rows[2];
  const auto& pub = rep.rows[3];
  CHECK(eig.method == "eigen-sum");
  CHECK(cont.method == "continuum");
  CHECK(pub.sigma1_sq == 0.2876697);
  CHECK(pub.u_n_h == 0.3108129);
  // same c on both sides
  CHECK(gflm::testing::rel_err(pow_law.sigma1_sq, cont.sigma1_sq) < 0.05);
  CHECK(gflm::testing::rel_err(pow_law.sigma2_sq, cont.sigma2_sq) < 0.05);
  CHECK(gflm::testing::rel_err(eig.sigma1_sq, cont.sigma1_sq) < 0.05);
  CHECK(gflm::testing::rel_err(eig.sigma2_sq, cont.sigma2_sq) < 0.05);
  // continuum integral by independent quadrature of (1+x^6)^{-l}
  for (int l : {1, 2}) {
    double s = 0.0;
    const double dx = 1e-4;
    for (double x = 0.5 * dx; x < 50.0; x += dx) s += std::pow(1.0 + std::pow(x, 6.0), -l) * dx;
    CHECK((l == 1 ? cont.sigma1_sq : cont.sigma2_sq) == doctest::Approx(s / gflm::testing::kPi).epsilon(1e-6));
  }
}

TEST_CASE("likelihood route equals the quadratic form") {
  const Sample s = gen_setting1(100, 1.0, 1.0, 9);
  const Design base = empirical_design_of(s.data, 100);
  std::mt19937_64 rng(10);
  std::uniform_real_distribution<double> unif(-3.0, 3.0);
  for (int rep = 0; rep < 50; ++rep) {
    Design d = base;
    for (Eigen::Index i = 0; i < d.n(); ++i) d.y[i] = rep % 2 ? unif(rng) : std::normal_distribution<double>()(rng);
    const double lambda = std::pow(10.0, -8.0 + 0.14 * rep);
    const double a = plrt_value(d, Loss::L2, lambda);
    const double b = plrt_quadratic_form(d, lambda);
    CHECK(std::abs(a - b) <= 1e-8 * std::abs(b));
  }
}

TEST_CASE("the likelihood ratio is never positive") {
  std::mt19937_64 rng(11);
  for (int rep = 0; rep < 20; ++rep) {
    const Sample s = gen_setting1(60, rep % 3 * 0.5, 1.0, 100 + rep, 200);
    const Design d = make_design(s.data, brownian_system(2, 20, Grid(200), true));
    const double lambda = std::pow(10.0, -9.0 + 0.4 * rep);
    CHECK(plrt_value(d, Loss::L2, lambda) <= 1e-15);
    Design b = d;
    for (Eigen::Index i = 0; i < b.n(); ++i) b.y[i] = b.y[i] > 0 ? 1.0 : 0.0;
    CHECK(plrt_value(b, Loss::Logistic, lambda) <= 1e-15);
  }
}

TEST_CASE("PLRT vanishes for null-consistent data under heavy penalty") {
  const Sample s = gen_setting1(100, 0.0, 1.0, 12);
  Design d = make_design(s.data, brownian(20, false));
  d.y.setZero();
  CHECK(plrt_value(d, Loss::L2, 1.0) == 0.0);
  std::mt19937_64 rng(3);
  d.y = 1e-3 * gflm::testing::gaussian_vec(100, rng);
  CHECK(std::abs(plrt_value(d, Loss::L2, 1e6)) < 1e-12);
  PlrtOptions o;
  o.calibration = {CalibrationMode::MonteCarlo, 99, 1, 1};
  CHECK_FALSE(plrt(d, Loss::L2, 1e6, {}, o).reject_at.at(0.05));
}

TEST_CASE("null moments of the PLRT match the weighted chi-square law") {
  const Sample s = gen_setting1(100, 0.0, 1.0, 13);
  Design d = empirical_design_of(s.data, 100);
  const double lambda = 1e-6;
  const Vec dnu = (1.0 + lambda * d.es->rho.array()).inverse().matrix();
  const double mean = dnu.sum(), var = 2.0 * dnu.squaredNorm();
  std::mt19937_64 rng(14);
  std::vector<double> stats;
  // At 5000 draws the sample variance has a relative standard error near
  // 3.5%, too close to the 5% bound; 20000 draws bring it to 1.7%.
  for (int rep = 0; rep < 20000; ++rep) {
    d.y = gflm::testing::gaussian_vec(100, rng);
    stats.push_back(-2.0 * 100.0 * plrt_quadratic_form(d, lambda));
  }
  const Moments m = moments(stats);
  MESSAGE("mean " << m.mean << " vs " << mean << ", var " << m.var << " vs " << var);
  CHECK(gflm::testing::rel_err(m.mean, mean) < 0.05);
  CHECK(gflm::testing::rel_err(m.var, var) < 0.05);
}

TEST_CASE("PLRT report fields and Monte Carlo bookkeeping") {
  const Sample s = gen_setting1(100, 0.5, 1.0, 15);
  const Design d = make_design(s.data, brownian());
  const TestReport a = plrt(d, Loss::L2, 1e-6);
  CHECK(a.name == "PLRT");
  CHECK(a.calibration.mode == CalibrationMode::Asymptotic);
  const double un = a.null_params.at("u_n");
  CHECK(a.p_value == doctest::Approx(boost::math::cdf(boost::math::complement(
                                         boost::math::chi_squared_distribution<double>(un), a.statistic)))
                         .epsilon(1e-10));
  for (double lvl : kReportLevels) CHECK(a.reject_at.at(lvl) == (a.p_value <= lvl));

  PlrtOptions o;
  o.calibration = {CalibrationMode::MonteCarlo, 199, 42, 1};
  const TestReport b = plrt(d, Loss::L2, 1e-6, {}, o);
  CHECK(b.calibration.reps == 199);
  CHECK(b.calibration.seed == 42);
  CHECK(b.p_value >= 1.0 / 200.0);
  CHECK(b.p_value <= 1.0);
  const TestReport c = plrt(d, Loss::L2, 1e-6, {}, o);
  CHECK(b.p_value == c.p_value);
}

TEST_CASE("chi-square and Monte Carlo calibration agree") {
  const auto es = brownian();
  const double lambda = 1e-6;
  PlrtOptions mc;
  mc.calibration = {CalibrationMode::MonteCarlo, 199, 7, 1};
  int rej_asym = 0, rej_mc = 0;
  const int trials = 300;
  for (int t = 0; t < trials; ++t) {
    const Sample s = gen_setting1(500, 0.0, 1.0, 5000 + t);
    const Design d = make_design(s.data, es);
    rej_asym += plrt(d, Loss::L2, lambda).reject_at.at(0.05);
    mc.calibration.seed = 7 + t;
    rej_mc += plrt(d, Loss::L2, lambda, {}, mc).reject_at.at(0.05);
  }
  MESSAGE("rejections: chi-square " << rej_asym << ", Monte Carlo " << rej_mc << " of " << trials);
  CHECK(std::abs(rej_asym - rej_mc) * 100.0 / trials <= 2.0);
}

TEST_CASE("monomial penalty matrix") {
  CHECK(monomial_penalty(0, 2).cwiseAbs().maxCoeff() == 0.0);
  CHECK(monomial_penalty(1, 2).cwiseAbs().maxCoeff() == 0.0);
  const Mat D = monomial_penalty(4, 2);
  const Grid g(2001);
  for (int a = 0; a <= 4; ++a)
    for (int b = 0; b <= 4; ++b) {
      const auto fa = GridFunction::sample(g, [a](double t) { return std::pow(t, a); });
      const auto fb = GridFunction::sample(g, [b](double t) { return std::pow(t, b); });
      CHECK(D(a, b) == doctest::Approx(penalty_J(fa, fb, 2)).epsilon(1e-4).scale(1.0));
    }
  CHECK_THROWS_AS(monomial_penalty(-1, 2), InvalidInput);
}

TEST_CASE("composite null: size under a linear slope and power under curvature") {
  const auto es = brownian();
  const double lambda = 1e-6;
  auto rate = [&](Eigen::Index n, double (*beta)(double), int trials, std::uint64_t base) {
    int rej = 0;
    std::mt19937_64 rng(base);
    for (int t = 0; t < trials; ++t) {
      const Sample s = gen_setting1(n, 0.0, 1.0, base + t);
      const Grid& g = s.data.grid();
      const Vec b0 = GridFunction::sample(g, beta).values();
      const Vec eta = s.data.curves() * g.trapezoid_weights().cwiseProduct(b0);
      const CurveDataset data(g, s.data.curves(), responses(eta, rng));
      const Design d = make_design(data, es);
      rej += plrt_composite(data, d, Loss::L2, lambda, 1).reject_at.at(0.05);
    }
    return 100.0 * rej / trials;
  };
  const double size = rate(100, [](double t) { return 1.0 - 2.0 * t; }, 1000, 70000);
  MESSAGE("composite size " << size);
  CHECK(size >= 3.0);
  CHECK(size <= 7.0);
  const double size500 = rate(500, [](double t) { return 1.0 - 2.0 * t; }, 200, 80000);
  const double power = rate(500, [](double t) { return 8.0 * std::sin(2.0 * gflm::testing::kPi * t); }, 200, 90000);
  MESSAGE("composite n=500 size " << size500 << ", power " << power);
  CHECK(power >= size500 + 30.0);
}

TEST_CASE("composite null argument checks") {
  const Sample s = gen_setting1(50, 1.0, 1.0, 16, 200);
  const Design d = make_design(s.data, brownian_system(2, 60, Grid(200), true));
  CHECK_THROWS_AS(plrt_composite(s.data, d, Loss::L2, 1e-6, -1), InvalidInput);
  CHECK_THROWS_AS(plrt_composite(s.data, d, Loss::L2, 1e-6, 9), NumericalError);
  const TestReport r = plrt_composite(s.data, d, Loss::L2, 1e-6, 0);
  CHECK(r.name == "PLRT-composite");
  CHECK(r.null_params.at("plrt") <= 1e-15);
}

}  // TEST_SUITE
