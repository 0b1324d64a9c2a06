#include "gflm/errors.hpp"
#include "gflm/simharness.hpp"
#include "support.hpp"

#include <boost/math/special_functions/zeta.hpp>

using namespace gflm;
using gflm::testing::kPi;

namespace {

bool same(const Sample& a, const Sample& b) {
  return a.data.curves() == b.data.curves() && a.data.responses() == b.data.responses() && a.beta0 == b.beta0 &&
         a.x0.values() == b.x0.values() && a.y0 == b.y0;
}

double variance(const Vec& v) {
  return (v.array() - v.mean()).square().sum() / static_cast<double>(v.size() - 1);
}

// ∫ X_i β_0 for every curve, by trapezoid.
Vec linear_predictor(const Sample& s) {
  return s.data.curves() * s.data.grid().trapezoid_weights().cwiseProduct(s.beta0);
}

// Scores of each curve on the Brownian Karhunen-Loève basis, by least squares.
Mat kl_scores(const Sample& s) {
  const Vec t = s.data.grid().points();
  Mat basis(t.size(), 100);
  for (int j = 1; j <= 100; ++j) {
    const double f = (j - 0.5) * kPi;
    basis.col(j - 1) = (std::sqrt(2.0) / f) * (f * t.array()).sin().matrix();
  }
  return basis.colPivHouseholderQr().solve(s.data.curves().transpose()).transpose();
}

// Coefficients of β_0 on 1, √2cos(πt), √2cos(2πt), ...
Vec cosine_coefficients(const Sample& s, int J) {
  const Grid& g = s.data.grid();
  const Vec w = g.trapezoid_weights();
  Vec c(J);
  for (int j = 0; j < J; ++j) {
    const Vec phi = j == 0 ? Vec(Vec::Ones(g.size()))
                           : Vec(std::sqrt(2.0) * (j * kPi * g.points().array()).cos().matrix());
    c[j] = w.cwiseProduct(phi).dot(s.beta0);
  }
  return c;
}

SimulationTable table(Setting setting, Eigen::Index n, double B, const std::vector<Method>& methods, int trials,
                      unsigned threads = 1, std::uint64_t seed = 1) {
  SettingSpec s;
  s.setting = setting;
  s.n = n;
  s.B = B;
  s.seed = seed;
  HarnessOptions o;
  o.trials = trials;
  o.threads = threads;
  return run_table(s, methods, o);
}

}  // namespace

TEST_SUITE("simharness") {

TEST_CASE("generators are deterministic in the seed") {
  CHECK(same(gen_setting1(30, 0.5, 1.0, 4), gen_setting1(30, 0.5, 1.0, 4)));
  CHECK(same(gen_setting2(30, 1.0, 0.05, 4), gen_setting2(30, 1.0, 0.05, 4)));
  CHECK(same(gen_setting3(30, Setting::S3_92, 0.5, 4), gen_setting3(30, Setting::S3_92, 0.5, 4)));
  CHECK(same(gen_setting4(30, true, 4), gen_setting4(30, true, 4)));
  CHECK_FALSE(same(gen_setting1(30, 0.5, 1.0, 4), gen_setting1(30, 0.5, 1.0, 5)));

  SettingSpec spec;
  spec.n = 20;
  spec.seed = 9;
  const SettingGenerator g(spec);
  CHECK(same(g.draw(3), g.draw(3)));
  CHECK_FALSE(same(g.draw(3), g.draw(4)));
}

TEST_CASE("Setting 1 with B = 0 is pure noise") {
  // Pooled over 20 datasets of n = 500: one dataset alone has a 6.3% relative
  // standard error on its sample variance.
  double pooled = 0.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Sample s = gen_setting1(500, 0.0, 1.0, 12 + seed);
    CHECK((s.beta0.array() == 0.0).all());
    CHECK(s.mu0 == 0.0);
    pooled += variance(s.data.responses()) / 20.0;
  }
  CHECK(std::abs(pooled - 1.0) < 0.1);
}

TEST_CASE("Setting 1 signal variance against the coefficient oracle") {
  const double B = 1.0, xi = 1.0;
  const Sample s = gen_setting1(10000, B, xi, 13);
  // ⟨β_0, V_j⟩ = B j^{-ξ-1/2} / sqrt(ζ(2ξ+1)), Var of the j-th score term = λ_j
  const double scale2 = B * B / boost::math::zeta(2.0 * xi + 1.0);
  double oracle = 0.0;
  for (int j = 1; j <= 100; ++j) oracle += scale2 * std::pow(j, -2.0 * xi - 1.0) / std::pow((j - 0.5) * kPi, 2.0);
  const double got = variance(linear_predictor(s));
  INFO("empirical " << got << " oracle " << oracle);
  // relative standard error of a sample variance at n = 10^4 is about 1.4%
  CHECK(gflm::testing::rel_err(got, oracle) < 0.05);
  CHECK(setting1_scale(B, xi) == doctest::Approx(std::sqrt(scale2)).epsilon(1e-15));
}

TEST_CASE("Setting 2 bump: symmetry and unit L2 normalization") {
  for (double tau : {0.01, 0.02, 0.05})
    for (double B : {0.5, 2.0}) {
      const Sample s = gen_setting2(10, B, tau, 1);
      const Eigen::Index T = s.beta0.size();
      const double peak = s.beta0.cwiseAbs().maxCoeff();
      for (Eigen::Index i = 0; i < T; ++i) CHECK(std::abs(s.beta0[i] - s.beta0[T - 1 - i]) <= 1e-13 * peak);
      const double l2 = s.data.grid().trapezoid_weights().dot(s.beta0.cwiseAbs2());
      CHECK(l2 == doctest::Approx(B * B).epsilon(1e-8));
    }
}

TEST_CASE("Setting 3 coefficients") {
  int one = 0, two = 0;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    for (const Setting model : {Setting::S3_21, Setting::S3_92}) {
      const double r2 = 0.5;
      const Sample s = gen_setting3(5, model, r2, seed, 200);
      const Vec theta = cosine_coefficients(s, 12) / std::sqrt(r2);
      CHECK(theta.norm() == doctest::Approx(1.0).epsilon(1e-12));
      CHECK(theta.tail(model == Setting::S3_21 ? 10 : 3).cwiseAbs().maxCoeff() < 1e-12);
      const int nonzero = static_cast<int>((theta.array().abs() > 1e-12).count());
      if (model == Setting::S3_21) {
        CHECK(nonzero == 1);
      } else {
        CHECK(nonzero >= 1);
        CHECK(nonzero <= 2);
        (nonzero == 1 ? one : two)++;
      }
    }
  }
  CHECK(one > 0);
  CHECK(two > 0);
  CHECK((gen_setting3(5, Setting::S3_21, 0.0, 1).beta0.array() == 0.0).all());
  CHECK_THROWS_AS(gen_setting3(5, Setting::S1, 0.5, 1), InvalidInput);
}

TEST_CASE("Setting 4: truncated scores and balanced null responses") {
  const Sample s = gen_setting4(4000, false, 21);
  const Mat eta = kl_scores(s);
  CHECK(eta.cwiseAbs().maxCoeff() <= 0.5 + 1e-9);
  // P(|ξ| > 1/2) for a standard normal
  const double clipped = static_cast<double>((eta.array().abs() > 0.5 - 1e-9).count()) / static_cast<double>(eta.size());
  CHECK(clipped == doctest::Approx(std::erfc(0.5 / std::sqrt(2.0))).epsilon(0.01));
  const Vec& y = s.data.responses();
  CHECK((y.array() * (1.0 - y.array()) == 0.0).all());
  CHECK(std::abs(y.mean() - 0.5) <= 3.0 * std::sqrt(0.25 / 4000.0));
  CHECK((s.beta0.array() == 0.0).all());
  const Sample a = gen_setting4(10, true, 21);
  CHECK(a.beta0.maxCoeff() > 1.0);
}

TEST_CASE("Setting 1 sample covariance approaches min(s,t)") {
  // mean max-norm error over 10 datasets per n; a single draw is not monotone
  double prev = std::numeric_limits<double>::infinity();
  for (Eigen::Index n : {100, 500, 2000}) {
    double err = 0.0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      const Sample s = gen_setting1(n, 0.0, 1.0, 31 + seed, 200);
      const Mat C = empirical_cov(s.data).values();
      const Vec t = s.data.grid().points();
      double e = 0.0;
      for (Eigen::Index i = 0; i < t.size(); ++i)
        for (Eigen::Index j = 0; j < t.size(); ++j) e = std::max(e, std::abs(C(i, j) - std::min(t[i], t[j])));
      err += e / 10.0;
    }
    INFO("n = " << n << " mean error " << err);
    CHECK(err < prev);
    prev = err;
  }
}

TEST_CASE("setting menus and names") {
  SettingSpec s;
  s.B = 0.5;
  CHECK(s.on_menu());
  CHECK(s.params() == "B=0.5;xi=1");
  s.n = 250;
  CHECK_FALSE(s.on_menu());
  for (const Setting x : {Setting::S1, Setting::S2, Setting::S3_21, Setting::S3_92, Setting::S4})
    CHECK(parse_setting(to_string(x)) == x);
  CHECK(parse_setting("3-(9,2)") == Setting::S3_92);
  CHECK_THROWS_AS(parse_setting("5"), UsageError);
  for (const Method m : {Method::PLRT, Method::AT, Method::CI, Method::PLRTComposite}) CHECK(parse_method(to_string(m)) == m);
  CHECK_THROWS_AS(parse_method("wald"), UsageError);
}

TEST_CASE("binomial half-width") {
  CHECK(binomial_half_width(0.5, 100) == doctest::Approx(1.96 * 0.05).epsilon(1e-15));
  CHECK(binomial_half_width(0.0, 100) == 0.0);
  const SimulationTable t = table(Setting::S1, 100, 0.5, {Method::PLRT, Method::CT}, 100);
  REQUIRE(t.rows.size() == 2);
  for (const TableRow& r : t.rows) {
    const double p = r.rate / 100.0;
    CHECK(r.half_width == doctest::Approx(100.0 * 1.96 * std::sqrt(p * (1.0 - p) / r.trials)).epsilon(1e-12));
    CHECK(r.rate >= 0.0);
    CHECK(r.rate <= 100.0);
    CHECK(r.trials + r.failures == 100);
  }
  CHECK(t.valid);
  CHECK_THROWS_AS(table(Setting::S1, 100, 0.5, {Method::PLRT}, 99), InvalidInput);
  CHECK_THROWS_AS(table(Setting::S4, 100, 0.0, {Method::PI}, 100), UsageError);
}

TEST_CASE("tables are byte-identical across thread counts") {
  const std::vector<Method> methods{Method::PLRT, Method::AT, Method::CI, Method::CT};
  const std::string one = table_csv(table(Setting::S1, 100, 0.5, methods, 100, 1, 77));
  CHECK(table_csv(table(Setting::S1, 100, 0.5, methods, 100, 4, 77)) == one);
  CHECK(table_csv(table(Setting::S1, 100, 0.5, methods, 100, 8, 77)) == one);
  CHECK(table_csv(table(Setting::S1, 100, 0.5, methods, 100, 1, 78)) != one);
  CHECK(one.rfind("setting,n,params,method,rate,half_width,trials,seed\n", 0) == 0);
}

TEST_CASE("power is monotone in the signal") {
  // Setting 1 (B) and Setting 2 (B), n = 100, 400 trials; tolerance two half-widths
  for (const Setting setting : {Setting::S1, Setting::S2}) {
    const std::vector<double> Bs = setting == Setting::S1 ? std::vector<double>{0.0, 0.1, 0.5, 1.0}
                                                          : std::vector<double>{0.0, 0.5, 1.0, 2.0};
    std::vector<SimulationTable> rows;
    for (double B : Bs) rows.push_back(table(setting, 100, B, {Method::PLRT, Method::AT}, 400, 1, 5));
    for (const char* m : {"plrt", "at"})
      for (std::size_t i = 1; i < rows.size(); ++i) {
        const TableRow& lo = *rows[i - 1].find(m);
        const TableRow& hi = *rows[i].find(m);
        INFO("setting " << to_string(setting) << " " << m << ": " << lo.params << " " << lo.rate << "% vs " << hi.params
                        << " " << hi.rate << "%");
        CHECK(hi.rate >= lo.rate - 2.0 * std::max(lo.half_width, hi.half_width));
      }
  }
}

TEST_CASE("power grows with the sample size") {
  for (double B : {0.1, 0.5}) {
    const SimulationTable a = table(Setting::S1, 100, B, {Method::PLRT, Method::AT}, 200, 1, 6);
    const SimulationTable b = table(Setting::S1, 500, B, {Method::PLRT, Method::AT}, 200, 1, 6);
    for (const char* m : {"plrt", "at"}) {
      const TableRow& lo = *a.find(m);
      const TableRow& hi = *b.find(m);
      INFO("B=" << B << " " << m << ": n=100 " << lo.rate << "%, n=500 " << hi.rate << "%");
      CHECK(hi.rate >= lo.rate - 2.0 * std::max(lo.half_width, hi.half_width));
    }
  }
}

}  // TEST_SUITE
