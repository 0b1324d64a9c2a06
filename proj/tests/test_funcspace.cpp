#include "gflm/errors.hpp"
#include "gflm/funcspace.hpp"
#include "support.hpp"

#include <algorithm>
#include <numeric>

using namespace gflm;
using gflm::testing::kPi;

namespace {

// Trapezoid rule written out independently of Grid::trapezoid_weights.
double trapezoid_oracle(std::size_t T, double (*f)(double)) {
  const double h = 1.0 / static_cast<double>(T - 1);
  double s = 0.5 * (f(0.0) + f(1.0));
  for (std::size_t i = 1; i + 1 < T; ++i) s += f(static_cast<double>(i) * h);
  return s * h;
}

double sinpi(double t) { return std::sin(kPi * t); }

}  // namespace

TEST_SUITE("funcspace") {

TEST_CASE("grid invariants") {
  const Grid g(1000);
  CHECK(g[0] == 0.0);
  CHECK(g[999] == 1.0);
  CHECK(g.step() == doctest::Approx(1.0 / 999).epsilon(1e-15));
  CHECK_THROWS_AS(Grid(1), InvalidInput);

  const Vec pts = g.points();
  CHECK(Grid::from_points(std::span<const double>(pts.data(), pts.size())) == g);
  std::vector<double> bad{0.0, 0.3, 1.0};
  CHECK_THROWS_AS(Grid::from_points(bad), InvalidInput);
  std::vector<double> shifted{0.1, 0.55, 1.0};
  CHECK_THROWS_AS(Grid::from_points(shifted), InvalidInput);
  CHECK(g.nearest(0.5) == 500);
  CHECK(g.nearest(-3.0) == 0);
}

TEST_CASE("integrate: constants and affine functions are exact") {
  for (std::size_t T : {2u, 3u, 17u, 1000u}) {
    const Grid g(T);
    CHECK(integrate(GridFunction::sample(g, [](double) { return 1.0; })) == 1.0);
    CHECK(integrate(GridFunction::sample(g, [](double t) { return t; })) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(integrate(GridFunction::sample(g, [](double t) { return 3.0 - 2.0 * t; })) ==
          doctest::Approx(2.0).epsilon(1e-12));
  }
  CHECK(std::abs(integrate(GridFunction::sample(Grid(1000), [](double t) { return t; })) - 0.5) < 1e-9);
}

TEST_CASE("integrate: sin(pi t) against a fine-grid oracle") {
  const double got = integrate(GridFunction::sample(Grid(1000), sinpi));
  const double oracle = trapezoid_oracle(1000000, sinpi);
  CHECK(std::abs(got - oracle) < 1e-5);
  CHECK(std::abs(got - 2.0 / kPi) < 1e-5);
}

TEST_CASE("integrate: error is second order in the spacing") {
  auto err = [](std::size_t T) { return std::abs(integrate(GridFunction::sample(Grid(T), sinpi)) - 2.0 / kPi); };
  for (std::size_t T : {51u, 101u, 201u, 401u}) {
    const double ratio = err(T) / err(2 * T - 1);
    CHECK(ratio == doctest::Approx(4.0).epsilon(0.02));
  }
}

TEST_CASE("non-finite values are rejected") {
  Vec v = Vec::Ones(10);
  v[3] = std::nan("");
  CHECK_THROWS_AS(GridFunction(Grid(10), v), InvalidInput);
  v[3] = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(GridFunction(Grid(10), v), InvalidInput);
  CHECK_THROWS_AS(GridFunction(Grid(10), Vec::Ones(9)), InvalidInput);
}

TEST_CASE("penalty_J: affine functions have zero curvature energy") {
  const Grid g(1000);
  const auto f = GridFunction::sample(g, [](double t) { return 1.7 - 4.2 * t; });
  CHECK(std::abs(penalty_J(f, f, 2)) < 1e-8);
  const auto q = GridFunction::sample(g, [](double t) { return t * t; });
  CHECK(std::abs(penalty_J(f, q, 2)) < 1e-8);
  CHECK(penalty_J(q, q, 2) == doctest::Approx(4.0).epsilon(1e-6));
}

TEST_CASE("penalty_J: sin(pi t) matches the symbolic value pi^4/2") {
  const auto f = GridFunction::sample(Grid(1000), sinpi);
  CHECK(gflm::testing::rel_err(penalty_J(f, f, 2), std::pow(kPi, 4) / 2.0) < 1e-3);
  // m = 1 gives pi^2/2 for the same function
  CHECK(gflm::testing::rel_err(penalty_J(f, f, 1), kPi * kPi / 2.0) < 1e-3);
}

TEST_CASE("penalty_J is symmetric") {
  std::mt19937_64 rng(11);
  const Grid g(500);
  for (int rep = 0; rep < 20; ++rep) {
    const auto f = gflm::testing::random_smooth(g, rng);
    const auto h = gflm::testing::random_smooth(g, rng);
    for (int m = 1; m <= 3; ++m) {
      const double a = penalty_J(f, h, m), b = penalty_J(h, f, m);
      CHECK(std::abs(a - b) <= 1e-12 * std::max({std::abs(a), std::abs(b), 1e-300}));
    }
  }
}

TEST_CASE("penalty_J needs enough grid points for the order") {
  const Grid g(6);
  const auto f = GridFunction::sample(g, sinpi);
  CHECK_THROWS_AS(penalty_J(f, f, 2), ResolutionError);
  CHECK_THROWS_AS(penalty_J(f, f, 0), InvalidInput);
  CHECK_NOTHROW(penalty_J(f, f, 1));
}

TEST_CASE("fd_weights reproduce polynomial derivatives") {
  std::vector<double> x{0.0, 0.1, 0.2, 0.3, 0.4};
  const Vec w = fd_weights(0.0, x, 2);
  double d2 = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) d2 += w[static_cast<Eigen::Index>(i)] * x[i] * x[i] * x[i];
  CHECK(std::abs(d2) < 1e-9);  // (t^3)'' at 0
  double d2q = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) d2q += w[static_cast<Eigen::Index>(i)] * x[i] * x[i];
  CHECK(d2q == doctest::Approx(2.0).epsilon(1e-9));
}

TEST_CASE("empirical_cov: worked examples") {
  const Grid g(50);
  {
    const CurveDataset d(g, Mat::Ones(1, 50), Vec::Zero(1));
    CHECK((empirical_cov(d).values().array() == 1.0).all());
  }
  {
    const Vec f = GridFunction::sample(g, sinpi).values();
    Mat X(2, 50);
    X.row(0) = f.transpose();
    X.row(1) = -f.transpose();
    const CurveDataset d(g, X, Vec::Zero(2));
    CHECK((empirical_cov(d).values() - f * f.transpose()).cwiseAbs().maxCoeff() < 1e-14);
  }
  {
    // weights enter linearly
    Mat X = Mat::Ones(2, 50);
    X.row(1) *= 2.0;
    const CurveDataset d(g, X, Vec::Zero(2), Vec((Vec(2) << 3.0, 0.5).finished()));
    CHECK(empirical_cov(d).values()(7, 9) == doctest::Approx((3.0 + 0.5 * 4.0) / 2.0));
  }
  CHECK_THROWS_AS(empirical_cov(CurveDataset(g, Mat(0, 50), Vec(0))), InvalidInput);
}

TEST_CASE("empirical_cov of Brownian curves approaches min(s,t)") {
  const Sample s = gen_setting1(500, 0.0, 1.0, 2024);
  const Mat C = empirical_cov(s.data).values();
  const Vec t = s.data.grid().points();
  double dev = 0.0;
  for (Eigen::Index i = 0; i < t.size(); ++i)
    for (Eigen::Index j = 0; j < t.size(); ++j) dev = std::max(dev, std::abs(C(i, j) - std::min(t[i], t[j])));
  CHECK(dev < 0.15);
}

TEST_CASE("empirical_cov is invariant under row permutations") {
  const Sample s = gen_setting1(40, 1.0, 1.0, 5, 200);
  std::vector<int> perm(40);
  std::iota(perm.begin(), perm.end(), 0);
  std::mt19937_64 rng(3);
  std::shuffle(perm.begin(), perm.end(), rng);
  Mat X(40, 200);
  Vec y(40);
  for (int i = 0; i < 40; ++i) {
    X.row(i) = s.data.curves().row(perm[i]);
    y[i] = s.data.responses()[perm[i]];
  }
  const Mat a = empirical_cov(s.data).values();
  const Mat b = empirical_cov(CurveDataset(s.data.grid(), X, y)).values();
  CHECK(a == b);
}

TEST_CASE("V_form: worked examples") {
  const Grid g(1000);
  const auto one = GridFunction::sample(g, [](double) { return 1.0; });
  CHECK(V_form(CovKernel(g, Mat::Zero(1000, 1000)), one, one) == 0.0);

  const Vec u = GridFunction::sample(g, [](double t) { return std::exp(t); }).values();
  const auto f = GridFunction::sample(g, sinpi);
  const auto h = GridFunction::sample(g, [](double t) { return t * t - 0.3; });
  const CovKernel rank1(g, u * u.transpose());
  const double uf = integrate(GridFunction(g, u.cwiseProduct(f.values())));
  const double uh = integrate(GridFunction(g, u.cwiseProduct(h.values())));
  CHECK(std::abs(V_form(rank1, f, h) - uf * uh) < 1e-8);

  CHECK(std::abs(V_form(brownian_kernel(g), one, one) - 1.0 / 3.0) < 1e-4);
}

TEST_CASE("V_form is nonnegative on PSD kernels") {
  std::mt19937_64 rng(9);
  const Grid g(300);
  const CovKernel bm = brownian_kernel(g);
  const CovKernel emp = empirical_cov(gen_setting1(20, 0.0, 1.0, 4, 300).data);
  for (int rep = 0; rep < 50; ++rep) {
    const auto f = gflm::testing::random_smooth(g, rng, 8);
    CHECK(V_form(bm, f, f) >= -1e-10);
    CHECK(V_form(emp, f, f) >= -1e-10);
  }
}

TEST_CASE("V_form checks grids and kernel symmetry") {
  const Grid g(20), g2(21);
  const auto f = GridFunction::sample(g2, sinpi);
  CHECK_THROWS_AS(V_form(brownian_kernel(g), f, f), GridMismatch);
  Mat asym = Mat::Identity(20, 20);
  asym(0, 1) = 1.0;
  CHECK_THROWS_AS(CovKernel(g, asym), InvalidInput);
}

TEST_CASE("dataset invariants") {
  const Grid g(10);
  CHECK_THROWS_AS(CurveDataset(g, Mat::Ones(3, 10), Vec::Ones(2)), InvalidInput);
  CHECK_THROWS_AS(CurveDataset(g, Mat::Ones(3, 9), Vec::Ones(3)), InvalidInput);
  CHECK_THROWS_AS(CurveDataset(g, Mat::Ones(2, 10), Vec::Ones(2), Vec((Vec(2) << 1.0, 0.0).finished())),
                  InvalidInput);
}

}  // TEST_SUITE
