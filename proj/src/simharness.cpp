#include "gflm/simharness.hpp"

#include "gflm/errors.hpp"
#include "gflm/parallel.hpp"

#include <boost/math/special_functions/zeta.hpp>

#include <cmath>
#include <cstdio>
#include <map>
#include <mutex>
#include <numbers>
#include <optional>
#include <random>
#include <sstream>
#include <tuple>

namespace gflm {

namespace {

constexpr int kTerms = 100;

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

bool in(double v, std::initializer_list<double> menu) {
  for (const double m : menu)
    if (std::abs(v - m) < 1e-12) return true;
  return false;
}

bool is_l2(Setting s) { return s != Setting::S4; }

}  // namespace

std::string_view to_string(Setting s) {
  switch (s) {
    case Setting::S1: return "1";
    case Setting::S2: return "2";
    case Setting::S3_21: return "3-21";
    case Setting::S3_92: return "3-92";
    case Setting::S4: return "4";
  }
  return "";
}

Setting parse_setting(std::string_view name) {
  if (name == "1") return Setting::S1;
  if (name == "2") return Setting::S2;
  if (name == "3-(2,1)" || name == "3-21" || name == "3a") return Setting::S3_21;
  if (name == "3-(9,2)" || name == "3-92" || name == "3b") return Setting::S3_92;
  if (name == "4") return Setting::S4;
  throw UsageError("unknown setting '" + std::string(name) + "' (expected 1, 2, 3-(2,1), 3-(9,2) or 4)");
}

std::string SettingSpec::params() const {
  switch (setting) {
    case Setting::S1: return "B=" + fmt(B) + ";xi=" + fmt(xi);
    case Setting::S2: return "B=" + fmt(B) + ";tau=" + fmt(tau);
    case Setting::S3_21:
    case Setting::S3_92: return "r2=" + fmt(r2);
    case Setting::S4: return alt ? "alt=1" : "alt=0";
  }
  return "";
}

bool SettingSpec::on_menu() const {
  const bool s3 = setting == Setting::S3_21 || setting == Setting::S3_92;
  const bool n_ok = s3 ? in(static_cast<double>(n), {50, 100, 500}) : in(static_cast<double>(n), {100, 500});
  if (!n_ok || T != 1000) return false;
  switch (setting) {
    case Setting::S1: return in(B, {0, 0.1, 0.5, 1}) && in(xi, {0.1, 0.5, 1});
    case Setting::S2: return in(B, {0, 0.5, 1, 2}) && in(tau, {0.01, 0.02, 0.05});
    case Setting::S3_21:
    case Setting::S3_92: return in(r2, {0, 0.1, 0.2, 0.5, 1.5});
    case Setting::S4: return true;
  }
  return false;
}

double setting1_scale(double B, double xi) {
  return B / std::sqrt(boost::math::zeta(2.0 * xi + 1.0));
}

SettingGenerator::SettingGenerator(const SettingSpec& spec) : spec_(spec), grid_(spec.T) {
  if (spec.n < 1) throw InvalidInput("sample size must be >= 1");
  if (spec.B < 0) throw InvalidInput("signal strength B must be >= 0");
  if (spec.setting == Setting::S1 && !(spec.xi > 0)) throw InvalidInput("xi must be positive");
  if (spec.setting == Setting::S2 && !(spec.tau > 0)) throw InvalidInput("tau must be positive");
  if (!(spec.r2 >= 0)) throw InvalidInput("r2 must be >= 0");
  const Vec t = grid_.points();
  const auto T = t.size();
  weights_ = grid_.trapezoid_weights();
  basis_.resize(T, kTerms);
  const bool cosine = spec.setting == Setting::S3_21 || spec.setting == Setting::S3_92;
  for (int j = 1; j <= kTerms; ++j) {
    if (cosine) {
      const double kappa = std::pow(static_cast<double>(j), -1.7);
      for (Eigen::Index i = 0; i < T; ++i)
        basis_(i, j - 1) =
            std::sqrt(kappa) * (j == 1 ? 1.0 : std::numbers::sqrt2 * std::cos((j - 1) * std::numbers::pi * t[i]));
    } else {
      const double freq = (j - 0.5) * std::numbers::pi;
      for (Eigen::Index i = 0; i < T; ++i) basis_(i, j - 1) = std::numbers::sqrt2 * std::sin(freq * t[i]) / freq;
    }
  }
}

Mat SettingGenerator::scores(Eigen::Index rows, Rng& rng) const {
  std::normal_distribution<double> z;
  Mat eta(rows, kTerms);
  const bool truncate = spec_.setting == Setting::S4;
  for (Eigen::Index i = 0; i < rows; ++i)
    for (int j = 0; j < kTerms; ++j) {
      const double v = z(rng);
      eta(i, j) = truncate ? std::clamp(v, -0.5, 0.5) : v;
    }
  return eta;
}

Vec SettingGenerator::slope(Rng& rng) const {
  const Vec t = grid_.points();
  switch (spec_.setting) {
    case Setting::S1: {
      const double scale = setting1_scale(spec_.B, spec_.xi);
      Vec beta = Vec::Zero(t.size());
      if (scale == 0.0) return beta;
      for (int j = 1; j <= kTerms; ++j) {
        const double freq = (j - 0.5) * std::numbers::pi;
        beta += (scale * std::pow(static_cast<double>(j), -spec_.xi - 0.5) * std::numbers::sqrt2) *
                (freq * t.array()).sin().matrix();
      }
      return beta;
    }
    case Setting::S2: {
      const double tau = spec_.tau;
      const double norm = tau * std::sqrt(std::numbers::pi) * std::erf(0.5 / tau);
      return (spec_.B / std::sqrt(norm)) * (-(t.array() - 0.5).square() / (2 * tau * tau)).exp().matrix();
    }
    case Setting::S3_21:
    case Setting::S3_92: {
      const int J = spec_.setting == Setting::S3_21 ? 2 : 9;
      const int draws = spec_.setting == Setting::S3_21 ? 1 : 2;
      std::uniform_real_distribution<double> unif;
      std::uniform_int_distribution<int> pick(0, J - 1);
      Vec theta;
      do {
        Vec b(J), counts = Vec::Zero(J);
        for (int j = 0; j < J; ++j) b[j] = unif(rng);
        for (int d = 0; d < draws; ++d) counts[pick(rng)] += 1.0;
        theta = b.cwiseProduct(counts);
      } while (theta.norm() == 0.0);
      theta /= theta.norm();
      Vec beta = Vec::Zero(t.size());
      for (int j = 1; j <= J; ++j) {
        if (theta[j - 1] == 0.0) continue;
        const Vec phi = j == 1 ? Vec(Vec::Ones(t.size()))
                               : Vec(std::numbers::sqrt2 * ((j - 1) * std::numbers::pi * t.array()).cos().matrix());
        beta += theta[j - 1] * phi;
      }
      return std::sqrt(spec_.r2) * beta;
    }
    case Setting::S4: {
      if (!spec_.alt) return Vec::Zero(t.size());
      return (3e5 * t.array().pow(11) * (1.0 - t.array()).pow(6)).matrix();
    }
  }
  return Vec::Zero(t.size());
}

Sample SettingGenerator::draw(std::uint64_t trial) const {
  Rng rng = make_rng(spec_.seed, streams::trial, trial);
  return draw(rng);
}

Sample SettingGenerator::draw(Rng& rng) const {
  const Vec beta = slope(rng);
  const Mat X = scores(spec_.n, rng) * basis_.transpose();
  const Vec lin = X * weights_.cwiseProduct(beta);
  Vec y(spec_.n);
  std::normal_distribution<double> z;
  std::uniform_real_distribution<double> u;
  const bool l2 = is_l2(spec_.setting);
  for (Eigen::Index i = 0; i < spec_.n; ++i) y[i] = l2 ? lin[i] + z(rng) : (u(rng) < logistic(lin[i]) ? 1.0 : 0.0);
  const Vec x0 = basis_ * scores(1, rng).row(0).transpose();
  const double mu0 = weights_.cwiseProduct(beta).dot(x0);
  const double y0 = l2 ? mu0 + z(rng) : (u(rng) < logistic(mu0) ? 1.0 : 0.0);
  return Sample{CurveDataset(grid_, X, std::move(y)), beta, GridFunction(grid_, x0), mu0, y0};
}

Sample gen_setting1(Eigen::Index n, double B, double xi, std::uint64_t seed, std::size_t T) {
  SettingSpec s;
  s.setting = Setting::S1;
  s.n = n;
  s.B = B;
  s.xi = xi;
  s.seed = seed;
  s.T = T;
  return SettingGenerator(s).draw(0);
}

Sample gen_setting2(Eigen::Index n, double B, double tau, std::uint64_t seed, std::size_t T) {
  SettingSpec s;
  s.setting = Setting::S2;
  s.n = n;
  s.B = B;
  s.tau = tau;
  s.seed = seed;
  s.T = T;
  return SettingGenerator(s).draw(0);
}

Sample gen_setting3(Eigen::Index n, Setting model, double r2, std::uint64_t seed, std::size_t T) {
  if (model != Setting::S3_21 && model != Setting::S3_92) throw InvalidInput("setting 3 model must be (2,1) or (9,2)");
  SettingSpec s;
  s.setting = model;
  s.n = n;
  s.r2 = r2;
  s.seed = seed;
  s.T = T;
  return SettingGenerator(s).draw(0);
}

Sample gen_setting4(Eigen::Index n, bool alt, std::uint64_t seed, std::size_t T) {
  SettingSpec s;
  s.setting = Setting::S4;
  s.n = n;
  s.alt = alt;
  s.seed = seed;
  s.T = T;
  return SettingGenerator(s).draw(0);
}

std::string_view to_string(Method m) {
  switch (m) {
    case Method::PLRT: return "plrt";
    case Method::AT: return "at";
    case Method::ATGumbel: return "at-gumbel";
    case Method::ATSubGauss: return "at-subgauss";
    case Method::CI: return "ci";
    case Method::PI: return "pi";
    case Method::PCI: return "pci";
    case Method::CT: return "ct";
    case Method::PLRTComposite: return "plrt-composite";
  }
  return "";
}

Method parse_method(std::string_view name) {
  for (const Method m : {Method::PLRT, Method::AT, Method::ATGumbel, Method::ATSubGauss, Method::CI, Method::PI,
                         Method::PCI, Method::CT, Method::PLRTComposite})
    if (to_string(m) == name) return m;
  throw UsageError("unknown method '" + std::string(name) + "'");
}

const TableRow* SimulationTable::find(std::string_view method) const {
  for (const auto& r : rows)
    if (r.method == method) return &r;
  return nullptr;
}

double binomial_half_width(double p, int trials) {
  if (trials <= 0) return 0.0;
  return 1.96 * std::sqrt(p * (1.0 - p) / trials);
}

EigenSystemPtr brownian_system(int m, int N, const Grid& grid, bool null_space) {
  using Key = std::tuple<int, int, std::size_t, bool>;
  static std::mutex mu;
  static std::map<Key, EigenSystemPtr> cache;
  const Key key{m, N, grid.size(), null_space};
  std::lock_guard lock(mu);
  if (auto it = cache.find(key); it != cache.end()) return it->second;
  auto es = std::make_shared<const EigenSystem>(solve_bvp_analytic(m, N, grid, {.include_null_space = null_space}));
  cache.emplace(key, es);
  return es;
}

namespace {

struct Outcome {
  std::optional<bool> hit;  ///< rejection, or non-coverage for intervals
  double width = std::numeric_limits<double>::quiet_NaN();
  std::string error;
};

bool is_interval(Method m) { return m == Method::CI || m == Method::PI || m == Method::PCI; }

class Trial {
 public:
  Trial(const SettingSpec& spec, const HarnessOptions& opts, const EigenSystemPtr& analytic, const Sample& s,
        std::uint64_t index)
      : spec_(spec), opts_(opts), analytic_(analytic), s_(s), index_(index) {}

  Outcome run(Method m) {
    Outcome o;
    try {
      o = dispatch(m);
    } catch (const Error& e) {
      o.hit.reset();
      o.error = e.what();
    }
    return o;
  }

 private:
  Loss loss() const { return is_l2(spec_.setting) ? Loss::L2 : Loss::Logistic; }
  double level() const { return 1.0 - opts_.alpha; }

  // S4: C = E{B(X) X X} with B = 1/4 under β = 0; Brownian scores scale C by c.
  EigenSystemPtr analytic_for(EigenSystemPtr base) const {
    if (spec_.setting != Setting::S4) return base;
    const Vec w = s_.data.grid().trapezoid_weights();
    const double c = 2.0 * 0.25 * (s_.data.curves().cwiseAbs2() * w).mean();
    return std::make_shared<const EigenSystem>(rescale_for_kernel(*base, c));
  }

  const Design& design() {
    if (design_) return *design_;
    EigenSystemPtr es;
    if (spec_.setting == Setting::S3_21 || spec_.setting == Setting::S3_92) {
      const int rank = empirical_rank(s_.data);
      es = std::make_shared<const EigenSystem>(empirical_eigensystem(s_.data, rank, opts_.m + 1));
    } else {
      es = analytic_for(analytic_);
    }
    design_ = make_design(s_.data, std::move(es));
    return *design_;
  }

  // A small GCV λ can leave too much of the null-constant sums beyond the
  // default basis; widen the analytic basis at the same λ before giving up.
  template <class F>
  TestReport with_wider_basis(F&& test) {
    try {
      return test(design());
    } catch (const TruncationError&) {
      if (spec_.setting == Setting::S3_21 || spec_.setting == Setting::S3_92) throw;
      int N = opts_.basis_size;
      for (;;) {
        N *= 2;
        if (N > opts_.max_basis_size) throw;
        const Design wide = make_design(s_.data, analytic_for(brownian_system(opts_.m, N, s_.data.grid(), opts_.null_space)));
        try {
          return test(wide);
        } catch (const TruncationError&) {
        }
      }
    }
  }

  const PenalizedFit& fitted() {
    if (!fit_) fit_ = fit_gcv(design(), opts_.lambda_grid, loss(), false);
    return *fit_;
  }

  const Mat& omega() {
    if (!omega_) omega_ = empirical_design(s_.data).omega;
    return *omega_;
  }

  CiOptions ci_options() {
    CiOptions c;
    c.squared_denominator = opts_.ci_squared;
    c.drop_constant = !opts_.ci_constant;
    c.noise_scale = loss() == Loss::L2 ? 1.0 : 1.0 / fitted().mean_B;
    return c;
  }

  Outcome adaptive(AtVariant variant, AtCalibration cal) {
    AdaptiveConfig cfg;
    cfg.variant = variant;
    cfg.calibration = cal;
    cfg.threads = 1;
    if (variant == AtVariant::Gauss) {
      cfg.reps = opts_.at_reps;
      cfg.seed = spec_.seed;  // one shared null sample per table
    } else {
      cfg.reps = opts_.subgauss_reps;
      cfg.seed = derive_seed(spec_.seed, streams::at_null, index_);
    }
    const AdaptiveReport r = adaptive_test(s_.data.responses(), omega(), cfg, opts_.alpha);
    return {r.p_value <= opts_.alpha, std::numeric_limits<double>::quiet_NaN(), {}};
  }

  Outcome dispatch(Method m) {
    switch (m) {
      case Method::PLRT: {
        const double lam = fitted().lambda;
        const TestReport r = with_wider_basis([&](const Design& d) { return plrt(d, loss(), lam); });
        return {r.p_value <= opts_.alpha, std::numeric_limits<double>::quiet_NaN(), {}};
      }
      case Method::PLRTComposite: {
        const double lam = fitted().lambda;
        const TestReport r = with_wider_basis(
            [&](const Design& d) { return plrt_composite(s_.data, d, loss(), lam, opts_.composite_order, {}); });
        return {r.p_value <= opts_.alpha, std::numeric_limits<double>::quiet_NaN(), {}};
      }
      case Method::AT: return adaptive(AtVariant::Gauss, AtCalibration::MonteCarlo);
      case Method::ATGumbel: return adaptive(AtVariant::Gauss, AtCalibration::Gumbel);
      case Method::ATSubGauss: return adaptive(AtVariant::SubGauss, AtCalibration::MonteCarlo);
      case Method::CI: {
        const IntervalReport r = ci_conditional_mean(fitted(), s_.x0, level(), ci_options());
        const double truth = loss() == Loss::L2 ? s_.mu0 : logistic(s_.mu0);
        return {!r.covers(truth), r.width(), {}};
      }
      case Method::PI: {
        const IntervalReport r = prediction_interval(fitted(), s_.x0, level(), 1.0, ci_options());
        return {!r.covers(s_.y0), r.width(), {}};
      }
      case Method::PCI: {
        const PenalizedFit f = fit(design(), loss(), fitted().lambda * opts_.pci_undersmooth, false);
        const IntervalReport r = pointwise_ci_slope(f, opts_.ci_point, level());
        const double truth = s_.beta0[static_cast<Eigen::Index>(s_.data.grid().nearest(opts_.ci_point))];
        return {!r.covers(truth), r.width(), {}};
      }
      case Method::CT: {
        const Grid& g = s_.data.grid();
        const GridFunction w(g, Vec::Ones(static_cast<Eigen::Index>(g.size())));
        const double c = g.trapezoid_weights().dot(s_.beta0);
        const TestReport r = contrast_test(fitted(), w, c);
        return {r.p_value <= opts_.alpha, std::numeric_limits<double>::quiet_NaN(), {}};
      }
    }
    throw UsageError("unsupported method");
  }

  const SettingSpec& spec_;
  const HarnessOptions& opts_;
  const EigenSystemPtr& analytic_;
  const Sample& s_;
  std::uint64_t index_;
  std::optional<Design> design_;
  std::optional<PenalizedFit> fit_;
  std::optional<Mat> omega_;
};

}  // namespace

SimulationTable run_table(const SettingSpec& spec, const std::vector<Method>& methods, const HarnessOptions& opts) {
  if (opts.trials < 100) throw InvalidInput("run_table needs at least 100 trials");
  if (methods.empty()) throw InvalidInput("run_table: no methods requested");
  for (const Method m : methods)
    if (m == Method::PI && !is_l2(spec.setting)) throw UsageError("prediction intervals need an l2 setting");

  const SettingGenerator gen(spec);
  EigenSystemPtr analytic;
  const bool s3 = spec.setting == Setting::S3_21 || spec.setting == Setting::S3_92;
  if (!s3) analytic = brownian_system(opts.m, opts.basis_size, gen.grid(), opts.null_space);

  const auto trials = static_cast<std::size_t>(opts.trials);
  std::vector<std::vector<Outcome>> slots(trials);
  parallel_for(trials, opts.threads, [&](std::size_t t) {
    const Sample s = gen.draw(static_cast<std::uint64_t>(t));
    Trial trial(spec, opts, analytic, s, t);
    std::vector<Outcome> out;
    out.reserve(methods.size());
    for (const Method m : methods) out.push_back(trial.run(m));
    slots[t] = std::move(out);
  });

  SimulationTable table;
  table.seed = spec.seed;
  table.trials = opts.trials;
  for (std::size_t j = 0; j < methods.size(); ++j) {
    TableRow row;
    row.setting = std::string(to_string(spec.setting));
    row.n = spec.n;
    row.params = spec.params();
    row.method = std::string(to_string(methods[j]));
    int hits = 0, ok = 0;
    double width_sum = 0.0;
    for (const auto& slot : slots) {
      const Outcome& o = slot[j];
      if (!o.hit) {
        ++row.failures;
        if (row.errors.size() < 5 && std::find(row.errors.begin(), row.errors.end(), o.error) == row.errors.end())
          row.errors.push_back(o.error);
        continue;
      }
      ++ok;
      hits += *o.hit ? 1 : 0;
      width_sum += o.width;
    }
    const double p = ok > 0 ? static_cast<double>(hits) / ok : 0.0;
    row.trials = ok;
    row.rate = 100.0 * p;
    row.half_width = 100.0 * binomial_half_width(p, ok);
    row.mean_width = is_interval(methods[j]) && ok > 0 ? width_sum / ok : std::numeric_limits<double>::quiet_NaN();
    row.valid = row.failures <= opts.max_failure_rate * opts.trials;
    table.valid = table.valid && row.valid;
    table.rows.push_back(std::move(row));
  }
  return table;
}

std::string table_csv(const SimulationTable& t) {
  std::ostringstream out;
  out << "setting,n,params,method,rate,half_width,trials,seed\n";
  char buf[256];
  for (const auto& r : t.rows) {
    std::snprintf(buf, sizeof buf, "%s,%lld,%s,%s,%.4f,%.4f,%d,%llu\n", r.setting.c_str(),
                  static_cast<long long>(r.n), r.params.c_str(), r.method.c_str(), r.rate, r.half_width, r.trials,
                  static_cast<unsigned long long>(t.seed));
    out << buf;
  }
  return out.str();
}

}  // namespace gflm
