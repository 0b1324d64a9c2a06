#pragma once

// Data generators for the four simulation settings and a trial runner that
// tabulates rejection / non-coverage rates with binomial error bars.

#include "gflm/adaptive.hpp"
#include "gflm/rng.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace gflm {

enum class Setting { S1, S2, S3_21, S3_92, S4 };

std::string_view to_string(Setting s);
Setting parse_setting(std::string_view name);

struct SettingSpec {
  Setting setting = Setting::S1;
  Eigen::Index n = 100;
  double B = 0.0;      ///< settings 1 and 2
  double xi = 1.0;     ///< setting 1
  double tau = 0.05;   ///< setting 2
  double r2 = 0.0;     ///< setting 3
  bool alt = false;    ///< setting 4
  std::size_t T = 1000;
  std::uint64_t seed = 0;

  /// Compact description of the signal parameters, e.g. "B=1;xi=1".
  std::string params() const;
  /// True when every parameter is on the published menus.
  bool on_menu() const;
};

/// One simulated dataset with its true slope and an independent test point.
struct Sample {
  CurveDataset data;
  Vec beta0;        ///< on the grid
  GridFunction x0;  ///< fresh curve from the same law
  double mu0;       ///< ∫ x0 β0 (linear predictor at x0)
  double y0;        ///< a response drawn at x0
};

class SettingGenerator {
 public:
  explicit SettingGenerator(const SettingSpec& spec);

  const SettingSpec& spec() const noexcept { return spec_; }
  const Grid& grid() const noexcept { return grid_; }

  /// Draw number `trial` from the stream derived from spec().seed.
  Sample draw(std::uint64_t trial) const;
  Sample draw(Rng& rng) const;

 private:
  Mat scores(Eigen::Index rows, Rng& rng) const;
  Vec slope(Rng& rng) const;

  SettingSpec spec_;
  Grid grid_;
  Mat basis_;  ///< T×100, column j is sqrt(eigenvalue_j)·eigenfunction_j
  Vec weights_;
};

Sample gen_setting1(Eigen::Index n, double B, double xi, std::uint64_t seed, std::size_t T = 1000);
Sample gen_setting2(Eigen::Index n, double B, double tau, std::uint64_t seed, std::size_t T = 1000);
Sample gen_setting3(Eigen::Index n, Setting model, double r2, std::uint64_t seed, std::size_t T = 1000);
Sample gen_setting4(Eigen::Index n, bool alt, std::uint64_t seed, std::size_t T = 1000);

/// B/sqrt(ζ(2ξ+1)), the setting-1 slope normalization.
double setting1_scale(double B, double xi);

enum class Method { PLRT, AT, ATGumbel, ATSubGauss, CI, PI, PCI, CT, PLRTComposite };

std::string_view to_string(Method m);
Method parse_method(std::string_view name);

struct HarnessOptions {
  int trials = 2000;
  unsigned threads = 1;
  double alpha = 0.05;  ///< test level; intervals use 1 − alpha
  int m = 2;
  int basis_size = 50;  ///< positive-root eigenfunctions in the analytic system
  int max_basis_size = 200;  ///< PLRT doubles the basis up to this size on truncation errors
  bool null_space = true;    ///< include the ρ = 0 block in the analytic system
  int at_reps = 10000;
  int subgauss_reps = 1000;
  int composite_order = 1;
  double pci_undersmooth = 0.1;  ///< λ factor applied to the GCV choice for slope intervals
  double ci_point = 0.5;         ///< z for the pointwise slope interval
  /// σ_n² for conditional-mean intervals: Σ x_ν²/(1+λρ_ν) over the full basis
  /// (null block included), no separate noise constant since the fit has no intercept.
  bool ci_squared = false;
  bool ci_constant = false;
  Vec lambda_grid = default_lambda_grid();
  double max_failure_rate = 0.01;
};

struct TableRow {
  std::string setting;
  Eigen::Index n = 0;
  std::string params;
  std::string method;
  double rate = 0.0;        ///< percent
  double half_width = 0.0;  ///< percent, 1.96·sqrt(p(1−p)/trials)
  int trials = 0;           ///< successful trials
  int failures = 0;
  double mean_width = 0.0;  ///< intervals only; NaN otherwise
  bool valid = true;
  std::vector<std::string> errors;  ///< distinct failure messages (first few)
};

struct SimulationTable {
  std::vector<TableRow> rows;
  std::uint64_t seed = 0;
  int trials = 0;
  bool valid = true;

  const TableRow* find(std::string_view method) const;
};

double binomial_half_width(double p, int trials);

SimulationTable run_table(const SettingSpec& spec, const std::vector<Method>& methods, const HarnessOptions& opts);

/// Analytic Brownian-kernel system, optionally with the zero-penalty block; cached.
EigenSystemPtr brownian_system(int m, int N, const Grid& grid, bool null_space = true);

std::string table_csv(const SimulationTable& t);

}  // namespace gflm
