#pragma once

// Command-line front end: argument parsing (flags > GFLM_SEED/GFLM_THREADS >
// key=value config file > defaults) and subcommand dispatch.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace gflm {

enum class LambdaPolicy { Fixed, Gcv, Schedule };

struct RunConfig {
  std::string command;

  // inputs
  std::string curves;
  std::string responses;
  std::string x0;
  std::string w;

  // model
  int m = 2;
  std::string loss = "l2";
  bool intercept = false;
  std::string basis = "analytic";  ///< analytic | empirical
  int basis_size = 0;              ///< 0 selects min(n, 50)
  bool no_null_space = false;
  int k = 0;                       ///< empirical ρ_ν = ν^{2k}; 0 selects m+1
  double kernel_scale = 1.0;

  // λ
  LambdaPolicy lambda_policy = LambdaPolicy::Gcv;
  double lambda = 0.0;

  // inference
  double level = 0.95;
  std::optional<double> slope_at;
  bool first_power = false;
  bool drop_constant = false;
  std::optional<double> noise_scale;
  double noise_var = 1.0;
  double c = 0.0;
  std::string calibration;  ///< empty selects the subcommand default
  int mc_reps = 10000;
  int composite = -1;
  std::string variant = "gauss";
  int kn = 0;
  double c0 = 1.0;

  // eigensys
  int N = 10;
  int T = 1000;
  bool null_space = false;
  std::optional<double> constants_h;

  // simulate
  std::string setting = "1";
  int n = 100;
  double B = 0.0;
  double xi = 1.0;
  double tau = 0.05;
  double r2 = 0.0;
  bool alt = false;
  std::string methods = "plrt,at";
  int trials = 2000;

  // common
  std::uint64_t seed = 0;
  unsigned threads = 1;
  std::string out;
  std::string csv;

  std::string help_text;  ///< set when --help was requested

  /// Every resolved setting as (key, value), in a fixed order.
  std::vector<std::pair<std::string, std::string>> canonical() const;
  std::string hash() const;
};

/// Throws UsageError on unknown or conflicting flags and missing inputs.
RunConfig parse_args(int argc, const char* const* argv);

/// Runs a parsed configuration; returns the exit status.
int run(const RunConfig& config, std::ostream& out, std::ostream& err);

/// parse_args + run with exit-status mapping: 0 success, 2 usage, 3 data,
/// 4 numerical.
int main_entry(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace gflm
