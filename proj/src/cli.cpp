#include "gflm/cli.hpp"

#include "gflm/errors.hpp"
#include "gflm/io.hpp"
#include "gflm/report.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

namespace gflm {

namespace {

const std::vector<std::string> kCommands{"eigensys", "fit",  "ci",       "predict-interval",
                                         "contrast", "plrt", "adaptive", "simulate"};

bool has_lambda(const std::string& cmd) {
  return cmd == "fit" || cmd == "ci" || cmd == "predict-interval" || cmd == "contrast" || cmd == "plrt";
}

std::string fmt(double v) { return format_double(v); }

const CLI::Validator open_unit(
    [](std::string& v) {
      double x = 0.0;
      try {
        x = std::stod(v);
      } catch (const std::exception&) {
        return std::string("not a number");
      }
      return x > 0.0 && x < 1.0 ? std::string() : "must lie strictly between 0 and 1";
    },
    "in (0,1)");

// Options that are only known to be present after parsing.
struct Raw {
  double lambda = 0.0;
  bool gcv = false;
  double slope_at = 0.0;
  double noise_scale = 0.0;
  double constants_h = 0.0;
  std::string config;
  std::map<std::string, CLI::Option*> opts;
};

void add_common(CLI::App* sub, RunConfig& cfg, Raw& raw) {
  sub->add_option("--config", raw.config, "key=value file merged under the command-line flags");
  sub->add_option("--seed", cfg.seed, "master seed")->envname("GFLM_SEED");
  sub->add_option("--threads", cfg.threads, "worker threads")->envname("GFLM_THREADS")->check(CLI::PositiveNumber);
  sub->add_option("--out", cfg.out, "report path (default: standard output)");
}

void add_data(CLI::App* sub, RunConfig& cfg) {
  sub->add_option("--curves", cfg.curves, "CSV of curves, one per row")->required();
  sub->add_option("--responses", cfg.responses, "responses, one per row")->required();
}

void add_model(CLI::App* sub, RunConfig& cfg) {
  sub->add_option("--m", cfg.m, "penalty order")->check(CLI::Range(1, 6));
  sub->add_option("--loss", cfg.loss, "l2 or logistic")->check(CLI::IsMember({"l2", "logistic"}));
  sub->add_flag("--intercept", cfg.intercept, "estimate an unpenalized intercept");
  sub->add_option("--basis", cfg.basis, "analytic (Brownian kernel) or empirical")
      ->check(CLI::IsMember({"analytic", "empirical"}));
  sub->add_option("--basis-size", cfg.basis_size, "basis functions (0: min(n, 50) or the data rank)")
      ->check(CLI::NonNegativeNumber);
  sub->add_flag("--no-null-space", cfg.no_null_space, "omit the zero-penalty block of the analytic basis");
  sub->add_option("--k", cfg.k, "empirical eigenvalue exponent, rho = nu^(2k) (0: m+1)")->check(CLI::NonNegativeNumber);
  sub->add_option("--kernel-scale", cfg.kernel_scale, "rescale the analytic basis for kernel c*min(s,t)")
      ->check(CLI::PositiveNumber);
}

void add_lambda(CLI::App* sub, Raw& raw) {
  auto* lam = sub->add_option("--lambda", raw.lambda, "fixed smoothing parameter")->check(CLI::PositiveNumber);
  auto* gcv = sub->add_flag("--gcv", raw.gcv, "choose lambda by generalized cross validation (default)");
  lam->excludes(gcv);
  raw.opts["lambda"] = lam;
}

void add_level(CLI::App* sub, RunConfig& cfg) {
  sub->add_option("--level", cfg.level, "confidence level")->check(open_unit);
}

struct Parser {
  CLI::App app{"Penalized functional regression: fitting, intervals and tests", "gflm"};
  std::map<std::string, CLI::App*> subs;
  std::map<std::string, Raw> raws;

  explicit Parser(RunConfig& cfg) {
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all", "all subcommands");
    for (const auto& name : kCommands) raws[name];

    auto* es = sub("eigensys", "Eigenvalues and eigenfunctions of the Brownian-kernel or empirical basis", cfg);
    es->add_option("--m", cfg.m, "penalty order")->check(CLI::Range(1, 6));
    es->add_option("--N", cfg.N, "number of positive eigenvalues")->check(CLI::PositiveNumber);
    es->add_option("--T", cfg.T, "grid points")->check(CLI::Range(3, 1000000));
    es->add_flag("--null-space", cfg.null_space, "prepend the zero-penalty block");
    es->add_option("--curves", cfg.curves, "curves CSV: use the empirical route");
    es->add_option("--k", cfg.k, "empirical eigenvalue exponent (0: m+1)")->check(CLI::NonNegativeNumber);
    raws["eigensys"].opts["constants"] =
        es->add_option("--constants", raws["eigensys"].constants_h, "also report the PLRT null constants at this h")
            ->check(CLI::PositiveNumber);
    es->add_option("--csv", cfg.csv, "eigenfunction table (t, phi_1..phi_N)");

    auto* fit = sub("fit", "Penalized fit", cfg);
    add_data(fit, cfg);
    add_model(fit, cfg);
    add_lambda(fit, raws["fit"]);
    fit->add_option("--csv", cfg.csv, "fitted slope on the grid (t, beta)");

    auto* ci = sub("ci", "Confidence interval for the conditional mean or the slope at a point", cfg);
    add_data(ci, cfg);
    add_model(ci, cfg);
    add_lambda(ci, raws["ci"]);
    add_level(ci, cfg);
    auto* x0 = ci->add_option("--x0", cfg.x0, "new curve (one row)");
    auto* sa = ci->add_option("--slope-at", raws["ci"].slope_at, "pointwise interval for beta(z)")
                   ->check(CLI::Range(0.0, 1.0));
    x0->excludes(sa);
    raws["ci"].opts["slope-at"] = sa;
    ci->add_flag("--first-power", cfg.first_power, "sigma_n^2 with (1+lambda rho) instead of its square");
    ci->add_flag("--drop-constant", cfg.drop_constant, "omit the constant term of sigma_n^2");
    raws["ci"].opts["noise-scale"] =
        ci->add_option("--noise-scale", raws["ci"].noise_scale, "constant term of sigma_n^2")
            ->check(CLI::NonNegativeNumber);

    auto* pi = sub("predict-interval", "Prediction interval for a new response (l2 loss)", cfg);
    add_data(pi, cfg);
    add_model(pi, cfg);
    add_lambda(pi, raws["predict-interval"]);
    add_level(pi, cfg);
    pi->add_option("--x0", cfg.x0, "new curve (one row)")->required();
    pi->add_option("--noise-var", cfg.noise_var, "error variance")->check(CLI::PositiveNumber);
    pi->add_flag("--first-power", cfg.first_power, "sigma_n^2 with (1+lambda rho) instead of its square");
    pi->add_flag("--drop-constant", cfg.drop_constant, "omit the constant term of sigma_n^2");

    auto* ct = sub("contrast", "Test of the functional contrast integral(w beta) = c", cfg);
    add_data(ct, cfg);
    add_model(ct, cfg);
    add_lambda(ct, raws["contrast"]);
    ct->add_option("--w", cfg.w, "contrast weight curve (one row)")->required();
    ct->add_option("--c", cfg.c, "hypothesized value");

    auto* pl = sub("plrt", "Penalized likelihood ratio test of beta = 0 or of a polynomial null", cfg);
    add_data(pl, cfg);
    add_model(pl, cfg);
    add_lambda(pl, raws["plrt"]);
    pl->add_option("--calibration", cfg.calibration, "asymptotic or mc")->check(CLI::IsMember({"asymptotic", "mc"}));
    pl->add_option("--mc-reps", cfg.mc_reps, "Monte Carlo replicates")->check(CLI::PositiveNumber);
    pl->add_option("--composite", cfg.composite, "null: beta is a polynomial of this degree")
        ->check(CLI::Range(0, 8));

    auto* ad = sub("adaptive", "Adaptive test over smoothness levels on the empirical eigen-design", cfg);
    add_data(ad, cfg);
    ad->add_option("--variant", cfg.variant, "gauss or subgauss")->check(CLI::IsMember({"gauss", "subgauss"}));
    ad->add_option("--kn", cfg.kn, "number of smoothness levels (0: default)")->check(CLI::NonNegativeNumber);
    ad->add_option("--c0", cfg.c0, "schedule constant")->check(CLI::PositiveNumber);
    ad->add_option("--calibration", cfg.calibration, "gumbel or mc")->check(CLI::IsMember({"gumbel", "mc"}));
    ad->add_option("--mc-reps", cfg.mc_reps, "Monte Carlo replicates")->check(CLI::PositiveNumber);

    auto* sim = sub("simulate", "Size, power and coverage tables for the simulation settings", cfg);
    sim->add_option("--setting", cfg.setting, "1, 2, 3-21, 3-92 or 4")->required();
    sim->add_option("--n", cfg.n, "sample size")->check(CLI::PositiveNumber);
    sim->add_option("--B", cfg.B, "signal strength (settings 1, 2)")->check(CLI::NonNegativeNumber);
    sim->add_option("--xi", cfg.xi, "slope smoothness (setting 1)")->check(CLI::PositiveNumber);
    sim->add_option("--tau", cfg.tau, "bump width (setting 2)")->check(CLI::PositiveNumber);
    sim->add_option("--r2", cfg.r2, "signal level (setting 3)")->check(CLI::NonNegativeNumber);
    sim->add_flag("--alt", cfg.alt, "alternative slope (setting 4)");
    sim->add_option("--methods", cfg.methods, "comma-separated: plrt, at, at-gumbel, at-subgauss, ci, pi, pci, ct, "
                                              "plrt-composite");
    sim->add_option("--trials", cfg.trials, "trials")->check(CLI::PositiveNumber);
    sim->add_option("--basis-size", cfg.basis_size, "analytic basis size (0: 50)")->check(CLI::NonNegativeNumber);
    add_level(sim, cfg);
  }

  CLI::App* sub(const std::string& name, const std::string& desc, RunConfig& cfg) {
    auto* s = app.add_subcommand(name, desc);
    add_common(s, cfg, raws[name]);
    subs[name] = s;
    return s;
  }
};

std::vector<std::pair<std::string, std::string>> read_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open config file '" + path + "'");
  std::vector<std::pair<std::string, std::string>> kv;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const auto b = line.find_first_not_of(" \t\r");
    if (b == std::string::npos) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw UsageError(path + ":" + std::to_string(lineno) + ": expected key=value");
    auto strip = [](std::string s) {
      const auto s0 = s.find_first_not_of(" \t\r");
      if (s0 == std::string::npos) return std::string();
      return s.substr(s0, s.find_last_not_of(" \t\r") - s0 + 1);
    };
    std::string key = strip(line.substr(0, eq));
    while (!key.empty() && key.front() == '-') key.erase(0, 1);
    kv.emplace_back(key, strip(line.substr(eq + 1)));
  }
  return kv;
}

bool truthy(const std::string& v, const std::string& key) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw UsageError("config key '" + key + "' is a flag; expected true or false, got '" + v + "'");
}

bool on_command_line(const std::vector<std::string>& args, const std::string& name) {
  const std::string flag = "--" + name;
  return std::any_of(args.begin(), args.end(),
                     [&](const std::string& a) { return a == flag || a.rfind(flag + "=", 0) == 0; });
}

// Appends config entries that the command line does not already set.
void merge_config(std::vector<std::string>& args, CLI::App* sub, const std::string& path) {
  for (const auto& [key, value] : read_config(path)) {
    if (key == "config") throw UsageError("config files cannot include other config files");
    auto* opt = sub->get_option_no_throw("--" + key);
    if (!opt) throw UsageError("config file '" + path + "': unknown key '" + key + "'");
    if (on_command_line(args, key)) continue;
    if ((key == "lambda" && on_command_line(args, "gcv")) || (key == "gcv" && on_command_line(args, "lambda")))
      continue;
    if ((key == "x0" && on_command_line(args, "slope-at")) || (key == "slope-at" && on_command_line(args, "x0")))
      continue;
    if (key == "seed" && std::getenv("GFLM_SEED")) continue;
    if (key == "threads" && std::getenv("GFLM_THREADS")) continue;
    if (opt->get_expected_min() == 0) {
      if (truthy(value, key)) args.push_back("--" + key);
    } else {
      args.push_back("--" + key);
      args.push_back(value);
    }
  }
}

std::string config_path(const std::vector<std::string>& args) {
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config") {
      if (i + 1 >= args.size()) throw UsageError("--config needs a file name");
      return args[i + 1];
    }
    if (args[i].rfind("--config=", 0) == 0) return args[i].substr(9);
  }
  return {};
}

}  // namespace

std::vector<std::pair<std::string, std::string>> RunConfig::canonical() const {
  std::vector<std::pair<std::string, std::string>> kv{
      {"command", command},
      {"curves", curves},
      {"responses", responses},
      {"x0", x0},
      {"w", w},
      {"m", std::to_string(m)},
      {"loss", loss},
      {"intercept", intercept ? "true" : "false"},
      {"basis", basis},
      {"basis_size", std::to_string(basis_size)},
      {"null_space_omitted", no_null_space ? "true" : "false"},
      {"k", std::to_string(k)},
      {"kernel_scale", fmt(kernel_scale)},
      {"lambda_policy", lambda_policy == LambdaPolicy::Fixed ? "fixed"
                        : lambda_policy == LambdaPolicy::Gcv ? "gcv"
                                                             : "schedule"},
      {"lambda", fmt(lambda)},
      {"level", fmt(level)},
      {"slope_at", slope_at ? fmt(*slope_at) : ""},
      {"first_power", first_power ? "true" : "false"},
      {"drop_constant", drop_constant ? "true" : "false"},
      {"noise_scale", noise_scale ? fmt(*noise_scale) : ""},
      {"noise_var", fmt(noise_var)},
      {"c", fmt(c)},
      {"calibration", calibration},
      {"mc_reps", std::to_string(mc_reps)},
      {"composite", std::to_string(composite)},
      {"variant", variant},
      {"kn", std::to_string(kn)},
      {"c0", fmt(c0)},
      {"N", std::to_string(N)},
      {"T", std::to_string(T)},
      {"null_space", null_space ? "true" : "false"},
      {"constants_h", constants_h ? fmt(*constants_h) : ""},
      {"setting", setting},
      {"n", std::to_string(n)},
      {"B", fmt(B)},
      {"xi", fmt(xi)},
      {"tau", fmt(tau)},
      {"r2", fmt(r2)},
      {"alt", alt ? "true" : "false"},
      {"methods", methods},
      {"trials", std::to_string(trials)},
      {"seed", std::to_string(seed)},
  };
  return kv;
}

std::string RunConfig::hash() const {
  std::string text;
  for (const auto& [k, v] : canonical()) text += k + "=" + v + "\n";
  return hex64(fnv1a(text));
}

RunConfig parse_args(int argc, const char* const* argv) {
  RunConfig cfg;
  Parser p(cfg);
  std::vector<std::string> args(argv + 1, argv + argc);

  std::string command;
  for (const auto& a : args)
    if (!a.empty() && a.front() != '-') {
      command = a;
      break;
    }
  if (const std::string path = config_path(args); !path.empty()) {
    if (!p.subs.contains(command)) throw UsageError("--config needs a subcommand");
    merge_config(args, p.subs[command], path);
  }

  std::reverse(args.begin(), args.end());
  try {
    p.app.parse(args);
  } catch (const CLI::CallForHelp&) {
    cfg.command = "help";
    cfg.help_text = p.app.help();
    return cfg;
  } catch (const CLI::CallForAllHelp&) {
    cfg.command = "help";
    cfg.help_text = p.app.help("", CLI::AppFormatMode::All);
    return cfg;
  } catch (const CLI::ParseError& e) {
    std::string msg = e.what();
    if (!command.empty() && p.subs.contains(command) && p.subs[command]->get_help_ptr() &&
        p.subs[command]->get_help_ptr()->count() > 0) {
      cfg.command = "help";
      cfg.help_text = p.subs[command]->help();
      return cfg;
    }
    throw UsageError(msg.empty() ? "invalid arguments" : msg);
  }

  for (const auto& [name, s] : p.subs)
    if (s->parsed()) cfg.command = name;
  const Raw& raw = p.raws[cfg.command];

  if (has_lambda(cfg.command)) {
    const auto it = raw.opts.find("lambda");
    if (it != raw.opts.end() && it->second->count() > 0) {
      cfg.lambda_policy = LambdaPolicy::Fixed;
      cfg.lambda = raw.lambda;
    } else {
      cfg.lambda_policy = LambdaPolicy::Gcv;
    }
  } else if (cfg.command == "adaptive") {
    cfg.lambda_policy = LambdaPolicy::Schedule;
  }
  if (auto it = raw.opts.find("slope-at"); it != raw.opts.end() && it->second->count() > 0) cfg.slope_at = raw.slope_at;
  if (auto it = raw.opts.find("noise-scale"); it != raw.opts.end() && it->second->count() > 0)
    cfg.noise_scale = raw.noise_scale;
  if (auto it = raw.opts.find("constants"); it != raw.opts.end() && it->second->count() > 0)
    cfg.constants_h = raw.constants_h;

  if (cfg.command == "ci" && cfg.x0.empty() && !cfg.slope_at)
    throw UsageError("ci needs --x0 (conditional mean) or --slope-at (slope at a point)");
  if (cfg.command == "predict-interval" && cfg.loss != "l2")
    throw UsageError("predict-interval is defined for the l2 loss only");
  if (cfg.calibration.empty()) cfg.calibration = cfg.command == "adaptive" ? "mc" : "asymptotic";
  return cfg;
}

namespace {

Json provenance(const RunConfig& cfg) {
  Json p;
  p["version"] = version();
  p["seed"] = cfg.seed;
  p["config_hash"] = cfg.hash();
  return p;
}

void emit(const RunConfig& cfg, Json report, std::ostream& out) {
  report["provenance"] = provenance(cfg);
  const std::string text = report.dump(2) + "\n";
  if (cfg.out.empty()) {
    out << text;
  } else {
    write_text_file(cfg.out, text);
  }
}

Json basis_json(const EigenSystem& es) {
  Json b;
  b["kind"] = es.provenance == Provenance::Analytic ? "analytic" : "empirical";
  b["N"] = es.size();
  b["null_dim"] = es.null_dim;
  b["k"] = es.k;
  b["kernel_scale"] = es.kernel_scale;
  return b;
}

EigenSystemPtr make_basis(const RunConfig& cfg, const CurveDataset& data) {
  if (cfg.basis == "empirical") {
    const int rank = empirical_rank(data);
    const int N = cfg.basis_size > 0 ? std::min(cfg.basis_size, rank) : rank;
    return std::make_shared<const EigenSystem>(empirical_eigensystem(data, N, cfg.k > 0 ? cfg.k : cfg.m + 1));
  }
  const int N = cfg.basis_size > 0 ? cfg.basis_size : static_cast<int>(std::min<Eigen::Index>(data.n(), 50));
  EigenSystem es = solve_bvp_analytic(cfg.m, N, data.grid(), {.include_null_space = !cfg.no_null_space});
  if (cfg.kernel_scale != 1.0) es = rescale_for_kernel(es, cfg.kernel_scale);
  return std::make_shared<const EigenSystem>(std::move(es));
}

struct Fitted {
  CurveDataset data;
  Design design;
  PenalizedFit fit;
  std::optional<GcvTrace> trace;
};

Fitted fit_from(const RunConfig& cfg) {
  CurveDataset data = read_dataset(cfg.curves, cfg.responses);
  Design d = make_design(data, make_basis(cfg, data));
  const Loss loss = parse_loss(cfg.loss);
  if (cfg.lambda_policy == LambdaPolicy::Fixed) {
    PenalizedFit f = fit(d, loss, cfg.lambda, cfg.intercept);
    return {std::move(data), std::move(d), std::move(f), std::nullopt};
  }
  GcvTrace tr;
  PenalizedFit f = fit_gcv(d, default_lambda_grid(), loss, cfg.intercept, &tr);
  return {std::move(data), std::move(d), std::move(f), std::move(tr)};
}

Json fit_summary(const Fitted& f) {
  Json j;
  j["loss"] = std::string(to_string(f.fit.loss));
  j["lambda"] = f.fit.lambda;
  j["h"] = f.fit.h;
  j["intercept"] = f.fit.with_intercept;
  j["alpha"] = f.fit.alpha;
  j["basis"] = basis_json(*f.fit.es);
  return j;
}

CiOptions ci_options(const RunConfig& cfg) {
  CiOptions o;
  o.squared_denominator = !cfg.first_power;
  o.drop_constant = cfg.drop_constant;
  o.noise_scale = cfg.noise_scale;
  return o;
}

Calibration calibration(const RunConfig& cfg) {
  Calibration c;
  c.mode = cfg.calibration == "mc" ? CalibrationMode::MonteCarlo : CalibrationMode::Asymptotic;
  c.reps = cfg.mc_reps;
  c.seed = derive_seed(cfg.seed, streams::plrt_null, 0);
  c.threads = cfg.threads;
  return c;
}

void run_eigensys(const RunConfig& cfg, std::ostream& out) {
  EigenSystem es;
  if (!cfg.curves.empty()) {
    CurveMatrix c = read_curves(cfg.curves);
    const CurveDataset data(c.grid, std::move(c.curves), Vec::Zero(c.curves.rows()));
    const int rank = empirical_rank(data);
    es = empirical_eigensystem(data, std::min(cfg.N, rank), cfg.k > 0 ? cfg.k : cfg.m + 1);
  } else {
    es = solve_bvp_analytic(cfg.m, cfg.N, Grid(static_cast<std::size_t>(cfg.T)),
                            {.include_null_space = cfg.null_space});
  }
  if (!cfg.csv.empty()) {
    Mat table(es.phi.rows(), es.phi.cols() + 1);
    table.col(0) = es.grid.points();
    table.rightCols(es.phi.cols()) = es.phi;
    std::vector<std::string> header{"t"};
    for (Eigen::Index v = 0; v < es.size(); ++v) header.push_back("phi" + std::to_string(v + 1));
    write_csv_file(cfg.csv, table, header);
  }
  Json j;
  j["command"] = "eigensys";
  j["m"] = es.m;
  j["basis"] = basis_json(es);
  j["rho"] = to_json(es.rho);
  if (es.provenance == Provenance::Empirical) j["zeta"] = to_json(es.zeta);
  if (cfg.constants_h) j["constants"] = to_json(constants_report(cfg.m, *cfg.constants_h));
  emit(cfg, std::move(j), out);
}

void run_fit(const RunConfig& cfg, std::ostream& out) {
  const Fitted f = fit_from(cfg);
  if (!cfg.csv.empty()) {
    Mat table(static_cast<Eigen::Index>(f.data.grid().size()), 2);
    table.col(0) = f.data.grid().points();
    table.col(1) = f.fit.beta();
    write_csv_file(cfg.csv, table, {"t", "beta"});
  }
  Json j;
  j["command"] = "fit";
  j["alpha"] = f.fit.alpha;
  j["lambda"] = f.fit.lambda;
  j["h"] = f.fit.h;
  j["loss"] = std::string(to_string(f.fit.loss));
  j["intercept"] = f.fit.with_intercept;
  j["iterations"] = f.fit.iterations;
  j["coefficients"] = to_json(f.fit.b);
  j["gcv_trace"] = f.trace ? to_json(*f.trace) : Json(nullptr);
  j["basis"] = basis_json(*f.fit.es);
  emit(cfg, std::move(j), out);
}

void run_ci(const RunConfig& cfg, std::ostream& out) {
  const Fitted f = fit_from(cfg);
  IntervalReport r;
  if (cfg.slope_at) {
    r = pointwise_ci_slope(f.fit, *cfg.slope_at, cfg.level);
  } else {
    const GridFunction x0 = read_curve(cfg.x0);
    if (!(x0.grid() == f.data.grid())) throw GridMismatch("x0 is not on the grid of the curves");
    r = ci_conditional_mean(f.fit, x0, cfg.level, ci_options(cfg));
  }
  Json j = to_json(r);
  j["command"] = "ci";
  j["fit"] = fit_summary(f);
  emit(cfg, std::move(j), out);
}

void run_predict(const RunConfig& cfg, std::ostream& out) {
  const Fitted f = fit_from(cfg);
  const GridFunction x0 = read_curve(cfg.x0);
  if (!(x0.grid() == f.data.grid())) throw GridMismatch("x0 is not on the grid of the curves");
  Json j = to_json(prediction_interval(f.fit, x0, cfg.level, cfg.noise_var, ci_options(cfg)));
  j["command"] = "predict-interval";
  j["fit"] = fit_summary(f);
  emit(cfg, std::move(j), out);
}

void run_contrast(const RunConfig& cfg, std::ostream& out) {
  const Fitted f = fit_from(cfg);
  const GridFunction w = read_curve(cfg.w);
  if (!(w.grid() == f.data.grid())) throw GridMismatch("w is not on the grid of the curves");
  Json j = to_json(contrast_test(f.fit, w, cfg.c));
  j["command"] = "contrast";
  j["fit"] = fit_summary(f);
  emit(cfg, std::move(j), out);
}

void run_plrt(const RunConfig& cfg, std::ostream& out) {
  const Fitted f = fit_from(cfg);
  PlrtOptions po;
  po.with_intercept = cfg.intercept;
  po.calibration = calibration(cfg);
  const Loss loss = parse_loss(cfg.loss);
  const TestReport r = cfg.composite >= 0
                           ? plrt_composite(f.data, f.design, loss, f.fit.lambda, cfg.composite, po)
                           : plrt(f.design, loss, f.fit.lambda, {}, po);
  Json j = to_json(r);
  j["command"] = "plrt";
  j["fit"] = fit_summary(f);
  emit(cfg, std::move(j), out);
}

void run_adaptive(const RunConfig& cfg, std::ostream& out) {
  const CurveDataset data = read_dataset(cfg.curves, cfg.responses);
  AdaptiveConfig ac;
  ac.k_n = cfg.kn;
  ac.c0 = cfg.c0;
  ac.variant = cfg.variant == "subgauss" ? AtVariant::SubGauss : AtVariant::Gauss;
  ac.calibration = cfg.calibration == "gumbel" ? AtCalibration::Gumbel : AtCalibration::MonteCarlo;
  ac.reps = cfg.mc_reps;
  ac.seed = derive_seed(cfg.seed, streams::at_null, 0);
  ac.threads = cfg.threads;
  Json j = to_json(adaptive_test(data, ac));
  j["command"] = "adaptive";
  emit(cfg, std::move(j), out);
}

void run_simulate(const RunConfig& cfg, std::ostream& out) {
  SettingSpec spec;
  spec.setting = parse_setting(cfg.setting);
  spec.n = cfg.n;
  spec.B = cfg.B;
  spec.xi = cfg.xi;
  spec.tau = cfg.tau;
  spec.r2 = cfg.r2;
  spec.alt = cfg.alt;
  spec.seed = cfg.seed;
  std::vector<Method> methods;
  std::stringstream ss(cfg.methods);
  for (std::string item; std::getline(ss, item, ',');)
    if (!item.empty()) methods.push_back(parse_method(item));
  HarnessOptions ho;
  ho.trials = cfg.trials;
  ho.threads = cfg.threads;
  ho.alpha = 1.0 - cfg.level;
  if (cfg.basis_size > 0) ho.basis_size = cfg.basis_size;
  const SimulationTable t = run_table(spec, methods, ho);

  const bool json = cfg.out.size() >= 5 && cfg.out.compare(cfg.out.size() - 5, 5, ".json") == 0;
  if (json) {
    Json j;
    j["command"] = "simulate";
    j["spec"] = {{"setting", std::string(to_string(spec.setting))},
                 {"n", spec.n},
                 {"params", spec.params()},
                 {"on_menu", spec.on_menu()}};
    j["table"] = to_json(t);
    emit(cfg, std::move(j), out);
  } else if (cfg.out.empty()) {
    out << table_csv(t);
  } else {
    write_text_file(cfg.out, table_csv(t));
  }
}

}  // namespace

int run(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  if (cfg.command == "help") {
    out << cfg.help_text;
    return 0;
  }
  const auto start = std::chrono::steady_clock::now();
  if (cfg.command == "eigensys") run_eigensys(cfg, out);
  else if (cfg.command == "fit") run_fit(cfg, out);
  else if (cfg.command == "ci") run_ci(cfg, out);
  else if (cfg.command == "predict-interval") run_predict(cfg, out);
  else if (cfg.command == "contrast") run_contrast(cfg, out);
  else if (cfg.command == "plrt") run_plrt(cfg, out);
  else if (cfg.command == "adaptive") run_adaptive(cfg, out);
  else if (cfg.command == "simulate") run_simulate(cfg, out);
  else throw UsageError("unknown subcommand '" + cfg.command + "'");
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  char buf[96];
  std::snprintf(buf, sizeof buf, "gflm %s: %.3f s\n", cfg.command.c_str(), secs);
  err << buf;
  return 0;
}

int main_entry(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  try {
    return run(parse_args(argc, argv), out, err);
  } catch (const Error& e) {
    err << "gflm: " << e.what() << "\n";
    switch (e.kind()) {
      case ErrorKind::Usage: return 2;
      case ErrorKind::Data: return 3;
      case ErrorKind::Numerical: return 4;
    }
    return 1;
  } catch (const std::exception& e) {
    err << "gflm: internal error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace gflm
