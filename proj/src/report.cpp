#include "gflm/report.hpp"

#include "gflm/io.hpp"

#include <cmath>
#include <cstdio>

#ifndef GFLM_VERSION
#define GFLM_VERSION "0.0.0"
#endif

namespace gflm {

Json number(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

Json to_json(const Vec& v) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(number(v[i]));
  return a;
}

namespace {

Json decisions(const std::map<double, bool>& reject_at) {
  Json j = Json::object();
  for (const auto& [level, rej] : reject_at) j[format_double(level)] = rej;
  return j;
}

}  // namespace

Json to_json(const IntervalReport& r) {
  Json j;
  j["kind"] = std::string(to_string(r.kind));
  j["center"] = number(r.center);
  j["lower"] = number(r.lower);
  j["upper"] = number(r.upper);
  j["width"] = number(r.width());
  j["level"] = r.level;
  j["sigma_n"] = number(r.sigma_n);
  return j;
}

Json to_json(const TestReport& r) {
  Json j;
  j["name"] = r.name;
  j["statistic"] = number(r.statistic);
  Json np = Json::object();
  for (const auto& [k, v] : r.null_params) np[k] = number(v);
  j["null_params"] = np;
  j["p_value"] = number(r.p_value);
  j["reject_at"] = decisions(r.reject_at);
  Json cal;
  if (r.calibration.mode == CalibrationMode::Asymptotic) {
    cal["mode"] = "asymptotic";
  } else {
    cal["mode"] = "monte-carlo";
    cal["reps"] = r.calibration.reps;
    cal["seed"] = r.calibration.seed;
  }
  j["calibration"] = cal;
  return j;
}

Json to_json(const AdaptiveReport& r) {
  Json j;
  j["name"] = r.variant == AtVariant::Gauss ? "AT-gauss" : "AT-subgauss";
  j["tau"] = to_json(r.tau);
  j["AT_star"] = number(r.AT_star);
  j["B_n"] = number(r.B_n);
  j["AT"] = number(r.AT);
  j["statistic"] = number(r.AT);
  j["p_value"] = number(r.p_value);
  j["reject_at"] = decisions(r.reject_at);
  j["k_n"] = r.k_n;
  j["c0"] = r.c0;
  j["N"] = r.N;
  Json cal;
  if (r.calibration == AtCalibration::Gumbel) {
    cal["mode"] = "gumbel";
  } else {
    cal["mode"] = "monte-carlo";
    cal["reps"] = r.reps;
    cal["seed"] = r.seed;
  }
  j["calibration"] = cal;
  return j;
}

Json to_json(const NullConstants& c) {
  Json j;
  j["h"] = c.h;
  j["sigma1_sq"] = number(c.sigma1_sq);
  j["sigma2_sq"] = number(c.sigma2_sq);
  j["sigma2"] = number(c.sigma2);
  j["u_n"] = number(c.u_n);
  j["tail1"] = number(c.tail1);
  j["tail2"] = number(c.tail2);
  j["N"] = c.N;
  return j;
}

Json to_json(const ConstantsReport& r) {
  Json j;
  j["h"] = r.h;
  j["c"] = r.c;
  j["k"] = r.k;
  Json rows = Json::array();
  for (const auto& row : r.rows) {
    Json x;
    x["method"] = row.method;
    x["sigma1_sq"] = number(row.sigma1_sq);
    x["sigma2_sq"] = number(row.sigma2_sq);
    x["sigma2"] = number(row.sigma2);
    x["u_n_h"] = number(row.u_n_h);
    rows.push_back(x);
  }
  j["rows"] = rows;
  return j;
}

Json to_json(const GcvTrace& t) {
  Json j;
  j["lambdas"] = to_json(t.lambdas);
  j["scores"] = to_json(t.scores);
  j["chosen"] = t.chosen;
  return j;
}

Json to_json(const SimulationTable& t) {
  Json j;
  j["seed"] = t.seed;
  j["trials"] = t.trials;
  j["valid"] = t.valid;
  Json rows = Json::array();
  for (const auto& r : t.rows) {
    Json x;
    x["setting"] = r.setting;
    x["n"] = r.n;
    x["params"] = r.params;
    x["method"] = r.method;
    x["rate"] = number(r.rate);
    x["half_width"] = number(r.half_width);
    x["trials"] = r.trials;
    x["failures"] = r.failures;
    x["mean_width"] = number(r.mean_width);
    x["valid"] = r.valid;
    x["errors"] = r.errors;
    rows.push_back(x);
  }
  j["rows"] = rows;
  return j;
}

std::uint64_t fnv1a(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string version() { return GFLM_VERSION; }

}  // namespace gflm
