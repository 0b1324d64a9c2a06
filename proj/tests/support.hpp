#pragma once

#include "gflm/simharness.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <random>
#include <string>

namespace gflm::testing {

inline constexpr double kPi = 3.141592653589793238462643383279502884;

inline double rel_err(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

/// Random trigonometric polynomial of low degree, smooth enough for any J.
inline GridFunction random_smooth(const Grid& g, std::mt19937_64& rng, int terms = 4) {
  std::normal_distribution<double> nd;
  Vec a(terms), b(terms);
  for (int j = 0; j < terms; ++j) {
    a[j] = nd(rng);
    b[j] = nd(rng);
  }
  const double c = nd(rng);
  return GridFunction::sample(g, [&](double t) {
    double v = c;
    for (int j = 0; j < terms; ++j) v += a[j] * std::sin((j + 1) * kPi * t) + b[j] * std::cos((j + 1) * kPi * t);
    return v;
  });
}

inline Vec gaussian_vec(Eigen::Index n, std::mt19937_64& rng) {
  std::normal_distribution<double> nd;
  Vec v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = nd(rng);
  return v;
}

/// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("gflm_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace gflm::testing
