#pragma once

// Weight initialization.

#include <cmath>
#include <numbers>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "iqprint/error.hpp"

namespace iqprint::nn {

enum class InitCriterion { glorot, he };

inline InitCriterion init_criterion_from_string(const std::string& s) {
  if (s == "glorot") return InitCriterion::glorot;
  if (s == "he") return InitCriterion::he;
  throw ParameterError("unknown init criterion '" + s + "'");
}

inline std::string to_string(InitCriterion c) { return c == InitCriterion::glorot ? "glorot" : "he"; }

/// Rayleigh scale giving Var(W) = 2 sigma^2 equal to 2/(fan_in + fan_out)
/// (glorot) or 2/fan_in (he).
inline double rayleigh_sigma(std::size_t fan_in, std::size_t fan_out, InitCriterion c) {
  if (fan_in < 1 || fan_out < 1) throw ParameterError("fans must be >= 1");
  const double denom = c == InitCriterion::glorot ? static_cast<double>(fan_in + fan_out) : static_cast<double>(fan_in);
  return 1.0 / std::sqrt(denom);
}

using Rng = std::mt19937_64;

/// `count` complex weights with Rayleigh(sigma) magnitude and U[-pi, pi]
/// phase, returned as (real parts, imaginary parts).
template <typename T>
std::pair<std::vector<T>, std::vector<T>> complex_init(std::size_t count, std::size_t fan_in, std::size_t fan_out,
                                                       InitCriterion c, Rng& rng) {
  const double sigma = rayleigh_sigma(fan_in, fan_out, c);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::uniform_real_distribution<double> phase(-std::numbers::pi, std::numbers::pi);
  std::pair<std::vector<T>, std::vector<T>> w;
  w.first.resize(count);
  w.second.resize(count);
  for (std::size_t k = 0; k < count; ++k) {
    const double mag = sigma * std::sqrt(-2.0 * std::log1p(-u01(rng)));
    const double ph = phase(rng);
    w.first[k] = static_cast<T>(mag * std::cos(ph));
    w.second[k] = static_cast<T>(mag * std::sin(ph));
  }
  return w;
}

/// Glorot uniform for real layers: U[-a, a], a = sqrt(6 / (fan_in + fan_out)).
template <typename T>
std::vector<T> glorot_uniform(std::size_t count, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> d(-a, a);
  std::vector<T> w(count);
  for (auto& v : w) v = static_cast<T>(d(rng));
  return w;
}

template <typename T>
std::vector<T> uniform(std::size_t count, double bound, Rng& rng) {
  std::uniform_real_distribution<double> d(-bound, bound);
  std::vector<T> w(count);
  for (auto& v : w) v = static_cast<T>(d(rng));
  return w;
}

}  // namespace iqprint::nn
