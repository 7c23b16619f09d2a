#include "mmpp/random.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mmpp/errors.hpp"

namespace mmpp {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

Rng substream(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  const std::uint64_t h = splitmix64(splitmix64(splitmix64(seed) ^ a) ^ b);
  return Rng(h);
}

double uniform01(Rng& rng) {
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

double sample_gamma(double shape, double rate, Rng& rng) {
  if (!(shape > 0.0) || !(rate > 0.0)) {
    throw InvalidInput("gamma shape and rate must be positive");
  }
  return std::gamma_distribution<double>(shape, 1.0 / rate)(rng);
}

std::vector<double> sample_dirichlet(std::span<const double> concentration,
                                     Rng& rng) {
  std::vector<double> out(concentration.size(), 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < concentration.size(); ++i) {
    if (concentration[i] > 0.0) {
      out[i] = sample_gamma(concentration[i], 1.0, rng);
      total += out[i];
    }
  }
  if (!(total > 0.0)) {
    // All mass underflowed (tiny concentrations); fall back to a point mass.
    const std::size_t pick = sample_categorical(concentration, rng);
    std::fill(out.begin(), out.end(), 0.0);
    out[pick] = 1.0;
    return out;
  }
  for (double& x : out) x /= total;
  return out;
}

std::size_t sample_categorical(std::span<const double> weights, Rng& rng) {
  const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  if (!(total > 0.0) || !std::isfinite(total)) {
    throw InvalidInput("categorical weights must have a positive finite sum");
  }
  const double u = uniform01(rng) * total;
  double acc = 0.0;
  std::size_t last_positive = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (weights[i] <= 0.0) continue;
    acc += weights[i];
    last_positive = i;
    if (u < acc) return i;
  }
  return last_positive;
}

}  // namespace mmpp
