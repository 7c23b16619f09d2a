#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace mmpp {

using Rng = std::mt19937_64;

// Deterministic substream: the engine for a (seed, a, b) triple is fixed
// regardless of which thread asks for it or in what order.
Rng substream(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0);

double uniform01(Rng& rng);

// Gamma(shape, rate) with the rate parameterization exp(-rate x).
double sample_gamma(double shape, double rate, Rng& rng);

std::vector<double> sample_dirichlet(std::span<const double> concentration,
                                     Rng& rng);

// Index drawn with probability proportional to `weights` (nonnegative, not
// all zero).
std::size_t sample_categorical(std::span<const double> weights, Rng& rng);

}  // namespace mmpp
