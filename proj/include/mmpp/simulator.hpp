#pragma once

#include <cstdint>
#include <vector>

#include "mmpp/model.hpp"
#include "mmpp/path.hpp"
#include "mmpp/random.hpp"

namespace mmpp {

/// Gillespie realisation of the latent chain on [0, tau], stopped early at
/// absorption.
LatentPath simulate_ctmc(const GeneratorMatrix& q, const InitialDistribution& nu,
                         double tau, Rng& rng);

struct SimulatedSubject {
  LatentPath path;
  SubjectRecord record;
};

/// One subject from the full generating mechanism: latent path, then
/// state-modulated Poisson events segment by segment, then an outcome per
/// event. `covariate_law` gives the probability of each covariate level and
/// must match params.outcome.levels. With `windowed_convention` an event is
/// forced at time 0 in the initial state.
SimulatedSubject simulate_subject(const ModelParams& params, double tau,
                                  bool windowed_convention,
                                  const std::vector<double>& covariate_law,
                                  Rng& rng);

struct CohortSpec {
  std::size_t subjects = 0;
  double window = 1.0;
  bool windowed_convention = false;
  std::vector<double> covariate_law{1.0};
  std::uint64_t seed = 1;
};

// Subject n uses substream(seed, n), so cohorts are reproducible and each
// subject is independent of the cohort size.
std::vector<SimulatedSubject> simulate_cohort(const ModelParams& params,
                                              const CohortSpec& spec);

}  // namespace mmpp
