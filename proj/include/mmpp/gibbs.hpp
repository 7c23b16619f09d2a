#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "mmpp/forward_backward.hpp"
#include "mmpp/model.hpp"
#include "mmpp/path.hpp"
#include "mmpp/path_sampler.hpp"
#include "mmpp/random.hpp"

namespace mmpp {

enum class SamplerMode { kMmpp, kCthmmOnly };

struct SamplerConfig {
  std::size_t iterations = 1000;
  std::size_t burn_in = 0;
  std::size_t thinning = 1;
  std::uint64_t seed = 1;
  PriorConfig priors;
  SamplerMode mode = SamplerMode::kMmpp;
  std::size_t threads = 1;
  // With more than one, a prior-draw start runs this many pilot chains of
  // `pilot_sweeps` sweeps and continues from the pilot with the highest
  // observed-data log-likelihood. Guards against starts that fix a labelling
  // a structural mask cannot undo.
  std::size_t init_chains = 1;
  std::size_t pilot_sweeps = 50;

  void validate() const;
};

struct ChainState {
  ModelParams params;
  std::vector<LatentPath> paths;
  SufficientStats stats;
  std::size_t sweep = 0;
  std::uint64_t seed = 1;
};

struct PosteriorSample {
  std::size_t iteration = 0;
  ModelParams params;
  double loglik = 0.0;
};

/// Parameters of every full conditional given the aggregated statistics.
struct ConjugatePosterior {
  std::vector<GammaPrior> q;          // K*K, non-free entries unused
  std::vector<GammaPrior> lambda;     // K, death entries unused
  std::vector<double> nu_concentration;  // K, zero for death states
  std::vector<double> normal_mean;    // Gaussian family
  std::vector<double> normal_variance;
  std::vector<GammaPrior> cell_mean;  // Poisson family
};

ConjugatePosterior conjugate_posterior(const SufficientStats& stats,
                                       const PriorConfig& prior,
                                       const ModelParams& params);

// Steps 3-6 of a sweep, each drawing from its full conditional.
void update_initial_distribution(ModelParams& params,
                                 const ConjugatePosterior& post, Rng& rng);
void update_transition_rates(ModelParams& params,
                             const ConjugatePosterior& post, Rng& rng);
void update_event_rates(ModelParams& params, const ConjugatePosterior& post,
                        Rng& rng);
void update_outcome(ModelParams& params, const ConjugatePosterior& post,
                    Rng& rng);

/// Draws Theta from the prior; structure (mask, family, levels, known
/// variances) comes from `structure`.
ModelParams draw_from_prior(const PriorConfig& prior,
                            const ModelParams& structure, Rng& rng);

/// Latent path for one subject given Theta: endpoint draw, then bridges.
LatentPath sample_subject_path(const ModelParams& params,
                               const SubjectRecord& record, SamplerMode mode,
                               Rng& rng, EtaCache* cache = nullptr);

/// One full sweep: paths for every subject, then nu, Q, lambda, outcome.
/// Randomness comes from substreams of (state.seed, state.sweep) so the
/// result does not depend on `threads`.
void gibbs_sweep(ChainState& state, std::span<const SubjectRecord> data,
                 const SamplerConfig& config);

using ProgressCallback = std::function<void(std::size_t sweep)>;

/// Observed-data log-likelihood summed over subjects.
double observed_loglik(const ModelParams& params,
                       std::span<const SubjectRecord> data, SamplerMode mode,
                       std::size_t threads = 1);

/// Runs the chain from `init` (or a prior draw) and returns every
/// thinning-th sweep after burn-in.
std::vector<PosteriorSample> run_chain(
    const SamplerConfig& config, std::span<const SubjectRecord> data,
    const ModelParams& structure, std::optional<ModelParams> init = {},
    const ProgressCallback& progress = {});

// Applies `fn(i)` for i in [0, n) over `threads` workers with a static
// partition.
void parallel_for(std::size_t n, std::size_t threads,
                  const std::function<void(std::size_t, std::size_t)>& fn);

}  // namespace mmpp
