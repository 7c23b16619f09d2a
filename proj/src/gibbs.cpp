#include "mmpp/gibbs.hpp"

#include <cmath>
#include <exception>
#include <limits>
#include <random>
#include <string>
#include <thread>

#include "mmpp/errors.hpp"

namespace mmpp {

namespace {

constexpr std::uint64_t kGlobalStream = 0;
constexpr std::uint64_t kInitStream = 0xA11CEu;
constexpr std::uint64_t kPilotStream = 0x9170u;
constexpr int kMaxInitAttempts = 100;

FilterMode filter_mode(SamplerMode mode) {
  return mode == SamplerMode::kMmpp ? FilterMode::kMmpp
                                    : FilterMode::kCthmmOnly;
}

}  // namespace

void SamplerConfig::validate() const {
  if (burn_in > iterations) {
    throw InvalidInput("burn-in exceeds the number of iterations");
  }
  if (thinning < 1) throw InvalidInput("thinning must be at least 1");
  if (threads < 1) throw InvalidInput("thread count must be at least 1");
  if (init_chains < 1) throw InvalidInput("init_chains must be at least 1");
  if (init_chains > 1 && pilot_sweeps < 1) {
    throw InvalidInput("pilot_sweeps must be at least 1");
  }
}

void parallel_for(std::size_t n, std::size_t threads,
                  const std::function<void(std::size_t, std::size_t)>& fn) {
  const std::size_t workers = std::max<std::size_t>(1, std::min(threads, n));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i, 0);
    return;
  }
  std::vector<std::exception_ptr> errors(workers);
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      const std::size_t lo = n * w / workers;
      const std::size_t hi = n * (w + 1) / workers;
      try {
        for (std::size_t i = lo; i < hi; ++i) fn(i, w);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

ConjugatePosterior conjugate_posterior(const SufficientStats& stats,
                                       const PriorConfig& prior,
                                       const ModelParams& params) {
  const std::size_t k = params.states();
  const auto& outcome = params.outcome;
  ConjugatePosterior post;
  post.q.assign(k * k, GammaPrior{});
  post.lambda.assign(k, GammaPrior{});
  post.nu_concentration.assign(k, 0.0);

  for (std::size_t l = 0; l < k; ++l) {
    for (std::size_t m = 0; m < k; ++m) {
      if (!params.q.is_free(l, m)) continue;
      const auto& a = prior.q[l * k + m];
      post.q[l * k + m] = {
          a.shape + static_cast<double>(stats.transition(l, m)),
          a.rate + stats.occupancy[l]};
    }
  }
  for (std::size_t i = 0; i < k; ++i) {
    if (params.is_death(i)) continue;
    post.lambda[i] = {prior.lambda[i].shape + static_cast<double>(stats.events[i]),
                      prior.lambda[i].rate + stats.occupancy[i]};
    post.nu_concentration[i] =
        prior.nu_concentration[i] + static_cast<double>(stats.initial[i]);
  }

  const std::size_t levels = outcome.level_count();
  if (outcome.family == OutcomeFamily::kGaussian) {
    post.normal_mean.assign(k, 0.0);
    post.normal_variance.assign(k, 1.0);
    for (std::size_t i = 0; i < k; ++i) {
      if (params.is_death(i)) continue;
      double count = 0.0;
      double sum = 0.0;
      for (std::size_t c = 0; c < stats.levels; ++c) {
        count += static_cast<double>(stats.outcome_count[c * k + i]);
        sum += stats.outcome_sum[c * k + i];
      }
      const double var = outcome.variances[i];
      const double precision = 1.0 / prior.normal_variance[i] + count / var;
      post.normal_variance[i] = 1.0 / precision;
      post.normal_mean[i] =
          (prior.normal_mean[i] / prior.normal_variance[i] + sum / var) /
          precision;
    }
  } else {
    post.cell_mean.assign(levels * k, GammaPrior{});
    for (std::size_t c = 0; c < levels; ++c) {
      for (std::size_t i = 0; i < k; ++i) {
        if (params.is_death(i)) continue;
        const auto& a = prior.cell_mean[c * k + i];
        post.cell_mean[c * k + i] = {
            a.shape + stats.outcome_sum[c * k + i],
            a.rate + static_cast<double>(stats.outcome_count[c * k + i])};
      }
    }
  }
  return post;
}

void update_initial_distribution(ModelParams& params,
                                 const ConjugatePosterior& post, Rng& rng) {
  params.nu = sample_dirichlet(post.nu_concentration, rng);
}

void update_transition_rates(ModelParams& params,
                             const ConjugatePosterior& post, Rng& rng) {
  const std::size_t k = params.states();
  for (std::size_t l = 0; l < k; ++l) {
    for (std::size_t m = 0; m < k; ++m) {
      if (!params.q.is_free(l, m)) continue;
      const auto& g = post.q[l * k + m];
      params.q.set_rate(l, m, sample_gamma(g.shape, g.rate, rng));
    }
  }
}

void update_event_rates(ModelParams& params, const ConjugatePosterior& post,
                        Rng& rng) {
  for (std::size_t i = 0; i < params.states(); ++i) {
    if (params.is_death(i)) {
      params.lambda[i] = 0.0;
      continue;
    }
    params.lambda[i] =
        sample_gamma(post.lambda[i].shape, post.lambda[i].rate, rng);
  }
}

void update_outcome(ModelParams& params, const ConjugatePosterior& post,
                    Rng& rng) {
  auto& outcome = params.outcome;
  const std::size_t k = params.states();
  if (outcome.family == OutcomeFamily::kGaussian) {
    for (std::size_t i = 0; i < k; ++i) {
      if (params.is_death(i)) continue;
      outcome.means[i] = std::normal_distribution<double>(
          post.normal_mean[i], std::sqrt(post.normal_variance[i]))(rng);
    }
    return;
  }
  for (std::size_t c = 0; c < outcome.level_count(); ++c) {
    for (std::size_t i = 0; i < k; ++i) {
      if (params.is_death(i)) continue;
      const auto& g = post.cell_mean[c * k + i];
      // Guard against an underflowed draw under tiny prior shapes.
      outcome.means[c * k + i] =
          std::max(sample_gamma(g.shape, g.rate, rng), 1e-300);
    }
  }
}

ModelParams draw_from_prior(const PriorConfig& prior,
                            const ModelParams& structure, Rng& rng) {
  ModelParams p = structure;
  const std::size_t k = p.states();
  SquareMatrix rates(k);
  for (std::size_t l = 0; l < k; ++l) {
    for (std::size_t m = 0; m < k; ++m) {
      if (!structure.q.is_free(l, m)) continue;
      const auto& g = prior.q[l * k + m];
      rates(l, m) = sample_gamma(g.shape, g.rate, rng);
    }
  }
  p.q = GeneratorMatrix::from_rates(rates, structure.q.free_mask());

  std::vector<double> conc(k, 0.0);
  for (std::size_t i = 0; i < k; ++i) {
    if (p.is_death(i)) {
      p.lambda[i] = 0.0;
      continue;
    }
    p.lambda[i] = sample_gamma(prior.lambda[i].shape, prior.lambda[i].rate, rng);
    conc[i] = prior.nu_concentration[i];
  }
  p.nu = sample_dirichlet(conc, rng);

  auto& outcome = p.outcome;
  if (outcome.family == OutcomeFamily::kGaussian) {
    for (std::size_t i = 0; i < k; ++i) {
      if (p.is_death(i)) continue;
      outcome.means[i] = std::normal_distribution<double>(
          prior.normal_mean[i], std::sqrt(prior.normal_variance[i]))(rng);
    }
  } else {
    for (std::size_t c = 0; c < outcome.level_count(); ++c) {
      for (std::size_t i = 0; i < k; ++i) {
        if (p.is_death(i)) continue;
        const auto& g = prior.cell_mean[c * k + i];
        outcome.means[c * k + i] =
            std::max(sample_gamma(g.shape, g.rate, rng), 1e-300);
      }
    }
  }
  return p;
}

LatentPath sample_subject_path(const ModelParams& params,
                               const SubjectRecord& record, SamplerMode mode,
                               Rng& rng, EtaCache* cache) {
  std::optional<EtaCache> local;
  if (cache == nullptr) {
    local.emplace(params, filter_mode(mode));
    cache = &*local;
  }
  const ForwardLattice lattice =
      forward_filter(params, record, filter_mode(mode), cache);
  const EventStateDraw ends = backward_sample(lattice, params, rng);
  const AugmentedGenerator g(cache->generator());

  std::vector<IntervalPathDraw> bridges;
  bridges.reserve(ends.states.size() - 1);
  for (std::size_t i = 0; i + 1 < ends.states.size(); ++i) {
    bridges.push_back(sample_conditioned_interval(
        g, ends.states[i], ends.states[i + 1],
        ends.node_times[i + 1] - ends.node_times[i], rng));
  }
  return assemble_full_path(ends, record, bridges);
}

void gibbs_sweep(ChainState& state, std::span<const SubjectRecord> data,
                 const SamplerConfig& config) {
  const auto& params = state.params;
  const std::size_t n = data.size();
  const std::size_t k = params.states();
  const std::size_t levels = params.outcome.level_count();
  const std::uint64_t sweep_id = state.sweep + 1;

  state.paths.resize(n);
  std::vector<SufficientStats> per_subject(n);
  const std::size_t workers =
      std::max<std::size_t>(1, std::min(config.threads, n));
  std::vector<EtaCache> caches(workers,
                               EtaCache(params, filter_mode(config.mode)));

  parallel_for(n, workers, [&](std::size_t i, std::size_t w) {
    Rng rng = substream(state.seed, sweep_id, i + 1);
    state.paths[i] =
        sample_subject_path(params, data[i], config.mode, rng, &caches[w]);
    per_subject[i] =
        extract_sufficient_stats(state.paths[i], data[i], k, levels);
  });

  state.stats = SufficientStats(k, levels);
  for (const auto& s : per_subject) state.stats += s;

  Rng rng = substream(state.seed, sweep_id, kGlobalStream);
  const ConjugatePosterior post =
      conjugate_posterior(state.stats, config.priors, params);
  update_initial_distribution(state.params, post, rng);
  update_transition_rates(state.params, post, rng);
  update_event_rates(state.params, post, rng);
  update_outcome(state.params, post, rng);
  ++state.sweep;
}

double observed_loglik(const ModelParams& params,
                       std::span<const SubjectRecord> data, SamplerMode mode,
                       std::size_t threads) {
  std::vector<double> per_subject(data.size(), 0.0);
  const std::size_t workers =
      std::max<std::size_t>(1, std::min(threads, data.size()));
  std::vector<EtaCache> caches(workers, EtaCache(params, filter_mode(mode)));
  parallel_for(data.size(), workers, [&](std::size_t i, std::size_t w) {
    per_subject[i] =
        forward_filter(params, data[i], filter_mode(mode), &caches[w])
            .log_marginal();
  });
  double total = 0.0;
  for (double x : per_subject) total += x;
  return total;
}

std::vector<PosteriorSample> run_chain(const SamplerConfig& config,
                                       std::span<const SubjectRecord> data,
                                       const ModelParams& structure,
                                       std::optional<ModelParams> init,
                                       const ProgressCallback& progress) {
  config.validate();
  structure.validate();
  config.priors.validate(structure);
  for (const auto& rec : data) rec.validate();

  if (config.iterations == 0) return {};

  // First sweep from a prior draw, redrawing while the data are infeasible.
  auto start_from_prior = [&](ChainState& st, std::uint64_t stream) {
    Rng init_rng = substream(config.seed, 0, stream);
    for (int attempt = 0;; ++attempt) {
      st.params = draw_from_prior(config.priors, structure, init_rng);
      st.params.validate();
      st.sweep = 0;
      try {
        gibbs_sweep(st, data, config);
        return;
      } catch (const InfeasibleData&) {
        if (attempt + 1 >= kMaxInitAttempts) throw;
      }
    }
  };

  ChainState state;
  state.seed = config.seed;
  if (init) {
    state.params = *init;
    state.params.validate();
    try {
      gibbs_sweep(state, data, config);
    } catch (const InfeasibleData& e) {
      throw InfeasibleData(std::string(e.what()) +
                               "; the supplied initial parameters cannot "
                               "explain the data, try a prior-draw "
                               "initialisation",
                           e.event_index());
    }
  } else if (config.init_chains <= 1) {
    start_from_prior(state, kInitStream);
  } else {
    std::optional<ModelParams> best;
    double best_ll = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < config.init_chains; ++c) {
      ChainState pilot;
      pilot.seed = substream(config.seed, 0, kPilotStream + c)();
      try {
        start_from_prior(pilot, kInitStream + c);
        for (std::size_t s = 1; s < config.pilot_sweeps; ++s) {
          gibbs_sweep(pilot, data, config);
        }
      } catch (const InfeasibleData&) {
        continue;
      }
      const double ll = observed_loglik(pilot.params, data, config.mode,
                                        config.threads);
      if (!best || ll > best_ll) {
        best = pilot.params;
        best_ll = ll;
      }
    }
    if (!best) {
      throw InfeasibleData("no pilot chain found parameters that explain the "
                           "data",
                           0);
    }
    state.params = *best;
    gibbs_sweep(state, data, config);
  }

  std::vector<PosteriorSample> out;
  if (config.iterations > config.burn_in) {
    out.reserve((config.iterations - config.burn_in) / config.thinning + 1);
  }
  const bool with_events = config.mode == SamplerMode::kMmpp;
  for (std::size_t it = 1; it <= config.iterations; ++it) {
    if (it > 1) gibbs_sweep(state, data, config);
    if (progress) progress(it);
    if (it <= config.burn_in || (it - config.burn_in - 1) % config.thinning) {
      continue;
    }
    out.push_back({it, state.params,
                   complete_data_loglik(state.params, state.paths, data,
                                        with_events)});
  }
  return out;
}

}  // namespace mmpp
