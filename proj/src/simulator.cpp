#include "mmpp/simulator.hpp"

#include <cstdio>
#include <random>

#include "mmpp/errors.hpp"

namespace mmpp {

LatentPath simulate_ctmc(const GeneratorMatrix& q, const InitialDistribution& nu,
                         double tau, Rng& rng) {
  if (!(tau > 0.0)) throw InvalidInput("simulation window must be positive");
  if (nu.size() != q.size()) throw InvalidInput("nu and Q differ in size");
  LatentPath path;
  path.window_end = tau;
  int state = static_cast<int>(sample_categorical(nu, rng));
  path.states.push_back(state);

  const std::size_t k = q.size();
  std::vector<double> exits(k);
  double t = 0.0;
  while (true) {
    const double rate = q.exit_rate(static_cast<std::size_t>(state));
    if (!(rate > 0.0)) break;
    t += std::exponential_distribution<double>(rate)(rng);
    if (t >= tau) break;
    for (std::size_t m = 0; m < k; ++m) {
      exits[m] = m == static_cast<std::size_t>(state)
                     ? 0.0
                     : q(static_cast<std::size_t>(state), m);
    }
    state = static_cast<int>(sample_categorical(exits, rng));
    path.jump_times.push_back(t);
    path.states.push_back(state);
  }
  return path;
}

SimulatedSubject simulate_subject(const ModelParams& params, double tau,
                                  bool windowed_convention,
                                  const std::vector<double>& covariate_law,
                                  Rng& rng) {
  if (covariate_law.size() != params.outcome.level_count()) {
    throw InvalidInput("covariate law must give one probability per level");
  }
  SimulatedSubject out;
  out.path = simulate_ctmc(params.q, params.nu, tau, rng);
  auto& rec = out.record;
  rec.window_end = tau;
  rec.forced_first_event = windowed_convention;

  if (windowed_convention) rec.event_times.push_back(0.0);

  const auto& path = out.path;
  double seg_start = 0.0;
  for (std::size_t s = 0; s < path.states.size(); ++s) {
    const double seg_end =
        s < path.jump_times.size() ? path.jump_times[s] : path.window_end;
    const double rate = params.lambda[static_cast<std::size_t>(path.states[s])];
    if (rate > 0.0) {
      std::exponential_distribution<double> gap(rate);
      double t = seg_start + gap(rng);
      while (t < seg_end) {
        if (rec.event_times.empty() || t > rec.event_times.back()) {
          rec.event_times.push_back(t);
        }
        t += gap(rng);
      }
    }
    seg_start = seg_end;
  }

  rec.outcomes.reserve(rec.event_times.size());
  rec.covariates.reserve(rec.event_times.size());
  for (double t : rec.event_times) {
    const int level = static_cast<int>(sample_categorical(covariate_law, rng));
    rec.covariates.push_back(level);
    rec.outcomes.push_back(params.outcome.sample(level, path.state_at(t), rng));
  }
  return out;
}

std::vector<SimulatedSubject> simulate_cohort(const ModelParams& params,
                                              const CohortSpec& spec) {
  params.validate();
  std::vector<SimulatedSubject> cohort;
  cohort.reserve(spec.subjects);
  for (std::size_t n = 0; n < spec.subjects; ++n) {
    Rng rng = substream(spec.seed, n, 0x5u);
    cohort.push_back(simulate_subject(params, spec.window,
                                      spec.windowed_convention,
                                      spec.covariate_law, rng));
    char id[32];
    std::snprintf(id, sizeof id, "s%05zu", n + 1);
    cohort.back().record.subject_id = id;
  }
  return cohort;
}

}  // namespace mmpp
