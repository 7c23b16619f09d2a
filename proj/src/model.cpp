#include "mmpp/model.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>
#include <string>

#include "mmpp/errors.hpp"

namespace mmpp {

namespace {

constexpr double kRowSumTolerance = 1e-12;

std::string state_name(std::size_t k) { return std::to_string(k + 1); }

// x log y with the 0 log 0 = 0 convention.
double xlogy(double x, double y) {
  if (x == 0.0) return 0.0;
  if (y <= 0.0) return kNegInf;
  return x * std::log(y);
}

}  // namespace

GeneratorMatrix::GeneratorMatrix(SquareMatrix q, std::vector<bool> free_mask)
    : q_(std::move(q)), free_(std::move(free_mask)) {
  const std::size_t k = q_.dim();
  if (free_.empty()) {
    free_.assign(k * k, true);
  } else if (free_.size() != k * k) {
    throw InvalidInput("structural mask must have K*K entries");
  }
  for (std::size_t l = 0; l < k; ++l) {
    free_[l * k + l] = false;
    double row_sum = 0.0;
    double scale = 1.0;
    for (std::size_t m = 0; m < k; ++m) {
      const double v = q_(l, m);
      row_sum += v;
      scale = std::max(scale, std::abs(v));
      if (l == m) continue;
      if (v < 0.0) {
        throw InvalidInput("generator rate q_" + state_name(l) + "_" +
                           state_name(m) + " is negative");
      }
      if (!free_[l * k + m] && v != 0.0) {
        throw InvalidInput("structurally zero rate q_" + state_name(l) + "_" +
                           state_name(m) + " is nonzero");
      }
    }
    if (std::abs(row_sum) > kRowSumTolerance * scale) {
      throw InvalidInput("generator row " + state_name(l) +
                         " does not sum to zero");
    }
  }
  refresh_absorbing();
}

GeneratorMatrix GeneratorMatrix::from_rates(const SquareMatrix& rates,
                                            std::vector<bool> free_mask) {
  SquareMatrix q(rates);
  for (std::size_t l = 0; l < q.dim(); ++l) {
    double exit = 0.0;
    for (std::size_t m = 0; m < q.dim(); ++m) {
      if (m != l) exit += q(l, m);
    }
    q(l, l) = -exit;
  }
  return GeneratorMatrix(std::move(q), std::move(free_mask));
}

void GeneratorMatrix::set_rate(std::size_t l, std::size_t m, double value) {
  if (!is_free(l, m)) {
    throw InvalidInput("rate q_" + state_name(l) + "_" + state_name(m) +
                       " is structurally fixed");
  }
  if (!(value >= 0.0) || !std::isfinite(value)) {
    throw InvalidInput("generator rates must be finite and nonnegative");
  }
  q_(l, l) += q_(l, m) - value;
  q_(l, m) = value;
  // Recompute the diagonal exactly to avoid drift over many updates.
  double exit = 0.0;
  for (std::size_t j = 0; j < size(); ++j) {
    if (j != l) exit += q_(l, j);
  }
  q_(l, l) = -exit;
}

void GeneratorMatrix::refresh_absorbing() {
  const std::size_t k = size();
  std::vector<bool> has_exit(k, false), has_entry(k, false);
  for (std::size_t l = 0; l < k; ++l) {
    for (std::size_t m = 0; m < k; ++m) {
      if (free_[l * k + m]) {
        has_exit[l] = true;
        has_entry[m] = true;
      }
    }
  }
  // An isolated state (e.g. K = 1) is an ordinary live state.
  absorbing_.assign(k, false);
  for (std::size_t l = 0; l < k; ++l) {
    absorbing_[l] = !has_exit[l] && has_entry[l];
  }
}

OutcomeModel OutcomeModel::gaussian(std::vector<double> means,
                                    std::vector<double> variances) {
  OutcomeModel m;
  m.family = OutcomeFamily::kGaussian;
  m.states = means.size();
  m.means = std::move(means);
  m.variances = std::move(variances);
  if (m.variances.size() != m.states) {
    throw InvalidInput("Gaussian outcome needs one variance per state");
  }
  return m;
}

OutcomeModel OutcomeModel::poisson_categorical(std::vector<std::string> levels,
                                               std::size_t states,
                                               std::vector<double> cell_means) {
  if (levels.empty()) throw InvalidInput("at least one covariate level needed");
  if (cell_means.size() != levels.size() * states) {
    throw InvalidInput("Poisson outcome needs one mean per (level, state)");
  }
  OutcomeModel m;
  m.family = OutcomeFamily::kPoissonCategorical;
  m.states = states;
  m.levels = std::move(levels);
  m.means = std::move(cell_means);
  return m;
}

double OutcomeModel::mean(int level, int state) const {
  if (family == OutcomeFamily::kGaussian) {
    return means[static_cast<std::size_t>(state)];
  }
  return means[static_cast<std::size_t>(level) * states +
               static_cast<std::size_t>(state)];
}

double& OutcomeModel::mean_ref(int level, int state) {
  if (family == OutcomeFamily::kGaussian) {
    return means[static_cast<std::size_t>(state)];
  }
  return means[static_cast<std::size_t>(level) * states +
               static_cast<std::size_t>(state)];
}

double OutcomeModel::log_density(double outcome, int level, int state) const {
  const double mu = mean(level, state);
  if (family == OutcomeFamily::kGaussian) {
    const double var = variances[static_cast<std::size_t>(state)];
    const double z = outcome - mu;
    return -0.5 * std::log(2.0 * std::numbers::pi * var) - 0.5 * z * z / var;
  }
  if (outcome < 0.0 || outcome != std::floor(outcome)) return kNegInf;
  if (!(mu > 0.0)) return outcome == 0.0 ? 0.0 : kNegInf;
  return outcome * std::log(mu) - mu - std::lgamma(outcome + 1.0);
}

double OutcomeModel::sample(int level, int state, Rng& rng) const {
  const double mu = mean(level, state);
  if (family == OutcomeFamily::kGaussian) {
    const double sd = std::sqrt(variances[static_cast<std::size_t>(state)]);
    return std::normal_distribution<double>(mu, sd)(rng);
  }
  return static_cast<double>(std::poisson_distribution<long long>(mu)(rng));
}

std::vector<double> OutcomeModel::log_linear_coefficients() const {
  if (family != OutcomeFamily::kPoissonCategorical) {
    throw InvalidInput("log-linear coefficients need the Poisson family");
  }
  const std::size_t c_count = levels.size();
  std::vector<double> b(c_count * states, 0.0);
  for (std::size_t k = 0; k < states; ++k) {
    const double base = std::log(means[k]);
    b[k] = base;
    for (std::size_t c = 1; c < c_count; ++c) {
      b[c * states + k] = std::log(means[c * states + k]) - base;
    }
  }
  return b;
}

std::vector<double> OutcomeModel::cell_means_from_log_linear(
    std::span<const double> coefficients, std::size_t levels,
    std::size_t states) {
  if (coefficients.size() != levels * states) {
    throw InvalidInput("log-linear coefficient block has the wrong size");
  }
  std::vector<double> mu(levels * states);
  for (std::size_t k = 0; k < states; ++k) {
    mu[k] = std::exp(coefficients[k]);
    for (std::size_t c = 1; c < levels; ++c) {
      mu[c * states + k] = std::exp(coefficients[k] + coefficients[c * states + k]);
    }
  }
  return mu;
}

void OutcomeModel::validate(const std::vector<bool>& death) const {
  if (death.size() != states) {
    throw InvalidInput("outcome model and generator disagree on K");
  }
  if (levels.empty()) throw InvalidInput("outcome model has no levels");
  for (std::size_t k = 0; k < states; ++k) {
    if (death[k]) continue;
    for (std::size_t c = 0; c < levels.size(); ++c) {
      const double mu = mean(static_cast<int>(c), static_cast<int>(k));
      if (!std::isfinite(mu)) {
        throw InvalidInput("outcome mean for state " + state_name(k) +
                           " is not finite");
      }
      if (family == OutcomeFamily::kPoissonCategorical && !(mu > 0.0)) {
        throw InvalidInput("Poisson mean for state " + state_name(k) +
                           ", level " + levels[c] + " must be positive");
      }
    }
    if (family == OutcomeFamily::kGaussian &&
        !(variances[k] > 0.0 && std::isfinite(variances[k]))) {
      throw InvalidInput("Gaussian variance for state " + state_name(k) +
                         " must be positive");
    }
  }
}

void ModelParams::validate() const {
  const std::size_t k = states();
  if (k == 0) throw InvalidInput("model needs at least one state");
  if (lambda.size() != k || nu.size() != k || outcome.states != k) {
    throw InvalidInput("parameter blocks disagree on the number of states");
  }
  double nu_sum = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    if (!(lambda[i] >= 0.0) || !std::isfinite(lambda[i])) {
      throw InvalidInput("lambda_" + state_name(i) +
                         " must be finite and nonnegative");
    }
    if (!(nu[i] >= 0.0)) {
      throw InvalidInput("nu_" + state_name(i) + " must be nonnegative");
    }
    if (is_death(i) && (lambda[i] != 0.0 || nu[i] != 0.0)) {
      throw InvalidInput("death state " + state_name(i) +
                         " must have zero event rate and initial mass");
    }
    nu_sum += nu[i];
  }
  if (std::abs(nu_sum - 1.0) > 1e-9) {
    throw InvalidInput("initial distribution must sum to one");
  }
  outcome.validate(q.absorbing_mask());
}

PriorConfig PriorConfig::uniform(std::size_t states, std::size_t levels,
                                 OutcomeFamily family, GammaPrior rate_prior,
                                 GammaPrior lambda_prior,
                                 double nu_concentration, double normal_mean,
                                 double normal_variance,
                                 GammaPrior cell_prior) {
  PriorConfig p;
  p.q.assign(states * states, rate_prior);
  p.lambda.assign(states, lambda_prior);
  p.nu_concentration.assign(states, nu_concentration);
  if (family == OutcomeFamily::kGaussian) {
    p.normal_mean.assign(states, normal_mean);
    p.normal_variance.assign(states, normal_variance);
  } else {
    p.cell_mean.assign(levels * states, cell_prior);
  }
  return p;
}

std::vector<std::string> PriorConfig::validate(
    const ModelParams& shape_of) const {
  const std::size_t k = shape_of.states();
  const auto& outcome = shape_of.outcome;
  if (q.size() != k * k || lambda.size() != k || nu_concentration.size() != k) {
    throw InvalidInput("prior blocks disagree with the model dimension");
  }
  std::vector<std::string> small_shape;
  auto check_gamma = [&](const GammaPrior& g, const std::string& name) {
    if (!(g.shape > 0.0) || !(g.rate > 0.0) || !std::isfinite(g.shape) ||
        !std::isfinite(g.rate)) {
      throw InvalidInput("prior for " + name +
                         " needs positive finite shape and rate");
    }
    if (g.shape < 1.0) small_shape.push_back(name);
  };
  for (std::size_t l = 0; l < k; ++l) {
    for (std::size_t m = 0; m < k; ++m) {
      if (shape_of.q.is_free(l, m)) {
        check_gamma(q[l * k + m],
                    "q_" + state_name(l) + "_" + state_name(m));
      }
    }
  }
  for (std::size_t i = 0; i < k; ++i) {
    if (shape_of.is_death(i)) continue;
    check_gamma(lambda[i], "lambda_" + state_name(i));
    if (!(nu_concentration[i] > 0.0)) {
      throw InvalidInput("Dirichlet concentration for nu_" + state_name(i) +
                         " must be positive");
    }
  }
  if (outcome.family == OutcomeFamily::kGaussian) {
    if (normal_mean.size() != k || normal_variance.size() != k) {
      throw InvalidInput("Gaussian outcome prior needs one entry per state");
    }
    for (std::size_t i = 0; i < k; ++i) {
      if (shape_of.is_death(i)) continue;
      if (!std::isfinite(normal_mean[i]) || !(normal_variance[i] > 0.0)) {
        throw InvalidInput("Normal prior for beta_" + state_name(i) +
                           " needs a finite mean and positive variance");
      }
    }
  } else {
    if (cell_mean.size() != outcome.level_count() * k) {
      throw InvalidInput("Poisson outcome prior needs one entry per cell");
    }
    for (std::size_t c = 0; c < outcome.level_count(); ++c) {
      for (std::size_t i = 0; i < k; ++i) {
        if (shape_of.is_death(i)) continue;
        check_gamma(cell_mean[c * k + i],
                    "mu_" + outcome.levels[c] + "_" + state_name(i));
      }
    }
  }
  std::vector<std::string> warnings;
  if (!small_shape.empty()) {
    std::string names;
    for (const auto& n : small_shape) names += (names.empty() ? "" : ", ") + n;
    warnings.push_back(
        "Gamma prior shape < 1 for " + names +
        ": the density is unbounded at zero, so a rarely visited state "
        "yields a posterior spiking at zero and the chain may mix poorly");
  }
  return warnings;
}

SufficientStats::SufficientStats(std::size_t states, std::size_t levels)
    : states(states),
      levels(levels),
      transitions(states * states, 0),
      occupancy(states, 0.0),
      events(states, 0),
      initial(states, 0),
      outcome_count(states * levels, 0),
      outcome_sum(states * levels, 0.0) {}

SufficientStats& SufficientStats::operator+=(const SufficientStats& other) {
  if (other.states != states || other.levels != levels) {
    throw InvalidInput("cannot aggregate statistics of different shapes");
  }
  for (std::size_t i = 0; i < transitions.size(); ++i) {
    transitions[i] += other.transitions[i];
  }
  for (std::size_t i = 0; i < states; ++i) {
    occupancy[i] += other.occupancy[i];
    events[i] += other.events[i];
    initial[i] += other.initial[i];
  }
  for (std::size_t i = 0; i < outcome_count.size(); ++i) {
    outcome_count[i] += other.outcome_count[i];
    outcome_sum[i] += other.outcome_sum[i];
  }
  return *this;
}

SufficientStats extract_sufficient_stats(const LatentPath& path,
                                         const SubjectRecord& record,
                                         std::size_t states,
                                         std::size_t levels) {
  if (path.window_end != record.window_end) {
    throw InvalidInput("subject " + record.subject_id +
                       ": path does not cover the record's window");
  }
  SufficientStats s(states, levels);
  auto check_state = [&](int x) {
    if (x < 0 || static_cast<std::size_t>(x) >= states) {
      throw InvalidInput("subject " + record.subject_id +
                         ": path state out of range");
    }
    return static_cast<std::size_t>(x);
  };

  double start = 0.0;
  for (std::size_t i = 0; i < path.jump_times.size(); ++i) {
    const std::size_t from = check_state(path.states[i]);
    const std::size_t to = check_state(path.states[i + 1]);
    s.occupancy[from] += path.jump_times[i] - start;
    ++s.transitions[from * states + to];
    start = path.jump_times[i];
  }
  s.occupancy[check_state(path.final_state())] += path.window_end - start;
  ++s.initial[check_state(path.initial_state())];

  for (std::size_t t = 0; t < record.size(); ++t) {
    const double time = record.event_times[t];
    if (time < 0.0 || time > record.window_end) {
      throw InvalidInput("subject " + record.subject_id + ": event time " +
                         std::to_string(time) + " outside window");
    }
    const std::size_t k = check_state(path.state_at(time));
    const int level = record.covariates[t];
    if (level < 0 || static_cast<std::size_t>(level) >= levels) {
      throw InvalidInput("subject " + record.subject_id +
                         ": covariate level out of range");
    }
    if (!(record.forced_first_event && t == 0)) ++s.events[k];
    const std::size_t cell = static_cast<std::size_t>(level) * states + k;
    ++s.outcome_count[cell];
    s.outcome_sum[cell] += record.outcomes[t];
  }
  return s;
}

double complete_data_loglik(const ModelParams& params,
                            std::span<const LatentPath> paths,
                            std::span<const SubjectRecord> records,
                            bool include_point_process) {
  if (paths.size() != records.size()) {
    throw InvalidInput("one latent path per subject required");
  }
  const std::size_t k = params.states();
  const std::size_t levels = params.outcome.level_count();
  double total = 0.0;
  for (std::size_t n = 0; n < records.size(); ++n) {
    const auto& path = paths[n];
    const auto& rec = records[n];
    const SufficientStats s = extract_sufficient_stats(path, rec, k, levels);

    double ll = 0.0;
    for (std::size_t t = 0; t < rec.size(); ++t) {
      ll += params.outcome.log_density(rec.outcomes[t], rec.covariates[t],
                                       path.state_at(rec.event_times[t]));
    }
    ll += xlogy(1.0, params.nu[static_cast<std::size_t>(path.initial_state())]);
    for (std::size_t l = 0; l < k; ++l) {
      for (std::size_t m = 0; m < k; ++m) {
        if (l == m) continue;
        const double q = params.q(l, m);
        ll += xlogy(static_cast<double>(s.transition(l, m)), q) -
              q * s.occupancy[l];
      }
    }
    if (include_point_process) {
      for (std::size_t i = 0; i < k; ++i) {
        ll += xlogy(static_cast<double>(s.events[i]), params.lambda[i]) -
              params.lambda[i] * s.occupancy[i];
      }
    }
    total += ll;
  }
  return total;
}

}  // namespace mmpp
