#pragma once

#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "mmpp/linalg.hpp"
#include "mmpp/path.hpp"
#include "mmpp/random.hpp"

namespace mmpp {

/// Latent-chain generator with a structural mask. A state with no free exit
/// rates that can be entered from another state is absorbing; in this model
/// absorbing states are death states (zero event intensity, zero initial
/// mass, no outcome parameters).
class GeneratorMatrix {
 public:
  GeneratorMatrix() = default;

  // `q` must have nonnegative off-diagonals and rows summing to zero. An
  // empty `free_mask` frees every off-diagonal entry; otherwise it is K*K,
  // row-major, and masked entries of `q` must be exactly zero.
  GeneratorMatrix(SquareMatrix q, std::vector<bool> free_mask = {});

  // Builds the diagonal from the off-diagonal entries of `rates`.
  static GeneratorMatrix from_rates(const SquareMatrix& rates,
                                    std::vector<bool> free_mask = {});

  std::size_t size() const { return q_.dim(); }
  double operator()(std::size_t l, std::size_t m) const { return q_(l, m); }
  const SquareMatrix& matrix() const { return q_; }
  double exit_rate(std::size_t l) const { return -q_(l, l); }

  bool is_free(std::size_t l, std::size_t m) const {
    return l != m && free_[l * size() + m];
  }
  const std::vector<bool>& free_mask() const { return free_; }
  bool is_absorbing(std::size_t k) const { return absorbing_[k]; }
  const std::vector<bool>& absorbing_mask() const { return absorbing_; }

  // Replaces one free off-diagonal rate and rebalances the diagonal.
  void set_rate(std::size_t l, std::size_t m, double value);

  friend bool operator==(const GeneratorMatrix&,
                         const GeneratorMatrix&) = default;

 private:
  void refresh_absorbing();

  SquareMatrix q_;
  std::vector<bool> free_;
  std::vector<bool> absorbing_;
};

using RateVector = std::vector<double>;
using InitialDistribution = std::vector<double>;

enum class OutcomeFamily { kGaussian, kPoissonCategorical };

/// State-dependent outcome law f_k(o | z). Gaussian outcomes have a known
/// per-state variance and ignore the covariate; Poisson outcomes have one
/// mean per (covariate level, state) cell.
struct OutcomeModel {
  OutcomeFamily family = OutcomeFamily::kGaussian;
  std::size_t states = 0;
  std::vector<std::string> levels{"none"};
  // Gaussian: K means. Poisson: C*K cell means, indexed level * K + state.
  std::vector<double> means;
  // Gaussian only: K variances.
  std::vector<double> variances;

  static OutcomeModel gaussian(std::vector<double> means,
                               std::vector<double> variances);
  static OutcomeModel poisson_categorical(std::vector<std::string> levels,
                                          std::size_t states,
                                          std::vector<double> cell_means);

  std::size_t level_count() const { return levels.size(); }
  double mean(int level, int state) const;
  double& mean_ref(int level, int state);
  double log_density(double outcome, int level, int state) const;
  double sample(int level, int state, Rng& rng) const;

  // Log-linear coefficients for the Poisson family: row 0 is the log mean at
  // the first level, row c (c >= 1) the log ratio of level c to level 0.
  // Returned C*K, indexed coefficient * K + state.
  std::vector<double> log_linear_coefficients() const;
  static std::vector<double> cell_means_from_log_linear(
      std::span<const double> coefficients, std::size_t levels,
      std::size_t states);

  void validate(const std::vector<bool>& death) const;

  friend bool operator==(const OutcomeModel&, const OutcomeModel&) = default;
};

/// Theta = (B, lambda, Q, nu).
struct ModelParams {
  GeneratorMatrix q;
  RateVector lambda;
  InitialDistribution nu;
  OutcomeModel outcome;

  std::size_t states() const { return q.size(); }
  bool is_death(std::size_t k) const { return q.is_absorbing(k); }
  void validate() const;

  friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

/// Gamma(shape, rate), density proportional to x^(shape-1) exp(-rate x).
struct GammaPrior {
  double shape = 1.0;
  double rate = 1.0;
  friend bool operator==(const GammaPrior&, const GammaPrior&) = default;
};

struct PriorConfig {
  std::vector<GammaPrior> q;          // K*K, diagonal unused
  std::vector<GammaPrior> lambda;     // K
  std::vector<double> nu_concentration;  // K, death entries unused
  // Gaussian family: Normal(mean, variance) per state.
  std::vector<double> normal_mean;
  std::vector<double> normal_variance;
  // Poisson family: Gamma per (level, state) cell, indexed level * K + state.
  std::vector<GammaPrior> cell_mean;

  // The same hyperparameters for every entry of each block.
  static PriorConfig uniform(std::size_t states, std::size_t levels,
                             OutcomeFamily family, GammaPrior rate_prior,
                             GammaPrior lambda_prior, double nu_concentration,
                             double normal_mean, double normal_variance,
                             GammaPrior cell_prior);

  // Throws InvalidInput on inconsistent sizes or non-positive
  // hyperparameters. Returns human-readable warnings, e.g. for Gamma shapes
  // below one.
  std::vector<std::string> validate(const ModelParams& shape_of) const;
};

/// Complete-data summaries of one or more subjects.
struct SufficientStats {
  std::size_t states = 0;
  std::size_t levels = 0;
  std::vector<long long> transitions;   // K*K, N_{l,m}
  std::vector<double> occupancy;        // K, R_l
  std::vector<long long> events;        // K, N_i (point-process events)
  std::vector<long long> initial;       // K, count of X_0 = k
  std::vector<long long> outcome_count;  // C*K
  std::vector<double> outcome_sum;       // C*K

  SufficientStats() = default;
  SufficientStats(std::size_t states, std::size_t levels);

  long long transition(std::size_t l, std::size_t m) const {
    return transitions[l * states + m];
  }
  SufficientStats& operator+=(const SufficientStats& other);

  friend bool operator==(const SufficientStats&,
                         const SufficientStats&) = default;
};

SufficientStats extract_sufficient_stats(const LatentPath& path,
                                         const SubjectRecord& record,
                                         std::size_t states,
                                         std::size_t levels);

// Log of the complete-data likelihood summed over subjects. With
// `include_point_process` false the event-time factor is omitted.
double complete_data_loglik(const ModelParams& params,
                            std::span<const LatentPath> paths,
                            std::span<const SubjectRecord> records,
                            bool include_point_process = true);

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

}  // namespace mmpp
