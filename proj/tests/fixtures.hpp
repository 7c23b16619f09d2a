#pragma once

// Parameter sets shared by several test files.

#include <algorithm>

#include "mmpp/model.hpp"

namespace fixture {

// Two-state Gaussian model with Q = [[-1,1],[3,-3]], nu = (0.8, 0.2).
inline mmpp::ModelParams two_state(std::vector<double> lambda = {4.0, 12.0},
                                   std::vector<double> beta = {-1.0, 1.0}) {
  mmpp::ModelParams p;
  p.q = mmpp::GeneratorMatrix(mmpp::SquareMatrix{{-1.0, 1.0}, {3.0, -3.0}});
  p.lambda = std::move(lambda);
  p.nu = {0.8, 0.2};
  p.outcome = mmpp::OutcomeModel::gaussian(std::move(beta), {1.0, 1.0});
  return p;
}

inline std::vector<bool> forward_mask() {
  return {false, true, true, false, false, true, false, false, false};
}

// Three-state progressive model with death and a binary covariate.
inline mmpp::ModelParams three_state_death() {
  mmpp::ModelParams p;
  p.q = mmpp::GeneratorMatrix(
      mmpp::SquareMatrix{{-0.21, 0.20, 0.01}, {0.0, -0.05, 0.05},
                         {0.0, 0.0, 0.0}},
      forward_mask());
  p.lambda = {6.0, 10.0, 0.0};
  p.nu = {0.6, 0.4, 0.0};
  const std::vector<double> coef{-0.69, 0.77, -0.13, -0.39};
  auto cells = mmpp::OutcomeModel::cell_means_from_log_linear(coef, 2, 2);
  // Spread the live columns into three-state cells; death cells are unused.
  std::vector<double> means{cells[0], cells[1], 1.0, cells[2], cells[3], 1.0};
  p.outcome = mmpp::OutcomeModel::poisson_categorical({"z0", "z1"}, 3, means);
  return p;
}

}  // namespace fixture

#include <random>

namespace fixture {

// Random fully connected K-state Gaussian model.
inline mmpp::ModelParams random_params(std::size_t k, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> rate(0.2, 2.0), lam(1.0, 6.0),
      mean(-1.5, 1.5), var(0.5, 2.0), w(0.1, 1.0);
  mmpp::SquareMatrix q(k);
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      if (i != j) q(i, j) = rate(rng);
    }
  }
  mmpp::ModelParams p;
  p.q = mmpp::GeneratorMatrix::from_rates(q);
  std::vector<double> means(k), vars(k);
  double total = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    p.lambda.push_back(lam(rng));
    p.nu.push_back(w(rng));
    total += p.nu.back();
    means[i] = mean(rng);
    vars[i] = var(rng);
  }
  for (double& x : p.nu) x /= total;
  p.outcome = mmpp::OutcomeModel::gaussian(means, vars);
  return p;
}

// Random record with `events` events spread over [0, window).
inline mmpp::SubjectRecord random_record(std::size_t events, double window,
                                         bool windowed, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, window);
  std::normal_distribution<double> z(0.0, 1.2);
  mmpp::SubjectRecord r;
  r.subject_id = "r";
  r.window_end = window;
  r.forced_first_event = windowed;
  if (windowed) r.event_times.push_back(0.0);
  std::vector<double> times;
  while (times.size() < events) times.push_back(u(rng));
  std::sort(times.begin(), times.end());
  for (double t : times) {
    if (t > 0.0 && (r.event_times.empty() || t > r.event_times.back())) {
      r.event_times.push_back(t);
    }
  }
  for (std::size_t i = 0; i < r.event_times.size(); ++i) {
    r.outcomes.push_back(z(rng));
    r.covariates.push_back(0);
  }
  return r;
}

}  // namespace fixture
