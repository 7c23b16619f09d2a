#include "mmpp/path_sampler.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "mmpp/errors.hpp"

namespace mmpp {

namespace {

double uniform_open01(Rng& rng) {
  double u = 0.0;
  do {
    u = uniform01(rng);
  } while (u <= 0.0);
  return u;
}

}  // namespace

AugmentedGenerator::AugmentedGenerator(const GeneratorMatrix& q,
                                       std::span<const double> lambda)
    : live_(q.matrix()) {
  if (lambda.size() != q.size()) {
    throw InvalidInput("augmented generator: rate vector size mismatch");
  }
  for (std::size_t i = 0; i < q.size(); ++i) live_(i, i) -= lambda[i];
}

AugmentedGenerator::AugmentedGenerator(SquareMatrix live_block)
    : live_(std::move(live_block)) {}

SquareMatrix AugmentedGenerator::full() const {
  const std::size_t k = live_.dim();
  SquareMatrix g(k + 1);
  for (std::size_t i = 0; i < k; ++i) {
    double row = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      g(i, j) = live_(i, j);
      row += live_(i, j);
    }
    g(i, k) = -row;
  }
  return g;
}

double AugmentedGenerator::max_exit_rate() const {
  double r = 0.0;
  for (std::size_t i = 0; i < live_.dim(); ++i) {
    r = std::max(r, std::abs(live_(i, i)));
  }
  return r;
}

IntervalPathDraw sample_conditioned_interval(
    const AugmentedGenerator& g, int j, int k, double delta, Rng& rng,
    const UniformizationOptions& options) {
  const std::size_t n_states = g.live_states();
  if (j < 0 || k < 0 || static_cast<std::size_t>(j) >= n_states ||
      static_cast<std::size_t>(k) >= n_states) {
    throw InvalidInput("bridge endpoints must be live states");
  }
  if (!(delta >= 0.0) || !std::isfinite(delta)) {
    throw InvalidInput("bridge length must be finite and nonnegative");
  }
  IntervalPathDraw draw;
  const double omega = options.rate_multiplier * g.max_exit_rate();
  if (delta == 0.0 || omega == 0.0) {
    if (j != k) {
      throw InfeasibleEndpoints("bridge " + std::to_string(j + 1) + " -> " +
                                std::to_string(k + 1) +
                                " has zero probability");
    }
    return draw;
  }

  // Subordinated kernel P = I + G / omega on the live states.
  const SquareMatrix& live = g.live_block();
  SquareMatrix p(n_states);
  for (std::size_t a = 0; a < n_states; ++a) {
    for (std::size_t b = 0; b < n_states; ++b) {
      p(a, b) = live(a, b) / omega + (a == b ? 1.0 : 0.0);
      if (p(a, b) < 0.0) p(a, b) = 0.0;
    }
  }

  // Row n of `cols` holds column k of P^n, renormalized when it shrinks
  // towards underflow. Weights are Pois(n; mu) [P^n]_{jk} times exp(mu) and a
  // common rescaling exp(-offset), so the series needs no per-term logs.
  const double mu = omega * delta;
  thread_local std::vector<double> cols;
  thread_local std::vector<double> weight;
  cols.assign(n_states, 0.0);
  weight.clear();
  cols[static_cast<std::size_t>(k)] = 1.0;
  constexpr double kTiny = 1e-200;
  constexpr double kHuge = 1e200;
  double pois = 1.0;       // mu^n / n! * exp(-offset)
  double col_scale = 1.0;  // product of column renormalizations
  double offset = 0.0;
  weight.push_back(j == k ? 1.0 : 0.0);
  double total = weight.back();

  for (std::size_t n = 1;; ++n) {
    const double n_d = static_cast<double>(n);
    // sum_{m >= n} Pois(m) <= Pois(n) / (1 - mu / (n + 1)) once n + 1 > mu;
    // [P^m]_{jk} <= 1 bounds the neglected weights.
    if (n_d + 1.0 > mu && total > 0.0) {
      const double tail = pois * mu / n_d / (1.0 - mu / (n_d + 1.0));
      if (tail < total * options.tail_tolerance) break;
    }
    if (n > options.max_virtual_jumps) {
      throw TruncationError("virtual jump series did not converge within " +
                            std::to_string(options.max_virtual_jumps) +
                            " terms (omega * delta = " + std::to_string(mu) +
                            ")");
    }
    cols.resize((n + 1) * n_states);
    const double* prev = cols.data() + (n - 1) * n_states;
    double* next = cols.data() + n * n_states;
    double peak = 0.0;
    for (std::size_t a = 0; a < n_states; ++a) {
      double acc = 0.0;
      for (std::size_t b = 0; b < n_states; ++b) acc += p(a, b) * prev[b];
      next[a] = acc;
      peak = std::max(peak, acc);
    }
    if (peak > 0.0 && peak < kTiny) {
      const double inv = 1.0 / peak;
      for (std::size_t a = 0; a < n_states; ++a) next[a] *= inv;
      col_scale *= peak;
    }
    pois *= mu / n_d;
    if (pois > kHuge) {
      pois /= kHuge;
      total /= kHuge;
      for (double& w : weight) w /= kHuge;
      offset += std::log(kHuge);
    }
    const double w = pois * col_scale * next[static_cast<std::size_t>(j)];
    weight.push_back(w);
    total += w;
    if (peak == 0.0 && n_d + 1.0 > mu) break;
    // Any walk to k of positive weight is at most n_states - 1 steps long.
    if (total == 0.0 && n >= n_states) break;
  }

  if (!(total > 0.0) || std::log(total) + offset - mu < std::log(1e-300)) {
    throw InfeasibleEndpoints("bridge " + std::to_string(j + 1) + " -> " +
                              std::to_string(k + 1) + " over " +
                              std::to_string(delta) +
                              " has negligible probability");
  }

  // Number of virtual jumps.
  std::size_t n_jumps = 0;
  {
    const double u = uniform01(rng) * total;
    double acc = 0.0;
    for (std::size_t n = 0; n < weight.size(); ++n) {
      if (weight[n] == 0.0) continue;
      acc += weight[n];
      n_jumps = n;
      if (u < acc) break;
    }
  }
  if (n_jumps == 0) return draw;

  std::vector<double> times(n_jumps);
  for (double& t : times) t = uniform_open01(rng) * delta;
  std::sort(times.begin(), times.end());

  std::vector<double> w(n_states);
  auto current = static_cast<std::size_t>(j);
  for (std::size_t i = 1; i <= n_jumps; ++i) {
    const double* col = cols.data() + (n_jumps - i) * n_states;
    for (std::size_t m = 0; m < n_states; ++m) w[m] = p(current, m) * col[m];
    const std::size_t nxt = sample_categorical(w, rng);
    if (nxt != current) {
      draw.jump_times.push_back(times[i - 1]);
      draw.states.push_back(static_cast<int>(nxt));
      current = nxt;
    }
  }
  if (current != static_cast<std::size_t>(k)) {
    throw ConsistencyError("bridge did not end in its conditioning state");
  }
  return draw;
}

LatentPath assemble_full_path(const EventStateDraw& endpoints,
                              const SubjectRecord& record,
                              std::span<const IntervalPathDraw> interval_draws) {
  const std::size_t nodes = endpoints.states.size();
  if (nodes == 0 || endpoints.node_times.size() != nodes) {
    throw ConsistencyError("endpoint draw is malformed");
  }
  if (interval_draws.size() + 1 != nodes) {
    throw ConsistencyError("need one bridge per pair of consecutive nodes");
  }
  if (endpoints.node_times.front() != 0.0 ||
      endpoints.node_times.back() != record.window_end) {
    throw ConsistencyError("endpoint nodes do not span the subject window");
  }
  LatentPath path;
  path.window_end = record.window_end;
  path.states.push_back(endpoints.states.front());

  for (std::size_t i = 0; i + 1 < nodes; ++i) {
    const auto& d = interval_draws[i];
    if (path.states.back() != endpoints.states[i]) {
      throw ConsistencyError("bridge " + std::to_string(i) +
                             " starts away from its endpoint");
    }
    if (d.jump_times.size() != d.states.size()) {
      throw ConsistencyError("bridge jump times and states differ in length");
    }
    const double start = endpoints.node_times[i];
    for (std::size_t m = 0; m < d.states.size(); ++m) {
      const double t = start + d.jump_times[m];
      const int s = d.states[m];
      if (!path.jump_times.empty() && t <= path.jump_times.back()) {
        // Zero-length segment: overwrite it.
        path.states.back() = s;
        if (path.states[path.states.size() - 2] == s) {
          path.states.pop_back();
          path.jump_times.pop_back();
        }
        continue;
      }
      if (s == path.states.back()) continue;
      path.jump_times.push_back(t);
      path.states.push_back(s);
    }
    if (path.states.back() != endpoints.states[i + 1]) {
      throw ConsistencyError("bridge " + std::to_string(i) +
                             " ends away from its endpoint");
    }
  }
  return path;
}

}  // namespace mmpp
