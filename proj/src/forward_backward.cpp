#include "mmpp/forward_backward.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>
#include <optional>
#include <string>

#include "mmpp/errors.hpp"

namespace mmpp {

namespace {

SquareMatrix interval_generator(const ModelParams& params, FilterMode mode) {
  SquareMatrix g = params.q.matrix();
  if (mode == FilterMode::kMmpp) {
    for (std::size_t i = 0; i < g.dim(); ++i) g(i, i) -= params.lambda[i];
  }
  return g;
}

}  // namespace

EtaCache::EtaCache(const ModelParams& params, FilterMode mode)
    : generator_(interval_generator(params, mode)) {}

const SquareMatrix& EtaCache::get(double delta) {
  const auto key = std::bit_cast<std::uint64_t>(delta);
  auto it = cache_.find(key);
  if (it != cache_.end()) return it->second;
  // Irregular event times rarely repeat; stop growing once the table is full.
  if (cache_.size() >= kMaxEntries) {
    scratch_ = expm(generator_, delta);
    return scratch_;
  }
  return cache_.emplace(key, expm(generator_, delta)).first->second;
}

double ForwardLattice::log_marginal() const {
  return std::accumulate(log_norm.begin(), log_norm.end(), 0.0);
}

ForwardLattice forward_filter(const ModelParams& params,
                              const SubjectRecord& record, FilterMode mode,
                              EtaCache* cache) {
  const std::size_t k = params.states();
  if (record.size() == 0 && record.forced_first_event) {
    throw InvalidInput("subject " + record.subject_id +
                       ": windowed record without its first event");
  }
  std::optional<EtaCache> local;
  if (cache == nullptr) {
    local.emplace(params, mode);
    cache = &*local;
  }

  ForwardLattice lat;
  lat.states = k;
  lat.mode = mode;
  if (!record.forced_first_event) {
    lat.node_times.push_back(0.0);
    lat.node_event.push_back(-1);
  }
  for (std::size_t t = 0; t < record.size(); ++t) {
    lat.node_times.push_back(record.event_times[t]);
    lat.node_event.push_back(static_cast<long>(t));
  }
  lat.node_times.push_back(record.window_end);
  lat.node_event.push_back(-1);

  const std::size_t nodes = lat.nodes();
  lat.alpha.assign(nodes * k, 0.0);
  lat.log_norm.assign(nodes, 0.0);
  lat.eta.reserve(nodes - 1);

  std::vector<double> log_f(k);
  std::vector<double> pred(k);

  // Multiplies row `node` of alpha by the observation factor of its event in
  // log space, then rescales it to a probability vector.
  auto absorb = [&](std::size_t node, bool rate_factor) {
    double* a = lat.alpha.data() + node * k;
    double shift = 0.0;
    const long ev = lat.node_event[node];
    if (ev >= 0) {
      const auto t = static_cast<std::size_t>(ev);
      shift = kNegInf;
      for (std::size_t j = 0; j < k; ++j) {
        log_f[j] = params.is_death(j)
                       ? kNegInf
                       : params.outcome.log_density(record.outcomes[t],
                                                    record.covariates[t],
                                                    static_cast<int>(j));
        if (a[j] > 0.0) shift = std::max(shift, log_f[j]);
      }
      if (shift == kNegInf) {
        throw InfeasibleData("subject " + record.subject_id +
                                 ": zero likelihood at event " +
                                 std::to_string(t + 1),
                             t);
      }
      for (std::size_t j = 0; j < k; ++j) {
        if (a[j] == 0.0) continue;
        a[j] *= std::exp(log_f[j] - shift);
        if (rate_factor) a[j] *= params.lambda[j];
      }
    }
    const double total = std::accumulate(a, a + k, 0.0);
    if (!(total > 0.0) || !std::isfinite(total)) {
      const std::size_t where = ev >= 0 ? static_cast<std::size_t>(ev)
                                        : record.size();
      throw InfeasibleData("subject " + record.subject_id +
                               ": forward variable vanished at " +
                               (ev >= 0 ? "event " + std::to_string(ev + 1)
                                        : std::string("window end")),
                           where);
    }
    for (std::size_t j = 0; j < k; ++j) a[j] /= total;
    lat.log_norm[node] = std::log(total) + shift;
  };

  std::copy(params.nu.begin(), params.nu.end(), lat.alpha.begin());
  absorb(0, false);

  for (std::size_t node = 1; node < nodes; ++node) {
    const double delta = lat.node_times[node] - lat.node_times[node - 1];
    lat.eta.push_back(cache->get(delta));
    left_multiply(lat.alpha_at(node - 1), lat.eta.back(), pred);
    std::copy(pred.begin(), pred.end(), lat.alpha.begin() + node * k);
    absorb(node, mode == FilterMode::kMmpp && lat.node_event[node] >= 0);
  }
  return lat;
}

std::vector<double> backward_probabilities(const ForwardLattice& lattice,
                                           const ModelParams& params,
                                           std::size_t node, int next_state,
                                           bool include_rate_factor) {
  const std::size_t k = lattice.states;
  if (node + 1 >= lattice.nodes()) {
    throw InvalidInput("backward_probabilities: node has no successor");
  }
  const auto a = lattice.alpha_at(node);
  const auto& eta = lattice.eta[node];
  const auto next = static_cast<std::size_t>(next_state);
  const double rate =
      include_rate_factor && lattice.mode == FilterMode::kMmpp &&
              lattice.node_event[node + 1] >= 0
          ? params.lambda[next]
          : 1.0;
  std::vector<double> b(k);
  double total = 0.0;
  for (std::size_t j = 0; j < k; ++j) {
    b[j] = a[j] * eta(j, next) * rate;
    total += b[j];
  }
  if (!(total > 0.0)) {
    throw ConsistencyError("backward step has no feasible predecessor");
  }
  for (double& x : b) x /= total;
  return b;
}

EventStateDraw backward_sample(const ForwardLattice& lattice,
                               const ModelParams& params, Rng& rng) {
  (void)params;
  const std::size_t k = lattice.states;
  const std::size_t nodes = lattice.nodes();
  EventStateDraw draw;
  draw.node_times = lattice.node_times;
  draw.states.assign(nodes, 0);
  draw.states[nodes - 1] =
      static_cast<int>(sample_categorical(lattice.alpha_at(nodes - 1), rng));

  std::vector<double> b(k);
  for (std::size_t node = nodes - 1; node-- > 0;) {
    const auto a = lattice.alpha_at(node);
    const auto& eta = lattice.eta[node];
    const auto next = static_cast<std::size_t>(draw.states[node + 1]);
    for (std::size_t j = 0; j < k; ++j) b[j] = a[j] * eta(j, next);
    draw.states[node] = static_cast<int>(sample_categorical(b, rng));
  }
  return draw;
}

}  // namespace mmpp
