#pragma once

#include <cstdint>
#include <span>
#include <unordered_map>
#include <vector>

#include "mmpp/linalg.hpp"
#include "mmpp/model.hpp"
#include "mmpp/path.hpp"
#include "mmpp/random.hpp"

namespace mmpp {

/// Which transition kernel links consecutive lattice nodes.
enum class FilterMode {
  // exp{(Q - Lambda) delta} times lambda_k at events: event times are data.
  kMmpp,
  // exp(Q delta): event times are treated as fixed, uninformative design.
  kCthmmOnly,
};

/// Memoises interval kernels by the exact bit pattern of delta. Owned by one
/// worker; not thread-safe.
class EtaCache {
 public:
  EtaCache(const ModelParams& params, FilterMode mode);
  const SquareMatrix& get(double delta);
  const SquareMatrix& generator() const { return generator_; }
  std::size_t size() const { return cache_.size(); }

  static constexpr std::size_t kMaxEntries = 1024;

 private:
  SquareMatrix generator_;
  SquareMatrix scratch_;
  std::unordered_map<std::uint64_t, SquareMatrix> cache_;
};

/// Scaled forward variables over the lattice nodes of one subject. Nodes are
/// the event times plus the window end; without the windowed convention an
/// extra anchor node at time 0 carries alpha_0 = nu.
struct ForwardLattice {
  std::size_t states = 0;
  FilterMode mode = FilterMode::kMmpp;
  std::vector<double> node_times;
  // Event index for each node, or -1 for the time-0 anchor and window end.
  std::vector<long> node_event;
  std::vector<double> alpha;     // nodes * K, each row sums to one
  std::vector<double> log_norm;  // per node
  std::vector<SquareMatrix> eta;  // nodes - 1 interval kernels

  std::size_t nodes() const { return node_times.size(); }
  std::span<const double> alpha_at(std::size_t node) const {
    return {alpha.data() + node * states, states};
  }
  double log_marginal() const;
};

/// States at every lattice node, aligned with ForwardLattice::node_times.
struct EventStateDraw {
  std::vector<double> node_times;
  std::vector<int> states;
};

ForwardLattice forward_filter(const ModelParams& params,
                              const SubjectRecord& record,
                              FilterMode mode = FilterMode::kMmpp,
                              EtaCache* cache = nullptr);

EventStateDraw backward_sample(const ForwardLattice& lattice,
                               const ModelParams& params, Rng& rng);

// Normalised p(X_node = j | X_{node+1} = next_state, data up to node).
// `include_rate_factor` multiplies by lambda_next, which cancels.
std::vector<double> backward_probabilities(const ForwardLattice& lattice,
                                           const ModelParams& params,
                                           std::size_t node, int next_state,
                                           bool include_rate_factor = false);

}  // namespace mmpp
