#pragma once

#include <span>
#include <vector>

#include "mmpp/forward_backward.hpp"
#include "mmpp/linalg.hpp"
#include "mmpp/model.hpp"
#include "mmpp/path.hpp"
#include "mmpp/random.hpp"

namespace mmpp {

/// The latent chain augmented with an absorbing "event has happened" state:
///   [[Q - Lambda, lambda^T], [0, 0]].
/// Bridges conditioned on no event only ever use the live block.
class AugmentedGenerator {
 public:
  AugmentedGenerator(const GeneratorMatrix& q, std::span<const double> lambda);
  // Live block taken as-is (e.g. plain Q when event times are ignored).
  explicit AugmentedGenerator(SquareMatrix live_block);

  std::size_t live_states() const { return live_.dim(); }
  const SquareMatrix& live_block() const { return live_; }
  // The (K+1) x (K+1) generator, event state last.
  SquareMatrix full() const;
  double max_exit_rate() const;

 private:
  SquareMatrix live_;
};

/// Jumps strictly inside (0, delta), offsets relative to the interval start.
/// states[i] is the state entered at jump_times[i].
struct IntervalPathDraw {
  std::vector<double> jump_times;
  std::vector<int> states;
};

struct UniformizationOptions {
  // Dominating rate as a multiple of the largest live exit rate.
  double rate_multiplier = 1.5;
  double tail_tolerance = 1e-12;
  std::size_t max_virtual_jumps = 10000;
};

/// Exact draw of the bridge from j at 0 to k at delta with no event inside.
IntervalPathDraw sample_conditioned_interval(
    const AugmentedGenerator& g, int j, int k, double delta, Rng& rng,
    const UniformizationOptions& options = {});

/// Stitches per-interval bridges between consecutive lattice nodes into one
/// path over [0, window end].
LatentPath assemble_full_path(const EventStateDraw& endpoints,
                              const SubjectRecord& record,
                              std::span<const IntervalPathDraw> interval_draws);

}  // namespace mmpp
