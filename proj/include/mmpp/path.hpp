#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace mmpp {

/// Piecewise-constant, right-continuous trajectory on [0, window_end].
/// `states` has one more entry than `jump_times`; segment i runs from
/// jump_times[i-1] (or 0) up to jump_times[i] (or window_end).
struct LatentPath {
  std::vector<double> jump_times;
  std::vector<int> states;
  double window_end = 0.0;

  static LatentPath constant(int state, double window_end) {
    return {{}, {state}, window_end};
  }

  int initial_state() const { return states.front(); }
  int final_state() const { return states.back(); }
  std::size_t jump_count() const { return jump_times.size(); }

  // State occupied at time t (right-continuous at jumps).
  int state_at(double t) const;

  // Throws InvalidInput when the path violates its structural invariants.
  // `absorbing` may be empty; otherwise it flags states with no exits.
  void validate(const std::vector<bool>& absorbing = {}) const;

  friend bool operator==(const LatentPath&, const LatentPath&) = default;
};

/// One subject's observations. When `forced_first_event` is set the record
/// starts at its first interaction (event_times[0] == 0) and that event
/// carries an outcome but is not a point-process event.
struct SubjectRecord {
  std::string subject_id;
  std::vector<double> event_times;
  std::vector<double> outcomes;
  std::vector<int> covariates;
  double window_end = 0.0;
  bool forced_first_event = false;

  std::size_t size() const { return event_times.size(); }

  // Number of events that count towards the point-process likelihood.
  std::size_t counted_events() const {
    return forced_first_event && !event_times.empty() ? size() - 1 : size();
  }

  void validate() const;

  friend bool operator==(const SubjectRecord&, const SubjectRecord&) = default;
};

}  // namespace mmpp
