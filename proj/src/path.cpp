#include "mmpp/path.hpp"

#include <algorithm>
#include <cmath>

#include "mmpp/errors.hpp"

namespace mmpp {

int LatentPath::state_at(double t) const {
  const auto it = std::upper_bound(jump_times.begin(), jump_times.end(), t);
  return states[static_cast<std::size_t>(it - jump_times.begin())];
}

void LatentPath::validate(const std::vector<bool>& absorbing) const {
  if (!(window_end >= 0.0) || !std::isfinite(window_end)) {
    throw InvalidInput("path window end must be finite and nonnegative");
  }
  if (states.size() != jump_times.size() + 1) {
    throw InvalidInput("path needs exactly one more state than jumps");
  }
  double prev = 0.0;
  for (std::size_t i = 0; i < jump_times.size(); ++i) {
    const double t = jump_times[i];
    if (!(t >= prev) || (i > 0 && !(t > prev)) || t > window_end) {
      throw InvalidInput("path jump times must increase strictly within the "
                         "window");
    }
    prev = t;
    if (states[i] == states[i + 1]) {
      throw InvalidInput("consecutive path segments share a state");
    }
  }
  for (std::size_t i = 0; i < states.size(); ++i) {
    const int s = states[i];
    if (s < 0) throw InvalidInput("negative state index in path");
    if (!absorbing.empty()) {
      if (static_cast<std::size_t>(s) >= absorbing.size()) {
        throw InvalidInput("state index out of range in path");
      }
      if (absorbing[static_cast<std::size_t>(s)] && i + 1 < states.size()) {
        throw InvalidInput("path leaves an absorbing state");
      }
    }
  }
}

void SubjectRecord::validate() const {
  if (outcomes.size() != event_times.size() ||
      covariates.size() != event_times.size()) {
    throw InvalidInput("subject " + subject_id +
                       ": times, outcomes and covariates differ in length");
  }
  if (!(window_end > 0.0) || !std::isfinite(window_end)) {
    throw InvalidInput("subject " + subject_id +
                       ": window end must be positive and finite");
  }
  if (forced_first_event) {
    if (event_times.empty() || event_times.front() != 0.0) {
      throw InvalidInput("subject " + subject_id +
                         ": windowed records must start with an event at 0");
    }
  }
  double prev = -1.0;
  for (std::size_t i = 0; i < event_times.size(); ++i) {
    const double t = event_times[i];
    if (!std::isfinite(t) || t < 0.0 || t > window_end) {
      throw InvalidInput("subject " + subject_id + ": event time " +
                         std::to_string(t) + " outside window");
    }
    if (i > 0 && !(t > prev)) {
      throw InvalidInput("subject " + subject_id +
                         ": event times must increase strictly");
    }
    if (!std::isfinite(outcomes[i])) {
      throw InvalidInput("subject " + subject_id + ": non-finite outcome");
    }
    if (covariates[i] < 0) {
      throw InvalidInput("subject " + subject_id + ": bad covariate level");
    }
    prev = t;
  }
}

}  // namespace mmpp
