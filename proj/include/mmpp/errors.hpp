#pragma once

#include <stdexcept>
#include <string>

namespace mmpp {

// Malformed arguments or values that violate a type invariant.
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// The data have zero likelihood under the current parameters.
class InfeasibleData : public std::runtime_error {
 public:
  InfeasibleData(const std::string& what, std::size_t event_index)
      : std::runtime_error(what), event_index_(event_index) {}
  std::size_t event_index() const { return event_index_; }

 private:
  std::size_t event_index_;
};

// Endpoint-conditioned path sampling was asked for a zero-probability bridge.
class InfeasibleEndpoints : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// The virtual-jump series did not converge before the hard cap.
class TruncationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Internal bookkeeping disagreed with itself; always a bug.
class ConsistencyError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace mmpp
