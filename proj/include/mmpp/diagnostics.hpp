#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "mmpp/gibbs.hpp"

namespace mmpp {

/// Geyer initial-positive-sequence IACT: 1 + 2 sum rho_k, truncated at the
/// first non-positive sum of an adjacent autocorrelation pair. Throws
/// InvalidInput for traces shorter than 10 or with zero variance.
double iact(std::span<const double> trace);

// Sample autocorrelations rho_0..rho_max_lag (biased estimator).
std::vector<double> autocorrelation(std::span<const double> trace,
                                    std::size_t max_lag);

// Type-7 (linear interpolation) sample quantile of sorted data.
double quantile_sorted(std::span<const double> sorted, double prob);

inline constexpr double kMinReliableEss = 100.0;

enum class IactFlag { kOk, kLowConfidence, kUndefined };

const char* to_string(IactFlag flag);

struct TraceSummary {
  std::string parameter;
  double median = 0.0;
  double lower95 = 0.0;
  double upper95 = 0.0;
  double iact = 0.0;  // NaN when undefined
  double ess = 0.0;   // NaN when undefined
  std::size_t count = 0;
  IactFlag flag = IactFlag::kOk;
};

TraceSummary summarize_trace(const std::string& name,
                             std::span<const double> trace);

/// Named scalar traces, one column per parameter.
struct TraceTable {
  std::vector<std::size_t> iterations;
  std::vector<double> loglik;
  std::vector<std::string> names;
  std::vector<std::vector<double>> columns;

  const std::vector<double>& column(const std::string& name) const;
  std::size_t rows() const { return iterations.size(); }
};

// Scalar parameter names for a model: lambda_k, q_l_m, nu_k, then beta_k
// (Gaussian) or mu_<level>_k followed by b_<d>_k log-linear coefficients
// (Poisson). Only free rates and live states appear.
std::vector<std::string> parameter_names(const ModelParams& structure);
std::vector<double> parameter_values(const ModelParams& params);

TraceTable to_trace_table(std::span<const PosteriorSample> samples);

std::vector<TraceSummary> summarize(const TraceTable& table);
std::vector<TraceSummary> summarize(std::span<const PosteriorSample> samples);

/// Writes summary.csv plus trace_/acf_/hist_<param>.csv files to `dir`.
void write_diagnostics(const TraceTable& table,
                       const std::vector<TraceSummary>& summaries,
                       const std::filesystem::path& dir,
                       std::size_t acf_lags = 100, std::size_t hist_bins = 40);

/// Relabels live states so that event rates ascend (ties broken by the mean
/// outcome over levels). Death states keep their index.
ModelParams relabel_by_event_rate(const ModelParams& params);

}  // namespace mmpp
