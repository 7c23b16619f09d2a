#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "mmpp/diagnostics.hpp"
#include "mmpp/io.hpp"

namespace mmpp {

// Files written by run_simulate into the output directory.
inline constexpr const char* kDataFile = "data.csv";
inline constexpr const char* kWindowsFile = "windows.csv";
inline constexpr const char* kTruthFile = "truth.csv";
inline constexpr const char* kPathsFile = "paths.csv";
// Files written by run_fit.
inline constexpr const char* kSamplesFile = "samples.csv";
inline constexpr const char* kSummaryCsv = "summary.csv";
inline constexpr const char* kSummaryJson = "summary.json";

// Dataset, truth parameters and true latent paths.
void run_simulate(const ExperimentConfig& config,
                  const std::filesystem::path& out_dir);

struct FitOptions {
  std::optional<SamplerMode> mode;
  std::optional<std::size_t> threads;
  bool relabel = false;
  bool quiet = true;
};

struct FitResult {
  std::vector<PosteriorSample> samples;
  std::vector<TraceSummary> summaries;
};

// `data` is data.csv; the window table is read from windows.csv next to it.
FitResult run_fit(const ExperimentConfig& config,
                  const std::filesystem::path& data,
                  const std::filesystem::path& out_dir,
                  const FitOptions& options = {});

// Reads <samples_dir>/samples.csv and writes summary and plot-data files.
std::vector<TraceSummary> run_diagnose(const std::filesystem::path& samples_dir,
                                       const std::filesystem::path& out_dir);

/// One simulate-then-fit replication, entirely in memory.
struct Replication {
  ModelParams truth;
  std::vector<PosteriorSample> samples;
  std::vector<TraceSummary> summaries;
  // Parameter name -> whether the truth lies in its central 95% interval.
  std::vector<std::pair<std::string, bool>> coverage;
};

// Cohort seed and chain seed are derived from the config seeds and
// `replicate`. Samples are relabelled by ascending event rate when
// `relabel` is set.
Replication run_replication(const ExperimentConfig& config,
                            std::size_t replicate, bool relabel,
                            std::optional<SamplerMode> mode = {},
                            std::size_t threads = 1);

}  // namespace mmpp
