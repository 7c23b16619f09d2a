#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mmpp/diagnostics.hpp"
#include "mmpp/gibbs.hpp"
#include "mmpp/model.hpp"
#include "mmpp/path.hpp"
#include "mmpp/simulator.hpp"

namespace mmpp {

// ---- datasets -------------------------------------------------------------
//
// data.csv:    subject_id,time,outcome,covariate   (one row per event)
// windows.csv: subject_id,window_end               (one row per subject)
//
// Subjects appear in windows.csv order. Times are written with 17
// significant digits so a write/read cycle reproduces them exactly.

void write_dataset(const std::filesystem::path& data_csv,
                   const std::filesystem::path& windows_csv,
                   std::span<const SubjectRecord> subjects,
                   const std::vector<std::string>& levels);

// Throws DataError on malformed files, unknown covariate levels, subjects
// missing from the window table, or non-increasing times.
std::vector<SubjectRecord> read_dataset(const std::filesystem::path& data_csv,
                                        const std::filesystem::path& windows_csv,
                                        const std::vector<std::string>& levels,
                                        bool windowed_convention);

// Sidecar with the true latent paths: subject_id,start,end,state (1-based).
void write_paths(const std::filesystem::path& file,
                 std::span<const SubjectRecord> subjects,
                 std::span<const LatentPath> paths);
std::vector<LatentPath> read_paths(const std::filesystem::path& file,
                                   std::span<const SubjectRecord> subjects);

// ---- parameters and samples -----------------------------------------------

// parameter,value rows in parameter_names() order.
void write_params(const std::filesystem::path& file, const ModelParams& params);

// iteration,loglik,<parameter columns...>
void write_samples(const std::filesystem::path& file,
                   std::span<const PosteriorSample> samples);
TraceTable read_samples(const std::filesystem::path& file);

// ---- experiment configuration ---------------------------------------------

struct SimulationBlock {
  ModelParams truth;
  CohortSpec cohort;
};

struct ExperimentConfig {
  std::string source;
  // Structure only: mask, outcome family and levels, known variances.
  ModelParams structure;
  bool windowed_convention = false;
  SamplerConfig sampler;
  // Start from the simulation truth instead of a prior draw.
  bool init_from_truth = false;
  std::optional<SimulationBlock> simulation;
  std::vector<std::string> warnings;
};

// YAML documents; errors are ConfigError with "<source>:<line>: " prefixes.
ExperimentConfig parse_config(const std::string& text,
                              const std::string& source = "<config>");
ExperimentConfig load_config(const std::filesystem::path& file);

}  // namespace mmpp
