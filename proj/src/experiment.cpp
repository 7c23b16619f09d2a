#include "mmpp/experiment.hpp"

#include <cmath>
#include <fstream>
#include <iostream>
#include <nlohmann/json.hpp>

#include "mmpp/errors.hpp"
#include "mmpp/simulator.hpp"

namespace mmpp {

namespace fs = std::filesystem;

namespace {

const SimulationBlock& simulation_of(const ExperimentConfig& config) {
  if (!config.simulation) {
    throw ConfigError(config.source + ": no simulation block");
  }
  return *config.simulation;
}

nlohmann::json number_or_null(double x) {
  return std::isfinite(x) ? nlohmann::json(x) : nlohmann::json(nullptr);
}

void write_summary_json(const fs::path& file, const SamplerConfig& sampler,
                        std::size_t retained,
                        const std::vector<TraceSummary>& summaries) {
  nlohmann::json doc;
  doc["mode"] = sampler.mode == SamplerMode::kMmpp ? "mmpp" : "cthmm-only";
  doc["seed"] = sampler.seed;
  doc["iterations"] = sampler.iterations;
  doc["burn_in"] = sampler.burn_in;
  doc["thinning"] = sampler.thinning;
  doc["retained"] = retained;
  auto& params = doc["parameters"] = nlohmann::json::array();
  for (const auto& s : summaries) {
    params.push_back({{"name", s.parameter},
                      {"median", number_or_null(s.median)},
                      {"lo95", number_or_null(s.lower95)},
                      {"hi95", number_or_null(s.upper95)},
                      {"iact", number_or_null(s.iact)},
                      {"ess", number_or_null(s.ess)},
                      {"flag", to_string(s.flag)}});
  }
  std::ofstream out(file);
  if (!out) throw DataError("cannot write " + file.string());
  out << doc.dump(2) << '\n';
}

void relabel_samples(std::vector<PosteriorSample>& samples) {
  for (auto& s : samples) s.params = relabel_by_event_rate(s.params);
}

}  // namespace

void run_simulate(const ExperimentConfig& config, const fs::path& out_dir) {
  const auto& sim = simulation_of(config);
  const auto cohort = simulate_cohort(sim.truth, sim.cohort);
  std::vector<SubjectRecord> records;
  std::vector<LatentPath> paths;
  records.reserve(cohort.size());
  paths.reserve(cohort.size());
  for (const auto& s : cohort) {
    records.push_back(s.record);
    paths.push_back(s.path);
  }
  fs::create_directories(out_dir);
  write_dataset(out_dir / kDataFile, out_dir / kWindowsFile, records,
                sim.truth.outcome.levels);
  write_params(out_dir / kTruthFile, sim.truth);
  write_paths(out_dir / kPathsFile, records, paths);
}

FitResult run_fit(const ExperimentConfig& config, const fs::path& data,
                  const fs::path& out_dir, const FitOptions& options) {
  const fs::path windows = data.parent_path() / kWindowsFile;
  if (!fs::exists(data)) throw DataError(data.string() + ": no such file");
  if (!fs::exists(windows)) {
    throw DataError(windows.string() + ": window table not found");
  }
  const auto records =
      read_dataset(data, windows, config.structure.outcome.levels,
                   config.windowed_convention);

  SamplerConfig sampler = config.sampler;
  if (options.mode) sampler.mode = *options.mode;
  if (options.threads) sampler.threads = *options.threads;
  sampler.validate();

  std::optional<ModelParams> init;
  if (config.init_from_truth) init = simulation_of(config).truth;

  ProgressCallback progress;
  if (!options.quiet) {
    const std::size_t step = std::max<std::size_t>(1, sampler.iterations / 20);
    progress = [&](std::size_t sweep) {
      if (sweep % step == 0 || sweep == sampler.iterations) {
        std::cerr << "sweep " << sweep << "/" << sampler.iterations << '\n';
      }
    };
  }

  FitResult result;
  result.samples =
      run_chain(sampler, records, config.structure, init, progress);
  if (options.relabel) relabel_samples(result.samples);

  fs::create_directories(out_dir);
  write_samples(out_dir / kSamplesFile, result.samples);
  if (result.samples.empty()) {
    write_summary_json(out_dir / kSummaryJson, sampler, 0, {});
    return result;
  }
  const auto table = to_trace_table(result.samples);
  result.summaries = summarize(table);
  write_diagnostics(table, result.summaries, out_dir);
  write_summary_json(out_dir / kSummaryJson, sampler, result.samples.size(),
                     result.summaries);
  return result;
}

std::vector<TraceSummary> run_diagnose(const fs::path& samples_dir,
                                       const fs::path& out_dir) {
  const fs::path file = samples_dir / kSamplesFile;
  if (!fs::is_directory(samples_dir)) {
    throw DataError(samples_dir.string() + ": not a directory");
  }
  if (!fs::exists(file)) throw DataError(file.string() + ": no sample export");
  const auto table = read_samples(file);
  if (table.rows() == 0) throw DataError(file.string() + ": no samples");
  const auto summaries = summarize(table);
  write_diagnostics(table, summaries, out_dir);
  return summaries;
}

Replication run_replication(const ExperimentConfig& config,
                            std::size_t replicate, bool relabel,
                            std::optional<SamplerMode> mode,
                            std::size_t threads) {
  const auto& sim = simulation_of(config);
  CohortSpec cohort = sim.cohort;
  cohort.seed = sim.cohort.seed + 7919 * replicate;
  const auto simulated = simulate_cohort(sim.truth, cohort);
  std::vector<SubjectRecord> records;
  records.reserve(simulated.size());
  for (const auto& s : simulated) records.push_back(s.record);

  SamplerConfig sampler = config.sampler;
  sampler.seed = config.sampler.seed + 104729 * replicate;
  sampler.threads = threads;
  if (mode) sampler.mode = *mode;

  std::optional<ModelParams> init;
  if (config.init_from_truth) init = sim.truth;

  Replication rep;
  rep.truth = relabel ? relabel_by_event_rate(sim.truth) : sim.truth;
  rep.samples = run_chain(sampler, records, config.structure, init);
  if (relabel) relabel_samples(rep.samples);
  rep.summaries = summarize(rep.samples);

  const auto names = parameter_names(rep.truth);
  const auto values = parameter_values(rep.truth);
  for (const auto& s : rep.summaries) {
    for (std::size_t i = 0; i < names.size(); ++i) {
      if (names[i] == s.parameter) {
        rep.coverage.emplace_back(
            s.parameter, s.lower95 <= values[i] && values[i] <= s.upper95);
      }
    }
  }
  return rep;
}

}  // namespace mmpp
