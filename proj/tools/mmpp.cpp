#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>
#include <string>

#include "mmpp/errors.hpp"
#include "mmpp/experiment.hpp"

namespace {

constexpr int kConfigExit = 2;
constexpr int kDataExit = 3;
constexpr int kNumericExit = 4;

constexpr const char* kThreadsEnv = "MMPP_THREADS";

std::size_t default_threads() {
  const char* env = std::getenv(kThreadsEnv);
  if (env == nullptr || *env == '\0') return 1;
  try {
    std::size_t used = 0;
    const long v = std::stol(env, &used);
    if (used == std::string(env).size() && v >= 1) {
      return static_cast<std::size_t>(v);
    }
  } catch (const std::exception&) {
  }
  throw mmpp::ConfigError(std::string(kThreadsEnv) +
                          " must be a positive integer");
}

void print_warnings(const mmpp::ExperimentConfig& cfg) {
  for (const auto& w : cfg.warnings) std::cerr << "warning: " << w << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Markov-modulated Poisson process with outcomes and death"};
  app.require_subcommand(1);

  std::string config, out, data, samples, mode;
  std::size_t threads = 0;
  bool relabel = false, verbose = false;

  auto* sim = app.add_subcommand("simulate", "Simulate a cohort");
  sim->add_option("--config", config, "Experiment config")->required();
  sim->add_option("--out", out, "Output directory")->required();

  auto* fit = app.add_subcommand("fit", "Run the Gibbs sampler");
  fit->add_option("--config", config, "Experiment config")->required();
  fit->add_option("--data", data, "data.csv (windows.csv alongside)")
      ->required();
  fit->add_option("--out", out, "Output directory")->required();
  fit->add_option("--mode", mode, "Likelihood")
      ->check(CLI::IsMember({"mmpp", "cthmm-only"}));
  fit->add_option("--threads", threads,
                  std::string("Worker threads (default $") + kThreadsEnv +
                      " or 1)")
      ->check(CLI::PositiveNumber);
  fit->add_flag("--relabel", relabel,
                "Order live states by ascending event rate in exports");
  fit->add_flag("--verbose", verbose, "Report progress on stderr");

  auto* diag = app.add_subcommand("diagnose", "Summarize a sample export");
  diag->add_option("--samples", samples, "Directory written by fit")
      ->required();
  diag->add_option("--out", out, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kConfigExit;
  }

  try {
    if (sim->parsed()) {
      const auto cfg = mmpp::load_config(config);
      print_warnings(cfg);
      mmpp::run_simulate(cfg, out);
    } else if (fit->parsed()) {
      const auto cfg = mmpp::load_config(config);
      print_warnings(cfg);
      mmpp::FitOptions opts;
      if (!mode.empty()) {
        opts.mode = mode == "mmpp" ? mmpp::SamplerMode::kMmpp
                                   : mmpp::SamplerMode::kCthmmOnly;
      }
      opts.threads = threads > 0 ? threads : default_threads();
      opts.relabel = relabel;
      opts.quiet = !verbose;
      const auto result = mmpp::run_fit(cfg, data, out, opts);
      std::cout << "retained " << result.samples.size() << " samples\n";
    } else if (diag->parsed()) {
      const auto summaries = mmpp::run_diagnose(samples, out);
      std::size_t flagged = 0;
      for (const auto& s : summaries) flagged += s.flag != mmpp::IactFlag::kOk;
      std::cout << summaries.size() << " parameters, " << flagged
                << " flagged\n";
    }
  } catch (const mmpp::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigExit;
  } catch (const mmpp::DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kDataExit;
  } catch (const mmpp::InfeasibleData& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kNumericExit;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kDataExit;
  } catch (const std::exception& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kNumericExit;
  }
  return 0;
}
