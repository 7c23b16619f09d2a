#include "mmpp/io.hpp"

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "mmpp/errors.hpp"
#include "mmpp/format.hpp"

namespace mmpp {

namespace fs = std::filesystem;

namespace {

// ---- CSV helpers -----------------------------------------------------------

std::string trim(std::string s) {
  const auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) out.push_back(trim(field));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

struct CsvFile {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> line_numbers;
};

CsvFile read_csv(const fs::path& file, const std::vector<std::string>& header) {
  std::ifstream in(file);
  if (!in) throw DataError("cannot open " + file.string());
  CsvFile csv;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    auto fields = split_csv(line);
    if (csv.header.empty()) {
      csv.header = fields;
      if (csv.header != header) {
        throw DataError(file.string() + ":" + std::to_string(line_no) +
                        ": unexpected header");
      }
      continue;
    }
    if (fields.size() != header.size()) {
      throw DataError(file.string() + ":" + std::to_string(line_no) +
                      ": expected " + std::to_string(header.size()) +
                      " fields");
    }
    csv.rows.push_back(std::move(fields));
    csv.line_numbers.push_back(line_no);
  }
  if (csv.header.empty()) {
    throw DataError(file.string() + ": missing header");
  }
  return csv;
}

double parse_real(const std::string& s, const std::string& where) {
  double v = 0.0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  if (s == "nan" || s == "inf" || s == "-inf") {
    return s == "nan" ? std::numeric_limits<double>::quiet_NaN()
           : s == "inf" ? std::numeric_limits<double>::infinity()
                        : -std::numeric_limits<double>::infinity();
  }
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last) {
    throw DataError(where + ": '" + s + "' is not a number");
  }
  return v;
}

std::ofstream open_out(const fs::path& file) {
  if (file.has_parent_path()) fs::create_directories(file.parent_path());
  std::ofstream out(file);
  if (!out) throw DataError("cannot write " + file.string());
  return out;
}

// ---- YAML helpers ----------------------------------------------------------

class ConfigReader {
 public:
  explicit ConfigReader(std::string source) : source_(std::move(source)) {}

  [[noreturn]] void fail(const YAML::Node& at, const std::string& msg) const {
    const auto mark = at.Mark();
    const std::string line =
        mark.line >= 0 ? std::to_string(mark.line + 1) : std::string("?");
    throw ConfigError(source_ + ":" + line + ": " + msg);
  }

  void require_map(const YAML::Node& n, const std::string& what) const {
    if (!n.IsMap()) fail(n, what + " must be a mapping");
  }

  void check_keys(const YAML::Node& n, const std::set<std::string>& allowed,
                  const std::string& where) const {
    require_map(n, where);
    for (const auto& kv : n) {
      const auto key = kv.first.as<std::string>();
      if (!allowed.count(key)) {
        fail(kv.first, "unknown key '" + key + "' in " + where);
      }
    }
  }

  YAML::Node required(const YAML::Node& map, const std::string& key,
                      const std::string& where) const {
    const YAML::Node n = map[key];
    if (!n) fail(map, "missing required key '" + key + "' in " + where);
    return n;
  }

  template <typename T>
  T scalar(const YAML::Node& n, const std::string& what) const {
    if (!n.IsScalar()) fail(n, what + " must be a scalar");
    try {
      return n.as<T>();
    } catch (const YAML::Exception&) {
      fail(n, what + " has the wrong type");
    }
  }

  double real(const YAML::Node& n, const std::string& what) const {
    const double v = scalar<double>(n, what);
    if (!std::isfinite(v)) fail(n, what + " must be finite");
    return v;
  }

  std::vector<double> reals(const YAML::Node& n, const std::string& what) const {
    if (!n.IsSequence()) fail(n, what + " must be a list");
    std::vector<double> out;
    for (const auto& e : n) out.push_back(real(e, what));
    return out;
  }

  std::vector<std::vector<double>> matrix(const YAML::Node& n,
                                          const std::string& what) const {
    if (!n.IsSequence()) fail(n, what + " must be a list of rows");
    std::vector<std::vector<double>> out;
    for (const auto& row : n) out.push_back(reals(row, what));
    return out;
  }

  // A scalar broadcast to `count` entries, or a list of exactly `count`.
  std::vector<double> broadcast(const YAML::Node& n, std::size_t count,
                                const std::string& what) const {
    if (n.IsScalar()) return std::vector<double>(count, real(n, what));
    auto v = reals(n, what);
    if (v.size() != count) {
      fail(n, what + " needs " + std::to_string(count) + " entries");
    }
    return v;
  }

  // A scalar broadcast to rows x cols, or a rows x cols matrix, row-major.
  std::vector<double> broadcast_matrix(const YAML::Node& n, std::size_t rows,
                                       std::size_t cols,
                                       const std::string& what) const {
    if (n.IsScalar()) return std::vector<double>(rows * cols, real(n, what));
    const auto m = matrix(n, what);
    if (m.size() != rows) {
      fail(n, what + " needs " + std::to_string(rows) + " rows");
    }
    std::vector<double> out;
    for (const auto& r : m) {
      if (r.size() != cols) {
        fail(n, what + " needs " + std::to_string(cols) + " columns");
      }
      out.insert(out.end(), r.begin(), r.end());
    }
    return out;
  }

 private:
  std::string source_;
};

std::vector<std::size_t> live_states(const std::vector<bool>& death) {
  std::vector<std::size_t> live;
  for (std::size_t i = 0; i < death.size(); ++i) {
    if (!death[i]) live.push_back(i);
  }
  return live;
}

// Spreads live-state columns of a rows x live matrix into rows x K.
std::vector<double> expand_live(const std::vector<double>& live_values,
                                std::size_t rows,
                                const std::vector<bool>& death, double fill) {
  const auto live = live_states(death);
  const std::size_t k = death.size();
  std::vector<double> out(rows * k, fill);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t j = 0; j < live.size(); ++j) {
      out[r * k + live[j]] = live_values[r * live.size() + j];
    }
  }
  return out;
}

}  // namespace

// ---- datasets --------------------------------------------------------------

void write_dataset(const fs::path& data_csv, const fs::path& windows_csv,
                   std::span<const SubjectRecord> subjects,
                   const std::vector<std::string>& levels) {
  auto data = open_out(data_csv);
  auto windows = open_out(windows_csv);
  data << "subject_id,time,outcome,covariate\n";
  windows << "subject_id,window_end\n";
  for (const auto& s : subjects) {
    windows << s.subject_id << ',' << format_real(s.window_end) << '\n';
    for (std::size_t t = 0; t < s.size(); ++t) {
      const int level = s.covariates[t];
      if (level < 0 || static_cast<std::size_t>(level) >= levels.size()) {
        throw DataError("subject " + s.subject_id +
                        ": covariate level out of range");
      }
      data << s.subject_id << ',' << format_real(s.event_times[t]) << ','
           << format_real(s.outcomes[t]) << ','
           << levels[static_cast<std::size_t>(level)] << '\n';
    }
  }
  if (!data || !windows) throw DataError("failed writing dataset");
}

std::vector<SubjectRecord> read_dataset(const fs::path& data_csv,
                                        const fs::path& windows_csv,
                                        const std::vector<std::string>& levels,
                                        bool windowed_convention) {
  const auto windows = read_csv(windows_csv, {"subject_id", "window_end"});
  const auto data =
      read_csv(data_csv, {"subject_id", "time", "outcome", "covariate"});

  std::vector<SubjectRecord> subjects;
  std::map<std::string, std::size_t> index;
  for (std::size_t r = 0; r < windows.rows.size(); ++r) {
    const auto& row = windows.rows[r];
    const std::string where =
        windows_csv.string() + ":" + std::to_string(windows.line_numbers[r]);
    if (row[0].empty()) throw DataError(where + ": empty subject id");
    if (!index.emplace(row[0], subjects.size()).second) {
      throw DataError(where + ": duplicate subject " + row[0]);
    }
    SubjectRecord rec;
    rec.subject_id = row[0];
    rec.window_end = parse_real(row[1], where);
    rec.forced_first_event = windowed_convention;
    subjects.push_back(std::move(rec));
  }

  // Collect (time, outcome, level) per subject, then sort by time.
  struct Row {
    double time, outcome;
    int level;
  };
  std::vector<std::vector<Row>> rows(subjects.size());
  for (std::size_t r = 0; r < data.rows.size(); ++r) {
    const auto& row = data.rows[r];
    const std::string where =
        data_csv.string() + ":" + std::to_string(data.line_numbers[r]);
    const auto it = index.find(row[0]);
    if (it == index.end()) {
      throw DataError(where + ": subject " + row[0] +
                      " is not in the window table");
    }
    const auto lv = std::find(levels.begin(), levels.end(), row[3]);
    if (lv == levels.end()) {
      throw DataError(where + ": unknown covariate level '" + row[3] + "'");
    }
    rows[it->second].push_back({parse_real(row[1], where),
                                parse_real(row[2], where),
                                static_cast<int>(lv - levels.begin())});
  }
  for (std::size_t n = 0; n < subjects.size(); ++n) {
    auto& rs = rows[n];
    std::stable_sort(rs.begin(), rs.end(),
                     [](const Row& a, const Row& b) { return a.time < b.time; });
    auto& rec = subjects[n];
    for (const auto& r : rs) {
      rec.event_times.push_back(r.time);
      rec.outcomes.push_back(r.outcome);
      rec.covariates.push_back(r.level);
    }
    try {
      rec.validate();
    } catch (const InvalidInput& e) {
      throw DataError(data_csv.string() + ": " + e.what());
    }
  }
  return subjects;
}

void write_paths(const fs::path& file, std::span<const SubjectRecord> subjects,
                 std::span<const LatentPath> paths) {
  if (subjects.size() != paths.size()) {
    throw InvalidInput("one path per subject required");
  }
  auto out = open_out(file);
  out << "subject_id,start,end,state\n";
  for (std::size_t n = 0; n < paths.size(); ++n) {
    const auto& p = paths[n];
    double start = 0.0;
    for (std::size_t s = 0; s < p.states.size(); ++s) {
      const double end = s < p.jump_times.size() ? p.jump_times[s] : p.window_end;
      out << subjects[n].subject_id << ',' << format_real(start) << ','
          << format_real(end) << ',' << p.states[s] + 1 << '\n';
      start = end;
    }
  }
}

std::vector<LatentPath> read_paths(const fs::path& file,
                                   std::span<const SubjectRecord> subjects) {
  const auto csv = read_csv(file, {"subject_id", "start", "end", "state"});
  std::map<std::string, std::size_t> index;
  for (std::size_t n = 0; n < subjects.size(); ++n) {
    index[subjects[n].subject_id] = n;
  }
  std::vector<LatentPath> paths(subjects.size());
  for (std::size_t r = 0; r < csv.rows.size(); ++r) {
    const auto& row = csv.rows[r];
    const std::string where = file.string() + ":" +
                              std::to_string(csv.line_numbers[r]);
    const auto it = index.find(row[0]);
    if (it == index.end()) throw DataError(where + ": unknown subject");
    auto& p = paths[it->second];
    const double start = parse_real(row[1], where);
    const double end = parse_real(row[2], where);
    const int state = static_cast<int>(parse_real(row[3], where)) - 1;
    if (!p.states.empty()) p.jump_times.push_back(start);
    p.states.push_back(state);
    p.window_end = end;
  }
  for (std::size_t n = 0; n < paths.size(); ++n) {
    if (paths[n].states.empty()) {
      throw DataError(file.string() + ": no path for subject " +
                      subjects[n].subject_id);
    }
  }
  return paths;
}

// ---- parameters and samples -------------------------------------------------

void write_params(const fs::path& file, const ModelParams& params) {
  auto out = open_out(file);
  out << "parameter,value\n";
  const auto names = parameter_names(params);
  const auto values = parameter_values(params);
  for (std::size_t i = 0; i < names.size(); ++i) {
    out << names[i] << ',' << format_real(values[i]) << '\n';
  }
}

void write_samples(const fs::path& file,
                   std::span<const PosteriorSample> samples) {
  auto out = open_out(file);
  out << "iteration,loglik";
  if (samples.empty()) {
    out << '\n';
    return;
  }
  for (const auto& n : parameter_names(samples.front().params)) out << ',' << n;
  out << '\n';
  for (const auto& s : samples) {
    out << s.iteration << ',' << format_real(s.loglik);
    for (double v : parameter_values(s.params)) out << ',' << format_real(v);
    out << '\n';
  }
  if (!out) throw DataError("failed writing " + file.string());
}

TraceTable read_samples(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw DataError("cannot open " + file.string());
  std::string line;
  if (!std::getline(in, line)) throw DataError(file.string() + ": empty file");
  const auto header = split_csv(line);
  if (header.size() < 2 || header[0] != "iteration" || header[1] != "loglik") {
    throw DataError(file.string() + ":1: not a sample export");
  }
  TraceTable t;
  t.names.assign(header.begin() + 2, header.end());
  t.columns.assign(t.names.size(), {});
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    const auto fields = split_csv(line);
    const std::string where = file.string() + ":" + std::to_string(line_no);
    if (fields.size() != header.size()) {
      throw DataError(where + ": expected " + std::to_string(header.size()) +
                      " fields");
    }
    t.iterations.push_back(
        static_cast<std::size_t>(parse_real(fields[0], where)));
    t.loglik.push_back(parse_real(fields[1], where));
    for (std::size_t j = 0; j < t.names.size(); ++j) {
      t.columns[j].push_back(parse_real(fields[j + 2], where));
    }
  }
  return t;
}

// ---- configuration ------------------------------------------------------------

ExperimentConfig parse_config(const std::string& text,
                              const std::string& source) {
  ConfigReader rd(source);
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    throw ConfigError(source + ":" + std::to_string(e.mark.line + 1) + ": " +
                      e.msg);
  }
  if (!root || root.IsNull()) throw ConfigError(source + ": empty config");
  rd.check_keys(root, {"model", "prior", "sampler", "simulation"}, "config");

  ExperimentConfig cfg;
  cfg.source = source;

  // model -------------------------------------------------------------------
  const YAML::Node model = rd.required(root, "model", "config");
  rd.check_keys(model,
                {"states", "transitions", "windowed_convention", "outcome"},
                "model");
  const int k_signed = rd.scalar<int>(rd.required(model, "states", "model"),
                                      "model.states");
  if (k_signed < 1) rd.fail(model["states"], "model.states must be >= 1");
  const auto k = static_cast<std::size_t>(k_signed);

  std::vector<bool> free_mask(k * k, true);
  if (const auto tr = model["transitions"]) {
    const auto m = rd.broadcast_matrix(tr, k, k, "model.transitions");
    for (std::size_t i = 0; i < k * k; ++i) {
      if (m[i] != 0.0 && m[i] != 1.0) {
        rd.fail(tr, "model.transitions entries must be 0 or 1");
      }
      free_mask[i] = m[i] == 1.0;
    }
  }
  for (std::size_t i = 0; i < k; ++i) free_mask[i * k + i] = false;
  if (const auto w = model["windowed_convention"]) {
    cfg.windowed_convention = rd.scalar<bool>(w, "model.windowed_convention");
  }

  GeneratorMatrix structure_q(SquareMatrix(k), free_mask);
  const auto& death = structure_q.absorbing_mask();
  const auto live = live_states(death);
  if (live.empty()) rd.fail(model, "model needs at least one live state");

  const YAML::Node outcome = rd.required(model, "outcome", "model");
  rd.check_keys(outcome, {"family", "variance", "levels"}, "model.outcome");
  const auto family_name =
      rd.scalar<std::string>(rd.required(outcome, "family", "model.outcome"),
                             "model.outcome.family");
  OutcomeModel om;
  std::vector<std::string> levels{"none"};
  if (const auto lv = outcome["levels"]) {
    if (!lv.IsSequence() || lv.size() == 0) {
      rd.fail(lv, "model.outcome.levels must be a non-empty list");
    }
    levels.clear();
    for (const auto& l : lv) {
      levels.push_back(rd.scalar<std::string>(l, "covariate level"));
    }
    std::set<std::string> uniq(levels.begin(), levels.end());
    if (uniq.size() != levels.size()) rd.fail(lv, "duplicate covariate level");
  }
  if (family_name == "gaussian") {
    std::vector<double> var_live(live.size(), 1.0);
    if (const auto v = outcome["variance"]) {
      var_live = rd.broadcast(v, live.size(), "model.outcome.variance");
      for (double x : var_live) {
        if (!(x > 0.0)) rd.fail(v, "variances must be positive");
      }
    }
    om = OutcomeModel::gaussian(std::vector<double>(k, 0.0),
                                expand_live(var_live, 1, death, 1.0));
    om.levels = levels;
  } else if (family_name == "poisson_categorical") {
    if (outcome["variance"]) {
      rd.fail(outcome["variance"], "variance applies to gaussian outcomes");
    }
    om = OutcomeModel::poisson_categorical(
        levels, k, std::vector<double>(levels.size() * k, 1.0));
  } else {
    rd.fail(outcome["family"],
            "unknown outcome family '" + family_name +
                "' (expected gaussian or poisson_categorical)");
  }
  const std::size_t c_count = om.level_count();

  ModelParams structure;
  structure.q = structure_q;
  structure.lambda.assign(k, 0.0);
  structure.nu.assign(k, 0.0);
  for (std::size_t i : live) {
    structure.lambda[i] = 1.0;
    structure.nu[i] = 1.0 / static_cast<double>(live.size());
  }
  structure.outcome = om;
  cfg.structure = structure;

  // prior -------------------------------------------------------------------
  // Defaults: Gamma(1, 1/8) rates, flat Dirichlet, N(0, 1e4) means,
  // Gamma(0.1, 0.1) Poisson means.
  PriorConfig prior = PriorConfig::uniform(
      k, c_count, om.family, {1.0, 0.125}, {1.0, 0.125}, 1.0, 0.0, 1e4,
      {0.1, 0.1});
  if (const auto pr = root["prior"]) {
    rd.check_keys(pr, {"q", "lambda", "nu", "beta", "mu"}, "prior");
    if (const auto q = pr["q"]) {
      rd.check_keys(q, {"shape", "rate"}, "prior.q");
      const auto shape = rd.broadcast_matrix(rd.required(q, "shape", "prior.q"),
                                             k, k, "prior.q.shape");
      const auto rate = rd.broadcast_matrix(rd.required(q, "rate", "prior.q"),
                                            k, k, "prior.q.rate");
      for (std::size_t i = 0; i < k * k; ++i) prior.q[i] = {shape[i], rate[i]};
    }
    if (const auto l = pr["lambda"]) {
      rd.check_keys(l, {"shape", "rate"}, "prior.lambda");
      const auto shape = rd.broadcast(rd.required(l, "shape", "prior.lambda"),
                                      k, "prior.lambda.shape");
      const auto rate = rd.broadcast(rd.required(l, "rate", "prior.lambda"), k,
                                     "prior.lambda.rate");
      for (std::size_t i = 0; i < k; ++i) prior.lambda[i] = {shape[i], rate[i]};
    }
    if (const auto n = pr["nu"]) {
      rd.check_keys(n, {"concentration"}, "prior.nu");
      prior.nu_concentration =
          rd.broadcast(rd.required(n, "concentration", "prior.nu"), k,
                       "prior.nu.concentration");
    }
    if (const auto b = pr["beta"]) {
      if (om.family != OutcomeFamily::kGaussian) {
        rd.fail(b, "prior.beta applies to gaussian outcomes");
      }
      rd.check_keys(b, {"mean", "variance"}, "prior.beta");
      prior.normal_mean = rd.broadcast(rd.required(b, "mean", "prior.beta"), k,
                                       "prior.beta.mean");
      prior.normal_variance = rd.broadcast(
          rd.required(b, "variance", "prior.beta"), k, "prior.beta.variance");
    }
    if (const auto mu = pr["mu"]) {
      if (om.family != OutcomeFamily::kPoissonCategorical) {
        rd.fail(mu, "prior.mu applies to poisson_categorical outcomes");
      }
      rd.check_keys(mu, {"shape", "rate"}, "prior.mu");
      const auto shape = rd.broadcast_matrix(
          rd.required(mu, "shape", "prior.mu"), c_count, k, "prior.mu.shape");
      const auto rate = rd.broadcast_matrix(rd.required(mu, "rate", "prior.mu"),
                                            c_count, k, "prior.mu.rate");
      for (std::size_t i = 0; i < c_count * k; ++i) {
        prior.cell_mean[i] = {shape[i], rate[i]};
      }
    }
  }
  try {
    cfg.warnings = prior.validate(structure);
  } catch (const InvalidInput& e) {
    rd.fail(root["prior"] ? root["prior"] : root, e.what());
  }

  // sampler -----------------------------------------------------------------
  SamplerConfig& sc = cfg.sampler;
  sc.priors = prior;
  if (const auto s = root["sampler"]) {
    rd.check_keys(s,
                  {"iterations", "burn_in", "thinning", "seed", "mode", "init",
                   "threads", "init_chains", "pilot_sweeps"},
                  "sampler");
    auto count = [&](const char* key, std::size_t& dst) {
      if (const auto n = s[key]) {
        const long long v = rd.scalar<long long>(n, std::string("sampler.") + key);
        if (v < 0) rd.fail(n, std::string("sampler.") + key + " must be >= 0");
        dst = static_cast<std::size_t>(v);
      }
    };
    count("iterations", sc.iterations);
    count("burn_in", sc.burn_in);
    count("thinning", sc.thinning);
    count("threads", sc.threads);
    count("init_chains", sc.init_chains);
    count("pilot_sweeps", sc.pilot_sweeps);
    if (const auto n = s["seed"]) sc.seed = rd.scalar<std::uint64_t>(n, "seed");
    if (const auto n = s["mode"]) {
      const auto m = rd.scalar<std::string>(n, "sampler.mode");
      if (m == "mmpp") {
        sc.mode = SamplerMode::kMmpp;
      } else if (m == "cthmm-only") {
        sc.mode = SamplerMode::kCthmmOnly;
      } else {
        rd.fail(n, "sampler.mode must be mmpp or cthmm-only");
      }
    }
    if (const auto n = s["init"]) {
      const auto m = rd.scalar<std::string>(n, "sampler.init");
      if (m == "truth") {
        cfg.init_from_truth = true;
      } else if (m != "prior") {
        rd.fail(n, "sampler.init must be prior or truth");
      }
    }
    try {
      sc.validate();
    } catch (const InvalidInput& e) {
      rd.fail(s, e.what());
    }
  }

  // simulation --------------------------------------------------------------
  if (const auto sim = root["simulation"]) {
    rd.check_keys(sim, {"subjects", "window", "seed", "covariate_law", "truth"},
                  "simulation");
    SimulationBlock block;
    auto& cs = block.cohort;
    cs.windowed_convention = cfg.windowed_convention;
    const long long n = rd.scalar<long long>(
        rd.required(sim, "subjects", "simulation"), "simulation.subjects");
    if (n < 0) rd.fail(sim["subjects"], "simulation.subjects must be >= 0");
    cs.subjects = static_cast<std::size_t>(n);
    cs.window = rd.real(rd.required(sim, "window", "simulation"),
                        "simulation.window");
    if (!(cs.window > 0.0)) rd.fail(sim["window"], "window must be positive");
    if (const auto sd = sim["seed"]) {
      cs.seed = rd.scalar<std::uint64_t>(sd, "simulation.seed");
    }
    cs.covariate_law.assign(c_count, 1.0 / static_cast<double>(c_count));
    if (const auto law = sim["covariate_law"]) {
      cs.covariate_law = rd.reals(law, "simulation.covariate_law");
      if (cs.covariate_law.size() != c_count) {
        rd.fail(law, "covariate_law needs one probability per level");
      }
      double total = 0.0;
      for (double p : cs.covariate_law) {
        if (p < 0.0) rd.fail(law, "covariate probabilities must be >= 0");
        total += p;
      }
      if (std::abs(total - 1.0) > 1e-9) {
        rd.fail(law, "covariate probabilities must sum to one");
      }
    }

    const YAML::Node truth = rd.required(sim, "truth", "simulation");
    rd.check_keys(truth, {"q", "lambda", "nu", "beta", "mu", "log_linear"},
                  "simulation.truth");
    ModelParams t = structure;
    const YAML::Node qn = rd.required(truth, "q", "simulation.truth");
    try {
      const auto qv = rd.broadcast_matrix(qn, k, k, "simulation.truth.q");
      t.q = GeneratorMatrix::from_rates(SquareMatrix(k, qv), free_mask);
      // A supplied diagonal must agree with the rates.
      for (std::size_t i = 0; i < k; ++i) {
        if (qv[i * k + i] != 0.0 &&
            std::abs(qv[i * k + i] - t.q(i, i)) > 1e-9 * (1.0 + t.q.exit_rate(i))) {
          rd.fail(qn, "row " + std::to_string(i + 1) +
                          " of simulation.truth.q does not sum to zero");
        }
      }
    } catch (const InvalidInput& e) {
      rd.fail(qn, e.what());
    }
    t.lambda = rd.broadcast(rd.required(truth, "lambda", "simulation.truth"), k,
                            "simulation.truth.lambda");
    t.nu = rd.broadcast(rd.required(truth, "nu", "simulation.truth"), k,
                        "simulation.truth.nu");
    if (om.family == OutcomeFamily::kGaussian) {
      const YAML::Node b = rd.required(truth, "beta", "simulation.truth");
      t.outcome.means = expand_live(
          rd.broadcast(b, live.size(), "simulation.truth.beta"), 1, death, 0.0);
    } else {
      const YAML::Node mu = truth["mu"];
      const YAML::Node ll = truth["log_linear"];
      if (static_cast<bool>(mu) == static_cast<bool>(ll)) {
        rd.fail(truth, "give exactly one of simulation.truth.mu or log_linear");
      }
      if (mu) {
        t.outcome.means = expand_live(
            rd.broadcast_matrix(mu, c_count, live.size(), "simulation.truth.mu"),
            c_count, death, 1.0);
      } else {
        const auto coef = rd.broadcast_matrix(ll, c_count, live.size(),
                                              "simulation.truth.log_linear");
        t.outcome.means = expand_live(
            OutcomeModel::cell_means_from_log_linear(coef, c_count, live.size()),
            c_count, death, 1.0);
      }
    }
    try {
      t.validate();
    } catch (const InvalidInput& e) {
      rd.fail(truth, e.what());
    }
    block.truth = std::move(t);
    cfg.simulation = std::move(block);
  }
  if (cfg.init_from_truth && !cfg.simulation) {
    rd.fail(root["sampler"], "sampler.init: truth needs a simulation block");
  }
  return cfg;
}

ExperimentConfig load_config(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw ConfigError(file.string() + ": cannot open config");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), file.string());
}

}  // namespace mmpp
