#include "mmpp/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include "mmpp/errors.hpp"
#include "mmpp/format.hpp"

namespace mmpp {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string idx(std::size_t k) { return std::to_string(k + 1); }

struct Centered {
  std::vector<double> x;
  double c0 = 0.0;
};

Centered center(std::span<const double> trace) {
  Centered c;
  const double n = static_cast<double>(trace.size());
  const double mean = std::accumulate(trace.begin(), trace.end(), 0.0) / n;
  c.x.resize(trace.size());
  for (std::size_t i = 0; i < trace.size(); ++i) {
    c.x[i] = trace[i] - mean;
    c.c0 += c.x[i] * c.x[i];
  }
  c.c0 /= n;
  return c;
}

double autocov(const std::vector<double>& x, std::size_t lag) {
  double acc = 0.0;
  for (std::size_t i = 0; i + lag < x.size(); ++i) acc += x[i] * x[i + lag];
  return acc / static_cast<double>(x.size());
}

bool is_constant(std::span<const double> trace) {
  return std::all_of(trace.begin(), trace.end(),
                     [&](double v) { return v == trace.front(); });
}

}  // namespace

double iact(std::span<const double> trace) {
  if (trace.size() < 10) {
    throw InvalidInput("IACT needs at least 10 samples");
  }
  if (is_constant(trace)) throw InvalidInput("IACT undefined: constant trace");
  const Centered c = center(trace);
  if (!(c.c0 > 0.0)) throw InvalidInput("IACT undefined: zero variance");

  const std::size_t n = trace.size();
  double sum = 0.0;  // sum of Gamma_m = rho_{2m} + rho_{2m+1}
  for (std::size_t m = 0; 2 * m + 1 < n; ++m) {
    const double rho_even = m == 0 ? 1.0 : autocov(c.x, 2 * m) / c.c0;
    const double rho_odd = autocov(c.x, 2 * m + 1) / c.c0;
    const double pair = rho_even + rho_odd;
    if (!(pair > 0.0)) break;
    sum += pair;
  }
  return std::max(-1.0 + 2.0 * sum, 1.0 / static_cast<double>(n));
}

std::vector<double> autocorrelation(std::span<const double> trace,
                                    std::size_t max_lag) {
  if (trace.empty()) throw InvalidInput("autocorrelation of an empty trace");
  const Centered c = center(trace);
  const std::size_t lags = std::min(max_lag, trace.size() - 1);
  std::vector<double> acf(lags + 1, kNaN);
  if (!(c.c0 > 0.0)) return acf;
  for (std::size_t k = 0; k <= lags; ++k) acf[k] = autocov(c.x, k) / c.c0;
  return acf;
}

double quantile_sorted(std::span<const double> sorted, double prob) {
  if (sorted.empty()) throw InvalidInput("quantile of an empty sample");
  if (!(prob >= 0.0 && prob <= 1.0)) {
    throw InvalidInput("quantile level must lie in [0, 1]");
  }
  const double h = (static_cast<double>(sorted.size()) - 1.0) * prob;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

const char* to_string(IactFlag flag) {
  switch (flag) {
    case IactFlag::kOk:
      return "ok";
    case IactFlag::kLowConfidence:
      return "low_ess";
    case IactFlag::kUndefined:
      return "undefined";
  }
  return "?";
}

TraceSummary summarize_trace(const std::string& name,
                             std::span<const double> trace) {
  if (trace.empty()) throw InvalidInput("no samples for " + name);
  TraceSummary s;
  s.parameter = name;
  s.count = trace.size();
  std::vector<double> sorted(trace.begin(), trace.end());
  std::sort(sorted.begin(), sorted.end());
  s.median = quantile_sorted(sorted, 0.5);
  s.lower95 = quantile_sorted(sorted, 0.025);
  s.upper95 = quantile_sorted(sorted, 0.975);
  if (trace.size() < 10 || is_constant(trace)) {
    s.iact = kNaN;
    s.ess = kNaN;
    s.flag = IactFlag::kUndefined;
    return s;
  }
  s.iact = iact(trace);
  s.ess = static_cast<double>(trace.size()) / s.iact;
  s.flag = s.ess < kMinReliableEss ? IactFlag::kLowConfidence : IactFlag::kOk;
  return s;
}

const std::vector<double>& TraceTable::column(const std::string& name) const {
  const auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) throw InvalidInput("no trace named " + name);
  return columns[static_cast<std::size_t>(it - names.begin())];
}

std::vector<std::string> parameter_names(const ModelParams& p) {
  const std::size_t k = p.states();
  std::vector<std::string> names;
  for (std::size_t i = 0; i < k; ++i) {
    if (!p.is_death(i)) names.push_back("lambda_" + idx(i));
  }
  for (std::size_t l = 0; l < k; ++l) {
    for (std::size_t m = 0; m < k; ++m) {
      if (p.q.is_free(l, m)) names.push_back("q_" + idx(l) + "_" + idx(m));
    }
  }
  for (std::size_t i = 0; i < k; ++i) {
    if (!p.is_death(i)) names.push_back("nu_" + idx(i));
  }
  const auto& o = p.outcome;
  if (o.family == OutcomeFamily::kGaussian) {
    for (std::size_t i = 0; i < k; ++i) {
      if (!p.is_death(i)) names.push_back("beta_" + idx(i));
    }
  } else {
    for (std::size_t c = 0; c < o.level_count(); ++c) {
      for (std::size_t i = 0; i < k; ++i) {
        if (!p.is_death(i)) names.push_back("mu_" + o.levels[c] + "_" + idx(i));
      }
    }
    for (std::size_t d = 0; d < o.level_count(); ++d) {
      for (std::size_t i = 0; i < k; ++i) {
        if (!p.is_death(i)) names.push_back("b_" + idx(d) + "_" + idx(i));
      }
    }
  }
  return names;
}

std::vector<double> parameter_values(const ModelParams& p) {
  const std::size_t k = p.states();
  std::vector<double> v;
  for (std::size_t i = 0; i < k; ++i) {
    if (!p.is_death(i)) v.push_back(p.lambda[i]);
  }
  for (std::size_t l = 0; l < k; ++l) {
    for (std::size_t m = 0; m < k; ++m) {
      if (p.q.is_free(l, m)) v.push_back(p.q(l, m));
    }
  }
  for (std::size_t i = 0; i < k; ++i) {
    if (!p.is_death(i)) v.push_back(p.nu[i]);
  }
  const auto& o = p.outcome;
  if (o.family == OutcomeFamily::kGaussian) {
    for (std::size_t i = 0; i < k; ++i) {
      if (!p.is_death(i)) v.push_back(o.means[i]);
    }
  } else {
    for (std::size_t c = 0; c < o.level_count(); ++c) {
      for (std::size_t i = 0; i < k; ++i) {
        if (!p.is_death(i)) v.push_back(o.means[c * k + i]);
      }
    }
    // Death cells carry no parameters; give them a unit mean so the log is
    // defined, then skip them.
    OutcomeModel live = o;
    for (std::size_t c = 0; c < o.level_count(); ++c) {
      for (std::size_t i = 0; i < k; ++i) {
        if (p.is_death(i)) live.means[c * k + i] = 1.0;
      }
    }
    const auto b = live.log_linear_coefficients();
    for (std::size_t d = 0; d < o.level_count(); ++d) {
      for (std::size_t i = 0; i < k; ++i) {
        if (!p.is_death(i)) v.push_back(b[d * k + i]);
      }
    }
  }
  return v;
}

TraceTable to_trace_table(std::span<const PosteriorSample> samples) {
  TraceTable t;
  if (samples.empty()) return t;
  t.names = parameter_names(samples.front().params);
  t.columns.assign(t.names.size(), {});
  for (auto& c : t.columns) c.reserve(samples.size());
  for (const auto& s : samples) {
    t.iterations.push_back(s.iteration);
    t.loglik.push_back(s.loglik);
    const auto v = parameter_values(s.params);
    for (std::size_t j = 0; j < v.size(); ++j) t.columns[j].push_back(v[j]);
  }
  return t;
}

std::vector<TraceSummary> summarize(const TraceTable& table) {
  if (table.rows() == 0) throw InvalidInput("no posterior samples to summarise");
  std::vector<TraceSummary> out;
  out.reserve(table.names.size());
  for (std::size_t j = 0; j < table.names.size(); ++j) {
    out.push_back(summarize_trace(table.names[j], table.columns[j]));
  }
  return out;
}

std::vector<TraceSummary> summarize(std::span<const PosteriorSample> samples) {
  if (samples.empty()) throw InvalidInput("no posterior samples to summarise");
  return summarize(to_trace_table(samples));
}

void write_diagnostics(const TraceTable& table,
                       const std::vector<TraceSummary>& summaries,
                       const std::filesystem::path& dir, std::size_t acf_lags,
                       std::size_t hist_bins) {
  std::filesystem::create_directories(dir);
  auto open = [](const std::filesystem::path& p) {
    std::ofstream f(p);
    if (!f) throw InvalidInput("cannot write " + p.string());
    return f;
  };
  {
    auto f = open(dir / "summary.csv");
    f << "parameter,median,lo95,hi95,iact,ess,flag\n";
    for (const auto& s : summaries) {
      f << s.parameter << ',' << format_real(s.median) << ','
        << format_real(s.lower95) << ',' << format_real(s.upper95) << ','
        << format_real(s.iact) << ',' << format_real(s.ess) << ','
        << to_string(s.flag) << '\n';
    }
  }
  for (std::size_t j = 0; j < table.names.size(); ++j) {
    const auto& name = table.names[j];
    const auto& col = table.columns[j];
    {
      auto f = open(dir / ("trace_" + name + ".csv"));
      f << "iteration,value\n";
      for (std::size_t r = 0; r < col.size(); ++r) {
        f << table.iterations[r] << ',' << format_real(col[r]) << '\n';
      }
    }
    {
      auto f = open(dir / ("acf_" + name + ".csv"));
      f << "lag,acf\n";
      const auto acf = autocorrelation(col, acf_lags);
      for (std::size_t k = 0; k < acf.size(); ++k) {
        f << k << ',' << format_real(acf[k]) << '\n';
      }
    }
    {
      auto f = open(dir / ("hist_" + name + ".csv"));
      f << "lower,upper,count\n";
      const auto [lo_it, hi_it] = std::minmax_element(col.begin(), col.end());
      const double lo = *lo_it;
      const double hi = *hi_it;
      const std::size_t bins = hi > lo ? hist_bins : 1;
      const double width = hi > lo ? (hi - lo) / static_cast<double>(bins) : 0.0;
      std::vector<std::size_t> counts(bins, 0);
      for (double x : col) {
        std::size_t b =
            width > 0.0 ? static_cast<std::size_t>((x - lo) / width) : 0;
        counts[std::min(b, bins - 1)]++;
      }
      for (std::size_t b = 0; b < bins; ++b) {
        const double a = lo + width * static_cast<double>(b);
        const double z = b + 1 == bins ? hi : a + width;
        f << format_real(a) << ',' << format_real(z) << ',' << counts[b]
          << '\n';
      }
    }
  }
}

ModelParams relabel_by_event_rate(const ModelParams& params) {
  const std::size_t k = params.states();
  std::vector<std::size_t> live;
  for (std::size_t i = 0; i < k; ++i) {
    if (!params.is_death(i)) live.push_back(i);
  }
  auto outcome_mean = [&](std::size_t i) {
    double s = 0.0;
    const auto& o = params.outcome;
    for (std::size_t c = 0; c < o.level_count(); ++c) {
      s += o.mean(static_cast<int>(c), static_cast<int>(i));
    }
    return s / static_cast<double>(o.level_count());
  };
  std::vector<std::size_t> order = live;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (params.lambda[a] != params.lambda[b]) {
      return params.lambda[a] < params.lambda[b];
    }
    return outcome_mean(a) < outcome_mean(b);
  });
  // perm[old] = new
  std::vector<std::size_t> perm(k);
  for (std::size_t i = 0; i < k; ++i) perm[i] = i;
  for (std::size_t r = 0; r < live.size(); ++r) perm[order[r]] = live[r];

  const auto& mask = params.q.free_mask();
  std::vector<bool> new_mask(k * k, false);
  for (std::size_t l = 0; l < k; ++l) {
    for (std::size_t m = 0; m < k; ++m) {
      new_mask[perm[l] * k + perm[m]] = mask[l * k + m];
    }
  }
  if (new_mask != mask) return params;  // permutation would break structure

  ModelParams out = params;
  SquareMatrix rates(k);
  for (std::size_t l = 0; l < k; ++l) {
    for (std::size_t m = 0; m < k; ++m) {
      if (l != m) rates(perm[l], perm[m]) = params.q(l, m);
    }
  }
  out.q = GeneratorMatrix::from_rates(rates, mask);
  auto& o = out.outcome;
  for (std::size_t i = 0; i < k; ++i) {
    out.lambda[perm[i]] = params.lambda[i];
    out.nu[perm[i]] = params.nu[i];
    if (o.family == OutcomeFamily::kGaussian) {
      o.means[perm[i]] = params.outcome.means[i];
      o.variances[perm[i]] = params.outcome.variances[i];
    } else {
      for (std::size_t c = 0; c < o.level_count(); ++c) {
        o.means[c * k + perm[i]] = params.outcome.means[c * k + i];
      }
    }
  }
  return out;
}

}  // namespace mmpp
