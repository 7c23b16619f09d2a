#include <doctest.h>

#include <cmath>
#include <map>

#include "fixtures.hpp"
#include "mmpp/errors.hpp"
#include "mmpp/forward_backward.hpp"
#include "mmpp/linalg.hpp"
#include "oracles.hpp"

using mmpp::FilterMode;

namespace {

mmpp::ModelParams single_state(double lambda, double mean) {
  mmpp::ModelParams p;
  p.q = mmpp::GeneratorMatrix(mmpp::SquareMatrix{{0.0}});
  p.lambda = {lambda};
  p.nu = {1.0};
  p.outcome = mmpp::OutcomeModel::gaussian({mean}, {1.0});
  return p;
}

double normal_logpdf(double x, double m, double v) {
  return -0.5 * std::log(2.0 * M_PI * v) - 0.5 * (x - m) * (x - m) / v;
}

std::size_t tuple_index(const std::vector<int>& states, std::size_t k) {
  std::size_t idx = 0;
  for (int s : states) idx = idx * k + static_cast<std::size_t>(s);
  return idx;
}

}  // namespace

TEST_CASE("single-state log marginal has a closed form") {
  const auto p = single_state(3.0, 0.5);
  for (bool windowed : {false, true}) {
    mmpp::SubjectRecord r;
    r.window_end = 4.0;
    r.forced_first_event = windowed;
    r.event_times = windowed ? std::vector<double>{0.0, 1.0, 2.5}
                             : std::vector<double>{1.0, 2.5};
    r.outcomes.assign(r.event_times.size(), 0.2);
    r.covariates.assign(r.event_times.size(), 0);
    const auto lat = mmpp::forward_filter(p, r);
    for (std::size_t n = 0; n < lat.nodes(); ++n) CHECK(lat.alpha_at(n)[0] == 1.0);
    const double counted = static_cast<double>(r.counted_events());
    const double want = static_cast<double>(r.size()) * normal_logpdf(0.2, 0.5, 1.0) +
                        counted * std::log(3.0) - 3.0 * 4.0;
    CHECK(lat.log_marginal() == doctest::Approx(want).epsilon(1e-12));
  }
}

TEST_CASE("one windowed event: alpha at the window end by hand") {
  const auto p = fixture::two_state();
  mmpp::SubjectRecord r;
  r.window_end = 0.8;
  r.forced_first_event = true;
  r.event_times = {0.0};
  r.outcomes = {0.3};
  r.covariates = {0};
  const auto lat = mmpp::forward_filter(p, r);
  REQUIRE(lat.nodes() == 2);
  const auto eta = mmpp::eta_matrix(p.q.matrix(), p.lambda, 0.8);
  std::vector<double> a1(2), ae(2, 0.0);
  for (std::size_t j = 0; j < 2; ++j) {
    a1[j] = p.nu[j] * std::exp(normal_logpdf(0.3, p.outcome.means[j], 1.0));
  }
  for (std::size_t i = 0; i < 2; ++i) {
    for (std::size_t j = 0; j < 2; ++j) ae[j] += a1[i] * eta(i, j);
  }
  const double total = ae[0] + ae[1];
  CHECK(lat.alpha_at(1)[0] == doctest::Approx(ae[0] / total).epsilon(1e-12));
  CHECK(lat.log_marginal() == doctest::Approx(std::log(total)).epsilon(1e-12));
}

TEST_CASE("log marginal matches the discretized-HMM oracle") {
  std::mt19937_64 rng(21);
  for (int rep = 0; rep < 6; ++rep) {
    const auto p = fixture::random_params(2, rng);
    const bool windowed = rep % 2 == 1;
    const auto r = fixture::random_record(6, 3.0, windowed, rng);
    const double got = mmpp::forward_filter(p, r).log_marginal();
    const double want = oracle::discretized_log_marginal(p, r, 1e-4 * r.window_end);
    CHECK(std::abs(got - want) < 1e-3);
  }
}

TEST_CASE("scaled forward vectors are probability vectors") {
  std::mt19937_64 rng(22);
  const auto p = fixture::random_params(3, rng);
  const auto r = fixture::random_record(200, 40.0, true, rng);
  const auto lat = mmpp::forward_filter(p, r);
  for (std::size_t n = 0; n < lat.nodes(); ++n) {
    double s = 0.0;
    for (double a : lat.alpha_at(n)) s += a;
    CHECK(std::abs(s - 1.0) < 1e-12);
  }
  CHECK(std::isfinite(lat.log_marginal()));
}

TEST_CASE("impossible outcome raises infeasible data naming the event") {
  const auto p = fixture::three_state_death();
  mmpp::SubjectRecord r;
  r.window_end = 2.0;
  r.forced_first_event = true;
  r.event_times = {0.0, 0.5, 1.0};
  r.outcomes = {1.0, 2.5, 0.0};  // non-integer count
  r.covariates = {0, 1, 1};
  try {
    mmpp::forward_filter(p, r);
    FAIL("expected InfeasibleData");
  } catch (const mmpp::InfeasibleData& e) {
    CHECK(e.event_index() == 1);
  }
}

TEST_CASE("death is excluded at event nodes and allowed at the window end") {
  const auto p = fixture::three_state_death();
  std::mt19937_64 rng(23);
  mmpp::Rng draw_rng = mmpp::substream(23, 1);
  mmpp::SubjectRecord r;
  r.window_end = 40.0;
  r.forced_first_event = true;
  r.event_times = {0.0, 0.3, 0.9};
  r.outcomes = {1.0, 0.0, 2.0};
  r.covariates = {0, 1, 0};
  const auto lat = mmpp::forward_filter(p, r);
  for (std::size_t n = 0; n + 1 < lat.nodes(); ++n) CHECK(lat.alpha_at(n)[2] == 0.0);
  CHECK(lat.alpha_at(lat.nodes() - 1)[2] > 0.5);
  for (int i = 0; i < 1000; ++i) {
    const auto d = mmpp::backward_sample(lat, p, draw_rng);
    for (std::size_t n = 0; n + 1 < d.states.size(); ++n) CHECK(d.states[n] != 2);
  }
}

TEST_CASE("single-state backward draw is deterministic") {
  const auto p = single_state(2.0, 0.0);
  std::mt19937_64 rng(24);
  const auto r = fixture::random_record(5, 3.0, false, rng);
  const auto lat = mmpp::forward_filter(p, r);
  mmpp::Rng draw_rng = mmpp::substream(24, 1);
  const auto d = mmpp::backward_sample(lat, p, draw_rng);
  CHECK(d.states == std::vector<int>(lat.nodes(), 0));
}

TEST_CASE("backward draws match exhaustive enumeration") {
  std::mt19937_64 rng(25);
  for (int rep = 0; rep < 4; ++rep) {
    const std::size_t k = rep < 2 ? 2 : 3;
    const auto p = fixture::random_params(k, rng);
    const auto r = fixture::random_record(rep < 2 ? 3 : 2, 1.5, rep % 2 == 0, rng);
    const auto lat = mmpp::forward_filter(p, r);
    const auto post = oracle::enumerate_node_posterior(p, r);
    REQUIRE(post.size() == static_cast<std::size_t>(std::pow(k, lat.nodes())));
    mmpp::Rng draw_rng = mmpp::substream(25, static_cast<std::uint64_t>(rep));
    const int n = 200000;
    std::vector<double> freq(post.size(), 0.0);
    for (int i = 0; i < n; ++i) {
      freq[tuple_index(mmpp::backward_sample(lat, p, draw_rng).states, k)] += 1.0;
    }
    for (std::size_t c = 0; c < post.size(); ++c) {
      const double se = std::sqrt(std::max(post[c] * (1.0 - post[c]), 1e-12) / n);
      CHECK(std::abs(freq[c] / n - post[c]) < 4.0 * se + 1e-9);
    }
  }
}

TEST_CASE("final-state draws follow the filtered distribution") {
  std::mt19937_64 rng(26);
  const auto p = fixture::random_params(3, rng);
  const auto r = fixture::random_record(8, 4.0, false, rng);
  const auto lat = mmpp::forward_filter(p, r);
  const auto ae = lat.alpha_at(lat.nodes() - 1);
  mmpp::Rng draw_rng = mmpp::substream(26, 1);
  const int n = 100000;
  std::vector<double> freq(3, 0.0);
  for (int i = 0; i < n; ++i) {
    freq[static_cast<std::size_t>(mmpp::backward_sample(lat, p, draw_rng).states.back())] += 1;
  }
  for (std::size_t j = 0; j < 3; ++j) {
    const double se = std::sqrt(ae[j] * (1.0 - ae[j]) / n);
    CHECK(std::abs(freq[j] / n - ae[j]) < 3.0 * se + 1e-9);
  }
}

TEST_CASE("the event-rate factor cancels in the backward probabilities") {
  std::mt19937_64 rng(27);
  const auto p = fixture::random_params(3, rng);
  const auto r = fixture::random_record(5, 2.0, true, rng);
  const auto lat = mmpp::forward_filter(p, r);
  for (std::size_t node = 0; node + 1 < lat.nodes(); ++node) {
    for (int next = 0; next < 3; ++next) {
      const auto a = mmpp::backward_probabilities(lat, p, node, next, false);
      const auto b = mmpp::backward_probabilities(lat, p, node, next, true);
      for (std::size_t j = 0; j < 3; ++j) {
        CHECK(a[j] == doctest::Approx(b[j]).epsilon(1e-14));
      }
    }
  }
}

TEST_CASE("rescaling rates and time leaves filtered distributions unchanged") {
  std::mt19937_64 rng(28);
  const auto p = fixture::random_params(3, rng);
  const auto r = fixture::random_record(10, 5.0, false, rng);
  const double c = 3.7;
  auto ps = p;
  ps.q = mmpp::GeneratorMatrix(p.q.matrix().scaled(c));
  for (double& l : ps.lambda) l *= c;
  auto rs = r;
  for (double& t : rs.event_times) t /= c;
  rs.window_end /= c;
  const auto a = mmpp::forward_filter(p, r);
  const auto b = mmpp::forward_filter(ps, rs);
  for (std::size_t i = 0; i < a.alpha.size(); ++i) {
    CHECK(std::abs(a.alpha[i] - b.alpha[i]) < 1e-10);
  }
  // Densities pick up a factor c per counted event.
  CHECK(b.log_marginal() - a.log_marginal() ==
        doctest::Approx(static_cast<double>(r.counted_events()) * std::log(c))
            .epsilon(1e-9));
}

TEST_CASE("CTHMM-only filtering ignores event times") {
  const auto p = fixture::two_state();
  mmpp::SubjectRecord a;
  a.window_end = 5.0;
  a.event_times = {1.0, 2.0};
  a.outcomes = {0.5, -0.5};
  a.covariates = {0, 0};
  const auto lat = mmpp::forward_filter(p, a, FilterMode::kCthmmOnly);
  // Oracle: nu P(1) f(o1) P(1) f(o2) P(3), with P the plain transition matrix.
  const auto p1 = mmpp::expm(p.q.matrix(), 1.0);
  const auto p3 = mmpp::expm(p.q.matrix(), 3.0);
  std::vector<double> v = p.nu;
  auto step = [&](const mmpp::SquareMatrix& m) {
    std::vector<double> out(2, 0.0);
    for (std::size_t i = 0; i < 2; ++i)
      for (std::size_t j = 0; j < 2; ++j) out[j] += v[i] * m(i, j);
    v = out;
  };
  step(p1);
  for (std::size_t j = 0; j < 2; ++j) v[j] *= std::exp(normal_logpdf(0.5, p.outcome.means[j], 1.0));
  step(p1);
  for (std::size_t j = 0; j < 2; ++j) v[j] *= std::exp(normal_logpdf(-0.5, p.outcome.means[j], 1.0));
  step(p3);
  CHECK(lat.log_marginal() == doctest::Approx(std::log(v[0] + v[1])).epsilon(1e-12));
}

TEST_CASE("eta cache returns the same kernels") {
  const auto p = fixture::two_state();
  mmpp::EtaCache cache(p, FilterMode::kMmpp);
  const auto first = cache.get(0.25);
  CHECK(cache.get(0.25) == first);
  CHECK(cache.size() == 1);
  CHECK(first.max_abs_diff(mmpp::eta_matrix(p.q.matrix(), p.lambda, 0.25)) == 0.0);
}
