#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <memory>
#include <vector>

#include "mkv/chaos_harness.hpp"
#include "mkv/errors.hpp"
#include "mkv/mkv_solver.hpp"

using namespace mkv;

namespace {

const VolatilitySpec I1 = VolatilitySpec::identity(1);
const InitialLaw delta0 = InitialLaw::point({0.0});

ChaosSetup solved_setup(const DriftSpec& drift, const TimeGrid& g, std::size_t m, std::uint64_t seed) {
  PicardOptions o;
  o.m = m;
  auto res = picard_solve(drift, I1, delta0, g, o, NoiseBank{seed, 0});
  return ChaosSetup{drift, I1, delta0, res.solution, NoiseBank{seed, 1000}, 1};
}

double terminal_median(const Cloud& mu) {
  auto xs = mu.coordinate(mu.grid().steps);
  std::sort(xs.begin(), xs.end());
  return xs[xs.size() / 2 - 1];
}

}  // namespace

TEST_CASE("chaos gap is exactly zero for a measure-independent drift") {
  const TimeGrid g(1.0, 20);
  const auto setup = solved_setup(make_constant_drift({0.3}), g, 1000, 1);
  const auto outcomes = run_replicas(setup, 25, 30, ReplicaPlan{});
  for (const auto& o : outcomes) CHECK(o.gap == 0.0);
  const auto e = chaos_gap(setup, 25, 30);
  CHECK(e.mean == 0.0);
  CHECK(e.se == 0.0);
  CHECK_THROWS_AS(chaos_gap(setup, 25, 29), PreconditionError);
}

TEST_CASE("chaos gap decays from n = 50 to n = 200") {
  const TimeGrid g(1.0, 25);
  const auto setup = solved_setup(make_rank_drift(ScalarFunction::identity()), g, 10000, 2);
  const auto small = chaos_gap(setup, 50, 30);
  const auto large = chaos_gap(setup, 200, 30);
  CHECK(small.mean - large.mean >= 2.0 * std::hypot(small.se, large.se));
}

TEST_CASE("a lone particle's gap obeys the crude bound 4 sup|g|² T") {
  const TimeGrid g(1.0, 20);
  const auto setup = solved_setup(make_rank_drift(ScalarFunction::affine(-1.5, 0.5)), g, 2000, 3);
  const auto outcomes = run_replicas(setup, 1, 50, ReplicaPlan{});
  for (const auto& o : outcomes) {
    CHECK(o.gap >= 0.0);
    CHECK(o.gap <= 4.0 * 1.0 * 1.0);
  }
}

TEST_CASE("bound chain arithmetic and monotonicity") {
  CHECK(tv_bound_chain(1, 10, 0.0, 1.0, 1.0).bound == 0.0);
  const auto b = tv_bound_chain(1, 10, 0.01, 1.0, 1.0);
  CHECK(b.bound == doctest::Approx(std::sqrt(4.0 * std::exp(4.0) * 0.1)).epsilon(1e-12));
  CHECK(b.bound == doctest::Approx(4.67).epsilon(0.002));
  CHECK(b.vacuous);
  CHECK(b.constant == doctest::Approx(4.0 * std::exp(4.0)));
  // At the vacuity threshold the bound is exactly 2.
  CHECK(tv_bound_chain(1, 10, b.vacuity_gap, 1.0, 1.0).bound == doctest::Approx(2.0));
  CHECK_FALSE(tv_bound_chain(1, 10, 0.5 * b.vacuity_gap, 1.0, 1.0).vacuous);

  const std::vector<double> gaps{0.0, 1e-6, 1e-3, 0.1};
  const std::vector<double> cs{0.0, 0.2, 1.0};
  const std::vector<double> Ts{0.1, 0.5, 1.0};
  for (std::size_t k = 1; k <= 3; ++k) {
    for (double gap : gaps) {
      for (double c : cs) {
        for (double T : Ts) {
          const double v = tv_bound_chain(k, 10, gap, c, T).bound;
          CHECK(tv_bound_chain(k + 1, 10, gap, c, T).bound >= v);
          CHECK(tv_bound_chain(k, 10, gap * 2.0 + 1e-9, c, T).bound >= v);
          CHECK(tv_bound_chain(k, 10, gap, c + 0.1, T).bound >= v);
          CHECK(tv_bound_chain(k, 10, gap, c, T + 0.1).bound >= v);
        }
      }
    }
  }
  CHECK_THROWS_AS(tv_bound_chain(1, 10, -1.0, 1.0, 1.0), PreconditionError);
}

TEST_CASE("marginal TV for a measure-independent drift sits at the noise floor") {
  const TimeGrid g(1.0, 10);
  const auto setup = solved_setup(make_constant_drift({0.5}), g, 10000, 4);
  const std::size_t bins = 16, replicas = 2000;
  const auto tv = marginal_tv(setup, 5, g.steps, replicas, bins);
  CHECK(tv.samples == replicas);
  CHECK(tv.tv <= std::sqrt(static_cast<double>(bins) / static_cast<double>(replicas)));
  CHECK(tv.tv <= 2.0 * tv.noise_floor);
  CHECK(tv.se > 0.0);
  CHECK_THROWS_AS(marginal_tv(setup, 5, g.steps, 30 * bins - 1, bins), PreconditionError);
}

TEST_CASE("neighborhood construction and trivial tails") {
  const TimeGrid g(1.0, 10);
  const auto setup = solved_setup(make_rank_drift(ScalarFunction::identity()), g, 2000, 5);
  const auto phi = PathFunctional::terminal_indicator(terminal_median(*setup.mu));
  CHECK_THROWS_AS(make_neighborhood({phi}, 0.0, *setup.mu), PreconditionError);
  const PathFunctional loud{"twice", [](const PathView&) { return 2.0; }};
  CHECK_THROWS_AS(make_neighborhood({loud}, 0.1, *setup.mu), PreconditionError);

  const auto wide = make_neighborhood({phi, PathFunctional::indicator_at(5, 0.0)}, 2.0, *setup.mu);
  CHECK(wide.reference[0] == 0.5);
  const auto t = tail_probability(setup, wide, 10, 200);
  CHECK(t.probability == 0.0);
  CHECK(t.exceedances == 0);
  REQUIRE(t.zero_count_bound);
  CHECK(*t.zero_count_bound == doctest::Approx(3.0 / 200.0));
}

TEST_CASE("tail probability decreases in n for the rank system") {
  const TimeGrid g(1.0, 5);
  const auto setup = solved_setup(make_rank_drift(ScalarFunction::identity()), g, 10000, 6);
  const double q = terminal_median(*setup.mu);

  SUBCASE("epsilon 0.2") {
    // Beyond n = 80 the event is too rare to count; a zero count is read through its 3/R bound.
    const auto U = make_neighborhood({PathFunctional::terminal_indicator(q)}, 0.2, *setup.mu);
    const auto t20 = tail_probability(setup, U, 20, 20000);
    const auto t80 = tail_probability(setup, U, 80, 20000);
    const auto t320 = tail_probability(setup, U, 320, 2000);
    REQUIRE(t20.exceedances >= 5);
    const double upper80 = t80.zero_count_bound ? *t80.zero_count_bound : t80.probability + 3.0 * t80.se;
    CHECK(t20.probability > upper80);
    CHECK(t320.probability <= t80.probability);
    CHECK(t320.exceedances == 0);
  }
  SUBCASE("epsilon 0.05, all counts estimable") {
    const auto U = make_neighborhood({PathFunctional::terminal_indicator(q)}, 0.05, *setup.mu);
    std::vector<TailEstimate> t;
    for (std::size_t n : {20u, 80u, 320u}) t.push_back(tail_probability(setup, U, n, 2000));
    for (std::size_t i = 0; i + 1 < t.size(); ++i) {
      REQUIRE(t[i + 1].exceedances >= 5);
      CHECK(t[i].probability - t[i + 1].probability > 2.0 * std::hypot(t[i].se, t[i + 1].se));
    }
  }
}

TEST_CASE("tail probability is nonincreasing in ε on one seed set") {
  const TimeGrid g(1.0, 10);
  const auto setup = solved_setup(make_rank_drift(ScalarFunction::identity()), g, 4000, 7);
  const auto phi = PathFunctional::terminal_indicator(terminal_median(*setup.mu));
  double prev = 1.0;
  for (double eps : {0.02, 0.05, 0.1, 0.15, 0.2, 0.3}) {
    const auto t = tail_probability(setup, make_neighborhood({phi}, eps, *setup.mu), 30, 3000);
    CHECK(t.probability <= prev);
    prev = t.probability;
  }
}

TEST_CASE("iid tails match the Cramér rate within 25%") {
  const TimeGrid g(1.0, 2);
  const auto setup = solved_setup(make_zero_drift(1), g, 10000, 8);
  const auto phi = PathFunctional::terminal_indicator(terminal_median(*setup.mu));
  const auto U = make_neighborhood({phi}, 0.2, *setup.mu);
  const double rate = bernoulli_deviation_rate(U.reference[0], 0.2);
  const std::size_t n = 100;
  const auto t = tail_probability(setup, U, n, 200000);
  REQUIRE(t.exceedances >= 5);
  const double observed = -std::log(t.probability) / static_cast<double>(n);
  CHECK(std::abs(observed - rate) <= 0.25 * rate);
}

TEST_CASE("chaos_report bundles the metrics from one replica set") {
  const TimeGrid g(1.0, 10);
  const auto setup = solved_setup(make_rank_drift(ScalarFunction::identity()), g, 4000, 9);
  const auto U = make_neighborhood({PathFunctional::terminal_indicator(terminal_median(*setup.mu))}, 0.1, *setup.mu);
  const auto rep = chaos_report(setup, 40, 100, 1, 16, {U});
  CHECK(rep.n == 40);
  CHECK(rep.gap.count == 100);
  CHECK(rep.gap.mean > 0.0);
  CHECK(rep.bound.bound == doctest::Approx(tv_bound_chain(1, 40, rep.gap.mean, 1.0, 1.0).bound));
  CHECK(rep.tails.size() == 1);
  CHECK(rep.marginal.samples == 100);
}

TEST_CASE("Sanov rates: closed form, degenerate case and exceedance guard") {
  CHECK(bernoulli_deviation_rate(0.5, 0.2) == doctest::Approx(0.0823).epsilon(1e-3));
  CHECK(bernoulli_deviation_rate(0.5, 0.2) == doctest::Approx(bernoulli_kl(0.7, 0.5)));
  CHECK(std::isinf(bernoulli_deviation_rate(0.5, 0.6)));
  CHECK(bernoulli_deviation_rate(0.9, 0.2) == doctest::Approx(bernoulli_kl(0.7, 0.9)));

  const TimeGrid g(1.0, 2);
  const auto setup = solved_setup(make_zero_drift(1), g, 2000, 10);
  const auto phi = PathFunctional::terminal_indicator(terminal_median(*setup.mu));
  const auto degenerate = sanov_rate_check(setup, phi, 1.5, {5, 10}, 100);
  CHECK(degenerate.degenerate);
  for (const auto& r : degenerate.rows) {
    CHECK(r.probability == 0.0);
    CHECK(std::isinf(r.rate));
  }
  CHECK_THROWS_AS(sanov_rate_check(setup, phi, 0.45, {200}, 20), InsufficientExceedances);
  const PathFunctional smooth{"smooth", [](const PathView& p) { return std::tanh(p.value(p.length() - 1)); }};
  CHECK_THROWS_AS(sanov_rate_check(setup, smooth, 0.2, {5}, 10), PreconditionError);
}

TEST_CASE("Sanov table at small n") {
  const TimeGrid g(1.0, 2);
  const auto setup = solved_setup(make_zero_drift(1), g, 10000, 11);
  const auto phi = PathFunctional::terminal_indicator(terminal_median(*setup.mu));
  const auto table = sanov_rate_check(setup, phi, 0.2, {10, 20, 40}, 20000);
  CHECK_FALSE(table.degenerate);
  CHECK(table.reference == 0.5);
  REQUIRE(table.largest_estimable);
  CHECK(table.rows[*table.largest_estimable].n == 40);
  for (const auto& r : table.rows) {
    CHECK(r.estimable);
    CHECK(r.rate > table.limit_rate);  // finite-n rates approach the limit from above
  }
}
