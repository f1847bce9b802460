#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "mkv/coefficients.hpp"
#include "mkv/errors.hpp"

using namespace mkv;

namespace {

// One-step cloud whose time-0 marginal is `values` (d = 1).
Cloud snapshot_of(const std::vector<double>& values, std::size_t steps = 1) {
  Cloud c(TimeGrid(1.0, steps), values.size(), 1);
  for (std::size_t t = 0; t <= steps; ++t) std::copy(values.begin(), values.end(), c.marginal(t).begin());
  return c;
}

Path point_path(double x, std::size_t steps = 1) {
  Path p(steps + 1, 1);
  for (std::size_t t = 0; t <= steps; ++t) p.state(t)[0] = x;
  return p;
}

const VolatilitySpec I1 = VolatilitySpec::identity(1);

}  // namespace

TEST_CASE("rank drift counts ties and self with the closed half-line") {
  const auto rank = make_rank_drift(ScalarFunction::identity());
  const auto b = eval_drift(rank, I1, 0, point_path(0.0).view(), snapshot_of({-1.0, 0.0, 1.0}));
  CHECK(b[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK(rank.bound_c() == 1.0);
  CHECK(*rank.tv_lipschitz_kappa() == 1.0);
  CHECK(*rank.entropy_L() == 2.0);
}

TEST_CASE("constant drift ignores prefix and snapshot") {
  const auto d = make_constant_drift({0.3, -0.4});
  Path p(2, 2);
  p.state(0)[0] = 5.0;
  Cloud c(TimeGrid(1.0, 1), 3, 2);
  const auto b = eval_drift(d, VolatilitySpec::identity(2), 0, p.view(), c);
  CHECK(b == std::vector<double>{0.3, -0.4});
  CHECK(d.bound_c() == doctest::Approx(0.5));
  CHECK_FALSE(d.measure_dependent());
}

TEST_CASE("mean-field drift with f = identity and symmetric snapshot is zero") {
  const auto f = [](std::span<const double>, std::span<const double> m, std::span<double> out) { out[0] = m[0]; };
  const auto id = [](std::span<const double> x, std::span<double> out) { out[0] = std::clamp(x[0], -5.0, 5.0); };
  const auto d = make_mean_field_drift(1, f, id, 5.0);
  CHECK(eval_drift(d, I1, 0, point_path(3.0).view(), snapshot_of({-2.0, 2.0}))[0] == 0.0);
}

TEST_CASE("rank drift reductions") {
  SUBCASE("g = 0 agrees with the zero drift everywhere") {
    const auto rank0 = make_rank_drift(ScalarFunction::constant(0.0));
    const auto zero = make_zero_drift(1);
    std::mt19937_64 gen(1);
    std::normal_distribution<double> nd;
    for (int k = 0; k < 50; ++k) {
      std::vector<double> vals(7);
      for (auto& v : vals) v = nd(gen);
      const auto p = point_path(nd(gen));
      CHECK(eval_drift(rank0, I1, 0, p.view(), snapshot_of(vals)) ==
            eval_drift(zero, I1, 0, p.view(), snapshot_of(vals)));
    }
  }
  SUBCASE("a lone particle has rank one") {
    const auto rank = make_rank_drift(ScalarFunction::identity());
    CHECK(eval_drift(rank, I1, 0, point_path(0.7).view(), snapshot_of({0.7}))[0] == 1.0);
  }
  SUBCASE("the j-th order statistic has rank j/m") {
    const auto rank = make_rank_drift(ScalarFunction::identity());
    std::vector<double> vals{0.3, -1.2, 4.0, 2.5, -0.1, 0.9};
    auto sorted = vals;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t j = 0; j < sorted.size(); ++j) {
      const auto b = eval_drift(rank, I1, 0, point_path(sorted[j]).view(), snapshot_of(vals));
      CHECK(b[0] == doctest::Approx(static_cast<double>(j + 1) / 6.0).epsilon(1e-15));
    }
  }
}

TEST_CASE("mean-field convenience drifts") {
  const auto clamp_mf = make_mean_field_drift(1, ScalarFunction::identity(), MeanFieldPhi::clamp);
  CHECK(eval_drift(clamp_mf, I1, 0, point_path(0.0).view(), snapshot_of({0.5, -0.5}))[0] == 0.0);
  CHECK(eval_drift(clamp_mf, I1, 0, point_path(0.0).view(), snapshot_of({2.0, 2.0}))[0] == 1.0);

  const auto zero_mf = make_mean_field_drift(1, ScalarFunction::identity(), MeanFieldPhi::zero);
  CHECK(eval_drift(zero_mf, I1, 0, point_path(1.0).view(), snapshot_of({3.0, 9.0}))[0] == 0.0);
  CHECK(*zero_mf.tv_lipschitz_kappa() == 0.0);
}

TEST_CASE("volatility inverse residual is below 1e-10") {
  Path p(2, 2);
  for (double s : {1.0, 0.3, 7.0}) {
    CHECK(VolatilitySpec::scalar(2, s).inverse_residual(0, p.view()) <= 1e-10);
  }
  const auto general = VolatilitySpec::general(
      2,
      [](std::size_t, const PathView&, std::span<double> m) { m[0] = 2.0; m[1] = 1.0; m[2] = 0.0; m[3] = 0.5; },
      [](std::size_t, const PathView&, std::span<double> m) { m[0] = 0.5; m[1] = -1.0; m[2] = 0.0; m[3] = 2.0; });
  CHECK(general.inverse_residual(0, p.view()) <= 1e-10);
  std::vector<double> v{1.0, 1.0}, out(2);
  general.apply_inverse(0, p.view(), v, out);
  CHECK(out[0] == doctest::Approx(-0.5));
  CHECK(out[1] == doctest::Approx(2.0));
}

TEST_CASE("bound enforcement is a hard error and check_bound records violations") {
  const auto loud = make_constant_drift({1.0}).with_declared(0.5, std::nullopt);
  CHECK_THROWS_AS(eval_drift(loud, I1, 0, point_path(0.0).view(), snapshot_of({0.0})), BoundViolation);

  std::vector<DriftProbe> probes;
  probes.push_back({0, point_path(0.0), snapshot_of({1.0, 2.0})});
  const auto rep = check_bound(loud, I1, probes);
  CHECK(rep.violations.size() == 1);
  CHECK(rep.max_scaled_norm == 1.0);

  const auto zero = check_bound(make_zero_drift(1), I1, probes);
  CHECK(zero.max_scaled_norm == 0.0);
  CHECK(zero.violations.empty());

  // σ = 2 halves the scaled norm, so a declared bound of 0.5 then holds.
  CHECK(check_bound(loud, VolatilitySpec::scalar(1, 2.0), probes).violations.empty());
}

TEST_CASE("rank drift stays within sup|g| over random probes") {
  const auto rank = make_rank_drift(ScalarFunction::identity());
  std::mt19937_64 gen(3);
  std::normal_distribution<double> nd;
  std::vector<DriftProbe> probes;
  for (int k = 0; k < 200; ++k) {
    std::vector<double> vals(1 + k % 13);
    for (auto& v : vals) v = nd(gen);
    probes.push_back({0, point_path(nd(gen)), snapshot_of(vals)});
  }
  const auto rep = check_bound(rank, I1, probes);
  CHECK(rep.max_scaled_norm <= 1.0);
  CHECK(rep.violations.empty());
}

TEST_CASE("progressivity: entries after t never change the value at t") {
  std::mt19937_64 gen(11);
  std::normal_distribution<double> nd;
  const std::size_t steps = 6;
  const std::vector<DriftSpec> specs{make_rank_drift(ScalarFunction::tanh_scaled(2.0)),
                                     make_mean_field_drift(1, ScalarFunction::identity(), MeanFieldPhi::tanh),
                                     make_constant_drift({0.2}), make_zero_drift(1)};
  for (const auto& spec : specs) {
    for (int trial = 0; trial < 40; ++trial) {
      const std::size_t m = 1 + static_cast<std::size_t>(trial % 9);
      Cloud cloud(TimeGrid(1.0, steps), m, 1);
      Path path(steps + 1, 1);
      for (std::size_t t = 0; t <= steps; ++t) {
        for (auto& v : cloud.marginal(t)) v = nd(gen);
        path.state(t)[0] = nd(gen);
      }
      const std::size_t t = static_cast<std::size_t>(trial) % steps;
      const auto before = eval_drift(spec, I1, t, path.view(), cloud);
      for (std::size_t u = t + 1; u <= steps; ++u) {
        for (auto& v : cloud.marginal(u)) v = 100.0 * nd(gen);
        path.state(u)[0] = -100.0;
      }
      CHECK(eval_drift(spec, I1, t, path.view(), cloud) == before);
      // A prefix that physically ends at t gives the same value too.
      CHECK(eval_drift(spec, I1, t, path.prefix(t), cloud) == before);
    }
  }
}

TEST_CASE("rank drift is monotone in x for nondecreasing g and takes values in g(k/m)") {
  const auto g = ScalarFunction::tanh_scaled(3.0);
  const auto rank = make_rank_drift(g);
  std::mt19937_64 gen(5);
  std::normal_distribution<double> nd;
  std::vector<double> vals(25);
  for (auto& v : vals) v = nd(gen);
  const Cloud snap = snapshot_of(vals);
  double prev = -1.0;
  for (double x = -4.0; x <= 4.0; x += 0.01) {
    const double b = eval_drift(rank, I1, 0, point_path(x).view(), snap)[0];
    CHECK(b >= prev);
    prev = b;
    bool on_lattice = false;
    for (std::size_t k = 0; k <= vals.size(); ++k) on_lattice |= b == g(static_cast<double>(k) / 25.0);
    CHECK(on_lattice);
  }
}

TEST_CASE("shape errors") {
  const auto rank = make_rank_drift(ScalarFunction::identity());
  Path p2(2, 2);
  CHECK_THROWS_AS(eval_drift(rank, I1, 0, p2.view(), snapshot_of({0.0})), ShapeError);
  CHECK_THROWS_AS(eval_drift(rank, I1, 5, point_path(0.0).view(), snapshot_of({0.0})), ShapeError);
}

TEST_CASE("grid estimators of sup and Lipschitz constants") {
  CHECK(estimate_sup_abs([](double u) { return 1.0 - 2.0 * u; }, 0.0, 1.0) == doctest::Approx(1.0));
  CHECK(estimate_lipschitz([](double u) { return 0.2 * u; }, 0.0, 1.0) == doctest::Approx(0.2));
  const auto d = make_rank_drift({"square", [](double u) { return u * u; }, std::nullopt, std::nullopt});
  CHECK(d.bound_c() == doctest::Approx(1.0));
  CHECK(*d.tv_lipschitz_kappa() == doctest::Approx(2.0).epsilon(0.01));
}
