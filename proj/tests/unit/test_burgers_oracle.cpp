#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "mkv/burgers_oracle.hpp"
#include "mkv/errors.hpp"

using namespace mkv;

namespace {

double gauss_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

const InitialLaw N01 = InitialLaw::gaussian({0.0}, {1.0});

PdeGrid box(double lo, double hi, double dx, double T, double sup_g, double cfl = 0.9) {
  PdeGrid g;
  g.x_min = lo;
  g.x_max = hi;
  g.T = T;
  g.nx = static_cast<std::size_t>(std::llround((hi - lo) / dx));
  g.nt = static_cast<std::size_t>(std::ceil(T / (cfl * g.max_stable_dt(sup_g))));
  return g;
}

double sup_error_vs(const PdeSolution& s, double t, const std::function<double(double)>& exact) {
  const auto& g = s.grid();
  double err = 0.0;
  for (std::size_t i = 0; i <= g.nx; ++i) err = std::max(err, std::abs(s.value(t, g.x(i)) - exact(g.x(i))));
  return err;
}

// Sup distance at the coarse grid's nodes, which are also nodes of the fine grid.
double sup_error_on(const PdeSolution& coarse, const PdeSolution& fine) {
  const auto& g = coarse.grid();
  const auto v = coarse.slice(coarse.slices() - 1);
  double err = 0.0;
  for (std::size_t i = 0; i <= g.nx; ++i) err = std::max(err, std::abs(v[i] - fine.value(g.T, g.x(i))));
  return err;
}

}  // namespace

TEST_CASE("heat equation closed form on the default grid") {
  const double T = 1.0;
  const auto g0 = ScalarFunction::constant(0.0);
  const auto sol = fd_solve(g0, N01, default_pde_grid(g0, N01, T));
  for (double t : {0.25, 0.5, 1.0}) {
    CHECK(sup_error_vs(sol, t, [t](double x) { return gauss_cdf(x / std::sqrt(1.0 + t)); }) <= 1e-3);
  }
}

TEST_CASE("constant drift translates the heat solution") {
  for (double a : {0.5, -1.0}) {
    const double T = 1.0;
    const auto ga = ScalarFunction::constant(a);
    const auto sol = fd_solve(ga, N01, default_pde_grid(ga, N01, T));
    CHECK(sup_error_vs(sol, T, [&](double x) { return gauss_cdf((x - a * T) / std::sqrt(1.0 + T)); }) <= 1e-3);
  }
}

TEST_CASE("Burgers case matches a 4x refined self-run") {
  const auto g = ScalarFunction::identity();
  const double T = 0.5;
  const auto coarse = fd_solve(g, N01, box(-8.0, 8.0, 0.0125, T, 1.0));
  const auto fine = fd_solve(g, N01, box(-8.0, 8.0, 0.0125 / 4.0, T, 1.0));
  CHECK(sup_error_on(coarse, fine) <= 1e-3);
}

TEST_CASE("refinement reduces the self-error by at least 1.5") {
  const auto g = ScalarFunction::identity();
  const double T = 0.5;
  const auto reference = fd_solve(g, N01, box(-8.0, 8.0, 0.0125, T, 1.0));
  const double e1 = sup_error_on(fd_solve(g, N01, box(-8.0, 8.0, 0.1, T, 1.0)), reference);
  const double e2 = sup_error_on(fd_solve(g, N01, box(-8.0, 8.0, 0.05, T, 1.0)), reference);
  CHECK(e1 / e2 >= 1.5);
}

TEST_CASE("every slice is a valid CDF carrying unit mass") {
  const auto g = ScalarFunction::tanh_scaled(3.0);
  const auto sol = fd_solve(g, N01, default_pde_grid(g, N01, 1.0, 0.05));
  REQUIRE(sol.slices() > 10);
  for (std::size_t s = 0; s < sol.slices(); ++s) {
    const auto v = sol.slice(s);
    double tv = 0.0;
    bool monotone = true, bounded = true;
    for (std::size_t i = 0; i < v.size(); ++i) {
      bounded = bounded && v[i] >= -1e-9 && v[i] <= 1.0 + 1e-9;
      if (i > 0) {
        monotone = monotone && v[i] >= v[i - 1];
        tv += std::abs(v[i] - v[i - 1]);
      }
    }
    CHECK(monotone);
    CHECK(bounded);
    CHECK(v[1] <= 1e-3);
    CHECK(v[v.size() - 2] >= 1.0 - 1e-3);
    CHECK(tv == doctest::Approx(1.0).epsilon(1e-6));
  }
}

TEST_CASE("comparison principle on random ordered pairs") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 8; ++trial) {
    const double a = 2.0 * u(rng) - 1.0;
    const double b = 2.0 * u(rng) - 1.0;
    const auto g = ScalarFunction::affine(a, b);
    const double lo = -1.0 + u(rng), width = 0.5 + u(rng);
    const double shift_lo = 0.5 * u(rng), shift_hi = 0.5 * u(rng);
    // [lo + shift_lo, lo + width + shift_hi] is stochastically larger, so its CDF sits below.
    const auto left = InitialLaw::uniform({lo}, {lo + width});
    const auto right = InitialLaw::uniform({lo + shift_lo}, {lo + width + shift_hi});
    const auto grid = box(-8.0, 8.0, 0.05, 0.5, std::abs(a) + std::abs(b));
    FdOptions opt;
    opt.slice_stride = 1;
    const auto sl = fd_solve(g, left, grid, opt);
    const auto sr = fd_solve(g, right, grid, opt);
    bool ordered = true;
    for (std::size_t s = 0; s < sl.slices(); ++s) {
      const auto vl = sl.slice(s), vr = sr.slice(s);
      for (std::size_t i = 0; i < vl.size(); ++i) ordered = ordered && vr[i] <= vl[i] + 1e-12;
    }
    CHECK(ordered);
  }
}

TEST_CASE("point mass start is smoothed to a ramp") {
  const auto g0 = ScalarFunction::constant(0.0);
  const auto d0 = InitialLaw::point({0.0});
  const auto grid = box(-8.0, 8.0, 0.0125, 1.0, 0.0);
  const auto sol = fd_solve(g0, d0, grid);
  const auto v0 = sol.slice(0);
  CHECK(v0[0] == 0.0);
  CHECK(sol.value(0.0, 0.0) == doctest::Approx(0.5));
  CHECK(sol.value(0.0, -grid.dx()) == doctest::Approx(0.0).epsilon(1e-12).scale(1.0));
  CHECK(sol.value(0.0, grid.dx()) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(sup_error_vs(sol, 1.0, [](double x) { return gauss_cdf(x); }) <= 1e-3);
  CHECK_THROWS_AS(fd_solve(g0, InitialLaw::point({7.995}), grid), BoundaryMassError);
}

TEST_CASE("grid and domain errors") {
  const auto g = ScalarFunction::identity();
  auto grid = box(-8.0, 8.0, 0.05, 0.5, 1.0);
  grid.nt /= 2;
  CHECK_THROWS_AS(fd_solve(g, N01, grid), CflViolation);
  CHECK_THROWS_AS(fd_solve(g, N01, box(-2.0, 2.0, 0.05, 0.5, 1.0)), BoundaryMassError);
  // Mass transported into the right boundary during the run.
  CHECK_THROWS_AS(fd_solve(ScalarFunction::constant(5.0), N01, box(-6.0, 6.0, 0.05, 1.0, 5.0)),
                  BoundaryMassError);
  PdeGrid bad;
  bad.x_min = 1.0;
  bad.x_max = 0.0;
  CHECK_THROWS_AS(bad.validate(1.0), PreconditionError);
  const auto sol = fd_solve(g, N01, box(-8.0, 8.0, 0.1, 0.5, 1.0));
  CHECK_THROWS_AS(sol.value(0.6, 0.0), GridMismatch);
  CHECK(sol.value(0.5, -9.0) == 0.0);
  CHECK(sol.value(0.5, 9.0) == 1.0);
  CHECK(grid.max_stable_dt(1.0) == doctest::Approx(0.05 * 0.05 / 1.05));
}

TEST_CASE("driftless comparison sits at the Dvoretzky-Kiefer-Wolfowitz scale") {
  const auto g0 = ScalarFunction::constant(0.0);
  const std::size_t n = 2000, replicas = 20;
  const auto pde = fd_solve(g0, N01, default_pde_grid(g0, N01, 0.5));
  const ParticlePdeSetup setup{g0, N01, 50, 21, 1};
  const auto rows = compare_particle_pde(n, replicas, setup, pde, {0.5});
  REQUIRE(rows.size() == replicas);
  auto dkw = [n](double alpha) { return std::sqrt(std::log(2.0 / alpha) / (2.0 * static_cast<double>(n))); };
  std::size_t within = 0;
  for (const auto& r : rows) {
    CHECK(r.t == doctest::Approx(0.5));
    CHECK(r.sup_error <= dkw(1e-4));
    within += r.sup_error <= dkw(0.05) ? 1 : 0;
    CHECK(r.l1_error > 0.0);
  }
  CHECK(within >= 17);
}

TEST_CASE("particle error shrinks from n = 200 to n = 2000") {
  const auto g = ScalarFunction::identity();
  const auto pde = fd_solve(g, N01, default_pde_grid(g, N01, 0.5));
  const ParticlePdeSetup setup{g, N01, 50, 22, 1};
  auto stats = [&](std::size_t n) {
    const auto rows = compare_particle_pde(n, 20, setup, pde, {0.5});
    double s = 0.0, s2 = 0.0;
    for (const auto& r : rows) s += r.sup_error, s2 += r.sup_error * r.sup_error;
    const double m = s / 20.0;
    return std::pair{m, std::sqrt((s2 / 20.0 - m * m) / 19.0)};
  };
  const auto [m_small, se_small] = stats(200);
  const auto [m_large, se_large] = stats(2000);
  CHECK(m_small - m_large > 2.0 * std::hypot(se_small, se_large));
}
