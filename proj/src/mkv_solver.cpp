#include "mkv/mkv_solver.hpp"

#include <cmath>
#include <string>

#include "mkv/errors.hpp"
#include "mkv/girsanov.hpp"
#include "mkv/measure_ops.hpp"

namespace mkv {

double PicardOptions::tolerance() const {
  return tol ? *tol : 3.0 / std::sqrt(static_cast<double>(m));
}

namespace {

PicardIteration compare_iterates(std::size_t k, const Cloud& prev, const Cloud& cur,
                                 const PicardOptions& options) {
  const TimeGrid& grid = cur.grid();
  PicardIteration it;
  it.iteration = k;
  const std::size_t stride = std::max<std::size_t>(1, options.profile_stride);
  for (std::size_t j = 0;; j += stride) {
    if (j > grid.steps) j = grid.steps;
    const auto a = prev.coordinate(j);
    const auto b = cur.coordinate(j);
    const auto dist = sample_tv(a, b, options.bins);
    it.profile_times.push_back(grid.time(j));
    it.profile_tv.push_back(dist.tv);
    if (j == grid.steps) {
      it.terminal_tv = dist.tv;
      // Coupled samples cannot resolve less than one path changing bins.
      it.noise_floor = options.common_random_numbers ? 1.0 / static_cast<double>(cur.size())
                                                     : dist.noise_floor;
      break;
    }
  }
  return it;
}

}  // namespace

PicardResult picard_solve(const DriftSpec& drift, const VolatilitySpec& sigma,
                          const InitialLaw& lambda0, const TimeGrid& grid,
                          const PicardOptions& options, const NoiseBank& noise) {
  if (options.m < 100) throw PreconditionError("picard_solve needs m >= 100");
  if (options.max_iter == 0) throw PreconditionError("picard_solve needs max_iter >= 1");
  const double tol = options.tolerance();
  const double floor_guess = 2.0 / std::sqrt(static_cast<double>(options.m));
  if (!(tol > floor_guess)) {
    throw PreconditionError("tol " + std::to_string(tol) + " is below the Monte Carlo noise floor " +
                            std::to_string(floor_guess));
  }

  SimOptions sim;
  sim.threads = options.threads;
  auto tag = [&](std::size_t k) {
    return noise.at_iteration(options.common_random_numbers
                                  ? noise.iteration
                                  : noise.iteration + static_cast<std::uint32_t>(k));
  };

  PicardDiagnostics diag;
  diag.m = options.m;
  diag.bins = options.bins;
  diag.tol = tol;
  diag.common_random_numbers = options.common_random_numbers;

  // μ_0: driftless law. Any measure serves as the (unused) frozen argument.
  const Cloud seed_measure(grid, 1, lambda0.dim());
  auto previous = std::make_shared<const Cloud>(simulate_frozen(
      FrozenDrift(make_zero_drift(lambda0.dim()), seed_measure), sigma, lambda0, options.m, tag(0), sim));
  auto frozen_prev = std::make_unique<FrozenDrift>(drift, previous);

  for (std::size_t k = 1; k <= options.max_iter; ++k) {
    auto current = std::make_shared<const Cloud>(
        simulate_frozen(*frozen_prev, sigma, lambda0, options.m, tag(k), sim));
    auto frozen_cur = std::make_unique<FrozenDrift>(drift, current);

    PicardIteration it = compare_iterates(k, *previous, *current, options);
    it.entropy_proxy = entropy_between_solutions(*current, *frozen_cur, *frozen_prev, sigma, grid.steps);
    diag.iterations.push_back(std::move(it));

    previous = current;
    frozen_prev = std::move(frozen_cur);
    if (diag.iterations.back().terminal_tv <= tol && k >= options.min_iter) {
      diag.stop = StopReason::converged;
      break;
    }
  }
  diag.fitted_ratio = fit_geometric_ratio(diag.iterations);

  if (diag.stop != StopReason::converged && options.require_convergence) {
    throw NoConvergence("terminal TV " + std::to_string(diag.iterations.back().terminal_tv) +
                            " above tol after " + std::to_string(options.max_iter) + " iterations",
                        diag);
  }
  return {previous, std::move(diag)};
}

std::optional<double> fit_geometric_ratio(const std::vector<PicardIteration>& iterations,
                                          std::size_t* informative) {
  std::vector<double> ks, logs;
  for (const auto& it : iterations) {
    if (!(it.terminal_tv > 2.0 * it.noise_floor)) break;
    ks.push_back(static_cast<double>(it.iteration));
    logs.push_back(std::log(it.terminal_tv));
  }
  if (informative) *informative = ks.size();
  if (ks.size() < 2) return std::nullopt;
  double mk = 0.0, ml = 0.0;
  for (std::size_t i = 0; i < ks.size(); ++i) mk += ks[i], ml += logs[i];
  mk /= static_cast<double>(ks.size());
  ml /= static_cast<double>(ks.size());
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < ks.size(); ++i) {
    sxy += (ks[i] - mk) * (logs[i] - ml);
    sxx += (ks[i] - mk) * (ks[i] - mk);
  }
  return std::exp(sxy / sxx);
}

ContractionReport contraction_report(const PicardDiagnostics& diag, double kappa, double T,
                                     double slack) {
  if (diag.iterations.size() < 3) {
    throw InsufficientIterations("contraction_report needs at least 3 recorded iterations, got " +
                                 std::to_string(diag.iterations.size()));
  }
  ContractionReport r;
  r.kappa = kappa;
  r.horizon = T;
  r.fitted_ratio = fit_geometric_ratio(diag.iterations, &r.informative_points);
  r.ratio_threshold = kappa * std::sqrt(T) * (1.0 + slack);
  r.within_bound = !r.fitted_ratio || *r.fitted_ratio <= r.ratio_threshold;
  const auto& last = diag.iterations.back();
  r.converged_to_floor = last.terminal_tv <= 2.0 * last.noise_floor;

  double term = 1.0;
  for (std::size_t k = 1; k <= diag.iterations.size(); ++k) {
    term *= kappa * kappa * T / static_cast<double>(k);
    r.envelope.push_back(term);
  }

  if (kappa == 0.0) {
    // Declared measure-independent: after the first iterate nothing may move.
    r.declaration_consistent = true;
    for (std::size_t i = 1; i < diag.iterations.size(); ++i) {
      const auto& it = diag.iterations[i];
      if (it.terminal_tv > 2.0 * it.noise_floor) r.declaration_consistent = false;
    }
  } else {
    r.declaration_consistent = r.within_bound;
  }
  return r;
}

double fixed_point_residual(const PicardResult& result, const DriftSpec& drift,
                            const VolatilitySpec& sigma, const InitialLaw& lambda0,
                            const NoiseBank& noise, int threads) {
  const Cloud& sol = *result.solution;
  SimOptions sim;
  sim.threads = threads;
  const Cloud image = simulate_frozen(FrozenDrift(drift, result.solution), sigma, lambda0,
                                      sol.size(), noise, sim);
  const std::size_t T = sol.grid().steps;
  return sample_tv(sol.coordinate(T), image.coordinate(T), result.diagnostics.bins).tv;
}

}  // namespace mkv
