#include "mkv/girsanov.hpp"

#include <random>
#include <string>

#include "mkv/errors.hpp"
#include "mkv/parallel.hpp"

namespace mkv {

LogDensityLedger accumulate_log_density(const LogDensityLedger& ledger, std::span<const double> h,
                                        std::span<const double> dW, double dt) {
  if (!(dt > 0.0)) throw PreconditionError("dt must be positive");
  if (h.size() != dW.size()) throw ShapeError("h and dW disagree in dimension");
  double dot = 0.0, sq = 0.0;
  for (std::size_t k = 0; k < h.size(); ++k) {
    dot += h[k] * dW[k];
    sq += h[k] * h[k];
  }
  LogDensityLedger out{ledger.log_z + dot - 0.5 * sq * dt, ledger.quadratic + sq * dt};
  if (!std::isfinite(out.log_z) || !std::isfinite(out.quadratic)) {
    throw NonFinite("log-density left the finite range");
  }
  return out;
}

std::vector<double> entropy_F_per_path(std::size_t s_idx, std::size_t t_idx, const Cloud& nu,
                                       const FrozenDrift& drift_nu, const FrozenDrift& drift_mu,
                                       const VolatilitySpec& sigma) {
  const TimeGrid& grid = nu.grid();
  if (!(drift_nu.measure().grid() == grid) || !(drift_mu.measure().grid() == grid)) {
    throw GridMismatch("entropy_F clouds live on different grids");
  }
  if (!(s_idx < t_idx) || t_idx > grid.steps) throw GridMismatch("entropy_F needs s < t on the grid");
  if (nu.empty()) throw EmptyInput("entropy_F over an empty cloud");
  const std::size_t d = nu.dim();
  std::vector<double> bn(d), bm(d), diff(d), scaled(d);
  std::vector<double> out(nu.size(), 0.0);
  for (std::size_t i = 0; i < nu.size(); ++i) {
    double acc = 0.0;
    for (std::size_t u = s_idx; u < t_idx; ++u) {
      const PathView prefix = nu.prefix(i, u);
      drift_nu.evaluate(u, prefix, bn);
      drift_mu.evaluate(u, prefix, bm);
      for (std::size_t k = 0; k < d; ++k) diff[k] = bn[k] - bm[k];
      sigma.apply_inverse(u, prefix, diff, scaled);
      for (double v : scaled) acc += v * v;
    }
    out[i] = acc * grid.dt();
  }
  return out;
}

double entropy_F(std::size_t s_idx, std::size_t t_idx, const Cloud& nu, const FrozenDrift& drift_nu,
                 const FrozenDrift& drift_mu, const VolatilitySpec& sigma) {
  const auto per_path = entropy_F_per_path(s_idx, t_idx, nu, drift_nu, drift_mu, sigma);
  double sum = 0.0;
  for (double v : per_path) sum += v;
  return sum / static_cast<double>(per_path.size());
}

double entropy_between_solutions(const Cloud& mu_cloud, const FrozenDrift& drift_of_nu,
                                 const FrozenDrift& drift_of_mu, const VolatilitySpec& sigma,
                                 std::size_t t_idx) {
  return 0.5 * entropy_F(0, t_idx, mu_cloud, drift_of_nu, drift_of_mu, sigma);
}

WeightedSample weighted_driftless(const FrozenDrift& drift, const VolatilitySpec& sigma,
                                  const InitialLaw& lambda0, std::size_t count,
                                  const NoiseBank& noise, const SimOptions& options) {
  if (count == 0) throw PreconditionError("weighted_driftless needs at least one path");
  if (drift.spec().dim() != sigma.dim() || sigma.dim() != lambda0.dim()) {
    throw ShapeError("drift, volatility and initial law disagree in dimension");
  }
  if (!options.stream_ids.empty()) throw PreconditionError("custom stream ids are not supported here");
  const TimeGrid grid = drift.measure().grid();
  const std::size_t d = lambda0.dim();
  WeightedSample out{Cloud(grid, count, d), std::vector<LogDensityLedger>(count)};
  const double sqrt_dt = std::sqrt(grid.dt());

  parallel_for(count, options.threads, [&](std::size_t i) {
    Xoshiro256 gen(noise.key(options.replica, i));
    std::normal_distribution<double> normal;
    Path path(grid.points(), d);
    std::vector<double> b(d), h(d), dW(d), step(d);
    lambda0.sample(gen, normal, path.state(0));
    LogDensityLedger ledger;
    for (std::size_t j = 0; j < grid.steps; ++j) {
      const PathView prefix = path.prefix(j);
      checked_drift(drift.spec(), sigma, j, prefix, drift.summary(j), b);
      sigma.apply_inverse(j, prefix, b, h);
      for (auto& w : dW) w = sqrt_dt * normal(gen);
      ledger = accumulate_log_density(ledger, h, dW, grid.dt());
      sigma.apply(j, prefix, dW, step);
      auto x = path.state(j);
      auto next = path.state(j + 1);
      for (std::size_t k = 0; k < d; ++k) next[k] = x[k] + step[k];
    }
    out.paths.set_path(i, path.view());
    out.ledgers[i] = ledger;
  });
  return out;
}

}  // namespace mkv
