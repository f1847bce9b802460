#include "mkv/sde_engine.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "mkv/errors.hpp"
#include "mkv/parallel.hpp"

namespace mkv {

InitialLaw InitialLaw::point(std::vector<double> x0) {
  if (x0.empty()) throw ShapeError("initial point needs a dimension");
  InitialLaw law;
  law.kind_ = Kind::point;
  law.a_ = std::move(x0);
  return law;
}

InitialLaw InitialLaw::gaussian(std::vector<double> mean, std::vector<double> cov) {
  const std::size_t d = mean.size();
  if (d == 0 || cov.size() != d * d) throw ShapeError("gaussian initial law needs a d×d covariance");
  Eigen::MatrixXd c(d, d);
  for (std::size_t r = 0; r < d; ++r)
    for (std::size_t k = 0; k < d; ++k) c(r, k) = cov[r * d + k];
  Eigen::LLT<Eigen::MatrixXd> llt(c);
  if (llt.info() != Eigen::Success) throw PreconditionError("covariance is not positive definite");
  const Eigen::MatrixXd L = llt.matrixL();
  InitialLaw law;
  law.kind_ = Kind::gaussian;
  law.a_ = std::move(mean);
  law.chol_.resize(d * d);
  for (std::size_t r = 0; r < d; ++r)
    for (std::size_t k = 0; k < d; ++k) law.chol_[r * d + k] = L(r, k);
  return law;
}

InitialLaw InitialLaw::uniform(std::vector<double> lo, std::vector<double> hi) {
  if (lo.empty() || lo.size() != hi.size()) throw ShapeError("uniform bounds must share a dimension");
  for (std::size_t k = 0; k < lo.size(); ++k) {
    if (!(lo[k] < hi[k])) throw PreconditionError("uniform law needs lo < hi");
  }
  InitialLaw law;
  law.kind_ = Kind::uniform;
  law.a_ = std::move(lo);
  law.b_ = std::move(hi);
  return law;
}

void InitialLaw::sample(Xoshiro256& gen, std::normal_distribution<double>& normal,
                        std::span<double> out) const {
  const std::size_t d = dim();
  switch (kind_) {
    case Kind::point:
      std::copy(a_.begin(), a_.end(), out.begin());
      break;
    case Kind::gaussian: {
      double z[16];
      std::vector<double> zbig;
      double* zp = z;
      if (d > 16) {
        zbig.resize(d);
        zp = zbig.data();
      }
      for (std::size_t k = 0; k < d; ++k) zp[k] = normal(gen);
      for (std::size_t r = 0; r < d; ++r) {
        double acc = a_[r];
        for (std::size_t k = 0; k <= r; ++k) acc += chol_[r * d + k] * zp[k];
        out[r] = acc;
      }
      break;
    }
    case Kind::uniform:
      for (std::size_t k = 0; k < d; ++k) out[k] = a_[k] + (b_[k] - a_[k]) * gen.uniform();
      break;
  }
}

double InitialLaw::mean() const {
  return kind_ == Kind::uniform ? 0.5 * (a_[0] + b_[0]) : a_[0];
}

double InitialLaw::spread() const {
  switch (kind_) {
    case Kind::point:
      return 0.0;
    case Kind::gaussian:
      return std::abs(chol_[0]);
    case Kind::uniform:
      return (b_[0] - a_[0]) / std::sqrt(12.0);
  }
  return 0.0;
}

double InitialLaw::cdf(double x) const {
  if (dim() != 1) throw ShapeError("cdf is defined for one-dimensional initial laws");
  switch (kind_) {
    case Kind::point:
      return x >= a_[0] ? 1.0 : 0.0;
    case Kind::gaussian:
      return 0.5 * std::erfc(-(x - a_[0]) / (std::abs(chol_[0]) * std::numbers::sqrt2));
    case Kind::uniform:
      return std::clamp((x - a_[0]) / (b_[0] - a_[0]), 0.0, 1.0);
  }
  return 0.0;
}

FrozenDrift::FrozenDrift(DriftSpec spec, std::shared_ptr<const Cloud> measure)
    : spec_(std::move(spec)), measure_(std::move(measure)) {
  if (!measure_ || measure_->empty()) throw EmptyInput("frozen measure is empty");
  if (measure_->dim() != spec_.dim()) throw ShapeError("frozen measure dimension does not match drift");
  const std::size_t points = measure_->grid().points();
  summaries_.resize(points);
  if (!spec_.measure_dependent()) return;
  for (std::size_t j = 0; j < points; ++j) {
    summaries_[j] = spec_.summarize(MeasureSnapshot::of(*measure_, j));
  }
}

FrozenDrift::FrozenDrift(DriftSpec spec, Cloud measure)
    : FrozenDrift(std::move(spec), std::make_shared<const Cloud>(std::move(measure))) {}

void euler_step(std::span<const double> x, std::span<const double> drift_val,
                std::span<const double> sigma, std::span<const double> dW, double dt,
                std::span<double> out) {
  const std::size_t d = x.size();
  if (drift_val.size() != d || dW.size() != d || sigma.size() != d * d || out.size() != d) {
    throw ShapeError("euler_step operands disagree in dimension");
  }
  if (!(dt > 0.0)) throw PreconditionError("dt must be positive");
  for (std::size_t r = 0; r < d; ++r) {
    double noise = 0.0;
    for (std::size_t k = 0; k < d; ++k) noise += sigma[r * d + k] * dW[k];
    out[r] = x[r] + drift_val[r] * dt + noise;
    if (!std::isfinite(out[r])) throw NonFinite("euler step produced a non-finite state");
  }
}

std::vector<double> euler_step(std::span<const double> x, std::span<const double> drift_val,
                               std::span<const double> sigma, std::span<const double> dW,
                               double dt) {
  std::vector<double> out(x.size());
  euler_step(x, drift_val, sigma, dW, dt, out);
  return out;
}

namespace {

std::vector<std::uint32_t> resolve_streams(const SimOptions& options, std::size_t count) {
  if (options.stream_ids.empty()) {
    std::vector<std::uint32_t> ids(count);
    for (std::size_t i = 0; i < count; ++i) {
      if (i >= (std::size_t{1} << 32)) throw IndexOverflow("too many paths for 32-bit stream ids");
      ids[i] = static_cast<std::uint32_t>(i);
    }
    return ids;
  }
  if (options.stream_ids.size() != count) throw ShapeError("stream_ids must name one stream per path");
  auto sorted = options.stream_ids;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
    throw SeedCollision("two paths were assigned the same noise stream");
  }
  return options.stream_ids;
}

void check_shapes(const DriftSpec& drift, const VolatilitySpec& sigma, const InitialLaw& lambda0) {
  if (drift.dim() != sigma.dim() || drift.dim() != lambda0.dim()) {
    throw ShapeError("drift, volatility and initial law disagree in dimension");
  }
}

// One Euler–Maruyama step of a single path, in place on `path` row j+1.
// Scalar σ takes a branch-light fast path.
struct Stepper {
  const VolatilitySpec& sigma;
  double dt;
  double sqrt_dt;
  std::size_t dim;
  std::vector<double> b, dW, noise, sig;

  Stepper(const VolatilitySpec& s, double step)
      : sigma(s), dt(step), sqrt_dt(std::sqrt(step)), dim(s.dim()), b(dim), dW(dim), noise(dim) {}

  void draw(Xoshiro256& gen, std::normal_distribution<double>& normal) {
    for (auto& w : dW) w = sqrt_dt * normal(gen);
  }

  void advance(std::size_t j, const PathView& prefix, std::span<const double> x,
               std::span<double> next) {
    if (auto s = sigma.scalar_value()) {
      for (std::size_t k = 0; k < dim; ++k) {
        next[k] = x[k] + b[k] * dt + *s * dW[k];
        if (!std::isfinite(next[k])) throw NonFinite("euler step produced a non-finite state");
      }
      return;
    }
    sig = sigma.evaluate(j, prefix);
    euler_step(x, b, sig, dW, dt, next);
  }
};

void enforce_bound(const DriftSpec& spec, const VolatilitySpec& sigma, std::size_t j,
                   const PathView& prefix, std::span<const double> b) {
  const double norm = scaled_norm(sigma, j, prefix, b);
  const double c = spec.bound_c();
  if (!(norm <= c + 1e-12 * std::max(1.0, c))) {
    throw BoundViolation("|sigma^-1 b| = " + std::to_string(norm) + " exceeds declared c = " +
                         std::to_string(c) + " for " + spec.name() + " at step " + std::to_string(j));
  }
}

}  // namespace

void simulate_frozen_each(const FrozenDrift& drift, const VolatilitySpec& sigma,
                          const InitialLaw& lambda0, std::size_t count, const NoiseBank& noise,
                          const SimOptions& options, const PathVisitor& visit) {
  if (count == 0) throw PreconditionError("simulate_frozen needs m >= 1");
  check_shapes(drift.spec(), sigma, lambda0);
  const auto streams = resolve_streams(options, count);
  const TimeGrid grid = drift.measure().grid();
  const std::size_t d = lambda0.dim();

  parallel_for(count, options.threads, [&](std::size_t i) {
    Xoshiro256 gen(noise.key(options.replica, streams[i]));
    std::normal_distribution<double> normal;
    Path path(grid.points(), d);
    Stepper step(sigma, grid.dt());
    lambda0.sample(gen, normal, path.state(0));
    for (std::size_t j = 0; j < grid.steps; ++j) {
      const PathView prefix = path.prefix(j);
      drift.evaluate(j, prefix, step.b);
      enforce_bound(drift.spec(), sigma, j, prefix, step.b);
      step.draw(gen, normal);
      step.advance(j, prefix, path.state(j), path.state(j + 1));
    }
    visit(i, path.view());
  });
}

Cloud simulate_frozen(const FrozenDrift& drift, const VolatilitySpec& sigma,
                      const InitialLaw& lambda0, std::size_t count, const NoiseBank& noise,
                      const SimOptions& options) {
  if (count == 0) throw PreconditionError("simulate_frozen needs m >= 1");
  Cloud out(drift.measure().grid(), count, lambda0.dim());
  simulate_frozen_each(drift, sigma, lambda0, count, noise, options,
                       [&out](std::size_t i, const PathView& p) { out.set_path(i, p); });
  return out;
}

Cloud simulate_frozen(const DriftSpec& drift, const VolatilitySpec& sigma, const Cloud& frozen,
                      const InitialLaw& lambda0, std::size_t count, const NoiseBank& noise,
                      const SimOptions& options) {
  return simulate_frozen(FrozenDrift(drift, frozen), sigma, lambda0, count, noise, options);
}

Cloud simulate_coupled(const DriftSpec& drift, const VolatilitySpec& sigma,
                       const InitialLaw& lambda0, const TimeGrid& grid, std::size_t n,
                       const NoiseBank& noise, const SimOptions& options,
                       const StepObserver& observer) {
  if (n == 0) throw PreconditionError("simulate_coupled needs n >= 1");
  check_shapes(drift, sigma, lambda0);
  const auto streams = resolve_streams(options, n);
  const std::size_t d = lambda0.dim();

  Cloud cloud(grid, n, d);
  std::vector<Xoshiro256> gens;
  gens.reserve(n);
  std::vector<std::normal_distribution<double>> normals(n);
  {
    auto x0 = cloud.marginal(0);
    for (std::size_t i = 0; i < n; ++i) {
      gens.emplace_back(noise.key(options.replica, streams[i]));
      lambda0.sample(gens[i], normals[i], x0.subspan(i * d, d));
    }
  }

  std::vector<Stepper> steppers(n, Stepper(sigma, grid.dt()));
  const bool uses_measure = drift.measure_dependent();
  for (std::size_t j = 0; j < grid.steps; ++j) {
    const auto snapshot = MeasureSnapshot::of(cloud, j);
    const MeasureSummary summary = uses_measure ? drift.summarize(snapshot) : MeasureSummary{};
    if (observer) observer(j, snapshot);
    const auto now = cloud.marginal(j);
    auto next = cloud.marginal(j + 1);
    // Rows j+1 are written, rows ≤ j are read: the snapshot cannot see updates.
    parallel_for(n, options.threads, [&](std::size_t i) {
      Stepper& step = steppers[i];
      const PathView prefix = cloud.prefix(i, j);
      checked_drift(drift, sigma, j, prefix, summary, step.b);
      step.draw(gens[i], normals[i]);
      step.advance(j, prefix, now.subspan(i * d, d), next.subspan(i * d, d));
    });
  }
  return cloud;
}

}  // namespace mkv
