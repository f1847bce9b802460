#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <span>
#include <vector>

#include "mkv/coefficients.hpp"
#include "mkv/path.hpp"
#include "mkv/rng.hpp"

namespace mkv {

/// Law of X_0: point mass, Gaussian(mean, cov) or product uniform(lo, hi).
class InitialLaw {
 public:
  enum class Kind { point, gaussian, uniform };

  static InitialLaw point(std::vector<double> x0);
  static InitialLaw gaussian(std::vector<double> mean, std::vector<double> cov_row_major);
  static InitialLaw uniform(std::vector<double> lo, std::vector<double> hi);

  Kind kind() const noexcept { return kind_; }
  std::size_t dim() const noexcept { return a_.size(); }
  void sample(Xoshiro256& gen, std::normal_distribution<double>& normal, std::span<double> out) const;

  // First-coordinate summaries.
  double mean() const;
  double spread() const;  // standard deviation, 0 for a point mass
  double cdf(double x) const;  // d = 1 only; point mass uses the closed step

 private:
  Kind kind_ = Kind::point;
  std::vector<double> a_;     // point / mean / lo
  std::vector<double> b_;     // hi (uniform)
  std::vector<double> chol_;  // lower Cholesky factor (gaussian)
};

/// Source of independent Wiener increments: one stream per
/// (replica, particle) under a fixed iteration tag.
struct NoiseBank {
  std::uint64_t seed = 0;
  std::uint32_t iteration = 0;

  StreamKey key(std::uint64_t replica, std::uint64_t particle) const {
    return derive_seed(seed, replica, particle, iteration);
  }
  NoiseBank at_iteration(std::uint32_t it) const { return {seed, it}; }
};

/// A drift with its measure argument fixed to a cloud. Summaries for every
/// grid time are computed once at construction, so evaluation is cheap and
/// safe from many threads.
class FrozenDrift {
 public:
  FrozenDrift(DriftSpec spec, std::shared_ptr<const Cloud> measure);
  FrozenDrift(DriftSpec spec, Cloud measure);

  const DriftSpec& spec() const noexcept { return spec_; }
  const Cloud& measure() const noexcept { return *measure_; }
  const std::shared_ptr<const Cloud>& measure_ptr() const noexcept { return measure_; }
  const MeasureSummary& summary(std::size_t t_idx) const { return summaries_[t_idx]; }

  void evaluate(std::size_t t_idx, const PathView& prefix, std::span<double> out) const {
    spec_.evaluate(t_idx, prefix, summaries_[t_idx], out);
  }

 private:
  DriftSpec spec_;
  std::shared_ptr<const Cloud> measure_;
  std::vector<MeasureSummary> summaries_;
};

/// x + b·dt + σ·dW, written to out. Throws NonFinite on overflow.
void euler_step(std::span<const double> x, std::span<const double> drift_val,
                std::span<const double> sigma_row_major, std::span<const double> dW, double dt,
                std::span<double> out);
std::vector<double> euler_step(std::span<const double> x, std::span<const double> drift_val,
                               std::span<const double> sigma_row_major,
                               std::span<const double> dW, double dt);

struct SimOptions {
  int threads = 1;
  std::uint32_t replica = 0;
  // Optional stream index per path/particle (default: identity). Duplicates
  // would make two paths share noise and raise SeedCollision.
  std::vector<std::uint32_t> stream_ids;
};

using PathVisitor = std::function<void(std::size_t index, const PathView& path)>;

/// Simulates `count` iid paths with the measure argument frozen (the map Φ).
/// Each path owns its stream; the visitor sees every finished path, possibly
/// from several threads at once.
void simulate_frozen_each(const FrozenDrift& drift, const VolatilitySpec& sigma,
                          const InitialLaw& lambda0, std::size_t count, const NoiseBank& noise,
                          const SimOptions& options, const PathVisitor& visit);

Cloud simulate_frozen(const FrozenDrift& drift, const VolatilitySpec& sigma,
                      const InitialLaw& lambda0, std::size_t count, const NoiseBank& noise,
                      const SimOptions& options = {});
Cloud simulate_frozen(const DriftSpec& drift, const VolatilitySpec& sigma, const Cloud& frozen,
                      const InitialLaw& lambda0, std::size_t count, const NoiseBank& noise,
                      const SimOptions& options = {});

/// Optional per-step hook for instrumentation (called after the snapshot is
/// summarized and before any particle moves).
using StepObserver = std::function<void(std::size_t t_idx, const MeasureSnapshot& snapshot)>;

/// The n-particle system: at every step the empirical snapshot of all n
/// current states is summarized once, then every particle advances against it.
Cloud simulate_coupled(const DriftSpec& drift, const VolatilitySpec& sigma,
                       const InitialLaw& lambda0, const TimeGrid& grid, std::size_t n,
                       const NoiseBank& noise, const SimOptions& options = {},
                       const StepObserver& observer = {});

}  // namespace mkv
