#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "mkv/coefficients.hpp"
#include "mkv/measure_ops.hpp"
#include "mkv/path.hpp"
#include "mkv/sde_engine.hpp"

namespace mkv {

/// Everything a propagation-of-chaos experiment shares: the coefficients, the
/// reference solution cloud μ, and the noise tag for the particle systems.
struct ChaosSetup {
  DriftSpec drift;
  VolatilitySpec sigma;
  InitialLaw lambda0;
  std::shared_ptr<const Cloud> mu;
  NoiseBank noise;
  int threads = 1;
};

/// Bounded functional of a path, |φ| ≤ 1.
struct PathFunctional {
  std::string name;
  std::function<double(const PathView&)> fn;

  double operator()(const PathView& p) const { return fn(p); }

  static PathFunctional terminal_indicator(double threshold);
  static PathFunctional indicator_at(std::size_t t_idx, double threshold);
  // Product of indicators 1{x_{t_i} ≤ a_i}.
  static PathFunctional cylinder(std::vector<std::pair<std::size_t, double>> conditions);
};

/// U = {ν : |⟨φ_i, ν⟩ − ⟨φ_i, μ⟩| < ε for every i}.
struct Neighborhood {
  std::vector<PathFunctional> tests;
  double epsilon = 0.0;
  std::vector<double> reference;
};

Neighborhood make_neighborhood(std::vector<PathFunctional> tests, double epsilon, const Cloud& mu);

struct ReplicaOutcome {
  double gap = 0.0;                       // F_{0,T}(μ̂ⁿ)
  std::vector<double> tagged;             // first k particles, coordinate 0 at the tag time
  std::vector<double> functional_means;   // ⟨φ_i, μ̂ⁿ⟩
};

struct ReplicaPlan {
  std::size_t tag_t_idx = 0;
  std::size_t k = 1;
  const Neighborhood* neighborhood = nullptr;
  bool compute_gap = true;
};

/// Independent coupled systems, replica r on stream set (r, ·).
std::vector<ReplicaOutcome> run_replicas(const ChaosSetup& setup, std::size_t n,
                                         std::size_t replicas, const ReplicaPlan& plan);

/// E[F_{0,T}(μ̂ⁿ)] over replicas, with standard error.
Estimate chaos_gap(const ChaosSetup& setup, std::size_t n, std::size_t replicas);
Estimate gap_estimate(const std::vector<ReplicaOutcome>& outcomes);

struct BoundChain {
  double bound = 0.0;          // TV ∈ [0, 2] (sup over |f| ≤ 1)
  double constant = 0.0;       // 4kTc²·exp(4kTc²)
  double vacuity_gap = 0.0;    // gap below which the bound drops under 2
  bool vacuous = false;        // bound ≥ 2 says nothing
};

/// TV bound for the first k particles: sqrt(4kTc²·e^{4kTc²}·sqrt(gap)).
BoundChain tv_bound_chain(std::size_t k, std::size_t n, double gap, double c, double T);

struct MarginalTv {
  double tv = 0.0;           // internal normalization, [0, 1]
  double se = 0.0;           // bootstrap standard error
  double noise_floor = 0.0;  // expected TV between identical laws
  std::size_t samples = 0;
};

MarginalTv marginal_tv_from_samples(std::span<const double> particle_samples,
                                    std::span<const double> mu_samples, std::size_t bins,
                                    std::uint64_t bootstrap_seed, std::size_t bootstrap = 200);

/// Pooled X^{n,1}_t (one per replica) against μ's t-marginal.
MarginalTv marginal_tv(const ChaosSetup& setup, std::size_t n, std::size_t t_idx,
                       std::size_t replicas, std::size_t bins = 64);

struct TailEstimate {
  double probability = 0.0;
  double se = 0.0;
  std::size_t exceedances = 0;
  std::size_t replicas = 0;
  // With no exceedance the estimate is reported as the bound P ≤ 3/replicas.
  std::optional<double> zero_count_bound;
};

TailEstimate tail_from_outcomes(const Neighborhood& U, const std::vector<ReplicaOutcome>& outcomes);
TailEstimate tail_probability(const ChaosSetup& setup, const Neighborhood& U, std::size_t n,
                              std::size_t replicas);

struct ChaosReport {
  std::size_t n = 0;
  std::size_t replicas = 0;
  std::size_t k = 1;
  Estimate gap;
  BoundChain bound;
  MarginalTv marginal;
  std::vector<TailEstimate> tails;
};

/// All chaos metrics from one set of replicas.
ChaosReport chaos_report(const ChaosSetup& setup, std::size_t n, std::size_t replicas,
                         std::size_t k, std::size_t bins,
                         const std::vector<Neighborhood>& neighborhoods);

struct SanovRow {
  std::size_t n = 0;
  std::size_t replicas = 0;
  std::size_t exceedances = 0;
  double probability = 0.0;
  double rate = 0.0;     // −(1/n) log P̂, +inf when P̂ = 0
  double rate_se = 0.0;
  bool estimable = false;  // at least 5 exceedances
};

struct SanovTable {
  double reference = 0.0;   // ⟨φ, μ⟩
  double epsilon = 0.0;
  double limit_rate = 0.0;  // Bernoulli KL rate, +inf when degenerate
  bool degenerate = false;
  bool monotone = true;     // rates nondecreasing in n within 2 combined SEs
  std::optional<std::size_t> largest_estimable;  // index into rows
  std::vector<SanovRow> rows;
};

/// Cramér/Sanov rate for an indicator with μ-probability p and deviation ε.
double bernoulli_deviation_rate(double p, double epsilon);

/// iid clouds drawn from Φ(μ) (the frozen regime); φ must be an indicator.
SanovTable sanov_rate_check(const ChaosSetup& setup, const PathFunctional& phi, double epsilon,
                            const std::vector<std::size_t>& n_list, std::size_t replicas);

}  // namespace mkv
