#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "mkv/coefficients.hpp"
#include "mkv/path.hpp"
#include "mkv/sde_engine.hpp"

namespace mkv {

/// Running stochastic exponential of ∫h·dW for one path, kept in log form.
struct LogDensityLedger {
  double log_z = 0.0;
  double quadratic = 0.0;  // ∫|h|² ds so far

  double z() const { return std::exp(log_z); }
};

/// log Z += h·dW − ½|h|²dt, quadratic += |h|²dt (h at the left endpoint).
LogDensityLedger accumulate_log_density(const LogDensityLedger& ledger, std::span<const double> h,
                                        std::span<const double> dW, double dt);

/// F_{s,t}(ν): ν-average of Σ_{u=s}^{t-1} |σ⁻¹b(u,x,ν) − σ⁻¹b(u,x,μ)|² du.
/// The two drifts carry their measure arguments; s and t are grid indices.
double entropy_F(std::size_t s_idx, std::size_t t_idx, const Cloud& nu, const FrozenDrift& drift_nu,
                 const FrozenDrift& drift_mu, const VolatilitySpec& sigma);

/// Per-path contributions to entropy_F (same integrand, no averaging).
std::vector<double> entropy_F_per_path(std::size_t s_idx, std::size_t t_idx, const Cloud& nu,
                                       const FrozenDrift& drift_nu, const FrozenDrift& drift_mu,
                                       const VolatilitySpec& sigma);

/// H_t between the Girsanov images of two measure arguments:
/// ½ E over mu_cloud of ∫₀ᵗ |σ⁻¹b(s,X,ν) − σ⁻¹b(s,X,μ)|² ds.
double entropy_between_solutions(const Cloud& mu_cloud, const FrozenDrift& drift_of_nu,
                                 const FrozenDrift& drift_of_mu, const VolatilitySpec& sigma,
                                 std::size_t t_idx);

struct WeightedSample {
  Cloud paths;                            // driftless paths X⁰
  std::vector<LogDensityLedger> ledgers;  // density of the drifted law at T
};

/// Driftless paths dX = σ dW together with the Girsanov density that turns
/// them into the law with drift b(·,·,μ) of `drift`.
WeightedSample weighted_driftless(const FrozenDrift& drift, const VolatilitySpec& sigma,
                                  const InitialLaw& lambda0, std::size_t count,
                                  const NoiseBank& noise, const SimOptions& options = {});

}  // namespace mkv
