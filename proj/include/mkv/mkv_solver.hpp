#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <vector>

#include "mkv/coefficients.hpp"
#include "mkv/errors.hpp"
#include "mkv/path.hpp"
#include "mkv/sde_engine.hpp"

namespace mkv {

struct PicardOptions {
  std::size_t m = 10000;
  std::size_t max_iter = 8;
  std::size_t min_iter = 1;
  // Terminal-marginal TV tolerance; defaults to 3/√m.
  std::optional<double> tol;
  // Bins of the stopping histogram. Coarser than the 64 used for reporting
  // because the 64-bin null TV at m = 10⁴ (≈ 0.033) already exceeds 3/√m.
  std::size_t bins = 16;
  std::size_t profile_stride = 10;
  // Reuse one noise stream set across iterations (variance reduction).
  bool common_random_numbers = false;
  bool require_convergence = false;
  int threads = 1;

  double tolerance() const;
};

/// Distance between consecutive iterates μ_{k−1} and μ_k.
struct PicardIteration {
  std::size_t iteration = 0;
  std::vector<double> profile_times;
  std::vector<double> profile_tv;
  double terminal_tv = 0.0;
  double noise_floor = 0.0;
  double entropy_proxy = 0.0;
};

enum class StopReason { converged, max_iterations };

struct PicardDiagnostics {
  std::vector<PicardIteration> iterations;
  std::size_t m = 0;
  std::size_t bins = 0;
  double tol = 0.0;
  bool common_random_numbers = false;
  StopReason stop = StopReason::max_iterations;
  std::optional<double> fitted_ratio;
};

struct PicardResult {
  std::shared_ptr<const Cloud> solution;
  PicardDiagnostics diagnostics;
};

class NoConvergence : public Error {
 public:
  NoConvergence(const std::string& what, PicardDiagnostics diag)
      : Error("NoConvergence: " + what), diagnostics(std::move(diag)) {}
  PicardDiagnostics diagnostics;
};

/// Picard iteration μ_{k+1} = Φ(μ_k) on clouds, starting from the driftless
/// law. Iteration k draws noise under tag noise.iteration + k (or the base tag
/// for every k with common random numbers).
PicardResult picard_solve(const DriftSpec& drift, const VolatilitySpec& sigma,
                          const InitialLaw& lambda0, const TimeGrid& grid,
                          const PicardOptions& options, const NoiseBank& noise);

/// Least-squares geometric ratio over the leading run of distances that sit
/// clearly (2×) above their noise floors; empty with fewer than two such points.
std::optional<double> fit_geometric_ratio(const std::vector<PicardIteration>& iterations,
                                          std::size_t* informative = nullptr);

struct ContractionReport {
  std::optional<double> fitted_ratio;
  std::size_t informative_points = 0;
  double kappa = 0.0;
  double horizon = 0.0;
  double ratio_threshold = 0.0;  // κ√T·(1 + slack)
  bool within_bound = false;
  bool converged_to_floor = false;
  bool declaration_consistent = false;
  std::vector<double> envelope;  // (κ²T)^k / k!, k = 1..iterations
};

ContractionReport contraction_report(const PicardDiagnostics& diag, double kappa, double T,
                                     double slack = 0.5);

/// TV between the solution's terminal marginal and a fresh Φ(solution).
double fixed_point_residual(const PicardResult& result, const DriftSpec& drift,
                            const VolatilitySpec& sigma, const InitialLaw& lambda0,
                            const NoiseBank& noise, int threads = 1);

}  // namespace mkv
