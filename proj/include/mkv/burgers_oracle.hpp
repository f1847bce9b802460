#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "mkv/coefficients.hpp"
#include "mkv/sde_engine.hpp"

namespace mkv {

/// Uniform space-time grid for the CDF equation ∂_t V = ½ V_xx − ∂_x G(V).
struct PdeGrid {
  double x_min = -1.0;
  double x_max = 1.0;
  std::size_t nx = 2;  // cells; nx + 1 nodes
  std::size_t nt = 1;  // time steps
  double T = 1.0;

  double dx() const noexcept { return (x_max - x_min) / static_cast<double>(nx); }
  double dt() const noexcept { return T / static_cast<double>(nt); }
  double x(std::size_t i) const noexcept { return x_min + static_cast<double>(i) * dx(); }
  // dx² / (1 + dx·sup|g|)
  double max_stable_dt(double sup_g) const noexcept { return dx() * dx() / (1.0 + dx() * sup_g); }

  void validate(double sup_g) const;  // throws PreconditionError / CflViolation
};

/// Domain ±6(1+√(1+T))·max(spread, 1) + sup|g|·T around λ0's mean, spacing
/// close to `dx_target`, and a time step at `cfl_fraction` of the limit.
PdeGrid default_pde_grid(const ScalarFunction& g, const InitialLaw& lambda0, double T,
                         double dx_target = 0.0125, double cfl_fraction = 0.9);

/// Time slices of V kept by fd_solve: slice s is V at step step_index[s].
class PdeSolution {
 public:
  PdeSolution(PdeGrid grid, std::vector<std::size_t> step_index, std::vector<double> values);

  const PdeGrid& grid() const noexcept { return grid_; }
  std::size_t slices() const noexcept { return step_index_.size(); }
  double slice_time(std::size_t s) const noexcept {
    return static_cast<double>(step_index_[s]) * grid_.dt();
  }
  std::span<const double> slice(std::size_t s) const noexcept {
    return {values_.data() + s * (grid_.nx + 1), grid_.nx + 1};
  }
  // Bilinear in stored slices; x outside the domain returns 0 or 1.
  double value(double t, double x) const;

 private:
  PdeGrid grid_;
  std::vector<std::size_t> step_index_;
  std::vector<double> values_;
};

struct FdOptions {
  // Store every `slice_stride`-th step (0 picks a stride giving about 200 slices).
  std::size_t slice_stride = 0;
  // Additional times that must be stored exactly (rounded to the nearest step).
  std::vector<double> keep_times;
  std::size_t flux_table_points = 4097;
};

/// Explicit conservative scheme: centered second difference for ½V_xx and
/// the Engquist–Osher flux for G(V), G = ∫_0 g. Dirichlet 0 / 1 boundaries.
PdeSolution fd_solve(const ScalarFunction& g, const InitialLaw& lambda0, const PdeGrid& grid,
                     const FdOptions& options = {});

struct PdeErrorRow {
  std::size_t replica = 0;
  double t = 0.0;
  double sup_error = 0.0;  // max over grid nodes of |F̂ⁿ − V|
  double l1_error = 0.0;   // ∫|F̂ⁿ − V| dx (trapezoid on grid nodes)
};

struct ParticlePdeSetup {
  ScalarFunction g;
  InitialLaw lambda0;
  std::size_t particle_steps = 100;
  std::uint64_t seed = 0;
  int threads = 1;
};

/// Empirical CDF of simulate_coupled (rank drift g) against V(t, ·) at each
/// requested time, one row per (replica, time).
std::vector<PdeErrorRow> compare_particle_pde(std::size_t n, std::size_t replicas,
                                              const ParticlePdeSetup& setup,
                                              const PdeSolution& pde,
                                              const std::vector<double>& times);

}  // namespace mkv
