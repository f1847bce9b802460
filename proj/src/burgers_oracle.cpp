#include "mkv/burgers_oracle.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "mkv/errors.hpp"
#include "mkv/parallel.hpp"

namespace mkv {
namespace {

double sup_of(const ScalarFunction& g) {
  return g.sup_abs ? *g.sup_abs : estimate_sup_abs(g.fn, 0.0, 1.0);
}

// Piecewise-linear table of a cumulative integral on [0, 1].
class FluxTable {
 public:
  FluxTable(const std::function<double(double)>& f, std::size_t points) : h_(1.0 / static_cast<double>(points - 1)) {
    if (points % 2 == 0) ++points, h_ = 1.0 / static_cast<double>(points - 1);
    std::vector<double> y(points);
    for (std::size_t i = 0; i < points; ++i) y[i] = f(static_cast<double>(i) * h_);
    table_.assign(points, 0.0);
    // Simpson on each panel [2j, 2j+2]; odd nodes use the panel's quadratic.
    for (std::size_t i = 0; i + 2 < points; i += 2) {
      table_[i + 1] = table_[i] + h_ / 12.0 * (5.0 * y[i] + 8.0 * y[i + 1] - y[i + 2]);
      table_[i + 2] = table_[i] + h_ / 3.0 * (y[i] + 4.0 * y[i + 1] + y[i + 2]);
    }
  }

  double operator()(double v) const {
    v = std::clamp(v, 0.0, 1.0);
    const double s = v / h_;
    const std::size_t i = std::min(static_cast<std::size_t>(s), table_.size() - 2);
    const double w = s - static_cast<double>(i);
    return table_[i] + w * (table_[i + 1] - table_[i]);
  }

 private:
  double h_;
  std::vector<double> table_;
};

}  // namespace

void PdeGrid::validate(double sup_g) const {
  if (!(x_min < x_max)) throw PreconditionError("pde grid needs x_min < x_max");
  if (nx < 2 || nt < 1) throw PreconditionError("pde grid needs nx >= 2 and nt >= 1");
  if (!(T > 0.0)) throw PreconditionError("pde horizon must be positive");
  if (dt() > max_stable_dt(sup_g) * (1.0 + 1e-12)) {
    throw CflViolation("dt = " + std::to_string(dt()) + " exceeds dx^2/(1 + dx sup|g|) = " +
                       std::to_string(max_stable_dt(sup_g)));
  }
}

PdeGrid default_pde_grid(const ScalarFunction& g, const InitialLaw& lambda0, double T,
                         double dx_target, double cfl_fraction) {
  if (!(T > 0.0) || !(dx_target > 0.0) || !(cfl_fraction > 0.0 && cfl_fraction <= 1.0)) {
    throw PreconditionError("default_pde_grid needs T > 0, dx > 0 and cfl_fraction in (0, 1]");
  }
  const double sup_g = sup_of(g);
  const double half = 6.0 * (1.0 + std::sqrt(1.0 + T)) * std::max(lambda0.spread(), 1.0) + sup_g * T;
  PdeGrid grid;
  grid.T = T;
  grid.x_min = lambda0.mean() - half;
  grid.x_max = lambda0.mean() + half;
  grid.nx = static_cast<std::size_t>(std::ceil(2.0 * half / dx_target));
  grid.nt = static_cast<std::size_t>(std::ceil(T / (cfl_fraction * grid.max_stable_dt(sup_g))));
  return grid;
}

PdeSolution::PdeSolution(PdeGrid grid, std::vector<std::size_t> step_index, std::vector<double> values)
    : grid_(grid), step_index_(std::move(step_index)), values_(std::move(values)) {
  if (step_index_.empty() || values_.size() != step_index_.size() * (grid_.nx + 1)) {
    throw ShapeError("pde solution slices do not match the grid");
  }
}

double PdeSolution::value(double t, double x) const {
  if (x <= grid_.x_min) return 0.0;
  if (x >= grid_.x_max) return 1.0;
  const double dt = grid_.dt();
  const double step = t / dt;
  auto it = std::lower_bound(step_index_.begin(), step_index_.end(), step - 1e-9,
                             [](std::size_t s, double v) { return static_cast<double>(s) < v; });
  if (it == step_index_.end()) throw GridMismatch("time beyond the stored pde slices");
  const std::size_t hi = static_cast<std::size_t>(it - step_index_.begin());
  const std::size_t lo = hi == 0 ? 0 : hi - 1;

  auto at = [&](std::size_t s) {
    const auto v = slice(s);
    const double u = (x - grid_.x_min) / grid_.dx();
    const std::size_t i = std::min(static_cast<std::size_t>(u), grid_.nx - 1);
    const double w = u - static_cast<double>(i);
    return v[i] + w * (v[i + 1] - v[i]);
  };
  if (std::abs(static_cast<double>(step_index_[hi]) - step) <= 1e-9 || hi == lo) return at(hi);
  const double w = (step - static_cast<double>(step_index_[lo])) /
                   static_cast<double>(step_index_[hi] - step_index_[lo]);
  return (1.0 - w) * at(lo) + w * at(hi);
}

PdeSolution fd_solve(const ScalarFunction& g, const InitialLaw& lambda0, const PdeGrid& grid,
                     const FdOptions& options) {
  if (lambda0.dim() != 1) throw ShapeError("fd_solve needs a one-dimensional initial law");
  const double sup_g = sup_of(g);
  grid.validate(sup_g);
  const std::size_t nx = grid.nx;
  const double dx = grid.dx();
  const double dt = grid.dt();

  std::vector<double> v(nx + 1);
  if (lambda0.kind() == InitialLaw::Kind::point) {
    const double x0 = lambda0.mean();
    if (x0 - dx <= grid.x_min || x0 + dx >= grid.x_max) {
      throw BoundaryMassError("point mass too close to the domain boundary");
    }
    for (std::size_t i = 0; i <= nx; ++i) v[i] = std::clamp((grid.x(i) - x0 + dx) / (2.0 * dx), 0.0, 1.0);
  } else {
    const double outside = lambda0.cdf(grid.x_min) + (1.0 - lambda0.cdf(grid.x_max));
    if (outside >= 1e-4) {
      throw BoundaryMassError("initial law puts mass " + std::to_string(outside) + " outside the domain");
    }
    for (std::size_t i = 0; i <= nx; ++i) v[i] = lambda0.cdf(grid.x(i));
  }
  v[0] = 0.0;
  v[nx] = 1.0;

  const FluxTable g_plus([&g](double u) { return std::max(g(u), 0.0); }, options.flux_table_points);
  const FluxTable g_minus([&g](double u) { return std::min(g(u), 0.0); }, options.flux_table_points);

  const std::size_t stride = options.slice_stride > 0 ? options.slice_stride
                                                      : std::max<std::size_t>(1, grid.nt / 200);
  std::vector<std::size_t> keep;
  for (std::size_t s = 0; s <= grid.nt; s += stride) keep.push_back(s);
  keep.push_back(grid.nt);
  for (double t : options.keep_times) {
    if (t < 0.0 || t > grid.T * (1.0 + 1e-12)) throw GridMismatch("keep time outside [0, T]");
    keep.push_back(static_cast<std::size_t>(std::llround(t / dt)));
  }
  std::sort(keep.begin(), keep.end());
  keep.erase(std::unique(keep.begin(), keep.end()), keep.end());

  std::vector<double> slices;
  slices.reserve(keep.size() * (nx + 1));
  auto check_boundary = [&](std::size_t step) {
    if (v[1] > 1e-3 || v[nx - 1] < 1.0 - 1e-3) {
      throw BoundaryMassError("mass reaches the boundary at step " + std::to_string(step) +
                              "; widen the domain");
    }
  };

  std::vector<double> flux(nx), next(nx + 1);
  const double diff = 0.5 * dt / (dx * dx);
  const double adv = dt / dx;
  std::size_t next_keep = 0;
  for (std::size_t step = 0;; ++step) {
    if (next_keep < keep.size() && keep[next_keep] == step) {
      check_boundary(step);
      slices.insert(slices.end(), v.begin(), v.end());
      ++next_keep;
    }
    if (step == grid.nt) break;
    // flux[i] sits at x_{i+1/2}
    for (std::size_t i = 0; i < nx; ++i) flux[i] = g_plus(v[i]) + g_minus(v[i + 1]);
    next[0] = 0.0;
    next[nx] = 1.0;
    for (std::size_t i = 1; i < nx; ++i) {
      next[i] = v[i] + diff * (v[i + 1] - 2.0 * v[i] + v[i - 1]) - adv * (flux[i] - flux[i - 1]);
    }
    v.swap(next);
  }
  return PdeSolution(grid, std::move(keep), std::move(slices));
}

std::vector<PdeErrorRow> compare_particle_pde(std::size_t n, std::size_t replicas,
                                              const ParticlePdeSetup& setup,
                                              const PdeSolution& pde,
                                              const std::vector<double>& times) {
  if (n == 0 || replicas == 0) throw PreconditionError("need n >= 1 and replicas >= 1");
  if (setup.lambda0.dim() != 1) throw ShapeError("particle/pde comparison is one-dimensional");
  const PdeGrid& pg = pde.grid();
  const TimeGrid grid(pg.T, setup.particle_steps);
  std::vector<std::size_t> t_idx;
  for (double t : times) t_idx.push_back(grid.index_of(t));

  std::vector<std::vector<double>> v_ref;
  for (std::size_t j = 0; j < times.size(); ++j) {
    std::vector<double> row(pg.nx + 1);
    for (std::size_t i = 0; i <= pg.nx; ++i) row[i] = pde.value(grid.time(t_idx[j]), pg.x(i));
    v_ref.push_back(std::move(row));
  }

  const DriftSpec drift = make_rank_drift(setup.g);
  const VolatilitySpec sigma = VolatilitySpec::identity(1);
  const NoiseBank noise{setup.seed, 0};
  std::vector<PdeErrorRow> rows(replicas * times.size());
  parallel_for(replicas, setup.threads, [&](std::size_t r) {
    SimOptions sim;
    sim.replica = static_cast<std::uint32_t>(r);
    const Cloud cloud = simulate_coupled(drift, sigma, setup.lambda0, grid, n, noise, sim);
    for (std::size_t j = 0; j < times.size(); ++j) {
      std::vector<double> xs = cloud.coordinate(t_idx[j]);
      std::sort(xs.begin(), xs.end());
      PdeErrorRow& row = rows[r * times.size() + j];
      row.replica = r;
      row.t = grid.time(t_idx[j]);
      std::size_t below = 0;
      double prev = 0.0;
      for (std::size_t i = 0; i <= pg.nx; ++i) {
        const double x = pg.x(i);
        while (below < xs.size() && xs[below] <= x) ++below;
        const double e = std::abs(static_cast<double>(below) / static_cast<double>(n) - v_ref[j][i]);
        row.sup_error = std::max(row.sup_error, e);
        if (i > 0) row.l1_error += 0.5 * (prev + e) * pg.dx();
        prev = e;
      }
    }
  });
  return rows;
}

}  // namespace mkv
