#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mkv/path.hpp"

namespace mkv {

/// Scalar function on [0,1] (or R) with optional declared constants.
struct ScalarFunction {
  std::string name;
  std::function<double(double)> fn;
  std::optional<double> sup_abs;    // sup |fn| on the domain of interest
  std::optional<double> lipschitz;  // Lipschitz constant on that domain

  double operator()(double u) const { return fn(u); }

  static ScalarFunction identity();
  static ScalarFunction constant(double a);
  static ScalarFunction affine(double a, double b);  // a·u + b
  static ScalarFunction tanh_scaled(double s);       // tanh(s·u)
};

// Grid probes on [lo, hi] with `points` nodes; used when constants are not declared.
double estimate_sup_abs(const std::function<double(double)>& fn, double lo, double hi,
                        std::size_t points = 1001);
double estimate_lipschitz(const std::function<double(double)>& fn, double lo, double hi,
                          std::size_t points = 1001);

/// The measure argument of the drift at one grid time. `values` holds the
/// time-t states of all members (count × dim, row per member). `cloud`, when
/// set, exposes full prefixes up to t_idx for path-dependent drifts.
struct MeasureSnapshot {
  std::size_t t_idx = 0;
  std::size_t count = 0;
  std::size_t dim = 0;
  std::span<const double> values;
  const Cloud* cloud = nullptr;

  static MeasureSnapshot of(const Cloud& cloud, std::size_t t_idx);
};

/// Drift-specific digest of a MeasureSnapshot (sorted marginal for rank
/// drifts, φ-average for mean-field drifts, empty when unused).
using MeasureSummary = std::vector<double>;

/// Implementation side of a drift b(t, x, μ). Models are immutable.
class DriftModel {
 public:
  virtual ~DriftModel() = default;
  virtual std::size_t dim() const = 0;
  virtual MeasureSummary summarize(const MeasureSnapshot& mu) const = 0;
  virtual void value(std::size_t t_idx, const PathView& prefix, const MeasureSummary& summary,
                     std::span<double> out) const = 0;
  virtual bool measure_dependent() const { return true; }
};

/// Drift coefficient with its declared constants: bound c on |σ⁻¹b|,
/// TV-Lipschitz κ in the measure argument, and the entropy constant L.
class DriftSpec {
 public:
  DriftSpec(std::shared_ptr<const DriftModel> model, double bound_c,
            std::optional<double> tv_lipschitz_kappa = std::nullopt,
            std::optional<double> entropy_L = std::nullopt, std::string name = "drift");

  std::size_t dim() const noexcept { return model_->dim(); }
  double bound_c() const noexcept { return bound_c_; }
  std::optional<double> tv_lipschitz_kappa() const noexcept { return kappa_; }
  std::optional<double> entropy_L() const noexcept { return entropy_L_; }
  const std::string& name() const noexcept { return name_; }
  bool measure_dependent() const { return model_->measure_dependent(); }

  MeasureSummary summarize(const MeasureSnapshot& mu) const { return model_->summarize(mu); }
  // No bound check; see checked_drift for the enforcing variant.
  void evaluate(std::size_t t_idx, const PathView& prefix, const MeasureSummary& summary,
                std::span<double> out) const {
    model_->value(t_idx, prefix, summary, out);
  }

  DriftSpec with_declared(double bound_c, std::optional<double> kappa) const;

 private:
  std::shared_ptr<const DriftModel> model_;
  double bound_c_;
  std::optional<double> kappa_;
  std::optional<double> entropy_L_;
  std::string name_;
};

/// σ(t, x) together with its inverse. Identity and scalar multiples take a
/// fast path; general matrices go through the supplied callbacks.
class VolatilitySpec {
 public:
  using MatrixFn = std::function<void(std::size_t t_idx, const PathView& prefix,
                                      std::span<double> out_row_major)>;

  static VolatilitySpec identity(std::size_t dim);
  static VolatilitySpec scalar(std::size_t dim, double s);
  static VolatilitySpec general(std::size_t dim, MatrixFn sigma, MatrixFn inverse);

  std::size_t dim() const noexcept { return dim_; }
  std::optional<double> scalar_value() const noexcept { return scalar_; }

  std::vector<double> evaluate(std::size_t t_idx, const PathView& prefix) const;
  std::vector<double> inverse_evaluate(std::size_t t_idx, const PathView& prefix) const;

  // out = σ v and out = σ⁻¹ v.
  void apply(std::size_t t_idx, const PathView& prefix, std::span<const double> v,
             std::span<double> out) const;
  void apply_inverse(std::size_t t_idx, const PathView& prefix, std::span<const double> v,
                     std::span<double> out) const;

  // max |(σ σ⁻¹ − I)_{ij}|
  double inverse_residual(std::size_t t_idx, const PathView& prefix) const;

 private:
  VolatilitySpec() = default;

  std::size_t dim_ = 1;
  std::optional<double> scalar_;
  MatrixFn sigma_;
  MatrixFn inverse_;
};

// |σ⁻¹ v| at (t, prefix).
double scaled_norm(const VolatilitySpec& sigma, std::size_t t_idx, const PathView& prefix,
                   std::span<const double> v);

/// Evaluates the drift and enforces |σ⁻¹b| ≤ c, throwing BoundViolation.
void checked_drift(const DriftSpec& spec, const VolatilitySpec& sigma, std::size_t t_idx,
                   const PathView& prefix, const MeasureSummary& summary, std::span<double> out);

/// b(t, x, μ) with μ given as a cloud snapshot; bound enforced.
std::vector<double> eval_drift(const DriftSpec& spec, const VolatilitySpec& sigma,
                               std::size_t t_idx, const PathView& prefix, const Cloud& snapshot);

DriftSpec make_zero_drift(std::size_t dim = 1);
DriftSpec make_constant_drift(std::vector<double> a);

/// b(t, x, μ) = g(μ_t(−∞, x_t]) in d = 1, counting ties and self (closed
/// half-line). bound_c = sup|g| on [0,1], κ = Lip(g), L = 2κ².
DriftSpec make_rank_drift(const ScalarFunction& g);

using MeanFieldOuter =
    std::function<void(std::span<const double> x, std::span<const double> m, std::span<double> out)>;
using MeanFieldInner = std::function<void(std::span<const double> x, std::span<double> out)>;

/// b(t, x, μ) = f(x_t, ∫φ dμ_t) with f and φ bounded and c (and optionally κ) declared.
DriftSpec make_mean_field_drift(std::size_t dim, MeanFieldOuter f, MeanFieldInner phi,
                                double bound_c, std::optional<double> kappa = std::nullopt,
                                std::string name = "mean_field");

/// Convenience: f(x, m) = g(m) coordinatewise, φ = clamp to [−1, 1] (or tanh).
enum class MeanFieldPhi { zero, clamp, tanh };
DriftSpec make_mean_field_drift(std::size_t dim, const ScalarFunction& g, MeanFieldPhi phi);

struct DriftProbe {
  std::size_t t_idx = 0;
  Path prefix;
  Cloud measure;
};

struct BoundViolationRecord {
  std::size_t probe = 0;
  double scaled_norm = 0.0;
};

struct BoundReport {
  double max_scaled_norm = 0.0;
  std::vector<BoundViolationRecord> violations;
};

/// Diagnostic: evaluates without enforcement and records every probe where
/// |σ⁻¹b| exceeds the declared bound.
BoundReport check_bound(const DriftSpec& spec, const VolatilitySpec& sigma,
                        std::span<const DriftProbe> probes);

}  // namespace mkv
