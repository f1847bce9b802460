#include "mkv/coefficients.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "mkv/errors.hpp"

namespace mkv {

namespace {

std::string fmt_double(double v) {
  std::string s = std::to_string(v);
  s.erase(s.find_last_not_of('0') + 1);
  if (!s.empty() && s.back() == '.') s.pop_back();
  return s;
}

class ZeroDrift final : public DriftModel {
 public:
  explicit ZeroDrift(std::size_t dim) : dim_(dim) {}
  std::size_t dim() const override { return dim_; }
  MeasureSummary summarize(const MeasureSnapshot&) const override { return {}; }
  void value(std::size_t, const PathView&, const MeasureSummary&, std::span<double> out) const override {
    std::fill(out.begin(), out.end(), 0.0);
  }
  bool measure_dependent() const override { return false; }

 private:
  std::size_t dim_;
};

class ConstantDrift final : public DriftModel {
 public:
  explicit ConstantDrift(std::vector<double> a) : a_(std::move(a)) {}
  std::size_t dim() const override { return a_.size(); }
  MeasureSummary summarize(const MeasureSnapshot&) const override { return {}; }
  void value(std::size_t, const PathView&, const MeasureSummary&, std::span<double> out) const override {
    std::copy(a_.begin(), a_.end(), out.begin());
  }
  bool measure_dependent() const override { return false; }

 private:
  std::vector<double> a_;
};

// Summary: sorted time-t values. Rank of x is #{y ≤ x} / count.
class RankDrift final : public DriftModel {
 public:
  explicit RankDrift(ScalarFunction g) : g_(std::move(g)) {}
  std::size_t dim() const override { return 1; }

  MeasureSummary summarize(const MeasureSnapshot& mu) const override {
    if (mu.count == 0) throw EmptyInput("rank drift needs a nonempty measure snapshot");
    if (mu.dim != 1) throw ShapeError("rank drift is one-dimensional");
    MeasureSummary sorted(mu.values.begin(), mu.values.end());
    std::sort(sorted.begin(), sorted.end());
    return sorted;
  }

  void value(std::size_t t_idx, const PathView& prefix, const MeasureSummary& sorted,
             std::span<double> out) const override {
    const double x = prefix.value(t_idx);
    const auto below = std::upper_bound(sorted.begin(), sorted.end(), x) - sorted.begin();
    out[0] = g_(static_cast<double>(below) / static_cast<double>(sorted.size()));
  }

 private:
  ScalarFunction g_;
};

class MeanFieldDrift final : public DriftModel {
 public:
  MeanFieldDrift(std::size_t dim, MeanFieldOuter f, MeanFieldInner phi, bool uses_measure)
      : dim_(dim), f_(std::move(f)), phi_(std::move(phi)), uses_measure_(uses_measure) {}
  std::size_t dim() const override { return dim_; }

  MeasureSummary summarize(const MeasureSnapshot& mu) const override {
    if (mu.count == 0) throw EmptyInput("mean-field drift needs a nonempty measure snapshot");
    if (mu.dim != dim_) throw ShapeError("snapshot dimension does not match drift");
    MeasureSummary avg(dim_, 0.0);
    std::vector<double> tmp(dim_);
    for (std::size_t i = 0; i < mu.count; ++i) {
      phi_(mu.values.subspan(i * dim_, dim_), tmp);
      for (std::size_t k = 0; k < dim_; ++k) avg[k] += tmp[k];
    }
    for (auto& a : avg) a /= static_cast<double>(mu.count);
    return avg;
  }

  void value(std::size_t t_idx, const PathView& prefix, const MeasureSummary& avg,
             std::span<double> out) const override {
    f_(prefix.state(t_idx), avg, out);
  }

  bool measure_dependent() const override { return uses_measure_; }

 private:
  std::size_t dim_;
  MeanFieldOuter f_;
  MeanFieldInner phi_;
  bool uses_measure_;
};

}  // namespace

ScalarFunction ScalarFunction::identity() {
  return {"identity", [](double u) { return u; }, 1.0, 1.0};
}

ScalarFunction ScalarFunction::constant(double a) {
  return {"constant(" + fmt_double(a) + ")", [a](double) { return a; }, std::abs(a), 0.0};
}

ScalarFunction ScalarFunction::affine(double a, double b) {
  return {"affine(" + fmt_double(a) + "," + fmt_double(b) + ")",
          [a, b](double u) { return a * u + b; }, std::max(std::abs(b), std::abs(a + b)),
          std::abs(a)};
}

ScalarFunction ScalarFunction::tanh_scaled(double s) {
  return {"tanh_scaled(" + fmt_double(s) + ")", [s](double u) { return std::tanh(s * u); },
          std::abs(std::tanh(s)), std::abs(s)};
}

double estimate_sup_abs(const std::function<double(double)>& fn, double lo, double hi,
                        std::size_t points) {
  double sup = 0.0;
  for (std::size_t i = 0; i < points; ++i) {
    const double u = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(points - 1);
    sup = std::max(sup, std::abs(fn(u)));
  }
  return sup;
}

double estimate_lipschitz(const std::function<double(double)>& fn, double lo, double hi,
                          std::size_t points) {
  const double h = (hi - lo) / static_cast<double>(points - 1);
  double lip = 0.0;
  double prev = fn(lo);
  for (std::size_t i = 1; i < points; ++i) {
    const double cur = fn(lo + h * static_cast<double>(i));
    lip = std::max(lip, std::abs(cur - prev) / h);
    prev = cur;
  }
  return lip;
}

MeasureSnapshot MeasureSnapshot::of(const Cloud& cloud, std::size_t t_idx) {
  return {t_idx, cloud.size(), cloud.dim(), cloud.marginal(t_idx), &cloud};
}

DriftSpec::DriftSpec(std::shared_ptr<const DriftModel> model, double bound_c,
                     std::optional<double> tv_lipschitz_kappa, std::optional<double> entropy_L,
                     std::string name)
    : model_(std::move(model)),
      bound_c_(bound_c),
      kappa_(tv_lipschitz_kappa),
      entropy_L_(entropy_L),
      name_(std::move(name)) {
  if (!model_) throw PreconditionError("drift model is null");
  if (!(bound_c_ >= 0.0) || !std::isfinite(bound_c_)) {
    throw PreconditionError("drift bound c must be a finite nonnegative number");
  }
  if (kappa_ && !(*kappa_ >= 0.0)) throw PreconditionError("kappa must be nonnegative");
  if (entropy_L_ && !(*entropy_L_ >= 0.0)) throw PreconditionError("L must be nonnegative");
}

DriftSpec DriftSpec::with_declared(double bound_c, std::optional<double> kappa) const {
  std::optional<double> L = entropy_L_;
  if (kappa) L = 2.0 * *kappa * *kappa;
  return DriftSpec(model_, bound_c, kappa, L, name_);
}

VolatilitySpec VolatilitySpec::identity(std::size_t dim) { return scalar(dim, 1.0); }

VolatilitySpec VolatilitySpec::scalar(std::size_t dim, double s) {
  if (dim == 0) throw ShapeError("volatility dimension must be positive");
  if (s == 0.0 || !std::isfinite(s)) throw PreconditionError("scalar volatility must be invertible");
  VolatilitySpec v;
  v.dim_ = dim;
  v.scalar_ = s;
  return v;
}

VolatilitySpec VolatilitySpec::general(std::size_t dim, MatrixFn sigma, MatrixFn inverse) {
  if (dim == 0) throw ShapeError("volatility dimension must be positive");
  if (!sigma || !inverse) throw PreconditionError("general volatility needs both callbacks");
  VolatilitySpec v;
  v.dim_ = dim;
  v.sigma_ = std::move(sigma);
  v.inverse_ = std::move(inverse);
  return v;
}

std::vector<double> VolatilitySpec::evaluate(std::size_t t_idx, const PathView& prefix) const {
  std::vector<double> m(dim_ * dim_, 0.0);
  if (scalar_) {
    for (std::size_t k = 0; k < dim_; ++k) m[k * dim_ + k] = *scalar_;
  } else {
    sigma_(t_idx, prefix, m);
  }
  return m;
}

std::vector<double> VolatilitySpec::inverse_evaluate(std::size_t t_idx, const PathView& prefix) const {
  std::vector<double> m(dim_ * dim_, 0.0);
  if (scalar_) {
    for (std::size_t k = 0; k < dim_; ++k) m[k * dim_ + k] = 1.0 / *scalar_;
  } else {
    inverse_(t_idx, prefix, m);
  }
  return m;
}

namespace {
void matvec(std::span<const double> m, std::span<const double> v, std::span<double> out) {
  const std::size_t d = v.size();
  for (std::size_t r = 0; r < d; ++r) {
    double acc = 0.0;
    for (std::size_t c = 0; c < d; ++c) acc += m[r * d + c] * v[c];
    out[r] = acc;
  }
}
}  // namespace

void VolatilitySpec::apply(std::size_t t_idx, const PathView& prefix, std::span<const double> v,
                           std::span<double> out) const {
  if (scalar_) {
    for (std::size_t k = 0; k < dim_; ++k) out[k] = *scalar_ * v[k];
    return;
  }
  matvec(evaluate(t_idx, prefix), v, out);
}

void VolatilitySpec::apply_inverse(std::size_t t_idx, const PathView& prefix,
                                   std::span<const double> v, std::span<double> out) const {
  if (scalar_) {
    for (std::size_t k = 0; k < dim_; ++k) out[k] = v[k] / *scalar_;
    return;
  }
  matvec(inverse_evaluate(t_idx, prefix), v, out);
}

double VolatilitySpec::inverse_residual(std::size_t t_idx, const PathView& prefix) const {
  const auto s = evaluate(t_idx, prefix);
  const auto inv = inverse_evaluate(t_idx, prefix);
  double worst = 0.0;
  for (std::size_t r = 0; r < dim_; ++r) {
    for (std::size_t c = 0; c < dim_; ++c) {
      double acc = 0.0;
      for (std::size_t k = 0; k < dim_; ++k) acc += s[r * dim_ + k] * inv[k * dim_ + c];
      worst = std::max(worst, std::abs(acc - (r == c ? 1.0 : 0.0)));
    }
  }
  return worst;
}

double scaled_norm(const VolatilitySpec& sigma, std::size_t t_idx, const PathView& prefix,
                   std::span<const double> v) {
  if (auto s = sigma.scalar_value()) {
    double sq = 0.0;
    for (double x : v) sq += x * x;
    return std::sqrt(sq) / std::abs(*s);
  }
  std::vector<double> tmp(v.size());
  sigma.apply_inverse(t_idx, prefix, v, tmp);
  double sq = 0.0;
  for (double x : tmp) sq += x * x;
  return std::sqrt(sq);
}

void checked_drift(const DriftSpec& spec, const VolatilitySpec& sigma, std::size_t t_idx,
                   const PathView& prefix, const MeasureSummary& summary, std::span<double> out) {
  spec.evaluate(t_idx, prefix, summary, out);
  const double norm = scaled_norm(sigma, t_idx, prefix, out);
  const double c = spec.bound_c();
  if (!(norm <= c + 1e-12 * std::max(1.0, c))) {
    throw BoundViolation("|sigma^-1 b| = " + std::to_string(norm) + " exceeds declared c = " +
                         std::to_string(c) + " for " + spec.name() + " at step " +
                         std::to_string(t_idx));
  }
}

std::vector<double> eval_drift(const DriftSpec& spec, const VolatilitySpec& sigma,
                               std::size_t t_idx, const PathView& prefix, const Cloud& snapshot) {
  if (snapshot.empty()) throw EmptyInput("measure snapshot is empty");
  if (prefix.dim() != spec.dim() || snapshot.dim() != spec.dim() || sigma.dim() != spec.dim()) {
    throw ShapeError("dimension mismatch between drift, path, snapshot and sigma");
  }
  if (t_idx >= prefix.length()) throw ShapeError("path prefix does not reach t_idx");
  if (t_idx >= snapshot.grid().points()) throw GridMismatch("t_idx beyond snapshot grid");
  const auto summary = spec.summarize(MeasureSnapshot::of(snapshot, t_idx));
  std::vector<double> out(spec.dim());
  checked_drift(spec, sigma, t_idx, prefix, summary, out);
  return out;
}

DriftSpec make_zero_drift(std::size_t dim) {
  return DriftSpec(std::make_shared<ZeroDrift>(dim), 0.0, 0.0, 0.0, "zero");
}

DriftSpec make_constant_drift(std::vector<double> a) {
  if (a.empty()) throw ShapeError("constant drift needs a value");
  double sq = 0.0;
  for (double v : a) sq += v * v;
  std::string name = "constant(" + fmt_double(a[0]) + (a.size() > 1 ? ",...)" : ")");
  return DriftSpec(std::make_shared<ConstantDrift>(std::move(a)), std::sqrt(sq), 0.0, 0.0, name);
}

DriftSpec make_rank_drift(const ScalarFunction& g) {
  if (!g.fn) throw PreconditionError("rank drift needs g");
  const double sup = g.sup_abs ? *g.sup_abs : estimate_sup_abs(g.fn, 0.0, 1.0);
  const double lip = g.lipschitz ? *g.lipschitz : estimate_lipschitz(g.fn, 0.0, 1.0);
  return DriftSpec(std::make_shared<RankDrift>(g), sup, lip, 2.0 * lip * lip, "rank[" + g.name + "]");
}

DriftSpec make_mean_field_drift(std::size_t dim, MeanFieldOuter f, MeanFieldInner phi,
                                double bound_c, std::optional<double> kappa, std::string name) {
  if (!f || !phi) throw PreconditionError("mean-field drift needs f and phi");
  std::optional<double> L;
  if (kappa) L = 2.0 * *kappa * *kappa;
  return DriftSpec(std::make_shared<MeanFieldDrift>(dim, std::move(f), std::move(phi), true),
                   bound_c, kappa, L, std::move(name));
}

DriftSpec make_mean_field_drift(std::size_t dim, const ScalarFunction& g, MeanFieldPhi phi_kind) {
  MeanFieldInner phi;
  std::string phi_name;
  switch (phi_kind) {
    case MeanFieldPhi::zero:
      phi = [](std::span<const double>, std::span<double> out) { std::fill(out.begin(), out.end(), 0.0); };
      phi_name = "zero";
      break;
    case MeanFieldPhi::clamp:
      phi = [](std::span<const double> x, std::span<double> out) {
        for (std::size_t k = 0; k < x.size(); ++k) out[k] = std::clamp(x[k], -1.0, 1.0);
      };
      phi_name = "clamp";
      break;
    case MeanFieldPhi::tanh:
      phi = [](std::span<const double> x, std::span<double> out) {
        for (std::size_t k = 0; k < x.size(); ++k) out[k] = std::tanh(x[k]);
      };
      phi_name = "tanh";
      break;
  }
  auto gf = g.fn;
  MeanFieldOuter f = [gf](std::span<const double>, std::span<const double> m, std::span<double> out) {
    for (std::size_t k = 0; k < m.size(); ++k) out[k] = gf(m[k]);
  };
  // |∫φ dμ| ≤ 1, so sup|b| is sup|g| over [-1, 1] per coordinate.
  const double sup = std::max(estimate_sup_abs(gf, -1.0, 1.0), g.sup_abs.value_or(0.0));
  const double c = sup * std::sqrt(static_cast<double>(dim));
  const double lip = phi_kind == MeanFieldPhi::zero
                         ? 0.0
                         : (g.lipschitz ? *g.lipschitz : estimate_lipschitz(gf, -1.0, 1.0));
  return make_mean_field_drift(dim, std::move(f), std::move(phi), c, lip,
                               "mean_field[" + g.name + "," + phi_name + "]");
}

BoundReport check_bound(const DriftSpec& spec, const VolatilitySpec& sigma,
                        std::span<const DriftProbe> probes) {
  if (probes.empty()) throw EmptyInput("check_bound needs at least one probe");
  BoundReport report;
  std::vector<double> b(spec.dim());
  for (std::size_t p = 0; p < probes.size(); ++p) {
    const auto& probe = probes[p];
    const auto summary = spec.summarize(MeasureSnapshot::of(probe.measure, probe.t_idx));
    const auto prefix = probe.prefix.prefix(probe.t_idx);
    spec.evaluate(probe.t_idx, prefix, summary, b);
    const double norm = scaled_norm(sigma, probe.t_idx, prefix, b);
    report.max_scaled_norm = std::max(report.max_scaled_norm, norm);
    if (norm > spec.bound_c() + 1e-12 * std::max(1.0, spec.bound_c())) {
      report.violations.push_back({p, norm});
    }
  }
  return report;
}

}  // namespace mkv
