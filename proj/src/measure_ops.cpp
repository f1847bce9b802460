#include "mkv/measure_ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "mkv/errors.hpp"

namespace mkv {

std::vector<double> uniform_edges(double lo, double hi, std::size_t bins) {
  if (bins == 0) throw PreconditionError("histogram needs at least one bin");
  if (!(lo < hi)) throw PreconditionError("histogram range must be nonempty");
  std::vector<double> edges(bins + 1);
  for (std::size_t i = 0; i <= bins; ++i) {
    edges[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(bins);
  }
  edges.back() = hi;
  return edges;
}

std::vector<double> pooled_edges(std::span<const double> a, std::span<const double> b,
                                 std::size_t bins) {
  if (a.empty() && b.empty()) throw EmptyInput("no samples to bin");
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (double v : a) lo = std::min(lo, v), hi = std::max(hi, v);
  for (double v : b) lo = std::min(lo, v), hi = std::max(hi, v);
  double pad = 0.025 * (hi - lo);
  if (!(hi > lo)) pad = 0.5;
  return uniform_edges(lo - pad, hi + pad, bins);
}

Histogram make_histogram(std::span<const double> samples, std::span<const double> edges,
                         double laplace_alpha) {
  if (samples.empty()) throw EmptyInput("histogram of an empty sample");
  if (edges.size() < 2) throw PreconditionError("histogram needs at least two edges");
  for (std::size_t i = 1; i < edges.size(); ++i) {
    if (!(edges[i] > edges[i - 1])) throw PreconditionError("histogram edges must increase strictly");
  }
  if (laplace_alpha < 0.0) throw PreconditionError("laplace alpha must be nonnegative");
  const std::size_t bins = edges.size() - 1;
  std::vector<double> counts(bins, 0.0);
  for (double v : samples) {
    auto it = std::upper_bound(edges.begin(), edges.end(), v);
    std::ptrdiff_t idx = (it - edges.begin()) - 1;
    idx = std::clamp<std::ptrdiff_t>(idx, 0, static_cast<std::ptrdiff_t>(bins) - 1);
    counts[static_cast<std::size_t>(idx)] += 1.0;
  }
  const double total = static_cast<double>(samples.size()) + laplace_alpha * static_cast<double>(bins);
  Histogram h;
  h.edges.assign(edges.begin(), edges.end());
  h.masses.resize(bins);
  for (std::size_t i = 0; i < bins; ++i) h.masses[i] = (counts[i] + laplace_alpha) / total;
  return h;
}

double empirical_cdf(std::span<const double> values, double x) {
  if (values.empty()) throw EmptyInput("empirical_cdf of an empty sample");
  std::size_t below = 0;
  for (double v : values) below += (v <= x) ? 1 : 0;
  return static_cast<double>(below) / static_cast<double>(values.size());
}

double w1_1d(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw EmptyInput("w1_1d of an empty sample");
  std::vector<double> sa(a.begin(), a.end()), sb(b.begin(), b.end());
  std::sort(sa.begin(), sa.end());
  std::sort(sb.begin(), sb.end());
  const double wa = 1.0 / static_cast<double>(sa.size());
  const double wb = 1.0 / static_cast<double>(sb.size());
  // Sweep the merged support accumulating |F_a − F_b| over each gap.
  std::size_t i = 0, k = 0;
  double fa = 0.0, fb = 0.0, total = 0.0;
  double x = std::min(sa.front(), sb.front());
  while (i < sa.size() || k < sb.size()) {
    const double next = (k >= sb.size() || (i < sa.size() && sa[i] <= sb[k])) ? sa[i] : sb[k];
    total += std::abs(fa - fb) * (next - x);
    x = next;
    while (i < sa.size() && sa[i] == x) fa = static_cast<double>(++i) * wa;
    while (k < sb.size() && sb[k] == x) fb = static_cast<double>(++k) * wb;
  }
  return total;
}

namespace {
void require_same_edges(const Histogram& a, const Histogram& b) {
  if (a.edges != b.edges) throw EdgeMismatch("histograms do not share edges");
}
}  // namespace

double tv_hist(const Histogram& a, const Histogram& b) {
  require_same_edges(a, b);
  double s = 0.0;
  for (std::size_t i = 0; i < a.masses.size(); ++i) s += std::abs(a.masses[i] - b.masses[i]);
  return std::min(1.0, 0.5 * s);
}

double kl_hist(const Histogram& p, const Histogram& q) {
  require_same_edges(p, q);
  double s = 0.0;
  for (std::size_t i = 0; i < p.masses.size(); ++i) {
    const double pi = p.masses[i];
    if (pi <= 0.0) continue;
    const double qi = q.masses[i];
    if (qi <= 0.0) return std::numeric_limits<double>::infinity();
    s += pi * std::log(pi / qi);
  }
  return std::max(0.0, s);
}

double tv_noise_floor(std::span<const double> masses, std::size_t n_a, std::size_t n_b) {
  if (n_a == 0 || n_b == 0) throw EmptyInput("noise floor needs positive sample sizes");
  const double scale = 1.0 / static_cast<double>(n_a) + 1.0 / static_cast<double>(n_b);
  double s = 0.0;
  for (double p : masses) s += std::sqrt(std::max(0.0, p * (1.0 - p)) * scale);
  // E|N(0, v)| = sqrt(2v/π)
  return 0.5 * std::sqrt(2.0 / std::numbers::pi) * s;
}

double bernoulli_kl(double a, double b) {
  if (a < 0.0 || a > 1.0 || b < 0.0 || b > 1.0) throw PreconditionError("bernoulli parameters lie in [0,1]");
  auto term = [](double x, double y) {
    if (x == 0.0) return 0.0;
    if (y == 0.0) return std::numeric_limits<double>::infinity();
    return x * std::log(x / y);
  };
  return term(a, b) + term(1.0 - a, 1.0 - b);
}

MarginalDistance sample_tv(std::span<const double> a, std::span<const double> b, std::size_t bins) {
  const auto edges = pooled_edges(a, b, bins);
  const auto ha = make_histogram(a, edges);
  const auto hb = make_histogram(b, edges);
  std::vector<double> pooled(ha.bins());
  const double wa = static_cast<double>(a.size()) / static_cast<double>(a.size() + b.size());
  for (std::size_t i = 0; i < pooled.size(); ++i) pooled[i] = wa * ha.masses[i] + (1.0 - wa) * hb.masses[i];
  return {tv_hist(ha, hb), tv_noise_floor(pooled, a.size(), b.size())};
}

Estimate estimate_mean(std::span<const double> values) {
  if (values.empty()) throw EmptyInput("mean of an empty sample");
  Estimate e;
  e.count = values.size();
  double sum = 0.0;
  for (double v : values) sum += v;
  e.mean = sum / static_cast<double>(e.count);
  if (e.count > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - e.mean) * (v - e.mean);
    e.se = std::sqrt(ss / static_cast<double>(e.count - 1) / static_cast<double>(e.count));
  }
  return e;
}

}  // namespace mkv
