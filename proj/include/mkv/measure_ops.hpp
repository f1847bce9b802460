#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace mkv {

/// Normalized histogram on strictly increasing edges (B+1 edges, B masses).
struct Histogram {
  std::vector<double> edges;
  std::vector<double> masses;

  std::size_t bins() const noexcept { return masses.size(); }
};

/// Uniform edges over the pooled range of the samples, widened by 5% of the
/// range in total (2.5% on each side). Degenerate ranges get unit width.
std::vector<double> pooled_edges(std::span<const double> a, std::span<const double> b,
                                 std::size_t bins);
std::vector<double> uniform_edges(double lo, double hi, std::size_t bins);

/// Samples outside the edges are clamped into the end bins. laplace_alpha
/// adds α pseudo-counts to every bin before normalizing.
Histogram make_histogram(std::span<const double> samples, std::span<const double> edges,
                         double laplace_alpha = 0.0);

/// Fraction of values ≤ x.
double empirical_cdf(std::span<const double> values, double x);

/// 1-Wasserstein distance between the empirical laws of a and b, computed as
/// ∫|F_a − F_b| dx (equals the mean gap of sorted samples when sizes agree).
double w1_1d(std::span<const double> a, std::span<const double> b);

/// Total variation in [0, 1]: ½ Σ|p − q|. Half of the sup-over-|f|≤1 norm.
double tv_hist(const Histogram& a, const Histogram& b);

/// Σ p log(p/q) in nats; +infinity when p charges a bin q does not.
double kl_hist(const Histogram& p, const Histogram& q);

/// Expected tv_hist between two independent samples of sizes n_a and n_b
/// drawn from the same law with bin masses `masses` (normal approximation).
double tv_noise_floor(std::span<const double> masses, std::size_t n_a, std::size_t n_b);

/// KL(Ber(a) ‖ Ber(b)) in nats.
double bernoulli_kl(double a, double b);

struct MarginalDistance {
  double tv = 0.0;
  double noise_floor = 0.0;
};

/// tv_hist between two samples on pooled edges with its null noise floor.
MarginalDistance sample_tv(std::span<const double> a, std::span<const double> b, std::size_t bins);

struct Estimate {
  double mean = 0.0;
  double se = 0.0;
  std::size_t count = 0;
};

/// Sample mean and standard error (n − 1 normalization).
Estimate estimate_mean(std::span<const double> values);

}  // namespace mkv
