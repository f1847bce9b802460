#include "mkv/chaos_harness.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "mkv/errors.hpp"
#include "mkv/girsanov.hpp"
#include "mkv/parallel.hpp"

namespace mkv {

PathFunctional PathFunctional::terminal_indicator(double threshold) {
  return {"terminal_le(" + std::to_string(threshold) + ")",
          [threshold](const PathView& p) { return p.value(p.length() - 1) <= threshold ? 1.0 : 0.0; }};
}

PathFunctional PathFunctional::indicator_at(std::size_t t_idx, double threshold) {
  return {"le_at(" + std::to_string(t_idx) + "," + std::to_string(threshold) + ")",
          [t_idx, threshold](const PathView& p) { return p.value(t_idx) <= threshold ? 1.0 : 0.0; }};
}

PathFunctional PathFunctional::cylinder(std::vector<std::pair<std::size_t, double>> conditions) {
  return {"cylinder", [conds = std::move(conditions)](const PathView& p) {
            for (const auto& [t, a] : conds) {
              if (p.value(t) > a) return 0.0;
            }
            return 1.0;
          }};
}

Neighborhood make_neighborhood(std::vector<PathFunctional> tests, double epsilon, const Cloud& mu) {
  if (!(epsilon > 0.0)) throw PreconditionError("neighborhood epsilon must be positive");
  if (tests.empty()) throw PreconditionError("neighborhood needs at least one test function");
  Neighborhood U;
  U.epsilon = epsilon;
  for (const auto& phi : tests) {
    double sum = 0.0;
    for (std::size_t i = 0; i < mu.size(); ++i) {
      const double v = phi(mu.path(i));
      if (!(std::abs(v) <= 1.0)) throw PreconditionError("test function " + phi.name + " exceeds 1 in absolute value");
      sum += v;
    }
    U.reference.push_back(sum / static_cast<double>(mu.size()));
  }
  U.tests = std::move(tests);
  return U;
}

std::vector<ReplicaOutcome> run_replicas(const ChaosSetup& setup, std::size_t n,
                                         std::size_t replicas, const ReplicaPlan& plan) {
  if (n == 0 || replicas == 0) throw PreconditionError("need n >= 1 and replicas >= 1");
  if (!setup.mu) throw EmptyInput("chaos setup has no reference cloud");
  const TimeGrid grid = setup.mu->grid();
  if (plan.tag_t_idx > grid.steps) throw GridMismatch("tag time beyond the grid");
  if (plan.k == 0 || plan.k > n) throw PreconditionError("k must lie in [1, n]");

  std::optional<FrozenDrift> against_mu;
  if (plan.compute_gap) against_mu.emplace(setup.drift, setup.mu);

  std::vector<ReplicaOutcome> out(replicas);
  parallel_for(replicas, setup.threads, [&](std::size_t r) {
    SimOptions sim;
    sim.replica = static_cast<std::uint32_t>(r);
    auto cloud = std::make_shared<const Cloud>(
        simulate_coupled(setup.drift, setup.sigma, setup.lambda0, grid, n, setup.noise, sim));
    ReplicaOutcome& o = out[r];
    if (plan.compute_gap) {
      if (setup.drift.measure_dependent()) {
        const FrozenDrift against_empirical(setup.drift, cloud);
        o.gap = entropy_F(0, grid.steps, *cloud, against_empirical, *against_mu, setup.sigma);
      } else {
        o.gap = 0.0;
      }
    }
    const auto tagged = cloud->marginal(plan.tag_t_idx);
    for (std::size_t i = 0; i < plan.k; ++i) o.tagged.push_back(tagged[i * cloud->dim()]);
    if (plan.neighborhood) {
      for (const auto& phi : plan.neighborhood->tests) {
        double sum = 0.0;
        for (std::size_t i = 0; i < n; ++i) sum += phi(cloud->path(i));
        o.functional_means.push_back(sum / static_cast<double>(n));
      }
    }
  });
  return out;
}

Estimate gap_estimate(const std::vector<ReplicaOutcome>& outcomes) {
  std::vector<double> gaps;
  gaps.reserve(outcomes.size());
  for (const auto& o : outcomes) gaps.push_back(o.gap);
  return estimate_mean(gaps);
}

Estimate chaos_gap(const ChaosSetup& setup, std::size_t n, std::size_t replicas) {
  if (replicas < 30) throw PreconditionError("chaos_gap needs at least 30 replicas");
  return gap_estimate(run_replicas(setup, n, replicas, ReplicaPlan{}));
}

BoundChain tv_bound_chain(std::size_t k, std::size_t /*n*/, double gap, double c, double T) {
  if (!(gap >= 0.0)) throw PreconditionError("gap must be nonnegative");
  BoundChain b;
  const double a = 4.0 * static_cast<double>(k) * T * c * c;
  b.constant = a * std::exp(a);
  b.bound = std::sqrt(b.constant * std::sqrt(gap));
  // bound < 2  ⇔  sqrt(gap) < 4 / constant
  b.vacuity_gap = b.constant > 0.0 ? std::pow(4.0 / b.constant, 2) : std::numeric_limits<double>::infinity();
  b.vacuous = b.bound >= 2.0;
  return b;
}

MarginalTv marginal_tv_from_samples(std::span<const double> particle_samples,
                                    std::span<const double> mu_samples, std::size_t bins,
                                    std::uint64_t bootstrap_seed, std::size_t bootstrap) {
  const auto edges = pooled_edges(particle_samples, mu_samples, bins);
  const auto dist = sample_tv(particle_samples, mu_samples, bins);
  MarginalTv r;
  r.tv = dist.tv;
  r.noise_floor = dist.noise_floor;
  r.samples = particle_samples.size();
  if (bootstrap < 2) return r;

  Xoshiro256 gen(bootstrap_seed);
  std::vector<double> a(particle_samples.size()), b(mu_samples.size()), tvs;
  auto resample = [&gen](std::span<const double> src, std::vector<double>& dst) {
    for (auto& v : dst) v = src[static_cast<std::size_t>(gen.uniform() * static_cast<double>(src.size()))];
  };
  for (std::size_t rep = 0; rep < bootstrap; ++rep) {
    resample(particle_samples, a);
    resample(mu_samples, b);
    tvs.push_back(tv_hist(make_histogram(a, edges), make_histogram(b, edges)));
  }
  const auto e = estimate_mean(tvs);
  r.se = e.se * std::sqrt(static_cast<double>(tvs.size()));
  return r;
}

MarginalTv marginal_tv(const ChaosSetup& setup, std::size_t n, std::size_t t_idx,
                       std::size_t replicas, std::size_t bins) {
  if (replicas < 30 * bins) {
    throw PreconditionError("marginal_tv needs replicas >= 30 * bins (" + std::to_string(30 * bins) + ")");
  }
  ReplicaPlan plan;
  plan.tag_t_idx = t_idx;
  plan.compute_gap = false;
  const auto outcomes = run_replicas(setup, n, replicas, plan);
  std::vector<double> pooled;
  pooled.reserve(replicas);
  for (const auto& o : outcomes) pooled.push_back(o.tagged[0]);
  const auto mu_t = setup.mu->coordinate(t_idx);
  return marginal_tv_from_samples(pooled, mu_t, bins, setup.noise.seed ^ 0xb0075742ULL);
}

TailEstimate tail_from_outcomes(const Neighborhood& U, const std::vector<ReplicaOutcome>& outcomes) {
  TailEstimate t;
  t.replicas = outcomes.size();
  for (const auto& o : outcomes) {
    bool outside = false;
    for (std::size_t i = 0; i < U.tests.size(); ++i) {
      if (std::abs(o.functional_means.at(i) - U.reference[i]) >= U.epsilon - 1e-12) outside = true;
    }
    t.exceedances += outside ? 1 : 0;
  }
  const double R = static_cast<double>(t.replicas);
  t.probability = static_cast<double>(t.exceedances) / R;
  t.se = std::sqrt(t.probability * (1.0 - t.probability) / R);
  if (t.exceedances == 0) t.zero_count_bound = 3.0 / R;
  return t;
}

TailEstimate tail_probability(const ChaosSetup& setup, const Neighborhood& U, std::size_t n,
                              std::size_t replicas) {
  ReplicaPlan plan;
  plan.neighborhood = &U;
  plan.compute_gap = false;
  return tail_from_outcomes(U, run_replicas(setup, n, replicas, plan));
}

ChaosReport chaos_report(const ChaosSetup& setup, std::size_t n, std::size_t replicas,
                         std::size_t k, std::size_t bins,
                         const std::vector<Neighborhood>& neighborhoods) {
  if (replicas < 30) throw PreconditionError("chaos_report needs at least 30 replicas");
  const TimeGrid grid = setup.mu->grid();
  ChaosReport rep;
  rep.n = n;
  rep.replicas = replicas;
  rep.k = k;

  // Neighborhood statistics ride along with one merged plan.
  Neighborhood merged;
  std::vector<std::size_t> offsets;
  for (const auto& U : neighborhoods) {
    offsets.push_back(merged.tests.size());
    merged.tests.insert(merged.tests.end(), U.tests.begin(), U.tests.end());
  }
  ReplicaPlan plan;
  plan.tag_t_idx = grid.steps;
  plan.k = std::min(k, n);
  plan.neighborhood = merged.tests.empty() ? nullptr : &merged;
  const auto outcomes = run_replicas(setup, n, replicas, plan);

  rep.gap = gap_estimate(outcomes);
  rep.bound = tv_bound_chain(k, n, rep.gap.mean, setup.drift.bound_c(), grid.horizon);
  std::vector<double> pooled;
  for (const auto& o : outcomes) pooled.push_back(o.tagged[0]);
  rep.marginal = marginal_tv_from_samples(pooled, setup.mu->coordinate(grid.steps), bins,
                                          setup.noise.seed ^ 0xb0075742ULL);

  for (std::size_t u = 0; u < neighborhoods.size(); ++u) {
    std::vector<ReplicaOutcome> view(outcomes.size());
    for (std::size_t r = 0; r < outcomes.size(); ++r) {
      const auto& fm = outcomes[r].functional_means;
      view[r].functional_means.assign(fm.begin() + static_cast<std::ptrdiff_t>(offsets[u]),
                                      fm.begin() + static_cast<std::ptrdiff_t>(offsets[u] + neighborhoods[u].tests.size()));
    }
    rep.tails.push_back(tail_from_outcomes(neighborhoods[u], view));
  }
  return rep;
}

double bernoulli_deviation_rate(double p, double epsilon) {
  double rate = std::numeric_limits<double>::infinity();
  if (p - epsilon >= 0.0) rate = std::min(rate, bernoulli_kl(p - epsilon, p));
  if (p + epsilon <= 1.0) rate = std::min(rate, bernoulli_kl(p + epsilon, p));
  return rate;
}

SanovTable sanov_rate_check(const ChaosSetup& setup, const PathFunctional& phi, double epsilon,
                            const std::vector<std::size_t>& n_list, std::size_t replicas) {
  if (n_list.empty() || replicas == 0) throw PreconditionError("sanov_rate_check needs n values and replicas");
  if (!(epsilon > 0.0)) throw PreconditionError("epsilon must be positive");
  const Cloud& mu = *setup.mu;
  SanovTable table;
  table.epsilon = epsilon;
  {
    double sum = 0.0;
    for (std::size_t i = 0; i < mu.size(); ++i) {
      const double v = phi(mu.path(i));
      if (v != 0.0 && v != 1.0) throw PreconditionError("sanov_rate_check expects an indicator functional");
      sum += v;
    }
    table.reference = sum / static_cast<double>(mu.size());
  }
  table.limit_rate = bernoulli_deviation_rate(table.reference, epsilon);
  table.degenerate = !std::isfinite(table.limit_rate);

  // One pool of replicas × n_max iid paths; replica r's first n paths serve every n.
  const std::size_t n_max = *std::max_element(n_list.begin(), n_list.end());
  const FrozenDrift frozen(setup.drift, setup.mu);
  std::vector<std::vector<unsigned char>> hits(replicas, std::vector<unsigned char>(n_max));
  parallel_for(replicas, setup.threads, [&](std::size_t r) {
    SimOptions sim;
    sim.replica = static_cast<std::uint32_t>(r);
    simulate_frozen_each(frozen, setup.sigma, setup.lambda0, n_max, setup.noise, sim,
                         [&](std::size_t i, const PathView& p) { hits[r][i] = phi(p) != 0.0 ? 1 : 0; });
  });

  for (std::size_t n : n_list) {
    SanovRow row;
    row.n = n;
    row.replicas = replicas;
    for (std::size_t r = 0; r < replicas; ++r) {
      std::size_t count = 0;
      for (std::size_t i = 0; i < n; ++i) count += hits[r][i];
      const double mean = static_cast<double>(count) / static_cast<double>(n);
      // 1e-12 keeps lattice points such as 14/20 − 0.5 = 0.2 on the closed side.
      if (std::abs(mean - table.reference) >= epsilon - 1e-12) ++row.exceedances;
    }
    const double R = static_cast<double>(replicas);
    row.probability = static_cast<double>(row.exceedances) / R;
    row.estimable = row.exceedances >= 5;
    if (row.exceedances == 0) {
      row.rate = std::numeric_limits<double>::infinity();
    } else {
      row.rate = -std::log(row.probability) / static_cast<double>(n);
      row.rate_se = std::sqrt((1.0 - row.probability) / (R * row.probability)) / static_cast<double>(n);
    }
    table.rows.push_back(row);
  }
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    if (table.rows[i].estimable &&
        (!table.largest_estimable || table.rows[i].n > table.rows[*table.largest_estimable].n)) {
      table.largest_estimable = i;
    }
  }
  for (std::size_t i = 1; i < table.rows.size(); ++i) {
    const auto& a = table.rows[i - 1];
    const auto& b = table.rows[i];
    if (std::isinf(a.rate) && std::isinf(b.rate)) continue;
    if (std::isinf(a.rate) && a.n < b.n) {
      table.monotone = false;
      continue;
    }
    if (std::isinf(b.rate)) continue;
    const double slack = 2.0 * std::sqrt(a.rate_se * a.rate_se + b.rate_se * b.rate_se);
    if (b.n > a.n && b.rate < a.rate - slack) table.monotone = false;
  }
  if (!table.degenerate && !table.largest_estimable) {
    throw InsufficientExceedances("no n in the list reached 5 exceedances with " +
                                  std::to_string(replicas) + " replicas");
  }
  return table;
}

}  // namespace mkv
