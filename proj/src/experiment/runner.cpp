#include "mkv/experiment/runner.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iterator>
#include <limits>
#include <numbers>
#include <span>

#include "mkv/errors.hpp"
#include "mkv/experiment/csv.hpp"
#include "mkv/girsanov.hpp"
#include "mkv/measure_ops.hpp"
#include "mkv/rng.hpp"

#ifndef MKVLAB_VERSION
#define MKVLAB_VERSION "0.0.0"
#endif

namespace mkv::exp {
namespace fs = std::filesystem;
using nlohmann::json;

std::string sha256_hex(std::string_view bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw IoError("SHA-256 failed");
  }
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 15];
  }
  return out;
}

std::string sha256_file(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot read " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return sha256_hex(bytes);
}

std::string code_version() { return MKVLAB_VERSION; }

void write_manifest(const RunManifest& m, const fs::path& dir) {
  json j;
  j["experiment"] = m.experiment;
  j["config_hash"] = m.config_hash;
  j["code_version"] = m.code_version;
  j["seed"] = m.seed;
  j["checksums"] = m.checksums;
  j["wall_clock_seconds"] = m.wall_clock_seconds;
  const fs::path tmp = dir / "manifest.json.tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot write " + tmp.string());
    f << j.dump(2) << '\n';
    if (!f) throw IoError("write to " + tmp.string() + " failed");
  }
  std::error_code ec;
  fs::rename(tmp, dir / "manifest.json", ec);
  if (ec) throw IoError("cannot publish manifest: " + ec.message());
}

RunManifest read_manifest(const fs::path& dir) {
  std::ifstream f(dir / "manifest.json");
  if (!f) throw IoError("no manifest in " + dir.string());
  json j;
  f >> j;
  RunManifest m;
  m.experiment = j.at("experiment");
  m.config_hash = j.at("config_hash");
  m.code_version = j.at("code_version");
  m.seed = j.at("seed");
  m.checksums = j.at("checksums").get<std::map<std::string, std::string>>();
  m.wall_clock_seconds = j.at("wall_clock_seconds");
  return m;
}

namespace {

// Noise tags by purpose; Picard iterates occupy 0 .. max_iter.
constexpr std::uint32_t kTagParticles = 1u << 20;
constexpr std::uint32_t kTagChaos = 1u << 21;
constexpr std::uint32_t kTagSanov = 1u << 22;
constexpr std::uint32_t kTagGirsanovWeighted = 1u << 23;
constexpr std::uint32_t kTagGirsanovDirect = (1u << 23) + 1;

using Outputs = std::vector<std::string>;

const CsvSchema kSummarySchema{{"quantity", ColumnType::text}, {"value", ColumnType::real}};
using Summary = std::vector<CsvRow>;

void put(Summary& s, const std::string& name, double v) { s.push_back({name, v}); }


double quantile_sorted(const std::vector<double>& xs, double q) {
  const double pos = q * static_cast<double>(xs.size() - 1);
  const auto i = static_cast<std::size_t>(pos);
  const double w = pos - static_cast<double>(i);
  return i + 1 < xs.size() ? (1.0 - w) * xs[i] + w * xs[i + 1] : xs[i];
}

const CsvSchema kMarginalSchema{{"t", ColumnType::real},   {"mean", ColumnType::real},
                                {"sd", ColumnType::real},  {"q05", ColumnType::real},
                                {"q25", ColumnType::real}, {"q50", ColumnType::real},
                                {"q75", ColumnType::real}, {"q95", ColumnType::real}};

std::vector<CsvRow> marginal_rows(const Cloud& cloud, std::size_t stride) {
  std::vector<CsvRow> rows;
  const TimeGrid& g = cloud.grid();
  for (std::size_t j = 0; j <= g.steps; ++j) {
    if (j % stride != 0 && j != g.steps) continue;
    auto xs = cloud.coordinate(j);
    const auto e = estimate_mean(xs);
    std::sort(xs.begin(), xs.end());
    const double sd = e.se * std::sqrt(static_cast<double>(xs.size()));
    rows.push_back({g.time(j), e.mean, sd, quantile_sorted(xs, 0.05), quantile_sorted(xs, 0.25),
                    quantile_sorted(xs, 0.5), quantile_sorted(xs, 0.75), quantile_sorted(xs, 0.95)});
  }
  return rows;
}

PicardResult solve_reference(const RunConfig& c) {
  PicardOptions opts = c.picard;
  opts.m = c.m;
  opts.threads = c.threads;
  return picard_solve(build_drift(c), build_sigma(c), build_init(c), build_grid(c), opts,
                      NoiseBank{c.seed, 0});
}

double terminal_median(const Cloud& mu) {
  auto xs = mu.coordinate(mu.grid().steps);
  std::sort(xs.begin(), xs.end());
  return xs[xs.size() / 2 - 1];
}

void write_picard(const PicardResult& res, const RunConfig& c, const fs::path& dir, Outputs& out,
                  Summary& summary) {
  const auto& d = res.diagnostics;
  std::vector<CsvRow> rows, profile;
  for (const auto& it : d.iterations) {
    rows.push_back({static_cast<std::int64_t>(it.iteration), it.terminal_tv, it.noise_floor, it.entropy_proxy});
    for (std::size_t p = 0; p < it.profile_times.size(); ++p) {
      profile.push_back({static_cast<std::int64_t>(it.iteration), it.profile_times[p], it.profile_tv[p],
                         it.entropy_proxy});
    }
  }
  emit_csv(rows, {{"iteration", ColumnType::integer}, {"terminal_tv", ColumnType::real},
                  {"noise_floor", ColumnType::real}, {"entropy_proxy", ColumnType::real}},
           dir / "picard.csv");
  emit_csv(profile,
           {{"iteration", ColumnType::integer}, {"t", ColumnType::real}, {"tv", ColumnType::real},
            {"entropy_proxy", ColumnType::real}},
           dir / "picard_profile.csv");
  out.insert(out.end(), {"picard.csv", "picard_profile.csv"});
  put(summary, "iterations", static_cast<double>(d.iterations.size()));
  put(summary, "converged", d.stop == StopReason::converged ? 1.0 : 0.0);
  put(summary, "tolerance", d.tol);
  const auto kappa = build_drift(c).tv_lipschitz_kappa();
  if (kappa && d.iterations.size() >= 3) {
    const auto rep = contraction_report(d, *kappa, c.T);
    put(summary, "fitted_ratio", rep.fitted_ratio.value_or(std::numeric_limits<double>::quiet_NaN()));
    put(summary, "ratio_threshold", rep.ratio_threshold);
    put(summary, "contraction_within_bound", rep.within_bound ? 1.0 : 0.0);
    put(summary, "declaration_consistent", rep.declaration_consistent ? 1.0 : 0.0);
  }
}

void run_solve(const RunConfig& c, const fs::path& dir, Outputs& out) {
  const auto res = solve_reference(c);
  Summary summary;
  write_picard(res, c, dir, out, summary);
  emit_csv(marginal_rows(*res.solution, c.picard.profile_stride), kMarginalSchema, dir / "marginals.csv");
  out.push_back("marginals.csv");
  const auto e = estimate_mean(res.solution->coordinate(c.M));
  put(summary, "terminal_mean", e.mean);
  put(summary, "terminal_mean_se", e.se);
  emit_csv(summary, kSummarySchema, dir / "summary.csv");
  out.push_back("summary.csv");
}

void run_particles(const RunConfig& c, const fs::path& dir, Outputs& out) {
  SimOptions sim;
  sim.threads = c.threads;
  const Cloud cloud = simulate_coupled(build_drift(c), build_sigma(c), build_init(c), build_grid(c), c.n,
                                       NoiseBank{c.seed, kTagParticles}, sim);
  emit_csv(marginal_rows(cloud, c.picard.profile_stride), kMarginalSchema, dir / "marginals.csv");
  std::vector<CsvRow> terminal;
  const auto xs = cloud.marginal(c.M);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    CsvRow row{static_cast<std::int64_t>(i)};
    for (std::size_t k = 0; k < cloud.dim(); ++k) row.push_back(xs[i * cloud.dim() + k]);
    terminal.push_back(std::move(row));
  }
  CsvSchema schema{{"particle", ColumnType::integer}};
  for (std::size_t k = 0; k < cloud.dim(); ++k) schema.push_back({"x" + std::to_string(k), ColumnType::real});
  emit_csv(terminal, schema, dir / "terminal.csv");
  out.insert(out.end(), {"marginals.csv", "terminal.csv"});
  if (c.dump_paths) {
    std::vector<CsvRow> paths;
    for (std::size_t i = 0; i < cloud.size(); ++i) {
      for (std::size_t j = 0; j <= c.M; ++j) {
        for (std::size_t k = 0; k < cloud.dim(); ++k) {
          paths.push_back({std::int64_t{0}, static_cast<std::int64_t>(i), static_cast<std::int64_t>(j),
                           static_cast<std::int64_t>(k), cloud.path(i).value(j, k)});
        }
      }
    }
    emit_csv(paths,
             {{"replica", ColumnType::integer}, {"particle", ColumnType::integer}, {"step", ColumnType::integer},
              {"coordinate", ColumnType::integer}, {"value", ColumnType::real}},
             dir / "paths.csv");
    out.push_back("paths.csv");
  }
}

ChaosSetup chaos_setup(const RunConfig& c, std::shared_ptr<const Cloud> mu, std::uint32_t tag) {
  return ChaosSetup{build_drift(c), build_sigma(c), build_init(c), std::move(mu), NoiseBank{c.seed, tag},
                    c.threads};
}

void run_chaos(const RunConfig& c, const fs::path& dir, Outputs& out) {
  const auto res = solve_reference(c);
  Summary summary;
  write_picard(res, c, dir, out, summary);

  std::vector<PathFunctional> tests;
  if (c.neighborhood_phi.empty()) {
    tests.push_back(PathFunctional::terminal_indicator(terminal_median(*res.solution)));
  }
  const TimeGrid grid = build_grid(c);
  for (const auto& f : c.neighborhood_phi) {
    tests.push_back(f.kind == "le_at" ? PathFunctional::indicator_at(grid.index_of(f.t), f.threshold)
                                      : PathFunctional::terminal_indicator(f.threshold));
  }
  const std::vector<Neighborhood> U{make_neighborhood(tests, c.neighborhood_epsilon, *res.solution)};

  std::vector<CsvRow> rows, tails;
  for (std::size_t idx = 0; idx < c.chaos_n_list.size(); ++idx) {
    const std::size_t n = c.chaos_n_list[idx];
    const auto setup = chaos_setup(c, res.solution, kTagChaos + static_cast<std::uint32_t>(idx));
    const auto rep = chaos_report(setup, n, c.chaos_replicas, c.chaos_k, c.metrics_bins, U);
    rows.push_back({std::string("chaos-metrics"), static_cast<std::int64_t>(n), static_cast<std::int64_t>(c.chaos_replicas),
                    static_cast<std::int64_t>(c.chaos_k), rep.gap.mean, rep.gap.se, rep.bound.bound,
                    rep.bound.constant, rep.bound.vacuity_gap, static_cast<std::int64_t>(rep.bound.vacuous),
                    rep.marginal.tv, rep.marginal.se, rep.marginal.noise_floor});
    const auto& t = rep.tails.front();
    tails.push_back({static_cast<std::int64_t>(n), c.neighborhood_epsilon, t.probability, t.se,
                     static_cast<std::int64_t>(t.exceedances),
                     t.zero_count_bound.value_or(std::numeric_limits<double>::quiet_NaN())});
  }
  emit_csv(rows,
           {{"experiment", ColumnType::text}, {"n", ColumnType::integer}, {"replicas", ColumnType::integer},
            {"k", ColumnType::integer}, {"gap_mean", ColumnType::real}, {"gap_se", ColumnType::real}, {"bound", ColumnType::real},
            {"bound_constant", ColumnType::real}, {"vacuity_gap", ColumnType::real},
            {"vacuous", ColumnType::integer}, {"marginal_tv", ColumnType::real},
            {"marginal_tv_se", ColumnType::real}, {"tv_noise_floor", ColumnType::real}},
           dir / "chaos.csv");
  emit_csv(tails,
           {{"n", ColumnType::integer}, {"epsilon", ColumnType::real}, {"probability", ColumnType::real},
            {"se", ColumnType::real}, {"exceedances", ColumnType::integer},
            {"zero_count_bound", ColumnType::real}},
           dir / "tails.csv");
  emit_csv(summary, kSummarySchema, dir / "summary.csv");
  out.insert(out.end(), {"chaos.csv", "tails.csv", "summary.csv"});
}

ScalarFunction burgers_g(const RunConfig& c) {
  if (c.drift.kind == "rank") return make_scalar_function(c.drift.g);
  if (c.drift.kind == "zero") return ScalarFunction::constant(0.0);
  throw ConfigError("burgers-compare needs a rank or zero drift");
}

void run_burgers(const RunConfig& c, const fs::path& dir, Outputs& out) {
  if (c.drift.dim != 1) throw ConfigError("burgers-compare is one-dimensional");
  if (c.sigma.kind != "identity") throw ConfigError("burgers-compare assumes sigma = identity");
  const ScalarFunction g = burgers_g(c);
  const InitialLaw lambda0 = build_init(c);
  PdeGrid grid = c.pde ? *c.pde : default_pde_grid(g, lambda0, c.T, c.pde_dx, c.pde_cfl);
  grid.T = c.T;
  FdOptions fo;
  fo.keep_times = c.burgers_times;
  const PdeSolution pde = fd_solve(g, lambda0, grid, fo);

  std::vector<CsvRow> vrows;
  std::vector<double> times{0.0};
  times.insert(times.end(), c.burgers_times.begin(), c.burgers_times.end());
  for (double t : times) {
    for (std::size_t i = 0; i <= grid.nx; i += c.pde_x_stride) vrows.push_back({t, grid.x(i), pde.value(t, grid.x(i))});
  }
  emit_csv(vrows, {{"t", ColumnType::real}, {"x", ColumnType::real}, {"V", ColumnType::real}}, dir / "pde.csv");

  ParticlePdeSetup ps{g, lambda0, c.M, c.seed, c.threads};
  const auto errors = compare_particle_pde(c.burgers_n, c.burgers_replicas, ps, pde, c.burgers_times);
  std::vector<CsvRow> erows;
  for (const auto& e : errors) erows.push_back({static_cast<std::int64_t>(e.replica), e.t, e.sup_error, e.l1_error});
  emit_csv(erows,
           {{"replica", ColumnType::integer}, {"t", ColumnType::real}, {"sup_error", ColumnType::real},
            {"l1_error", ColumnType::real}},
           dir / "errors.csv");

  Summary summary;
  put(summary, "pde_dx", grid.dx());
  put(summary, "pde_dt", grid.dt());
  put(summary, "dkw_95", std::sqrt(std::log(2.0 / 0.05) / (2.0 * static_cast<double>(c.burgers_n))));
  for (double t : c.burgers_times) {
    std::size_t within = 0, total = 0;
    double worst = 0.0;
    for (const auto& e : errors) {
      if (std::abs(e.t - t) > 1e-12 * std::max(1.0, c.T)) continue;
      ++total;
      within += e.sup_error <= 0.05 ? 1 : 0;
      worst = std::max(worst, e.sup_error);
    }
    put(summary, "fraction_sup_le_0.05@" + format_real(t), static_cast<double>(within) / static_cast<double>(total));
    put(summary, "max_sup_error@" + format_real(t), worst);
  }
  emit_csv(summary, kSummarySchema, dir / "summary.csv");
  out.insert(out.end(), {"pde.csv", "errors.csv", "summary.csv"});
}

void run_sanov(const RunConfig& c, const fs::path& dir, Outputs& out) {
  const auto res = solve_reference(c);
  Summary summary;
  write_picard(res, c, dir, out, summary);
  const double threshold = c.sanov_threshold.value_or(terminal_median(*res.solution));
  const auto table = sanov_rate_check(chaos_setup(c, res.solution, kTagSanov),
                                      PathFunctional::terminal_indicator(threshold), c.sanov_epsilon,
                                      c.sanov_n_list, c.sanov_replicas);
  std::vector<CsvRow> rows;
  for (const auto& r : table.rows) {
    rows.push_back({static_cast<std::int64_t>(r.n), static_cast<std::int64_t>(r.replicas),
                    static_cast<std::int64_t>(r.exceedances), r.probability, r.rate, r.rate_se,
                    static_cast<std::int64_t>(r.estimable),
                    std::exp(-static_cast<double>(r.n) * 0.75 * table.limit_rate)});
  }
  emit_csv(rows,
           {{"n", ColumnType::integer}, {"replicas", ColumnType::integer}, {"exceedances", ColumnType::integer},
            {"probability", ColumnType::real}, {"rate", ColumnType::real}, {"rate_se", ColumnType::real},
            {"estimable", ColumnType::integer}, {"slack_bound", ColumnType::real}},
           dir / "sanov.csv");
  put(summary, "threshold", threshold);
  put(summary, "reference_probability", table.reference);
  put(summary, "limit_rate", table.limit_rate);
  put(summary, "monotone", table.monotone ? 1.0 : 0.0);
  if (table.largest_estimable) {
    put(summary, "largest_estimable_n", static_cast<double>(table.rows[*table.largest_estimable].n));
  }
  emit_csv(summary, kSummarySchema, dir / "summary.csv");
  out.insert(out.end(), {"sanov.csv", "summary.csv"});
}

void run_girsanov(const RunConfig& c, const fs::path& dir, Outputs& out) {
  const DriftSpec drift = build_drift(c);
  const VolatilitySpec sigma = build_sigma(c);
  const InitialLaw lambda0 = build_init(c);
  const TimeGrid grid = build_grid(c);
  Summary summary;
  std::shared_ptr<const Cloud> mu;
  if (drift.measure_dependent()) {
    const auto res = solve_reference(c);
    write_picard(res, c, dir, out, summary);
    mu = res.solution;
  } else {
    mu = std::make_shared<const Cloud>(grid, 1, drift.dim());
  }
  const FrozenDrift frozen(drift, mu);
  SimOptions sim;
  sim.threads = c.threads;
  const auto ws = weighted_driftless(frozen, sigma, lambda0, c.girsanov_m,
                                     NoiseBank{c.seed, kTagGirsanovWeighted}, sim);
  const Cloud direct = simulate_frozen(frozen, sigma, lambda0, c.girsanov_m,
                                       NoiseBank{c.seed, kTagGirsanovDirect}, sim);

  std::vector<double> z, zphi, phi_direct;
  const auto x0 = ws.paths.marginal(c.M);
  const auto xb = direct.marginal(c.M);
  const std::size_t d = drift.dim();
  for (std::size_t i = 0; i < c.girsanov_m; ++i) {
    z.push_back(ws.ledgers[i].z());
    zphi.push_back(z.back() * (x0[i * d] <= c.girsanov_threshold ? 1.0 : 0.0));
    phi_direct.push_back(xb[i * d] <= c.girsanov_threshold ? 1.0 : 0.0);
  }
  const FrozenDrift zero(make_zero_drift(d), mu);
  const double entropy = entropy_between_solutions(direct, frozen, zero, sigma, c.M);
  const auto x0_t = ws.paths.coordinate(c.M);
  const auto xb_t = direct.coordinate(c.M);
  const auto edges = pooled_edges(xb_t, x0_t, c.metrics_bins);
  auto kl_of = [&](std::span<const double> a, std::span<const double> b) {
    return kl_hist(make_histogram(a, edges, c.laplace_alpha), make_histogram(b, edges, c.laplace_alpha));
  };
  const double kl = kl_of(xb_t, x0_t);
  // Bootstrap spread of the plug-in KL on fixed edges.
  Xoshiro256 gen(c.seed ^ 0x6b6c626fu);
  std::vector<double> a(xb_t.size()), b(x0_t.size()), kls;
  auto resample = [&gen](std::span<const double> src, std::vector<double>& dst) {
    for (auto& v : dst) v = src[static_cast<std::size_t>(gen.uniform() * static_cast<double>(src.size()))];
  };
  for (int rep = 0; rep < 200; ++rep) {
    resample(xb_t, a);
    resample(x0_t, b);
    kls.push_back(kl_of(a, b));
  }
  const double kl_se = estimate_mean(kls).se * std::sqrt(static_cast<double>(kls.size()));

  const auto ez = estimate_mean(z);
  const auto ew = estimate_mean(zphi);
  const auto ed = estimate_mean(phi_direct);
  std::vector<CsvRow> rows{{std::string("mean_Z"), ez.mean, ez.se},
                           {std::string("direct_phi"), ed.mean, ed.se},
                           {std::string("weighted_phi"), ew.mean, ew.se},
                           {std::string("path_entropy_vs_driftless"), entropy, 0.0},
                           {std::string("terminal_kl_vs_driftless"), kl, kl_se}};
  emit_csv(rows, {{"quantity", ColumnType::text}, {"estimate", ColumnType::real}, {"se", ColumnType::real}},
           dir / "girsanov.csv");
  put(summary, "z_within_3se", std::abs(ez.mean - 1.0) <= 3.0 * ez.se ? 1.0 : 0.0);
  put(summary, "phi_within_3se",
      std::abs(ew.mean - ed.mean) <= 3.0 * std::hypot(ew.se, ed.se) ? 1.0 : 0.0);
  emit_csv(summary, kSummarySchema, dir / "summary.csv");
  out.insert(out.end(), {"girsanov.csv", "summary.csv"});
}

}  // namespace

RunManifest run_experiment(const RunConfig& c, const fs::path& out_dir) {
  const auto start = std::chrono::steady_clock::now();
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create " + out_dir.string() + ": " + ec.message());

  Outputs outputs;
  switch (c.experiment) {
    case ExperimentKind::solve_mkv: run_solve(c, out_dir, outputs); break;
    case ExperimentKind::simulate_particles: run_particles(c, out_dir, outputs); break;
    case ExperimentKind::chaos_metrics: run_chaos(c, out_dir, outputs); break;
    case ExperimentKind::burgers_compare: run_burgers(c, out_dir, outputs); break;
    case ExperimentKind::sanov_check: run_sanov(c, out_dir, outputs); break;
    case ExperimentKind::girsanov_check: run_girsanov(c, out_dir, outputs); break;
  }

  RunManifest m;
  m.experiment = to_string(c.experiment);
  m.config_hash = sha256_hex(c.canonical.dump());
  m.code_version = code_version();
  m.seed = c.seed;
  for (const auto& name : outputs) m.checksums[name] = sha256_file(out_dir / name);
  m.wall_clock_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  write_manifest(m, out_dir);
  return m;
}

int run_and_report(const json& config_json, const fs::path& out_dir, std::string* message) {
  RunConfig config;
  try {
    config = parse_config(config_json);
  } catch (const ConfigError& e) {
    if (message) *message = e.what();
    return 2;
  }
  try {
    run_experiment(config, out_dir);
    return 0;
  } catch (const std::exception& e) {
    if (message) *message = e.what();
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    json diag{{"experiment", to_string(config.experiment)}, {"seed", config.seed}, {"error", e.what()}};
    if (const auto* nc = dynamic_cast<const NoConvergence*>(&e)) {
      json its = json::array();
      for (const auto& it : nc->diagnostics.iterations) {
        its.push_back({{"iteration", it.iteration}, {"terminal_tv", it.terminal_tv}, {"noise_floor", it.noise_floor}});
      }
      diag["picard_iterations"] = its;
    }
    std::ofstream f(out_dir / "failure.json");
    f << diag.dump(2) << '\n';
    return 1;
  }
}

}  // namespace mkv::exp
