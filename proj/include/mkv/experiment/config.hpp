#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "mkv/burgers_oracle.hpp"
#include "mkv/chaos_harness.hpp"
#include "mkv/coefficients.hpp"
#include "mkv/mkv_solver.hpp"
#include "mkv/sde_engine.hpp"

namespace mkv::exp {

inline constexpr int kSchemaVersion = 1;

enum class ExperimentKind {
  solve_mkv,
  simulate_particles,
  chaos_metrics,
  burgers_compare,
  sanov_check,
  girsanov_check
};

std::string to_string(ExperimentKind kind);
ExperimentKind parse_experiment(const std::string& name);  // ConfigError on unknown names

struct DriftConfig {
  std::string kind = "zero";            // zero | constant | rank | mean_field
  std::string g = "identity";           // identity | constant(a) | affine(a,b) | tanh(s)
  std::vector<double> a;                // constant drift vector
  std::string phi = "clamp";            // mean_field: zero | clamp | tanh
  std::size_t dim = 1;
  std::optional<double> bound_c;        // declared bound, must dominate sup|σ⁻¹b|
  std::optional<double> kappa;
};

struct SigmaConfig {
  std::string kind = "identity";  // identity | scalar
  double scale = 1.0;
};

struct InitConfig {
  std::string kind = "point";  // point | gaussian | uniform
  std::vector<double> x0{0.0};
  std::vector<double> mean{0.0};
  std::vector<double> cov{1.0};
  std::vector<double> lo{0.0};
  std::vector<double> hi{1.0};
};

struct FunctionalConfig {
  std::string kind = "terminal_le";  // terminal_le | le_at
  double threshold = 0.0;
  double t = 0.0;                    // le_at only
};

struct RunConfig {
  ExperimentKind experiment = ExperimentKind::solve_mkv;
  std::uint64_t seed = 0;
  int threads = 1;

  double T = 1.0;
  std::size_t M = 200;
  DriftConfig drift;
  SigmaConfig sigma;
  InitConfig init;

  std::size_t m = 10000;  // reference cloud size
  PicardOptions picard;   // m and threads are copied in from above

  std::size_t n = 1000;
  bool dump_paths = false;  // simulate-particles: long-format paths.csv
  std::size_t metrics_bins = 64;
  double laplace_alpha = 0.0;

  std::vector<std::size_t> chaos_n_list{50, 200};
  std::size_t chaos_replicas = 30;
  std::size_t chaos_k = 1;

  double neighborhood_epsilon = 0.1;
  std::vector<FunctionalConfig> neighborhood_phi;

  std::optional<PdeGrid> pde;  // absent: default grid
  double pde_dx = 0.0125;
  double pde_cfl = 0.9;
  std::size_t pde_x_stride = 8;  // CSV decimation in x

  std::size_t burgers_n = 2000;
  std::size_t burgers_replicas = 20;
  std::vector<double> burgers_times;  // default {T}

  double sanov_epsilon = 0.2;
  std::vector<std::size_t> sanov_n_list{20, 50, 100};
  std::size_t sanov_replicas = 20000;
  std::optional<double> sanov_threshold;  // default: median of μ_T

  std::size_t girsanov_m = 10000;
  double girsanov_threshold = 0.5;

  // Canonical JSON of the validated input, with threads removed: the key of
  // the determinism contract.
  nlohmann::json canonical;
};

/// Parses and validates; throws ConfigError with the offending key.
RunConfig parse_config(const nlohmann::json& j);
RunConfig load_config(const std::string& path);

// Builders from the validated config.
ScalarFunction make_scalar_function(const std::string& spec);
DriftSpec build_drift(const RunConfig& c);
VolatilitySpec build_sigma(const RunConfig& c);
InitialLaw build_init(const RunConfig& c);
TimeGrid build_grid(const RunConfig& c);

}  // namespace mkv::exp
