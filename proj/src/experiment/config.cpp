#include "mkv/experiment/config.hpp"

#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

#include "mkv/errors.hpp"

namespace mkv::exp {
namespace {

using nlohmann::json;

void only_keys(const json& obj, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) throw ConfigError(where + " must be an object");
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, _] : obj.items()) {
    if (!ok.count(key)) throw ConfigError("unknown key " + (where.empty() ? key : where + "." + key));
  }
}

template <class T>
T get(const json& obj, const char* key, const std::string& where, T fallback) {
  if (!obj.contains(key)) return fallback;
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("key " + where + "." + key + " has the wrong type");
  }
}

std::size_t get_count(const json& obj, const char* key, const std::string& where, std::size_t fallback,
                      std::size_t min_value = 1) {
  if (!obj.contains(key)) return fallback;
  const auto& v = obj.at(key);
  if (!v.is_number_integer() || v.get<long long>() < static_cast<long long>(min_value)) {
    throw ConfigError(where + "." + key + " must be an integer >= " + std::to_string(min_value));
  }
  return v.get<std::size_t>();
}

double get_positive(const json& obj, const char* key, const std::string& where, double fallback) {
  const double v = get<double>(obj, key, where, fallback);
  if (!(v > 0.0)) throw ConfigError(where + "." + key + " must be positive");
  return v;
}

std::vector<std::size_t> get_counts(const json& obj, const char* key, const std::string& where,
                                    std::vector<std::size_t> fallback) {
  if (!obj.contains(key)) return fallback;
  const auto& v = obj.at(key);
  if (!v.is_array() || v.empty()) throw ConfigError(where + "." + key + " must be a nonempty array");
  std::vector<std::size_t> out;
  for (const auto& e : v) {
    if (!e.is_number_integer() || e.get<long long>() < 1) {
      throw ConfigError(where + "." + key + " entries must be positive integers");
    }
    out.push_back(e.get<std::size_t>());
  }
  return out;
}

std::vector<double> parse_args(const std::string& spec, std::size_t open) {
  const auto close = spec.rfind(')');
  if (close == std::string::npos || close < open) throw ConfigError("malformed function " + spec);
  std::vector<double> args;
  std::stringstream ss(spec.substr(open + 1, close - open - 1));
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    const auto b = tok.find_first_not_of(' ');
    const auto e = tok.find_last_not_of(' ');
    if (b == std::string::npos) throw ConfigError("empty argument in " + spec);
    double v = 0.0;
    const auto* first = tok.data() + b;
    const auto* last = tok.data() + e + 1;
    if (*first == '+') ++first;
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last) throw ConfigError("bad number in " + spec);
    args.push_back(v);
  }
  return args;
}

}  // namespace

std::string to_string(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::solve_mkv: return "solve-mkv";
    case ExperimentKind::simulate_particles: return "simulate-particles";
    case ExperimentKind::chaos_metrics: return "chaos-metrics";
    case ExperimentKind::burgers_compare: return "burgers-compare";
    case ExperimentKind::sanov_check: return "sanov-check";
    case ExperimentKind::girsanov_check: return "girsanov-check";
  }
  return "unknown";
}

ExperimentKind parse_experiment(const std::string& name) {
  for (auto k : {ExperimentKind::solve_mkv, ExperimentKind::simulate_particles,
                 ExperimentKind::chaos_metrics, ExperimentKind::burgers_compare,
                 ExperimentKind::sanov_check, ExperimentKind::girsanov_check}) {
    if (to_string(k) == name) return k;
  }
  throw ConfigError("unknown experiment " + name);
}

ScalarFunction make_scalar_function(const std::string& spec) {
  if (spec == "identity") return ScalarFunction::identity();
  const auto open = spec.find('(');
  const std::string head = spec.substr(0, open);
  if (open == std::string::npos) throw ConfigError("unknown function " + spec);
  const auto args = parse_args(spec, open);
  if (head == "constant" && args.size() == 1) return ScalarFunction::constant(args[0]);
  if (head == "affine" && args.size() == 2) return ScalarFunction::affine(args[0], args[1]);
  if (head == "tanh" && args.size() == 1) return ScalarFunction::tanh_scaled(args[0]);
  throw ConfigError("unknown function " + spec);
}

RunConfig parse_config(const json& j) {
  only_keys(j, "", {"schema_version", "experiment", "seed", "threads", "grid", "drift", "sigma",
                    "init", "cloud", "picard", "particles", "metrics", "chaos", "neighborhood",
                    "pde", "burgers", "sanov", "girsanov"});
  if (!j.contains("schema_version") || j.at("schema_version") != kSchemaVersion) {
    throw ConfigError("schema_version must be " + std::to_string(kSchemaVersion));
  }
  if (!j.contains("experiment") || !j.at("experiment").is_string()) {
    throw ConfigError("experiment is required");
  }
  RunConfig c;
  c.experiment = parse_experiment(j.at("experiment").get<std::string>());
  if (j.contains("seed")) {
    if (!j.at("seed").is_number_unsigned() && !(j.at("seed").is_number_integer() && j.at("seed").get<long long>() >= 0)) {
      throw ConfigError("seed must be a nonnegative integer");
    }
    c.seed = j.at("seed").get<std::uint64_t>();
  }
  c.threads = static_cast<int>(get_count(j, "threads", "", 1));

  const json empty = json::object();
  auto section = [&](const char* name) -> const json& { return j.contains(name) ? j.at(name) : empty; };

  const json& grid = section("grid");
  only_keys(grid, "grid", {"T", "M"});
  c.T = get_positive(grid, "T", "grid", c.T);
  c.M = get_count(grid, "M", "grid", c.M);

  const json& drift = section("drift");
  only_keys(drift, "drift", {"kind", "g", "a", "phi", "dim", "bound_c", "kappa"});
  c.drift.kind = get<std::string>(drift, "kind", "drift", c.drift.kind);
  c.drift.g = get<std::string>(drift, "g", "drift", c.drift.g);
  c.drift.a = get<std::vector<double>>(drift, "a", "drift", c.drift.a);
  c.drift.phi = get<std::string>(drift, "phi", "drift", c.drift.phi);
  c.drift.dim = get_count(drift, "dim", "drift", c.drift.dim);
  if (drift.contains("bound_c")) {
    const double bc = get<double>(drift, "bound_c", "drift", 0.0);
    if (!(bc >= 0.0)) throw ConfigError("drift.bound_c must be nonnegative");
    c.drift.bound_c = bc;
  }
  if (drift.contains("kappa")) {
    const double k = get<double>(drift, "kappa", "drift", 0.0);
    if (!(k >= 0.0)) throw ConfigError("drift.kappa must be nonnegative");
    c.drift.kappa = k;
  }
  const std::set<std::string> kinds{"zero", "constant", "rank", "mean_field"};
  if (!kinds.count(c.drift.kind)) throw ConfigError("unknown drift.kind " + c.drift.kind);
  if (c.drift.kind == "constant") {
    if (c.drift.a.empty()) throw ConfigError("drift.a is required for a constant drift");
    c.drift.dim = c.drift.a.size();
  }
  if (c.drift.kind == "rank" && c.drift.dim != 1) throw ConfigError("rank drift is one-dimensional");
  if (c.drift.kind == "rank" || c.drift.kind == "mean_field") (void)make_scalar_function(c.drift.g);
  if (c.drift.kind == "mean_field" && c.drift.phi != "zero" && c.drift.phi != "clamp" && c.drift.phi != "tanh") {
    throw ConfigError("drift.phi must be zero, clamp or tanh");
  }

  const json& sigma = section("sigma");
  only_keys(sigma, "sigma", {"kind", "scale"});
  c.sigma.kind = get<std::string>(sigma, "kind", "sigma", c.sigma.kind);
  c.sigma.scale = get_positive(sigma, "scale", "sigma", c.sigma.scale);
  if (c.sigma.kind != "identity" && c.sigma.kind != "scalar") {
    throw ConfigError("sigma.kind must be identity or scalar");
  }

  const json& init = section("init");
  only_keys(init, "init", {"kind", "x0", "mean", "cov", "lo", "hi"});
  c.init.kind = get<std::string>(init, "kind", "init", c.init.kind);
  c.init.x0 = get<std::vector<double>>(init, "x0", "init", std::vector<double>(c.drift.dim, 0.0));
  c.init.mean = get<std::vector<double>>(init, "mean", "init", std::vector<double>(c.drift.dim, 0.0));
  {
    std::vector<double> eye(c.drift.dim * c.drift.dim, 0.0);
    for (std::size_t i = 0; i < c.drift.dim; ++i) eye[i * c.drift.dim + i] = 1.0;
    c.init.cov = get<std::vector<double>>(init, "cov", "init", eye);
  }
  c.init.lo = get<std::vector<double>>(init, "lo", "init", std::vector<double>(c.drift.dim, 0.0));
  c.init.hi = get<std::vector<double>>(init, "hi", "init", std::vector<double>(c.drift.dim, 1.0));
  if (c.init.kind != "point" && c.init.kind != "gaussian" && c.init.kind != "uniform") {
    throw ConfigError("init.kind must be point, gaussian or uniform");
  }

  const json& cloud = section("cloud");
  only_keys(cloud, "cloud", {"m"});
  c.m = get_count(cloud, "m", "cloud", c.m, 100);

  const json& picard = section("picard");
  only_keys(picard, "picard", {"max_iter", "min_iter", "tol", "bins", "crn", "profile_stride",
                               "require_convergence"});
  c.picard.max_iter = get_count(picard, "max_iter", "picard", c.picard.max_iter);
  c.picard.min_iter = get_count(picard, "min_iter", "picard", c.picard.min_iter);
  if (picard.contains("tol")) c.picard.tol = get_positive(picard, "tol", "picard", 1.0);
  c.picard.bins = get_count(picard, "bins", "picard", c.picard.bins);
  c.picard.common_random_numbers = get<bool>(picard, "crn", "picard", false);
  c.picard.profile_stride = get_count(picard, "profile_stride", "picard", c.picard.profile_stride);
  c.picard.require_convergence = get<bool>(picard, "require_convergence", "picard", false);
  if (c.picard.min_iter > c.picard.max_iter) throw ConfigError("picard.min_iter exceeds picard.max_iter");
  c.picard.m = c.m;
  c.picard.threads = c.threads;

  const json& particles = section("particles");
  only_keys(particles, "particles", {"n", "dump_paths"});
  c.n = get_count(particles, "n", "particles", c.n);
  c.dump_paths = get<bool>(particles, "dump_paths", "particles", false);

  const json& metrics = section("metrics");
  only_keys(metrics, "metrics", {"bins", "laplace_alpha"});
  c.metrics_bins = get_count(metrics, "bins", "metrics", c.metrics_bins);
  c.laplace_alpha = get<double>(metrics, "laplace_alpha", "metrics", c.laplace_alpha);
  if (!(c.laplace_alpha >= 0.0)) throw ConfigError("metrics.laplace_alpha must be nonnegative");

  const json& chaos = section("chaos");
  only_keys(chaos, "chaos", {"n_list", "replicas", "k"});
  c.chaos_n_list = get_counts(chaos, "n_list", "chaos", c.chaos_n_list);
  c.chaos_replicas = get_count(chaos, "replicas", "chaos", c.chaos_replicas, 30);
  c.chaos_k = get_count(chaos, "k", "chaos", c.chaos_k);

  const json& nbhd = section("neighborhood");
  only_keys(nbhd, "neighborhood", {"epsilon", "phi"});
  c.neighborhood_epsilon = get_positive(nbhd, "epsilon", "neighborhood", c.neighborhood_epsilon);
  if (nbhd.contains("phi")) {
    if (!nbhd.at("phi").is_array()) throw ConfigError("neighborhood.phi must be an array");
    for (const auto& f : nbhd.at("phi")) {
      only_keys(f, "neighborhood.phi[]", {"kind", "threshold", "t"});
      FunctionalConfig fc;
      fc.kind = get<std::string>(f, "kind", "neighborhood.phi[]", fc.kind);
      fc.threshold = get<double>(f, "threshold", "neighborhood.phi[]", fc.threshold);
      fc.t = get<double>(f, "t", "neighborhood.phi[]", fc.t);
      if (fc.kind != "terminal_le" && fc.kind != "le_at") {
        throw ConfigError("neighborhood.phi[].kind must be terminal_le or le_at");
      }
      c.neighborhood_phi.push_back(fc);
    }
  }

  const json& pde = section("pde");
  only_keys(pde, "pde", {"x_min", "x_max", "nx", "nt", "dx", "cfl", "x_stride"});
  if (pde.contains("x_min") || pde.contains("x_max") || pde.contains("nx") || pde.contains("nt")) {
    if (!(pde.contains("x_min") && pde.contains("x_max") && pde.contains("nx") && pde.contains("nt"))) {
      throw ConfigError("pde.x_min, pde.x_max, pde.nx and pde.nt go together");
    }
    PdeGrid g;
    g.x_min = get<double>(pde, "x_min", "pde", 0.0);
    g.x_max = get<double>(pde, "x_max", "pde", 0.0);
    g.nx = get_count(pde, "nx", "pde", 2, 2);
    g.nt = get_count(pde, "nt", "pde", 1);
    g.T = c.T;
    if (!(g.x_min < g.x_max)) throw ConfigError("pde.x_min must be below pde.x_max");
    c.pde = g;
  }
  c.pde_dx = get_positive(pde, "dx", "pde", c.pde_dx);
  c.pde_cfl = get_positive(pde, "cfl", "pde", c.pde_cfl);
  if (c.pde_cfl > 1.0) throw ConfigError("pde.cfl must be at most 1");
  c.pde_x_stride = get_count(pde, "x_stride", "pde", c.pde_x_stride);

  const json& burgers = section("burgers");
  only_keys(burgers, "burgers", {"n", "replicas", "times"});
  c.burgers_n = get_count(burgers, "n", "burgers", c.burgers_n);
  c.burgers_replicas = get_count(burgers, "replicas", "burgers", c.burgers_replicas);
  c.burgers_times = get<std::vector<double>>(burgers, "times", "burgers", {c.T});
  for (double t : c.burgers_times) {
    if (!(t >= 0.0 && t <= c.T)) throw ConfigError("burgers.times must lie in [0, T]");
  }

  const json& sanov = section("sanov");
  only_keys(sanov, "sanov", {"epsilon", "n_list", "replicas", "threshold"});
  c.sanov_epsilon = get_positive(sanov, "epsilon", "sanov", c.sanov_epsilon);
  c.sanov_n_list = get_counts(sanov, "n_list", "sanov", c.sanov_n_list);
  c.sanov_replicas = get_count(sanov, "replicas", "sanov", c.sanov_replicas);
  if (sanov.contains("threshold")) c.sanov_threshold = get<double>(sanov, "threshold", "sanov", 0.0);

  const json& girsanov = section("girsanov");
  only_keys(girsanov, "girsanov", {"m", "threshold"});
  c.girsanov_m = get_count(girsanov, "m", "girsanov", c.girsanov_m, 2);
  c.girsanov_threshold = get<double>(girsanov, "threshold", "girsanov", c.girsanov_threshold);

  if (c.experiment == ExperimentKind::burgers_compare) {
    if (c.drift.kind != "rank" && c.drift.kind != "zero") throw ConfigError("burgers-compare needs a rank or zero drift");
    if (c.drift.dim != 1 || c.sigma.kind != "identity") {
      throw ConfigError("burgers-compare needs dim 1 and sigma = identity");
    }
  }

  // Dimension checks and coefficient construction surface as ConfigError too.
  try {
    const auto d = build_drift(c);
    const auto l = build_init(c);
    if (l.dim() != d.dim()) throw ConfigError("init dimension differs from drift dimension");
    if (c.drift.bound_c) {
      // The declared bound must dominate the coefficient's own sup.
      const auto natural = build_drift([&] { RunConfig x = c; x.drift.bound_c.reset(); return x; }());
      if (*c.drift.bound_c < natural.bound_c()) {
        throw ConfigError("drift.bound_c is below the drift's supremum " + std::to_string(natural.bound_c()));
      }
    }
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }

  c.canonical = j;
  c.canonical.erase("threads");
  c.canonical["seed"] = c.seed;
  return c;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed JSON: ") + e.what());
  }
  return parse_config(j);
}

DriftSpec build_drift(const RunConfig& c) {
  std::optional<DriftSpec> d;
  if (c.drift.kind == "zero") {
    d = make_zero_drift(c.drift.dim);
  } else if (c.drift.kind == "constant") {
    d = make_constant_drift(c.drift.a);
  } else if (c.drift.kind == "rank") {
    d = make_rank_drift(make_scalar_function(c.drift.g));
  } else {
    const MeanFieldPhi phi = c.drift.phi == "zero"   ? MeanFieldPhi::zero
                             : c.drift.phi == "tanh" ? MeanFieldPhi::tanh
                                                     : MeanFieldPhi::clamp;
    d = make_mean_field_drift(c.drift.dim, make_scalar_function(c.drift.g), phi);
  }
  // Factory constants bound |b|; with σ = s·I the checked quantity is |b|/s.
  const double s = c.sigma.kind == "scalar" ? c.sigma.scale : 1.0;
  std::optional<double> kappa = d->tv_lipschitz_kappa();
  if (kappa) *kappa /= s;
  if (c.drift.kappa) kappa = c.drift.kappa;
  d = d->with_declared(c.drift.bound_c.value_or(d->bound_c() / s), kappa);
  return *d;
}

VolatilitySpec build_sigma(const RunConfig& c) {
  if (c.sigma.kind == "scalar") return VolatilitySpec::scalar(c.drift.dim, c.sigma.scale);
  return VolatilitySpec::identity(c.drift.dim);
}

InitialLaw build_init(const RunConfig& c) {
  if (c.init.kind == "gaussian") return InitialLaw::gaussian(c.init.mean, c.init.cov);
  if (c.init.kind == "uniform") return InitialLaw::uniform(c.init.lo, c.init.hi);
  return InitialLaw::point(c.init.x0);
}

TimeGrid build_grid(const RunConfig& c) { return TimeGrid(c.T, c.M); }

}  // namespace mkv::exp
