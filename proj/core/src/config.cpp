#include "scarlab/config.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>
#include <thread>

#define TOML_EXCEPTIONS 1
#include <toml.hpp>

#include "scarlab/analysis.hpp"
#include "scarlab/io.hpp"

namespace scarlab {
namespace {

[[noreturn]] void fail(const std::string& path, const std::string& what) { throw ConfigError(path + ": " + what); }

class Section {
 public:
  Section(const toml::table* table, std::string name) : table_(table), name_(std::move(name)) {}

  [[nodiscard]] std::string path(std::string_view key) const {
    return name_.empty() ? std::string(key) : name_ + "." + std::string(key);
  }

  std::optional<double> number(std::string_view key) {
    const toml::node* n = take(key);
    if (!n) return std::nullopt;
    if (auto v = n->value_exact<double>()) return check_finite(key, *v);
    if (auto v = n->value_exact<std::int64_t>()) return static_cast<double>(*v);
    fail(path(key), "expected a number");
  }

  std::optional<std::int64_t> integer(std::string_view key) {
    const toml::node* n = take(key);
    if (!n) return std::nullopt;
    if (auto v = n->value_exact<std::int64_t>()) return *v;
    fail(path(key), "expected an integer");
  }

  std::optional<int> small_int(std::string_view key) {
    auto v = integer(key);
    if (!v) return std::nullopt;
    if (*v < std::numeric_limits<int>::min() || *v > std::numeric_limits<int>::max()) fail(path(key), "out of range");
    return static_cast<int>(*v);
  }

  std::optional<std::string> string(std::string_view key) {
    const toml::node* n = take(key);
    if (!n) return std::nullopt;
    if (auto v = n->value_exact<std::string>()) return *v;
    fail(path(key), "expected a string");
  }

  std::optional<std::vector<double>> numbers(std::string_view key) {
    const toml::node* n = take(key);
    if (!n) return std::nullopt;
    const auto* arr = n->as_array();
    if (!arr) fail(path(key), "expected an array of numbers");
    std::vector<double> out;
    for (std::size_t i = 0; i < arr->size(); ++i) {
      const auto& e = (*arr)[i];
      if (auto v = e.value_exact<double>()) {
        out.push_back(check_finite(key, *v));
      } else if (auto w = e.value_exact<std::int64_t>()) {
        out.push_back(static_cast<double>(*w));
      } else {
        fail(path(key) + "[" + std::to_string(i) + "]", "expected a number");
      }
    }
    return out;
  }

  std::optional<std::vector<std::string>> strings(std::string_view key) {
    const toml::node* n = take(key);
    if (!n) return std::nullopt;
    const auto* arr = n->as_array();
    if (!arr) fail(path(key), "expected an array of strings");
    std::vector<std::string> out;
    for (std::size_t i = 0; i < arr->size(); ++i) {
      auto v = (*arr)[i].value_exact<std::string>();
      if (!v) fail(path(key) + "[" + std::to_string(i) + "]", "expected a string");
      out.push_back(*v);
    }
    return out;
  }

  std::optional<Resonance> resonance(std::string_view key) {
    const toml::node* n = take(key);
    if (!n) return std::nullopt;
    const auto* arr = n->as_array();
    if (!arr || arr->size() != 2) fail(path(key), "expected [v_theta, v_r]");
    auto a = (*arr)[0].value_exact<std::int64_t>();
    auto b = (*arr)[1].value_exact<std::int64_t>();
    if (!a || !b || *a > 1000 || *b > 1000) fail(path(key), "expected two small integers [v_theta, v_r]");
    Resonance r{static_cast<int>(*a), static_cast<int>(*b)};
    try {
      validate(r);
    } catch (const std::exception& e) {
      fail(path(key), e.what());
    }
    return r;
  }

  void mark(std::string_view key) { used_.insert(std::string(key)); }

  void finish() const {
    if (!table_) return;
    for (auto&& [k, v] : *table_) {
      if (!used_.count(std::string(k.str()))) fail(path(k.str()), "unknown key");
    }
  }

 private:
  const toml::node* take(std::string_view key) {
    used_.insert(std::string(key));
    if (!table_) return nullptr;
    return table_->get(key);
  }

  double check_finite(std::string_view key, double v) const {
    if (!std::isfinite(v)) fail(path(key), "must be finite");
    return v;
  }

  const toml::table* table_;
  std::string name_;
  std::set<std::string> used_;
};

void require(bool ok, const std::string& path, const std::string& what) {
  if (!ok) fail(path, what);
}

std::string resonance_text(const Resonance& r) {
  return "[" + std::to_string(r.v_theta) + ", " + std::to_string(r.v_r) + "]";
}

std::string list_text(const std::vector<double>& v) {
  std::string s = "[";
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + format_double(v[i]);
  return s + "]";
}

}  // namespace

ExperimentConfig parse_config(std::string_view text, const ConfigOverrides& overrides) {
  toml::table root;
  try {
    root = toml::parse(text);
  } catch (const toml::parse_error& e) {
    std::ostringstream os;
    os << "line " << e.source().begin.line << ": " << e.description();
    throw ConfigError(os.str());
  }

  static const std::vector<std::string> tables = {"system", "grid",    "solver",    "bumps",     "dos",
                                                  "scars",  "pinning", "classical", "resonances"};
  Section top(&root, "");
  for (const auto& t : tables) {
    top.mark(t);
    if (const auto* n = root.get(t); n && !n->is_table()) fail(t, "expected a table");
  }
  auto section = [&](const std::string& name) { return Section(root.get_as<toml::table>(name), name); };

  ExperimentConfig c;

  // top level
  if (auto v = top.integer("seed")) {
    require(*v >= 0, "seed", "must be >= 0");
    c.seed = static_cast<std::uint64_t>(*v);
  } else if (!overrides.seed) {
    fail("seed", "required (set it in the config or pass --seed)");
  }
  if (overrides.seed) c.seed = *overrides.seed;
  if (auto v = top.string("out")) c.out = *v;
  if (overrides.out) c.out = *overrides.out;
  if (auto v = top.small_int("threads")) {
    require(*v >= 0, "threads", "must be >= 0 (0 = all cores)");
    c.threads = *v;
  }
  if (overrides.threads) {
    require(*overrides.threads >= 0, "threads", "must be >= 0 (0 = all cores)");
    c.threads = *overrides.threads;
  }
  top.finish();

  {
    Section s = section("system");
    if (auto v = s.number("omega0")) c.system.omega0 = *v;
    require(c.system.omega0 > 0.0, "system.omega0", "must be > 0");
    auto B = s.number("B");
    auto res = s.resonance("resonance");
    if (B && res) fail("system.resonance", "give either B or resonance, not both");
    if (B) c.system.B = *B;
    if (res) {
      if (c.system.omega0 != 1.0) fail("system.resonance", "resonance fields assume omega0 = 1");
      c.system_resonance = *res;
      c.system.B = resonance_field(*res);
    }
    s.finish();
  }
  {
    Section s = section("grid");
    if (auto v = s.small_int("n")) c.grid.nx = c.grid.ny = *v;
    if (auto v = s.small_int("nx")) c.grid.nx = *v;
    if (auto v = s.small_int("ny")) c.grid.ny = *v;
    if (auto v = s.number("half_extent")) c.grid.half_extent = *v;
    require(c.grid.nx >= 16, "grid.nx", "must be >= 16");
    require(c.grid.ny >= 16, "grid.ny", "must be >= 16");
    require(c.grid.half_extent >= 0.0, "grid.half_extent", "must be >= 0 (0 = automatic)");
    s.finish();
  }
  {
    Section s = section("solver");
    if (auto v = s.small_int("n_states")) c.solver.n_states = *v;
    if (auto v = s.number("convergence_tol")) c.solver.convergence_tol = *v;
    if (auto v = s.small_int("max_sweeps")) c.solver.max_sweeps = *v;
    if (auto v = s.small_int("max_sweeps_per_stage")) c.solver.max_sweeps_per_stage = *v;
    if (auto v = s.small_int("guard_states")) c.solver.guard_states = *v;
    auto sched = s.numbers("epsilon_schedule");
    auto e0 = s.number("eps_start");
    auto e1 = s.number("eps_end");
    auto ef = s.number("eps_factor");
    if (sched && (e0 || e1 || ef)) fail("solver.epsilon_schedule", "give either a schedule or eps_start/eps_end/eps_factor");
    if (sched) {
      c.solver.epsilon_schedule = *sched;
    } else if (e0 || e1 || ef) {
      const double a = e0.value_or(0.1);
      const double b = e1.value_or(1e-4);
      const double f = ef.value_or(0.5);
      require(a > 0.0, "solver.eps_start", "must be > 0");
      require(b > 0.0 && b <= a, "solver.eps_end", "must be in (0, eps_start]");
      require(f > 0.0 && f < 1.0, "solver.eps_factor", "must be in (0, 1)");
      c.solver.epsilon_schedule = default_epsilon_schedule(a, b, f);
    }
    require(c.solver.n_states >= 1, "solver.n_states", "must be >= 1");
    require(c.solver.convergence_tol > 0.0, "solver.convergence_tol", "must be > 0");
    require(c.solver.max_sweeps >= 1, "solver.max_sweeps", "must be >= 1");
    require(c.solver.max_sweeps_per_stage >= 1, "solver.max_sweeps_per_stage", "must be >= 1");
    require(c.solver.guard_states >= -1, "solver.guard_states", "must be >= 0 (or -1 = automatic)");
    require(!c.solver.epsilon_schedule.empty(), "solver.epsilon_schedule", "must not be empty");
    for (std::size_t i = 0; i < c.solver.epsilon_schedule.size(); ++i) {
      const double e = c.solver.epsilon_schedule[i];
      require(e > 0.0, "solver.epsilon_schedule", "steps must be > 0");
      if (i > 0) require(e <= c.solver.epsilon_schedule[i - 1], "solver.epsilon_schedule", "must be non-increasing");
    }
    s.finish();
  }
  {
    Section s = section("bumps");
    if (auto v = s.string("kind")) {
      if (*v == "none") c.bumps.kind = BumpKind::none;
      else if (*v == "random") c.bumps.kind = BumpKind::random;
      else if (*v == "single") c.bumps.kind = BumpKind::single;
      else fail("bumps.kind", "expected \"none\", \"random\" or \"single\", got \"" + *v + "\"");
    }
    if (auto v = s.number("amplitude")) c.bumps.amplitude = *v;
    auto fwhm = s.number("fwhm");
    auto sigma = s.number("sigma");
    if (fwhm && sigma) fail("bumps.sigma", "give either fwhm or sigma, not both");
    if (fwhm) {
      require(*fwhm > 0.0, "bumps.fwhm", "must be > 0");
      c.bumps.fwhm = *fwhm;
    }
    c.bumps.sigma = fwhm_to_sigma(c.bumps.fwhm);
    if (sigma) {
      require(*sigma > 0.0, "bumps.sigma", "must be > 0");
      c.bumps.sigma = *sigma;
      c.bumps.fwhm = *sigma * 2.0 * std::sqrt(2.0 * std::log(2.0));
    }
    if (auto v = s.number("density")) c.bumps.density = *v;
    require(c.bumps.density >= 0.0, "bumps.density", "must be >= 0");
    if (auto v = s.number("region")) c.bumps.region = *v;
    require(c.bumps.region >= 0.0, "bumps.region", "must be >= 0 (0 = grid half extent)");
    if (auto v = s.numbers("position")) {
      require(v->size() == 2, "bumps.position", "expected [x, y]");
      c.bumps.position = {(*v)[0], (*v)[1]};
    }
    s.finish();
  }
  {
    Section s = section("dos");
    if (auto v = s.string("source")) {
      if (*v == "analytic") c.dos.source = DosSource::analytic;
      else if (*v == "spectra") c.dos.source = DosSource::spectra;
      else fail("dos.source", "expected \"analytic\" or \"spectra\", got \"" + *v + "\"");
    }
    auto list = s.numbers("B");
    auto b0 = s.number("B_min");
    auto b1 = s.number("B_max");
    auto bs = s.number("B_step");
    if (list && (b0 || b1 || bs)) fail("dos.B", "give either a B list or B_min/B_max/B_step");
    if (list) {
      require(!list->empty(), "dos.B", "must not be empty");
      c.dos.B_list = *list;
    } else if (b0 || b1 || bs) {
      const double lo = b0.value_or(0.0);
      const double hi = b1.value_or(2.0);
      const double step = bs.value_or(0.001);
      require(step > 0.0, "dos.B_step", "must be > 0");
      require(hi >= lo, "dos.B_max", "must be >= B_min");
      c.dos.B_list = uniform_grid(lo, hi, step);
    }
    if (auto v = s.number("E_max")) c.dos.E_max = *v;
    if (auto v = s.number("window")) c.dos.window = *v;
    if (auto v = s.number("energy_step")) c.dos.energy_step = *v;
    if (auto v = s.small_int("curve_limit")) c.dos.curve_limit = *v;
    if (auto v = s.strings("spectra")) c.dos.spectra = *v;
    require(c.dos.E_max >= 1.0, "dos.E_max", "must be >= 1");
    require(c.dos.window > 0.0, "dos.window", "must be > 0");
    require(c.dos.energy_step >= 0.0, "dos.energy_step", "must be >= 0 (0 = window / 4)");
    if (c.dos.energy_step == 0.0) c.dos.energy_step = c.dos.window / 4.0;
    require(c.dos.curve_limit >= 0, "dos.curve_limit", "must be >= 0");
    if (c.dos.source == DosSource::spectra) {
      require(!c.dos.spectra.empty(), "dos.spectra", "required when dos.source = \"spectra\"");
    }
    s.finish();
  }
  {
    Section s = section("scars");
    if (auto v = s.resonance("resonance")) c.scars.resonance = *v;
    if (auto v = s.number("threshold")) c.scars.threshold = *v;
    if (auto v = s.number("tube_width")) c.scars.tube_width = *v;
    if (auto v = s.small_int("first_state")) c.scars.first_state = *v;
    if (auto v = s.small_int("last_state")) c.scars.last_state = *v;
    auto emin = s.number("energy_min");
    auto emax = s.number("energy_max");
    if (emin || emax) {
      c.scars.energy_window = std::make_pair(emin.value_or(-std::numeric_limits<double>::infinity()),
                                             emax.value_or(std::numeric_limits<double>::infinity()));
      require(c.scars.energy_window->first <= c.scars.energy_window->second, "scars.energy_max", "must be >= energy_min");
    }
    if (auto v = s.string("spectrum")) c.scars.spectrum = *v;
    if (auto v = s.string("bumps")) c.scars.bumps = *v;
    require(c.scars.threshold >= 0.0, "scars.threshold", "must be >= 0");
    require(c.scars.tube_width > 0.0, "scars.tube_width", "must be > 0");
    require(c.scars.first_state >= 0, "scars.first_state", "must be >= 0");
    require(c.scars.last_state == -1 || c.scars.last_state > c.scars.first_state, "scars.last_state",
            "must be > first_state (or -1 = all)");
    s.finish();
  }
  {
    Section s = section("pinning");
    if (auto v = s.small_int("state")) c.pinning.state = *v;
    if (auto v = s.small_int("theta_points")) c.pinning.theta_points = *v;
    if (auto v = s.number("prominence")) c.pinning.prominence = *v;
    require(c.pinning.state >= -1, "pinning.state", "must be >= 0 (or -1 = automatic)");
    require(c.pinning.theta_points >= 8, "pinning.theta_points", "must be >= 8");
    require(c.pinning.prominence >= 0.0 && c.pinning.prominence <= 1.0, "pinning.prominence", "must be in [0, 1]");
    s.finish();
  }
  {
    Section s = section("classical");
    if (auto v = s.number("energy")) c.classical.energy = *v;
    if (auto v = s.small_int("trajectories")) c.classical.trajectories = *v;
    if (auto v = s.number("duration")) c.classical.duration = *v;
    if (auto v = s.number("dt")) c.classical.dt = *v;
    if (auto v = s.small_int("order")) c.classical.order = *v;
    if (auto v = s.small_int("sample_every")) c.classical.sample_every = *v;
    if (auto v = s.number("energy_tolerance")) c.classical.energy_tolerance = *v;
    if (auto v = s.number("bump_region")) c.classical.bump_region = *v;
    require(c.classical.energy > 0.0, "classical.energy", "must be > 0");
    require(c.classical.trajectories >= 1, "classical.trajectories", "must be >= 1");
    require(c.classical.duration > 0.0, "classical.duration", "must be > 0");
    require(c.classical.dt > 0.0, "classical.dt", "must be > 0");
    require(c.classical.order == 2 || c.classical.order == 4, "classical.order", "must be 2 or 4");
    require(c.classical.sample_every >= 1, "classical.sample_every", "must be >= 1");
    require(c.classical.energy_tolerance >= 0.0, "classical.energy_tolerance", "must be >= 0");
    require(c.classical.bump_region >= 0.0, "classical.bump_region", "must be >= 0");
    s.finish();
  }
  {
    Section s = section("resonances");
    if (auto v = s.number("max_ratio")) c.resonances.max_ratio = *v;
    if (auto v = s.small_int("max_v_theta")) c.resonances.max_v_theta = *v;
    require(c.resonances.max_ratio > 1.0, "resonances.max_ratio", "must be > 1");
    require(c.resonances.max_v_theta >= 1 && c.resonances.max_v_theta <= 1000, "resonances.max_v_theta",
            "must be in [1, 1000]");
    s.finish();
  }
  return c;
}

std::string ExperimentConfig::canonical() const {
  std::ostringstream os;
  auto kv = [&](const char* k, const std::string& v) { os << k << " = " << v << "\n"; };
  auto num = [&](const char* k, double v) { kv(k, format_double(v)); };
  kv("seed", std::to_string(seed));
  num("system.omega0", system.omega0);
  num("system.B", system.B);
  kv("grid.nx", std::to_string(grid.nx));
  kv("grid.ny", std::to_string(grid.ny));
  num("grid.half_extent", grid.half_extent);
  kv("solver.n_states", std::to_string(solver.n_states));
  num("solver.convergence_tol", solver.convergence_tol);
  kv("solver.max_sweeps", std::to_string(solver.max_sweeps));
  kv("solver.max_sweeps_per_stage", std::to_string(solver.max_sweeps_per_stage));
  kv("solver.epsilon_schedule", list_text(solver.epsilon_schedule));
  kv("solver.guard_states", std::to_string(solver.guard_states));
  kv("bumps.kind", bumps.kind == BumpKind::none ? "none" : bumps.kind == BumpKind::random ? "random" : "single");
  num("bumps.amplitude", bumps.amplitude);
  num("bumps.sigma", bumps.sigma);
  num("bumps.density", bumps.density);
  num("bumps.region", bumps.region);
  kv("bumps.position", list_text({bumps.position.x, bumps.position.y}));
  kv("dos.source", dos.source == DosSource::analytic ? "analytic" : "spectra");
  kv("dos.B", list_text(dos.B_list));
  num("dos.E_max", dos.E_max);
  num("dos.window", dos.window);
  num("dos.energy_step", dos.energy_step);
  kv("dos.curve_limit", std::to_string(dos.curve_limit));
  for (const auto& p : dos.spectra) kv("dos.spectra[]", p);
  kv("scars.resonance", resonance_text(scars.resonance));
  num("scars.threshold", scars.threshold);
  num("scars.tube_width", scars.tube_width);
  kv("scars.first_state", std::to_string(scars.first_state));
  kv("scars.last_state", std::to_string(scars.last_state));
  if (scars.energy_window) kv("scars.energy_window", list_text({scars.energy_window->first, scars.energy_window->second}));
  kv("scars.spectrum", scars.spectrum);
  kv("scars.bumps", scars.bumps);
  kv("pinning.state", std::to_string(pinning.state));
  kv("pinning.theta_points", std::to_string(pinning.theta_points));
  num("pinning.prominence", pinning.prominence);
  num("classical.energy", classical.energy);
  kv("classical.trajectories", std::to_string(classical.trajectories));
  num("classical.duration", classical.duration);
  num("classical.dt", classical.dt);
  kv("classical.order", std::to_string(classical.order));
  kv("classical.sample_every", std::to_string(classical.sample_every));
  num("classical.energy_tolerance", classical.energy_tolerance);
  num("classical.bump_region", classical.bump_region);
  num("resonances.max_ratio", resonances.max_ratio);
  kv("resonances.max_v_theta", std::to_string(resonances.max_v_theta));
  return os.str();
}

std::uint64_t ExperimentConfig::hash() const { return fnv1a64(canonical()); }

int resolved_threads(const ExperimentConfig& config) {
  if (config.threads > 0) return config.threads;
  return std::max(1u, std::thread::hardware_concurrency());
}

double auto_half_extent(int n_states, const ConfinementParams& params) {
  const auto levels = fock_darwin_lowest(n_states, params.B, params.omega0);
  const double E_top = levels.empty() ? params.omega0 : levels.back();
  // Largest classical radius at energy E over all angular momenta.
  return 1.5 * std::sqrt(2.0 * E_top) / params.omega0;
}

Grid2D experiment_grid(const ExperimentConfig& config) {
  const double L = config.grid.half_extent > 0.0 ? config.grid.half_extent
                                                  : auto_half_extent(config.solver.n_states, config.system);
  return make_grid(config.grid.nx, config.grid.ny, L);
}

BumpSet experiment_bumps(const ExperimentConfig& config, const Grid2D& grid) {
  const auto& b = config.bumps;
  const double region = b.region > 0.0 ? b.region : std::min(grid.x_max, grid.y_max);
  switch (b.kind) {
    case BumpKind::none:
      return BumpSet{};
    case BumpKind::single:
      return single_bump(b.position, b.amplitude, b.sigma, region);
    case BumpKind::random:
      if (b.density == 0.0) return BumpSet{};
      return sample_bumps(config.seed, b.density, region, b.amplitude, b.sigma);
  }
  return BumpSet{};
}

SolverConfig solver_config(const ExperimentConfig& config) {
  SolverConfig s;
  s.n_states = config.solver.n_states;
  s.grid = experiment_grid(config);
  s.params = config.system;
  s.bumps = experiment_bumps(config, s.grid);
  s.epsilon_schedule = config.solver.epsilon_schedule;
  s.convergence_tol = config.solver.convergence_tol;
  s.max_sweeps = config.solver.max_sweeps;
  s.max_sweeps_per_stage = config.solver.max_sweeps_per_stage;
  s.seed = config.seed;
  s.guard_states = config.solver.guard_states;
  s.threads = resolved_threads(config);
  return s;
}

}  // namespace scarlab
