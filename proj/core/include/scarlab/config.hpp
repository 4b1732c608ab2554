#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "scarlab/classical.hpp"
#include "scarlab/eigensolver.hpp"
#include "scarlab/potential.hpp"

namespace scarlab {

/// Bad experiment configuration; the message starts with the key path.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class BumpKind { none, random, single };
enum class DosSource { analytic, spectra };

struct GridSpec {
  int nx = 256;
  int ny = 256;
  double half_extent = 0.0;  // 0: 1.5 sqrt(2 E_top) / omega0, E_top the highest requested FD level
};

struct BumpSpec {
  BumpKind kind = BumpKind::random;
  double amplitude = 4.0;
  double sigma = 0.0;  // filled from fwhm
  double fwhm = 0.235;
  double density = 2.0;
  double region = 0.0;  // 0: the grid half extent
  Point2 position{};    // single bump
};

struct SolverSpec {
  int n_states = 100;
  double convergence_tol = 1e-6;
  int max_sweeps = 20000;
  int max_sweeps_per_stage = 4000;
  std::vector<double> epsilon_schedule = default_epsilon_schedule();
  int guard_states = -1;
};

struct DosSpec {
  DosSource source = DosSource::analytic;
  std::vector<double> B_list;  // empty: 0, 0.001, ..., 2 (analytic) or the fields of the spectra
  double E_max = 30.0;
  double window = 0.001;
  double energy_step = 0.0;  // 0: window / 4
  int curve_limit = 16;      // full curves are written only for this many fields or fewer
  std::vector<std::string> spectra;
};

struct ScarSpec {
  Resonance resonance{1, 3};
  double threshold = 2.0;
  double tube_width = 0.235;
  int first_state = 0;
  int last_state = -1;
  std::optional<std::pair<double, double>> energy_window;
  std::string spectrum = "spectrum.wf2d";  // relative paths resolve against the output directory
  std::string bumps = "bumps.csv";
};

struct PinningSpec {
  int state = -1;  // -1: best-scoring state whose scar passes within a tube width of a bump
  int theta_points = 360;
  double prominence = 0.2;
};

struct ClassicalSpec {
  double energy = 20.0;
  int trajectories = 20;
  double duration = 1000.0;
  double dt = 0.005;
  int order = 4;
  int sample_every = 10;
  double energy_tolerance = 1e-6;
  double bump_region = 0.0;  // 0: 1.2 sqrt(2 E) / omega0
};

struct ResonanceSpec {
  double max_ratio = 10.0;
  int max_v_theta = 10;
};

struct ExperimentConfig {
  std::uint64_t seed = 0;
  std::string out = ".";
  int threads = 0;  // 0: all cores
  ConfinementParams system;
  std::optional<Resonance> system_resonance;  // when B was given as a resonance
  GridSpec grid;
  SolverSpec solver;
  BumpSpec bumps;
  DosSpec dos;
  ScarSpec scars;
  PinningSpec pinning;
  ClassicalSpec classical;
  ResonanceSpec resonances;

  /// Canonical "key = value" dump of every resolved setting that affects
  /// results (not out, not threads).
  [[nodiscard]] std::string canonical() const;
  [[nodiscard]] std::uint64_t hash() const;
};

struct ConfigOverrides {
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::optional<std::string> out;
};

/// TOML subset: top-level seed/out/threads plus the tables [system], [grid],
/// [solver], [bumps], [dos], [scars], [pinning], [classical], [resonances].
/// Unknown keys, wrong types and invalid values raise ConfigError naming the
/// key path; a seed must come from the text or the overrides.
ExperimentConfig parse_config(std::string_view text, const ConfigOverrides& overrides = {});

int resolved_threads(const ExperimentConfig& config);
double auto_half_extent(int n_states, const ConfinementParams& params);
Grid2D experiment_grid(const ExperimentConfig& config);
BumpSet experiment_bumps(const ExperimentConfig& config, const Grid2D& grid);
SolverConfig solver_config(const ExperimentConfig& config);

}  // namespace scarlab
