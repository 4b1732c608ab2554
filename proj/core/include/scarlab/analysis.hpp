#pragma once

#include <map>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "scarlab/classical.hpp"
#include "scarlab/eigensolver.hpp"
#include "scarlab/grid.hpp"
#include "scarlab/potential.hpp"

namespace scarlab {

// --- Fock-Darwin reference ---------------------------------------------------

/// (2k + |l| + 1) omega_tilde - l B / 2, with omega_tilde = sqrt(omega0^2 + B^2 / 4).
double fock_darwin_energy(int k, int l, double B, double omega0 = 1.0);

struct FdLevel {
  double E = 0.0;
  int k = 0;
  int l = 0;
};

/// Every (k, l) with E <= E_max, ascending in E (ties by k, then l).
std::vector<FdLevel> fock_darwin_levels(double E_max, double B, double omega0 = 1.0);

/// Lowest `count` Fock-Darwin energies, ascending.
std::vector<double> fock_darwin_lowest(int count, double B, double omega0 = 1.0);

/// Normalized analytic eigenfunction of the unperturbed Hamiltonian,
/// rho^|l| L_k^|l|(rho^2) exp(-rho^2 / 2) exp(i l phi), rho = r sqrt(omega_tilde).
WaveField fock_darwin_state(const Grid2D& grid, int k, int l, double B, double omega0 = 1.0);

// --- density of states -------------------------------------------------------

struct DosCurve {
  std::vector<double> energy_grid;
  std::vector<double> values;
  double window = 0.0;
  double B = 0.0;
};

/// Sum of unit-integral Gaussians of standard deviation `window`.
DosCurve dos(std::span<const double> energies, double window, std::span<const double> energy_grid,
             double B = 0.0);

/// Uniform energy grid [lo, hi] with the given step.
std::vector<double> uniform_grid(double lo, double hi, double step);

/// Trapezoid integral of the curve.
double integrate(const DosCurve& curve);

/// One curve per field from Fock-Darwin levels up to E_max.
std::vector<DosCurve> dos_sweep_analytic(std::span<const double> B_list, double E_max, double window,
                                         std::span<const double> energy_grid, double omega0 = 1.0);

/// One curve per field from stored spectra keyed by B (matched within 1e-9).
/// Throws std::out_of_range naming the field when a spectrum is missing.
std::vector<DosCurve> dos_sweep_spectra(std::span<const double> B_list,
                                        const std::map<double, std::vector<double>>& energies_by_B,
                                        double window, std::span<const double> energy_grid);

/// Largest DOS value attained at any of the given level energies (the
/// tallest degeneracy ridge), without building a full curve.
double max_ridge_height(std::span<const double> sorted_energies, double window);

/// Integral of DOS^2 over energy in closed form; grows when levels bunch
/// within a window of each other.
double clustering_strength(std::span<const double> sorted_energies, double window);

// --- scars -------------------------------------------------------------------

struct ScarScore {
  int state_index = -1;
  Resonance resonance;
  double orientation = 0.0;
  double score = 0.0;
  int direction = 1;
};

/// Orbit-tube density enhancement. The tube is exp(-d^2 / (2 w^2)) with d the
/// distance to the orbit polyline; the score is the tube-weighted probability
/// divided by the tube's mean weight over the whole grid area, maximized over
/// rotations of the orbit (1 = no enhancement over a uniform density).
///
/// |psi|^2 is resampled bilinearly onto a polar grid inscribed in the domain,
/// so every rotation of the tube is a circular correlation along each ring.
/// Orientations: max(90, angular_samples / v_r) points across the fundamental
/// sector [0, 2 pi / v_r), then golden-section refinement around the best.
class ScarScorer {
 public:
  struct Options {
    double tube_width = 0.235;
    int angular_samples = 1024;
    double radial_step = 0.0;  // 0 picks 0.75 * min(dx, dy)
  };

  /// Per-ring angular spectrum of a state's density.
  struct Density {
    std::vector<cplx> spectrum;
  };

  ScarScorer(const Grid2D& grid, const Options& options);

  [[nodiscard]] Density density(const WaveField& psi) const;
  [[nodiscard]] ScarScore score(const Density& rho, const PeriodicOrbit& orbit) const;
  [[nodiscard]] ScarScore score(const WaveField& psi, const PeriodicOrbit& orbit) const;
  /// Score with the orbit rotated by `rotation` (no search).
  [[nodiscard]] double score_at(const WaveField& psi, const PeriodicOrbit& orbit, double rotation) const;

  [[nodiscard]] const Grid2D& grid() const { return grid_; }
  [[nodiscard]] const Options& options() const { return options_; }
  [[nodiscard]] int rings() const { return n_r_; }

 private:
  struct Correlation;
  [[nodiscard]] std::vector<double> tube(const PeriodicOrbit& orbit) const;
  [[nodiscard]] Correlation correlate(const Density& rho, const PeriodicOrbit& orbit) const;

  Grid2D grid_;
  Options options_;
  int n_r_ = 0;
  int n_phi_ = 0;
  double dr_ = 0.0;
};

/// One-shot score. With `state_energy` the orbit energy must lie within 10%
/// of it (std::invalid_argument otherwise).
ScarScore scar_score(const WaveField& psi, const PeriodicOrbit& orbit, double tube_width,
                     std::optional<double> state_energy = std::nullopt);

/// Distance from a point to the polyline.
double distance_to_polyline(const std::vector<Point2>& polyline, Point2 p);

struct CensusEntry {
  int state_index = 0;
  double energy = 0.0;
  double orbit_energy = 0.0;
  ScarScore forward;   // direction +1
  ScarScore backward;  // direction -1
  [[nodiscard]] const ScarScore& best() const { return forward.score >= backward.score ? forward : backward; }
};

struct CensusOptions {
  double threshold = 2.0;
  double tube_width = 0.235;
  int first_state = 0;   // inclusive
  int last_state = -1;   // exclusive, -1 = all
  int orbit_samples = 0; // 0 picks 256 per radial period
  std::optional<std::pair<double, double>> energy_window;
  int threads = 1;
};

struct CensusResult {
  Resonance resonance;
  double threshold = 0.0;
  double fraction = 0.0;
  int scarred = 0;
  int total = 0;
  std::vector<CensusEntry> entries;
};

/// Scores every selected state against the resonance's canonical orbits in
/// both directions at the state's unperturbed energy E - <psi|V_imp|psi>.
/// Throws std::invalid_argument when the spectrum's B is not within 1e-6 of
/// the resonance field.
CensusResult scar_census(const Spectrum& spectrum, const Resonance& res, const CensusOptions& options);

// --- pinning -----------------------------------------------------------------

struct PinningCurve {
  std::vector<double> theta_grid;
  std::vector<double> overlaps;
};

/// <psi| V_imp(rotated by theta) |psi> for each theta.
PinningCurve pinning_curve(const WaveField& psi, const BumpSet& bumps, std::span<const double> theta_grid);

/// n equally spaced angles in [0, 2 pi).
std::vector<double> angle_grid(int n);

/// Number of local maxima of the periodic curve whose topographic prominence
/// is at least `prominence` * (max - min). A curve that is constant up to a
/// relative 1e-12 has none.
int count_maxima(const PinningCurve& curve, double prominence);
std::vector<int> prominent_maxima(std::span<const double> values, double prominence);

// --- level clustering ----------------------------------------------------------

struct ClusterStats {
  double pooled_std = 0.0;       // sqrt of pooled within-cluster variance
  double cluster_spacing = 0.0;  // smallest gap between distinct FD levels used
  int clusters = 0;
  int states = 0;
};

/// Assigns the sorted `energies` (indices [first, last)) to the Fock-Darwin
/// degenerate levels in order and measures the spread inside each level.
ClusterStats fd_cluster_statistics(std::span<const double> energies, double B, int first, int last,
                                   double omega0 = 1.0);

}  // namespace scarlab
