#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <utility>
#include <vector>

#include "scarlab/grid.hpp"
#include "scarlab/potential.hpp"

namespace scarlab {

class AxisFft;

/// Magnetic kinetic energy T = 1/2 (p - A)^2 in the symmetric gauge
/// A = B/2 (-y, x), written as T = 1/2 (Pi_x^2 + Pi_y^2) with
///   Pi_x = p_x + B y / 2   (diagonal after an FFT along x, row by row)
///   Pi_y = p_y - B x / 2   (diagonal after an FFT along y, column by column)
/// and [Pi_x, Pi_y] = i B. With this sign the state exp(i l phi) carries the
/// -l B / 2 term of the Fock-Darwin energies.
class MagneticKinetic {
 public:
  MagneticKinetic(const Grid2D& grid, double B);

  /// out = T psi. `scratch` must have the grid size.
  void apply(std::span<const cplx> psi, std::span<cplx> out, std::span<cplx> scratch) const;

  [[nodiscard]] const Grid2D& grid() const { return grid_; }
  [[nodiscard]] double B() const { return B_; }
  [[nodiscard]] const AxisFft& fft() const { return *fft_; }

  /// (k_x + B y_j / 2)^2 at row j, FFT order in i.
  [[nodiscard]] double pix2(int i, int j) const;
  /// (k_y - B x_i / 2)^2 at column i, FFT order in j.
  [[nodiscard]] double piy2(int i, int j) const;

 private:
  Grid2D grid_;
  double B_;
  std::shared_ptr<const AxisFft> fft_;
  std::vector<double> kx_;
  std::vector<double> ky_;
  std::vector<double> pix2_;
  std::vector<double> piy2_;
};

/// exp(-eps T) factorized without splitting error in the continuum:
///   exp(-eps T) = exp(-alpha Pi_x^2) exp(-beta Pi_y^2) exp(-alpha Pi_x^2),
///   alpha = tanh(eps B / 2) / (2 B),  beta = sinh(eps B) / (2 B),
/// which is the imaginary-time continuation of the shear decomposition of a
/// phase-space rotation (Pi_x, Pi_y) with [Pi_x, Pi_y] = i B. B -> 0 gives
/// alpha = eps / 4, beta = eps / 2.
class KineticPropagator {
 public:
  KineticPropagator(const MagneticKinetic& kinetic, double eps);

  void apply(std::span<cplx> psi) const;
  [[nodiscard]] double eps() const { return eps_; }
  [[nodiscard]] double alpha() const { return alpha_; }
  [[nodiscard]] double beta() const { return beta_; }

 private:
  const MagneticKinetic* kinetic_;
  double eps_;
  double alpha_;
  double beta_;
  std::vector<double> row_factor_;  // exp(-alpha Pi_x^2) / nx
  std::vector<double> col_factor_;  // exp(-beta Pi_y^2) / ny
};

/// Full Hamiltonian on a grid: T + 1/2 omega0^2 r^2 + V_imp.
class Hamiltonian {
 public:
  Hamiltonian(const Grid2D& grid, const ConfinementParams& params, const RealField& v_imp);
  Hamiltonian(const Grid2D& grid, const ConfinementParams& params, const BumpSet& bumps);

  void apply(std::span<const cplx> psi, std::span<cplx> out, std::span<cplx> scratch) const;
  [[nodiscard]] WaveField apply(const WaveField& psi) const;

  [[nodiscard]] const Grid2D& grid() const { return kinetic_.grid(); }
  [[nodiscard]] const MagneticKinetic& kinetic() const { return kinetic_; }
  [[nodiscard]] const RealField& potential() const { return v_total_; }
  [[nodiscard]] const ConfinementParams& params() const { return params_; }

 private:
  ConfinementParams params_;
  MagneticKinetic kinetic_;
  RealField v_total_;
};

WaveField apply_hamiltonian(const WaveField& psi, const ConfinementParams& params,
                            const RealField& v_imp);

WaveField kinetic_propagator(const WaveField& psi, double eps, double B);

/// exp(-eps T / 2) exp(-eps V) exp(-eps T / 2) on every state, then
/// Cholesky (Gram-Schmidt-equivalent) orthonormalization. States that lose
/// rank are replaced by fresh random fields drawn from `seed`.
std::vector<WaveField> itp_sweep(const std::vector<WaveField>& states, double eps,
                                 const ConfinementParams& params, const RealField& v_imp,
                                 std::uint64_t seed = 0);

struct SubspaceResult {
  std::vector<WaveField> states;
  std::vector<double> energies;  // ascending Ritz values
};

/// Rayleigh-Ritz in the span of orthonormal `states`.
SubspaceResult subspace_diagonalize(const std::vector<WaveField>& states,
                                    const ConfinementParams& params, const RealField& v_imp);

/// 0.1, 0.05, ... halving while >= end (geometric stages).
std::vector<double> default_epsilon_schedule(double start = 0.1, double end = 1e-4,
                                             double factor = 0.5);

struct SolverConfig {
  int n_states = 1;
  Grid2D grid;
  ConfinementParams params;
  BumpSet bumps;
  std::vector<double> epsilon_schedule = default_epsilon_schedule();
  double convergence_tol = 1e-6;  // max |dE| per sweep, requested states only
  int max_sweeps = 20000;
  int max_sweeps_per_stage = 4000;
  std::uint64_t seed = 0;
  int guard_states = -1;  // extra propagated states; -1 picks max(16, 25% of n_states)
  int threads = 1;
};

void validate(const SolverConfig& config);

struct Spectrum {
  Grid2D grid;
  ConfinementParams params;
  BumpSet bumps;
  std::vector<double> energies;
  std::vector<WaveField> states;
  std::vector<bool> converged;
  std::vector<double> residuals;  // ||H psi - E psi||
  int sweeps = 0;
  bool all_converged = false;
};

/// Residual bound a converged state must meet: 1e-4 max(1, |E|).
double residual_bound(double energy);

struct SolverProgress {
  int stage = 0;
  double eps = 0.0;
  int sweep = 0;
  double max_energy_change = 0.0;
};

Spectrum solve_eigenstates(const SolverConfig& config,
                           const std::function<void(const SolverProgress&)>& progress = {});

/// Runs fn(k) for k in [0, n) on up to `threads` workers; results must not
/// depend on the schedule.
void parallel_for(int n, int threads, const std::function<void(int)>& fn);

}  // namespace scarlab
