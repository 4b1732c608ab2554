#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "scarlab/potential.hpp"

namespace scarlab {

/// Orbit label: v_theta windings about the origin during v_r radial oscillations.
struct Resonance {
  int v_theta = 1;
  int v_r = 2;

  [[nodiscard]] double ratio() const { return static_cast<double>(v_r) / v_theta; }
  bool operator==(const Resonance&) const = default;
};

/// Throws std::invalid_argument unless gcd(v_theta, v_r) == 1 and v_r > v_theta > 0.
void validate(const Resonance& res);

/// Requested (E, p_phi) has no real turning radii.
class InfeasibleOrbit : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Constants and turning radii of an unperturbed orbit. p_phi is signed and
/// |p_phi| = omega_tilde * a * b.
struct OrbitParams {
  double a = 0.0;
  double b = 0.0;
  double B = 0.0;
  double omega0 = 1.0;
  double omega_tilde = 1.0;
  double p_phi = 0.0;
  double E = 0.0;
};

struct PolarPoint {
  double r = 0.0;
  double phi = 0.0;
};

struct ClassicalState {
  double x = 0.0;
  double y = 0.0;
  double vx = 0.0;
  double vy = 0.0;
};

struct PeriodicOrbit {
  Resonance resonance;
  double energy = 0.0;
  int direction = 1;
  double orientation = 0.0;
  OrbitParams params;
  std::vector<Point2> points;  // one full period, first == last up to closure error
};

double effective_frequency(double omega0, double B);

OrbitParams orbit_params(double E, double p_phi, double omega0, double B);

/// Closed form in the lab frame for an orbit that starts at (a, 0) at t = 0.
/// phi is continuous in t; for b = 0 the radius vector stays on the line
/// phi = -B t / 2 and r = a |cos(omega_tilde t)|.
PolarPoint analytic_orbit(const OrbitParams& params, double t);

/// Cartesian position and velocity on the same orbit (valid for b = 0 too).
ClassicalState analytic_state(const OrbitParams& params, double t);

/// Angle swept by the radius vector during one radial period pi / omega_tilde.
double delta_phi(int p_phi_sign, double omega0, double B);

/// Field at which direction +1 orbits close after v_r radial periods with
/// v_theta windings (omega0 = 1 units).
double resonance_field(const Resonance& res);

/// Canonical resonant angular momentum: the orbit with b / a = 1/2.
double choose_p_phi_for_resonance(const Resonance& res, double E, int direction,
                                  double omega0 = 1.0);

/// Closed orbit at B = resonance_field(res), rotated by `orientation`, sampled
/// at n_samples + 1 points over v_r radial periods.
PeriodicOrbit periodic_orbit(const Resonance& res, double E, int direction, double orientation,
                             int n_samples, double omega0 = 1.0);

/// Signed number of turns of a closed polyline about the origin.
int winding_number(const std::vector<Point2>& polyline);

/// Total energy 1/2 v^2 + 1/2 omega0^2 r^2 + V_imp.
struct ClassicalSystem {
  double omega0 = 1.0;
  double B = 0.0;
  BumpSet bumps;
};

struct TrajectoryOptions {
  double dt = 1e-3;
  double duration = 1.0;
  int sample_every = 1;        // store every n-th step
  int order = 4;               // 2: Strang, 4: triple-jump composition
  double energy_tolerance = 0.0;  // 0 disables drift checking
  int max_refinements = 4;     // dt halvings allowed when drift exceeds tolerance
};

struct TrajectorySample {
  double t = 0.0;
  ClassicalState state;
};

struct Trajectory {
  double dt = 0.0;  // step actually used
  int order = 4;
  std::vector<TrajectorySample> samples;
  double max_relative_energy_drift = 0.0;
};

class EnergyDriftError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Splitting integrator: exact cyclotron flow for the magnetic part, symmetric
/// kicks for the potential force. Lorentz force is v x B z_hat.
class ClassicalIntegrator {
 public:
  explicit ClassicalIntegrator(const ClassicalSystem& system);

  [[nodiscard]] double energy(const ClassicalState& s) const;
  void step(ClassicalState& s, double dt, int order) const;

  [[nodiscard]] const ClassicalSystem& system() const { return system_; }

 private:
  void kick(ClassicalState& s, double tau) const;
  void drift(ClassicalState& s, double tau) const;
  void strang(ClassicalState& s, double dt) const;

  ClassicalSystem system_;
  BumpLookup lookup_;
};

Trajectory integrate_trajectory(const ClassicalState& state0, const ClassicalSystem& system,
                                const TrajectoryOptions& options);

struct SectionPoint {
  double x = 0.0;
  double vx = 0.0;
  double t = 0.0;
  ClassicalState state;  // refined crossing state (|y| tiny, vy > 0)
};

/// Crossings of y = 0 with vy > 0. Each crossing bracketed by stored samples is
/// refined by Newton iteration on re-integrated partial steps until |y| < 1e-12
/// (or the integrator's precision floor).
std::vector<SectionPoint> poincare_section(const Trajectory& trajectory,
                                           const ClassicalSystem& system);
std::vector<std::vector<SectionPoint>> poincare_section(
    const std::vector<Trajectory>& trajectories, const ClassicalSystem& system);

/// Initial state on the analytic orbit that starts at (a, 0) with p_phi from params.
ClassicalState initial_state(const OrbitParams& params);

/// `count` unperturbed starts at energy E: p_phi uniform over 95% of its
/// feasible range, apocenter at a uniform angle; stream mt19937_64(seed).
std::vector<ClassicalState> random_initial_states(double E, double omega0, double B, int count,
                                                  std::uint64_t seed);

}  // namespace scarlab
