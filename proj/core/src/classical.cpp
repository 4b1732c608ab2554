#include "scarlab/classical.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>
#include <string>

namespace scarlab {
namespace {

constexpr double pi = std::numbers::pi;

int sign_of(double v) { return (v > 0.0) - (v < 0.0); }

Point2 rotated(const Point2& p, double c, double s) { return {c * p.x - s * p.y, s * p.x + c * p.y}; }

}  // namespace

void validate(const Resonance& res) {
  if (res.v_theta <= 0 || res.v_r <= 0) {
    throw std::invalid_argument("resonance indices must be positive");
  }
  if (std::gcd(res.v_theta, res.v_r) != 1) {
    throw std::invalid_argument("resonance (" + std::to_string(res.v_theta) + "," +
                                std::to_string(res.v_r) + ") is not coprime");
  }
  if (res.v_r <= res.v_theta) {
    throw std::invalid_argument("resonance needs v_r / v_theta > 1");
  }
}

double effective_frequency(double omega0, double B) { return std::sqrt(omega0 * omega0 + 0.25 * B * B); }

OrbitParams orbit_params(double E, double p_phi, double omega0, double B) {
  if (!(omega0 > 0.0)) throw std::invalid_argument("omega0 must be positive");
  if (!std::isfinite(E) || !std::isfinite(p_phi) || !std::isfinite(B)) {
    throw std::invalid_argument("orbit_params: non-finite input");
  }
  OrbitParams o;
  o.B = B;
  o.omega0 = omega0;
  o.omega_tilde = effective_frequency(omega0, B);
  o.p_phi = p_phi;
  o.E = E;
  const double w = o.omega_tilde;
  // a^2 + b^2 = 2 (E + p B / 2) / w^2, a b = |p| / w
  const double sum = 2.0 * (E + 0.5 * p_phi * B) / (w * w);
  const double prod = std::abs(p_phi) / w;
  const double disc = sum * sum - 4.0 * prod * prod;
  if (sum < 0.0 || disc < -1e-14 * sum * sum) {
    throw InfeasibleOrbit("no real turning radii for E = " + std::to_string(E) +
                          ", p_phi = " + std::to_string(p_phi));
  }
  const double a2 = 0.5 * (sum + std::sqrt(std::max(disc, 0.0)));
  if (a2 <= 0.0) {
    if (E == 0.0 && p_phi == 0.0) return o;  // particle at rest at the origin
    throw InfeasibleOrbit("degenerate orbit");
  }
  o.a = std::sqrt(a2);
  o.b = prod / o.a;
  if (o.b > o.a) o.b = o.a;  // circular orbit, rounding
  return o;
}

PolarPoint analytic_orbit(const OrbitParams& o, double t) {
  const double u = o.omega_tilde * t;
  const double drift = -0.5 * o.B * t;
  const double c = std::cos(u);
  const double s = std::sin(u);
  const double r = std::sqrt(o.a * o.a * c * c + o.b * o.b * s * s);
  if (o.b == 0.0) return {o.a * std::abs(c), drift};
  // Continuous branch of arctan((b/a) tan u): add pi for every half turn of u.
  const double turns = std::round(u / pi);
  const double theta = std::atan((o.b / o.a) * std::tan(u - turns * pi)) + turns * pi;
  return {r, drift + sign_of(o.p_phi) * theta};
}

ClassicalState analytic_state(const OrbitParams& o, double t) {
  const double u = o.omega_tilde * t;
  const double sgn = sign_of(o.p_phi);
  // Rotating-frame ellipse, then rotate by -B t / 2 into the lab frame.
  const double X = o.a * std::cos(u);
  const double Y = sgn * o.b * std::sin(u);
  const double VX = -o.a * o.omega_tilde * std::sin(u);
  const double VY = sgn * o.b * o.omega_tilde * std::cos(u);
  const double alpha = -0.5 * o.B * t;
  const double c = std::cos(alpha);
  const double s = std::sin(alpha);
  ClassicalState st;
  st.x = c * X - s * Y;
  st.y = s * X + c * Y;
  st.vx = c * VX - s * VY + 0.5 * o.B * st.y;
  st.vy = s * VX + c * VY - 0.5 * o.B * st.x;
  return st;
}

ClassicalState initial_state(const OrbitParams& params) { return analytic_state(params, 0.0); }

std::vector<ClassicalState> random_initial_states(double E, double omega0, double B, int count,
                                                  std::uint64_t seed) {
  if (count < 0) throw std::invalid_argument("random_initial_states: count must be >= 0");
  const double w = effective_frequency(omega0, B);
  // E + p B / 2 >= w |p| bounds p on each side.
  const double p_hi = E / (w - 0.5 * B);
  const double p_lo = -E / (w + 0.5 * B);
  std::mt19937_64 rng(seed);
  auto uniform = [&] { return static_cast<double>(rng() >> 11) * 0x1.0p-53; };
  std::vector<ClassicalState> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int n = 0; n < count; ++n) {
    const double p = 0.95 * (p_lo + (p_hi - p_lo) * uniform());
    const double angle = 2.0 * pi * uniform();
    const ClassicalState s = initial_state(orbit_params(E, p, omega0, B));
    const double c = std::cos(angle);
    const double sn = std::sin(angle);
    const Point2 r = rotated({s.x, s.y}, c, sn);
    const Point2 v = rotated({s.vx, s.vy}, c, sn);
    out.push_back({r.x, r.y, v.x, v.y});
  }
  return out;
}

double delta_phi(int p_phi_sign, double omega0, double B) {
  const int xi = sign_of(static_cast<double>(p_phi_sign));
  return pi * (xi - B / (2.0 * effective_frequency(omega0, B)));
}

double resonance_field(const Resonance& res) {
  validate(res);
  const double rho = res.ratio();
  return (rho - 2.0) / std::sqrt(rho - 1.0);
}

double choose_p_phi_for_resonance(const Resonance& res, double E, int direction, double omega0) {
  if (direction != 1 && direction != -1) throw std::invalid_argument("direction must be +1 or -1");
  if (!(E > 0.0)) throw InfeasibleOrbit("resonant orbit needs E > 0");
  const double B = omega0 * resonance_field(res);
  const double w = effective_frequency(omega0, B);
  // b = a / 2: E = a^2 (5 w^2 / 8 - direction w B / 4), always positive since w > |B| / 2.
  const double a2 = E / (0.625 * w * w - 0.25 * direction * w * B);
  return direction * 0.5 * w * a2;
}

PeriodicOrbit periodic_orbit(const Resonance& res, double E, int direction, double orientation,
                             int n_samples, double omega0) {
  validate(res);
  if (n_samples < 64 * res.v_r) {
    throw std::invalid_argument("periodic_orbit needs at least 64 samples per radial period");
  }
  const double B = omega0 * resonance_field(res);
  const double p_phi = choose_p_phi_for_resonance(res, E, direction, omega0);
  PeriodicOrbit orbit;
  orbit.resonance = res;
  orbit.energy = E;
  orbit.direction = direction;
  orbit.orientation = orientation;
  orbit.params = orbit_params(E, p_phi, omega0, B);
  const double period = res.v_r * pi / orbit.params.omega_tilde;
  const double c = std::cos(orientation);
  const double s = std::sin(orientation);
  orbit.points.reserve(static_cast<std::size_t>(n_samples) + 1);
  for (int k = 0; k <= n_samples; ++k) {
    const ClassicalState st = analytic_state(orbit.params, period * k / n_samples);
    orbit.points.push_back(rotated({st.x, st.y}, c, s));
  }
  return orbit;
}

int winding_number(const std::vector<Point2>& polyline) {
  double total = 0.0;
  for (std::size_t k = 0; k + 1 < polyline.size(); ++k) {
    const Point2& p = polyline[k];
    const Point2& q = polyline[k + 1];
    total += std::atan2(p.x * q.y - p.y * q.x, p.x * q.x + p.y * q.y);
  }
  return static_cast<int>(std::lround(total / (2.0 * pi)));
}

// --- integrator -----------------------------------------------------------

ClassicalIntegrator::ClassicalIntegrator(const ClassicalSystem& system)
    : system_(system), lookup_(system.bumps) {
  if (!(system.omega0 >= 0.0) || !std::isfinite(system.omega0)) {
    throw std::invalid_argument("omega0 must be finite and non-negative");
  }
}

double ClassicalIntegrator::energy(const ClassicalState& s) const {
  const double w2 = system_.omega0 * system_.omega0;
  return 0.5 * (s.vx * s.vx + s.vy * s.vy) + 0.5 * w2 * (s.x * s.x + s.y * s.y) +
         lookup_.value(s.x, s.y);
}

void ClassicalIntegrator::kick(ClassicalState& s, double tau) const {
  const double w2 = system_.omega0 * system_.omega0;
  double v = 0.0, gx = 0.0, gy = 0.0;
  lookup_.value_and_gradient(s.x, s.y, v, gx, gy);
  s.vx -= tau * (w2 * s.x + gx);
  s.vy -= tau * (w2 * s.y + gy);
}

void ClassicalIntegrator::drift(ClassicalState& s, double tau) const {
  // Exact cyclotron flow: v rotates clockwise by B tau, r follows the arc.
  const double B = system_.B;
  const double phase = B * tau;
  double S = tau;
  double C = 0.5 * B * tau * tau;
  if (std::abs(phase) > 1e-8) {
    S = std::sin(phase) / B;
    const double h = std::sin(0.5 * phase);
    C = 2.0 * h * h / B;
  }
  const double cs = std::cos(phase);
  const double sn = std::sin(phase);
  s.x += S * s.vx + C * s.vy;
  s.y += -C * s.vx + S * s.vy;
  const double vx = cs * s.vx + sn * s.vy;
  const double vy = -sn * s.vx + cs * s.vy;
  s.vx = vx;
  s.vy = vy;
}

void ClassicalIntegrator::strang(ClassicalState& s, double dt) const {
  kick(s, 0.5 * dt);
  drift(s, dt);
  kick(s, 0.5 * dt);
}

void ClassicalIntegrator::step(ClassicalState& s, double dt, int order) const {
  if (order == 2) {
    strang(s, dt);
    return;
  }
  // Triple jump; adjacent half kicks merged.
  static const double cbrt2 = std::cbrt(2.0);
  static const double w1 = 1.0 / (2.0 - cbrt2);
  static const double w0 = -cbrt2 / (2.0 - cbrt2);
  kick(s, 0.5 * w1 * dt);
  drift(s, w1 * dt);
  kick(s, 0.5 * (w1 + w0) * dt);
  drift(s, w0 * dt);
  kick(s, 0.5 * (w0 + w1) * dt);
  drift(s, w1 * dt);
  kick(s, 0.5 * w1 * dt);
}

Trajectory integrate_trajectory(const ClassicalState& state0, const ClassicalSystem& system,
                                const TrajectoryOptions& options) {
  if (!(options.duration > 0.0)) throw std::invalid_argument("trajectory duration must be positive");
  if (!(options.dt > 0.0)) throw std::invalid_argument("time step must be positive");
  if (options.order != 2 && options.order != 4) throw std::invalid_argument("order must be 2 or 4");
  if (options.sample_every < 1) throw std::invalid_argument("sample_every must be >= 1");
  const ClassicalIntegrator integrator(system);
  const double e0 = integrator.energy(state0);
  const double e_scale = std::max(std::abs(e0), 1e-300);

  double dt_request = options.dt;
  for (int attempt = 0;; ++attempt) {
    const auto steps = static_cast<long long>(std::ceil(options.duration / dt_request - 1e-9));
    const double dt = options.duration / static_cast<double>(steps);
    Trajectory traj;
    traj.dt = dt;
    traj.order = options.order;
    traj.samples.reserve(static_cast<std::size_t>(steps / options.sample_every + 2));
    ClassicalState s = state0;
    traj.samples.push_back({0.0, s});
    double drift_max = 0.0;
    bool rejected = false;
    for (long long n = 1; n <= steps; ++n) {
      integrator.step(s, dt, options.order);
      if (n % options.sample_every == 0 || n == steps) {
        traj.samples.push_back({static_cast<double>(n) * dt, s});
        const double d = std::abs(integrator.energy(s) - e0) / e_scale;
        drift_max = std::max(drift_max, d);
        if (options.energy_tolerance > 0.0 && d > options.energy_tolerance) {
          rejected = true;
          break;
        }
      }
    }
    if (!rejected) {
      traj.max_relative_energy_drift = drift_max;
      return traj;
    }
    if (attempt >= options.max_refinements) {
      throw EnergyDriftError("energy drift exceeds tolerance after " + std::to_string(attempt) +
                             " step refinements (dt = " + std::to_string(dt) + ")");
    }
    dt_request = 0.5 * dt;
  }
}

std::vector<SectionPoint> poincare_section(const Trajectory& trajectory,
                                           const ClassicalSystem& system) {
  std::vector<SectionPoint> out;
  const ClassicalIntegrator integrator(system);
  const auto& smp = trajectory.samples;
  // Advance from a stored sample by tau using sub-steps no longer than dt.
  auto advance = [&](ClassicalState s, double tau) {
    if (tau == 0.0) return s;
    const int m = std::max(1, static_cast<int>(std::ceil(std::abs(tau) / trajectory.dt - 1e-12)));
    for (int k = 0; k < m; ++k) integrator.step(s, tau / m, trajectory.order);
    return s;
  };
  for (std::size_t k = 0; k + 1 < smp.size(); ++k) {
    const ClassicalState& p = smp[k].state;
    const ClassicalState& q = smp[k + 1].state;
    if (!(p.y < 0.0 && q.y >= 0.0)) continue;
    const double h = smp[k + 1].t - smp[k].t;
    double tau = h * (-p.y) / (q.y - p.y);
    ClassicalState s = advance(p, tau);
    for (int it = 0; it < 30 && std::abs(s.y) > 1e-12; ++it) {
      if (s.vy == 0.0) break;
      tau = std::clamp(tau - s.y / s.vy, 0.0, h);
      s = advance(p, tau);
    }
    if (s.vy <= 0.0) continue;
    out.push_back({s.x, s.vx, smp[k].t + tau, s});
  }
  return out;
}

std::vector<std::vector<SectionPoint>> poincare_section(const std::vector<Trajectory>& trajectories,
                                                        const ClassicalSystem& system) {
  std::vector<std::vector<SectionPoint>> out;
  out.reserve(trajectories.size());
  for (const auto& t : trajectories) out.push_back(poincare_section(t, system));
  return out;
}

}  // namespace scarlab
