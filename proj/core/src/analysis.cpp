#include "scarlab/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <string>

#include "scarlab/fft.hpp"

namespace scarlab {
namespace {

constexpr double two_pi = 2.0 * std::numbers::pi;

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

double gaussian_norm(double window) { return 1.0 / (window * std::sqrt(two_pi)); }

// Symmetric cutoff for Gaussian windows: exp(-60.5) is far below double
// resolution relative to the peak.
constexpr double window_cutoff = 11.0;

}  // namespace

// --- Fock-Darwin ---------------------------------------------------------------

double fock_darwin_energy(int k, int l, double B, double omega0) {
  if (k < 0) throw std::invalid_argument("fock_darwin_energy: k must be >= 0");
  const double wt = effective_frequency(omega0, B);
  return (2.0 * k + std::abs(l) + 1.0) * wt - 0.5 * l * B;
}

std::vector<FdLevel> fock_darwin_levels(double E_max, double B, double omega0) {
  if (!std::isfinite(E_max)) {
    throw std::invalid_argument("fock_darwin_levels: E_max must be finite");
  }
  std::vector<FdLevel> out;
  // Energy grows strictly in k and in |l| at fixed sign of l, because
  // omega_tilde > |B| / 2.
  for (int k = 0; fock_darwin_energy(k, 0, B, omega0) <= E_max; ++k) {
    for (int sign : {1, -1}) {
      for (int m = (sign > 0 ? 0 : 1);; ++m) {
        const int l = sign * m;
        const double E = fock_darwin_energy(k, l, B, omega0);
        if (E > E_max) break;
        out.push_back({E, k, l});
      }
    }
  }
  std::sort(out.begin(), out.end(), [](const FdLevel& a, const FdLevel& b) {
    if (a.E != b.E) return a.E < b.E;
    if (a.k != b.k) return a.k < b.k;
    return a.l < b.l;
  });
  return out;
}

namespace {

std::vector<FdLevel> lowest_levels(int count, double B, double omega0) {
  if (count <= 0) return {};
  const double wt = effective_frequency(omega0, B);
  double E_max = wt * (1.0 + std::sqrt(2.0 * count));
  for (;;) {
    auto levels = fock_darwin_levels(E_max, B, omega0);
    if (static_cast<int>(levels.size()) >= count) {
      levels.resize(static_cast<std::size_t>(count));
      return levels;
    }
    E_max *= 1.5;
  }
}

}  // namespace

std::vector<double> fock_darwin_lowest(int count, double B, double omega0) {
  std::vector<double> out;
  for (const auto& lv : lowest_levels(count, B, omega0)) out.push_back(lv.E);
  return out;
}

WaveField fock_darwin_state(const Grid2D& grid, int k, int l, double B, double omega0) {
  if (k < 0) throw std::invalid_argument("fock_darwin_state: k must be >= 0");
  const double wt = effective_frequency(omega0, B);
  const unsigned m = static_cast<unsigned>(std::abs(l));
  const double log_norm =
      0.5 * (std::log(wt / std::numbers::pi) + std::lgamma(k + 1.0) - std::lgamma(k + m + 1.0));
  WaveField psi(grid);
  for (int j = 0; j < grid.ny; ++j) {
    for (int i = 0; i < grid.nx; ++i) {
      const double x = grid.x(i);
      const double y = grid.y(j);
      const double t = wt * (x * x + y * y);  // rho^2
      double amp = 0.0;
      if (t > 0.0) {
        const double lag = std::assoc_laguerre(static_cast<unsigned>(k), m, t);
        amp = lag * std::exp(log_norm + 0.5 * m * std::log(t) - 0.5 * t);
      } else if (m == 0) {
        amp = std::assoc_laguerre(static_cast<unsigned>(k), 0u, 0.0) * std::exp(log_norm);
      }
      psi(i, j) = std::polar(amp, l * std::atan2(y, x));
    }
  }
  return psi;
}

// --- DOS -----------------------------------------------------------------------

DosCurve dos(std::span<const double> energies, double window, std::span<const double> energy_grid,
             double B) {
  if (!(window > 0.0)) throw std::invalid_argument("dos: window must be > 0");
  for (std::size_t i = 1; i < energy_grid.size(); ++i) {
    if (!(energy_grid[i] > energy_grid[i - 1])) {
      throw std::invalid_argument("dos: energy grid must be strictly ascending");
    }
  }
  DosCurve c;
  c.energy_grid.assign(energy_grid.begin(), energy_grid.end());
  c.values.assign(energy_grid.size(), 0.0);
  c.window = window;
  c.B = B;
  const double norm = gaussian_norm(window);
  const double inv2w2 = 1.0 / (2.0 * window * window);
  const double reach = window_cutoff * window;
  for (double Ei : energies) {
    auto lo = std::lower_bound(energy_grid.begin(), energy_grid.end(), Ei - reach);
    auto hi = std::upper_bound(energy_grid.begin(), energy_grid.end(), Ei + reach);
    for (auto it = lo; it != hi; ++it) {
      const double d = *it - Ei;
      c.values[static_cast<std::size_t>(it - energy_grid.begin())] += norm * std::exp(-d * d * inv2w2);
    }
  }
  return c;
}

std::vector<double> uniform_grid(double lo, double hi, double step) {
  if (!(step > 0.0) || !(hi >= lo)) throw std::invalid_argument("uniform_grid: need step > 0 and hi >= lo");
  const auto n = static_cast<std::size_t>(std::floor((hi - lo) / step + 1e-9)) + 1;
  std::vector<double> g(n);
  for (std::size_t i = 0; i < n; ++i) g[i] = lo + static_cast<double>(i) * step;
  return g;
}

double integrate(const DosCurve& curve) {
  double acc = 0.0;
  for (std::size_t i = 1; i < curve.values.size(); ++i) {
    acc += 0.5 * (curve.values[i] + curve.values[i - 1]) * (curve.energy_grid[i] - curve.energy_grid[i - 1]);
  }
  return acc;
}

std::vector<DosCurve> dos_sweep_analytic(std::span<const double> B_list, double E_max, double window,
                                         std::span<const double> energy_grid, double omega0) {
  if (B_list.empty()) throw std::invalid_argument("dos_sweep: empty B list");
  std::vector<DosCurve> out;
  out.reserve(B_list.size());
  for (double B : B_list) {
    std::vector<double> E;
    for (const auto& lv : fock_darwin_levels(E_max, B, omega0)) E.push_back(lv.E);
    out.push_back(dos(E, window, energy_grid, B));
  }
  return out;
}

std::vector<DosCurve> dos_sweep_spectra(std::span<const double> B_list,
                                        const std::map<double, std::vector<double>>& energies_by_B,
                                        double window, std::span<const double> energy_grid) {
  if (B_list.empty()) throw std::invalid_argument("dos_sweep: empty B list");
  std::vector<DosCurve> out;
  for (double B : B_list) {
    const std::vector<double>* found = nullptr;
    for (const auto& [key, E] : energies_by_B) {
      if (std::abs(key - B) <= 1e-9) {
        found = &E;
        break;
      }
    }
    if (!found) throw std::out_of_range("dos_sweep: no spectrum for B = " + fmt(B));
    out.push_back(dos(*found, window, energy_grid, B));
  }
  return out;
}

double max_ridge_height(std::span<const double> sorted_energies, double window) {
  if (!(window > 0.0)) throw std::invalid_argument("max_ridge_height: window must be > 0");
  const double norm = gaussian_norm(window);
  const double inv2w2 = 1.0 / (2.0 * window * window);
  const double reach = window_cutoff * window;
  double best = 0.0;
  std::size_t lo = 0;
  const std::size_t n = sorted_energies.size();
  for (std::size_t i = 0; i < n; ++i) {
    const double Ei = sorted_energies[i];
    while (sorted_energies[lo] < Ei - reach) ++lo;
    double v = 0.0;
    for (std::size_t j = lo; j < n && sorted_energies[j] <= Ei + reach; ++j) {
      const double d = sorted_energies[j] - Ei;
      v += std::exp(-d * d * inv2w2);
    }
    best = std::max(best, v * norm);
  }
  return best;
}

double clustering_strength(std::span<const double> sorted_energies, double window) {
  if (!(window > 0.0)) throw std::invalid_argument("clustering_strength: window must be > 0");
  // Gaussian * Gaussian integrates to a Gaussian of variance 2 w^2.
  const double norm = 1.0 / (2.0 * window * std::sqrt(std::numbers::pi));
  const double inv4w2 = 1.0 / (4.0 * window * window);
  const double reach = window_cutoff * std::sqrt(2.0) * window;
  const std::size_t n = sorted_energies.size();
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    acc += 1.0;
    for (std::size_t j = i + 1; j < n && sorted_energies[j] - sorted_energies[i] <= reach; ++j) {
      const double d = sorted_energies[j] - sorted_energies[i];
      acc += 2.0 * std::exp(-d * d * inv4w2);
    }
  }
  return acc * norm;
}

// --- scars ---------------------------------------------------------------------

double distance_to_polyline(const std::vector<Point2>& polyline, Point2 p) {
  if (polyline.empty()) throw std::invalid_argument("distance_to_polyline: empty polyline");
  double best = std::hypot(p.x - polyline[0].x, p.y - polyline[0].y);
  for (std::size_t s = 1; s < polyline.size(); ++s) {
    const Point2 a = polyline[s - 1];
    const Point2 b = polyline[s];
    const double ex = b.x - a.x;
    const double ey = b.y - a.y;
    const double len2 = ex * ex + ey * ey;
    double t = len2 > 0.0 ? ((p.x - a.x) * ex + (p.y - a.y) * ey) / len2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    best = std::min(best, std::hypot(p.x - (a.x + t * ex), p.y - (a.y + t * ey)));
  }
  return best;
}

struct ScarScorer::Correlation {
  std::vector<cplx> coeff;  // S[k], k = 0..M/2
  double tube_integral = 0.0;
  int n_phi = 0;

  // Correlation of density and tube for a tube rotated by theta.
  [[nodiscard]] double at(double theta) const {
    const int half = n_phi / 2;
    double acc = coeff[0].real();
    const cplx step = std::polar(1.0, theta);
    cplx e = step;
    for (int k = 1; k < half; ++k) {
      acc += 2.0 * (coeff[static_cast<std::size_t>(k)] * e).real();
      e *= step;
    }
    acc += coeff[static_cast<std::size_t>(half)].real() * std::cos(half * theta);
    return acc / n_phi;
  }
};

ScarScorer::ScarScorer(const Grid2D& grid, const Options& options) : grid_(grid), options_(options) {
  if (!(options_.tube_width > 0.0)) throw std::invalid_argument("scar_score: tube_width must be > 0");
  if (options_.angular_samples < 64 || options_.angular_samples % 2 != 0) {
    throw std::invalid_argument("scar_score: angular_samples must be even and >= 64");
  }
  n_phi_ = options_.angular_samples;
  dr_ = options_.radial_step > 0.0 ? options_.radial_step : 0.75 * std::min(grid.dx, grid.dy);
  const double R = std::min(grid.x_max, grid.y_max) - 1.5 * std::max(grid.dx, grid.dy);
  n_r_ = static_cast<int>(std::floor(R / dr_));
  if (n_r_ < 4) throw std::invalid_argument("scar_score: grid too coarse for the polar resampling");
}

ScarScorer::Density ScarScorer::density(const WaveField& psi) const {
  if (!(psi.grid == grid_)) throw std::invalid_argument("scar_score: grid mismatch");
  const Grid2D& g = grid_;
  std::vector<cplx> buf(static_cast<std::size_t>(n_r_) * static_cast<std::size_t>(n_phi_));
  for (int ir = 0; ir < n_r_; ++ir) {
    const double r = (ir + 0.5) * dr_;
    for (int ip = 0; ip < n_phi_; ++ip) {
      const double phi = two_pi * ip / n_phi_;
      const double fx = (r * std::cos(phi) - g.x_min) / g.dx;
      const double fy = (r * std::sin(phi) - g.y_min) / g.dy;
      const int i0 = static_cast<int>(std::floor(fx));
      const int j0 = static_cast<int>(std::floor(fy));
      const double tx = fx - i0;
      const double ty = fy - j0;
      const double v00 = std::norm(psi(i0, j0));
      const double v10 = std::norm(psi(i0 + 1, j0));
      const double v01 = std::norm(psi(i0, j0 + 1));
      const double v11 = std::norm(psi(i0 + 1, j0 + 1));
      buf[static_cast<std::size_t>(ir) * static_cast<std::size_t>(n_phi_) + static_cast<std::size_t>(ip)] =
          (1 - ty) * ((1 - tx) * v00 + tx * v10) + ty * ((1 - tx) * v01 + tx * v11);
    }
  }
  AxisFft::get(n_phi_, n_r_)->rows(buf, -1);
  return Density{std::move(buf)};
}

std::vector<double> ScarScorer::tube(const PeriodicOrbit& orbit) const {
  const auto& pts = orbit.points;
  if (pts.size() < 2) throw std::invalid_argument("scar_score: orbit polyline needs >= 2 points");
  const double w = options_.tube_width;
  const double cut = 6.0 * w;
  const double inv2w2 = 1.0 / (2.0 * w * w);

  // Segments bucketed by the cells their bounding boxes touch; any segment
  // within `cut` of a point then sits in the point's 3x3 cell neighbourhood.
  double lo_x = pts[0].x, hi_x = pts[0].x, lo_y = pts[0].y, hi_y = pts[0].y;
  for (const auto& p : pts) {
    lo_x = std::min(lo_x, p.x);
    hi_x = std::max(hi_x, p.x);
    lo_y = std::min(lo_y, p.y);
    hi_y = std::max(hi_y, p.y);
  }
  const int cx = static_cast<int>((hi_x - lo_x) / cut) + 1;
  const int cy = static_cast<int>((hi_y - lo_y) / cut) + 1;
  std::vector<std::vector<int>> cells(static_cast<std::size_t>(cx) * static_cast<std::size_t>(cy));
  auto cell_of = [&](double v, double lo, int n) {
    return std::clamp(static_cast<int>(std::floor((v - lo) / cut)), 0, n - 1);
  };
  for (std::size_t s = 1; s < pts.size(); ++s) {
    const int x0 = cell_of(std::min(pts[s - 1].x, pts[s].x), lo_x, cx);
    const int x1 = cell_of(std::max(pts[s - 1].x, pts[s].x), lo_x, cx);
    const int y0 = cell_of(std::min(pts[s - 1].y, pts[s].y), lo_y, cy);
    const int y1 = cell_of(std::max(pts[s - 1].y, pts[s].y), lo_y, cy);
    for (int b = y0; b <= y1; ++b) {
      for (int a = x0; a <= x1; ++a) cells[static_cast<std::size_t>(b * cx + a)].push_back(static_cast<int>(s));
    }
  }

  std::vector<double> k(static_cast<std::size_t>(n_r_) * static_cast<std::size_t>(n_phi_), 0.0);
  for (int ir = 0; ir < n_r_; ++ir) {
    const double r = (ir + 0.5) * dr_;
    for (int ip = 0; ip < n_phi_; ++ip) {
      const double phi = two_pi * ip / n_phi_;
      const double px = r * std::cos(phi);
      const double py = r * std::sin(phi);
      if (px < lo_x - cut || px > hi_x + cut || py < lo_y - cut || py > hi_y + cut) continue;
      const int ax = static_cast<int>(std::floor((px - lo_x) / cut));
      const int ay = static_cast<int>(std::floor((py - lo_y) / cut));
      double d2 = cut * cut;
      for (int b = std::max(ay - 1, 0); b <= std::min(ay + 1, cy - 1); ++b) {
        for (int a = std::max(ax - 1, 0); a <= std::min(ax + 1, cx - 1); ++a) {
          for (int s : cells[static_cast<std::size_t>(b * cx + a)]) {
            const Point2 p0 = pts[static_cast<std::size_t>(s - 1)];
            const Point2 p1 = pts[static_cast<std::size_t>(s)];
            const double ex = p1.x - p0.x;
            const double ey = p1.y - p0.y;
            const double len2 = ex * ex + ey * ey;
            double t = len2 > 0.0 ? ((px - p0.x) * ex + (py - p0.y) * ey) / len2 : 0.0;
            t = std::clamp(t, 0.0, 1.0);
            const double qx = px - (p0.x + t * ex);
            const double qy = py - (p0.y + t * ey);
            d2 = std::min(d2, qx * qx + qy * qy);
          }
        }
      }
      if (d2 < cut * cut) {
        k[static_cast<std::size_t>(ir) * static_cast<std::size_t>(n_phi_) + static_cast<std::size_t>(ip)] =
            std::exp(-d2 * inv2w2);
      }
    }
  }
  return k;
}

ScarScorer::Correlation ScarScorer::correlate(const Density& rho, const PeriodicOrbit& orbit) const {
  const auto kt = tube(orbit);
  std::vector<cplx> buf(kt.begin(), kt.end());
  AxisFft::get(n_phi_, n_r_)->rows(buf, -1);
  Correlation c;
  c.n_phi = n_phi_;
  c.coeff.assign(static_cast<std::size_t>(n_phi_ / 2 + 1), cplx{});
  const double dphi = two_pi / n_phi_;
  for (int ir = 0; ir < n_r_; ++ir) {
    const double wr = (ir + 0.5) * dr_ * dr_ * dphi;
    const std::size_t row = static_cast<std::size_t>(ir) * static_cast<std::size_t>(n_phi_);
    for (int k = 0; k <= n_phi_ / 2; ++k) {
      c.coeff[static_cast<std::size_t>(k)] +=
          wr * rho.spectrum[row + static_cast<std::size_t>(k)] * std::conj(buf[row + static_cast<std::size_t>(k)]);
    }
    c.tube_integral += wr * buf[row].real();
  }
  if (!(c.tube_integral > 0.0)) throw std::invalid_argument("scar_score: orbit tube lies outside the grid");
  return c;
}

ScarScore ScarScorer::score(const Density& rho, const PeriodicOrbit& orbit) const {
  const Correlation c = correlate(rho, orbit);
  const double scale = grid_.area() / c.tube_integral;
  const int v_r = std::max(orbit.resonance.v_r, 1);
  const double sector = two_pi / v_r;
  const int n_sec = std::max(90, n_phi_ / v_r);
  const double h = sector / n_sec;

  int best_i = 0;
  double best = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < n_sec; ++i) {
    const double v = c.at(i * h);
    if (v > best) {
      best = v;
      best_i = i;
    }
  }
  // Golden-section maximization on the bracket around the best grid point.
  double a = (best_i - 1) * h;
  double b = (best_i + 1) * h;
  const double g = (std::sqrt(5.0) - 1.0) / 2.0;
  double x1 = b - g * (b - a);
  double x2 = a + g * (b - a);
  double f1 = c.at(x1);
  double f2 = c.at(x2);
  for (int it = 0; it < 60 && b - a > 1e-12; ++it) {
    if (f1 < f2) {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + g * (b - a);
      f2 = c.at(x2);
    } else {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - g * (b - a);
      f1 = c.at(x1);
    }
  }
  double theta = best_i * h;
  const double refined = std::max(f1, f2);
  if (refined > best) {
    best = refined;
    theta = f1 >= f2 ? x1 : x2;
  }

  ScarScore s;
  s.resonance = orbit.resonance;
  s.direction = orbit.direction;
  s.score = std::max(0.0, best * scale);
  double o = std::fmod(orbit.orientation + theta, sector);
  if (o < 0.0) o += sector;
  s.orientation = o;
  return s;
}

ScarScore ScarScorer::score(const WaveField& psi, const PeriodicOrbit& orbit) const {
  return score(density(psi), orbit);
}

double ScarScorer::score_at(const WaveField& psi, const PeriodicOrbit& orbit, double rotation) const {
  const Correlation c = correlate(density(psi), orbit);
  return std::max(0.0, c.at(rotation) * grid_.area() / c.tube_integral);
}

ScarScore scar_score(const WaveField& psi, const PeriodicOrbit& orbit, double tube_width,
                     std::optional<double> state_energy) {
  if (state_energy && std::abs(orbit.energy - *state_energy) > 0.1 * std::abs(*state_energy)) {
    throw std::invalid_argument("scar_score: orbit energy " + fmt(orbit.energy) +
                                " is not within 10% of the state energy " + fmt(*state_energy));
  }
  ScarScorer::Options opt;
  opt.tube_width = tube_width;
  return ScarScorer(psi.grid, opt).score(psi, orbit);
}

CensusResult scar_census(const Spectrum& spectrum, const Resonance& res, const CensusOptions& options) {
  validate(res);
  const double B_res = resonance_field(res);
  if (std::abs(spectrum.params.B - B_res) > 1e-6) {
    throw std::invalid_argument("scar_census: spectrum B = " + fmt(spectrum.params.B) +
                                " is not the resonance field " + fmt(B_res) + " of (" +
                                std::to_string(res.v_theta) + "," + std::to_string(res.v_r) + ")");
  }
  const int n = static_cast<int>(spectrum.states.size());
  const int first = std::clamp(options.first_state, 0, n);
  const int last = options.last_state < 0 ? n : std::clamp(options.last_state, first, n);

  std::vector<int> picked;
  for (int s = first; s < last; ++s) {
    const double E = spectrum.energies[static_cast<std::size_t>(s)];
    if (options.energy_window && (E < options.energy_window->first || E > options.energy_window->second)) continue;
    picked.push_back(s);
  }

  const bool perturbed = !spectrum.bumps.empty();
  const RealField v_imp = perturbed ? bump_field(spectrum.grid, spectrum.bumps) : RealField(spectrum.grid);
  ScarScorer::Options sopt;
  sopt.tube_width = options.tube_width;
  const ScarScorer scorer(spectrum.grid, sopt);
  const int samples = options.orbit_samples > 0 ? options.orbit_samples : 256 * res.v_r;
  const double omega0 = spectrum.params.omega0;

  CensusResult out;
  out.resonance = res;
  out.threshold = options.threshold;
  out.entries.resize(picked.size());
  parallel_for(static_cast<int>(picked.size()), options.threads, [&](int k) {
    const int s = picked[static_cast<std::size_t>(k)];
    const WaveField& psi = spectrum.states[static_cast<std::size_t>(s)];
    CensusEntry e;
    e.state_index = s;
    e.energy = spectrum.energies[static_cast<std::size_t>(s)];
    e.orbit_energy = perturbed ? e.energy - expectation(psi, v_imp) : e.energy;
    if (!(e.orbit_energy > 0.0) || std::abs(e.orbit_energy - e.energy) > 0.1 * std::abs(e.energy)) {
      throw std::invalid_argument("scar_census: state " + std::to_string(s) + " orbit energy " +
                                  fmt(e.orbit_energy) + " is not within 10% of E = " + fmt(e.energy));
    }
    const auto rho = scorer.density(psi);
    e.forward = scorer.score(rho, periodic_orbit(res, e.orbit_energy, 1, 0.0, samples, omega0));
    e.backward = scorer.score(rho, periodic_orbit(res, e.orbit_energy, -1, 0.0, samples, omega0));
    e.forward.state_index = s;
    e.backward.state_index = s;
    out.entries[static_cast<std::size_t>(k)] = e;
  });

  out.total = static_cast<int>(out.entries.size());
  for (const auto& e : out.entries) {
    if (e.best().score >= options.threshold) ++out.scarred;
  }
  out.fraction = out.total > 0 ? static_cast<double>(out.scarred) / out.total : 0.0;
  return out;
}

// --- pinning -------------------------------------------------------------------

PinningCurve pinning_curve(const WaveField& psi, const BumpSet& bumps, std::span<const double> theta_grid) {
  const Grid2D& g = psi.grid;
  PinningCurve c;
  c.theta_grid.assign(theta_grid.begin(), theta_grid.end());
  c.overlaps.assign(theta_grid.size(), 0.0);
  if (bumps.empty()) return c;
  validate(bumps);

  std::vector<double> rho(g.size());
  for (std::size_t n = 0; n < rho.size(); ++n) rho[n] = std::norm(psi.values[n]);

  const double inv2s2 = 1.0 / (2.0 * bumps.sigma * bumps.sigma);
  const double reach = 9.0 * bumps.sigma;
  std::vector<double> gx;
  for (std::size_t t = 0; t < theta_grid.size(); ++t) {
    const BumpSet rotated = rotate_bumps(bumps, theta_grid[t]);
    double acc = 0.0;
    for (const auto& p : rotated.positions) {
      const int i0 = std::max(0, static_cast<int>(std::ceil((p.x - reach - g.x_min) / g.dx)));
      const int i1 = std::min(g.nx - 1, static_cast<int>(std::floor((p.x + reach - g.x_min) / g.dx)));
      const int j0 = std::max(0, static_cast<int>(std::ceil((p.y - reach - g.y_min) / g.dy)));
      const int j1 = std::min(g.ny - 1, static_cast<int>(std::floor((p.y + reach - g.y_min) / g.dy)));
      if (i0 > i1 || j0 > j1) continue;
      gx.resize(static_cast<std::size_t>(i1 - i0 + 1));
      for (int i = i0; i <= i1; ++i) {
        const double d = g.x(i) - p.x;
        gx[static_cast<std::size_t>(i - i0)] = std::exp(-d * d * inv2s2);
      }
      for (int j = j0; j <= j1; ++j) {
        const double d = g.y(j) - p.y;
        const double wy = std::exp(-d * d * inv2s2);
        const double* row = rho.data() + g.index(i0, j);
        double s = 0.0;
        for (int i = 0; i <= i1 - i0; ++i) s += gx[static_cast<std::size_t>(i)] * row[i];
        acc += wy * s;
      }
    }
    c.overlaps[t] = acc * bumps.amplitude * g.cell_area();
  }
  return c;
}

std::vector<double> angle_grid(int n) {
  if (n < 1) throw std::invalid_argument("angle_grid: n must be >= 1");
  std::vector<double> out(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = two_pi * i / n;
  return out;
}

std::vector<int> prominent_maxima(std::span<const double> v, double prominence) {
  const int n = static_cast<int>(v.size());
  if (n < 8) throw std::invalid_argument("count_maxima: need at least 8 samples");
  const auto [mn, mx] = std::minmax_element(v.begin(), v.end());
  const double range = *mx - *mn;
  std::vector<int> out;
  // Flat to rounding: a curve constant up to quadrature noise has no maxima.
  const double scale = std::max(std::abs(*mn), std::abs(*mx));
  if (!(range > 1e-12 * scale)) return out;
  auto at = [&](int i) { return v[static_cast<std::size_t>(((i % n) + n) % n)]; };

  for (int i = 0; i < n; ++i) {
    // A peak is the first sample of a plateau that rises from the left and
    // falls on the right.
    if (!(at(i) > at(i - 1))) continue;
    int e = i;
    while (e - i < n && at(e + 1) == at(i)) ++e;
    if (!(at(e + 1) < at(i))) continue;
    const double h = at(i);
    // Walk each way until terrain higher than the peak; the key col is the
    // higher of the two minima met on the way.
    double left_min = h;
    int steps = 0;
    for (int k = i - 1; steps < n; --k, ++steps) {
      if (at(k) > h) break;
      left_min = std::min(left_min, at(k));
    }
    const bool left_open = steps >= n;
    double right_min = h;
    steps = 0;
    for (int k = e + 1; steps < n; ++k, ++steps) {
      if (at(k) > h) break;
      right_min = std::min(right_min, at(k));
    }
    const bool right_open = steps >= n;
    double col;
    if (left_open && right_open) {
      col = *mn;  // global maximum
    } else {
      col = std::max(left_open ? -std::numeric_limits<double>::infinity() : left_min,
                     right_open ? -std::numeric_limits<double>::infinity() : right_min);
    }
    if (h - col >= prominence * range) out.push_back(i);
  }
  return out;
}

int count_maxima(const PinningCurve& curve, double prominence) {
  return static_cast<int>(prominent_maxima(curve.overlaps, prominence).size());
}

// --- clusters ------------------------------------------------------------------

ClusterStats fd_cluster_statistics(std::span<const double> energies, double B, int first, int last,
                                   double omega0) {
  const int n = static_cast<int>(energies.size());
  if (first < 0 || last > n || first >= last) {
    throw std::invalid_argument("fd_cluster_statistics: bad index range");
  }
  const auto fd = fock_darwin_lowest(n + 1, B, omega0);
  // Cluster id per FD index.
  std::vector<int> id(fd.size());
  for (std::size_t i = 1; i < fd.size(); ++i) {
    const bool same = std::abs(fd[i] - fd[i - 1]) <= 1e-9 * std::max(1.0, std::abs(fd[i]));
    id[i] = id[i - 1] + (same ? 0 : 1);
  }
  ClusterStats st;
  st.cluster_spacing = std::numeric_limits<double>::infinity();
  double ss = 0.0;
  int dof = 0;
  int i = first;
  // Skip a cluster that started before `first`.
  while (i < last && i > 0 && id[static_cast<std::size_t>(i)] == id[static_cast<std::size_t>(i - 1)]) ++i;
  while (i < last) {
    int j = i;
    while (j < static_cast<int>(fd.size()) && id[static_cast<std::size_t>(j)] == id[static_cast<std::size_t>(i)]) ++j;
    if (j > last) break;  // cluster cut off by the range end
    if (i > 0) st.cluster_spacing = std::min(st.cluster_spacing, fd[static_cast<std::size_t>(i)] - fd[static_cast<std::size_t>(i - 1)]);
    if (j - i >= 2) {
      double mean = 0.0;
      for (int s = i; s < j; ++s) mean += energies[static_cast<std::size_t>(s)];
      mean /= (j - i);
      for (int s = i; s < j; ++s) {
        const double d = energies[static_cast<std::size_t>(s)] - mean;
        ss += d * d;
      }
      dof += j - i - 1;
      ++st.clusters;
      st.states += j - i;
    }
    i = j;
  }
  st.pooled_std = dof > 0 ? std::sqrt(ss / dof) : 0.0;
  if (!std::isfinite(st.cluster_spacing)) st.cluster_spacing = 0.0;
  return st;
}

}  // namespace scarlab
