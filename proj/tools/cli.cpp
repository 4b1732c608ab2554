#include "cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <numeric>
#include <ostream>
#include <sstream>

#include "scarlab/analysis.hpp"
#include "scarlab/classical.hpp"
#include "scarlab/eigensolver.hpp"
#include "scarlab/io.hpp"

namespace scarlab::cli {
namespace fs = std::filesystem;

namespace {

std::vector<std::pair<std::string, std::string>> provenance(const ExperimentConfig& c) {
  return {{"config_hash", hash_hex(c.hash())}, {"seed", std::to_string(c.seed)}};
}

void require_out_dir(const ExperimentConfig& c) {
  const fs::path out(c.out);
  if (!fs::is_directory(out)) throw std::runtime_error("output directory does not exist: " + out.string());
}

void require_input(const fs::path& p, const char* what) {
  if (!fs::exists(p)) throw std::runtime_error(std::string("missing ") + what + ": expected " + p.string());
}

std::string fmt(double v) { return format_double(v); }

Spectrum load_spectrum(const ExperimentConfig& c) {
  const fs::path wf = in_out(c, c.scars.spectrum);
  const fs::path bp = in_out(c, c.scars.bumps);
  require_input(wf, "spectrum");
  require_input(bp, "bumps table");
  return to_spectrum(read_wf2d(wf), bumps_from_table(read_csv(bp)));
}

CensusOptions census_options(const ExperimentConfig& c) {
  CensusOptions o;
  o.threshold = c.scars.threshold;
  o.tube_width = c.scars.tube_width;
  o.first_state = c.scars.first_state;
  o.last_state = c.scars.last_state;
  o.energy_window = c.scars.energy_window;
  o.threads = resolved_threads(c);
  return o;
}

ClassicalSystem classical_system(const ExperimentConfig& c) {
  ClassicalSystem sys;
  sys.omega0 = c.system.omega0;
  sys.B = c.system.B;
  const double region = c.classical.bump_region > 0.0 ? c.classical.bump_region
                                                        : 1.2 * std::sqrt(2.0 * c.classical.energy) / c.system.omega0;
  switch (c.bumps.kind) {
    case BumpKind::none:
      break;
    case BumpKind::single:
      sys.bumps = single_bump(c.bumps.position, c.bumps.amplitude, c.bumps.sigma, region);
      break;
    case BumpKind::random:
      if (c.bumps.density > 0.0) sys.bumps = sample_bumps(c.seed, c.bumps.density, region, c.bumps.amplitude, c.bumps.sigma);
      break;
  }
  return sys;
}

std::vector<Trajectory> run_ensemble(const ExperimentConfig& c, const ClassicalSystem& sys) {
  const auto starts = random_initial_states(c.classical.energy, sys.omega0, sys.B, c.classical.trajectories, c.seed);
  TrajectoryOptions opt;
  opt.dt = c.classical.dt;
  opt.duration = c.classical.duration;
  opt.sample_every = c.classical.sample_every;
  opt.order = c.classical.order;
  opt.energy_tolerance = c.classical.energy_tolerance;
  std::vector<Trajectory> out(starts.size());
  parallel_for(static_cast<int>(starts.size()), resolved_threads(c), [&](int k) {
    out[static_cast<std::size_t>(k)] = integrate_trajectory(starts[static_cast<std::size_t>(k)], sys, opt);
  });
  return out;
}

CsvTable energy_table(const ExperimentConfig& c, const ClassicalSystem& sys, const std::vector<Trajectory>& trajs) {
  CsvTable t;
  t.meta = provenance(c);
  t.meta.emplace_back("B", fmt(sys.B));
  t.meta.emplace_back("bumps", std::to_string(sys.bumps.positions.size()));
  t.meta.emplace_back("units", "atomic units; drift = max |E(t) - E(0)| / |E(0)|");
  t.columns = {"trajectory", "E0", "dt", "max_relative_drift"};
  const ClassicalIntegrator integ(sys);
  for (std::size_t k = 0; k < trajs.size(); ++k) {
    t.rows.push_back({std::to_string(k), fmt(integ.energy(trajs[k].samples.front().state)), fmt(trajs[k].dt),
                      fmt(trajs[k].max_relative_energy_drift)});
  }
  return t;
}

}  // namespace

fs::path in_out(const ExperimentConfig& config, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() ? path : fs::path(config.out) / path;
}

int cmd_solve(const ExperimentConfig& c, std::ostream& log) {
  require_out_dir(c);
  const SolverConfig sc = solver_config(c);
  const auto t0 = std::chrono::steady_clock::now();
  int last_stage = -1;
  const Spectrum s = solve_eigenstates(sc, [&](const SolverProgress& p) {
    if (p.stage != last_stage) {
      log << "stage " << p.stage << " eps " << p.eps << " sweep " << p.sweep << "\n" << std::flush;
      last_stage = p.stage;
    }
  });
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const auto hash = c.hash();

  write_wf2d(in_out(c, "spectrum.wf2d"), s, hash);
  write_csv(in_out(c, "bumps.csv"), [&] {
    CsvTable t = bumps_table(s.bumps);
    t.meta.insert(t.meta.begin(), {"config_hash", hash_hex(hash)});
    return t;
  }());

  CsvTable e;
  e.meta = provenance(c);
  e.meta.emplace_back("B", fmt(s.params.B));
  e.meta.emplace_back("omega0", fmt(s.params.omega0));
  e.meta.emplace_back("grid", std::to_string(s.grid.nx) + "x" + std::to_string(s.grid.ny) +
                                  " half_extent " + fmt(s.grid.x_max));
  e.meta.emplace_back("bumps", std::to_string(s.bumps.positions.size()));
  e.meta.emplace_back("sweeps", std::to_string(s.sweeps));
  e.meta.emplace_back("all_converged", s.all_converged ? "true" : "false");
  e.meta.emplace_back("units", "energy in atomic units; residual = ||H psi - E psi||");
  e.columns = {"index", "energy", "converged", "residual"};
  for (std::size_t i = 0; i < s.energies.size(); ++i) {
    e.rows.push_back({std::to_string(i), fmt(s.energies[i]), s.converged[i] ? "1" : "0", fmt(s.residuals[i])});
  }
  write_csv(in_out(c, "energies.csv"), e);

  const auto n_conv = std::count(s.converged.begin(), s.converged.end(), true);
  log << "solve: " << n_conv << "/" << s.energies.size() << " converged after " << s.sweeps << " sweeps, "
      << secs << " s\n";
  return s.all_converged ? ok : not_converged;
}

int cmd_dos(const ExperimentConfig& c, std::ostream& log) {
  require_out_dir(c);
  std::map<double, std::vector<double>> by_B;
  std::vector<double> B_list = c.dos.B_list;
  double E_hi = c.dos.E_max;
  if (c.dos.source == DosSource::spectra) {
    for (const auto& p : c.dos.spectra) {
      const fs::path path = in_out(c, p);
      require_input(path, "spectrum");
      auto f = read_wf2d(path);
      E_hi = std::max(E_hi, f.energies.empty() ? 0.0 : f.energies.back());
      by_B[f.params.B] = std::move(f.energies);
    }
    if (B_list.empty()) {
      for (const auto& [B, E] : by_B) B_list.push_back(B);
    }
  } else {
    if (B_list.empty()) B_list = uniform_grid(0.0, 2.0, 0.001);
    for (double B : B_list) {
      std::vector<double> E;
      for (const auto& lv : fock_darwin_levels(c.dos.E_max, B, c.system.omega0)) E.push_back(lv.E);
      by_B[B] = std::move(E);
    }
  }
  const double w = c.dos.window;
  const auto grid = uniform_grid(0.0, E_hi + 12.0 * w, c.dos.energy_step);
  const auto curves = c.dos.source == DosSource::spectra
                          ? dos_sweep_spectra(B_list, by_B, w, grid)
                          : dos_sweep_analytic(B_list, c.dos.E_max, w, grid, c.system.omega0);

  CsvTable sum;
  sum.meta = provenance(c);
  sum.meta.emplace_back("source", c.dos.source == DosSource::analytic ? "analytic" : "spectra");
  sum.meta.emplace_back("window", fmt(w));
  sum.meta.emplace_back("units", "DOS in states per a.u.; clustering = integral of DOS^2 dE");
  sum.columns = {"B", "levels", "integral", "max_ridge", "clustering"};
  for (std::size_t i = 0; i < curves.size(); ++i) {
    std::vector<double> E;
    for (const auto& [B, v] : by_B) {
      if (std::abs(B - B_list[i]) <= 1e-9) E = v;
    }
    std::sort(E.begin(), E.end());
    double sq = 0.0;
    for (std::size_t k = 1; k < grid.size(); ++k) {
      sq += 0.5 * (curves[i].values[k] * curves[i].values[k] + curves[i].values[k - 1] * curves[i].values[k - 1]) *
            (grid[k] - grid[k - 1]);
    }
    sum.rows.push_back({fmt(B_list[i]), std::to_string(E.size()), fmt(integrate(curves[i])),
                        fmt(max_ridge_height(E, w)), fmt(sq)});
  }
  write_csv(in_out(c, "dos_summary.csv"), sum);

  if (static_cast<int>(curves.size()) <= c.dos.curve_limit) {
    CsvTable t;
    t.meta = provenance(c);
    t.meta.emplace_back("window", fmt(w));
    t.columns = {"B", "E", "dos"};
    for (const auto& cv : curves) {
      for (std::size_t k = 0; k < cv.values.size(); ++k) t.rows.push_back({fmt(cv.B), fmt(cv.energy_grid[k]), fmt(cv.values[k])});
    }
    write_csv(in_out(c, "dos_curves.csv"), t);
  }
  log << "dos: " << curves.size() << " fields, " << grid.size() << " energies each\n";
  return ok;
}

int cmd_scars(const ExperimentConfig& c, std::ostream& log) {
  require_out_dir(c);
  const Spectrum s = load_spectrum(c);
  const auto r = scar_census(s, c.scars.resonance, census_options(c));
  CsvTable t;
  t.meta = provenance(c);
  t.meta.emplace_back("resonance", "(" + std::to_string(r.resonance.v_theta) + "," + std::to_string(r.resonance.v_r) + ")");
  t.meta.emplace_back("threshold", fmt(r.threshold));
  t.meta.emplace_back("tube_width", fmt(c.scars.tube_width));
  t.meta.emplace_back("fraction", fmt(r.fraction));
  t.meta.emplace_back("scarred", std::to_string(r.scarred) + "/" + std::to_string(r.total));
  t.meta.emplace_back("units", "score 1 = uniform density; orientation in radians");
  t.columns = {"state", "energy", "orbit_energy", "score_plus", "orientation_plus",
               "score_minus", "orientation_minus", "scarred"};
  for (const auto& e : r.entries) {
    t.rows.push_back({std::to_string(e.state_index), fmt(e.energy), fmt(e.orbit_energy), fmt(e.forward.score),
                      fmt(e.forward.orientation), fmt(e.backward.score), fmt(e.backward.orientation),
                      e.best().score >= r.threshold ? "1" : "0"});
  }
  write_csv(in_out(c, "scars.csv"), t);
  log << "scars: " << r.scarred << "/" << r.total << " states scarred (fraction " << r.fraction << ")\n";
  return ok;
}

int cmd_pinning(const ExperimentConfig& c, std::ostream& log) {
  require_out_dir(c);
  const Spectrum s = load_spectrum(c);
  if (s.bumps.empty()) throw std::runtime_error("pinning needs a perturbed spectrum (bumps table is empty)");
  const Resonance res = c.scars.resonance;
  const int samples = 256 * res.v_r;

  int state = c.pinning.state;
  ScarScore best;
  double orbit_energy = 0.0;
  const RealField v_imp = bump_field(s.grid, s.bumps);
  if (state < 0) {
    const auto census = scar_census(s, res, census_options(c));
    double top = -1.0;
    for (const auto& e : census.entries) {
      const ScarScore& sc = e.best();
      if (sc.score < c.scars.threshold || sc.score <= top) continue;
      const auto orbit = periodic_orbit(res, e.orbit_energy, sc.direction, sc.orientation, samples, s.params.omega0);
      bool near = false;
      for (const auto& p : s.bumps.positions) near = near || distance_to_polyline(orbit.points, p) <= c.scars.tube_width;
      if (!near) continue;
      top = sc.score;
      best = sc;
      state = e.state_index;
      orbit_energy = e.orbit_energy;
    }
    if (state < 0) throw std::runtime_error("pinning: no scarred state passes within a tube width of a bump");
  } else {
    if (state >= static_cast<int>(s.states.size())) throw std::runtime_error("pinning.state out of range");
    const WaveField& psi = s.states[static_cast<std::size_t>(state)];
    orbit_energy = s.energies[static_cast<std::size_t>(state)] - expectation(psi, v_imp);
    ScarScorer::Options so;
    so.tube_width = c.scars.tube_width;
    const ScarScorer scorer(s.grid, so);
    const auto rho = scorer.density(psi);
    const auto f = scorer.score(rho, periodic_orbit(res, orbit_energy, 1, 0.0, samples, s.params.omega0));
    const auto b = scorer.score(rho, periodic_orbit(res, orbit_energy, -1, 0.0, samples, s.params.omega0));
    best = f.score >= b.score ? f : b;
    best.state_index = state;
  }

  const WaveField& psi = s.states[static_cast<std::size_t>(state)];
  const auto thetas = angle_grid(c.pinning.theta_points);
  const auto curve = pinning_curve(psi, s.bumps, thetas);
  const auto peaks = prominent_maxima(curve.overlaps, c.pinning.prominence);
  const int n = c.pinning.theta_points;
  bool zero_at_peak = false;
  for (int p : peaks) zero_at_peak = zero_at_peak || std::min(p, n - p) <= 1;

  CsvTable t;
  t.meta = provenance(c);
  t.meta.emplace_back("state", std::to_string(state));
  t.meta.emplace_back("energy", fmt(s.energies[static_cast<std::size_t>(state)]));
  t.meta.emplace_back("score", fmt(best.score));
  t.meta.emplace_back("direction", std::to_string(best.direction));
  t.meta.emplace_back("orientation", fmt(best.orientation));
  t.meta.emplace_back("prominence", fmt(c.pinning.prominence));
  t.meta.emplace_back("maxima", std::to_string(peaks.size()));
  t.meta.emplace_back("theta0_at_maximum", zero_at_peak ? "true" : "false");
  t.meta.emplace_back("units", "theta in radians; overlap = <psi|V_imp(theta)|psi> in a.u.");
  t.columns = {"theta", "overlap"};
  for (std::size_t i = 0; i < thetas.size(); ++i) t.rows.push_back({fmt(thetas[i]), fmt(curve.overlaps[i])});
  write_csv(in_out(c, "pinning.csv"), t);

  const auto orbit = periodic_orbit(res, orbit_energy, best.direction, best.orientation, samples, s.params.omega0);
  CsvTable o;
  o.meta = provenance(c);
  o.meta.emplace_back("state", std::to_string(state));
  o.meta.emplace_back("orbit_energy", fmt(orbit_energy));
  o.columns = {"x", "y"};
  for (const auto& p : orbit.points) o.rows.push_back({fmt(p.x), fmt(p.y)});
  write_csv(in_out(c, "pinning_orbit.csv"), o);

  log << "pinning: state " << state << " score " << best.score << ", " << peaks.size()
      << " maxima at prominence " << c.pinning.prominence << (zero_at_peak ? ", theta = 0 at a maximum" : "") << "\n";
  return ok;
}

int cmd_classical(const ExperimentConfig& c, std::ostream& log) {
  require_out_dir(c);
  const ClassicalSystem sys = classical_system(c);
  const auto trajs = run_ensemble(c, sys);
  write_csv(in_out(c, "classical_energy.csv"), energy_table(c, sys, trajs));
  CsvTable t;
  t.meta = provenance(c);
  t.meta.emplace_back("B", fmt(sys.B));
  t.columns = {"trajectory", "t", "x", "y", "vx", "vy"};
  double worst = 0.0;
  for (std::size_t k = 0; k < trajs.size(); ++k) {
    worst = std::max(worst, trajs[k].max_relative_energy_drift);
    for (const auto& s : trajs[k].samples) {
      t.rows.push_back({std::to_string(k), fmt(s.t), fmt(s.state.x), fmt(s.state.y), fmt(s.state.vx), fmt(s.state.vy)});
    }
  }
  write_csv(in_out(c, "trajectories.csv"), t);
  log << "classical: " << trajs.size() << " trajectories, max |dE/E| " << worst << "\n";
  return ok;
}

int cmd_poincare(const ExperimentConfig& c, std::ostream& log) {
  require_out_dir(c);
  const ClassicalSystem sys = classical_system(c);
  const auto trajs = run_ensemble(c, sys);
  const auto sections = poincare_section(trajs, sys);
  write_csv(in_out(c, "classical_energy.csv"), energy_table(c, sys, trajs));
  CsvTable t;
  t.meta = provenance(c);
  t.meta.emplace_back("B", fmt(sys.B));
  t.meta.emplace_back("section", "y = 0, vy > 0");
  t.columns = {"trajectory", "x", "vx", "t"};
  std::size_t total = 0;
  for (std::size_t k = 0; k < sections.size(); ++k) {
    total += sections[k].size();
    for (const auto& p : sections[k]) t.rows.push_back({std::to_string(k), fmt(p.x), fmt(p.vx), fmt(p.t)});
  }
  write_csv(in_out(c, "poincare.csv"), t);
  log << "poincare: " << total << " section points from " << trajs.size() << " trajectories\n";
  return ok;
}

int cmd_resonances(const ExperimentConfig& c, std::ostream& log) {
  require_out_dir(c);
  struct Row {
    Resonance r;
    double B;
  };
  std::vector<Row> rows;
  for (int vt = 1; vt <= c.resonances.max_v_theta; ++vt) {
    for (int vr = vt + 1; vr <= static_cast<int>(std::floor(c.resonances.max_ratio * vt + 1e-9)); ++vr) {
      if (std::gcd(vt, vr) != 1) continue;
      const Resonance r{vt, vr};
      rows.push_back({r, resonance_field(r)});
    }
  }
  std::sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
    if (a.r.ratio() != b.r.ratio()) return a.r.ratio() < b.r.ratio();
    return a.r.v_theta < b.r.v_theta;
  });
  CsvTable t;
  t.meta = provenance(c);
  t.meta.emplace_back("omega0", "1");
  t.meta.emplace_back("units", "B in a.u.; delta_phi in radians; closure = delta_phi v_r - 2 pi v_theta");
  t.columns = {"v_theta", "v_r", "ratio", "B", "omega_tilde", "delta_phi", "closure"};
  for (const auto& row : rows) {
    const double dphi = delta_phi(1, 1.0, row.B);
    t.rows.push_back({std::to_string(row.r.v_theta), std::to_string(row.r.v_r), fmt(row.r.ratio()), fmt(row.B),
                      fmt(effective_frequency(1.0, row.B)), fmt(dphi),
                      fmt(dphi * row.r.v_r - 2.0 * std::numbers::pi * row.r.v_theta)});
  }
  write_csv(in_out(c, "resonances.csv"), t);
  log << "resonances: " << rows.size() << " entries\n";
  return ok;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"scarlab: perturbation-induced scars in a 2D quantum well in a magnetic field"};
  app.require_subcommand(1, 1);
  std::string config_path;
  std::optional<int> threads;
  std::optional<std::string> out_dir;
  std::optional<std::uint64_t> seed;
  app.add_option("--config", config_path, "experiment config (TOML subset)");
  app.add_option("--threads", threads, "worker threads (0 = all cores, 1 = bit-reproducible)");
  app.add_option("--out", out_dir, "output directory (must exist)");
  app.add_option("--seed", seed, "random seed, overrides the config");

  struct Cmd {
    const char* name;
    const char* help;
    int (*fn)(const ExperimentConfig&, std::ostream&);
  };
  const Cmd cmds[] = {
      {"solve", "lowest eigenstates -> spectrum.wf2d, energies.csv, bumps.csv", cmd_solve},
      {"dos", "density of states vs B -> dos_summary.csv, dos_curves.csv", cmd_dos},
      {"scars", "scar census of a stored spectrum -> scars.csv", cmd_scars},
      {"pinning", "rotation overlap curve of a scarred state -> pinning.csv", cmd_pinning},
      {"classical", "trajectory ensemble -> trajectories.csv, classical_energy.csv", cmd_classical},
      {"resonances", "resonance field table -> resonances.csv", cmd_resonances},
      {"poincare", "surface of section y = 0, vy > 0 -> poincare.csv", cmd_poincare},
  };
  for (const auto& c : cmds) app.add_subcommand(c.name, c.help)->fallthrough();

  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    std::ostringstream o, e2;
    const int code = app.exit(e, o, e2);
    out << o.str();
    err << e2.str();
    return code == 0 ? ok : input_error;
  }

  try {
    std::string text;
    if (!config_path.empty()) text = read_file(config_path);
    ConfigOverrides ov;
    ov.seed = seed;
    ov.threads = threads;
    ov.out = out_dir;
    const ExperimentConfig config = parse_config(text, ov);
    for (const auto& c : cmds) {
      if (app.got_subcommand(c.name)) return c.fn(config, out);
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return input_error;
  }
  return input_error;
}

}  // namespace scarlab::cli
