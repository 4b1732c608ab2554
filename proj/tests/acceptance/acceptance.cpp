// Acceptance runner: one criterion per invocation, one PASS/FAIL line each.
//
//   acceptance <1..8> --work <dir> [--unit-tests <path>]
//
// Criteria 5-7 drive the scarlab command line (solve, scars, pinning) inside
// the work directory, the rest call the library directly.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numbers>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "cli.hpp"
#include "scarlab/analysis.hpp"
#include "scarlab/classical.hpp"
#include "scarlab/config.hpp"
#include "scarlab/io.hpp"

using namespace scarlab;
namespace fs = std::filesystem;

namespace {

constexpr double pi = std::numbers::pi;

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Context {
  fs::path work;
  std::string unit_tests;
};

class Stopwatch {
 public:
  [[nodiscard]] double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

std::string num(double v, int digits = 4) {
  std::ostringstream s;
  s.precision(digits);
  s << v;
  return s.str();
}

fs::path fresh(const fs::path& p) {
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

// Runs the command line in-process; progress goes to stderr so ctest logs show it.
int scarlab(const std::vector<std::string>& args) {
  std::cerr << "$ scarlab";
  for (const auto& a : args) std::cerr << ' ' << a;
  std::cerr << '\n';
  return cli::run(args, std::cerr, std::cerr);
}

double meta_number(const CsvTable& t, const std::string& key) {
  const auto v = t.find_meta(key);
  if (!v) throw std::runtime_error("missing '# " + key + "' in output");
  return std::stod(*v);
}

// --- 1: Fock-Darwin oracle ---------------------------------------------------

Outcome fock_darwin_oracle(const Context&) {
  const double fields[] = {0.0, 1 / std::sqrt(2.0), 2 / std::sqrt(3.0)};
  Outcome o{true, ""};
  for (double B : fields) {
    std::ostringstream text;
    text.precision(17);
    text << "seed = 1\n[system]\nB = " << B << "\n[grid]\nn = 256\n[solver]\nn_states = 120\n[bumps]\nkind = \"none\"\n";
    const ExperimentConfig c = parse_config(text.str());
    const Stopwatch clock;
    const Spectrum s = solve_eigenstates(solver_config(c), [](const SolverProgress& p) {
      if (p.sweep % 25 == 0) std::cerr << "  stage " << p.stage << " sweep " << p.sweep << " max dE " << p.max_energy_change << '\n';
    });
    const double t = clock.seconds();
    const auto fd = fock_darwin_lowest(120, B);
    double worst = 0.0;
    for (std::size_t i = 0; i < fd.size(); ++i) worst = std::max(worst, std::abs(s.energies[i] - fd[i]));
    const bool ok = worst < 5e-3 && t <= 900.0;
    o.pass = o.pass && ok;
    o.detail += "B=" + num(B) + ": max|E-E_FD| " + num(worst, 3) + ", " + num(t, 3) + " s, " +
                std::to_string(s.sweeps) + " sweeps" + (s.all_converged ? "" : " (not all converged)") + "; ";
  }
  return o;
}

// --- 2: resonance table ------------------------------------------------------

Outcome resonance_table(const Context&) {
  const Stopwatch clock;
  double worst = 0.0;
  int count = 0;
  for (int vt = 1; vt <= 10; ++vt) {
    for (int vr = vt + 1; vr <= 10 * vt; ++vr) {
      if (std::gcd(vt, vr) != 1) continue;
      const double B = resonance_field({vt, vr});
      worst = std::max(worst, std::abs(delta_phi(1, 1.0, B) * vr - 2 * pi * vt));
      ++count;
    }
  }
  const double b13 = resonance_field({1, 3});
  const double t = clock.seconds();
  const bool ok = worst < 1e-10 && std::abs(b13 - 0.70711) < 5e-6 && t < 1.0;
  return {ok, std::to_string(count) + " resonances, max closure error " + num(worst, 3) + ", (1,3) -> " +
                  num(b13, 6) + ", " + num(t, 3) + " s"};
}

// --- 3: unperturbed dynamics -------------------------------------------------

// Times where the radial velocity x vx + y vy turns from + to - (apocenters),
// refined by bisection on re-integrated partial steps.
std::vector<double> apocenter_times(const Trajectory& tr, const ClassicalIntegrator& integ) {
  auto radial = [](const ClassicalState& s) { return s.x * s.vx + s.y * s.vy; };
  std::vector<double> out;
  for (std::size_t k = 1; k < tr.samples.size(); ++k) {
    const auto& a = tr.samples[k - 1];
    if (!(radial(a.state) > 0.0 && radial(tr.samples[k].state) <= 0.0)) continue;
    double lo = 0.0, hi = tr.samples[k].t - a.t;
    for (int it = 0; it < 60 && hi - lo > 1e-15; ++it) {
      const double mid = 0.5 * (lo + hi);
      ClassicalState s = a.state;
      integ.step(s, mid, tr.order);
      (radial(s) > 0.0 ? lo : hi) = mid;
    }
    out.push_back(a.t + 0.5 * (lo + hi));
  }
  return out;
}

Outcome appendix_dynamics(const Context&) {
  const Stopwatch clock;
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  double worst_pos = 0.0, worst_period = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const double E = 1.0 + 59.0 * U(rng);
    const double B = 2.0 * U(rng);
    const double wt = effective_frequency(1.0, B);
    // E + p B / 2 >= wt |p|; the ends are circular orbits.
    const double p_hi = E / (wt - 0.5 * B), p_lo = -E / (wt + 0.5 * B);
    const double p_phi = 0.95 * (p_lo + (p_hi - p_lo) * U(rng));
    const OrbitParams op = orbit_params(E, p_phi, 1.0, B);
    const ClassicalSystem sys{1.0, B, {}};
    TrajectoryOptions opt;
    opt.dt = 2e-3 / wt;
    opt.duration = 10 * pi / wt;
    const Trajectory tr = integrate_trajectory(initial_state(op), sys, opt);
    for (const auto& smp : tr.samples) {
      const PolarPoint ref = analytic_orbit(op, smp.t);
      const ClassicalState& s = smp.state;
      const double dr = std::abs(std::hypot(s.x, s.y) - ref.r);
      const double dphi = std::abs(std::remainder(std::atan2(s.y, s.x) - ref.phi, 2 * pi));
      worst_pos = std::max({worst_pos, dr, dphi});
    }
    const auto apo = apocenter_times(tr, ClassicalIntegrator(sys));
    if (apo.size() < 2) return {false, "fewer than two apocenters at E=" + num(E) + ", B=" + num(B)};
    const double period = (apo.back() - apo.front()) / static_cast<double>(apo.size() - 1);
    worst_period = std::max(worst_period, std::abs(period - pi / wt));
  }
  const double t = clock.seconds();
  const bool ok = worst_pos < 1e-6 && worst_period < 1e-8 && t < 60.0;
  return {ok, "50 orbits: max |dr|,|dphi| " + num(worst_pos, 3) + ", max period error " + num(worst_period, 3) +
                  ", " + num(t, 3) + " s"};
}

// --- 4: energy conservation with bumps ---------------------------------------

Outcome bump_dynamics(const Context& ctx) {
  const fs::path dir = fresh(ctx.work / "c4");
  write_file(dir / "c.toml",
             "seed = 4\n[system]\nresonance = [1, 3]\n[bumps]\nkind = \"random\"\namplitude = 4.0\n"
             "fwhm = 0.235\ndensity = 2.0\n[classical]\ntrajectories = 20\nduration = 1000.0\n");
  const std::string cfg = (dir / "c.toml").string();
  const Stopwatch clock;
  if (scarlab({"classical", "--config", cfg, "--out", dir.string()}) != 0) return {false, "classical run failed"};
  if (scarlab({"poincare", "--config", cfg, "--out", dir.string()}) != 0) return {false, "poincare run failed"};
  const double t = clock.seconds();
  const CsvTable e = read_csv(dir / "classical_energy.csv");
  double worst = 0.0;
  for (std::size_t i = 0; i < e.rows.size(); ++i) worst = std::max(worst, e.number(i, "max_relative_drift"));
  const CsvTable p = read_csv(dir / "poincare.csv");
  std::vector<bool> seen(e.rows.size(), false);
  for (std::size_t i = 0; i < p.rows.size(); ++i) {
    const auto k = static_cast<std::size_t>(p.number(i, "trajectory"));
    if (k < seen.size()) seen[k] = true;
  }
  const auto sections = std::count(seen.begin(), seen.end(), true);
  const bool ok = e.rows.size() == 20 && worst < 1e-6 && sections == 20 && t < 300.0;
  return {ok, std::to_string(e.rows.size()) + " trajectories, max |dE/E| " + num(worst, 3) + ", " +
                  std::to_string(sections) + " sections (" + std::to_string(p.rows.size()) + " points), " +
                  num(t, 3) + " s"};
}

// --- 5: scarring at desk scale -------------------------------------------------

const char* c5_common =
    "seed = 1\n[system]\nresonance = [1, 3]\n[grid]\nn = 256\n[solver]\nn_states = 300\n"
    "[scars]\nresonance = [1, 3]\nthreshold = 2.0\nfirst_state = 200\nlast_state = 300\n";

struct RunResult {
  bool ok = false;
  double seconds = 0.0;
  std::string why;
};

RunResult solve_and_census(const fs::path& dir, const std::string& config_text) {
  fresh(dir);
  write_file(dir / "c.toml", config_text);
  const std::string cfg = (dir / "c.toml").string();
  const Stopwatch clock;
  RunResult r;
  const int code = scarlab({"solve", "--config", cfg, "--out", dir.string()});
  if (code == 1) {
    r.why = "solve failed";
    return r;
  }
  if (code == 2) r.why = "not all states converged; ";
  if (scarlab({"scars", "--config", cfg, "--out", dir.string()}) != 0) {
    r.why += "scar census failed";
    return r;
  }
  r.ok = true;
  r.seconds = clock.seconds();
  return r;
}

fs::path c5_dir(const Context& ctx, const char* which) { return ctx.work / "c5" / which; }

const char* c5_perturbed_bumps = "[bumps]\nkind = \"random\"\namplitude = 4.0\nfwhm = 0.235\ndensity = 2.0\n";

Outcome desk_scarring(const Context& ctx) {
  const RunResult p = solve_and_census(c5_dir(ctx, "perturbed"), std::string(c5_common) + c5_perturbed_bumps);
  if (!p.ok) return {false, "perturbed: " + p.why};
  const RunResult u = solve_and_census(c5_dir(ctx, "unperturbed"), std::string(c5_common) + "[bumps]\nkind = \"none\"\n");
  if (!u.ok) return {false, "unperturbed: " + u.why};
  const double fp = meta_number(read_csv(c5_dir(ctx, "perturbed") / "scars.csv"), "fraction");
  const double fu = meta_number(read_csv(c5_dir(ctx, "unperturbed") / "scars.csv"), "fraction");
  const bool ok = fp >= 0.10 && fu < fp && p.seconds <= 7200.0;
  return {ok, "scarred fraction of states 200-299: perturbed " + num(fp) + ", unperturbed " + num(fu) +
                  "; perturbed " + p.why + num(p.seconds, 4) + " s, unperturbed " + u.why + num(u.seconds, 4) + " s"};
}

// --- 6: pinning ----------------------------------------------------------------

Outcome pinning(const Context& ctx) {
  // Bump placed before any solve: on the x axis at the mid radius (a + b) / 2
  // of the canonical (1,3) orbit at the middle energy of the scored window.
  const double B = resonance_field({1, 3});
  const double E_mid = fock_darwin_lowest(251, B).back();
  const OrbitParams op = orbit_params(E_mid, choose_p_phi_for_resonance({1, 3}, E_mid, 1), 1.0, B);
  const double r_bump = 0.5 * (op.a + op.b);
  std::ostringstream text;
  text.precision(17);
  text << c5_common << "[bumps]\nkind = \"single\"\namplitude = 4.0\nfwhm = 0.235\nposition = [" << r_bump
       << ", 0.0]\n[pinning]\ntheta_points = 360\nprominence = 0.2\n";
  const fs::path dir = ctx.work / "c6";
  const RunResult r = solve_and_census(dir, text.str());
  if (!r.ok) return {false, r.why};
  const std::string cfg = (dir / "c.toml").string();
  if (scarlab({"pinning", "--config", cfg, "--out", dir.string()}) != 0) {
    return {false, "no scarred state (score >= 2) passes within a tube width of the bump at r = " + num(r_bump)};
  }
  const double t = r.seconds;
  const CsvTable pc = read_csv(dir / "pinning.csv");
  const int maxima = static_cast<int>(meta_number(pc, "maxima"));
  const bool zero = pc.find_meta("theta0_at_maximum") == std::optional<std::string>("true");
  const double score = meta_number(pc, "score");
  const bool ok = score >= 2.0 && maxima == 3 && zero && t <= 3600.0;
  return {ok, "bump at r=" + num(r_bump) + "; state " + *pc.find_meta("state") + " score " + num(score) + ", " +
                  std::to_string(maxima) + " maxima, theta=0 at a maximum: " + (zero ? "yes" : "no") + "; " + r.why +
                  num(t, 4) + " s"};
}

// --- 7: DOS structure ----------------------------------------------------------

Outcome dos_structure(const Context& ctx) {
  const Stopwatch clock;
  const double window = 0.001, dB = 0.001, E_max = 60.0;
  std::vector<double> Bs, strength;
  for (int k = 0; k <= 2000; ++k) {
    const double B = k * dB;
    std::vector<double> E;
    for (const auto& l : fock_darwin_levels(E_max, B)) E.push_back(l.E);
    Bs.push_back(B);
    strength.push_back(clustering_strength(E, window));
  }
  // Ridge crossings show up as local maxima of the clustering strength in B.
  const auto peaks = prominent_maxima(strength, 0.02);
  auto near_peak = [&](double B) {
    for (int p : peaks) {
      if (std::abs(Bs[static_cast<std::size_t>(p)] - B) <= dB) return true;
    }
    return false;
  };
  const double b13 = resonance_field({1, 3}), b14 = resonance_field({1, 4});
  const bool analytic = near_peak(b13) && near_peak(b14);
  const double t_analytic = clock.seconds();

  // Numeric half: the perturbed desk-scale spectrum of criterion 5.
  const fs::path wf = c5_dir(ctx, "perturbed") / "spectrum.wf2d";
  std::string numeric = "no criterion 5 spectrum at " + wf.string();
  bool clustered = false;
  if (fs::exists(wf)) {
    const Wf2dFile f = read_wf2d(wf);
    const ClusterStats st = fd_cluster_statistics(f.energies, f.params.B, 0, static_cast<int>(f.energies.size()));
    clustered = st.pooled_std < st.cluster_spacing / 10;
    numeric = "perturbed within-cluster std " + num(st.pooled_std, 3) + " vs spacing/10 " +
              num(st.cluster_spacing / 10, 3) + " over " + std::to_string(st.clusters) + " clusters";
  }
  const bool ok = analytic && clustered && t_analytic < 600.0;
  return {ok, std::to_string(peaks.size()) + " clustering peaks in B; (1,3) at " + num(b13, 6) + ": " +
                  (near_peak(b13) ? "ridge" : "none") + ", (1,4) at " + num(b14, 6) + ": " +
                  (near_peak(b14) ? "ridge" : "none") + ", " + num(t_analytic, 3) + " s; " + numeric};
}

// --- 8: property suites --------------------------------------------------------

Outcome property_suites(const Context& ctx) {
  if (ctx.unit_tests.empty()) return {false, "no --unit-tests binary given"};
  const Stopwatch clock;
  const std::string cmd = "\"" + ctx.unit_tests + "\" --no-intro=true 1>&2";
  const int code = std::system(cmd.c_str());
  const double t = clock.seconds();
  return {code == 0 && t < 600.0, std::string(code == 0 ? "unit suite passed" : "unit suite failed") + ", " +
                                      num(t, 3) + " s"};
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  Context ctx;
  ctx.work = fs::temp_directory_path() / "scarlab_acceptance";
  int criterion = 0;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--work" && i + 1 < args.size()) {
      ctx.work = args[++i];
    } else if (args[i] == "--unit-tests" && i + 1 < args.size()) {
      ctx.unit_tests = args[++i];
    } else {
      criterion = std::atoi(args[i].c_str());
    }
  }
  const std::map<int, std::pair<const char*, std::function<Outcome(const Context&)>>> table{
      {1, {"Fock-Darwin oracle", fock_darwin_oracle}},
      {2, {"resonance table", resonance_table}},
      {3, {"unperturbed dynamics", appendix_dynamics}},
      {4, {"energy conservation with bumps", bump_dynamics}},
      {5, {"scarring at desk scale", desk_scarring}},
      {6, {"pinning", pinning}},
      {7, {"DOS structure", dos_structure}},
      {8, {"property suites", property_suites}},
  };
  const auto it = table.find(criterion);
  if (it == table.end()) {
    std::cerr << "usage: acceptance <1..8> [--work DIR] [--unit-tests PATH]\n";
    return 2;
  }
  Outcome o;
  try {
    fs::create_directories(ctx.work);
    o = it->second.second(ctx);
  } catch (const std::exception& e) {
    o = {false, std::string("error: ") + e.what()};
  }
  std::ostringstream line;
  line << "criterion " << criterion << " (" << it->second.first << "): " << (o.pass ? "PASS" : "FAIL") << " | "
       << o.detail;
  std::cout << line.str() << std::endl;
  // ctest hides passing output; keep every verdict in one place.
  std::ofstream(ctx.work / "summary.txt", std::ios::app) << line.str() << '\n';
  return o.pass ? 0 : 1;
}
