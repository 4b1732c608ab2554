#include <doctest.h>

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "scarlab/analysis.hpp"
#include "scarlab/eigensolver.hpp"

using namespace scarlab;

namespace {

WaveField random_field(const Grid2D& g, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n;
  WaveField f(g);
  for (auto& v : f.values) v = {n(rng), n(rng)};
  return f;
}

// Smooth, localized random field: a few Gaussian packets with random momenta.
WaveField smooth_field(const Grid2D& g, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  WaveField f(g);
  for (int p = 0; p < 4; ++p) {
    const double x0 = 2 * u(rng), y0 = 2 * u(rng), kx = 2 * u(rng), ky = 2 * u(rng);
    const cplx amp{u(rng), u(rng)};
    for (int j = 0; j < g.ny; ++j) {
      for (int i = 0; i < g.nx; ++i) {
        const double dx = g.x(i) - x0, dy = g.y(j) - y0;
        f(i, j) += amp * std::exp(-0.5 * (dx * dx + dy * dy)) * std::polar(1.0, kx * g.x(i) + ky * g.y(j));
      }
    }
  }
  return f;
}

double distance(const WaveField& a, const WaveField& b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.values.size(); ++k) s += std::norm(a.values[k] - b.values[k]);
  return std::sqrt(s * a.grid.cell_area());
}

std::vector<double> fd_energies(int n, double B) { return fock_darwin_lowest(n, B); }

// Dense Hamiltonian with 8th-order central differences and Peierls phases
// (exact along straight lines in the symmetric gauge), zero boundary values.
Eigen::MatrixXcd dense_hamiltonian(const Grid2D& g, double B, const RealField& v) {
  static const double c[5] = {-205.0 / 72, 8.0 / 5, -1.0 / 5, 8.0 / 315, -1.0 / 560};
  const int N = static_cast<int>(g.size());
  Eigen::MatrixXcd H = Eigen::MatrixXcd::Zero(N, N);
  for (int j = 0; j < g.ny; ++j) {
    for (int i = 0; i < g.nx; ++i) {
      const int row = static_cast<int>(g.index(i, j));
      const double ax = -0.5 * B * g.y(j);
      const double ay = 0.5 * B * g.x(i);
      H(row, row) += -0.5 * c[0] * (1 / (g.dx * g.dx) + 1 / (g.dy * g.dy)) + v(i, j) +
                     0.5 * (g.x(i) * g.x(i) + g.y(j) * g.y(j));
      for (int n = 1; n <= 4; ++n) {
        for (int s : {-1, 1}) {
          const int ii = i + s * n;
          if (ii >= 0 && ii < g.nx) {
            H(row, static_cast<int>(g.index(ii, j))) +=
                -0.5 * c[n] / (g.dx * g.dx) * std::polar(1.0, -ax * s * n * g.dx);
          }
          const int jj = j + s * n;
          if (jj >= 0 && jj < g.ny) {
            H(row, static_cast<int>(g.index(i, jj))) +=
                -0.5 * c[n] / (g.dy * g.dy) * std::polar(1.0, -ay * s * n * g.dy);
          }
        }
      }
    }
  }
  return H;
}

}  // namespace

TEST_CASE("Hamiltonian is Hermitian") {
  const Grid2D g = make_grid(48, 40, 5.0, 4.0);
  const BumpSet bumps = sample_bumps(1, 2.0, 4.0, 4.0, 0.2);
  const Hamiltonian H(g, {1.0, 0.8}, bumps);
  for (std::uint64_t s = 0; s < 4; ++s) {
    const WaveField f = random_field(g, s);
    const WaveField h = random_field(g, s + 100);
    const cplx fHh = inner_product(f, H.apply(h));
    const cplx hHf = inner_product(h, H.apply(f));
    CHECK(std::abs(fHh - std::conj(hHf)) < 1e-10 * std::abs(fHh));
    CHECK(std::abs(inner_product(f, H.apply(f)).imag()) < 1e-10 * std::abs(inner_product(f, H.apply(f))));
  }
}

TEST_CASE("ground Gaussian and FD state are eigenfunctions") {
  const Grid2D g = make_grid(64, 64, 8.0);
  const RealField zero(g);
  WaveField gauss(g);
  for (int j = 0; j < g.ny; ++j) {
    for (int i = 0; i < g.nx; ++i) gauss(i, j) = std::exp(-0.5 * (g.x(i) * g.x(i) + g.y(j) * g.y(j)));
  }
  gauss = normalize(gauss);
  const WaveField h = apply_hamiltonian(gauss, {1.0, 0.0}, zero);
  double worst = 0.0;
  for (int j = 0; j < g.ny; ++j) {
    for (int i = 0; i < g.nx; ++i) {
      if (std::hypot(g.x(i), g.y(j)) < 5.0) worst = std::max(worst, std::abs(h(i, j) - gauss(i, j)));
    }
  }
  CHECK(worst < 1e-8);

  const WaveField fd = fock_darwin_state(g, 0, 1, 1.0);
  const double e = inner_product(fd, apply_hamiltonian(fd, {1.0, 1.0}, zero)).real();
  CHECK(std::abs(e - fock_darwin_energy(0, 1, 1.0)) < 1e-6);
}

TEST_CASE("kinetic propagator") {
  const Grid2D g = make_grid(64, 64, 8.0);
  SUBCASE("plane wave at B = 0") {
    const auto kx = wavenumbers(g.nx, g.dx);
    const auto ky = wavenumbers(g.ny, g.dy);
    WaveField w(g);
    for (int j = 0; j < g.ny; ++j) {
      for (int i = 0; i < g.nx; ++i) w(i, j) = std::polar(1.0, kx[3] * (g.x(i) - g.x_min) + ky[5] * (g.y(j) - g.y_min));
    }
    const double eps = 0.37;
    const WaveField out = kinetic_propagator(w, eps, 0.0);
    const double f = std::exp(-0.5 * eps * (kx[3] * kx[3] + ky[5] * ky[5]));
    double worst = 0.0;
    for (std::size_t k = 0; k < w.values.size(); ++k) worst = std::max(worst, std::abs(out.values[k] - f * w.values[k]));
    CHECK(worst < 1e-12);
  }
  SUBCASE("semigroup") {
    const Grid2D wide = make_grid(96, 96, 11.0);
    for (double B : {0.0, 0.7, -1.2}) {
      const WaveField f = smooth_field(wide, 3);
      const WaveField a = kinetic_propagator(kinetic_propagator(f, 0.03, B), 0.05, B);
      const WaveField b = kinetic_propagator(f, 0.08, B);
      CHECK(distance(a, b) < 1e-10 * norm(f));
    }
  }
  SUBCASE("small eps limit") {
    const double B = 0.6;
    const WaveField f = smooth_field(g, 5);
    const MagneticKinetic T(g, B);
    WaveField tf(g);
    std::vector<cplx> scratch(g.size());
    T.apply(f.values, tf.values, scratch);
    for (double eps : {1e-3, 1e-4}) {
      const WaveField out = kinetic_propagator(f, eps, B);
      CHECK(distance(out, f) / eps <= norm(tf) * (1 + 10 * eps));
    }
  }
}

TEST_CASE("itp_sweep examples") {
  const Grid2D g = make_grid(48, 48, 6.0);
  const RealField zero(g);
  const ConfinementParams p{1.0, 0.0};

  SUBCASE("single state relaxes to the ground energy") {
    std::vector<WaveField> s{normalize(random_field(g, 1))};
    for (int k = 0; k < 400; ++k) s = itp_sweep(s, 0.05, p, zero);
    const double e = inner_product(s[0], apply_hamiltonian(s[0], p, zero)).real();
    CHECK(e == doctest::Approx(1.0).epsilon(1e-6));
  }
  SUBCASE("eigenstates are a fixed point") {
    std::vector<WaveField> s{fock_darwin_state(g, 0, 0, 0.0), fock_darwin_state(g, 1, 0, 0.0)};
    const auto next = itp_sweep(s, 0.01, p, zero);
    const auto r0 = subspace_diagonalize(s, p, zero);
    const auto r1 = subspace_diagonalize(next, p, zero);
    CHECK(std::abs(r0.energies[0] - r1.energies[0]) < 1e-10);
    CHECK(std::abs(r0.energies[1] - r1.energies[1]) < 1e-10);
    CHECK(std::abs(std::abs(inner_product(s[0], next[0])) - 1.0) < 1e-10);
  }
  SUBCASE("six states reach 1, 2, 2, 3, 3, 3") {
    std::vector<WaveField> s;
    for (std::uint64_t k = 0; k < 6; ++k) s.push_back(random_field(g, 10 + k));
    s = subspace_diagonalize(itp_sweep(s, 0.05, p, zero), p, zero).states;
    double prev_sum = 1e300;
    for (int k = 0; k < 300; ++k) {
      s = subspace_diagonalize(itp_sweep(s, 0.05, p, zero), p, zero).states;
      double sum = 0.0;
      for (const auto& f : s) sum += inner_product(f, apply_hamiltonian(f, p, zero)).real();
      CHECK(sum <= prev_sum + 1e-10);
      prev_sum = sum;
    }
    const auto r = subspace_diagonalize(s, p, zero);
    const double want[6] = {1, 2, 2, 3, 3, 3};
    for (int k = 0; k < 6; ++k) CHECK(std::abs(r.energies[k] - want[k]) < 5e-3);
    for (int a = 0; a < 6; ++a) {
      for (int b = 0; b < 6; ++b) {
        CHECK(std::abs(inner_product(r.states[a], r.states[b]) - cplx(a == b ? 1.0 : 0.0)) < 1e-8);
      }
    }
  }
}

TEST_CASE("subspace_diagonalize against a dense projection") {
  const Grid2D g = make_grid(40, 40, 5.0);
  const BumpSet bumps = sample_bumps(2, 1.0, 3.0, 2.0, 0.3);
  const RealField v = bump_field(g, bumps);
  const ConfinementParams p{1.0, 0.4};
  std::vector<WaveField> s;
  for (std::uint64_t k = 0; k < 10; ++k) s.push_back(smooth_field(g, 40 + k));
  // Orthonormalize by Gram-Schmidt.
  for (std::size_t a = 0; a < s.size(); ++a) {
    for (std::size_t b = 0; b < a; ++b) {
      const cplx c = inner_product(s[b], s[a]);
      for (std::size_t k = 0; k < g.size(); ++k) s[a].values[k] -= c * s[b].values[k];
    }
    s[a] = normalize(s[a]);
  }
  Eigen::MatrixXcd h(10, 10);
  for (int a = 0; a < 10; ++a) {
    const WaveField ha = apply_hamiltonian(s[a], p, v);
    for (int b = 0; b < 10; ++b) h(b, a) = inner_product(s[b], ha);
  }
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(0.5 * (h + h.adjoint()));
  const auto r = subspace_diagonalize(s, p, v);
  for (int k = 0; k < 10; ++k) CHECK(std::abs(r.energies[k] - es.eigenvalues()(k)) < 1e-10);

  // Same span: projector difference.
  Eigen::MatrixXcd overlap(10, 10);
  for (int a = 0; a < 10; ++a) {
    for (int b = 0; b < 10; ++b) overlap(a, b) = inner_product(s[a], r.states[b]);
  }
  // For equal spans the overlap matrix is unitary.
  CHECK((overlap.adjoint() * overlap - Eigen::MatrixXcd::Identity(10, 10)).norm() < 1e-8);

  SUBCASE("degenerate pair at B = 0") {
    const RealField zero(g);
    std::vector<WaveField> pair{fock_darwin_state(g, 0, 1, 0.0), fock_darwin_state(g, 0, -1, 0.0)};
    const cplx mix{0.6, 0.0};
    WaveField m0(g), m1(g);
    for (std::size_t k = 0; k < g.size(); ++k) {
      m0.values[k] = mix * pair[0].values[k] + cplx(0.0, 0.8) * pair[1].values[k];
      m1.values[k] = cplx(0.0, 0.8) * pair[0].values[k] + mix * pair[1].values[k];
    }
    const auto d = subspace_diagonalize({m0, m1}, {1.0, 0.0}, zero);
    CHECK(std::abs(d.energies[0] - 2.0) < 5e-3);
    CHECK(std::abs(d.energies[1] - 2.0) < 5e-3);
    CHECK(std::abs(inner_product(d.states[0], d.states[1])) < 1e-8);
  }
}

TEST_CASE("solve_eigenstates matches Fock-Darwin levels") {
  SUBCASE("B = 0, n = 20") {
    SolverConfig c;
    c.n_states = 20;
    c.grid = make_grid(64, 64, 7.0);
    c.params = {1.0, 0.0};
    c.seed = 1;
    const Spectrum s = solve_eigenstates(c);
    REQUIRE(s.all_converged);
    const auto want = fd_energies(20, 0.0);
    for (int k = 0; k < 20; ++k) CHECK(std::abs(s.energies[k] - want[k]) < 5e-3);
    for (int k = 0; k < 20; ++k) CHECK(s.residuals[k] < residual_bound(s.energies[k]));
    for (int a = 0; a < 20; ++a) {
      for (int b = 0; b < 20; ++b) {
        CHECK(std::abs(inner_product(s.states[a], s.states[b]) - cplx(a == b ? 1.0 : 0.0)) < 1e-8);
      }
    }
  }
  SUBCASE("B = 1/sqrt 2, n = 50, and the mirrored field") {
    SolverConfig c;
    c.n_states = 50;
    c.grid = make_grid(80, 80, 8.0);
    c.params = {1.0, 1 / std::sqrt(2.0)};
    c.seed = 2;
    const Spectrum s = solve_eigenstates(c);
    REQUIRE(s.all_converged);
    const auto want = fd_energies(50, c.params.B);
    for (int k = 0; k < 50; ++k) CHECK(std::abs(s.energies[k] - want[k]) < 5e-3);

    c.params.B = -c.params.B;
    const Spectrum m = solve_eigenstates(c);
    REQUIRE(m.all_converged);
    for (int k = 0; k < 50; ++k) CHECK(std::abs(m.energies[k] - s.energies[k]) < 5e-3);
  }
}

TEST_CASE("solve_eigenstates with bumps matches a dense oracle") {
  const Grid2D g = make_grid(32, 32, 5.0);
  const BumpSet bumps = sample_bumps(3, 2.0, 4.0, 4.0, fwhm_to_sigma(0.235));
  for (double B : {0.0, 1 / std::sqrt(2.0)}) {
    SolverConfig c;
    c.n_states = 8;
    c.grid = g;
    c.params = {1.0, B};
    c.bumps = bumps;
    c.seed = 4;
    const Spectrum s = solve_eigenstates(c);
    REQUIRE(s.all_converged);
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(dense_hamiltonian(g, B, bump_field(g, bumps)),
                                                              Eigen::EigenvaluesOnly);
    for (int k = 0; k < 8; ++k) {
      CHECK(std::abs(s.energies[k] - es.eigenvalues()(k)) < 0.02 * std::abs(es.eigenvalues()(k)));
    }
  }
}

TEST_CASE("first-order perturbation shift of a weak bump") {
  const Grid2D g = make_grid(64, 64, 7.0);
  const BumpSet weak = single_bump({0.6, 0.3}, 0.01, 0.5, 7.0);
  SolverConfig c;
  c.n_states = 1;
  c.grid = g;
  c.params = {1.0, 0.5};
  c.bumps = weak;
  c.seed = 7;
  c.convergence_tol = 1e-9;
  const Spectrum s = solve_eigenstates(c);
  REQUIRE(s.all_converged);
  const WaveField psi0 = fock_darwin_state(g, 0, 0, 0.5);
  const double shift = expectation(psi0, bump_field(g, weak));
  const double solved = s.energies[0] - fock_darwin_energy(0, 0, 0.5);
  CHECK(std::abs(solved - shift) < 0.05 * shift);
}

TEST_CASE("thread count does not change results") {
  SolverConfig c;
  c.n_states = 12;
  c.grid = make_grid(48, 48, 6.0);
  c.params = {1.0, 0.5};
  c.bumps = sample_bumps(5, 1.0, 5.0, 4.0, 0.2);
  c.seed = 3;
  c.threads = 1;
  const Spectrum a = solve_eigenstates(c);
  c.threads = 2;
  const Spectrum b = solve_eigenstates(c);
  REQUIRE(a.energies.size() == b.energies.size());
  for (std::size_t k = 0; k < a.energies.size(); ++k) CHECK(std::abs(a.energies[k] - b.energies[k]) < 1e-8);
}

TEST_CASE("solver reports non-convergence") {
  SolverConfig c;
  c.n_states = 10;
  c.grid = make_grid(48, 48, 6.0);
  c.params = {1.0, 0.0};
  c.seed = 1;
  c.max_sweeps = 3;
  const Spectrum s = solve_eigenstates(c);
  CHECK_FALSE(s.all_converged);
  CHECK(std::count(s.converged.begin(), s.converged.end(), false) > 0);
}

TEST_CASE("solver input validation") {
  SolverConfig c;
  c.n_states = 0;
  c.grid = make_grid(32, 32, 5.0);
  CHECK_THROWS_AS(solve_eigenstates(c), std::invalid_argument);
  c.n_states = 2000;
  CHECK_THROWS_AS(solve_eigenstates(c), std::invalid_argument);
  CHECK(default_epsilon_schedule().front() == 0.1);
  CHECK(default_epsilon_schedule().back() >= 1e-4);
  CHECK(default_epsilon_schedule().size() == 10);
}
