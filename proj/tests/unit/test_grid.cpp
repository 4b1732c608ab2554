#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "scarlab/grid.hpp"

using namespace scarlab;

namespace {

WaveField random_field(const Grid2D& g, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n;
  WaveField f(g);
  for (auto& v : f.values) v = {n(rng), n(rng)};
  return f;
}

}  // namespace

TEST_CASE("make_grid geometry") {
  const Grid2D g = make_grid(64, 32, 4.0, 2.0);
  CHECK(g.dx == doctest::Approx(0.125));
  CHECK(g.dy == doctest::Approx(0.125));
  CHECK(g.x(0) == -4.0);
  CHECK(g.x(32) == doctest::Approx(0.0));
  CHECK(g.y(16) == doctest::Approx(0.0));
  CHECK(g.area() == doctest::Approx(32.0));
  CHECK(g.index(3, 2) == 2u * 64u + 3u);
  CHECK_THROWS_AS(make_grid(8, 64, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(make_grid(64, 64, -1.0), std::invalid_argument);
  CHECK_THROWS_AS(grid_from_bounds(32, 32, -1.0, 2.0, -1.0, 1.0), std::invalid_argument);
  CHECK(grid_from_bounds(32, 32, -3.0, 3.0, -2.0, 2.0) == make_grid(32, 32, 3.0, 2.0));
}

TEST_CASE("inner product is sesquilinear and normalize gives unit norm") {
  const Grid2D g = make_grid(32, 32, 3.0);
  const WaveField f = random_field(g, 1);
  const WaveField h = random_field(g, 2);
  const cplx a = inner_product(f, h);
  const cplx b = inner_product(h, f);
  CHECK(std::abs(a - std::conj(b)) < 1e-12 * std::abs(a));
  WaveField f2 = f;
  for (auto& v : f2.values) v *= cplx(0.0, 2.0);
  CHECK(std::abs(inner_product(f2, h) - cplx(0.0, -2.0) * a) < 1e-10 * std::abs(a));
  CHECK(norm(normalize(f)) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK_THROWS_AS(normalize(WaveField(g)), std::invalid_argument);
  CHECK_THROWS_AS(inner_product(f, WaveField(make_grid(32, 32, 4.0))), std::invalid_argument);
}

TEST_CASE("spectral transform round trip and Parseval") {
  const Grid2D g = make_grid(48, 32, 5.0, 3.0);
  const WaveField f = random_field(g, 3);
  const WaveField F = spectral_transform(f, TransformDirection::forward);
  const WaveField back = spectral_transform(F, TransformDirection::inverse);
  double err = 0.0;
  for (std::size_t n = 0; n < f.values.size(); ++n) err = std::max(err, std::abs(back.values[n] - f.values[n]));
  CHECK(err < 1e-12);
  // sum |F|^2 dkx dky / (2 pi)^2 == sum |f|^2 dx dy
  const double dkx = 2.0 * std::numbers::pi / (g.nx * g.dx);
  const double dky = 2.0 * std::numbers::pi / (g.ny * g.dy);
  double pk = 0.0;
  for (const auto& v : F.values) pk += std::norm(v);
  pk *= dkx * dky / (4.0 * std::numbers::pi * std::numbers::pi);
  CHECK(pk == doctest::Approx(norm(f) * norm(f)).epsilon(1e-12));
}

TEST_CASE("spectral transform of a Gaussian matches the continuum transform") {
  const Grid2D g = make_grid(64, 64, 8.0);
  WaveField f(g);
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i) f(i, j) = std::exp(-0.5 * (g.x(i) * g.x(i) + g.y(j) * g.y(j)));
  const WaveField F = spectral_transform(f, TransformDirection::forward);
  const auto kx = wavenumbers(g.nx, g.dx);
  const auto ky = wavenumbers(g.ny, g.dy);
  double err = 0.0;
  for (int j = 0; j < g.ny; ++j) {
    for (int i = 0; i < g.nx; ++i) {
      // 2 pi exp(-k^2 / 2); the sum runs over r - r_min
      const double k2 = kx[i] * kx[i] + ky[j] * ky[j];
      const cplx expect = 2.0 * std::numbers::pi * std::exp(-0.5 * k2) *
                          std::polar(1.0, kx[i] * g.x_min + ky[j] * g.y_min);
      err = std::max(err, std::abs(F(i, j) - expect));
    }
  }
  CHECK(err < 1e-10);
}

TEST_CASE("wavenumbers in FFT order") {
  const auto k = wavenumbers(8, 0.5);
  const double dk = 2.0 * std::numbers::pi / 4.0;
  CHECK(k[0] == 0.0);
  CHECK(k[1] == doctest::Approx(dk));
  CHECK(k[3] == doctest::Approx(3 * dk));
  CHECK(std::abs(k[4]) == doctest::Approx(4 * dk));
  CHECK(k[7] == doctest::Approx(-dk));
}

TEST_CASE("expectation of a potential") {
  const Grid2D g = make_grid(32, 32, 4.0);
  WaveField f(g);
  RealField v(g);
  for (auto& x : f.values) x = 1.0;
  for (auto& x : v.values) x = 2.5;
  CHECK(expectation(f, v) == doctest::Approx(2.5 * g.area()));
}
