#include "scarlab/grid.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include "scarlab/fft.hpp"

namespace scarlab {
namespace {

void check_shape(int nx, int ny) {
  if (nx < 16 || ny < 16) {
    throw std::invalid_argument("grid needs at least 16 samples per axis, got " +
                                std::to_string(nx) + "x" + std::to_string(ny));
  }
}

void require_same_grid(const Grid2D& a, const Grid2D& b, const char* what) {
  if (!(a == b)) throw std::invalid_argument(std::string(what) + ": grid mismatch");
}

}  // namespace

Grid2D make_grid(int nx, int ny, double half_extent) {
  return make_grid(nx, ny, half_extent, half_extent);
}

Grid2D make_grid(int nx, int ny, double x_max, double y_max) {
  check_shape(nx, ny);
  if (!(x_max > 0.0) || !(y_max > 0.0) || !std::isfinite(x_max) || !std::isfinite(y_max)) {
    throw std::invalid_argument("grid extent must be positive and finite");
  }
  Grid2D g;
  g.nx = nx;
  g.ny = ny;
  g.x_min = -x_max;
  g.x_max = x_max;
  g.y_min = -y_max;
  g.y_max = y_max;
  g.dx = 2.0 * x_max / nx;
  g.dy = 2.0 * y_max / ny;
  return g;
}

Grid2D grid_from_bounds(int nx, int ny, double x_min, double x_max, double y_min,
                        double y_max) {
  if (x_min != -x_max || y_min != -y_max) {
    throw std::invalid_argument("grid bounds must be centered on the origin");
  }
  return make_grid(nx, ny, x_max, y_max);
}

WaveField::WaveField(const Grid2D& g, std::vector<cplx> v) : grid(g), values(std::move(v)) {
  if (values.size() != grid.size()) throw std::invalid_argument("WaveField: length != nx*ny");
}

RealField::RealField(const Grid2D& g, std::vector<double> v) : grid(g), values(std::move(v)) {
  if (values.size() != grid.size()) throw std::invalid_argument("RealField: length != nx*ny");
}

cplx inner_product(std::span<const cplx> f, std::span<const cplx> g, double cell_area) {
  if (f.size() != g.size()) throw std::invalid_argument("inner_product: length mismatch");
  // Split accumulators let the compiler vectorize without reassociating one sum.
  double re = 0.0;
  double im = 0.0;
  for (std::size_t n = 0; n < f.size(); ++n) {
    const double ar = f[n].real(), ai = f[n].imag();
    const double br = g[n].real(), bi = g[n].imag();
    re += ar * br + ai * bi;
    im += ar * bi - ai * br;
  }
  return {re * cell_area, im * cell_area};
}

cplx inner_product(const WaveField& f, const WaveField& g) {
  require_same_grid(f.grid, g.grid, "inner_product");
  return inner_product(std::span<const cplx>(f.values), std::span<const cplx>(g.values),
                       f.grid.cell_area());
}

double norm(const WaveField& f) { return std::sqrt(inner_product(f, f).real()); }

WaveField normalize(WaveField f) {
  const double n = norm(f);
  if (!(n > 0.0) || !std::isfinite(n)) throw std::invalid_argument("normalize: zero or non-finite field");
  const double s = 1.0 / n;
  for (auto& v : f.values) v *= s;
  return f;
}

double expectation(const WaveField& f, const RealField& potential) {
  require_same_grid(f.grid, potential.grid, "expectation");
  double acc = 0.0;
  for (std::size_t n = 0; n < f.values.size(); ++n) acc += std::norm(f.values[n]) * potential.values[n];
  return acc * f.grid.cell_area();
}

WaveField spectral_transform(const WaveField& f, TransformDirection direction) {
  const Grid2D& g = f.grid;
  WaveField out = f;
  auto fft = AxisFft::get(g.nx, g.ny);
  if (direction == TransformDirection::forward) {
    fft->full(out.values, -1);
    const double w = g.cell_area();
    for (auto& v : out.values) v *= w;
  } else {
    fft->full(out.values, +1);
    // dkx dky / (2 pi)^2 = 1 / (nx dx ny dy)
    const double w = 1.0 / (static_cast<double>(g.size()) * g.cell_area());
    for (auto& v : out.values) v *= w;
  }
  return out;
}

std::vector<double> wavenumbers(int n, double spacing) {
  std::vector<double> k(static_cast<std::size_t>(n));
  const double dk = 2.0 * std::numbers::pi / (n * spacing);
  for (int m = 0; m < n; ++m) {
    const int s = (m <= (n - 1) / 2) ? m : m - n;
    k[static_cast<std::size_t>(m)] = s * dk;
  }
  return k;
}

}  // namespace scarlab
