#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace scarlab {

using cplx = std::complex<double>;

/// Uniform, origin-centered rectangular lattice. Sample (i, j) sits at
/// (x_min + i*dx, y_min + j*dy); storage is row-major with x fastest.
struct Grid2D {
  int nx = 0;
  int ny = 0;
  double x_min = 0.0;
  double x_max = 0.0;
  double y_min = 0.0;
  double y_max = 0.0;
  double dx = 0.0;
  double dy = 0.0;

  [[nodiscard]] double x(int i) const { return x_min + i * dx; }
  [[nodiscard]] double y(int j) const { return y_min + j * dy; }
  [[nodiscard]] std::size_t size() const {
    return static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny);
  }
  [[nodiscard]] std::size_t index(int i, int j) const {
    return static_cast<std::size_t>(j) * static_cast<std::size_t>(nx) +
           static_cast<std::size_t>(i);
  }
  [[nodiscard]] double cell_area() const { return dx * dy; }
  [[nodiscard]] double area() const { return (x_max - x_min) * (y_max - y_min); }

  bool operator==(const Grid2D&) const = default;
};

/// Square-cell centered grid with x_max = y_max = half_extent.
Grid2D make_grid(int nx, int ny, double half_extent);

/// Centered grid with independent extents; validates every Grid2D invariant.
Grid2D make_grid(int nx, int ny, double x_max, double y_max);

/// Rebuilds a grid from stored bounds (e.g. a WF2D header) and validates it.
Grid2D grid_from_bounds(int nx, int ny, double x_min, double x_max, double y_min,
                        double y_max);

struct WaveField {
  Grid2D grid;
  std::vector<cplx> values;

  WaveField() = default;
  explicit WaveField(const Grid2D& g) : grid(g), values(g.size()) {}
  WaveField(const Grid2D& g, std::vector<cplx> v);

  cplx& operator()(int i, int j) { return values[grid.index(i, j)]; }
  const cplx& operator()(int i, int j) const { return values[grid.index(i, j)]; }
};

struct RealField {
  Grid2D grid;
  std::vector<double> values;

  RealField() = default;
  explicit RealField(const Grid2D& g) : grid(g), values(g.size()) {}
  RealField(const Grid2D& g, std::vector<double> v);

  double& operator()(int i, int j) { return values[grid.index(i, j)]; }
  const double& operator()(int i, int j) const { return values[grid.index(i, j)]; }
};

/// sum conj(f) g dx dy
cplx inner_product(const WaveField& f, const WaveField& g);
cplx inner_product(std::span<const cplx> f, std::span<const cplx> g, double cell_area);

double norm(const WaveField& f);

/// Returns f / ||f||. Throws std::invalid_argument for a zero field.
WaveField normalize(WaveField f);

/// <f| V |f> for a real multiplicative potential.
double expectation(const WaveField& f, const RealField& potential);

enum class TransformDirection { forward, inverse };

/// Continuum-normalized 2D Fourier transform on the grid:
///   forward: F(k) = sum_r f(r) exp(-i k.r) dx dy   (phase referenced to x_min, y_min)
///   inverse: f(r) = sum_k F(k) exp(+i k.r) dkx dky / (2 pi)^2
/// Coefficients are stored in FFT order on a field that reuses the input grid
/// for its shape; wavenumbers() gives the matching k values.
WaveField spectral_transform(const WaveField& f, TransformDirection direction);

/// Angular wavenumbers in FFT order for n samples with spacing d.
std::vector<double> wavenumbers(int n, double spacing);

}  // namespace scarlab
