#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "scarlab/grid.hpp"

namespace scarlab {

struct ConfinementParams {
  double omega0 = 1.0;
  double B = 0.0;  // perpendicular field, signed
};

void validate(const ConfinementParams& params);

struct Point2 {
  double x = 0.0;
  double y = 0.0;
  bool operator==(const Point2&) const = default;
};

/// Identical Gaussian bumps M exp(-|r - r_i|^2 / (2 sigma^2)).
/// `region` is the half-width of the centered square the positions were placed in.
struct BumpSet {
  std::vector<Point2> positions;
  double amplitude = 0.0;
  double sigma = 1.0;
  double region = 0.0;
  std::optional<std::uint64_t> seed;

  [[nodiscard]] bool empty() const { return positions.empty(); }
  bool operator==(const BumpSet&) const = default;
};

void validate(const BumpSet& bumps);

/// 1/2 omega0^2 (x^2 + y^2) at every sample.
RealField harmonic_field(const Grid2D& grid, const ConfinementParams& params);

/// FWHM -> sigma for a Gaussian, fwhm / (2 sqrt(2 ln 2)).
double fwhm_to_sigma(double fwhm);

/// round(density * (2 region)^2) positions, each uniform on [-region, region)^2.
/// The stream is mt19937_64(seed), with doubles built from the top 53 bits,
/// x then y per bump; the output is reproducible on every platform.
BumpSet sample_bumps(std::uint64_t seed, double density, double region, double amplitude,
                     double sigma);

BumpSet single_bump(Point2 position, double amplitude, double sigma, double region);

/// Full sum over bumps (no cutoff).
RealField bump_field(const Grid2D& grid, const BumpSet& bumps);

/// Direct pointwise sum, used off-grid.
double bump_potential(const BumpSet& bumps, double x, double y);

/// Rigid rotation of every position by theta about the origin.
BumpSet rotate_bumps(const BumpSet& bumps, double theta);

/// harmonic_field + bump_field.
RealField total_potential(const Grid2D& grid, const ConfinementParams& params,
                          const BumpSet& bumps);

/// Cell-list lookup for evaluating V_imp and its gradient at arbitrary points.
/// Contributions beyond `cutoff_sigmas` * sigma (default 9, i.e. below
/// exp(-40) relative) are dropped.
class BumpLookup {
 public:
  explicit BumpLookup(const BumpSet& bumps, double cutoff_sigmas = 9.0);

  [[nodiscard]] double value(double x, double y) const;
  /// Value and gradient (dV/dx, dV/dy).
  void value_and_gradient(double x, double y, double& v, double& gx, double& gy) const;
  [[nodiscard]] bool empty() const { return count_ == 0; }

 private:
  template <typename F>
  void for_each_near(double x, double y, F&& f) const;

  double amplitude_;
  double inv_two_sigma2_;
  double cutoff2_;
  double cell_;
  double origin_;
  int cells_ = 0;
  std::size_t count_ = 0;
  std::vector<int> cell_start_;
  std::vector<Point2> sorted_;
};

}  // namespace scarlab
