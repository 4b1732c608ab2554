#include "scarlab/potential.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

namespace scarlab {

void validate(const ConfinementParams& params) {
  if (!(params.omega0 > 0.0) || !std::isfinite(params.omega0)) {
    throw std::invalid_argument("omega0 must be positive and finite");
  }
  if (!std::isfinite(params.B)) throw std::invalid_argument("B must be finite");
}

void validate(const BumpSet& bumps) {
  if (!(bumps.sigma > 0.0) || !std::isfinite(bumps.sigma)) {
    throw std::invalid_argument("bump sigma must be positive");
  }
  if (!std::isfinite(bumps.amplitude)) throw std::invalid_argument("bump amplitude must be finite");
  for (const auto& p : bumps.positions) {
    if (!std::isfinite(p.x) || !std::isfinite(p.y)) {
      throw std::invalid_argument("bump position must be finite");
    }
  }
}

RealField harmonic_field(const Grid2D& grid, const ConfinementParams& params) {
  RealField v(grid);
  const double w2 = 0.5 * params.omega0 * params.omega0;
  for (int j = 0; j < grid.ny; ++j) {
    const double y = grid.y(j);
    for (int i = 0; i < grid.nx; ++i) {
      const double x = grid.x(i);
      v(i, j) = w2 * (x * x + y * y);
    }
  }
  return v;
}

double fwhm_to_sigma(double fwhm) {
  if (!(fwhm > 0.0) || !std::isfinite(fwhm)) throw std::invalid_argument("fwhm must be positive");
  return fwhm / (2.0 * std::sqrt(2.0 * std::numbers::ln2));
}

BumpSet sample_bumps(std::uint64_t seed, double density, double region, double amplitude,
                     double sigma) {
  if (!(density > 0.0)) throw std::invalid_argument("bump density must be positive");
  if (!(region > 0.0)) throw std::invalid_argument("bump region must be positive");
  BumpSet set;
  set.amplitude = amplitude;
  set.sigma = sigma;
  set.region = region;
  set.seed = seed;
  validate(set);

  const auto count = static_cast<std::size_t>(std::llround(density * 4.0 * region * region));
  std::mt19937_64 rng(seed);
  auto unit = [&rng] { return static_cast<double>(rng() >> 11) * 0x1.0p-53; };
  set.positions.reserve(count);
  for (std::size_t n = 0; n < count; ++n) {
    const double x = region * (2.0 * unit() - 1.0);
    const double y = region * (2.0 * unit() - 1.0);
    set.positions.push_back({x, y});
  }
  return set;
}

BumpSet single_bump(Point2 position, double amplitude, double sigma, double region) {
  BumpSet set;
  set.positions = {position};
  set.amplitude = amplitude;
  set.sigma = sigma;
  set.region = region;
  validate(set);
  return set;
}

RealField bump_field(const Grid2D& grid, const BumpSet& bumps) {
  RealField v(grid);
  if (bumps.empty()) return v;
  validate(bumps);
  const double c = 1.0 / (2.0 * bumps.sigma * bumps.sigma);
  std::vector<double> gx(static_cast<std::size_t>(grid.nx));
  std::vector<double> gy(static_cast<std::size_t>(grid.ny));
  // exp(-|r-ri|^2 c) = exp(-(x-xi)^2 c) exp(-(y-yi)^2 c)
  for (const auto& p : bumps.positions) {
    for (int i = 0; i < grid.nx; ++i) {
      const double d = grid.x(i) - p.x;
      gx[static_cast<std::size_t>(i)] = std::exp(-d * d * c);
    }
    for (int j = 0; j < grid.ny; ++j) {
      const double d = grid.y(j) - p.y;
      gy[static_cast<std::size_t>(j)] = bumps.amplitude * std::exp(-d * d * c);
    }
    for (int j = 0; j < grid.ny; ++j) {
      const double wy = gy[static_cast<std::size_t>(j)];
      if (wy == 0.0) continue;
      double* row = v.values.data() + grid.index(0, j);
      for (int i = 0; i < grid.nx; ++i) row[i] += wy * gx[static_cast<std::size_t>(i)];
    }
  }
  return v;
}

double bump_potential(const BumpSet& bumps, double x, double y) {
  const double c = 1.0 / (2.0 * bumps.sigma * bumps.sigma);
  double acc = 0.0;
  for (const auto& p : bumps.positions) {
    const double dx = x - p.x;
    const double dy = y - p.y;
    acc += std::exp(-(dx * dx + dy * dy) * c);
  }
  return bumps.amplitude * acc;
}

BumpSet rotate_bumps(const BumpSet& bumps, double theta) {
  BumpSet out = bumps;
  const double c = std::cos(theta);
  const double s = std::sin(theta);
  for (auto& p : out.positions) {
    const double x = p.x;
    const double y = p.y;
    p.x = c * x - s * y;
    p.y = s * x + c * y;
  }
  return out;
}

RealField total_potential(const Grid2D& grid, const ConfinementParams& params,
                          const BumpSet& bumps) {
  RealField v = harmonic_field(grid, params);
  if (!bumps.empty()) {
    const RealField b = bump_field(grid, bumps);
    for (std::size_t n = 0; n < v.values.size(); ++n) v.values[n] += b.values[n];
  }
  return v;
}

BumpLookup::BumpLookup(const BumpSet& bumps, double cutoff_sigmas)
    : amplitude_(bumps.amplitude),
      inv_two_sigma2_(1.0 / (2.0 * bumps.sigma * bumps.sigma)),
      cutoff2_(cutoff_sigmas * cutoff_sigmas * bumps.sigma * bumps.sigma),
      cell_(cutoff_sigmas * bumps.sigma),
      origin_(0.0),
      count_(bumps.positions.size()) {
  if (count_ == 0) return;
  validate(bumps);
  double extent = 0.0;
  for (const auto& p : bumps.positions) extent = std::max({extent, std::abs(p.x), std::abs(p.y)});
  origin_ = -extent - cell_;
  cells_ = static_cast<int>(std::ceil(2.0 * (extent + cell_) / cell_)) + 1;
  const auto n_cells = static_cast<std::size_t>(cells_) * static_cast<std::size_t>(cells_);

  auto cell_of = [this](const Point2& p) {
    const int cx = static_cast<int>(std::floor((p.x - origin_) / cell_));
    const int cy = static_cast<int>(std::floor((p.y - origin_) / cell_));
    return static_cast<std::size_t>(cy) * static_cast<std::size_t>(cells_) +
           static_cast<std::size_t>(cx);
  };
  cell_start_.assign(n_cells + 1, 0);
  for (const auto& p : bumps.positions) ++cell_start_[cell_of(p) + 1];
  for (std::size_t c = 0; c < n_cells; ++c) cell_start_[c + 1] += cell_start_[c];
  sorted_.resize(count_);
  std::vector<int> fill(cell_start_.begin(), cell_start_.end() - 1);
  for (const auto& p : bumps.positions) sorted_[static_cast<std::size_t>(fill[cell_of(p)]++)] = p;
}

template <typename F>
void BumpLookup::for_each_near(double x, double y, F&& f) const {
  const int cx = static_cast<int>(std::floor((x - origin_) / cell_));
  const int cy = static_cast<int>(std::floor((y - origin_) / cell_));
  for (int j = std::max(cy - 1, 0); j <= std::min(cy + 1, cells_ - 1); ++j) {
    for (int i = std::max(cx - 1, 0); i <= std::min(cx + 1, cells_ - 1); ++i) {
      const auto c = static_cast<std::size_t>(j) * static_cast<std::size_t>(cells_) +
                     static_cast<std::size_t>(i);
      for (int n = cell_start_[c]; n < cell_start_[c + 1]; ++n) {
        const Point2& p = sorted_[static_cast<std::size_t>(n)];
        const double dx = x - p.x;
        const double dy = y - p.y;
        const double r2 = dx * dx + dy * dy;
        if (r2 < cutoff2_) f(dx, dy, r2);
      }
    }
  }
}

double BumpLookup::value(double x, double y) const {
  double acc = 0.0;
  if (count_ == 0) return acc;
  for_each_near(x, y, [&](double, double, double r2) { acc += std::exp(-r2 * inv_two_sigma2_); });
  return amplitude_ * acc;
}

void BumpLookup::value_and_gradient(double x, double y, double& v, double& gx, double& gy) const {
  v = gx = gy = 0.0;
  if (count_ == 0) return;
  for_each_near(x, y, [&](double dx, double dy, double r2) {
    const double e = std::exp(-r2 * inv_two_sigma2_);
    v += e;
    gx += dx * e;
    gy += dy * e;
  });
  const double k = -2.0 * inv_two_sigma2_ * amplitude_;
  v *= amplitude_;
  gx *= k;
  gy *= k;
}

}  // namespace scarlab
