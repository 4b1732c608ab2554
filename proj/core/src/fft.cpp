#include "scarlab/fft.hpp"

#include <fftw3.h>

#include <map>
#include <mutex>
#include <stdexcept>
#include <utility>
#include <vector>

namespace scarlab {
namespace {

// FFTW's planner is not re-entrant.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

fftw_complex* as_fftw(cplx* p) { return reinterpret_cast<fftw_complex*>(p); }

void execute(void* plan, std::span<cplx> data, std::size_t expected) {
  if (data.size() != expected) {
    throw std::invalid_argument("AxisFft: buffer length does not match plan shape");
  }
  fftw_execute_dft(static_cast<fftw_plan>(plan), as_fftw(data.data()), as_fftw(data.data()));
}

}  // namespace

std::shared_ptr<const AxisFft> AxisFft::get(int nx, int ny) {
  std::lock_guard lock(planner_mutex());
  static std::map<std::pair<int, int>, std::shared_ptr<const AxisFft>> cache;
  auto& slot = cache[{nx, ny}];
  if (!slot) slot = std::shared_ptr<const AxisFft>(new AxisFft(nx, ny));
  return slot;
}

AxisFft::AxisFft(int nx, int ny) : nx_(nx), ny_(ny) {
  // Caller holds planner_mutex().
  std::vector<cplx> scratch(static_cast<std::size_t>(nx) * ny);
  auto* buf = as_fftw(scratch.data());
  // ESTIMATE keeps plan choice (and so rounding) identical from run to run.
  const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
  int n_row[1] = {nx};
  int n_col[1] = {ny};
  rows_fwd_ = fftw_plan_many_dft(1, n_row, ny, buf, nullptr, 1, nx, buf, nullptr, 1, nx,
                                 FFTW_FORWARD, flags);
  rows_bwd_ = fftw_plan_many_dft(1, n_row, ny, buf, nullptr, 1, nx, buf, nullptr, 1, nx,
                                 FFTW_BACKWARD, flags);
  cols_fwd_ = fftw_plan_many_dft(1, n_col, nx, buf, nullptr, nx, 1, buf, nullptr, nx, 1,
                                 FFTW_FORWARD, flags);
  cols_bwd_ = fftw_plan_many_dft(1, n_col, nx, buf, nullptr, nx, 1, buf, nullptr, nx, 1,
                                 FFTW_BACKWARD, flags);
  full_fwd_ = fftw_plan_dft_2d(ny, nx, buf, buf, FFTW_FORWARD, flags);
  full_bwd_ = fftw_plan_dft_2d(ny, nx, buf, buf, FFTW_BACKWARD, flags);
  if (!rows_fwd_ || !rows_bwd_ || !cols_fwd_ || !cols_bwd_ || !full_fwd_ || !full_bwd_) {
    throw std::runtime_error("AxisFft: FFTW planning failed");
  }
}

AxisFft::~AxisFft() {
  std::lock_guard lock(planner_mutex());
  for (void* p : {rows_fwd_, rows_bwd_, cols_fwd_, cols_bwd_, full_fwd_, full_bwd_}) {
    if (p) fftw_destroy_plan(static_cast<fftw_plan>(p));
  }
}

void AxisFft::rows(std::span<cplx> data, int sign) const {
  execute(sign < 0 ? rows_fwd_ : rows_bwd_, data, static_cast<std::size_t>(nx_) * ny_);
}

void AxisFft::cols(std::span<cplx> data, int sign) const {
  execute(sign < 0 ? cols_fwd_ : cols_bwd_, data, static_cast<std::size_t>(nx_) * ny_);
}

void AxisFft::full(std::span<cplx> data, int sign) const {
  execute(sign < 0 ? full_fwd_ : full_bwd_, data, static_cast<std::size_t>(nx_) * ny_);
}

}  // namespace scarlab
