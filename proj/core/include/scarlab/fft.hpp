#pragma once

#include <memory>
#include <span>

#include "scarlab/grid.hpp"

namespace scarlab {

/// Batched unnormalized FFTs over the rows, the columns, or the whole of an
/// nx*ny x-fastest array. Plans are built once per shape and shared; execution
/// is thread-safe and works on any (unaligned) buffer of the right length.
class AxisFft {
 public:
  static std::shared_ptr<const AxisFft> get(int nx, int ny);

  ~AxisFft();
  AxisFft(const AxisFft&) = delete;
  AxisFft& operator=(const AxisFft&) = delete;

  // sign -1 is forward (exp(-i k x)), +1 is backward; no 1/n scaling.
  void rows(std::span<cplx> data, int sign) const;
  void cols(std::span<cplx> data, int sign) const;
  void full(std::span<cplx> data, int sign) const;

  [[nodiscard]] int nx() const { return nx_; }
  [[nodiscard]] int ny() const { return ny_; }

 private:
  AxisFft(int nx, int ny);

  int nx_;
  int ny_;
  void* rows_fwd_ = nullptr;
  void* rows_bwd_ = nullptr;
  void* cols_fwd_ = nullptr;
  void* cols_bwd_ = nullptr;
  void* full_fwd_ = nullptr;
  void* full_bwd_ = nullptr;
};

}  // namespace scarlab
