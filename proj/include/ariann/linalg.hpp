#pragma once

#include <cstddef>
#include <cstdint>

#include "ariann/ring_tensor.hpp"

// Plaintext linear kernels over Z_{2^n}. They are what the dealer uses to
// build triples and what each party applies to its own shares, since every
// function here is (bi)linear.
namespace ariann {

struct ConvGeometry {
  std::size_t batch = 1;
  std::size_t in_channels = 1;
  std::size_t height = 1;
  std::size_t width = 1;
  std::size_t out_channels = 1;
  std::size_t kernel = 1;
  std::size_t stride = 1;
  std::size_t padding = 0;

  std::size_t out_height() const;
  std::size_t out_width() const;
  Shape input_shape() const { return {batch, in_channels, height, width}; }
  Shape kernel_shape() const { return {out_channels, in_channels, kernel, kernel}; }
  Shape output_shape() const { return {batch, out_channels, out_height(), out_width()}; }
  // Rows and columns of the unrolled (im2col) input.
  std::size_t patch_rows() const { return batch * out_height() * out_width(); }
  std::size_t patch_cols() const { return in_channels * kernel * kernel; }
  void validate() const;

  bool operator==(const ConvGeometry&) const = default;
};

// [m,k] x [k,n] -> [m,n]
RingTensor matmul(const RingTensor& a, const RingTensor& b);
RingTensor transpose(const RingTensor& a);

// Cross-correlation of a [B,C,H,W] input with [O,C,k,k] kernels.
RingTensor conv2d(const RingTensor& x, const RingTensor& kernel,
                  const ConvGeometry& g);

// im2col: [B,C,H,W] -> [B*Ho*Wo, C*k*k]. Row r lists the r-th window in
// row-major order (channel, then kernel row, then kernel column).
RingTensor unroll(const RingTensor& x, const ConvGeometry& g);
// Adjoint of unroll: scatters-and-adds patch rows back to [B,C,H,W].
RingTensor fold(const RingTensor& patches, const ConvGeometry& g);

// Single-channel m x m matrix, kernel k, stride s, no padding:
// -> floor((m-k)/s+1)^2 x k^2.
RingTensor unroll(const RingTensor& x, std::size_t k, std::size_t s);

// [B,O,Ho,Wo] <-> [B*Ho*Wo, O]
RingTensor channels_last(const RingTensor& y, const ConvGeometry& g);
RingTensor channels_first(const RingTensor& rows, const ConvGeometry& g);

// Sum over the leading axis: [B, ...] -> [...].
RingTensor sum_leading(const RingTensor& a);
// Adds a [F] row to every row of [B, F].
RingTensor add_rows(const RingTensor& a, const RingTensor& row);
// Sum over all axes but the channel axis of [B,C,H,W] -> [C].
RingTensor sum_channels(const RingTensor& a);
// Adds a [C] vector to every channel of [B,C,H,W].
RingTensor add_channels(const RingTensor& a, const RingTensor& bias);

}  // namespace ariann
