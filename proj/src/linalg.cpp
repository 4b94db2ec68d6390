#include "ariann/linalg.hpp"

#include <stdexcept>
#include <string>

namespace ariann {
namespace {

void require(bool cond, const std::string& what) {
  if (!cond) throw std::invalid_argument(what);
}

void require_same_ring(const RingTensor& a, const RingTensor& b) {
  require(a.n_bits() == b.n_bits(), "ring width mismatch");
}

}  // namespace

std::size_t ConvGeometry::out_height() const {
  return (height + 2 * padding - kernel) / stride + 1;
}

std::size_t ConvGeometry::out_width() const {
  return (width + 2 * padding - kernel) / stride + 1;
}

void ConvGeometry::validate() const {
  require(batch > 0 && in_channels > 0 && out_channels > 0, "empty conv geometry");
  require(kernel > 0 && stride > 0, "kernel and stride must be positive");
  require(kernel <= height + 2 * padding && kernel <= width + 2 * padding,
          "kernel larger than padded input");
}

RingTensor matmul(const RingTensor& a, const RingTensor& b) {
  require_same_ring(a, b);
  require(a.shape().size() == 2 && b.shape().size() == 2, "matmul needs 2-d operands");
  const std::size_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
  require(b.shape()[0] == k, "matmul inner dimensions differ: " +
                                 shape_string(a.shape()) + " x " +
                                 shape_string(b.shape()));
  std::vector<std::uint64_t> out(m * n, 0);
  const auto A = a.data();
  const auto B = b.data();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const std::uint64_t av = A[i * k + p];
      if (av == 0) continue;
      const std::uint64_t* brow = B.data() + p * n;
      std::uint64_t* orow = out.data() + i * n;
      for (std::size_t j = 0; j < n; ++j) orow[j] += av * brow[j];
    }
  }
  return RingTensor::wrap({m, n}, a.n_bits(), std::move(out));
}

RingTensor transpose(const RingTensor& a) {
  require(a.shape().size() == 2, "transpose needs a 2-d tensor");
  const std::size_t m = a.shape()[0], n = a.shape()[1];
  std::vector<std::uint64_t> out(m * n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[j * m + i] = a[i * n + j];
  return RingTensor({n, m}, a.n_bits(), std::move(out));
}

RingTensor unroll(const RingTensor& x, const ConvGeometry& g) {
  g.validate();
  require(x.shape() == g.input_shape(), "unroll input " + shape_string(x.shape()) +
                                            " does not match geometry " +
                                            shape_string(g.input_shape()));
  const std::size_t ho = g.out_height(), wo = g.out_width(), k = g.kernel;
  const std::size_t cols = g.patch_cols();
  std::vector<std::uint64_t> out(g.patch_rows() * cols, 0);
  std::size_t row = 0;
  for (std::size_t b = 0; b < g.batch; ++b) {
    for (std::size_t oy = 0; oy < ho; ++oy) {
      for (std::size_t ox = 0; ox < wo; ++ox, ++row) {
        std::size_t col = 0;
        for (std::size_t c = 0; c < g.in_channels; ++c) {
          for (std::size_t ky = 0; ky < k; ++ky) {
            for (std::size_t kx = 0; kx < k; ++kx, ++col) {
              const long iy = static_cast<long>(oy * g.stride + ky) -
                              static_cast<long>(g.padding);
              const long ix = static_cast<long>(ox * g.stride + kx) -
                              static_cast<long>(g.padding);
              if (iy < 0 || ix < 0 || iy >= static_cast<long>(g.height) ||
                  ix >= static_cast<long>(g.width)) {
                continue;
              }
              out[row * cols + col] =
                  x[((b * g.in_channels + c) * g.height + iy) * g.width + ix];
            }
          }
        }
      }
    }
  }
  return RingTensor({g.patch_rows(), cols}, x.n_bits(), std::move(out));
}

RingTensor fold(const RingTensor& patches, const ConvGeometry& g) {
  g.validate();
  require(patches.shape() == Shape{g.patch_rows(), g.patch_cols()},
          "fold input does not match geometry");
  const std::size_t ho = g.out_height(), wo = g.out_width(), k = g.kernel;
  const std::size_t cols = g.patch_cols();
  std::vector<std::uint64_t> out(shape_size(g.input_shape()), 0);
  std::size_t row = 0;
  for (std::size_t b = 0; b < g.batch; ++b) {
    for (std::size_t oy = 0; oy < ho; ++oy) {
      for (std::size_t ox = 0; ox < wo; ++ox, ++row) {
        std::size_t col = 0;
        for (std::size_t c = 0; c < g.in_channels; ++c) {
          for (std::size_t ky = 0; ky < k; ++ky) {
            for (std::size_t kx = 0; kx < k; ++kx, ++col) {
              const long iy = static_cast<long>(oy * g.stride + ky) -
                              static_cast<long>(g.padding);
              const long ix = static_cast<long>(ox * g.stride + kx) -
                              static_cast<long>(g.padding);
              if (iy < 0 || ix < 0 || iy >= static_cast<long>(g.height) ||
                  ix >= static_cast<long>(g.width)) {
                continue;
              }
              out[((b * g.in_channels + c) * g.height + iy) * g.width + ix] +=
                  patches[row * cols + col];
            }
          }
        }
      }
    }
  }
  return RingTensor::wrap(g.input_shape(), patches.n_bits(), std::move(out));
}

RingTensor unroll(const RingTensor& x, std::size_t k, std::size_t s) {
  require(x.shape().size() == 2 && x.shape()[0] == x.shape()[1],
          "unroll expects a square matrix");
  const std::size_t m = x.shape()[0];
  require(k <= m, "kernel size exceeds matrix size");
  ConvGeometry g;
  g.height = g.width = m;
  g.kernel = k;
  g.stride = s;
  return unroll(x.reshaped(g.input_shape()), g);
}

RingTensor channels_last(const RingTensor& y, const ConvGeometry& g) {
  require(y.shape() == g.output_shape(), "channels_last shape mismatch");
  const std::size_t plane = g.out_height() * g.out_width();
  const std::size_t o = g.out_channels;
  std::vector<std::uint64_t> out(y.size());
  for (std::size_t b = 0; b < g.batch; ++b)
    for (std::size_t c = 0; c < o; ++c)
      for (std::size_t p = 0; p < plane; ++p)
        out[(b * plane + p) * o + c] = y[(b * o + c) * plane + p];
  return RingTensor({g.patch_rows(), o}, y.n_bits(), std::move(out));
}

RingTensor channels_first(const RingTensor& rows, const ConvGeometry& g) {
  require(rows.shape() == Shape{g.patch_rows(), g.out_channels},
          "channels_first shape mismatch");
  const std::size_t plane = g.out_height() * g.out_width();
  const std::size_t o = g.out_channels;
  std::vector<std::uint64_t> out(rows.size());
  for (std::size_t b = 0; b < g.batch; ++b)
    for (std::size_t c = 0; c < o; ++c)
      for (std::size_t p = 0; p < plane; ++p)
        out[(b * o + c) * plane + p] = rows[(b * plane + p) * o + c];
  return RingTensor(g.output_shape(), rows.n_bits(), std::move(out));
}

RingTensor conv2d(const RingTensor& x, const RingTensor& kernel,
                  const ConvGeometry& g) {
  require_same_ring(x, kernel);
  require(kernel.shape() == g.kernel_shape(), "kernel " + shape_string(kernel.shape()) +
                                                  " does not match geometry " +
                                                  shape_string(g.kernel_shape()));
  const RingTensor cols = unroll(x, g);
  const RingTensor kflat =
      kernel.reshaped({g.out_channels, g.patch_cols()});
  return channels_first(matmul(cols, transpose(kflat)), g);
}

RingTensor sum_leading(const RingTensor& a) {
  require(!a.shape().empty(), "sum over empty shape");
  Shape rest(a.shape().begin() + 1, a.shape().end());
  if (rest.empty()) rest = {1};
  const std::size_t inner = shape_size(rest);
  std::vector<std::uint64_t> out(inner, 0);
  for (std::size_t i = 0; i < a.size(); ++i) out[i % inner] += a[i];
  return RingTensor::wrap(rest, a.n_bits(), std::move(out));
}

RingTensor add_rows(const RingTensor& a, const RingTensor& row) {
  require_same_ring(a, row);
  require(a.shape().size() >= 2, "add_rows expects [B, F]");
  const std::size_t f = a.size() / a.shape()[0];
  require(row.size() == f, "row length mismatch");
  std::vector<std::uint64_t> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + row[i % f];
  return RingTensor::wrap(a.shape(), a.n_bits(), std::move(out));
}

RingTensor sum_channels(const RingTensor& a) {
  require(a.shape().size() == 4, "sum_channels expects [B,C,H,W]");
  const std::size_t c = a.shape()[1];
  const std::size_t plane = a.shape()[2] * a.shape()[3];
  std::vector<std::uint64_t> out(c, 0);
  for (std::size_t i = 0; i < a.size(); ++i) out[(i / plane) % c] += a[i];
  return RingTensor::wrap({c}, a.n_bits(), std::move(out));
}

RingTensor add_channels(const RingTensor& a, const RingTensor& bias) {
  require_same_ring(a, bias);
  require(a.shape().size() == 4 && bias.size() == a.shape()[1],
          "add_channels expects [B,C,H,W] and [C]");
  const std::size_t c = a.shape()[1];
  const std::size_t plane = a.shape()[2] * a.shape()[3];
  std::vector<std::uint64_t> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + bias[(i / plane) % c];
  return RingTensor::wrap(a.shape(), a.n_bits(), std::move(out));
}

}  // namespace ariann
