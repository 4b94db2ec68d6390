#include "ariann/ring_tensor.hpp"

#include <numeric>
#include <sstream>
#include <stdexcept>

namespace ariann {

std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

void check_ring_bits(int n_bits) {
  if (n_bits < 4 || n_bits > 64) {
    throw std::invalid_argument("ring width must be in [4, 64], got " +
                                std::to_string(n_bits));
  }
}

RingTensor::RingTensor(Shape shape, int n_bits)
    : shape_(std::move(shape)), n_bits_(n_bits) {
  check_ring_bits(n_bits);
  data_.assign(shape_size(shape_), 0);
}

RingTensor::RingTensor(Shape shape, int n_bits, std::vector<std::uint64_t> data)
    : shape_(std::move(shape)), n_bits_(n_bits), data_(std::move(data)) {
  check_ring_bits(n_bits);
  if (shape_size(shape_) != data_.size()) {
    throw std::invalid_argument("shape " + shape_string(shape_) +
                                " does not match " +
                                std::to_string(data_.size()) + " elements");
  }
  const std::uint64_t m = mask();
  for (std::uint64_t v : data_) {
    if (v & ~m) {
      throw std::invalid_argument("element exceeds ring Z_2^" +
                                  std::to_string(n_bits));
    }
  }
}

RingTensor RingTensor::scalar(std::uint64_t v, int n_bits) {
  return wrap({1}, n_bits, {v});
}

RingTensor RingTensor::from_signed(Shape shape, int n_bits,
                                   std::span<const std::int64_t> values) {
  std::vector<std::uint64_t> data(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    data[i] = ariann::from_signed(values[i], n_bits);
  }
  return RingTensor(std::move(shape), n_bits, std::move(data));
}

RingTensor RingTensor::wrap(Shape shape, int n_bits,
                            std::vector<std::uint64_t> data) {
  check_ring_bits(n_bits);
  const std::uint64_t m = ring_mask(n_bits);
  for (auto& v : data) v &= m;
  return RingTensor(std::move(shape), n_bits, std::move(data));
}

RingTensor RingTensor::reshaped(Shape shape) const {
  if (shape_size(shape) != data_.size()) {
    throw std::invalid_argument("cannot reshape " + shape_string(shape_) +
                                " to " + shape_string(shape));
  }
  RingTensor out = *this;
  out.shape_ = std::move(shape);
  return out;
}

RingTensor RingTensor::reduced(int n_bits) const {
  return wrap(shape_, n_bits, data_);
}

std::vector<std::int64_t> RingTensor::signed_values() const {
  std::vector<std::int64_t> out(data_.size());
  for (std::size_t i = 0; i < data_.size(); ++i) {
    out[i] = to_signed(data_[i], n_bits_);
  }
  return out;
}

RingTensor ring_arith(RingOp op, const RingTensor& a, const RingTensor* b) {
  if (op == RingOp::kNeg) {
    std::vector<std::uint64_t> out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = 0 - a[i];
    return RingTensor::wrap(a.shape(), a.n_bits(), std::move(out));
  }
  if (b == nullptr) throw std::invalid_argument("binary ring op needs two operands");
  if (a.n_bits() != b->n_bits()) {
    throw std::invalid_argument("ring width mismatch: " +
                                std::to_string(a.n_bits()) + " vs " +
                                std::to_string(b->n_bits()));
  }
  // A one-element vector is a scalar and broadcasts to any shape.
  const bool broadcast = b->size() == 1 && (a.size() != 1 || b->shape().size() <= 1);
  if (!broadcast && a.shape() != b->shape()) {
    throw std::invalid_argument("shape mismatch: " + shape_string(a.shape()) +
                                " vs " + shape_string(b->shape()));
  }
  std::vector<std::uint64_t> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    const std::uint64_t rhs = broadcast ? (*b)[0] : (*b)[i];
    switch (op) {
      case RingOp::kAdd: out[i] = a[i] + rhs; break;
      case RingOp::kSub: out[i] = a[i] - rhs; break;
      case RingOp::kMul: out[i] = a[i] * rhs; break;
      case RingOp::kNeg: break;
    }
  }
  return RingTensor::wrap(a.shape(), a.n_bits(), std::move(out));
}

RingTensor operator+(const RingTensor& a, const RingTensor& b) {
  return ring_arith(RingOp::kAdd, a, &b);
}
RingTensor operator-(const RingTensor& a, const RingTensor& b) {
  return ring_arith(RingOp::kSub, a, &b);
}
RingTensor operator*(const RingTensor& a, const RingTensor& b) {
  return ring_arith(RingOp::kMul, a, &b);
}
RingTensor operator-(const RingTensor& a) {
  return ring_arith(RingOp::kNeg, a, nullptr);
}

std::vector<RingTensor> bit_decompose(const RingTensor& a) {
  const int n = a.n_bits();
  std::vector<RingTensor> bits;
  bits.reserve(n);
  for (int i = 1; i <= n; ++i) {
    std::vector<std::uint64_t> plane(a.size());
    for (std::size_t e = 0; e < a.size(); ++e) {
      plane[e] = static_cast<std::uint64_t>(bit_at(a[e], i, n));
    }
    bits.emplace_back(a.shape(), n, std::move(plane));
  }
  return bits;
}

RingTensor recompose_bits(std::span<const RingTensor> bits, int n_bits) {
  if (bits.size() != static_cast<std::size_t>(n_bits)) {
    throw std::invalid_argument("expected one bit plane per ring bit");
  }
  RingTensor out(bits.front().shape(), n_bits);
  std::vector<std::uint64_t> acc(out.size(), 0);
  for (int i = 1; i <= n_bits; ++i) {
    const auto& plane = bits[i - 1];
    for (std::size_t e = 0; e < acc.size(); ++e) {
      acc[e] |= (plane[e] & 1U) << (n_bits - i);
    }
  }
  return RingTensor::wrap(out.shape(), n_bits, std::move(acc));
}

std::vector<std::int64_t> signed_value(const RingTensor& a) {
  return a.signed_values();
}

}  // namespace ariann
